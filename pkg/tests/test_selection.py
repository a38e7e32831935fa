import numpy as np
import pytest
from numpy.testing import assert_allclose

from kinject.errors import NumericFailure, OracleScaleError
from kinject.lm import init_params, log_prob
from kinject.selection import (
    DppKernel,
    RelRedScores,
    brute_force_map,
    build_kernel,
    greedy_map,
    red_score,
    rel_score,
    score_pool,
    selection_logdets,
)

V, D = 13, 4


def params(seed=0):
    return init_params(V, dim=D, seed=seed, scale=0.4)


def psd_kernel(seed, n=6) -> DppKernel:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n + 2))
    return DppKernel(D=a @ a.T, beta_used=1.0, jitter_used=0.0,
                     psd_certified=True)


SNIPS = [[7, 8], [9, 10, 11], [8, 12]]
HIST = [7, 9, 12]


class TestScores:
    def test_rel_is_conditional_lift_of_history(self):
        p = params()
        want = log_prob(p, HIST, SNIPS[0]) - log_prob(p, HIST)
        assert_allclose(rel_score(p, SNIPS[0], HIST), want, rtol=0, atol=0)

    def test_red_is_symmetric(self):
        p = params()
        assert red_score(p, SNIPS[0], SNIPS[1]) == \
            red_score(p, SNIPS[1], SNIPS[0])

    def test_red_averages_both_directions(self):
        p = params()
        lift_ij = log_prob(p, SNIPS[1], SNIPS[0]) - log_prob(p, SNIPS[1])
        lift_ji = log_prob(p, SNIPS[0], SNIPS[1]) - log_prob(p, SNIPS[0])
        assert_allclose(red_score(p, SNIPS[0], SNIPS[1]),
                        0.5 * (lift_ij + lift_ji), rtol=0, atol=0)

    def test_identical_snippets_score_highest_redundancy(self):
        p = params()
        dup = red_score(p, SNIPS[0], list(SNIPS[0]))
        cross = red_score(p, SNIPS[0], SNIPS[1])
        assert dup > cross

    def test_batch_pool_matches_single_pair_calls(self):
        p = params()
        scores = score_pool(p, SNIPS, HIST)
        for i, snip in enumerate(SNIPS):
            assert_allclose(scores.rel[i], rel_score(p, snip, HIST),
                            rtol=0, atol=1e-10)
        for i in range(3):
            for j in range(i + 1, 3):
                assert_allclose(scores.red[i, j],
                                red_score(p, SNIPS[i], SNIPS[j]),
                                rtol=0, atol=1e-10)

    def test_red_matrix_symmetric_zero_diagonal(self):
        scores = score_pool(params(), SNIPS, HIST)
        assert_allclose(scores.red, scores.red.T, rtol=0, atol=0)
        assert_allclose(np.diag(scores.red), np.zeros(3), rtol=0, atol=0)

    def test_empty_inputs_rejected(self):
        p = params()
        with pytest.raises(ValueError):
            rel_score(p, [], HIST)
        with pytest.raises(ValueError):
            red_score(p, SNIPS[0], [])
        with pytest.raises(ValueError):
            score_pool(p, [], HIST)


class TestBuildKernel:
    def scores(self, rel, red01):
        red = np.zeros((2, 2))
        red[0, 1] = red[1, 0] = red01
        return RelRedScores(rel=np.array(rel), red=red)

    def test_entries_by_hand(self):
        kernel = build_kernel(self.scores([2.0, 3.0], 0.5))
        assert_allclose(np.diag(kernel.D), [4.0, 9.0], rtol=0, atol=0)
        assert_allclose(kernel.D[0, 1], 0.25, rtol=0, atol=0)
        assert kernel.beta_used == 1.0
        assert kernel.psd_certified

    def test_negative_scores_clamp_to_zero(self):
        kernel = build_kernel(self.scores([-1.0, 2.0], -3.0))
        assert kernel.D[0, 0] == 0.0
        assert kernel.D[0, 1] == 0.0

    def test_beta_halves_until_factorizable(self):
        kernel = build_kernel(self.scores([0.1, 0.1], 5.0))
        assert kernel.beta_used < 1.0
        assert kernel.psd_certified
        np.linalg.cholesky(kernel.D + kernel.jitter_used * np.eye(2))
        # The diagonal never shrinks with beta.
        assert_allclose(np.diag(kernel.D), [0.01, 0.01], rtol=0, atol=1e-15)

    def test_beta_used_never_exceeds_beta_init(self):
        kernel = build_kernel(self.scores([1.0, 1.0], 0.2), beta_init=0.5)
        assert kernel.beta_used <= 0.5

    def test_bad_beta_init_rejected(self):
        with pytest.raises(ValueError):
            build_kernel(self.scores([1.0, 1.0], 0.1), beta_init=0.0)

    def test_non_finite_scores_rejected(self):
        with pytest.raises(NumericFailure):
            build_kernel(self.scores([np.nan, 1.0], 0.1))

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            build_kernel(RelRedScores(rel=np.zeros(0), red=np.zeros((0, 0))))


class TestGreedyMap:
    def test_diagonal_kernel_picks_largest_entries(self):
        d = np.diag([0.3, 2.0, 1.1, 0.7])
        kernel = DppKernel(D=d, beta_used=1.0, jitter_used=0.0,
                           psd_certified=True)
        assert greedy_map(kernel, 2) == [1, 2]

    def test_matches_exhaustive_on_random_psd(self):
        for seed in range(20):
            kernel = psd_kernel(seed)
            got = greedy_map(kernel, 3)
            best = brute_force_map(kernel, 3)
            det_got = np.linalg.det(kernel.D[np.ix_(got, got)])
            det_best = np.linalg.det(kernel.D[np.ix_(best, best)])
            assert det_got <= det_best * (1 + 1e-9)
            assert det_got >= 0.5 * det_best

    def test_fast_path_matches_naive_path(self):
        for seed in range(20):
            kernel = psd_kernel(seed)
            assert greedy_map(kernel, 3) == greedy_map(kernel, 3, naive=True)

    def test_first_pick_is_largest_diagonal(self):
        kernel = psd_kernel(7)
        first = greedy_map(kernel, 1)
        assert first == [int(np.argmax(np.diag(kernel.D)))]

    def test_b_larger_than_pool_caps(self):
        kernel = psd_kernel(3, n=4)
        assert len(greedy_map(kernel, 10)) <= 4

    def test_zero_kernel_selects_nothing(self):
        kernel = DppKernel(D=np.zeros((3, 3)), beta_used=1.0,
                           jitter_used=0.0, psd_certified=True)
        assert greedy_map(kernel, 2) == []

    def test_equal_diagonal_breaks_ties_by_index(self):
        kernel = DppKernel(D=np.eye(4) * 2.0, beta_used=1.0,
                           jitter_used=0.0, psd_certified=True)
        assert greedy_map(kernel, 2) == [0, 1]
        assert brute_force_map(kernel, 2) == [0, 1]

    def test_rejects_nonpositive_b(self):
        with pytest.raises(ValueError):
            greedy_map(psd_kernel(0), 0)


class TestOracleGuards:
    def test_logdets_grow_with_each_pick(self):
        kernel = psd_kernel(11)
        picks = greedy_map(kernel, 3)
        logdets = selection_logdets(kernel, picks)
        assert len(logdets) == len(picks)
        for end, value in enumerate(logdets, start=1):
            rows = picks[:end]
            sign, want = np.linalg.slogdet(kernel.D[np.ix_(rows, rows)])
            assert sign > 0
            assert_allclose(value, want, rtol=0, atol=1e-10)

    def test_brute_force_refuses_large_pools(self):
        big = DppKernel(D=np.eye(21), beta_used=1.0, jitter_used=0.0,
                        psd_certified=True)
        with pytest.raises(OracleScaleError):
            brute_force_map(big, 2)

    def test_brute_force_validates_b(self):
        with pytest.raises(ValueError):
            brute_force_map(psd_kernel(0), 0)
