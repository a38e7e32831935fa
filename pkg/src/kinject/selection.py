"""Relevant-but-diverse snippet subsets via a determinantal kernel.

Each snippet gets a relevance score (how much it raises the history's
likelihood) and each pair a redundancy score (mutual likelihood lift,
symmetrized).  Clamped squares fill a kernel whose diagonal carries
relevance and whose off-diagonal carries beta-scaled redundancy; beta is
halved until the kernel factorizes, and subsets are grown greedily by
maximal determinant gain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericFailure, OracleScaleError
from .lm import LMParams, log_prob, state_after

JITTER = 1e-8
GAIN_FLOOR = 1e-12
BRUTE_FORCE_LIMIT = 20


@dataclass
class RelRedScores:
    rel: np.ndarray  # (N,)
    red: np.ndarray  # (N, N) symmetric, diagonal unused (zero)


@dataclass
class DppKernel:
    D: np.ndarray
    beta_used: float
    jitter_used: float
    psd_certified: bool

    @property
    def size(self) -> int:
        return self.D.shape[0]


def rel_score(scorer: LMParams, snippet_ids, history_ids) -> float:
    """How much conditioning on the snippet raises the history's
    log-likelihood: log p(H | k) - log p(H)."""
    if not list(snippet_ids) or not list(history_ids):
        raise ValueError("snippet and history must be non-empty")
    return log_prob(scorer, history_ids, snippet_ids) - log_prob(scorer, history_ids)


def red_score(scorer: LMParams, ids_i, ids_j) -> float:
    """Mutual likelihood lift between two snippets, exactly symmetric:
    the two conditional directions are averaged."""
    if not list(ids_i) or not list(ids_j):
        raise ValueError("snippets must be non-empty")
    lift_ij = log_prob(scorer, ids_j, ids_i) - log_prob(scorer, ids_j)
    lift_ji = log_prob(scorer, ids_i, ids_j) - log_prob(scorer, ids_i)
    return 0.5 * (lift_ij + lift_ji)


def score_pool(scorer: LMParams, snippet_ids_list: list[list[int]],
               history_ids) -> RelRedScores:
    """All relevance and pairwise redundancy scores for a snippet pool.

    Per-snippet context states and marginals are computed once, so the
    N^2 pair loop re-runs only the conditioned directions.  Values equal
    the single-pair operations exactly.
    """
    n = len(snippet_ids_list)
    if n == 0:
        raise ValueError("empty snippet pool")
    history_ids = list(history_ids)
    states = [state_after(scorer, ids) for ids in snippet_ids_list]
    marginals = [log_prob(scorer, ids) for ids in snippet_ids_list]
    history_marginal = log_prob(scorer, history_ids)
    rel = np.array([
        log_prob(scorer, history_ids, h0=states[i]) - history_marginal
        for i in range(n)
    ])
    red = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            lift_ij = log_prob(scorer, snippet_ids_list[j], h0=states[i]) - marginals[j]
            lift_ji = log_prob(scorer, snippet_ids_list[i], h0=states[j]) - marginals[i]
            value = 0.5 * (lift_ij + lift_ji)
            red[i, j] = value
            red[j, i] = value
    return RelRedScores(rel=rel, red=red)


def _assemble(scores: RelRedScores, beta: float) -> np.ndarray:
    clamped_red = np.maximum(scores.red, 0.0)
    d = beta * clamped_red**2
    np.fill_diagonal(d, np.maximum(scores.rel, 0.0) ** 2)
    return d


def build_kernel(scores: RelRedScores, beta_init: float = 1.0) -> DppKernel:
    """Kernel with clamped-square entries, halving beta until it
    factorizes with a tiny diagonal jitter."""
    n = scores.rel.shape[0]
    if n == 0:
        raise ValueError("cannot build a kernel from an empty score set")
    if not 0.0 < beta_init <= 1.0:
        raise ValueError(f"beta_init must be in (0, 1], got {beta_init}")
    if not (np.all(np.isfinite(scores.rel)) and np.all(np.isfinite(scores.red))):
        raise NumericFailure("non-finite relevance/redundancy scores",
                             {"stage": "kernel-build"})
    beta = beta_init
    for _ in range(200):
        d = _assemble(scores, beta)
        try:
            np.linalg.cholesky(d + JITTER * np.eye(n))
            return DppKernel(D=d, beta_used=beta, jitter_used=JITTER,
                             psd_certified=True)
        except np.linalg.LinAlgError:
            beta *= 0.5
    raise NumericFailure("kernel failed to factorize at any beta",
                         {"stage": "kernel-build", "beta_final": beta})


def greedy_map(kernel: DppKernel, b: int, naive: bool = False) -> list[int]:
    """Greedy max-determinant subset of up to ``b`` indices, in pick order.

    The first pick is the largest diagonal entry (ties to the lowest
    index); every later pick maximizes the determinant of the grown
    submatrix.  Items whose marginal gain is not positive are skipped,
    so fewer than ``b`` indices may come back.  The default path tracks
    marginal gains through an incremental Cholesky factor; ``naive``
    recomputes determinants from scratch as a cross-check.
    """
    if b < 1:
        raise ValueError(f"selection size must be >= 1, got {b}")
    if naive:
        return _greedy_map_naive(kernel.D, min(b, kernel.size))
    d = kernel.D
    n = kernel.size
    b = min(b, n)
    cis = np.zeros((b, n))
    di2s = np.diag(d).astype(float).copy()
    j = int(np.argmax(di2s))
    if di2s[j] <= GAIN_FLOOR:
        return []
    selected = [j]
    while len(selected) < b:
        k = len(selected) - 1
        ci_opt = cis[:k, j]
        di_opt = math.sqrt(di2s[j])
        eis = (d[j, :] - ci_opt @ cis[:k, :]) / di_opt
        cis[k, :] = eis
        di2s -= eis**2
        di2s[selected] = -np.inf
        j = int(np.argmax(di2s))
        if di2s[j] <= GAIN_FLOOR:
            break
        selected.append(j)
    return selected


def _greedy_map_naive(d: np.ndarray, b: int) -> list[int]:
    n = d.shape[0]
    diag = np.diag(d)
    j = int(np.argmax(diag))
    if diag[j] <= GAIN_FLOOR:
        return []
    selected = [j]
    current_det = float(diag[j])
    while len(selected) < b:
        best_idx, best_det = -1, -np.inf
        for i in range(n):
            if i in selected:
                continue
            rows = selected + [i]
            det = float(np.linalg.det(d[np.ix_(rows, rows)]))
            if det > best_det:
                best_idx, best_det = i, det
        if best_idx < 0 or best_det <= GAIN_FLOOR * current_det:
            break
        selected.append(best_idx)
        current_det = best_det
    return selected


def selection_logdets(kernel: DppKernel, selected: list[int]) -> list[float]:
    """Log-determinant of the grown submatrix after each pick."""
    out = []
    for end in range(1, len(selected) + 1):
        rows = selected[:end]
        sign, logdet = np.linalg.slogdet(kernel.D[np.ix_(rows, rows)])
        out.append(float(logdet) if sign > 0 else float("-inf"))
    return out


def brute_force_map(kernel: DppKernel, b: int) -> list[int]:
    """Exhaustive max-determinant subset (test oracle).

    Ties resolve to the lexicographically first combination.  Guarded
    to small pools.
    """
    n = kernel.size
    if n > BRUTE_FORCE_LIMIT:
        raise OracleScaleError(
            f"exhaustive search limited to {BRUTE_FORCE_LIMIT} items, got {n}")
    if not 1 <= b <= n:
        raise ValueError(f"selection size must be in [1, {n}], got {b}")
    best, best_det = None, -np.inf
    for combo in itertools.combinations(range(n), b):
        det = float(np.linalg.det(kernel.D[np.ix_(combo, combo)]))
        if det > best_det:
            best, best_det = combo, det
    return list(best)
