import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kinject import lmkernels
from kinject.lmkernels import gru_numpy

gru_cython = pytest.importorskip(
    "kinject.lmkernels.gru_cython",
    reason="compiled recurrence extension is not built")


def random_case(seed, T=17, d=12):
    rng = np.random.default_rng(seed)
    pre = rng.normal(size=(T, 3 * d))
    u_rec = rng.normal(size=(d, 3 * d)) * 0.3
    h0 = rng.normal(size=d)
    return pre, u_rec, h0


class TestForwardParity:
    @pytest.mark.parametrize("seed", range(8))
    def test_states_agree_to_float_rounding(self, seed):
        pre, u_rec, h0 = random_case(seed)
        h_np = gru_numpy.gru_forward(pre, u_rec, h0)
        h_cy = gru_cython.gru_forward(pre, u_rec, h0)
        assert_allclose(h_cy, h_np, rtol=0, atol=1e-10)

    def test_caches_agree(self):
        pre, u_rec, h0 = random_case(99)
        h_np, cache_np = gru_numpy.gru_forward(pre, u_rec, h0, want_cache=True)
        h_cy, cache_cy = gru_cython.gru_forward(pre, u_rec, h0, want_cache=True)
        assert_allclose(h_cy, h_np, rtol=0, atol=1e-10)
        for a, b in zip(cache_cy, cache_np):
            assert_allclose(a, b, rtol=0, atol=1e-10)

    def test_single_step(self):
        pre, u_rec, h0 = random_case(5, T=1, d=6)
        assert_allclose(gru_cython.gru_forward(pre, u_rec, h0),
                        gru_numpy.gru_forward(pre, u_rec, h0),
                        rtol=0, atol=1e-12)


class TestBackwardParity:
    @pytest.mark.parametrize("seed", range(8))
    def test_gradients_agree_to_float_rounding(self, seed):
        pre, u_rec, h0 = random_case(seed)
        h_np, cache_np = gru_numpy.gru_forward(pre, u_rec, h0, want_cache=True)
        h_cy, cache_cy = gru_cython.gru_forward(pre, u_rec, h0, want_cache=True)
        dH = np.random.default_rng(seed + 1000).normal(size=h_np.shape)
        out_np = gru_numpy.gru_backward(dH, u_rec, h0, h_np, cache_np)
        out_cy = gru_cython.gru_backward(dH, u_rec, h0, h_cy, cache_cy)
        for a, b in zip(out_cy, out_np):
            assert_allclose(a, b, rtol=0, atol=1e-10)


class TestBackendSelection:
    def test_compiled_backend_selected_by_default(self):
        env = {k: v for k, v in os.environ.items() if k != "KINJECT_PURE_PYTHON"}
        out = subprocess.run(
            [sys.executable, "-c",
             "from kinject.lmkernels import BACKEND; print(BACKEND)"],
            capture_output=True, text=True, env=env, check=True)
        assert out.stdout.strip() == "cython"

    def test_env_var_forces_pure_python(self):
        env = dict(os.environ, KINJECT_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c",
             "from kinject.lmkernels import BACKEND; print(BACKEND)"],
            capture_output=True, text=True, env=env, check=True)
        assert out.stdout.strip() == "numpy"

    def test_selected_functions_match_backend(self):
        if lmkernels.BACKEND == "cython":
            assert lmkernels.gru_forward is gru_cython.gru_forward
        else:
            assert lmkernels.gru_forward is gru_numpy.gru_forward


class TestFallbackEndToEnd:
    def test_likelihood_identical_under_fallback(self, tmp_path):
        """The same tiny scoring job run in a pure-python subprocess must
        produce bitwise-equal numbers to the in-process compiled path."""
        script = (
            "from kinject.lm import init_params, log_prob\n"
            "p = init_params(13, dim=6, seed=4)\n"
            "print(repr(log_prob(p, [7, 8, 9, 10], [11, 12])))\n")
        here = subprocess.run([sys.executable, "-c", script],
                              capture_output=True, text=True, check=True,
                              env={k: v for k, v in os.environ.items()
                                   if k != "KINJECT_PURE_PYTHON"})
        pure = subprocess.run([sys.executable, "-c", script],
                              capture_output=True, text=True, check=True,
                              env=dict(os.environ, KINJECT_PURE_PYTHON="1"))
        a = float(here.stdout.strip())
        b = float(pure.stdout.strip())
        assert_allclose(b, a, rtol=0, atol=1e-10)
