#!/usr/bin/env python3
"""Time the compiled recurrence kernels against the numpy fallback.

Both backends are imported directly so one process can measure the two
side by side, regardless of which one the package selected at import.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --dims 64 128 --steps 200 --repeat 30
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from kinject.lmkernels import BACKEND, gru_numpy

try:
    from kinject.lmkernels import gru_cython
except ImportError:
    gru_cython = None


def _time_backend(module, pre, u_rec, h0, repeat: int) -> tuple[float, float]:
    """Median seconds per forward call and per forward+backward call."""
    fwd = []
    both = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        module.gru_forward(pre, u_rec, h0)
        fwd.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        H, cache = module.gru_forward(pre, u_rec, h0, want_cache=True)
        module.gru_backward(np.ones_like(H), u_rec, h0, H, cache)
        both.append(time.perf_counter() - t0)
    return float(np.median(fwd)), float(np.median(both))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, nargs="+", default=[32, 64, 128])
    parser.add_argument("--steps", type=int, default=120,
                        help="sequence length")
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if gru_cython is None:
        print("compiled backend unavailable; timing the fallback only")
    print(f"package-selected backend: {BACKEND}")
    print(f"{'dim':>5} {'T':>5} {'numpy fwd':>11} {'numpy f+b':>11} "
          f"{'cython fwd':>11} {'cython f+b':>11} {'speedup':>8}")
    rng = np.random.default_rng(args.seed)
    for dim in args.dims:
        pre = rng.normal(size=(args.steps, 3 * dim))
        u_rec = rng.normal(size=(dim, 3 * dim)) * 0.1
        h0 = rng.normal(size=dim)
        np_fwd, np_both = _time_backend(gru_numpy, pre, u_rec, h0, args.repeat)
        if gru_cython is not None:
            cy_fwd, cy_both = _time_backend(gru_cython, pre, u_rec, h0,
                                            args.repeat)
            h_np = gru_numpy.gru_forward(pre, u_rec, h0)
            h_cy = gru_cython.gru_forward(pre, u_rec, h0)
            drift = float(np.max(np.abs(h_np - h_cy)))
            if drift > 1e-10:
                raise AssertionError(f"backends disagree by {drift:g}")
            print(f"{dim:>5} {args.steps:>5} {np_fwd * 1e3:>9.3f}ms "
                  f"{np_both * 1e3:>9.3f}ms {cy_fwd * 1e3:>9.3f}ms "
                  f"{cy_both * 1e3:>9.3f}ms {np_both / cy_both:>7.1f}x")
        else:
            print(f"{dim:>5} {args.steps:>5} {np_fwd * 1e3:>9.3f}ms "
                  f"{np_both * 1e3:>9.3f}ms {'-':>11} {'-':>11} {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
