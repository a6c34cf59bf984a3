"""Compare the compiled kernels with the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the median wall time per call and the speed-up for single right-hand
side evaluations, one-hour interval propagations (1000 RK4 sub-steps) and a
finite-difference Jacobian sweep over three shooting intervals.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from hermetia import kernels
from hermetia.reactor import SetupConfig
from hermetia.scenarios import tg2_initial_state

U = {
    "closed": np.array([0.5, 0.0, 0.3, 0.2, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0, 0.0, 0.0]),
    "partial": np.array([4.0, 1e-3, 1.4e-8, 0.0]),
}
D = np.array([24.0, 0.0109, 7.2e-4, 0.273])


def _median_time(fn, repeat: int, number: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return statistics.median(times)


def cases(kind: str):
    model = SetupConfig(kind=kind)
    x = tg2_initial_state(model, D)
    u, p, k = U[kind], model.packed, model.kind_id
    X0 = np.tile(x, (3, 1))
    UU = np.tile(u, (3, 1))
    DD = np.tile(D, (4, 1))
    sx = np.maximum(np.abs(x), 1e-6) * 1e-7
    su = np.maximum(np.abs(u), 1e-9) * 1e-7
    # substeps per interval: the closed setup needs 3.6 s steps, the partial one tolerates coarser
    n_sub = 1000 if kind == "closed" else 100
    return {
        "rhs": (lambda be: be.rhs(k, x, u, D, p), 2000),
        f"propagate 1 h ({n_sub} steps)": (lambda be: be.propagate(k, x, u, D, D, 3600.0, n_sub, p), 3),
        "jacobian 3 intervals": (lambda be: be.propagate_jac_many(k, X0, UU, DD, 3600.0, n_sub, p, sx, su), 1),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run pip install -e . first")
    backends = {"python": kernels.get_backend("python"), "cython": kernels.get_backend("cython")}
    print(f"{'setup':<8} {'case':<28} {'python [s]':>12} {'cython [s]':>12} {'speed-up':>9}")
    for kind in ("closed", "partial"):
        for name, (call, number) in cases(kind).items():
            # sanity: both back ends give the same numbers
            a, b = call(backends["python"]), call(backends["cython"])
            a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
            for ra, rb in zip(a, b):
                np.testing.assert_allclose(ra, rb, rtol=1e-6, atol=1e-12)
            n_py = max(1, number // 10)
            t_py = _median_time(lambda: call(backends["python"]), args.repeat, n_py)
            t_cy = _median_time(lambda: call(backends["cython"]), args.repeat, number)
            print(f"{kind:<8} {name:<28} {t_py:12.3e} {t_cy:12.3e} {t_py / t_cy:9.1f}")


if __name__ == "__main__":
    main()
