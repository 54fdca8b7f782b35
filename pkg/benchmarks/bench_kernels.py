"""Benchmark the compiled kernel against the pure-numpy fallback.

Times the four kernel entry points on workloads shaped like the ones the
planner and the MPC produce. Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np
from scipy.spatial import ConvexHull

from homoplan._kernels import pyfallback

try:
    from homoplan._kernels import _core
except ImportError:
    _core = None

rng = np.random.default_rng(0)


def _hull(center, n=8, r=0.5):
    pts = center + rng.uniform(-r, r, (n, 2))
    return pts[ConvexHull(pts).vertices]


def _mpc_like_qp(soft: bool):
    """Horizon-12 double-integrator tracking problem with halfplane rows."""
    n, m = 24, 120
    A = rng.normal(size=(n, n)) * 0.1
    P = A.T @ A + np.eye(n)
    q = rng.normal(size=n)
    G = rng.normal(size=(m, n))
    g = G @ rng.normal(size=n) + rng.uniform(-0.2 if soft else 0.05, 1.0, m)
    soft_rho = None
    if soft:
        soft_rho = np.zeros(m)
        soft_rho[rng.integers(0, m, m // 3)] = 1e4
    return P, q, G, g, soft_rho


def bench(label, fn, args_fn, repeat=200):
    rows = {}
    for name, mod in (("python", pyfallback), ("compiled", _core)):
        if mod is None:
            continue
        args_list = [args_fn() for _ in range(repeat)]
        t0 = time.perf_counter()
        for args in args_list:
            fn(mod, args)
        rows[name] = (time.perf_counter() - t0) / repeat * 1e6
    speedup = rows["python"] / rows["compiled"] if "compiled" in rows else float("nan")
    comp = f"{rows['compiled']:10.1f}" if "compiled" in rows else "         -"
    print(f"{label:24s} {rows['python']:10.1f} {comp} {speedup:8.1f}x")


def main():
    print(f"{'kernel':24s} {'python us':>10s} {'compiled us':>10s} {'speedup':>9s}")
    bench("poly_pair_witness", lambda mod, ab: mod.poly_pair_witness(*ab),
          lambda: (_hull(rng.uniform(0, 4, 2)), _hull(rng.uniform(0, 4, 2))))
    bench("line_poly_interval", lambda mod, a: mod.line_poly_interval(*a),
          lambda: (*rng.uniform(-1, 5, 2), *rng.normal(size=2), _hull(rng.uniform(0, 4, 2))))
    bench("segment_hits_interior", lambda mod, a: mod.segment_hits_interior(*a),
          lambda: (*rng.uniform(-1, 5, 2), *rng.uniform(-1, 5, 2), _hull(rng.uniform(0, 4, 2)), 1e-9))

    def run_qp(mod, prob):
        P, q, G, g, soft_rho = prob
        n, m = len(q), len(g)
        x = np.zeros(n)
        return mod.admm_qp(P, q, G, g, x, np.minimum(G @ x, g), np.zeros(m), soft_rho=soft_rho)

    bench("admm_qp (hard rows)", run_qp, lambda: _mpc_like_qp(False), repeat=50)
    bench("admm_qp (soft rows)", run_qp, lambda: _mpc_like_qp(True), repeat=50)


if __name__ == "__main__":
    main()
