"""Compiled kernel backend agrees with the pure-python fallback."""

import numpy as np
import pytest

from homoplan._kernels import backend, pyfallback
from oracles import random_convex

try:
    from homoplan._kernels import _core
except ImportError:
    _core = None

needs_compiled = pytest.mark.skipif(_core is None, reason="compiled kernel not built")


def test_backend_reports_active_implementation():
    assert backend() in ("compiled", "python")
    if _core is None:
        assert backend() == "python"


@needs_compiled
def test_witness_parity():
    rng = np.random.default_rng(21)
    for _ in range(150):
        A = random_convex(rng, rng.uniform(-1, 1, 2), rng.uniform(0.2, 0.8), n=int(rng.integers(3, 9)))
        B = random_convex(rng, rng.uniform(-1, 4, 2), rng.uniform(0.2, 0.8), n=int(rng.integers(3, 9)))
        d_py, pa_py, pb_py = pyfallback.poly_pair_witness(A, B)
        d_c, pa_c, pb_c = _core.poly_pair_witness(A, B)
        assert d_c == pytest.approx(d_py, abs=1e-12)
        assert np.allclose(pa_c, pa_py, atol=1e-12)
        assert np.allclose(pb_c, pb_py, atol=1e-12)


@needs_compiled
def test_line_interval_parity():
    rng = np.random.default_rng(22)
    for _ in range(200):
        P = random_convex(rng, rng.uniform(-1, 1, 2), rng.uniform(0.2, 1.0))
        p = rng.uniform(-2, 2, 2)
        ang = rng.uniform(0, 2 * np.pi)
        d = np.array([np.cos(ang), np.sin(ang)])
        out_py = pyfallback.line_poly_interval(p[0], p[1], d[0], d[1], P)
        out_c = _core.line_poly_interval(p[0], p[1], d[0], d[1], P)
        assert out_c[2] == out_py[2]
        if out_py[2]:
            assert out_c[0] == pytest.approx(out_py[0], abs=1e-12)
            assert out_c[1] == pytest.approx(out_py[1], abs=1e-12)


@needs_compiled
def test_segment_interior_parity():
    rng = np.random.default_rng(23)
    for _ in range(200):
        P = random_convex(rng, rng.uniform(-1, 1, 2), rng.uniform(0.2, 1.0))
        a = rng.uniform(-2, 2, 2)
        b = rng.uniform(-2, 2, 2)
        r_py = pyfallback.segment_hits_interior(a[0], a[1], b[0], b[1], P, 1e-9)
        r_c = _core.segment_hits_interior(a[0], a[1], b[0], b[1], P, 1e-9)
        assert bool(r_c) == bool(r_py)


def _random_qp(rng, n=16, m=40, soft_frac=0.0):
    F = rng.normal(size=(n, n))
    P = F @ F.T + n * np.eye(n)
    q = rng.normal(size=n)
    G = rng.normal(size=(m, n))
    G /= np.linalg.norm(G, axis=1, keepdims=True)
    x_feas = rng.normal(size=n)
    g = G @ x_feas + rng.uniform(0.05, 1.0, m)
    soft_rho = None
    if soft_frac > 0:
        soft_rho = np.where(rng.uniform(size=m) < soft_frac, 1e4, 0.0)
        g = g - rng.uniform(0.0, 2.0, m) * (soft_rho > 0)  # push some soft rows tight
    return P, q, G, g, soft_rho


def _run_both(P, q, G, g, soft_rho):
    out = {}
    for name, impl in (("py", pyfallback), ("c", _core)):
        x = np.zeros(len(q))
        z = np.minimum(G @ x, g)
        y = np.zeros(len(g))
        status, iters, r_prim, r_dual = impl.admm_qp(
            P, q, G, g, x, z, y, soft_rho=None if soft_rho is None else soft_rho.copy(),
        )
        out[name] = (status, iters, x, z, y)
    return out


@needs_compiled
def test_admm_hard_rows_parity():
    rng = np.random.default_rng(31)
    for _ in range(8):
        P, q, G, g, _ = _random_qp(rng)
        res = _run_both(P, q, G, g, None)
        s_py, it_py, x_py, z_py, y_py = res["py"]
        s_c, it_c, x_c, z_c, y_c = res["c"]
        assert (s_c, it_c) == (s_py, it_py)
        assert np.max(np.abs(x_c - x_py)) < 1e-9
        assert np.max(np.abs(z_c - z_py)) < 1e-9
        assert np.max(np.abs(y_c - y_py)) < 1e-9


@needs_compiled
def test_admm_soft_rows_parity():
    rng = np.random.default_rng(32)
    for _ in range(8):
        P, q, G, g, soft_rho = _random_qp(rng, soft_frac=0.3)
        res = _run_both(P, q, G, g, soft_rho)
        s_py, it_py, x_py, z_py, y_py = res["py"]
        s_c, it_c, x_c, z_c, y_c = res["c"]
        assert (s_c, it_c) == (s_py, it_py)
        assert np.max(np.abs(x_c - x_py)) < 1e-9
        assert np.max(np.abs(z_c - z_py)) < 1e-9
        assert np.max(np.abs(y_c - y_py)) < 1e-9


@needs_compiled
def test_admm_updates_buffers_in_place():
    rng = np.random.default_rng(33)
    P, q, G, g, _ = _random_qp(rng, n=6, m=10)
    x = np.zeros(6)
    z = np.minimum(G @ x, g)
    y = np.zeros(10)
    xb, zb, yb = x, z, y
    _core.admm_qp(P, q, G, g, x, z, y)
    assert x is xb and z is zb and y is yb
    assert np.any(x != 0.0)
