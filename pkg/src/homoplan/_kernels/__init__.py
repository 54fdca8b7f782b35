"""Numeric kernels with a compiled core and a pure-python fallback.

The compiled extension (``homoplan._kernels._core``) implements the hot
inner loops: the operator-splitting QP iteration and convex-polygon
primitives.  When it is missing (no compiler at install time) or when
``HOMOPLAN_PURE_PYTHON=1`` is set, the numpy fallback in
:mod:`homoplan._kernels.pyfallback` is selected instead.  Both backends
expose the same functions and agree to floating-point noise; see
``benchmarks/bench_kernels.py`` for a speed comparison.
"""

import os

from . import pyfallback

if os.environ.get("HOMOPLAN_PURE_PYTHON", "") == "1":
    _impl = pyfallback
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = pyfallback
        BACKEND = "python"

poly_pair_witness = _impl.poly_pair_witness
line_poly_interval = _impl.line_poly_interval
segment_hits_interior = _impl.segment_hits_interior
admm_qp = _impl.admm_qp


def backend() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND
