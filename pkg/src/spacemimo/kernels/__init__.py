"""Numerical kernels with a compiled backend and a numpy fallback.

The compiled module is used when it imports cleanly and ``SPACEMIMO_PURE``
is unset. ``BACKEND`` names the active choice; both backends stay importable
as ``python_backend`` and ``compiled_backend`` (``None`` when unbuilt) so
they can be compared directly.
"""

import os

import numpy as np

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:  # extension not built
    compiled_backend = None

if compiled_backend is not None and not os.environ.get("SPACEMIMO_PURE"):
    _active = compiled_backend
    BACKEND = "compiled"
else:
    _active = python_backend
    BACKEND = "python"


def log_hyp0f1(b, x, rtol=1e-14, max_terms=10000):
    return _active.log_hyp0f1(float(b), x, rtol, max_terms)


def hpd_solve(a, rhs, rtol=1e-13):
    """Batched Hermitian positive-definite solve with Jacobi equilibration.

    Rows are rescaled by the inverse square root of the diagonal first, so
    the pivot test is insensitive to the very different magnitudes of the
    MN branch and the relayed branches.
    """
    a = np.asarray(a)
    rhs = np.asarray(rhs)
    diag = np.einsum("nii->ni", a).real
    if np.any(diag <= 0):
        bad = np.any(diag <= 0, axis=1)
        x = np.full(rhs.shape, np.nan, dtype=np.result_type(a, rhs, np.float64))
        good = ~bad
        if good.any():
            x[good], ok_good = hpd_solve(a[good], rhs[good], rtol)
            ok = np.zeros(len(bad), dtype=bool)
            ok[good] = ok_good
            return x, ok
        return x, np.zeros(len(bad), dtype=bool)
    s = 1.0 / np.sqrt(diag)
    scaled = a * s[:, :, None] * s[:, None, :]
    y, ok = _active.hpd_solve(scaled, rhs * s, rtol)
    x = y * s
    if not np.iscomplexobj(a) and not np.iscomplexobj(rhs):
        x = x.real
    return x, ok
