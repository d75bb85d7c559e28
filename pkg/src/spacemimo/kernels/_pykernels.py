"""Pure numpy implementations of the numerical kernels.

These are the reference versions; ``_ckernels`` must agree with them to
rounding error.
"""

import numpy as np

# Rescale the running series sum once it exceeds this, keeping a log offset.
_RESCALE = 1e100


def log_hyp0f1(b, x, rtol=1e-14, max_terms=10000):
    """Log of the series sum_k x^k / ((b)_k k!) for each entry of ``x``.

    Returns ``(log_value, n_terms)``. ``n_terms > max_terms`` marks entries
    that did not converge.
    """
    x = np.ascontiguousarray(x, dtype=float)
    flat = x.ravel()
    n = flat.size
    total = np.ones(n)
    term = np.ones(n)
    offset = np.zeros(n)
    nterms = np.ones(n, dtype=np.int64)
    active = flat > 0.0
    k = 1
    while active.any() and k <= max_terms:
        idx = np.flatnonzero(active)
        t = term[idx] * flat[idx] / ((b + k - 1.0) * k)
        s = total[idx] + t
        big = s > _RESCALE
        if big.any():
            t[big] /= s[big]
            offset[idx[big]] += np.log(s[big])
            s[big] = 1.0
        term[idx] = t
        total[idx] = s
        nterms[idx] = k + 1
        # geometric bound on the remaining tail once terms are falling
        ratio = flat[idx] / ((b + k) * (k + 1.0))
        done = (ratio < 1.0) & (t < rtol * s * (1.0 - ratio))
        active[idx[done]] = False
        k += 1
    nterms[active] = max_terms + 1
    out = np.log(total) + offset
    return out.reshape(x.shape), nterms.reshape(x.shape)


def hpd_solve(a, rhs, rtol=1e-13):
    """Solve ``a @ x = rhs`` for a batch of Hermitian positive-definite matrices.

    ``a`` has shape (N, M, M) and ``rhs`` (N, M). Returns ``(x, ok)``; rows
    whose Cholesky pivots collapse below ``rtol`` times the diagonal are
    flagged ``ok=False`` and their solution is NaN.
    """
    a = np.asarray(a)
    rhs = np.asarray(rhs)
    dtype = np.result_type(a, rhs, np.float64)
    diag = np.einsum("nii->ni", a).real
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return _hpd_solve_each(a, rhs, diag, rtol, dtype)
    piv = np.einsum("nii->ni", chol).real ** 2
    ok = np.all(piv > rtol * diag, axis=1)
    x = np.full(rhs.shape, np.nan, dtype=dtype)
    if ok.any():
        x[ok] = np.linalg.solve(a[ok], rhs[ok][..., None])[..., 0]
    return x, ok


def _hpd_solve_each(a, rhs, diag, rtol, dtype):
    n = a.shape[0]
    x = np.full(rhs.shape, np.nan, dtype=dtype)
    ok = np.zeros(n, dtype=bool)
    for i in range(n):
        try:
            chol = np.linalg.cholesky(a[i])
        except np.linalg.LinAlgError:
            continue
        if np.any(np.diagonal(chol).real ** 2 <= rtol * diag[i]):
            continue
        x[i] = np.linalg.solve(a[i], rhs[i])
        ok[i] = True
    return x, ok
