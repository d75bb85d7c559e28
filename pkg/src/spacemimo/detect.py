"""MMSE joint detection at the master node and the resulting achievable rates.

Case 1 shares instantaneous channel estimates with the MN; Case 2 shares
only long-term statistics after each relay divides out its own estimate.
All functions accept a single context (vectors of length M) or a batch
(leading trial axis).
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from . import kernels
from .channel import draw_normalized, normalized_moments


class DegenerateContextError(np.linalg.LinAlgError):
    """The MMSE system matrix is singular (noise-free rank-one signal)."""


@dataclass(frozen=True)
class DetectionContext:
    mode: str
    c: np.ndarray
    p: float
    sigma2_up: float
    isl_noise: np.ndarray
    err_var: np.ndarray
    h_hat: np.ndarray | None = None
    inv_hhat2: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("case1", "case2"):
            raise ValueError("mode must be 'case1' or 'case2'")
        if self.mode == "case1" and self.h_hat is None:
            raise ValueError("case1 needs the shared channel estimates")
        if self.mode == "case2":
            if self.inv_hhat2 is None:
                raise ValueError("case2 needs E{|1/h_hat|^2} per branch")
            if not np.all(np.isfinite(self.inv_hhat2)):
                raise ValueError("E{|1/h_hat|^2} must be finite")
        if np.any(np.asarray(self.err_var) < 0) or np.any(np.asarray(self.isl_noise) < 0) or self.sigma2_up < 0:
            raise ValueError("variances must be non-negative")

    @property
    def b_diag(self):
        """Diagonal of B: uplink noise after local inversion."""
        return self.sigma2_up * np.asarray(self.inv_hhat2)

    @property
    def s_diag(self):
        """Diagonal of S: estimation-error leakage after local inversion."""
        return np.asarray(self.err_var) * np.asarray(self.inv_hhat2)


@dataclass(frozen=True)
class DetectionVector:
    v: np.ndarray


@dataclass(frozen=True)
class RateReport:
    rate: np.ndarray
    numerator: np.ndarray
    denominator: np.ndarray


def case1_context(c, p, sigma2_up, isl_noise, h_hat, err_var):
    return DetectionContext("case1", np.asarray(c, float), p, sigma2_up, np.asarray(isl_noise, float),
                            np.asarray(err_var, float), h_hat=np.asarray(h_hat))


def case2_context(c2, p, sigma2_up, isl_noise, err_var, inv_hhat2, h_hat_mn, mn_index=0):
    """Case-2 context; the MN branch uses its instantaneous 1/|h_hat|^2.

    ``h_hat_mn`` is a scalar or one value per trial row.
    """
    c2 = np.asarray(c2, dtype=float)
    h_mn = np.asarray(h_hat_mn)
    inv = np.array(np.broadcast_to(inv_hhat2, h_mn.shape + (c2.shape[-1],)), dtype=float)
    inv[..., mn_index] = 1.0 / np.abs(h_mn) ** 2
    return DetectionContext("case2", c2, p, sigma2_up, np.asarray(isl_noise, float),
                            np.asarray(err_var, float), inv_hhat2=inv)


def _solve(a, rhs):
    batched = a.ndim == 3
    if not batched:
        a, rhs = a[None], rhs[None]
    x, ok = kernels.hpd_solve(a, rhs)
    if not ok.all():
        raise DegenerateContextError(f"{int((~ok).sum())} singular MMSE system(s)")
    return x if batched else x[0]


def case1_matrix(ctx):
    c = ctx.c
    g = c * ctx.h_hat
    diag = ctx.p * c**2 * ctx.err_var + ctx.isl_noise + ctx.sigma2_up * c**2
    a = ctx.p * g[..., :, None] * g[..., None, :].conj()
    idx = np.arange(g.shape[-1])
    a[..., idx, idx] += diag
    return a


def mmse_vector_case1(ctx):
    """MMSE combiner from shared instantaneous estimates.

    v = sqrt(p) h_hat^H D_c A^{-1} with
    A = p D_c h_hat h_hat^H D_c + p D_c^2 Sigma_err + Sigma_isl + sigma_up^2 D_c^2.
    """
    if ctx.mode != "case1":
        raise ValueError("context is not case1")
    a = case1_matrix(ctx)
    rhs = math.sqrt(ctx.p) * ctx.c * ctx.h_hat
    return DetectionVector(_solve(a, rhs.astype(complex)).conj())


def case2_matrix(ctx):
    c2 = np.broadcast_to(ctx.c, np.shape(ctx.inv_hhat2))
    diag = ctx.p * c2**2 * ctx.s_diag + c2**2 * ctx.b_diag + ctx.isl_noise
    a = ctx.p * c2[..., :, None] * c2[..., None, :]
    idx = np.arange(c2.shape[-1])
    a = a.copy()
    a[..., idx, idx] += diag
    return a


def mmse_vector_case2(ctx):
    """MMSE combiner from long-term statistics after local inversion.

    v = sqrt(p) u^T D_c2 A^{-1} with
    A = p D_c2 u u^T D_c2 + p D_c2^2 S + D_c2^2 B + Sigma_isl.
    """
    if ctx.mode != "case2":
        raise ValueError("context is not case2")
    a = case2_matrix(ctx)
    c2 = np.broadcast_to(ctx.c, a.shape[:-1])
    return DetectionVector(_solve(a, math.sqrt(ctx.p) * c2))


def _rate(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return RateReport(np.log2(1.0 + snr), num, den)


def rate_case1(ctx, v, h_true):
    """Achievable rate with the true channel in the signal term."""
    v = v.v if isinstance(v, DetectionVector) else np.asarray(v)
    c = ctx.c
    w2 = np.abs(v) ** 2
    num = ctx.p * np.abs(np.sum(v * c * h_true, axis=-1)) ** 2
    den = ctx.sigma2_up * np.sum(w2 * c**2, axis=-1) + np.sum(w2 * ctx.isl_noise, axis=-1)
    return _rate(num, den)


def rate_case2(ctx, v):
    v = v.v if isinstance(v, DetectionVector) else np.asarray(v)
    c2 = ctx.c
    w2 = np.abs(v) ** 2
    num = ctx.p * np.abs(np.sum(v * c2, axis=-1)) ** 2
    den = np.sum(w2 * c2**2 * ctx.b_diag, axis=-1) + np.sum(w2 * ctx.isl_noise, axis=-1)
    return _rate(num, den)


def mse_case1(ctx, v):
    """E{|v y - s|^2} given the shared estimates (unit-power symbol)."""
    v = v.v if isinstance(v, DetectionVector) else np.asarray(v)
    c = ctx.c
    w2 = np.abs(v) ** 2
    gain = np.sum(v * c * ctx.h_hat, axis=-1)
    quad = ctx.p * np.abs(gain) ** 2 + np.sum(
        w2 * (ctx.p * c**2 * ctx.err_var + ctx.sigma2_up * c**2 + ctx.isl_noise), axis=-1)
    return quad - 2.0 * math.sqrt(ctx.p) * gain.real + 1.0


def mse_case2(ctx, v):
    """Case-2 objective: the expanded quadratic in v built from B and S."""
    v = v.v if isinstance(v, DetectionVector) else np.asarray(v)
    c2 = ctx.c
    w2 = np.abs(v) ** 2
    gain = np.sum(v * c2, axis=-1)
    quad = ctx.p * np.abs(gain) ** 2 + np.sum(
        w2 * (ctx.p * c2**2 * ctx.s_diag + c2**2 * ctx.b_diag + ctx.isl_noise), axis=-1)
    return quad - 2.0 * math.sqrt(ctx.p) * gain.real + 1.0


def local_process(y_up_m, h_hat_m):
    """Relay-side division by its own channel estimate."""
    h = np.asarray(h_hat_m)
    if np.any(h == 0):
        raise ZeroDivisionError("channel estimate is zero; local inversion undefined")
    return np.asarray(y_up_m) / h


@dataclass(frozen=True)
class Case2Statistics:
    """Long-term statistics of one relay at unit path loss.

    Scale by the branch's uplink FSPL: powers divide by it, the inverse
    moment multiplies by it.
    """

    e_hhat2: float
    e_herr2: float
    e_inv_hhat2: float
    rejection_rate: float


@lru_cache(maxsize=32)
def case2_statistics(fading, draws=100_000, seed=0):
    """Monte Carlo estimate of E|h_hat|^2, E|h_err|^2 and E|1/h_hat|^2.

    Draws with |h_hat| below 1e-9 times the median are dropped so the
    inverse moment stays finite; the dropped fraction is reported.
    """
    rng = np.random.default_rng(seed)
    los, nlos, _ = draw_normalized([fading], rng, (draws, 1))
    g = (los + nlos)[:, 0]
    var = normalized_moments(fading)[2]
    err = (rng.standard_normal(draws) + 1j * rng.standard_normal(draws)) * math.sqrt(fading.epsilon**2 * var / 2)
    mag2 = np.abs(g + err) ** 2
    keep = mag2 >= (1e-9 * np.sqrt(np.median(mag2))) ** 2
    return Case2Statistics(
        float(mag2[keep].mean()),
        float(np.mean(np.abs(err) ** 2)),
        float(np.mean(1.0 / mag2[keep])),
        float(1.0 - keep.mean()),
    )


PSK_ORDERS = (2, 4, 8)


def psk_constellation(order):
    if order not in PSK_ORDERS:
        raise ValueError("PSK order must be 2, 4 or 8")
    return np.exp(2j * np.pi * np.arange(order) / order)


def gray_bits(index, order):
    """Gray-coded bit pattern for each symbol index, shape (..., log2(order))."""
    index = np.asarray(index)
    nbits = int(math.log2(order))
    g = index ^ (index >> 1)
    return (g[..., None] >> np.arange(nbits - 1, -1, -1)) & 1


def psk_decide(s_hat, order, gain=1.0):
    """Nearest PSK point after dividing out the effective MMSE gain.

    Returns ``(index, bits)``; exact ties go to the lower index.
    """
    points = psk_constellation(order)
    z = np.asarray(s_hat) / gain
    dist = np.abs(z[..., None] - points) ** 2
    idx = np.argmin(dist, axis=-1)
    return idx, gray_bits(idx, order)
