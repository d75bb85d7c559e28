"""Ergodic capacity: noncentral-Wishart numerics (THz ISL) and the FSO Jensen bound.

Closed forms are evaluated in the log domain so they stay finite for
clusters of a few hundred satellites.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from . import kernels
from .islmodel import FsoParams, pointing_moments, sample_pointing_loss

LN2 = math.log(2.0)


class NumericError(ArithmeticError):
    """A series or quadrature failed to converge."""


@dataclass(frozen=True)
class CapacityInputs:
    M: int
    rho: float
    sigma_h2: float
    omega: float = 0.0
    mean_h: complex | np.ndarray | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if not self.rho > 0 or not self.sigma_h2 > 0:
            raise ValueError("rho and sigma_h2 must be positive")
        if self.omega < 0:
            raise ValueError("noncentrality must be non-negative")

    @classmethod
    def from_mean(cls, rho, sigma_h2, mean_h, M=None):
        """Noncentrality from a mean vector, or a common scalar mean and M."""
        m = np.atleast_1d(np.asarray(mean_h, dtype=complex))
        if M is not None and m.size == 1:
            m = np.full(M, m[0])
        omega = float(np.vdot(m, m).real / sigma_h2)
        return cls(m.size, rho, sigma_h2, omega, mean_h)


# --- 0F1 -------------------------------------------------------------------

def log_hyp0f1(b, x):
    if not b > 0:
        raise ValueError("0F1 parameter b must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("0F1 argument must be non-negative")
    val, nterms = kernels.log_hyp0f1(b, x)
    if np.any(nterms > 10000):
        bad = x[nterms > 10000]
        raise NumericError(f"0F1({b}, x) series did not converge within 10000 terms for x={bad.ravel()[:3]}")
    return float(val) if val.ndim == 0 else val


def hyp0f1(b, x):
    """sum_k x^k / ((b)_k k!)."""
    return np.exp(log_hyp0f1(b, x))


def lemma1_bound(M, x):
    """Both sides of 0F1(M, x) <= exp(x / M)."""
    if M < 1:
        raise ValueError("M must be at least 1")
    return hyp0f1(M, x), np.exp(np.asarray(x, dtype=float) / M)


# --- density and quadrature -------------------------------------------------

def wishart_logpdf(w, inputs):
    w = np.asarray(w, dtype=float)
    M, s2, om = inputs.M, inputs.sigma_h2, inputs.omega
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    out = -om - gammaln(M) - M * math.log(s2) - w / s2 + (M - 1) * logw
    if om > 0:
        out = out + log_hyp0f1(M, om * np.maximum(w, 0.0) / s2)
    out = np.where(w < 0, -np.inf, out)
    if M == 1:
        out = np.where(w == 0, -om - math.log(s2), out)
    return out


def wishart_pdf(w, inputs):
    """Density of ||h||^2 for h ~ CN(m, sigma_h2 I) with M entries."""
    return np.exp(wishart_logpdf(w, inputs))


@lru_cache(maxsize=16)
def _unit_nodes(n):
    x, wts = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * wts


def semi_infinite_gl(log_integrand, scale, n0=200, rtol=1e-8, max_nodes=25600):
    """Integral over (0, inf) of exp(log_integrand(w)) by Gauss-Legendre.

    Uses w = scale * t / (1 - t) on (0, 1) and doubles the node count until
    consecutive estimates agree to ``rtol``.
    """
    def estimate(n):
        t, wt = _unit_nodes(n)
        w = scale * t / (1.0 - t)
        jac = scale / (1.0 - t) ** 2
        return float(np.sum(wt * jac * np.exp(log_integrand(w))))

    n = n0
    prev = estimate(n)
    while n < max_nodes:
        n *= 2
        cur = estimate(n)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise NumericError(f"Gauss-Legendre did not reach rtol={rtol} with {max_nodes} nodes")


def _capacity_scale(inputs):
    return inputs.sigma_h2 * (inputs.M + inputs.omega)


def ergodic_capacity_exact(inputs):
    """E{log2(1 + rho w)} under the noncentral-Wishart density, by quadrature."""
    def log_f(w):
        with np.errstate(divide="ignore"):
            return np.log(np.log1p(inputs.rho * w) / LN2) + wishart_logpdf(w, inputs)
    return semi_infinite_gl(log_f, _capacity_scale(inputs))


def _require_m_gt_omega(M, omega):
    if not M > omega:
        raise ValueError(f"closed form requires M > Omega (got M={M}, Omega={omega})")


def log_appendix_closed_form(M, omega, sigma_h2):
    """log of (M sigma^2)^(M+1) M! / (M - Omega)^(M+1)."""
    _require_m_gt_omega(M, omega)
    return (M + 1) * math.log(M * sigma_h2) + gammaln(M + 1) - (M + 1) * math.log(M - omega)


def appendix_integral_identity(M, omega, sigma_h2, log=False):
    """Closed form and quadrature of int_0^inf exp(-w (M-Omega)/(M sigma^2)) w^M dw."""
    ref = log_appendix_closed_form(M, omega, sigma_h2)
    rate = (M - omega) / (M * sigma_h2)

    def log_f(w):
        with np.errstate(divide="ignore"):
            return -rate * w + M * np.log(w) - ref

    # integrand peaks at w = M / rate
    rel = semi_infinite_gl(log_f, M / rate)
    if log:
        return ref, ref + math.log(rel)
    return math.exp(ref), math.exp(ref) * rel


def _log_prefactor(inputs):
    return -inputs.omega - gammaln(inputs.M) - inputs.M * math.log(inputs.sigma_h2)


def ergodic_capacity_approx(inputs):
    """rho sigma^2 e^-Omega M^(M+2) / (M - Omega)^(M+1), valid for M > Omega."""
    M, om = inputs.M, inputs.omega
    _require_m_gt_omega(M, om)
    return math.exp((M + 2) * math.log(M) - om - (M + 1) * math.log(M - om)
                    + math.log(inputs.rho) + math.log(inputs.sigma_h2))


def approx_from_chain(inputs):
    """The same approximation assembled as prefactor * rho * closed-form integral."""
    return math.exp(_log_prefactor(inputs) + math.log(inputs.rho)
                    + log_appendix_closed_form(inputs.M, inputs.omega, inputs.sigma_h2))


def _bound_exponent(inputs):
    return (inputs.omega - inputs.M) / (inputs.M * inputs.sigma_h2)


def linearized_capacity_quadrature(inputs):
    """Upper-bound integral with log2(1 + rho w) replaced by rho w, by quadrature."""
    _require_m_gt_omega(inputs.M, inputs.omega)
    k = _bound_exponent(inputs)
    pre = _log_prefactor(inputs)

    def log_f(w):
        with np.errstate(divide="ignore"):
            return pre + math.log(inputs.rho) + k * w + inputs.M * np.log(w)

    return semi_infinite_gl(log_f, -inputs.M / k)


def appendix_upper_bound(inputs):
    """Capacity with 0F1 replaced by its exponential upper bound (by quadrature)."""
    _require_m_gt_omega(inputs.M, inputs.omega)
    k = _bound_exponent(inputs)
    pre = _log_prefactor(inputs)

    def log_f(w):
        with np.errstate(divide="ignore"):
            return pre + np.log(np.log1p(inputs.rho * w) / LN2) + k * w + (inputs.M - 1) * np.log(w)

    return semi_infinite_gl(log_f, -inputs.M / k)


def rho_thz(p, p_isl, beta_up, beta_isl, sigma_n_up2, sigma_n_isl2):
    """Effective SNR of an AF branch with uplink FSPL compensation."""
    g = p_isl * beta_up / beta_isl
    return p * g / (g * sigma_n_up2 + sigma_n_isl2)


def representative_rho(p, p_isl, beta_up, beta_isl, sigma_n_up2, sigma_n_isl2):
    """rho at the median uplink and ISL losses of a cluster.

    Returns ``(rho, median_beta_up, median_beta_isl)``.
    """
    bu = float(np.median(beta_up))
    bi = float(np.median(beta_isl))
    return rho_thz(p, p_isl, bu, bi, sigma_n_up2, sigma_n_isl2), bu, bi


# --- FSO ----------------------------------------------------------------------

@dataclass(frozen=True)
class FsoBoundInputs:
    p: float
    p_isl: float
    beta_up: float
    beta_isl: float
    gamma: float
    E_abs_h2: float
    E_h: complex
    M: int
    sigma_n_up2: float
    sigma_n_isl2: float
    dense: bool = True

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        for name in ("p", "p_isl", "beta_up", "beta_isl", "gamma", "E_abs_h2", "sigma_n_up2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma_n_isl2 < 0:
            raise ValueError("sigma_n_isl2 must be non-negative")
        if abs(self.E_h) ** 2 > self.E_abs_h2:
            raise ValueError("|E{h}|^2 cannot exceed E{|h|^2}")

    @classmethod
    def validation_setup(cls, M, gamma=1.1, beta_up=2.12e15, beta_isl=5.29e25, uplink=None, isl=None):
        """Equal-distance setup: unit-power LoS mean (1 + 1j)/sqrt(2 beta_up), covariance I/beta_up."""
        from .linkbudget import IslParams, UplinkParams

        uplink = uplink or UplinkParams()
        isl = isl or IslParams.fso()
        mean = (1.0 + 1.0j) / math.sqrt(2.0) / math.sqrt(beta_up)
        return cls(uplink.p, isl.p_isl, beta_up, beta_isl, gamma, 2.0 / beta_up, mean, M,
                   uplink.noise_power, isl.noise_power)


def fso_psi(inputs):
    e1, e2 = pointing_moments(inputs.gamma)
    g = inputs.p_isl * inputs.beta_up / inputs.beta_isl
    num = inputs.p * g * (e2 * inputs.E_abs_h2 + inputs.M * e1**2 * abs(inputs.E_h) ** 2)
    return num / (inputs.sigma_n_up2 * g * e2 + inputs.sigma_n_isl2)


def fso_capacity_upper_bound(inputs):
    """log2(1 + Psi), the Jensen-type bound for optically summed relays."""
    if not inputs.dense:
        raise ValueError("the FSO bound assumes a dense constellation")
    return math.log2(1.0 + fso_psi(inputs))


def default_channel_sampler(inputs):
    var = inputs.E_abs_h2 - abs(inputs.E_h) ** 2

    def draw(rng, trials, M):
        z = (rng.standard_normal((trials, M)) + 1j * rng.standard_normal((trials, M))) * math.sqrt(var / 2.0)
        return inputs.E_h + z

    return draw


def default_pointing_sampler(inputs, mn_branch=False):
    fso = FsoParams(gamma=inputs.gamma)

    def draw(rng, trials, M):
        return sample_pointing_loss(M, 0.0, fso, rng, mn_index=0 if mn_branch else None, trials=trials).alpha_p

    return draw


def fso_capacity_montecarlo(inputs, chan_sampler=None, pointing_sampler=None, trials=10_000,
                            rng_seed=0, mn_branch=False, chunk=20_000):
    """Mean and standard error of log2(1 + R_s / R_n) over fresh draws.

    With ``mn_branch`` the first branch is the MN: sqrt(beta_up) scaling, no
    pointing loss and no ISL noise.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    chan_sampler = chan_sampler or default_channel_sampler(inputs)
    pointing_sampler = pointing_sampler or default_pointing_sampler(inputs, mn_branch)
    M = inputs.M
    c = np.full(M, math.sqrt(inputs.p_isl * inputs.beta_up / inputs.beta_isl))
    isl_var = np.full(M, inputs.sigma_n_isl2)
    if mn_branch:
        c[0] = math.sqrt(inputs.beta_up)
        isl_var[0] = 0.0
    rng = np.random.default_rng(rng_seed)
    out = np.empty(trials)
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        h = chan_sampler(rng, n, M)
        a = pointing_sampler(rng, n, M)
        rs = inputs.p * np.abs(np.sum(a * c * h, axis=1)) ** 2
        rn = inputs.sigma_n_up2 * np.sum(a**2 * c**2, axis=1) + isl_var.sum()
        out[done:done + n] = np.log2(1.0 + rs / rn)
        done += n
    err = float(out.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(out.mean()), err
