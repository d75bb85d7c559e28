"""Second hop: amplify-and-forward relaying over THz or FSO inter-satellite links.

Branch 0 of every vector is the master node (MN). It carries no ISL path
loss, no ISL noise, no pointing loss, and no ISL power scaling.
"""

from dataclasses import dataclass
import math

import numpy as np

from .linkbudget import SPEED_OF_LIGHT, fspl


@dataclass(frozen=True)
class IslGeometry:
    beta_isl: np.ndarray
    isl_noise_var: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta_isl, dtype=float)
        noise = np.asarray(self.isl_noise_var, dtype=float)
        if beta.shape != noise.shape:
            raise ValueError("beta_isl and isl_noise_var must have the same length")
        is_mn = (beta == 1.0) & (noise == 0.0)
        if is_mn.sum() != 1:
            raise ValueError("exactly one branch must be the MN (beta 1, noise 0)")
        if np.any(beta[~is_mn] <= 0) or np.any(noise[~is_mn] < 0):
            raise ValueError("relay branches need positive ISL loss and non-negative noise")

    @property
    def mn_index(self):
        return int(np.flatnonzero((np.asarray(self.beta_isl) == 1.0) & (np.asarray(self.isl_noise_var) == 0.0))[0])

    @classmethod
    def from_distances(cls, d_to_mn, isl, noise=True):
        """Build from distances to the MN; the zero-distance entry is the MN.

        ``noise=False`` zeroes the relay noise for noise-free ISL ablations.
        """
        d = np.asarray(d_to_mn, dtype=float)
        mn = d == 0.0
        if mn.sum() != 1:
            raise ValueError("exactly one zero distance (the MN) is required")
        beta = np.ones_like(d)
        beta[~mn] = fspl(d[~mn], isl.frequency)
        var = np.zeros_like(d)
        if noise:
            var[~mn] = isl.noise_power
        return cls(beta, var)


@dataclass(frozen=True)
class FsoParams:
    omega0: float = 0.05
    gamma: float = 1.1
    cn2: float = 0.0
    wavelength: float = SPEED_OF_LIGHT / 193e12

    def __post_init__(self):
        if not (self.omega0 > 0 and self.gamma > 0 and self.cn2 >= 0 and self.wavelength > 0):
            raise ValueError("invalid FSO parameters")


@dataclass(frozen=True)
class PointingLossSample:
    alpha_p: np.ndarray


def c_vector(beta_up, geometry, isl):
    """Per-branch AF scaling c and its Case-2 counterpart c2.

    c_m = sqrt(p_isl * beta_up_m / beta_isl_m) and c2_m = sqrt(p_isl / beta_isl_m)
    on relay branches; on the MN branch c = sqrt(beta_up) and c2 = 1.
    """
    beta_up = np.asarray(beta_up, dtype=float)
    beta_isl = np.asarray(geometry.beta_isl, dtype=float)
    if beta_up.shape[-1] != beta_isl.shape[-1]:
        raise ValueError("beta_up and ISL geometry lengths differ")
    mn = geometry.mn_index
    gain = np.full(beta_isl.shape, isl.p_isl)
    gain[mn] = 1.0
    c2 = np.sqrt(gain / beta_isl)
    c = np.sqrt(beta_up) * c2
    return c, c2


def beam_width(d_isl, fso):
    """Beam width at the receiver including diffraction and turbulence."""
    d = np.asarray(d_isl, dtype=float)
    d_r = math.pi * fso.omega0**2 / fso.wavelength
    w_d = fso.omega0 * np.sqrt(1.0 + (d / d_r) ** 2)
    if fso.cn2 == 0.0:
        return w_d
    k = 2.0 * math.pi / fso.wavelength
    rytov = 1.23 * fso.cn2 * k ** (7.0 / 6.0) * d ** (11.0 / 6.0)
    return w_d * np.sqrt(1.0 + 1.33 * rytov * (2.0 * d / (k * w_d**2)) ** (5.0 / 6.0))


def sample_pointing_loss(m, d_isl, fso, rng_seed, mn_index=0, trials=None):
    """Collected-power fraction under Rayleigh radial jitter, per branch.

    The MN branch is fixed at 1. Pass ``mn_index=None`` when every branch is
    a relay (equal-distance validation setups).
    """
    if m < 1:
        raise ValueError("need at least one branch")
    rng = np.random.default_rng(rng_seed)
    d = np.broadcast_to(np.asarray(d_isl, dtype=float), (m,))
    w_z = beam_width(d, fso)
    sigma_p = w_z / (2.0 * fso.gamma)
    shape = (m,) if trials is None else (trials, m)
    theta = rng.rayleigh(scale=sigma_p, size=shape)
    alpha = np.exp(-2.0 * theta**2 / w_z**2)
    if mn_index is not None:
        alpha[..., mn_index] = 1.0
    return PointingLossSample(alpha)


def pointing_moments(gamma):
    """E{alpha_p} and E{alpha_p^2} for the power-law pointing-loss density."""
    if math.isinf(gamma):
        return 1.0, 1.0
    g2 = gamma * gamma
    return g2 / (g2 + 1.0), g2 / (g2 + 2.0)


def mn_received_signal(s, chan, c, alpha_p, uplink, geometry, rng_seed, mode="thz"):
    """Signal at the MN for one symbol (or one per trial row).

    ``mode="thz"`` returns the per-branch vector diag(c)(sqrt(p) h s + n_up) + n_isl.
    ``mode="fso"`` returns the optically summed scalar
    alpha_p diag(c)(sqrt(p) h s + n_up) + sum(n_isl).
    Noise is drawn in the order n_up then n_isl. ``rng_seed=None`` gives
    the noiseless chain.
    """
    h = np.asarray(chan.h)
    c = np.asarray(c, dtype=float)
    noise_var = np.asarray(geometry.isl_noise_var, dtype=float)
    if h.shape[-1] != c.shape[-1] or c.shape[-1] != noise_var.shape[-1]:
        raise ValueError("dimension mismatch between channel, c and ISL geometry")
    s = np.asarray(s)
    if s.ndim:
        s = s[..., None]
    if rng_seed is None:
        n_up = np.zeros(h.shape, dtype=complex)
        n_isl = np.zeros(h.shape, dtype=complex)
    else:
        rng = np.random.default_rng(rng_seed)
        n_up = _cn(rng, h.shape) * math.sqrt(uplink.noise_power)
        n_isl = _cn(rng, h.shape) * np.sqrt(noise_var)
    branch = c * (math.sqrt(uplink.p) * h * s + n_up)
    if mode == "thz":
        return branch + n_isl
    if mode == "fso":
        a = np.asarray(alpha_p.alpha_p if isinstance(alpha_p, PointingLossSample) else alpha_p, dtype=float)
        return np.sum(a * branch, axis=-1) + np.sum(n_isl, axis=-1)
    raise ValueError(f"unknown mode {mode!r}")


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
