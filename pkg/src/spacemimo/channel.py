"""User-to-satellite Rician uplink channel with shadowing and random K-factor."""

from dataclasses import dataclass, field
from functools import lru_cache
import json
import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .linkbudget import SPEED_OF_LIGHT, fspl

_LN10 = math.log(10.0)
_HERMITE_NODES = 80


class NonUniformConstellationError(ValueError):
    """Uplink path losses too spread out for the common-statistics closed forms."""


@dataclass(frozen=True)
class FadingConfig:
    """Large- and small-scale fading parameters, all in dB except ``epsilon``.

    Defaults are editable suburban S-band placeholders: the NLoS shadowing
    deviation sits 3.58 dB above the LoS one.
    """

    sigma_sf_los: float = 1.79
    sigma_sf_nlos: float = 5.37
    k_mean: float = 10.0
    k_std: float = 3.0
    epsilon: float = 0.05
    los_phase: str = "geometric"

    def __post_init__(self):
        if min(self.sigma_sf_los, self.sigma_sf_nlos, self.k_std) < 0:
            raise ValueError("fading standard deviations must be non-negative")
        if self.epsilon < 0:
            raise ValueError("estimation error ratio must be non-negative")
        if self.los_phase not in ("geometric", "zero"):
            raise ValueError("los_phase must be 'geometric' or 'zero'")


@dataclass(frozen=True)
class FadingTable:
    """Fading configs keyed by lower elevation bound (radians), ascending."""

    bins: tuple = field(default_factory=lambda: ((0.0, FadingConfig()),))

    def __post_init__(self):
        if not self.bins:
            raise ValueError("fading table needs at least one bin")
        edges = [b[0] for b in self.bins]
        if edges != sorted(edges):
            raise ValueError("fading table bins must be sorted by elevation")

    def for_elevation(self, elevation):
        chosen = self.bins[0][1]
        for edge, cfg in self.bins:
            if elevation >= edge:
                chosen = cfg
        return chosen

    @classmethod
    def from_mapping(cls, data):
        """Build from file-style data: ``{"bins": [{"min_elevation_deg": 0, "k_mean_db": 10, ...}]}``.

        Keys outside a bin act as defaults for every bin.
        """
        from .config import fading_from_mapping

        return fading_from_mapping(data)

    @classmethod
    def load(cls, path):
        from .config import load_yaml

        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_mapping(json.loads(text) if str(path).endswith(".json") else load_yaml(text))


@dataclass(frozen=True)
class ChannelRealization:
    """One draw (shape (M,)) or a batch of draws (shape (T, M))."""

    h: np.ndarray
    h_hat: np.ndarray
    err_var: np.ndarray
    k_factors: np.ndarray
    beta_up: np.ndarray

    @property
    def h_err(self):
        return self.h_hat - self.h


@lru_cache(maxsize=64)
def normalized_moments(fading):
    """Moments of sqrt(beta_up) * h under ``fading``.

    Returns ``(mean_magnitude, power, variance)``: the magnitude of E{.}
    (its phase is the LoS phase), E{|.|^2} and their difference.
    """
    x, w = hermegauss(_HERMITE_NODES)
    w = w / math.sqrt(2 * math.pi)
    kappa = 10.0 ** ((fading.k_mean + fading.k_std * x) / 10.0)
    los_amp = float(np.sum(w * np.sqrt(kappa / (kappa + 1.0))))
    los_pow = float(np.sum(w * kappa / (kappa + 1.0)))
    nlos_pow = float(np.sum(w / (kappa + 1.0)))
    # E{10^(-X/20)} and E{10^(-X/10)} for X ~ N(0, sigma^2) in dB
    sf_amp = math.exp(0.5 * (_LN10 / 20.0 * fading.sigma_sf_los) ** 2)
    sf_los = math.exp(0.5 * (_LN10 / 10.0 * fading.sigma_sf_los) ** 2)
    sf_nlos = math.exp(0.5 * (_LN10 / 10.0 * fading.sigma_sf_nlos) ** 2)
    mean_mag = los_amp * sf_amp
    power = los_pow * sf_los + nlos_pow * sf_nlos
    return mean_mag, power, max(power - mean_mag**2, 0.0)


def los_phases(slant_range, frequency, mode="geometric"):
    d = np.asarray(slant_range, dtype=float)
    if mode == "zero":
        return np.zeros_like(d)
    return np.mod(-2.0 * np.pi * frequency * d / SPEED_OF_LIGHT, 2.0 * np.pi)


def _per_satellite(fading, elevation):
    if isinstance(fading, FadingTable):
        return [fading.for_elevation(e) for e in elevation]
    return [fading] * len(elevation)


def draw_normalized(configs, rng, shape):
    """Unit-path-loss channel draws g with per-column fading configs.

    ``shape`` is (T, M) with M == len(configs). Returns the LoS amplitude,
    the complex diffuse part and the K-factors; the LoS phase is applied by
    the caller.
    """
    k_mean = np.array([c.k_mean for c in configs])
    k_std = np.array([c.k_std for c in configs])
    s_los = np.array([c.sigma_sf_los for c in configs])
    s_nlos = np.array([c.sigma_sf_nlos for c in configs])
    kappa = 10.0 ** ((k_mean + k_std * rng.standard_normal(shape)) / 10.0)
    x_los = s_los * rng.standard_normal(shape)
    x_nlos = s_nlos * rng.standard_normal(shape)
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    los_part = np.sqrt(kappa / (kappa + 1.0)) * 10.0 ** (-x_los / 20.0)
    nlos_part = np.sqrt(1.0 / (kappa + 1.0)) * 10.0 ** (-x_nlos / 20.0) * nlos
    return los_part, nlos_part, kappa


def sample_channel(geometry, fading, uplink, rng_seed, trials=None):
    """Draw the uplink channel towards each satellite of ``geometry``.

    ``fading`` is a FadingConfig or a FadingTable looked up by elevation.
    With ``trials`` set, every field gains a leading axis of that length.
    """
    m = len(geometry.slant_range)
    if m < 1:
        raise ValueError("sample_channel needs at least one satellite")
    rng = np.random.default_rng(rng_seed)
    configs = _per_satellite(fading, geometry.elevation)
    shape = (1 if trials is None else trials, m)
    beta_up = fspl(np.asarray(geometry.slant_range, dtype=float), uplink.frequency)
    beta_up = np.atleast_1d(beta_up)
    phase = np.array(
        [los_phases(d, uplink.frequency, c.los_phase) for d, c in zip(geometry.slant_range, configs)]
    )
    los_part, nlos_part, kappa = draw_normalized(configs, rng, shape)
    h = (np.exp(1j * phase) * los_part + nlos_part) / np.sqrt(beta_up)
    var_norm = np.array([normalized_moments(c)[2] for c in configs])
    eps = np.array([c.epsilon for c in configs])
    err_var = eps**2 * var_norm / beta_up
    err = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(err_var / 2.0)
    h_hat = h + err if np.any(eps > 0) else h.copy()
    err_var = np.broadcast_to(err_var, shape).copy()
    beta = np.broadcast_to(beta_up, shape).copy()
    if trials is None:
        return ChannelRealization(h[0], h_hat[0], err_var[0], kappa[0], beta[0])
    return ChannelRealization(h, h_hat, err_var, kappa, beta)


def channel_mean_and_variance(fading, beta_up, phases=None, tolerance=4.0):
    """Analytic mean vector and common per-entry variance of the channel.

    All ``beta_up`` must lie within a factor ``tolerance`` of their median;
    the common variance is evaluated at the median path loss.
    """
    beta_up = np.asarray(beta_up, dtype=float)
    med = float(np.median(beta_up))
    spread = np.maximum(beta_up / med, med / beta_up)
    if np.any(spread > tolerance):
        raise NonUniformConstellationError(
            f"uplink path losses spread by {spread.max():.3g}x around the median (tolerance {tolerance})"
        )
    mean_mag, _, var_norm = normalized_moments(fading)
    phases = np.zeros_like(beta_up) if phases is None else np.asarray(phases, dtype=float)
    return np.exp(1j * phases) * mean_mag / np.sqrt(beta_up), var_norm / med
