"""Unit conversions and the scalar physics shared by both hops."""

from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 3e8  # m/s; rounded value so the reported FSPL figures reproduce
BOLTZMANN = 1.380649e-23  # J/K
ISL_BANDWIDTH_RATIO = 0.02


def db_to_linear(x):
    out = 10.0 ** (np.asarray(x, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    out = 10.0 * np.log10(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def fspl(distance, frequency):
    """Free-space path loss (4*pi*d*f/c)**2 as a linear factor."""
    d = np.asarray(distance, dtype=float)
    f = np.asarray(frequency, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ValueError("fspl requires positive distance and frequency")
    out = (4.0 * np.pi * d * f / SPEED_OF_LIGHT) ** 2
    return float(out) if out.ndim == 0 else out


def thermal_noise_power(temperature, bandwidth):
    """k_B * T * B in watts."""
    return BOLTZMANN * temperature * bandwidth


@dataclass(frozen=True)
class UplinkParams:
    """User-to-satellite hop. Gains are linear, power in watts."""

    tx_power: float = db_to_linear(-6.0)
    tx_gain: float = db_to_linear(5.0)
    rx_gain: float = db_to_linear(35.0)
    frequency: float = 2e9
    bandwidth: float = 20e6
    noise_temperature: float = 290.0

    def __post_init__(self):
        for name in ("tx_power", "tx_gain", "rx_gain", "frequency", "bandwidth", "noise_temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"UplinkParams.{name} must be positive")

    @property
    def p(self):
        """Composite gain P_T * G_T * G_R."""
        return self.tx_power * self.tx_gain * self.rx_gain

    @property
    def noise_power(self):
        return thermal_noise_power(self.noise_temperature, self.bandwidth)


@dataclass(frozen=True)
class IslParams:
    """Inter-satellite hop. ``bandwidth=None`` means 0.02 * frequency."""

    tx_power: float = db_to_linear(5.0)
    tx_gain: float = db_to_linear(60.0)
    rx_gain: float = db_to_linear(60.0)
    frequency: float = 1e12
    bandwidth: float | None = field(default=None)
    noise_temperature: float = 7000.0

    def __post_init__(self):
        for name in ("tx_power", "tx_gain", "rx_gain", "frequency", "noise_temperature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"IslParams.{name} must be positive")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValueError("IslParams.bandwidth must be positive")

    @classmethod
    def fso(cls, **overrides):
        """Optical ISL defaults: 90 dBi apertures at 193 THz."""
        base = dict(tx_gain=db_to_linear(90.0), rx_gain=db_to_linear(90.0), frequency=193e12)
        base.update(overrides)
        return cls(**base)

    @property
    def effective_bandwidth(self):
        if self.bandwidth is not None:
            return self.bandwidth
        return ISL_BANDWIDTH_RATIO * self.frequency

    @property
    def p_isl(self):
        return self.tx_power * self.tx_gain * self.rx_gain

    @property
    def noise_power(self):
        return thermal_noise_power(self.noise_temperature, self.effective_bandwidth)

    def at_frequency(self, frequency):
        """Same terminal retuned; an explicit bandwidth is kept, a derived one follows."""
        return replace(self, frequency=frequency)
