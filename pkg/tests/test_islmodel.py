import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spacemimo.channel import ChannelRealization
from spacemimo.islmodel import (
    FsoParams,
    IslGeometry,
    beam_width,
    c_vector,
    mn_received_signal,
    pointing_moments,
    sample_pointing_loss,
)
from spacemimo.linkbudget import IslParams, UplinkParams


def test_fso_c_entry_from_reference_losses():
    fso = IslParams.fso()
    geom = IslGeometry(np.array([1.0, 5.29e25]), np.array([0.0, 1e-9]))
    c, c2 = c_vector(np.array([2.12e15, 2.12e15]), geom, fso)
    assert c[1] == pytest.approx(math.sqrt(10**18.5 * 2.12e15 / 5.29e25), rel=1e-12)
    assert c[1] == pytest.approx(1.1257e4, rel=1e-3)
    assert c[0] == pytest.approx(math.sqrt(2.12e15))
    assert c2[0] == 1.0 and c2[1] == pytest.approx(math.sqrt(10**18.5 / 5.29e25))


def test_equal_isl_losses_give_c_proportional_to_sqrt_beta_up():
    geom = IslGeometry(np.array([1.0, 3e20, 3e20]), np.array([0.0, 1e-9, 1e-9]))
    beta_up = np.array([2e15, 3e15, 5e15])
    c, _ = c_vector(beta_up, geom, IslParams())
    assert c[2] / c[1] == pytest.approx(math.sqrt(5 / 3))


def test_geometry_requires_exactly_one_mn():
    with pytest.raises(ValueError):
        IslGeometry(np.array([1.0, 1.0]), np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        IslGeometry(np.array([2.0, 3.0]), np.array([1.0, 1.0]))


def test_geometry_from_distances():
    isl = IslParams()
    geom = IslGeometry.from_distances([1000e3, 0.0, 500e3], isl)
    assert geom.mn_index == 1
    assert geom.isl_noise_var[0] == pytest.approx(isl.noise_power)
    quiet = IslGeometry.from_distances([0.0, 500e3], isl, noise=False)
    assert np.all(quiet.isl_noise_var == 0)


def test_beam_width_values():
    fso = FsoParams()
    assert beam_width(0.0, fso) == pytest.approx(0.05)
    rayleigh_range = math.pi * 0.05**2 / fso.wavelength
    assert beam_width(900e3, fso) == pytest.approx(0.05 * math.sqrt(1 + (900e3 / rayleigh_range) ** 2))
    assert beam_width(900e3, fso) == pytest.approx(8.905, rel=1e-3)
    assert beam_width(900e3, FsoParams(cn2=1e-15)) > beam_width(900e3, fso)


def test_pointing_moments_closed_form():
    e1, e2 = pointing_moments(1.1)
    assert e1 == pytest.approx(0.54751, abs=1e-5) and e2 == pytest.approx(0.37695, abs=1e-5)
    assert pointing_moments(math.inf) == (1.0, 1.0)


def test_pointing_samples_follow_power_law():
    a = sample_pointing_loss(1, 0.0, FsoParams(gamma=1.1), 0, mn_index=None, trials=400_000).alpha_p[:, 0]
    assert a.mean() == pytest.approx(0.54751, rel=5e-3)
    # CDF of the power law is a^(gamma^2)
    grid = np.linspace(0.05, 0.95, 10)
    emp = np.searchsorted(np.sort(a), grid) / a.size
    assert np.max(np.abs(emp - grid ** 1.21)) < 0.01


def test_pointing_large_gamma_is_lossless():
    a = sample_pointing_loss(3, 1e5, FsoParams(gamma=1e4), 0, mn_index=None, trials=1000).alpha_p
    assert np.all(a > 0.999)


def test_mn_branch_is_lossless():
    a = sample_pointing_loss(4, 1e5, FsoParams(), 1, mn_index=2, trials=100).alpha_p
    assert np.all(a[:, 2] == 1.0) and np.all(a[:, [0, 1, 3]] < 1.0)


def _chan(h):
    h = np.asarray(h, dtype=complex)
    z = np.zeros(h.shape)
    return ChannelRealization(h, h, z, z, np.full(h.shape, 2e15))


def test_noiseless_signal():
    h = np.array([1e-8 + 2e-8j, -3e-8j])
    c = np.array([4e7, 2e3])
    geom = IslGeometry(np.array([1.0, 1e20]), np.array([0.0, 1e-9]))
    up = UplinkParams()
    y = mn_received_signal(1j, _chan(h), c, None, up, geom, None)
    assert np.allclose(y, math.sqrt(up.p) * c * h * 1j)


def test_single_satellite_reduces_to_direct_link():
    geom = IslGeometry(np.array([1.0]), np.array([0.0]))
    up = UplinkParams()
    h = np.array([3e-8 + 1e-8j])
    y = mn_received_signal(1.0, _chan(h), np.array([1.0]), None, up, geom, None)
    assert y[0] == pytest.approx(math.sqrt(up.p) * h[0])


def test_noise_variance():
    geom = IslGeometry(np.array([1.0, 1e20]), np.array([0.0, 2e-9]))
    up = UplinkParams()
    c = np.array([1.0, 3e3])
    h = np.zeros(2)
    rng = np.random.default_rng(8)
    ys = np.array([mn_received_signal(0.0, _chan(h), c, None, up, geom, rng) for _ in range(20_000)])
    var = np.mean(np.abs(ys) ** 2, axis=0)
    expect = up.noise_power * c**2 + geom.isl_noise_var
    assert var == pytest.approx(expect, rel=0.04)


@settings(max_examples=30)
@given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5), st.floats(-3, 3))
def test_affine_in_symbol(s1, s2, a):
    geom = IslGeometry(np.array([1.0, 1e20]), np.array([0.0, 1e-9]))
    up = UplinkParams()
    c = np.array([2.0, 5.0])
    ch = _chan([1e-8, 2e-8j])
    f = lambda s: mn_received_signal(s, ch, c, None, up, geom, None)
    assert np.allclose(f(a * s1 + s2), a * f(s1) + f(s2), rtol=1e-9, atol=1e-30)


def test_fso_mode_sums_pointing_weighted_branches():
    geom = IslGeometry(np.array([1.0, 1e20]), np.array([0.0, 1e-9]))
    up = UplinkParams()
    c = np.array([2.0, 5.0])
    ch = _chan([1e-8, 2e-8j])
    alpha = np.array([1.0, 0.4])
    thz = mn_received_signal(1.0, ch, c, None, up, geom, None)
    fso = mn_received_signal(1.0, ch, c, alpha, up, geom, None, mode="fso")
    assert fso == pytest.approx(np.sum(alpha * thz))
