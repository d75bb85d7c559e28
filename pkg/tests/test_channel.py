import json
import math

import numpy as np
import pytest

from spacemimo.channel import (
    FadingConfig,
    FadingTable,
    NonUniformConstellationError,
    channel_mean_and_variance,
    draw_normalized,
    normalized_moments,
    sample_channel,
)
from spacemimo.linkbudget import UplinkParams, fspl
from spacemimo.orbit import VisibilitySet


def geometry(ranges, elev=1.0):
    ranges = np.asarray(ranges, dtype=float)
    return VisibilitySet(0.0, np.arange(len(ranges)), ranges, np.full(len(ranges), elev))


NO_SHADOW = dict(sigma_sf_los=0.0, sigma_sf_nlos=0.0, k_std=0.0)


def test_perfect_estimate_when_epsilon_zero():
    ch = sample_channel(geometry([550e3, 600e3]), FadingConfig(epsilon=0.0), UplinkParams(), 3, trials=10)
    assert np.array_equal(ch.h, ch.h_hat)
    assert np.all(ch.err_var == 0)


def test_pure_los_magnitude():
    fading = FadingConfig(k_mean=300.0, **NO_SHADOW)
    ch = sample_channel(geometry([550e3]), fading, UplinkParams(), 0)
    assert abs(ch.h[0]) == pytest.approx(1 / math.sqrt(fspl(550e3, 2e9)), rel=1e-12)
    assert abs(ch.h[0]) ** 2 == pytest.approx(1 / 2.12e15, rel=5e-3)


def test_unit_mean_power_without_shadowing():
    fading = FadingConfig(k_mean=10.0, **NO_SHADOW)
    ch = sample_channel(geometry([550e3]), fading, UplinkParams(), 1, trials=100_000)
    power = np.mean(np.abs(ch.h[:, 0]) ** 2) * ch.beta_up[0, 0]
    assert power == pytest.approx(1.0, rel=0.01)


def test_los_to_nlos_power_ratio_is_kappa():
    fading = FadingConfig(k_mean=7.0, **NO_SHADOW)
    los, nlos, kappa = draw_normalized([fading], np.random.default_rng(2), (200_000, 1))
    ratio = np.mean(np.abs(los) ** 2) / np.mean(np.abs(nlos) ** 2)
    assert ratio == pytest.approx(10 ** 0.7, rel=0.02)
    assert np.allclose(kappa, 10 ** 0.7)


def test_branches_are_independent():
    ch = sample_channel(geometry([550e3, 560e3]), FadingConfig(los_phase="zero"), UplinkParams(), 4, trials=100_000)
    a = ch.h[:, 0] - ch.h[:, 0].mean()
    b = ch.h[:, 1] - ch.h[:, 1].mean()
    corr = abs(np.mean(a * b.conj())) / math.sqrt(np.mean(abs(a) ** 2) * np.mean(abs(b) ** 2))
    assert corr < 0.02


def test_estimation_error_variance():
    ch = sample_channel(geometry([550e3]), FadingConfig(epsilon=0.2), UplinkParams(), 5, trials=200_000)
    measured = np.mean(np.abs(ch.h_err) ** 2)
    assert measured == pytest.approx(ch.err_var[0, 0], rel=0.03)
    assert ch.err_var[0, 0] == pytest.approx(0.04 * normalized_moments(FadingConfig(epsilon=0.2))[2] / ch.beta_up[0, 0])


def test_moments_agree_with_monte_carlo():
    fading = FadingConfig(los_phase="zero")
    mean_mag, power, var = normalized_moments(fading)
    los, nlos, _ = draw_normalized([fading], np.random.default_rng(6), (400_000, 1))
    g = (los + nlos)[:, 0]
    assert np.mean(np.abs(g) ** 2) == pytest.approx(power, rel=0.02)
    assert np.var(g) == pytest.approx(var, rel=0.02)
    assert abs(np.mean(g)) == pytest.approx(mean_mag, rel=0.02)


def test_mean_and_variance_in_the_deterministic_limit():
    fading = FadingConfig(k_mean=300.0, **NO_SHADOW)
    beta = np.array([2e15, 2.5e15, 3e15])
    m, s2 = channel_mean_and_variance(fading, beta)
    assert s2 == pytest.approx(0.0, abs=1e-30)
    assert np.vdot(m, m).real == pytest.approx(np.sum(1 / beta), rel=1e-9)


def test_non_uniform_constellation_rejected():
    with pytest.raises(NonUniformConstellationError):
        channel_mean_and_variance(FadingConfig(), np.array([1e15, 1e16]))


def test_same_seed_is_bit_identical():
    g = geometry([550e3, 700e3])
    a = sample_channel(g, FadingConfig(), UplinkParams(), 11, trials=5)
    b = sample_channel(g, FadingConfig(), UplinkParams(), 11, trials=5)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.h_hat, b.h_hat)


def test_table_lookup_and_loading(tmp_path):
    data = {"bins": [
        {"min_elevation_deg": 0.0, "k_mean_db": 5.0},
        {"min_elevation_deg": 60.0, "k_mean_db": 15.0, "epsilon": 0.0},
    ]}
    path = tmp_path / "t.json"
    path.write_text(json.dumps(data))
    table = FadingTable.load(path)
    assert table.for_elevation(math.radians(30)).k_mean == 5.0
    assert table.for_elevation(math.radians(75)).k_mean == 15.0
    assert table.for_elevation(math.radians(75)).epsilon == 0.0


def test_table_yaml(tmp_path):
    path = tmp_path / "t.yaml"
    path.write_text("bins:\n  - {min_elevation_deg: 0, sigma_sf_los_db: 2.0}\n")
    assert FadingTable.load(path).for_elevation(0.5).sigma_sf_los == 2.0


def test_empty_geometry_rejected():
    with pytest.raises(ValueError):
        sample_channel(geometry([]), FadingConfig(), UplinkParams(), 0)
