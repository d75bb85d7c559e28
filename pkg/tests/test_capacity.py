import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from spacemimo import capacity
from spacemimo.capacity import CapacityInputs, FsoBoundInputs
from spacemimo.linkbudget import IslParams, UplinkParams, fspl

GRID = [(M, om, s2) for M in (2, 5, 10) for om in (0.0, 1.0, 3.0) for s2 in (0.5, 1.0)]


def test_hyp0f1_values():
    assert capacity.hyp0f1(3, 0.0) == 1.0
    assert capacity.hyp0f1(4, 2.0) == pytest.approx(special.hyp0f1(4, 2.0), rel=1e-13)
    assert capacity.hyp0f1(4, 2.0) == pytest.approx(1.6119459, abs=1e-7)


@settings(max_examples=50)
@given(st.floats(0.5, 200.0), st.floats(0.0, 500.0))
def test_hyp0f1_against_scipy(b, x):
    assert capacity.log_hyp0f1(b, x) == pytest.approx(math.log(special.hyp0f1(b, x)), rel=1e-11, abs=1e-12)


def test_hyp0f1_large_arguments_stay_finite():
    assert np.isfinite(capacity.log_hyp0f1(5, 1e6))


def test_hyp0f1_monotone_in_x():
    x = np.linspace(0, 50, 200)
    assert np.all(np.diff(capacity.hyp0f1(7, x)) > 0)


def test_hyp0f1_rejects_bad_input():
    with pytest.raises(ValueError):
        capacity.hyp0f1(0, 1.0)
    with pytest.raises(ValueError):
        capacity.hyp0f1(2, -1.0)


def test_exp_bound_values():
    lhs, rhs = capacity.lemma1_bound(4, 2.0)
    assert lhs == pytest.approx(1.6119459, abs=1e-7) and rhs == pytest.approx(math.exp(0.5))
    assert capacity.lemma1_bound(3, 0.0) == (1.0, 1.0)


def test_exp_bound_grid_and_gap():
    for M in range(1, 65):
        lhs, rhs = capacity.lemma1_bound(M, np.array([0.0, 0.1, 1.0, 10.0, 100.0]))
        assert np.all(lhs <= rhs * (1 + 1e-12))
    gaps = [np.subtract(*capacity.lemma1_bound(M, 3.0)[::-1]) for M in (2, 4, 8, 16, 32, 64)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_central_density_is_gamma():
    inp = CapacityInputs(4, 1.0, 0.7)
    w = np.linspace(0.01, 10, 50)
    assert np.allclose(capacity.wishart_pdf(w, inp), stats.gamma(4, scale=0.7).pdf(w), rtol=1e-12)


def test_density_matches_scaled_noncentral_chi2():
    inp = CapacityInputs(5, 1.0, 0.5, 2.0)
    w = np.linspace(0.05, 12, 40)
    # ||h||^2 = (sigma^2 / 2) * chi2'(2M, 2 Omega)
    ref = stats.ncx2(10, 4.0, scale=0.25).pdf(w)
    assert np.allclose(capacity.wishart_pdf(w, inp), ref, rtol=1e-9)


@pytest.mark.parametrize("M,om,s2", GRID)
def test_density_normalizes(M, om, s2):
    inp = CapacityInputs(M, 1.0, s2, om)
    total, _ = integrate.quad(lambda w: capacity.wishart_pdf(w, inp), 0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_exact_capacity_low_snr_limit():
    assert capacity.ergodic_capacity_exact(CapacityInputs(3, 1e-12, 1.0, 1.0)) < 1e-10


def test_exact_capacity_central_scalar_against_quad():
    rho = 3.0
    ref, _ = integrate.quad(lambda w: np.log2(1 + rho * w) * np.exp(-w), 0, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert capacity.ergodic_capacity_exact(CapacityInputs(1, rho, 1.0)) == pytest.approx(ref, rel=1e-6)


def test_exact_capacity_against_monte_carlo():
    M, om, s2, rho = 5, 1.0, 1.0, 0.01
    rng = np.random.default_rng(0)
    mean = np.full(M, math.sqrt(om * s2 / M))
    h = mean + (rng.standard_normal((1_000_000, M)) + 1j * rng.standard_normal((1_000_000, M))) * math.sqrt(s2 / 2)
    r = np.log2(1 + rho * np.sum(np.abs(h) ** 2, axis=1))
    exact = capacity.ergodic_capacity_exact(CapacityInputs(M, rho, s2, om))
    assert abs(exact - r.mean()) <= 3 * r.std(ddof=1) / 1000


def test_approx_example():
    inp = CapacityInputs(5, 0.01, 1.0, 1.0)
    assert capacity.ergodic_capacity_approx(inp) == pytest.approx(0.01 * math.exp(-1) * 5**7 / 4**6, rel=1e-12)
    assert capacity.ergodic_capacity_approx(inp) == pytest.approx(0.07017, abs=1e-5)


def test_approx_central_slope():
    assert capacity.ergodic_capacity_approx(CapacityInputs(6, 0.2, 0.5)) == pytest.approx(0.2 * 0.5 * 6)


def test_approx_domain():
    with pytest.raises(ValueError):
        capacity.ergodic_capacity_approx(CapacityInputs(3, 1.0, 1.0, 3.0))
    with pytest.raises(ValueError):
        capacity.ergodic_capacity_approx(CapacityInputs(3, 1.0, 1.0, 3.0 + 1e-9))


@pytest.mark.parametrize("M,om,s2", [g for g in GRID if g[0] > g[1]])
def test_derivation_chain(M, om, s2):
    inp = CapacityInputs(M, 0.3, s2, om)
    approx = capacity.ergodic_capacity_approx(inp)
    assert capacity.approx_from_chain(inp) == pytest.approx(approx, rel=1e-9)
    assert capacity.linearized_capacity_quadrature(inp) == pytest.approx(approx, rel=1e-6)
    for rho in (0.01, 1.0):
        inp = CapacityInputs(M, rho, s2, om)
        # equality at Omega = 0, where 0F1 = 1 = exp(0)
        assert capacity.appendix_upper_bound(inp) >= capacity.ergodic_capacity_exact(inp) * (1 - 1e-12)


def test_closed_form_integral_examples():
    closed, quad = capacity.appendix_integral_identity(1, 0.0, 1.0)
    assert closed == pytest.approx(1.0) and quad == pytest.approx(1.0, abs=1e-8)
    closed, quad = capacity.appendix_integral_identity(5, 1.0, 1.0)
    assert closed == pytest.approx(5**6 * 120 / 4**6) and quad == pytest.approx(closed, rel=1e-6)
    closed, quad = capacity.appendix_integral_identity(10, 3.0, 0.5)
    assert quad == pytest.approx(closed, rel=1e-6)


def test_closed_form_integral_against_scipy_quad():
    M, om, s2 = 5, 1.0, 1.0
    rate = (M - om) / (M * s2)
    ref, _ = integrate.quad(lambda w: np.exp(-rate * w) * w**M, 0, np.inf, epsrel=1e-12)
    assert capacity.appendix_integral_identity(M, om, s2)[0] == pytest.approx(ref, rel=1e-9)


def test_large_clusters_stay_finite():
    inp = CapacityInputs(200, 0.01, 1.0, 3.0)
    assert np.isfinite(capacity.ergodic_capacity_approx(inp))
    assert np.isfinite(capacity.log_appendix_closed_form(200, 3.0, 1.0))
    log_c, log_q = capacity.appendix_integral_identity(200, 3.0, 1.0, log=True)
    assert log_q == pytest.approx(log_c, rel=1e-9)


def test_rho_limits():
    assert capacity.rho_thz(2.0, 1e3, 2e15, 1e20, 0.5, 0.0) == pytest.approx(4.0)
    g = 1e3 * 2e15 / 1e30
    assert capacity.rho_thz(2.0, 1e3, 2e15, 1e30, 0.5, 1.0) == pytest.approx(2.0 * g, rel=1e-6)


def test_rho_default_thz():
    up, isl = UplinkParams(), IslParams()
    b_up, b_isl = 2.12e15, fspl(900e3, 1e12)
    p = 10 ** (-0.6) * 10**0.5 * 10**3.5
    p_isl = 10**0.5 * 10**6 * 10**6
    n_up = 1.380649e-23 * 290 * 20e6
    n_isl = 1.380649e-23 * 7000 * 2e10
    ref = p * p_isl * b_up / b_isl / (p_isl * b_up / b_isl * n_up + n_isl)
    got = capacity.rho_thz(up.p, isl.p_isl, b_up, b_isl, up.noise_power, isl.noise_power)
    assert got == pytest.approx(ref, rel=1e-12)


def test_representative_rho_uses_medians():
    rho, bu, bi = capacity.representative_rho(1.0, 1.0, [1.0, 5.0, 3.0], [2.0, 9.0, 4.0], 1.0, 1.0)
    assert (bu, bi) == (3.0, 4.0)


def _fso(M, gamma=1.1, **kw):
    return FsoBoundInputs.validation_setup(M, gamma=gamma, **kw)


def test_psi_mean_term():
    a = _fso(4)
    zero_mean = FsoBoundInputs(a.p, a.p_isl, a.beta_up, a.beta_isl, a.gamma, a.E_abs_h2, 0.0, 4, a.sigma_n_up2, a.sigma_n_isl2)
    other = FsoBoundInputs(a.p, a.p_isl, a.beta_up, a.beta_isl, a.gamma, a.E_abs_h2, 0.0, 9, a.sigma_n_up2, a.sigma_n_isl2)
    assert capacity.fso_psi(zero_mean) == pytest.approx(capacity.fso_psi(other))


def test_psi_increases_with_gamma():
    assert capacity.fso_psi(_fso(6, 3.0)) > capacity.fso_psi(_fso(6, 1.1))


def test_fso_bound_above_monte_carlo():
    for M in range(2, 21):
        inp = _fso(M)
        mc, _ = capacity.fso_capacity_montecarlo(inp, trials=10_000, rng_seed=M)
        assert mc <= capacity.fso_capacity_upper_bound(inp)


def test_fso_degenerate_chain():
    inp = FsoBoundInputs(2.0, 1.0, 1.0, 1.0, 1e9, 1.0, 0.0, 1, 0.5, 0.0)
    ones = lambda rng, n, m: np.ones((n, m))
    draws = []

    def chan(rng, n, m):
        h = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / math.sqrt(2)
        draws.append(h)
        return h

    mc, _ = capacity.fso_capacity_montecarlo(inp, chan, ones, trials=5000, rng_seed=1)
    h = np.concatenate(draws)[:, 0]
    assert mc == pytest.approx(np.mean(np.log2(1 + 2.0 * np.abs(h) ** 2 / 0.5)), rel=1e-12)


def test_fso_standard_error_scales():
    inp = _fso(5)
    _, se1 = capacity.fso_capacity_montecarlo(inp, trials=4000, rng_seed=1)
    _, se2 = capacity.fso_capacity_montecarlo(inp, trials=8000, rng_seed=2)
    assert se1 / se2 == pytest.approx(math.sqrt(2), rel=0.2)


def test_fso_bound_requires_dense():
    a = _fso(3)
    sparse = FsoBoundInputs(a.p, a.p_isl, a.beta_up, a.beta_isl, a.gamma, a.E_abs_h2, a.E_h, 3,
                            a.sigma_n_up2, a.sigma_n_isl2, dense=False)
    with pytest.raises(ValueError):
        capacity.fso_capacity_upper_bound(sparse)
