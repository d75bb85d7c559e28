"""Acceptance suite: twelve end-to-end checks with pinned tolerances.

Each check returns a CriterionResult. Reports contain no timings so they are
identical across reruns and worker counts; runtime budgets are enforced by
the test harness.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.integrate import cumulative_simpson

from . import capacity, detect
from .channel import FadingConfig, sample_channel
from .config import ExperimentConfig, TimeGrid
from .islmodel import FsoParams, IslGeometry, c_vector, sample_pointing_loss
from .linkbudget import IslParams, UplinkParams, fspl
from .mcsim import PSK_NAMES, run_ber_vs_m, run_experiment, run_se_time, run_se_vs_m
from .orbit import LAKE_DISTRICT, ConstellationConfig, propagate_arrays, visible_set
from .output import format_csv

SEED = 20240601


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def lemma1_holds(value, bound):
    """The bound side of exponential-bound check; tests swap this to prove sensitivity."""
    return value <= bound * (1.0 + 1e-12)


def _rel(a, b):
    return abs(a - b) / abs(b)


# --- 1-4: analytic identities ---------------------------------------------------

def criterion_fspl():
    up = fspl(550e3, 2e9)
    isl = fspl(900e3, 193e12)
    e1, e2 = _rel(up, 2.12e15), _rel(isl, 5.29e25)
    return e1 <= 5e-3 and e2 <= 5e-3, f"uplink {up:.4e} (err {e1:.2%}), FSO ISL {isl:.4e} (err {e2:.2%})"


GRID = [(M, om, s2) for M in (2, 5, 10, 20) for om in (0.0, 1.0, 3.0) for s2 in (0.5, 1.0) if M > om]


def criterion_integral_identity():
    worst = 0.0
    for M, om, s2 in GRID:
        log_closed, log_quad = capacity.appendix_integral_identity(M, om, s2, log=True)
        worst = max(worst, abs(math.expm1(log_quad - log_closed)))
    return worst <= 1e-6, f"max relative error {worst:.2e} over {len(GRID)} grid points"


def criterion_exp_bound():
    xs = np.array([0.0, 0.1, 1.0, 10.0, 100.0])
    violations = 0
    for M in range(1, 65):
        value, bound = capacity.lemma1_bound(M, xs)
        violations += int(np.sum(~lemma1_holds(value, bound)))
    gaps = []
    for M in (2, 4, 8, 16, 32, 64):
        value, bound = capacity.lemma1_bound(M, 3.0)
        gaps.append(float(bound - value))
    monotone = all(a > b for a, b in zip(gaps, gaps[1:]))
    ok = violations == 0 and monotone
    return ok, f"{violations} violations on 320 points; gap at x=3 " + ", ".join(f"{g:.3g}" for g in gaps)


def criterion_chain():
    worst_chain = worst_quad = 0.0
    for M, om, s2 in GRID:
        for rho in (0.5, 2.0):
            inp = capacity.CapacityInputs(M, rho, s2, om)
            approx = capacity.ergodic_capacity_approx(inp)
            worst_chain = max(worst_chain, _rel(approx, capacity.approx_from_chain(inp)))
            worst_quad = max(worst_quad, _rel(approx, capacity.linearized_capacity_quadrature(inp)))
    ok = worst_chain <= 1e-9 and worst_quad <= 1e-6
    return ok, f"chain error {worst_chain:.2e}, linearized-quadrature error {worst_quad:.2e}"


# --- 5: noncentral Wishart sampling ------------------------------------------------

def criterion_wishart(samples=1_000_000, seed=SEED):
    M, om, s2, rho = 5, 1.0, 1.0, 10.0
    inp = capacity.CapacityInputs(M, rho, s2, om)
    rng = np.random.default_rng(seed)
    mean = np.full(M, math.sqrt(om * s2 / M))
    h = mean + (rng.standard_normal((samples, M)) + 1j * rng.standard_normal((samples, M))) * math.sqrt(s2 / 2)
    w = np.sort(np.sum(np.abs(h) ** 2, axis=1))
    grid = np.linspace(0.0, w[-1] * 1.01, 400_001)
    cdf = cumulative_simpson(capacity.wishart_pdf(grid, inp), x=grid, initial=0.0)
    model = np.interp(w, grid, cdf)
    n = w.size
    ks = max(np.max(np.arange(1, n + 1) / n - model), np.max(model - np.arange(n) / n))
    rate = np.log2(1.0 + rho * w)
    mc, se = rate.mean(), rate.std(ddof=1) / math.sqrt(n)
    exact = capacity.ergodic_capacity_exact(inp)
    z = abs(exact - mc) / se
    ok = ks < 0.01 and z <= 3.0
    return ok, f"KS {ks:.4f}; exact capacity {exact:.5f} vs Monte Carlo {mc:.5f} ({z:.2f} standard errors)"


# --- 6: MMSE optimality -------------------------------------------------------------

def _random_context(rng, mode, M):
    c = np.exp(rng.normal(0.0, 0.5, M))
    p = float(np.exp(rng.normal(0.0, 0.5)))
    sigma2 = float(np.exp(rng.normal(-1.0, 0.5)))
    isl = np.exp(rng.normal(-2.0, 0.5, M))
    isl[0] = 0.0
    err = np.exp(rng.normal(-3.0, 0.5, M))
    if mode == "case1":
        h_hat = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / math.sqrt(2.0)
        return detect.case1_context(c, p, sigma2, isl, h_hat, err)
    inv = np.exp(rng.normal(0.5, 0.5, M))
    h_mn = complex(rng.standard_normal(), rng.standard_normal())
    return detect.case2_context(c, p, sigma2, isl, err, inv, h_mn)


def _probe_minimizer(objective, M, scale):
    """Minimizer of a real quadratic in complex v, recovered from point probes only."""
    n = 2 * M

    def J(x):
        return float(objective(scale * (x[:M] + 1j * x[M:])))

    eye = np.eye(n)
    k = J(np.zeros(n))
    plus = np.array([J(e) for e in eye])
    minus = np.array([J(-e) for e in eye])
    q = np.diag((plus + minus) / 2.0 - k)
    g = (minus - plus) / 4.0
    for i in range(n):
        for j in range(i + 1, n):
            q[i, j] = q[j, i] = (J(eye[i] + eye[j]) - plus[i] - plus[j] + k) / 2.0
    x = np.linalg.solve(q, g)
    return scale * (x[:M] + 1j * x[M:])


def criterion_mmse(contexts=50, perturbations=1000, seed=SEED):
    rng = np.random.default_rng(seed)
    worst_gap, worst_direct, checked = 0.0, 0.0, 0
    for mode in ("case1", "case2"):
        solve = detect.mmse_vector_case1 if mode == "case1" else detect.mmse_vector_case2
        mse = detect.mse_case1 if mode == "case1" else detect.mse_case2
        for M in (2, 4, 8):
            for _ in range(contexts):
                ctx = _random_context(rng, mode, M)
                v = solve(ctx).v
                j0 = mse(ctx, v)
                dv = (rng.standard_normal((perturbations, M)) + 1j * rng.standard_normal((perturbations, M)))
                dv *= 1e-3 * np.max(np.abs(v))
                gap = np.min(mse(ctx, v + dv) - j0)
                worst_gap = min(worst_gap, gap / abs(j0))
                direct = _probe_minimizer(lambda u: mse(ctx, u), M, np.max(np.abs(v)))
                worst_direct = max(worst_direct, np.max(np.abs(direct - v)) / np.max(np.abs(v)))
                checked += 1
    ok = worst_gap >= -1e-12 and worst_direct <= 1e-8
    return ok, (f"{checked} contexts; worst perturbation gain {worst_gap:.1e} (relative), "
                f"max deviation from direct minimizer {worst_direct:.1e}")


# --- 7: rate ordering -----------------------------------------------------------------

def criterion_rate_ordering(trials=1000, m=10, seed=SEED):
    cons = ConstellationConfig()
    states = propagate_arrays(cons, 0.0)
    vis = visible_set(states, LAKE_DISTRICT, math.radians(30.0))
    idx = np.arange(m)
    sub = type(vis)(vis.time, vis.sat_ids[idx], vis.slant_range[idx], vis.elevation[idx])
    pos = states.select(sub.sat_ids).position
    uplink, isl = UplinkParams(), IslParams()
    fading = FadingConfig()
    chan = sample_channel(sub, fading, uplink, seed, trials=trials)
    geom = IslGeometry.from_distances(np.linalg.norm(pos - pos[0], axis=1), isl)
    beta = chan.beta_up[0]
    c, c2 = c_vector(beta, geom, isl)
    p, s2, noise = uplink.p, uplink.noise_power, geom.isl_noise_var
    perfect = detect.case1_context(c, p, s2, noise, chan.h, np.zeros_like(chan.err_var))
    r_perfect = detect.rate_case1(perfect, detect.mmse_vector_case1(perfect), chan.h).rate
    imperfect = detect.case1_context(c, p, s2, noise, chan.h_hat, chan.err_var)
    r_fc = detect.rate_case1(imperfect, detect.mmse_vector_case1(imperfect), chan.h).rate
    stats = detect.case2_statistics(fading, 100_000, seed)
    case2 = detect.case2_context(c2, p, s2, noise, chan.err_var, stats.e_inv_hhat2 * beta, chan.h_hat[:, 0])
    r_pc = detect.rate_case2(case2, detect.mmse_vector_case2(case2)).rate
    a, b, d = r_perfect.mean(), r_fc.mean(), r_pc.mean()
    ok = a >= b >= 0.0 and b >= d
    return ok, f"M={m}: R_FC perfect {a:.4f}, R_FC eps=0.05 {b:.4f}, R_PC {d:.4f} bits/s/Hz"


# --- 8-10: FSO and geometry ------------------------------------------------------------

def criterion_fso(trials=10_000, seed=SEED):
    below, worst_gap, rows = True, 0.0, []
    for M in range(2, 21):
        inp = capacity.FsoBoundInputs.validation_setup(M, gamma=1.1, beta_up=2.12e15, beta_isl=5.29e25)
        mc, _ = capacity.fso_capacity_montecarlo(inp, trials=trials, rng_seed=np.random.SeedSequence(seed, spawn_key=(M,)))
        bound = capacity.fso_capacity_upper_bound(inp)
        below &= mc <= bound
        gap = (bound - mc) / bound
        if M >= 5:
            worst_gap = max(worst_gap, gap)
        rows.append(f"M={M}:{gap:.3f}")
    ok = below and worst_gap <= 0.15
    return ok, f"bound above Monte Carlo: {below}; worst gap (M>=5) {worst_gap:.3f}; gaps " + " ".join(rows)


def criterion_pointing(draws=1_000_000, seed=SEED):
    a = sample_pointing_loss(1, 0.0, FsoParams(gamma=1.1), seed, mn_index=None, trials=draws).alpha_p[:, 0]
    e1, e2 = a.mean(), np.mean(a**2)
    r1, r2 = _rel(e1, 0.54751), _rel(e2, 0.37695)
    return r1 <= 5e-3 and r2 <= 5e-3, f"E(alpha) {e1:.5f} (err {r1:.2%}), E(alpha^2) {e2:.5f} (err {r2:.2%})"


def criterion_constellation(step=10.0):
    cons = ConstellationConfig()
    count = len(propagate_arrays(cons, 0.0).ids)
    period = cons.shells[1].period
    mask = math.radians(30.0)
    visible = [len(visible_set(propagate_arrays(cons, t), LAKE_DISTRICT, mask).sat_ids)
               for t in np.arange(0.0, period, step)]
    ok_count, ok_period, ok_vis = count == 3168, abs(period - 5730.4) <= 1.0, min(visible) >= 20
    detail = (f"{count} satellites; period at 550 km {period:.1f} s; visible over one orbit "
              f"min {min(visible)} mean {np.mean(visible):.1f} max {max(visible)} "
              f"({sum(v < 20 for v in visible)}/{len(visible)} steps below 20)")
    return ok_count and ok_period and ok_vis, detail


# --- 11: system orderings ---------------------------------------------------------------

def _series(rows, metric):
    return {r.sweep_value: (r.value, r.std_error) for r in rows if r.metric == metric}


def _non_increasing(points, slack=3.0):
    """True when no later point rises above an earlier one by more than ``slack`` standard errors."""
    for (a, sa), (b, sb) in zip(points, points[1:]):
        if b - a > slack * math.hypot(sa, sb):
            return False
    return True


def system_configs(trials=500, seed=SEED, workers=1):
    base = dict(trials=trials, master_seed=seed, workers=workers)
    return {
        "se_vs_m": ExperimentConfig("se_vs_m", **base),
        "ber_vs_m": ExperimentConfig("ber_vs_m", **base),
        "se_time": ExperimentConfig("se_time", time=TimeGrid(0.0, 6000.0, 10.0), **base),
    }


def criterion_system(trials=500, seed=SEED, workers=1):
    cfgs = system_configs(trials, seed, workers)
    se = run_se_vs_m(cfgs["se_vs_m"])
    ber = run_ber_vs_m(cfgs["ber_vs_m"])
    st = run_se_time(cfgs["se_time"])
    ms = cfgs["se_vs_m"].sweep_m_values
    f_lo, f_hi = cfgs["se_vs_m"].sweep_isl_frequencies[:2]
    failures = []

    for metric in sorted({r.metric for r in se if r.metric.startswith("se_")}):
        s = _series(se, metric)
        for f in (f_lo, f_hi):
            pts = [(-s[(m, f)][0], s[(m, f)][1]) for m in ms]
            if not _non_increasing(pts):
                failures.append(f"{metric}@{f:.0e} not non-decreasing in M")
    s = _series(se, "se_case1_perfect")
    if not all(s[(m, f_lo)][0] > s[(m, f_hi)][0] for m in ms if m > 1):
        failures.append("SE not decreasing in f_isl")
    for name in ("case1_perfect", "case1_imperfect", "case2_imperfect"):
        noisy, clean = _series(se, f"se_{name}"), _series(se, f"se_{name}_no_isl_noise")
        if any(noisy[k][0] > clean[k][0] * (1 + 1e-12) for k in noisy):
            failures.append(f"{name} with ISL noise exceeds noise-free")

    orders = sorted(PSK_NAMES)
    worst_ber_10 = 0.0
    for metric in sorted({r.metric for r in ber}):
        b = _series(ber, metric)
        if not _non_increasing([b[m] for m in ms]):
            failures.append(f"{metric} not non-increasing in M")
    for name in ("case1_perfect", "case1_imperfect", "case2_perfect", "case2_imperfect"):
        curves = [_series(ber, f"ber_{name}_{PSK_NAMES[o]}") for o in orders]
        for m in ms:
            pts = [curves[i][m] for i in range(len(orders))]
            # BPSK <= QPSK <= 8PSK within 3 standard errors
            if not _non_increasing([(-v, e) for v, e in pts]):
                failures.append(f"{name} BER order violated at M={m}")
        worst_ber_10 = max(worst_ber_10, max(curves[-1][m][0] for m in ms if m > 9))

    summary = {r.metric: r.value for r in st if r.sweep_key == "summary"}
    if not summary["se_cluster"] > summary["se_single_handover"]:
        failures.append("cluster SE does not beat single-satellite SE")
    detail = (f"cluster SE {summary['se_cluster']:.2f} vs single with handover "
              f"{summary['se_single_handover']:.2f} (no handover {summary['se_single_no_handover']:.2f}) bits/s/Hz; "
              f"worst 8PSK BER for M>9 {worst_ber_10:.2e}")
    if failures:
        detail += "; " + "; ".join(failures[:5])
    return not failures, detail


# --- 12: determinism ---------------------------------------------------------------------

def determinism_configs(seed=SEED):
    short = TimeGrid(0.0, 600.0, 120.0)
    return [
        ExperimentConfig("mn_sweep", time=short, trials=40, cluster_size=8, master_seed=seed),
        ExperimentConfig("se_time", time=TimeGrid(0.0, 300.0, 60.0), trials=20, m_values=(6,), master_seed=seed),
        ExperimentConfig("se_vs_m", time=short, trials=40, m_values=(1, 3, 6), master_seed=seed),
        ExperimentConfig("ber_vs_m", time=short, trials=40, m_values=(1, 4), symbols_per_trial=10, master_seed=seed),
        ExperimentConfig("fso_validation", trials=500, m_values=(2, 6), master_seed=seed),
        ExperimentConfig("gamma_sweep", trials=500, m_values=(1, 4), gammas=(1.1, 3.0), master_seed=seed),
    ]


def criterion_determinism(workers=2, seed=SEED):
    mismatched = []
    for cfg in determinism_configs(seed):
        first = format_csv(run_experiment(cfg), cfg.master_seed)
        again = format_csv(run_experiment(cfg), cfg.master_seed)
        parallel = format_csv(run_experiment(replace(cfg, workers=workers)), cfg.master_seed)
        if not first == again == parallel:
            mismatched.append(cfg.experiment)
    n = len(determinism_configs(seed))
    detail = f"{n - len(mismatched)}/{n} experiments byte-identical across reruns and 1 vs {workers} workers"
    if mismatched:
        detail += "; differing: " + ", ".join(mismatched)
    return not mismatched, detail


CRITERIA = (
    (1, "FSPL reproduction", criterion_fspl),
    (2, "closed-form integral identity", criterion_integral_identity),
    (3, "0F1 exponential bound", criterion_exp_bound),
    (4, "capacity approximation chain", criterion_chain),
    (5, "noncentral Wishart sampling", criterion_wishart),
    (6, "MMSE optimality", criterion_mmse),
    (7, "rate ordering", criterion_rate_ordering),
    (8, "FSO Jensen validation", criterion_fso),
    (9, "pointing moments", criterion_pointing),
    (10, "constellation sanity", criterion_constellation),
    (11, "system orderings", criterion_system),
    (12, "determinism", criterion_determinism),
)


def run_criterion(number, workers=1):
    num, name, fn = CRITERIA[number - 1]
    kwargs = {}
    if num == 11:
        kwargs["workers"] = workers
    try:
        ok, detail = fn(**kwargs)
    except Exception as exc:  # a crash is a failure, reported like one
        ok, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CriterionResult(num, name, bool(ok), detail)


def run_all(workers=1, only=None, echo=None):
    results = []
    for num, _, _ in CRITERIA:
        if only and num not in only:
            continue
        res = run_criterion(num, workers)
        if echo:
            echo(res.line())
        results.append(res)
    return results
