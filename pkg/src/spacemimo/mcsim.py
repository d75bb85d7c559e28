"""Monte Carlo experiment engine.

Every experiment splits into independent tasks (one per time step or sweep
point). Each task seeds its own generator from ``(master_seed, experiment,
task key)``, so results do not depend on the worker count or on task order.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import math

import numpy as np

from .capacity import FsoBoundInputs, fso_capacity_montecarlo, fso_capacity_upper_bound
from .channel import sample_channel
from .detect import (
    PSK_ORDERS,
    case1_context,
    case2_context,
    case2_statistics,
    gray_bits,
    mmse_vector_case1,
    mmse_vector_case2,
    psk_constellation,
    psk_decide,
    rate_case1,
    rate_case2,
)
from .islmodel import IslGeometry, c_vector
from .linkbudget import fspl
from .mnselect import cluster_order, select_mn
from .orbit import propagate_arrays, sample_user, visible_set

_CODES = {name: i for i, name in enumerate(
    ("mn_sweep", "se_time", "se_vs_m", "ber_vs_m", "fso_validation", "gamma_sweep"), start=1)}
_GEOMETRY = 101
_STATISTICS = 102

CSI_VARIANT = {"perfect": "case1_perfect", "imperfect-case1": "case1_imperfect", "case2": "case2_imperfect"}
PSK_NAMES = {2: "bpsk", 4: "qpsk", 8: "8psk"}


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    sweep_key: str
    sweep_value: object
    metric: str
    value: float
    std_error: float
    trials: int

    def __post_init__(self):
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")


# --- seeding and geometry -----------------------------------------------------

def task_rng(cfg, *key):
    """Generator for one task; a pure function of the master seed and the key."""
    ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(_CODES[cfg.experiment],) + tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def _statistics_seed(cfg):
    return int(np.random.SeedSequence(cfg.master_seed, spawn_key=(_STATISTICS,)).generate_state(1)[0])


def user_at(cfg, step):
    """User position at a time step; fixed at the centre when the radius is zero."""
    if cfg.user_radius <= 0:
        return cfg.user
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed, spawn_key=(_GEOMETRY, int(step))))
    return sample_user(cfg.user, cfg.user_radius, rng)


@dataclass(frozen=True)
class Snapshot:
    time: float
    vis: object
    position: np.ndarray
    chan: object

    def __len__(self):
        return len(self.vis.sat_ids)


def visibility(cfg, step, t):
    states = propagate_arrays(cfg.constellation, t)
    vis = visible_set(states, user_at(cfg, step), cfg.min_elevation, t)
    return states, vis


def snapshot(cfg, step, t, rng, trials):
    """Geometry plus one channel draw per trial for every visible satellite."""
    states, vis = visibility(cfg, step, t)
    if len(vis.sat_ids) == 0:
        return Snapshot(t, vis, np.empty((0, 3)), None)
    pos = states.select(vis.sat_ids).position
    chan = sample_channel(vis, cfg.fading, cfg.uplink, rng, trials=trials)
    return Snapshot(t, vis, pos, chan)


def choose_cluster(cfg, snap, m, policy=None):
    """Row indices into the snapshot: the MN first, then its nearest neighbours."""
    policy = policy or cfg.mn_policy
    m = min(m, len(snap))
    if policy == "nearest":
        mn = 0
    else:
        cand = np.arange(m)
        d = np.linalg.norm(snap.position[cand, None] - snap.position[None, cand], axis=-1)
        gains = 1.0 / np.sqrt(snap.chan.beta_up[0, cand])
        mn = int(cand[select_mn(gains, d, policy, snap.vis.slant_range[cand])])
    full = np.linalg.norm(snap.position[:, None] - snap.position[None], axis=-1)
    return cluster_order(full, mn, m)


# --- per-cluster detectors -----------------------------------------------------

def _fading_at(cfg, snap, order):
    return [cfg.fading.for_elevation(e) for e in snap.vis.elevation[order]]


def _inverse_moments(cfg, configs, beta, perfect):
    out = np.empty(len(configs))
    for i, f in enumerate(configs):
        if perfect:
            f = replace(f, epsilon=0.0)
        out[i] = case2_statistics(f, cfg.case2_draws, _statistics_seed(cfg)).e_inv_hhat2 * beta[i]
    return out


def detectors(cfg, snap, order, isl, variants, isl_noise=True):
    """Combiners for each requested variant on one cluster.

    Returns ``{variant: (ctx, v)}`` plus the shared AF vectors.
    """
    order = list(order)
    chan = snap.chan
    h = chan.h[:, order]
    h_hat = chan.h_hat[:, order]
    err_var = chan.err_var[:, order]
    beta = chan.beta_up[0, order]
    d_to_mn = np.linalg.norm(snap.position[order] - snap.position[order[0]], axis=-1)
    geom = IslGeometry.from_distances(d_to_mn, isl, noise=isl_noise)
    c, c2 = c_vector(beta, geom, isl)
    p, s2 = cfg.uplink.p, cfg.uplink.noise_power
    noise = geom.isl_noise_var
    out = {}
    for name in variants:
        if name == "case1_perfect":
            ctx = case1_context(c, p, s2, noise, h, np.zeros_like(err_var))
            out[name] = (ctx, mmse_vector_case1(ctx).v)
        elif name == "case1_imperfect":
            ctx = case1_context(c, p, s2, noise, h_hat, err_var)
            out[name] = (ctx, mmse_vector_case1(ctx).v)
        elif name in ("case2_perfect", "case2_imperfect"):
            perfect = name == "case2_perfect"
            inv = _inverse_moments(cfg, _fading_at(cfg, snap, order), beta, perfect)
            ev = np.zeros_like(err_var) if perfect else err_var
            ctx = case2_context(c2, p, s2, noise, ev, inv, (h if perfect else h_hat)[:, 0])
            out[name] = (ctx, mmse_vector_case2(ctx).v)
        else:
            raise ValueError(f"unknown detector variant {name!r}")
    return out, (h, h_hat, c, c2, noise)


def cluster_rates(cfg, snap, order, isl, variants, isl_noise=True):
    """Instantaneous achievable rate per trial for each variant."""
    dets, (h, _, _, _, _) = detectors(cfg, snap, order, isl, variants, isl_noise)
    rates = {}
    for name, (ctx, v) in dets.items():
        report = rate_case1(ctx, v, h) if ctx.mode == "case1" else rate_case2(ctx, v)
        rates[name] = report.rate
    return rates


# --- task execution and aggregation ---------------------------------------------

def _run_tasks(cfg, fn, keys):
    args = [(cfg, k) for k in keys]
    if cfg.workers == 1 or len(args) < 2:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, args))


def _mean_se(samples):
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        return math.nan, 0.0, 0
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se, n


def _trials_per_step(cfg, steps):
    return max(1, math.ceil(cfg.trials / max(steps, 1)))


def _collect(parts):
    """Concatenate per-task sample dicts in task order."""
    merged = {}
    for part in parts:
        for key, arr in part.items():
            merged.setdefault(key, []).append(arr)
    return {k: np.concatenate(v) for k, v in merged.items()}


# --- spectral efficiency vs M ------------------------------------------------------

SE_VS_M_VARIANTS = ("case1_perfect", "case1_imperfect", "case2_imperfect")


def _se_vs_m_task(args):
    cfg, (step, t) = args
    times = cfg.time.times()
    n = _trials_per_step(cfg, len(times))
    snap = snapshot(cfg, step, t, task_rng(cfg, step), n)
    out = {}
    for m in cfg.sweep_m_values:
        if len(snap) < m:
            out[("skipped", m)] = np.ones(1)
            continue
        order = choose_cluster(cfg, snap, m)
        for fi, f in enumerate(cfg.sweep_isl_frequencies):
            isl = cfg.isl.at_frequency(f)
            for noisy in (True, False):
                for name, r in cluster_rates(cfg, snap, order, isl, SE_VS_M_VARIANTS, noisy).items():
                    metric = f"se_{name}" if noisy else f"se_{name}_no_isl_noise"
                    out[(metric, m, f)] = r
    return out


def run_se_vs_m(cfg):
    """Mean spectral efficiency per cluster size and ISL frequency."""
    _require(cfg, "se_vs_m")
    times = cfg.time.times()
    parts = _run_tasks(cfg, _se_vs_m_task, list(enumerate(times)))
    data = _collect(parts)
    rows = []
    for m in cfg.sweep_m_values:
        for f in cfg.sweep_isl_frequencies:
            for noisy in (True, False):
                for name in SE_VS_M_VARIANTS:
                    metric = f"se_{name}" if noisy else f"se_{name}_no_isl_noise"
                    mean, se, k = _mean_se(data.get((metric, m, f), []))
                    rows.append(ResultRow(cfg.experiment, "M|f_isl_hz", (m, f), metric, mean, se, k))
        skipped = data.get(("skipped", m))
        rows.append(ResultRow(cfg.experiment, "M", m, "skipped_times",
                              float(0 if skipped is None else skipped.size), 0.0, len(times)))
    return rows


# --- MN selection sweep ------------------------------------------------------------

def _mn_sweep_task(args):
    cfg, (step, t) = args
    n = _trials_per_step(cfg, len(cfg.time.times()))
    snap = snapshot(cfg, step, t, task_rng(cfg, step), n)
    size = cfg.cluster_size
    if len(snap) < size:
        return {("skipped",): np.ones(1)}
    variant = CSI_VARIANT[cfg.csi_mode]
    cand = np.arange(size)
    pos = snap.position[cand]
    d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
    gains = 1.0 / np.sqrt(snap.chan.beta_up[0, cand])
    winner = select_mn(gains, d, cfg.mn_mode, snap.vis.slant_range[cand])
    out = {("winner",): np.array([float(winner)])}
    for fi, f in enumerate(cfg.sweep_isl_frequencies):
        isl = cfg.isl.at_frequency(f)
        for j in range(size):
            order = cluster_order(d, j, size)
            r = cluster_rates(cfg, snap, order, isl, (variant,))[variant]
            out[("se", j, f)] = r
            if j == winner:
                out[("se_selected", f)] = r
    return out


def run_mn_sweep(cfg):
    """SE for every choice of MN inside a fixed cluster of the nearest satellites."""
    _require(cfg, "mn_sweep")
    times = cfg.time.times()
    data = _collect(_run_tasks(cfg, _mn_sweep_task, list(enumerate(times))))
    variant = CSI_VARIANT[cfg.csi_mode]
    rows = []
    for f in cfg.sweep_isl_frequencies:
        for j in range(cfg.cluster_size):
            mean, se, k = _mean_se(data.get(("se", j, f), []))
            rows.append(ResultRow(cfg.experiment, "mn_index|f_isl_hz", (j, f), f"se_{variant}", mean, se, k))
        mean, se, k = _mean_se(data.get(("se_selected", f), []))
        rows.append(ResultRow(cfg.experiment, "f_isl_hz", f, f"se_selected_{cfg.mn_mode}", mean, se, k))
    winners = data.get(("winner",), np.empty(0))
    mean, se, k = _mean_se(winners)
    rows.append(ResultRow(cfg.experiment, "summary", "horizon", "selected_mn_index", mean, se, k))
    skipped = data.get(("skipped",))
    rows.append(ResultRow(cfg.experiment, "summary", "horizon", "skipped_times",
                          float(0 if skipped is None else skipped.size), 0.0, len(times)))
    return rows


# --- SE over time -------------------------------------------------------------------

def serving_schedule(cfg):
    """Serving satellite per step without handover: keep it until it sets."""
    serving, out = None, []
    for step, t in enumerate(cfg.time.times()):
        _, vis = visibility(cfg, step, t)
        ids = [int(i) for i in vis.sat_ids]
        if serving not in ids:
            serving = ids[0] if ids else None
        out.append(serving)
    return out


def _se_time_task(args):
    cfg, (step, t, serving) = args
    snap = snapshot(cfg, step, t, task_rng(cfg, step), cfg.trials)
    if len(snap) == 0:
        return {"outage": 0.0}
    variant = CSI_VARIANT[cfg.csi_mode]
    m = cfg.sweep_m_values[0]
    order = choose_cluster(cfg, snap, m)
    isl = cfg.isl
    res = {
        "visible_count": float(len(snap)),
        "cluster_size": float(len(order)),
        "se_cluster": cluster_rates(cfg, snap, order, isl, (variant,))[variant],
        "se_single_handover": cluster_rates(cfg, snap, [0], isl, (variant,))[variant],
    }
    row = int(np.flatnonzero(snap.vis.sat_ids == serving)[0])
    res["se_single_no_handover"] = cluster_rates(cfg, snap, [row], isl, (variant,))[variant]
    return res


def run_se_time(cfg):
    """Cluster SE against single-satellite baselines at each time step."""
    _require(cfg, "se_time")
    times = cfg.time.times()
    schedule = serving_schedule(cfg)
    parts = _run_tasks(cfg, _se_time_task, [(i, t, s) for i, (t, s) in enumerate(zip(times, schedule))])
    rows = []
    series = {"se_cluster": [], "se_single_handover": [], "se_single_no_handover": []}
    outages = 0
    for t, part in zip(times, parts):
        if "outage" in part:
            outages += 1
            rows.append(ResultRow(cfg.experiment, "time_s", t, "outage", 0.0, 0.0, 0))
            continue
        for key in ("visible_count", "cluster_size"):
            rows.append(ResultRow(cfg.experiment, "time_s", t, key, part[key], 0.0, 1))
        for key in series:
            mean, se, k = _mean_se(part[key])
            series[key].append(part[key])
            rows.append(ResultRow(cfg.experiment, "time_s", t, key, mean, se, k))
    for key, chunks in series.items():
        mean, se, k = _mean_se(np.concatenate(chunks) if chunks else [])
        rows.append(ResultRow(cfg.experiment, "summary", "horizon", key, mean, se, k))
    rows.append(ResultRow(cfg.experiment, "summary", "horizon", "outage_steps", float(outages), 0.0, len(times)))
    return rows


# --- BER vs M -----------------------------------------------------------------------

BER_VARIANTS = ("case1_perfect", "case1_imperfect", "case2_perfect", "case2_imperfect")


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _ber_task(args):
    cfg, (step, t) = args
    n = _trials_per_step(cfg, len(cfg.time.times()))
    rng = task_rng(cfg, step)
    snap = snapshot(cfg, step, t, rng, n)
    s_count = cfg.symbols_per_trial
    p, sigma = cfg.uplink.p, math.sqrt(cfg.uplink.noise_power)
    out = {}
    for m in cfg.sweep_m_values:
        if len(snap) < m:
            continue
        order = choose_cluster(cfg, snap, m)
        dets, (h, h_hat, c, c2, noise) = detectors(cfg, snap, order, cfg.isl, BER_VARIANTS)
        u = rng.random((n, s_count))
        n_up = _cn(rng, (n, s_count, m)) * sigma
        n_isl = _cn(rng, (n, s_count, m)) * np.sqrt(noise)
        for order_psk in PSK_ORDERS:
            idx = np.floor(u * order_psk).astype(int)
            s = psk_constellation(order_psk)[idx]
            tx_bits = gray_bits(idx, order_psk)
            for name, (ctx, v) in dets.items():
                est = h if name.endswith("perfect") else h_hat
                up = math.sqrt(p) * h[:, None, :] * s[..., None] + n_up
                if ctx.mode == "case1":
                    y = c * up + n_isl
                    gain = math.sqrt(p) * np.sum(v * c * est, axis=-1)
                else:
                    y = c2 * up / est[:, None, :] + n_isl
                    gain = math.sqrt(p) * np.sum(v * c2, axis=-1)
                s_hat = np.sum(v[:, None, :] * y, axis=-1)
                _, rx_bits = psk_decide(s_hat, order_psk, gain[:, None])
                errors = np.sum(rx_bits != tx_bits, axis=(-1, -2))
                out[(name, order_psk, m)] = errors / (s_count * tx_bits.shape[-1])
    return out


def run_ber_vs_m(cfg):
    """Bit error rate for BPSK, QPSK and 8PSK under each detector variant."""
    _require(cfg, "ber_vs_m")
    times = cfg.time.times()
    data = _collect(_run_tasks(cfg, _ber_task, list(enumerate(times))))
    rows = []
    for m in cfg.sweep_m_values:
        for order_psk in PSK_ORDERS:
            for name in BER_VARIANTS:
                mean, se, k = _mean_se(data.get((name, order_psk, m), []))
                rows.append(ResultRow(cfg.experiment, "M", m, f"ber_{name}_{PSK_NAMES[order_psk]}",
                                      mean, se, k * cfg.symbols_per_trial))
    return rows


# --- FSO ----------------------------------------------------------------------------

def _fso_inputs(cfg, m, f_up=None, gamma=None):
    uplink, beta_up = cfg.uplink, cfg.fso_beta_up
    if f_up is not None:
        uplink = replace(uplink, frequency=f_up)
        beta_up = float(fspl(cfg.fso_distance_up, f_up))
    return FsoBoundInputs.validation_setup(m, gamma=cfg.fso.gamma if gamma is None else gamma,
                                           beta_up=beta_up, beta_isl=cfg.fso_beta_isl,
                                           uplink=uplink, isl=cfg.fso_isl)


def _fso_task(args):
    cfg, (fi, m) = args
    f_up = cfg.uplink_frequencies[fi] if cfg.uplink_frequencies else None
    inputs = _fso_inputs(cfg, m, f_up)
    mc, se = fso_capacity_montecarlo(inputs, trials=cfg.trials, rng_seed=task_rng(cfg, fi, m))
    return mc, se, fso_capacity_upper_bound(inputs)


def run_fso_validation(cfg):
    """Monte Carlo FSO capacity next to its closed-form upper bound."""
    _require(cfg, "fso_validation")
    freqs = cfg.uplink_frequencies or (cfg.uplink.frequency,)
    keys = [(fi, m) for fi in range(len(freqs)) for m in cfg.sweep_m_values]
    rows = []
    for (fi, m), (mc, se, bound) in zip(keys, _run_tasks(cfg, _fso_task, keys)):
        sv = (m, freqs[fi])
        rows.append(ResultRow(cfg.experiment, "M|f_up_hz", sv, "se_montecarlo", mc, se, cfg.trials))
        rows.append(ResultRow(cfg.experiment, "M|f_up_hz", sv, "se_upper_bound", bound, 0.0, 0))
        rows.append(ResultRow(cfg.experiment, "M|f_up_hz", sv, "relative_gap", (bound - mc) / bound,
                              se / bound, cfg.trials))
    return rows


def _unit_pointing(rng, trials, m):
    return np.ones((trials, m))


def _gamma_task(args):
    cfg, (gi, m) = args
    # one stream per M shared by every gamma (common random numbers)
    rng = task_rng(cfg, m)
    inputs = _fso_inputs(cfg, m, gamma=cfg.gammas[gi] if gi >= 0 else None)
    # M = 1 is the MN alone; larger clusters are optically summed relays
    mn_only = m == 1
    pointing = _unit_pointing if gi < 0 else None
    return fso_capacity_montecarlo(inputs, pointing_sampler=pointing, trials=cfg.trials, rng_seed=rng,
                                   mn_branch=mn_only)


def run_gamma_sweep(cfg):
    """FSO SE against M for each pointing-jitter ratio, plus a no-pointing-loss curve.

    Clusters of two or more satellites use the equal-distance relay model of
    the FSO validation; a single satellite is the MN alone.
    """
    _require(cfg, "gamma_sweep")
    keys = [(gi, m) for gi in range(-1, len(cfg.gammas)) for m in cfg.sweep_m_values]
    rows = []
    for (gi, m), (mean, se) in zip(keys, _run_tasks(cfg, _gamma_task, keys)):
        if gi < 0:
            rows.append(ResultRow(cfg.experiment, "M", m, "se_no_pointing", mean, se, cfg.trials))
        else:
            rows.append(ResultRow(cfg.experiment, "gamma|M", (cfg.gammas[gi], m), "se_montecarlo",
                                  mean, se, cfg.trials))
    return rows


# --- dispatch -----------------------------------------------------------------------

RUNNERS = {
    "mn_sweep": run_mn_sweep,
    "se_time": run_se_time,
    "se_vs_m": run_se_vs_m,
    "ber_vs_m": run_ber_vs_m,
    "fso_validation": run_fso_validation,
    "gamma_sweep": run_gamma_sweep,
}


def _require(cfg, name):
    if cfg.experiment != name:
        raise ValueError(f"config is for {cfg.experiment!r}, not {name!r}")


def run_experiment(cfg):
    return RUNNERS[cfg.experiment](cfg)
