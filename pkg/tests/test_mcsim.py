import math
from dataclasses import replace

import numpy as np
import pytest

from spacemimo.config import ExperimentConfig, TimeGrid
from spacemimo.linkbudget import IslParams
from spacemimo.mcsim import (
    ResultRow,
    run_ber_vs_m,
    run_experiment,
    run_fso_validation,
    run_gamma_sweep,
    run_mn_sweep,
    run_se_time,
    run_se_vs_m,
    serving_schedule,
)
from spacemimo.orbit import ConstellationConfig, ShellConfig
from spacemimo.output import format_csv


def series(rows, metric):
    return {r.sweep_value: (r.value, r.std_error) for r in rows if r.metric == metric}


def not_above(a, b, k=3.0):
    """a <= b within k combined standard errors."""
    return a[0] - b[0] <= k * math.hypot(a[1], b[1])


@pytest.fixture(scope="module")
def se_rows():
    return run_se_vs_m(ExperimentConfig("se_vs_m"))


@pytest.fixture(scope="module")
def mn_rows():
    return run_mn_sweep(ExperimentConfig("mn_sweep"))


@pytest.fixture(scope="module")
def ber_rows():
    return run_ber_vs_m(ExperimentConfig("ber_vs_m"))


def test_result_row_rejects_negative_error():
    with pytest.raises(ValueError):
        ResultRow("se_vs_m", "M", 1, "x", 1.0, -1.0, 1)


def test_runner_checks_experiment():
    with pytest.raises(ValueError):
        run_se_vs_m(ExperimentConfig("ber_vs_m"))


# --- SE over time ------------------------------------------------------------

def test_cluster_beats_single_satellite():
    cfg = ExperimentConfig("se_time", time=TimeGrid(0, 1200, 60), trials=100)
    summary = {r.metric: r.value for r in run_se_time(cfg) if r.sweep_key == "summary"}
    assert summary["se_cluster"] > summary["se_single_handover"]
    assert summary["outage_steps"] == 0


def test_single_satellite_cluster_is_the_baseline():
    cfg = ExperimentConfig("se_time", time=TimeGrid(0, 600, 60), trials=20, m_values=(1,))
    rows = run_se_time(cfg)
    a, b = series(rows, "se_cluster"), series(rows, "se_single_handover")
    assert a == b


def test_no_handover_baseline_keeps_its_satellite():
    cfg = ExperimentConfig("se_time", time=TimeGrid(0, 1200, 60), trials=5)
    schedule = serving_schedule(cfg)
    changes = sum(a != b for a, b in zip(schedule, schedule[1:]))
    assert changes < len(schedule) - 1
    assert all(s is not None for s in schedule)


def test_outage_reported():
    lonely = ConstellationConfig([ShellConfig(1, 1, 550e3, math.radians(53))])
    cfg = ExperimentConfig("se_time", constellation=lonely, time=TimeGrid(0, 300, 60), trials=5)
    rows = run_se_time(cfg)
    outages = [r for r in rows if r.metric == "outage"]
    assert len(outages) == 5 and all(r.value == 0 for r in outages)


# --- SE vs M ---------------------------------------------------------------------

def test_se_non_decreasing_in_m(se_rows):
    cfg = ExperimentConfig("se_vs_m")
    for metric in {r.metric for r in se_rows if r.metric.startswith("se_")}:
        s = series(se_rows, metric)
        for f in cfg.sweep_isl_frequencies:
            pts = [s[(m, f)] for m in cfg.sweep_m_values]
            assert all(not_above(a, b) for a, b in zip(pts, pts[1:])), metric


def test_higher_isl_frequency_lowers_se(se_rows):
    s = series(se_rows, "se_case1_perfect")
    for m in range(2, 21):
        assert s[(m, 1e12)][0] > s[(m, 5e12)][0]


def test_isl_noise_only_hurts(se_rows):
    for name in ("case1_perfect", "case1_imperfect", "case2_imperfect"):
        noisy, clean = series(se_rows, f"se_{name}"), series(se_rows, f"se_{name}_no_isl_noise")
        assert all(noisy[k][0] <= clean[k][0] + 1e-12 for k in noisy)


def test_case1_beats_case2(se_rows):
    fc, pc = series(se_rows, "se_case1_imperfect"), series(se_rows, "se_case2_imperfect")
    assert all(fc[k][0] >= pc[k][0] for k in fc if k[0] > 1)


def test_skipped_times_counted():
    cfg = ExperimentConfig("se_vs_m", time=TimeGrid(0, 300, 60), trials=10, m_values=(2, 40))
    rows = run_se_vs_m(cfg)
    skipped = series(rows, "skipped_times")
    assert skipped[2][0] == 0 and skipped[40][0] == 5
    assert math.isnan(series(rows, "se_case1_perfect")[(40, 1e12)][0])


# --- MN sweep ---------------------------------------------------------------------

def _sweep(rows, f):
    s = series(rows, "se_case1_perfect")
    return [s[(j, f)] for j in range(19)]


def test_low_frequency_sweep_is_flat(mn_rows):
    vals = [v for v, _ in _sweep(mn_rows, 1e12)]
    assert max(vals) - min(vals) < 0.05


def test_high_frequency_best_candidate_is_near(mn_rows):
    vals = [v for v, _ in _sweep(mn_rows, 30e12)]
    assert int(np.argmax(vals)) < 4


def test_selected_mn_close_to_sweep_maximum(mn_rows):
    for f in (1e12, 10e12, 30e12):
        best = max(_sweep(mn_rows, f))
        chosen = series(mn_rows, "se_selected_normalized")[f]
        assert chosen[0] >= best[0] - best[1]


# --- BER ------------------------------------------------------------------------

def test_ber_falls_with_m(ber_rows):
    for metric in {r.metric for r in ber_rows}:
        s = series(ber_rows, metric)
        pts = [s[m] for m in range(1, 21)]
        assert all(not_above(b, a) for a, b in zip(pts, pts[1:])), metric


def test_imperfect_csi_not_better(ber_rows):
    for case in ("case1", "case2"):
        for psk in ("bpsk", "qpsk", "8psk"):
            good, bad = series(ber_rows, f"ber_{case}_perfect_{psk}"), series(ber_rows, f"ber_{case}_imperfect_{psk}")
            assert all(not_above(good[m], bad[m]) for m in good)


def test_8psk_reliable_beyond_nine_satellites(ber_rows):
    for metric in ("ber_case1_perfect_8psk", "ber_case1_imperfect_8psk", "ber_case2_perfect_8psk",
                   "ber_case2_imperfect_8psk"):
        s = series(ber_rows, metric)
        assert all(s[m][0] < 1e-3 for m in range(10, 21)), metric


def test_ber_trial_count(ber_rows):
    assert all(r.trials >= 10_000 for r in ber_rows)


# --- FSO ---------------------------------------------------------------------------

def test_fso_validation_rows():
    rows = run_fso_validation(ExperimentConfig("fso_validation", trials=10_000))
    mc, ub = series(rows, "se_montecarlo"), series(rows, "se_upper_bound")
    keys = sorted(mc)
    assert all(mc[k][0] <= ub[k][0] for k in keys)
    assert all((ub[k][0] - mc[k][0]) / ub[k][0] <= 0.15 for k in keys if k[0] >= 5)
    assert all(mc[a][0] < mc[b][0] and ub[a][0] < ub[b][0] for a, b in zip(keys, keys[1:]))


def test_fso_validation_frequency_list():
    cfg = ExperimentConfig("fso_validation", trials=200, m_values=(3,), uplink_frequencies=(2e9, 4e9))
    rows = run_fso_validation(cfg)
    ub = series(rows, "se_upper_bound")
    assert set(ub) == {(3, 2e9), (3, 4e9)}
    assert ub[(3, 2e9)][0] > ub[(3, 4e9)][0]


@pytest.fixture(scope="module")
def gamma_rows():
    return run_gamma_sweep(ExperimentConfig("gamma_sweep", trials=4000, m_values=(1, 2, 5, 10, 20),
                                            gammas=(0.8, 1.1, 2.0, 5.0, 1e4)))


def test_larger_gamma_larger_se(gamma_rows):
    s = series(gamma_rows, "se_montecarlo")
    for m in (2, 5, 10, 20):
        vals = [s[(g, m)][0] for g in (0.8, 1.1, 2.0, 5.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def test_huge_gamma_matches_no_pointing_curve(gamma_rows):
    s, ref = series(gamma_rows, "se_montecarlo"), series(gamma_rows, "se_no_pointing")
    for m in (1, 2, 5, 10, 20):
        assert abs(s[(1e4, m)][0] - ref[m][0]) <= 3 * ref[m][1]


def test_single_satellite_ignores_isl():
    base = ExperimentConfig("gamma_sweep", trials=500, m_values=(1,), gammas=(1.1,))
    other = replace(base, fso_isl=IslParams.fso(tx_power=1e-3), fso_beta_isl=1e20)
    a = series(run_gamma_sweep(base), "se_montecarlo")
    b = series(run_gamma_sweep(other), "se_montecarlo")
    assert a == b


# --- determinism ---------------------------------------------------------------------

SMALL = [
    ExperimentConfig("se_vs_m", time=TimeGrid(0, 600, 120), trials=20, m_values=(1, 4)),
    ExperimentConfig("mn_sweep", time=TimeGrid(0, 600, 120), trials=20, cluster_size=6),
    ExperimentConfig("se_time", time=TimeGrid(0, 240, 60), trials=10, m_values=(5,)),
    ExperimentConfig("ber_vs_m", time=TimeGrid(0, 600, 120), trials=20, m_values=(2,), symbols_per_trial=8),
    ExperimentConfig("fso_validation", trials=300, m_values=(2, 3)),
    ExperimentConfig("gamma_sweep", trials=300, m_values=(1, 3), gammas=(1.1,)),
]


@pytest.mark.parametrize("cfg", SMALL, ids=lambda c: c.experiment)
def test_reruns_and_worker_counts_agree(cfg):
    a = format_csv(run_experiment(cfg), cfg.master_seed)
    b = format_csv(run_experiment(cfg), cfg.master_seed)
    c = format_csv(run_experiment(replace(cfg, workers=3)), cfg.master_seed)
    assert a == b == c


def test_seed_changes_results():
    cfg = SMALL[0]
    a = format_csv(run_experiment(cfg), 0)
    b = format_csv(run_experiment(cfg.with_seed(cfg.master_seed + 1)), 0)
    assert a != b
