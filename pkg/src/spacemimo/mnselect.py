"""Master-node selection: channel gain against mean ISL distance."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MnScore:
    sat_id: int
    channel_gain_db: float
    mean_isl_distance: float
    score: float


def mean_isl_distance(distances, m):
    d = np.asarray(distances, dtype=float)
    n = d.shape[0]
    if n == 1:
        return 0.0
    return float((d[m].sum() - d[m, m]) / (n - 1))


def _minmax(x):
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def mn_scores(gains, distances, mode="normalized", sat_ids=None):
    """Score every candidate; ``gains`` are |h_m| (or a proxy), linear."""
    gains = np.asarray(gains, dtype=float)
    d = np.asarray(distances, dtype=float)
    n = gains.shape[0]
    if n == 0:
        raise ValueError("no candidates to select from")
    if d.shape != (n, n):
        raise ValueError("distance matrix does not match the number of gains")
    mean_d = np.array([mean_isl_distance(d, m) for m in range(n)])
    gain_db = 20.0 * np.log10(gains)
    if mode == "paper-literal":
        score = np.abs(gains - mean_d)
    elif mode == "normalized":
        score = _minmax(gain_db) - _minmax(mean_d / 1e3)
    else:
        raise ValueError(f"unknown selection mode {mode!r}")
    ids = range(n) if sat_ids is None else sat_ids
    return [MnScore(int(i), float(g), float(md), float(s)) for i, g, md, s in zip(ids, gain_db, mean_d, score)]


def select_mn(gains, distances, mode="normalized", slant_range=None):
    """Index of the MN among the candidates.

    Ties go to the smallest user slant range, then the smallest index.
    """
    scores = np.array([s.score for s in mn_scores(gains, distances, mode)])
    n = len(scores)
    rng = np.zeros(n) if slant_range is None else np.asarray(slant_range, dtype=float)
    # lexsort: last key is primary
    order = np.lexsort((np.arange(n), rng, -scores))
    return int(order[0])


def cluster_order(distances, mn, size):
    """The MN followed by its ``size - 1`` nearest neighbours, nearest first."""
    d = np.asarray(distances, dtype=float)[mn]
    others = [i for i in np.lexsort((np.arange(len(d)), d)) if i != mn]
    return [mn] + others[: size - 1]
