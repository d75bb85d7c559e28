"""Experiment configuration: dataclass model plus a YAML/JSON loader.

Angles are written in degrees in files (``*_deg`` keys) and held in radians
in memory. Omitted fields take the reference defaults.
"""

from dataclasses import dataclass, field, replace
import json
import math
import os
import re

import yaml

from .channel import FadingConfig, FadingTable
from .islmodel import FsoParams
from .linkbudget import SPEED_OF_LIGHT, IslParams, UplinkParams, db_to_linear
from .orbit import LAKE_DISTRICT, ConstellationConfig, GeodeticPoint, ShellConfig

EXPERIMENTS = ("mn_sweep", "se_time", "se_vs_m", "ber_vs_m", "fso_validation", "gamma_sweep")
CSI_MODES = ("perfect", "imperfect-case1", "case2")
SEED_ENV = "SPACE_MIMO_SEED"


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats such as 2e9 (YAML 1.2 style)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def load_yaml(text):
    return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class TimeGrid:
    start: float = 0.0
    stop: float = 6000.0
    step: float = 60.0

    def times(self):
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return [self.start + i * self.step for i in range(n)]


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    user: GeodeticPoint = LAKE_DISTRICT
    user_radius: float = 40e3
    uplink: UplinkParams = field(default_factory=UplinkParams)
    isl: IslParams = field(default_factory=IslParams)
    fso_isl: IslParams = field(default_factory=IslParams.fso)
    fading: FadingTable = field(default_factory=FadingTable)
    fso: FsoParams = field(default_factory=FsoParams)
    csi_mode: str = "perfect"
    m_values: tuple = ()
    isl_frequencies: tuple = ()
    uplink_frequencies: tuple = ()
    gammas: tuple = (0.8, 1.1, 2.0, 5.0)
    time: TimeGrid = field(default_factory=TimeGrid)
    trials: int = 500
    master_seed: int = 20240601
    min_elevation: float = math.radians(30.0)
    mn_policy: str = "nearest"
    mn_mode: str = "normalized"
    cluster_size: int = 19
    symbols_per_trial: int = 40
    case2_draws: int = 100_000
    fso_beta_up: float = 2.12e15
    fso_beta_isl: float = 5.29e25
    fso_distance_up: float = 550e3
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        if self.trials < 1:
            raise ConfigError("trials", "must be at least 1")
        if self.time.step <= 0:
            raise ConfigError("time.step", "must be positive")
        if self.csi_mode not in CSI_MODES:
            raise ConfigError("csi_mode", f"must be one of {', '.join(CSI_MODES)}")
        if self.mn_policy not in ("nearest", "normalized", "paper-literal"):
            raise ConfigError("mn_policy", "must be nearest, normalized or paper-literal")
        if self.mn_mode not in ("normalized", "paper-literal"):
            raise ConfigError("mn_mode", "must be normalized or paper-literal")
        if self.sweep_m_values and min(self.sweep_m_values) < 1:
            raise ConfigError("m_values", "entries must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")

    @property
    def sweep_m_values(self):
        if self.m_values:
            return tuple(self.m_values)
        return {
            "se_time": (19,),
            "fso_validation": tuple(range(2, 21)),
        }.get(self.experiment, tuple(range(1, 21)))

    @property
    def sweep_isl_frequencies(self):
        if self.isl_frequencies:
            return tuple(self.isl_frequencies)
        return {
            "mn_sweep": (1e12, 10e12, 30e12),
            "se_vs_m": (1e12, 5e12),
        }.get(self.experiment, (self.isl.frequency,))

    def with_seed(self, seed):
        return replace(self, master_seed=int(seed))


# --- loader -----------------------------------------------------------------

def _num(value, path, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0:
        raise ConfigError(path, "must be positive")
    if nonneg and value < 0:
        raise ConfigError(path, "must be non-negative")
    return value


def _int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be at least {minimum}")
    return value


def _mapping(value, path, allowed):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(path, "expected a mapping")
    for key in value:
        if key not in allowed:
            where = f"{path}.{key}" if path else str(key)
            raise ConfigError(where, "unknown field")
    return value


def _numlist(value, path, positive=False):
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list")
    return tuple(_num(v, f"{path}[{i}]", positive=positive) for i, v in enumerate(value))


def _shell(data, path):
    keys = ("num_planes", "sats_per_plane", "altitude_m", "inclination_deg", "raan_spread_deg", "phasing_deg")
    d = _mapping(data, path, keys)
    for k in keys[:4]:
        if k not in d:
            raise ConfigError(f"{path}.{k}", "required")
    try:
        return ShellConfig(
            _int(d["num_planes"], f"{path}.num_planes", 1),
            _int(d["sats_per_plane"], f"{path}.sats_per_plane", 1),
            _num(d["altitude_m"], f"{path}.altitude_m", positive=True),
            math.radians(_num(d["inclination_deg"], f"{path}.inclination_deg")),
            math.radians(_num(d.get("raan_spread_deg", 360.0), f"{path}.raan_spread_deg")),
            math.radians(_num(d.get("phasing_deg", 0.0), f"{path}.phasing_deg")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(path, str(exc)) from None


def _constellation(data, path):
    d = _mapping(data, path, ("shells", "epoch_s"))
    kwargs = {}
    if "shells" in d:
        if not isinstance(d["shells"], list) or not d["shells"]:
            raise ConfigError(f"{path}.shells", "expected a non-empty list")
        kwargs["shells"] = [_shell(s, f"{path}.shells[{i}]") for i, s in enumerate(d["shells"])]
    if "epoch_s" in d:
        kwargs["epoch"] = _num(d["epoch_s"], f"{path}.epoch_s", nonneg=True)
    return ConstellationConfig(**kwargs)


def _terminal(data, path, cls, base):
    keys = ("tx_power_dbw", "tx_gain_dbi", "rx_gain_dbi", "frequency_hz", "bandwidth_hz", "noise_temperature_k")
    d = _mapping(data, path, keys)
    kw = {}
    for key, name in (("tx_power_dbw", "tx_power"), ("tx_gain_dbi", "tx_gain"), ("rx_gain_dbi", "rx_gain")):
        if key in d:
            kw[name] = db_to_linear(_num(d[key], f"{path}.{key}"))
    if "frequency_hz" in d:
        kw["frequency"] = _num(d["frequency_hz"], f"{path}.frequency_hz", positive=True)
    if "bandwidth_hz" in d and d["bandwidth_hz"] is not None:
        kw["bandwidth"] = _num(d["bandwidth_hz"], f"{path}.bandwidth_hz", positive=True)
    if "noise_temperature_k" in d:
        kw["noise_temperature"] = _num(d["noise_temperature_k"], f"{path}.noise_temperature_k", positive=True)
    return replace(base, **kw)


_FADING_KEYS = ("sigma_sf_los_db", "sigma_sf_nlos_db", "k_mean_db", "k_std_db", "epsilon", "los_phase")


def _fading_config(d, path, base=None):
    base = base or FadingConfig()
    kw = {}
    for key, name in (("sigma_sf_los_db", "sigma_sf_los"), ("sigma_sf_nlos_db", "sigma_sf_nlos"),
                      ("k_mean_db", "k_mean"), ("k_std_db", "k_std"), ("epsilon", "epsilon")):
        if key in d:
            kw[name] = _num(d[key], f"{path}.{key}", nonneg=name != "k_mean")
    if "los_phase" in d:
        if d["los_phase"] not in ("geometric", "zero"):
            raise ConfigError(f"{path}.los_phase", "must be 'geometric' or 'zero'")
        kw["los_phase"] = d["los_phase"]
    return replace(base, **kw)


def _fading(data, path):
    d = _mapping(data, path, _FADING_KEYS + ("bins", "table_file"))
    base = _fading_config(d, path)
    if "table_file" in d:
        try:
            return FadingTable.load(d["table_file"])
        except OSError as exc:
            raise ConfigError(f"{path}.table_file", str(exc)) from None
    if "bins" not in d:
        return FadingTable(((0.0, base),))
    if not isinstance(d["bins"], list) or not d["bins"]:
        raise ConfigError(f"{path}.bins", "expected a non-empty list")
    bins = []
    for i, b in enumerate(d["bins"]):
        bp = f"{path}.bins[{i}]"
        bd = _mapping(b, bp, _FADING_KEYS + ("min_elevation_deg",))
        edge = math.radians(_num(bd.get("min_elevation_deg", 0.0), f"{bp}.min_elevation_deg"))
        bins.append((edge, _fading_config(bd, bp, base)))
    bins.sort(key=lambda e: e[0])
    return FadingTable(tuple(bins))


def fading_from_mapping(data, path="fading"):
    return _fading(data, path)


def _fso(data, path):
    d = _mapping(data, path, ("omega0_m", "gamma", "cn2", "wavelength_m", "frequency_hz"))
    kw = {}
    if "omega0_m" in d:
        kw["omega0"] = _num(d["omega0_m"], f"{path}.omega0_m", positive=True)
    if "gamma" in d:
        kw["gamma"] = _num(d["gamma"], f"{path}.gamma", positive=True)
    if "cn2" in d:
        kw["cn2"] = _num(d["cn2"], f"{path}.cn2", nonneg=True)
    if "wavelength_m" in d:
        kw["wavelength"] = _num(d["wavelength_m"], f"{path}.wavelength_m", positive=True)
    elif "frequency_hz" in d:
        kw["wavelength"] = SPEED_OF_LIGHT / _num(d["frequency_hz"], f"{path}.frequency_hz", positive=True)
    return FsoParams(**kw)


_TOP = (
    "experiment", "constellation", "user", "uplink", "isl", "fso_isl", "fading", "fso", "csi_mode",
    "m_values", "isl_frequencies_hz", "uplink_frequencies_hz", "gammas", "time", "trials", "master_seed",
    "min_elevation_deg", "mn_policy", "mn_mode", "cluster_size", "symbols_per_trial", "case2_draws",
    "fso_beta_up", "fso_beta_isl", "fso_distance_up_m", "workers",
)


def config_from_mapping(data):
    """Build an ExperimentConfig from plain data, reporting the failing field path."""
    d = _mapping(data, "", _TOP)
    if "experiment" not in d:
        raise ConfigError("experiment", "required")
    if d["experiment"] not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    kw = {"experiment": d["experiment"]}
    if "constellation" in d:
        kw["constellation"] = _constellation(d["constellation"], "constellation")
    if "user" in d:
        u = _mapping(d["user"], "user", ("latitude_deg", "longitude_deg", "altitude_m", "radius_m"))
        try:
            kw["user"] = GeodeticPoint(
                math.radians(_num(u.get("latitude_deg", 54.526), "user.latitude_deg")),
                math.radians(_num(u.get("longitude_deg", -3.3), "user.longitude_deg")),
                _num(u.get("altitude_m", 0.0), "user.altitude_m", nonneg=True),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("user", str(exc)) from None
        if "radius_m" in u:
            kw["user_radius"] = _num(u["radius_m"], "user.radius_m", nonneg=True)
    if "uplink" in d:
        kw["uplink"] = _terminal(d["uplink"], "uplink", UplinkParams, UplinkParams())
    if "isl" in d:
        kw["isl"] = _terminal(d["isl"], "isl", IslParams, IslParams())
    if "fso_isl" in d:
        kw["fso_isl"] = _terminal(d["fso_isl"], "fso_isl", IslParams, IslParams.fso())
    if "fading" in d:
        kw["fading"] = _fading(d["fading"], "fading")
    if "fso" in d:
        kw["fso"] = _fso(d["fso"], "fso")
    if "time" in d:
        t = _mapping(d["time"], "time", ("start_s", "stop_s", "step_s"))
        kw["time"] = TimeGrid(
            _num(t.get("start_s", 0.0), "time.start_s", nonneg=True),
            _num(t.get("stop_s", 6000.0), "time.stop_s", nonneg=True),
            _num(t.get("step_s", 10.0 if d["experiment"] == "se_time" else 60.0), "time.step_s", positive=True),
        )
    elif d["experiment"] == "se_time":
        kw["time"] = TimeGrid(step=10.0)
    if "m_values" in d:
        if not isinstance(d["m_values"], list) or not d["m_values"]:
            raise ConfigError("m_values", "expected a non-empty list")
        kw["m_values"] = tuple(_int(v, f"m_values[{i}]", 1) for i, v in enumerate(d["m_values"]))
    if "isl_frequencies_hz" in d:
        kw["isl_frequencies"] = _numlist(d["isl_frequencies_hz"], "isl_frequencies_hz", positive=True)
    if "uplink_frequencies_hz" in d:
        kw["uplink_frequencies"] = _numlist(d["uplink_frequencies_hz"], "uplink_frequencies_hz", positive=True)
    if "gammas" in d:
        kw["gammas"] = _numlist(d["gammas"], "gammas", positive=True)
    for key in ("trials", "cluster_size", "symbols_per_trial", "case2_draws", "workers"):
        if key in d:
            kw[key] = _int(d[key], key, 1)
    if "master_seed" in d:
        kw["master_seed"] = _int(d["master_seed"], "master_seed", 0)
    if "min_elevation_deg" in d:
        kw["min_elevation"] = math.radians(_num(d["min_elevation_deg"], "min_elevation_deg"))
    for key in ("csi_mode", "mn_policy", "mn_mode"):
        if key in d:
            if not isinstance(d[key], str):
                raise ConfigError(key, "expected a string")
            kw[key] = d[key]
    for key, name in (("fso_beta_up", "fso_beta_up"), ("fso_beta_isl", "fso_beta_isl"),
                      ("fso_distance_up_m", "fso_distance_up")):
        if key in d:
            kw[name] = _num(d[key], key, positive=True)
    return ExperimentConfig(**kw)


def parse_config(path):
    """Load a YAML (or JSON) experiment file. SPACE_MIMO_SEED overrides the seed."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text) if str(path).endswith(".json") else load_yaml(text)
    except (yaml.YAMLError, json.JSONDecodeError) as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    cfg = config_from_mapping(data)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            cfg = cfg.with_seed(int(env))
        except ValueError:
            raise ConfigError(SEED_ENV, "must be an integer") from None
    return cfg


def config_to_mapping(cfg):
    """Plain-data view of a config, in file units (degrees, dB)."""
    from .linkbudget import linear_to_db

    def terminal(t):
        return {
            "tx_power_dbw": round(linear_to_db(t.tx_power), 9),
            "tx_gain_dbi": round(linear_to_db(t.tx_gain), 9),
            "rx_gain_dbi": round(linear_to_db(t.rx_gain), 9),
            "frequency_hz": t.frequency,
            "bandwidth_hz": t.bandwidth,
            "noise_temperature_k": t.noise_temperature,
        }

    def fading_entry(edge, f):
        return {
            "min_elevation_deg": math.degrees(edge),
            "sigma_sf_los_db": f.sigma_sf_los, "sigma_sf_nlos_db": f.sigma_sf_nlos,
            "k_mean_db": f.k_mean, "k_std_db": f.k_std, "epsilon": f.epsilon, "los_phase": f.los_phase,
        }

    return {
        "experiment": cfg.experiment,
        "constellation": {
            "epoch_s": cfg.constellation.epoch,
            "shells": [
                {"num_planes": s.num_planes, "sats_per_plane": s.sats_per_plane, "altitude_m": s.altitude,
                 "inclination_deg": math.degrees(s.inclination), "raan_spread_deg": math.degrees(s.raan_spread),
                 "phasing_deg": math.degrees(s.true_anomaly_phasing)}
                for s in cfg.constellation.shells
            ],
        },
        "user": {"latitude_deg": math.degrees(cfg.user.latitude), "longitude_deg": math.degrees(cfg.user.longitude),
                 "altitude_m": cfg.user.altitude, "radius_m": cfg.user_radius},
        "uplink": terminal(cfg.uplink),
        "isl": terminal(cfg.isl),
        "fso_isl": terminal(cfg.fso_isl),
        "fading": {"bins": [fading_entry(e, f) for e, f in cfg.fading.bins]},
        "fso": {"omega0_m": cfg.fso.omega0, "gamma": cfg.fso.gamma, "cn2": cfg.fso.cn2,
                "wavelength_m": cfg.fso.wavelength},
        "csi_mode": cfg.csi_mode,
        "m_values": list(cfg.sweep_m_values),
        "isl_frequencies_hz": list(cfg.sweep_isl_frequencies),
        "uplink_frequencies_hz": list(cfg.uplink_frequencies),
        "gammas": list(cfg.gammas),
        "time": {"start_s": cfg.time.start, "stop_s": cfg.time.stop, "step_s": cfg.time.step},
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
        "min_elevation_deg": math.degrees(cfg.min_elevation),
        "mn_policy": cfg.mn_policy,
        "mn_mode": cfg.mn_mode,
        "cluster_size": cfg.cluster_size,
        "symbols_per_trial": cfg.symbols_per_trial,
        "case2_draws": cfg.case2_draws,
        "fso_beta_up": cfg.fso_beta_up,
        "fso_beta_isl": cfg.fso_beta_isl,
        "fso_distance_up_m": cfg.fso_distance_up,
        "workers": cfg.workers,
    }
