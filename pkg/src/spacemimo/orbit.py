"""Two-shell circular constellation propagation and user/ISL geometry.

Satellites move on circular Keplerian orbits about a spherical Earth. The
inertial positions are rotated into the Earth-fixed frame at the sidereal
rate so that a fixed ground user sees realistic pass durations.
"""

from dataclasses import dataclass, field
import math

import numpy as np

EARTH_RADIUS = 6_371_000.0
MU_EARTH = 3.986004418e14
EARTH_ROTATION_RATE = 7.2921159e-5  # rad/s


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ShellConfig:
    num_planes: int
    sats_per_plane: int
    altitude: float
    inclination: float
    raan_spread: float = 2 * math.pi
    true_anomaly_phasing: float = 0.0

    def __post_init__(self):
        if self.num_planes < 1 or self.sats_per_plane < 1:
            raise ConfigurationError("a shell needs at least one plane and one satellite per plane")
        if not self.altitude > 0:
            raise ConfigurationError("shell altitude must be positive")
        if not 0 < self.inclination < math.pi:
            raise ConfigurationError("inclination must lie in (0, pi)")

    @property
    def semi_major_axis(self):
        return EARTH_RADIUS + self.altitude

    @property
    def mean_motion(self):
        return math.sqrt(MU_EARTH / self.semi_major_axis**3)

    @property
    def period(self):
        return 2 * math.pi / self.mean_motion

    @property
    def size(self):
        return self.num_planes * self.sats_per_plane


def _default_shells():
    # RAAN spread is taken as a full 360 deg Walker-delta spread; phasing
    # 1.1364 deg = 5 * 360 / 1584.
    return [
        ShellConfig(22, 72, 540e3, math.radians(53.2), 2 * math.pi, math.radians(1.1364)),
        ShellConfig(22, 72, 550e3, math.radians(53.0), 2 * math.pi, math.radians(1.1364)),
    ]


@dataclass(frozen=True)
class ConstellationConfig:
    shells: list = field(default_factory=_default_shells)
    epoch: float = 0.0

    def __post_init__(self):
        if not self.shells:
            raise ConfigurationError("constellation needs at least one shell")
        for shell in self.shells:
            if not isinstance(shell, ShellConfig):
                raise ConfigurationError("shells must be ShellConfig instances")

    @property
    def size(self):
        return sum(s.size for s in self.shells)


@dataclass(frozen=True)
class SatelliteState:
    sat_id: int
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class StateArray:
    """Column form of a constellation snapshot; ``ids[i]`` owns row i."""

    ids: np.ndarray
    position: np.ndarray
    velocity: np.ndarray

    def __len__(self):
        return len(self.ids)

    def to_states(self):
        return [SatelliteState(int(i), p, v) for i, p, v in zip(self.ids, self.position, self.velocity)]

    @classmethod
    def from_states(cls, states):
        return cls(
            np.array([s.sat_id for s in states]),
            np.array([s.position for s in states], dtype=float).reshape(-1, 3),
            np.array([s.velocity for s in states], dtype=float).reshape(-1, 3),
        )

    def select(self, ids):
        lookup = {int(s): i for i, s in enumerate(self.ids)}
        try:
            rows = [lookup[int(s)] for s in ids]
        except KeyError as exc:
            raise KeyError(f"unknown satellite id {exc.args[0]}") from None
        return StateArray(self.ids[rows], self.position[rows], self.velocity[rows])


@dataclass(frozen=True)
class GeodeticPoint:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if abs(self.latitude) > math.pi / 2 or abs(self.longitude) > math.pi or self.altitude < 0:
            raise ConfigurationError("geodetic point out of range")

    def ecef(self):
        r = EARTH_RADIUS + self.altitude
        cl = math.cos(self.latitude)
        return r * np.array([cl * math.cos(self.longitude), cl * math.sin(self.longitude), math.sin(self.latitude)])

    def up(self):
        cl = math.cos(self.latitude)
        return np.array([cl * math.cos(self.longitude), cl * math.sin(self.longitude), math.sin(self.latitude)])


LAKE_DISTRICT = GeodeticPoint(math.radians(54.526), math.radians(-3.3))


@dataclass(frozen=True)
class VisibilitySet:
    time: float
    sat_ids: np.ndarray
    slant_range: np.ndarray
    elevation: np.ndarray

    @property
    def entries(self):
        return list(zip(self.sat_ids.tolist(), self.slant_range.tolist(), self.elevation.tolist()))

    def __len__(self):
        return len(self.sat_ids)


def propagate_arrays(config, t, frame="ecef"):
    """Positions and velocities of every satellite at time ``t`` seconds.

    Ids run shell by shell, plane by plane, slot by slot. ``frame`` is
    ``"ecef"`` (Earth-fixed, the default) or ``"eci"``.
    """
    if t < 0:
        raise ValueError("propagation time must be non-negative")
    tau = config.epoch + t
    pos, vel = [], []
    for shell in config.shells:
        a, n = shell.semi_major_axis, shell.mean_motion
        m = np.arange(shell.num_planes)[:, None]
        k = np.arange(shell.sats_per_plane)[None, :]
        raan = np.broadcast_to(m * (shell.raan_spread / shell.num_planes), (shell.num_planes, shell.sats_per_plane)).ravel()
        u = (k * (2 * np.pi / shell.sats_per_plane) + m * shell.true_anomaly_phasing + n * tau).ravel()
        ci, si = math.cos(shell.inclination), math.sin(shell.inclination)
        cO, sO, cu, su = np.cos(raan), np.sin(raan), np.cos(u), np.sin(u)
        pos.append(a * np.stack([cO * cu - sO * su * ci, sO * cu + cO * su * ci, su * si], axis=1))
        vel.append(a * n * np.stack([-cO * su - sO * cu * ci, -sO * su + cO * cu * ci, cu * si], axis=1))
    position = np.vstack(pos)
    velocity = np.vstack(vel)
    ids = np.arange(len(position))
    if frame == "eci":
        return StateArray(ids, position, velocity)
    if frame != "ecef":
        raise ValueError(f"unknown frame {frame!r}")
    theta = EARTH_ROTATION_RATE * tau
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    p_ecef = position @ rot.T
    omega = np.array([0.0, 0.0, EARTH_ROTATION_RATE])
    v_ecef = velocity @ rot.T - np.cross(omega, p_ecef)
    return StateArray(ids, p_ecef, v_ecef)


def propagate(config, t, frame="ecef"):
    return propagate_arrays(config, t, frame).to_states()


def _as_arrays(states):
    return states if isinstance(states, StateArray) else StateArray.from_states(states)


def visible_set(states, user, min_elev, time=0.0):
    """Satellites at or above ``min_elev`` as seen from ``user``, nearest first."""
    arr = _as_arrays(states)
    up = user.up()
    rel = arr.position - user.ecef()
    rng = np.linalg.norm(rel, axis=1)
    elev = np.arcsin(np.clip(rel @ up / rng, -1.0, 1.0))
    keep = np.flatnonzero(elev >= min_elev)
    order = keep[np.lexsort((arr.ids[keep], rng[keep]))]
    return VisibilitySet(time, arr.ids[order], rng[order], elev[order])


def isl_distances(states, ids):
    """Pairwise Euclidean distances between the listed satellites."""
    pos = _as_arrays(states).select(ids).position
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return d


def sample_user(center, radius, rng):
    """Uniform point in a disc of ``radius`` metres around ``center``."""
    r = radius * math.sqrt(rng.uniform())
    bearing = rng.uniform(0.0, 2 * math.pi)
    delta = r / (EARTH_RADIUS + center.altitude)
    lat1, lon1 = center.latitude, center.longitude
    lat2 = math.asin(math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(delta) * math.cos(bearing))
    lon2 = lon1 + math.atan2(
        math.sin(bearing) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * math.sin(lat2),
    )
    lon2 = (lon2 + math.pi) % (2 * math.pi) - math.pi
    return GeodeticPoint(lat2, lon2, center.altitude)
