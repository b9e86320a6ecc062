"""Scene geometry: circular orbit, obstacle blockage, RIS aperture radiation pattern.

Positions are numpy length-3 arrays in meters. The orbit lives in the y-z
plane through the user's zenith; Earth's center sits at [0, 0, -R_E]. The
satellite starts (t = 0) at the blockage-onset anomaly unless the config
pins ``initial_anomaly_rad`` explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

C_LIGHT = 2.99792458e8  # m/s
EARTH_RADIUS_KM = 6371.0


def vec3(x: float, y: float, z: float) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def is_unit(v, tol: float = 1e-12) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


@dataclass
class SceneConfig:
    """Physical constants, geometry anchors and RF bookkeeping for one scenario."""

    user_pos: np.ndarray = field(default_factory=lambda: vec3(0.0, 0.0, 0.0))
    obstacle_pos: np.ndarray = field(default_factory=lambda: vec3(0.0, -100.0, 250.0))
    ris_pos: np.ndarray = field(default_factory=lambda: vec3(0.0, 80.0, 65.5))
    carrier_freq_hz: float = 2.0e9
    orbit_radius_km: float = 7871.0
    kepler_mu_km3s2: float = 3.986004e5
    altitude_km: float = 550.0
    period_s: float = 100.0
    slot_s: float = 1.0
    radiation_exponent: float = 1.0
    obstacle_height_m: float = 250.0
    initial_anomaly_rad: float | None = None

    _theta0_cache: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.user_pos = np.asarray(self.user_pos, dtype=float)
        self.obstacle_pos = np.asarray(self.obstacle_pos, dtype=float)
        self.ris_pos = np.asarray(self.ris_pos, dtype=float)
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.orbit_radius_km <= EARTH_RADIUS_KM:
            raise ValueError("orbit radius must exceed Earth's radius")
        if self.slot_s <= 0 or self.period_s <= 0:
            raise ValueError("period and slot length must be positive")
        if self.radiation_exponent < 0:
            raise ValueError("radiation exponent must be nonnegative")

    @property
    def wavelength_m(self) -> float:
        return C_LIGHT / self.carrier_freq_hz

    @property
    def orbital_speed_km_s(self) -> float:
        return math.sqrt(self.kepler_mu_km3s2 / self.orbit_radius_km)

    @property
    def angular_rate_rad_s(self) -> float:
        return self.orbital_speed_km_s / self.orbit_radius_km

    @property
    def n_slots(self) -> int:
        n = self.period_s / self.slot_s
        if abs(n - round(n)) > 1e-9:
            raise ValueError("period must be an integer number of slots")
        return int(round(n))

    def theta0(self) -> float:
        if self.initial_anomaly_rad is not None:
            return self.initial_anomaly_rad
        if self._theta0_cache is None:
            self._theta0_cache = blockage_onset_anomaly(self)
        return self._theta0_cache


@dataclass
class SlotGeometry:
    """Per-slot satellite position, link distances and direction unit vectors."""

    sat_pos: np.ndarray
    d_sr: float
    d_ru: float
    l_sr: np.ndarray  # (p_sat - p_ris) / d_sr
    l_ru: np.ndarray  # (p_user - p_ris) / d_ru
    los_blocked: bool


def _sat_pos_at_anomaly(config: SceneConfig, theta: float) -> np.ndarray:
    r_m = config.orbit_radius_km * 1e3
    re_m = EARTH_RADIUS_KM * 1e3
    # anomaly measured from the user's zenith toward -y (the obstacle side)
    return vec3(0.0, -r_m * math.sin(theta), r_m * math.cos(theta) - re_m)


def propagate_orbit(config: SceneConfig, t: float) -> np.ndarray:
    """Satellite position (m) at time t on the circular orbit, anomaly theta0 + w*t."""
    theta = config.theta0() + config.angular_rate_rad_s * t
    return _sat_pos_at_anomaly(config, theta)


def is_blocked(sat_pos, user_pos, obstacle_pos, obstacle_height_m: float) -> bool:
    """True iff the user->satellite segment crosses the obstacle wall below its top.

    The obstacle is an infinite vertical wall in the x-z plane at
    y = obstacle_pos[1]. Crossing exactly at the top counts as unblocked.
    """
    sat_pos = np.asarray(sat_pos, dtype=float)
    user_pos = np.asarray(user_pos, dtype=float)
    wall_y = float(np.asarray(obstacle_pos, dtype=float)[1])
    du = user_pos[1] - wall_y
    ds = sat_pos[1] - wall_y
    if du * ds >= 0.0:
        return False  # both endpoints on one side (or touching): no crossing
    lam = du / (du - ds)
    z_cross = user_pos[2] + lam * (sat_pos[2] - user_pos[2])
    return bool(z_cross < obstacle_height_m)


def blockage_onset_anomaly(config: SceneConfig, tol: float = 1e-12) -> float:
    """Smallest anomaly at which the user's direct LoS becomes blocked (bisection)."""
    lo, hi = 1e-9, 1.2  # unblocked near zenith, blocked well past the wall shadow

    def blocked(theta: float) -> bool:
        return is_blocked(_sat_pos_at_anomaly(config, theta), config.user_pos,
                          config.obstacle_pos, config.obstacle_height_m)

    if blocked(lo) or not blocked(hi):
        raise ValueError("blockage onset bracket failed; check obstacle geometry")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if blocked(mid):
            hi = mid
        else:
            lo = mid
    return hi


def slot_geometry(config: SceneConfig, t: float) -> SlotGeometry:
    """Distances and unit vectors for the slot starting at time t."""
    sat = propagate_orbit(config, t)
    d_sr = float(np.linalg.norm(sat - config.ris_pos))
    d_ru = float(np.linalg.norm(config.user_pos - config.ris_pos))
    return SlotGeometry(
        sat_pos=sat,
        d_sr=d_sr,
        d_ru=d_ru,
        l_sr=(sat - config.ris_pos) / d_sr,
        l_ru=(config.user_pos - config.ris_pos) / d_ru,
        los_blocked=is_blocked(sat, config.user_pos, config.obstacle_pos,
                               config.obstacle_height_m),
    )


def radiation_pattern(r, l, beta: float) -> float:
    """Normalized aperture power pattern (r.l)^beta on the front side, 0 behind."""
    r = np.asarray(r, dtype=float)
    l = np.asarray(l, dtype=float)
    if abs(float(np.linalg.norm(r)) - 1.0) > 1e-6 or abs(float(np.linalg.norm(l)) - 1.0) > 1e-6:
        raise ValueError("radiation_pattern expects unit vectors")
    d = float(r @ l)
    if d < 0.0:
        return 0.0
    return min(d, 1.0) ** beta


def average_directions(geoms) -> tuple[np.ndarray, np.ndarray]:
    """Time-averaged l_sr and the (static) l_ru over a slot list."""
    lsr = unit(np.mean([g.l_sr for g in geoms], axis=0))
    return lsr, np.asarray(geoms[0].l_ru, dtype=float)


def bisector_direction(geoms) -> np.ndarray:
    """Unit bisector of the time-averaged satellite direction and the user direction."""
    lsr, lru = average_directions(geoms)
    return unit(lsr + lru)
