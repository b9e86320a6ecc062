"""Stochastic Sat-aRIS and aRIS-User channel generation with counter-based seeding.

Every random draw comes from a Philox generator keyed by
(seed, absolute slot index, stream id), so realizations are bit-identical
for a given seed no matter the call order, thread count, or how slots are
later grouped into holding intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SceneConfig, SlotGeometry

# stream ids for the per-slot Philox keys
STREAM_SAT_RIS = 1
STREAM_RIS_USER = 2
STREAM_INIT = 3
STREAM_GR = 4
STREAM_BASELINE = 5

_KEY_SALT = 0x5A5A_1EB5_0C0DE


@dataclass
class FadingParams:
    """Fading and array-size parameters of the two hops."""

    rician_kappa: float = 3.0
    rain_mu: float = -0.6
    rain_sigma2: float = 0.4
    sat_antennas: int = 4
    ris_rows: int = 6
    ris_cols: int = 6
    # scalar or per-element linear satellite beam gain; None means flat 1
    beam_gain: float | np.ndarray | None = None
    ris_user_literal_cru: bool = False   # use C_ru (not sqrt) as the amplitude

    def __post_init__(self) -> None:
        if self.rician_kappa < 0 or self.rain_sigma2 < 0:
            raise ValueError("kappa and rain variance must be nonnegative")
        if min(self.sat_antennas, self.ris_rows, self.ris_cols) < 1:
            raise ValueError("antenna/element counts must be at least 1")

    @property
    def n_elements(self) -> int:
        return self.ris_rows * self.ris_cols


@dataclass
class ChannelRealization:
    """One slot's channel pair: H_sr is (MN, L), H_ru is (MN,)."""

    H_sr: np.ndarray
    H_ru: np.ndarray
    slot_index: tuple[int, int]  # (b, k) under the active grouping


def slot_rng(seed: int, slot: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, slot, stream)."""
    if slot < 0 or stream < 0 or stream > 0xFF:
        raise ValueError("slot and stream must be small nonnegative integers")
    key = np.array([(seed ^ _KEY_SALT) & 0xFFFFFFFFFFFFFFFF,
                    (int(slot) << 8) | int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def path_loss(wavelength_m: float, distance_m: float) -> float:
    """Free-space power loss (lambda / 4 pi d)^2."""
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return (wavelength_m / (4.0 * math.pi * distance_m)) ** 2


def sample_rain_attenuation(params: FadingParams, rng: np.random.Generator) -> float:
    """Draw the linear rain attenuation factor xi >= 1.

    ln(xi_dB) is Normal(mu, sigma^2), so xi_dB = exp(g) > 0 and
    xi = 10^(xi_dB / 10) is always an attenuation.
    """
    g = params.rain_mu + math.sqrt(params.rain_sigma2) * float(rng.standard_normal())
    xi_db = math.exp(g)
    return 10.0 ** (xi_db / 10.0)


def gen_sat_ris_channel(geom: SlotGeometry, params: FadingParams,
                        config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """Sat-aRIS channel: sqrt(C_sr) xi^{-1/2} b^{1/2} elementwise phases.

    Draw order: one rain factor for the slot, then MN*L uniform phases.
    """
    mn, l = params.n_elements, params.sat_antennas
    c_sr = path_loss(config.wavelength_m, geom.d_sr)
    xi = sample_rain_attenuation(params, rng)
    psi = rng.uniform(0.0, 2.0 * math.pi, size=(mn, l))
    if params.beam_gain is None:
        b = np.ones((mn, l))
    elif np.isscalar(params.beam_gain):
        b = np.full((mn, l), float(params.beam_gain))
    else:
        b = np.broadcast_to(np.asarray(params.beam_gain, dtype=float).reshape(mn, 1), (mn, l))
    return math.sqrt(c_sr) * xi ** (-0.5) * np.sqrt(b) * np.exp(1j * psi)


def gen_ris_user_channel(geom: SlotGeometry, params: FadingParams,
                         config: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """aRIS-User Rician channel vector (MN,).

    LoS part is a constant zero-phase term, the scattered part has i.i.d.
    uniform phases and unit modulus. Amplitude uses sqrt(C_ru) unless the
    literal-C_ru switch is set.
    """
    mn = params.n_elements
    c_ru = path_loss(config.wavelength_m, geom.d_ru)
    amp = c_ru if params.ris_user_literal_cru else math.sqrt(c_ru)
    kap = params.rician_kappa
    psi = rng.uniform(0.0, 2.0 * math.pi, size=mn)
    los = math.sqrt(kap / (kap + 1.0)) * amp
    nlos = math.sqrt(1.0 / (kap + 1.0)) * amp * np.exp(1j * psi)
    return los + nlos


def realize_slot(config: SceneConfig, params: FadingParams, geom: SlotGeometry,
                 seed: int, slot: int, b: int, k: int) -> ChannelRealization:
    """Deterministic slot realization keyed by the absolute slot index."""
    h_sr = gen_sat_ris_channel(geom, params, config, slot_rng(seed, slot, STREAM_SAT_RIS))
    h_ru = gen_ris_user_channel(geom, params, config, slot_rng(seed, slot, STREAM_RIS_USER))
    return ChannelRealization(H_sr=h_sr, H_ru=h_ru, slot_index=(b, k))


def dump_channels(path, realizations) -> None:
    """Write slot realizations to a .npz archive.

    Layout: ``slots`` is an (n, 2) int array of (b, k); ``hsr_i`` / ``hru_i``
    hold the matrices of record i in the same order.
    """
    arrays = {"slots": np.array([r.slot_index for r in realizations], dtype=np.int64)}
    for i, r in enumerate(realizations):
        arrays[f"hsr_{i}"] = r.H_sr
        arrays[f"hru_{i}"] = r.H_ru
    np.savez(path, **arrays)


def load_channels(path) -> list[ChannelRealization]:
    data = np.load(path)
    slots = data["slots"]
    out = []
    for i, (b, k) in enumerate(slots):
        out.append(ChannelRealization(H_sr=data[f"hsr_{i}"], H_ru=data[f"hru_{i}"],
                                      slot_index=(int(b), int(k))))
    return out
