"""Per-period scenario assembly: slot geometries plus channel realizations.

A Scenario owns one communication period worth of per-slot data in absolute
slot order. Grouping into (B, K) holding intervals happens at evaluation
time, so the same channel process backs every candidate holding interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelRealization, FadingParams, realize_slot
from .geometry import SceneConfig, SlotGeometry, slot_geometry, bisector_direction
from .link import LinkConstants, RisState, SolutionBundle, snr, total_energy


@dataclass
class Scenario:
    scene: SceneConfig
    fading: FadingParams
    geoms: list[SlotGeometry]
    chans: list[ChannelRealization]
    seed: int

    @property
    def n_slots(self) -> int:
        return len(self.geoms)

    @property
    def mn(self) -> int:
        return self.fading.n_elements

    def intervals(self, K: int) -> int:
        if self.n_slots % K != 0:
            raise ValueError(f"K={K} does not divide {self.n_slots} slots")
        return self.n_slots // K

    def bisector(self) -> np.ndarray:
        return bisector_direction(self.geoms)


def build_scenario(scene: SceneConfig, fading: FadingParams, seed: int,
                   chans: list[ChannelRealization] | None = None) -> Scenario:
    """Generate (or adopt pre-drawn) per-slot channels for one period."""
    geoms = [slot_geometry(scene, t * scene.slot_s) for t in range(scene.n_slots)]
    if chans is None:
        chans = [realize_slot(scene, fading, geoms[t], seed, t, 0, t)
                 for t in range(scene.n_slots)]
    if len(chans) != len(geoms):
        raise ValueError("channel record count does not match the slot count")
    return Scenario(scene=scene, fading=fading, geoms=geoms, chans=chans, seed=seed)


def slot_rates(scn: Scenario, K: int, w: np.ndarray, thetas: list[RisState],
               r: np.ndarray, lc: LinkConstants) -> np.ndarray:
    """Per-slot achievable rates (bits/s/Hz) in absolute slot order."""
    B = scn.intervals(K)
    out = np.zeros(scn.n_slots)
    for b in range(B):
        for k in range(K):
            t = b * K + k
            g = scn.geoms[t]
            gam = snr(w[b, k], thetas[b], r, scn.chans[t].H_sr, scn.chans[t].H_ru,
                      g.l_sr, g.l_ru, lc)
            out[t] = np.log2(1.0 + gam)
    return out


def average_rate_of(scn: Scenario, K: int, w, thetas, r, lc) -> float:
    return float(np.mean(slot_rates(scn, K, w, thetas, r, lc)))


def energy_of(scn: Scenario, K: int, w, thetas, r, lc) -> float:
    B = scn.intervals(K)
    bundle = SolutionBundle(K=K, B=B, w=w, theta=thetas, r=r, avg_rate=0.0, energy=0.0)
    return total_energy(bundle, scn.chans, scn.geoms, lc, slot_s=scn.scene.slot_s)


def make_bundle(scn: Scenario, K: int, w, thetas, r, lc) -> SolutionBundle:
    rates = slot_rates(scn, K, w, thetas, r, lc)
    bundle = SolutionBundle(K=K, B=scn.intervals(K), w=np.asarray(w),
                            theta=thetas, r=np.asarray(r, dtype=float),
                            avg_rate=float(np.mean(rates)), energy=0.0)
    bundle.energy = total_energy(bundle, scn.chans, scn.geoms, lc,
                                 slot_s=scn.scene.slot_s)
    return bundle
