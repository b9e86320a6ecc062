"""Independent brute-force oracles used to cross-check the optimizers."""

from __future__ import annotations

import math

import numpy as np

from .link import LinkConstants
from .scenario import Scenario


def fibonacci_sphere(n: int) -> np.ndarray:
    """n roughly uniform unit vectors on the sphere."""
    i = np.arange(n) + 0.5
    polar = np.arccos(1.0 - 2.0 * i / n)
    azim = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([np.cos(azim) * np.sin(polar),
                     np.sin(azim) * np.sin(polar),
                     np.cos(polar)], axis=1)


def random_unit_vectors(rng, n: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def brute_force_small(scn: Scenario, K: int, lc: LinkConstants,
                      n_phase_samples: int = 100_000, n_grid: int = 8000,
                      seed: int = 0) -> float:
    """Randomized exhaustive search for the small-instance average rate.

    Samples max-amplitude RIS phase configurations per interval, pairs each
    with the closed-form optimal transmit beamformer, and sweeps deployment
    directions over a spherical grid. Returns the best average rate found.
    The signal and noise quadratics are direction-independent, so they are
    precomputed once per sample and reused across the whole grid.
    """
    B = scn.intervals(K)
    mn = scn.mn
    n_slots = scn.n_slots
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(n_phase_samples, B, mn))
    sig_pow = np.zeros((n_phase_samples, n_slots))
    ris_noise = np.zeros((n_phase_samples, n_slots))
    for t in range(n_slots):
        b = t // K
        theta = lc.a_max * np.exp(1j * phases[:, b, :])
        ch = scn.chans[t]
        # optimal w gives |z| = ||H_sr^H Theta^H H_ru||
        h = (np.conj(theta) * ch.H_ru) @ np.conj(ch.H_sr)
        sig_pow[:, t] = np.sum(np.abs(h) ** 2, axis=1)
        ris_noise[:, t] = (np.abs(ch.H_ru) ** 2 * np.abs(theta) ** 2).sum(axis=1)

    l_ru = scn.geoms[0].l_ru
    l_srs = np.stack([g.l_sr for g in scn.geoms])
    best = -math.inf
    for rv in fibonacci_sphere(n_grid):
        f_ru = float(rv @ l_ru)
        if f_ru < 0.0:
            continue
        f_srs = l_srs @ rv
        if np.any(f_srs < 0.0):
            continue
        total = np.zeros(n_phase_samples)
        for t in range(n_slots):
            num = lc.c1 ** 2 * f_srs[t] * f_ru * sig_pow[:, t]
            den = lc.c2 ** 2 * f_ru * ris_noise[:, t] * lc.sigma1_sq + lc.sigma2_sq
            total += np.log2(1.0 + num / den)
        best = max(best, float(total.max()))
    return best / n_slots


def orientation_grid_search(slot_terms: list, l_ru, sigma2_sq: float,
                            n_grid: int = 40_000) -> tuple[np.ndarray, float]:
    """Grid maximization of mean log2(1 + gamma(r)) over unit directions.

    ``slot_terms`` holds (c8_abs, c9sq, l_sr) per slot. Returns (r, value).
    """
    c8 = np.array([t[0] for t in slot_terms])
    c9sq = np.array([t[1] for t in slot_terms])
    l_srs = np.stack([t[2] for t in slot_terms])
    best_v, best_r = -math.inf, None
    for rv in fibonacci_sphere(n_grid):
        f_ru = float(rv @ np.asarray(l_ru))
        if f_ru < 0.0:
            continue
        f_srs = np.maximum(l_srs @ rv, 0.0)
        gam = c8 ** 2 * f_srs * f_ru / (c9sq * f_ru + sigma2_sq)
        val = float(np.mean(np.log2(1.0 + gam)))
        if val > best_v:
            best_v, best_r = val, rv
    return best_r, best_v
