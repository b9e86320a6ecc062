"""Link-level quantities: amplitude constants, per-slot SNR, rates, RIS energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import SceneConfig


def db_to_pow(db: float) -> float:
    return 10.0 ** (db / 10.0)


def db_to_amp(db: float) -> float:
    return 10.0 ** (db / 20.0)


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class LinkParams:
    """Raw RF / noise / energy parameters in their customary units."""

    p_s_dbw: float = 15.0
    g_s_db: float = 24.5
    g_u_db: float = 10.0
    g_r_db: float = 5.0          # placeholder element gain, exposed for refinement
    sigma1_dbw: float = -110.0   # RIS thermal noise power, dBW
    sigma2_dbw: float = -129.0   # user noise power, dBW
    p_c_dbm: float = -10.0
    eta: float = 1.25
    a_max_db: float = 10.0
    a_max_is_amplitude_db: bool = False  # True reads a_max_db as 20*log10(amplitude)
    e_max_j: float | None = None         # None -> harness default policy


@dataclass
class LinkConstants:
    """Linear-domain constants entering the SNR and energy formulas."""

    c1: float
    c2: float
    g_r: float
    g_u: float
    g_s: float
    p_s_w: float
    sigma1_sq: float
    sigma2_sq: float
    eta: float
    p_c_w: float
    a_max: float
    e_max: float


def link_constants(config: SceneConfig, params: LinkParams) -> LinkConstants:
    """Convert dB-domain parameters and assemble c1, c2.

    The transmit symbol is unit power, so it drops out of c1. dBW noise
    figures are read as the noise powers sigma^2 themselves.
    """
    for name in ("p_s_dbw", "g_s_db", "g_u_db", "g_r_db", "sigma1_dbw",
                 "sigma2_dbw", "p_c_dbm", "eta", "a_max_db"):
        if getattr(params, name) is None:
            raise ValueError(f"missing link parameter: {name}")
    g_r = db_to_pow(params.g_r_db)
    g_u = db_to_pow(params.g_u_db)
    g_s = db_to_pow(params.g_s_db)
    p_s = db_to_pow(params.p_s_dbw)
    sigma1_sq = db_to_pow(params.sigma1_dbw)
    sigma2_sq = db_to_pow(params.sigma2_dbw)
    a_max = db_to_amp(params.a_max_db) if not params.a_max_is_amplitude_db \
        else db_to_pow(params.a_max_db)
    lam = config.wavelength_m
    return LinkConstants(
        c1=math.sqrt(math.pi * g_r * g_u * g_s * p_s),
        c2=math.sqrt(4.0 * math.pi / lam ** 2 * g_r * g_u),
        g_r=g_r, g_u=g_u, g_s=g_s, p_s_w=p_s,
        sigma1_sq=sigma1_sq, sigma2_sq=sigma2_sq,
        eta=params.eta,
        p_c_w=dbm_to_w(params.p_c_dbm),
        a_max=a_max,
        e_max=params.e_max_j if params.e_max_j is not None else math.inf,
    )


def passive_constants(lc: LinkConstants) -> LinkConstants:
    """Passive-RIS variant: unit amplitude cap, no RIS noise, no amplifier draw."""
    return LinkConstants(
        c1=lc.c1, c2=lc.c2, g_r=lc.g_r, g_u=lc.g_u, g_s=lc.g_s, p_s_w=lc.p_s_w,
        sigma1_sq=0.0, sigma2_sq=lc.sigma2_sq, eta=0.0, p_c_w=lc.p_c_w,
        a_max=1.0, e_max=lc.e_max,
    )


@dataclass
class RisState:
    """Diagonal of the RIS reflection matrix: entries A e^{j phi}."""

    theta_diag: np.ndarray

    def __post_init__(self) -> None:
        self.theta_diag = np.asarray(self.theta_diag, dtype=complex).reshape(-1)

    @classmethod
    def zeros(cls, n: int) -> "RisState":
        return cls(np.zeros(n, dtype=complex))

    @property
    def amplitudes(self) -> np.ndarray:
        return np.abs(self.theta_diag)

    def validate(self, a_max: float, tol: float = 0.0) -> None:
        if np.any(self.amplitudes > a_max + tol):
            raise ValueError("RIS amplitude exceeds a_max")


@dataclass
class SolutionBundle:
    """Decision variables of one solve plus the achieved rate and energy."""

    K: int
    B: int
    w: np.ndarray               # (B, K, L) unit vectors
    theta: list[RisState]       # length B
    r: np.ndarray               # unit direction vector
    avg_rate: float
    energy: float

    def validate(self, lc: LinkConstants, n_slots: int | None = None) -> None:
        if n_slots is not None and self.B * self.K != n_slots:
            raise ValueError("B*K does not cover the communication period")
        if abs(float(np.linalg.norm(self.r)) - 1.0) > 1e-10:
            raise ValueError("C1 violated: direction vector not unit norm")
        norms = np.linalg.norm(self.w, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-10):
            raise ValueError("C3 violated: transmit beamformer not unit norm")
        if self.energy > lc.e_max * (1.0 + 1e-12) + 1e-15:
            raise ValueError("C4 violated: energy exceeds the budget")
        for st in self.theta:
            st.validate(lc.a_max, tol=1e-12)


def snr(w, theta: RisState, r, H_sr, H_ru, l_sr, l_ru, lc: LinkConstants) -> float:
    """Received SNR of one slot; zero when the deployment direction faces away."""
    w = np.asarray(w, dtype=complex).reshape(-1)
    H_sr = np.asarray(H_sr, dtype=complex)
    H_ru = np.asarray(H_ru, dtype=complex).reshape(-1)
    if H_sr.shape != (H_ru.size, w.size):
        raise ValueError("channel/beamformer dimension mismatch")
    f_sr = float(np.asarray(r) @ np.asarray(l_sr))
    f_ru = float(np.asarray(r) @ np.asarray(l_ru))
    if f_sr < 0.0 or f_ru < 0.0:
        return 0.0
    z = np.vdot(H_ru, theta.theta_diag * (H_sr @ w))  # H_ru^H Theta H_sr w
    num = abs(lc.c1 * math.sqrt(f_sr * f_ru) * z) ** 2
    ris_noise = lc.c2 ** 2 * f_ru * float(np.sum(np.abs(H_ru) ** 2
                                                 * np.abs(theta.theta_diag) ** 2))
    den = ris_noise * lc.sigma1_sq + lc.sigma2_sq
    return num / den


def instantaneous_rate(gamma: float) -> float:
    if gamma < 0:
        raise ValueError("SNR must be nonnegative")
    return math.log2(1.0 + gamma)


def average_rate(rates, B: int, K: int) -> float:
    rates = np.asarray(rates, dtype=float)
    if rates.size != B * K:
        raise ValueError("expected one rate per slot")
    return float(np.mean(rates))


def amplifier_power(theta: RisState, w, H_sr, f_sr: float, lc: LinkConstants) -> float:
    """Instantaneous amplifier draw eta*(||c1 sqrt(r.l_sr) Theta H_sr w||^2 + ||Theta||^2 s1^2)."""
    f = max(f_sr, 0.0)
    signal = lc.eta * lc.c1 ** 2 * f * float(
        np.sum(np.abs(theta.theta_diag * (np.asarray(H_sr) @ np.asarray(w))) ** 2))
    thermal = lc.eta * lc.sigma1_sq * float(np.sum(theta.amplitudes ** 2))
    return signal + thermal


def total_energy(bundle: SolutionBundle, channels, geometry, lc: LinkConstants,
                 slot_s: float = 1.0) -> float:
    """Active-RIS energy over the period: amplifier draw per slot plus switching.

    ``channels`` and ``geometry`` are flat per-slot lists of length B*K in
    absolute slot order.
    """
    mn = bundle.theta[0].theta_diag.size
    e = 0.0
    for b in range(bundle.B):
        st = bundle.theta[b]
        for k in range(bundle.K):
            t = b * bundle.K + k
            g = geometry[t]
            f_sr = float(bundle.r @ g.l_sr)
            e += amplifier_power(st, bundle.w[b, k], channels[t].H_sr, f_sr, lc) * slot_s
    return e + bundle.B * mn * lc.p_c_w
