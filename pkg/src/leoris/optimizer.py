"""Inner-layer optimization: transmit beamforming, RIS beamforming, orientation.

Per alternating-optimization (AO) iteration the blocks update in the order
w -> Theta -> r. The RIS beamforming block lifts V = diag(Theta) diag(Theta)^H
and runs fractional-programming auxiliary updates, an SCA-linearized SDP, and
a geometric penalty continuation toward rank one. The orientation block lifts
R = [r;1][r;1]^T the same way. Candidate block updates are only accepted when
they do not decrease the achieved average rate and keep the energy budget,
which makes the AO objective trace non-decreasing by construction.

The fractional surrogate is kept in nats internally (the quadratic and dual
transforms are exact there) and reported in bits.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .channels import STREAM_GR, STREAM_INIT, slot_rng
from .geometry import unit
from .link import LinkConstants, RisState, amplifier_power
from .scenario import Scenario, average_rate_of, energy_of, make_bundle, slot_rates

LN2 = math.log(2.0)


class SubproblemError(RuntimeError):
    """An inner SDP failed; carries the block and iteration context."""


@dataclass
class FpAuxiliaries:
    v: np.ndarray
    mu: np.ndarray


@dataclass
class PenaltyState:
    rho: float = 1e-3
    step: float = 10.0
    rho_max: float = 1e6
    q: int = 0

    def advance(self) -> None:
        self.rho = min(self.rho * self.step, self.rho_max)
        self.q += 1


@dataclass
class OptimizerConfig:
    ao_eps: float = 1e-3            # bits/s/Hz change that stops the AO loop
    ao_max_iter: int = 50
    inner_eps: float = 1e-4         # bits change that stops an inner continuation
    inner_max_rounds: int = 40
    rank_tol: float = 1e-6          # relative nuclear-minus-spectral target
    rho0: float = 1e-3
    rho_step: float = 10.0
    rho_max: float = 1e6
    rho0_warm: float = 0.1          # stiffer start for warm continuation restarts
    sdp_tol: float = 1e-7
    sdp_max_iter: int = 50
    gr_samples: int = 100
    gr_rounds: int = 12             # rho=0 rounds before Gaussian randomization


@dataclass
class AoReport:
    objective_trace: list
    iterations: int
    converged: bool
    bundle: object
    fp_rounds: int = 0
    sdp_solves: int = 0
    rank_residuals: list = field(default_factory=list)
    continuation_trace: list = field(default_factory=list)  # (q, rho, obj, res)
    notes: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        """Convergence trace: one row per penalty round, for plotting."""
        with open(path, "w") as fh:
            fh.write("iteration,objective_bits,rho,rank_residual\n")
            for q, rho, obj, res in self.continuation_trace:
                fh.write(f"{q},{obj:.9g},{rho:.9g},{res:.9g}\n")


# ---------------------------------------------------------------------------
# transmit beamforming (per slot, Rayleigh quotient)

def optimize_transmit_bf(H_sr, H_ru, theta: RisState, lc: LinkConstants) -> np.ndarray:
    """Unit beamformer maximizing w^H H1 w, H1 = (H_sr^H Th^H H_ru)(H_ru^H Th H_sr)."""
    H_sr = np.asarray(H_sr, dtype=complex)
    H_ru = np.asarray(H_ru, dtype=complex).reshape(-1)
    h = H_sr.conj().T @ (np.conj(theta.theta_diag) * H_ru)
    H1 = np.outer(h, h.conj())
    scale = float(np.max(np.abs(H1)))
    if scale < 1e-300:
        w = np.zeros(H_sr.shape[1], dtype=complex)  # degenerate: any unit vector
        w[0] = 1.0
        return w
    vals, vecs = sdp.hermitian_eig(H1 / scale)
    return vecs[:, 0]


# ---------------------------------------------------------------------------
# fractional-programming auxiliaries

def fp_update_aux(gamma: float, signal_term: complex, denom: float):
    """Stationary auxiliaries of the fractional surrogate.

    ``denom`` is the full power denominator |signal|^2 + noise. Returns
    (v, mu) with v = gamma and mu = sqrt(1+gamma) * signal / denom.
    """
    if denom <= 0:
        raise ValueError("denominator must be positive")
    if gamma < 0:
        raise ValueError("SNR must be nonnegative")
    return gamma, math.sqrt(1.0 + gamma) * signal_term / denom


def fp_surrogate_bits(v, mu, signal, denom) -> float:
    """Quadratic-transform surrogate value of one slot, in bits."""
    val = math.log(1.0 + v) - v + 2.0 * math.sqrt(1.0 + v) * (np.conj(mu) * signal).real \
        - abs(mu) ** 2 * denom
    return val / LN2


def _aux_from_powers(sig_pow: float, noise_pow: float):
    """(v, |mu|) from signal power and noise power; phase handled separately."""
    gamma = sig_pow / noise_pow
    mu_abs = math.sqrt(1.0 + gamma) * math.sqrt(sig_pow) / (sig_pow + noise_pow)
    return gamma, mu_abs


# ---------------------------------------------------------------------------
# RIS beamforming block

@dataclass
class _SlotTerms:
    g: np.ndarray        # cascade vector, z = g^H theta
    a2diag: np.ndarray   # |H_ru|^2 per element
    a3diag: np.ndarray   # |H_sr w|^2 per element
    c4: float
    c5sq: float
    f_sr: float
    energy_coef: float   # eta c1^2 f_sr dt


def _slot_terms(scn: Scenario, t: int, w_t, r, lc: LinkConstants) -> _SlotTerms:
    g = scn.geoms[t]
    f_sr = max(float(np.asarray(r) @ g.l_sr), 0.0)
    f_ru = max(float(np.asarray(r) @ g.l_ru), 0.0)
    hsr_w = scn.chans[t].H_sr @ np.asarray(w_t, dtype=complex)
    hru = scn.chans[t].H_ru
    return _SlotTerms(
        g=hru * np.conj(hsr_w),
        a2diag=np.abs(hru) ** 2,
        a3diag=np.abs(hsr_w) ** 2,
        c4=lc.c1 * math.sqrt(f_sr * f_ru),
        c5sq=lc.c2 ** 2 * f_ru * lc.sigma1_sq,
        f_sr=f_sr,
        energy_coef=lc.eta * lc.c1 ** 2 * f_sr * scn.scene.slot_s,
    )


def _interval_terms(scn: Scenario, K: int, b: int, w, r, lc) -> list[_SlotTerms]:
    return [_slot_terms(scn, b * K + k, w[b, k], r, lc) for k in range(K)]


def _energy_diag(terms: list[_SlotTerms], scn: Scenario, lc) -> np.ndarray:
    """Diagonal of the linear map V -> amplifier energy of one interval."""
    d = np.zeros(scn.mn)
    for st in terms:
        d += st.energy_coef * st.a3diag
    d += len(terms) * lc.eta * lc.sigma1_sq * scn.scene.slot_s
    return d


def _amp_energy_from_V(terms, scn, lc, V) -> float:
    return float(_energy_diag(terms, scn, lc) @ np.real(np.diag(V)))


def _rescale_into_budget(V: list, terms, scn, lc, budget_amp: float) -> None:
    """Shrink the lifted iterates so their total amplifier draw fits the budget.

    Needed because the per-slot beamformers change between visits, which can
    push a previously feasible state over the line.
    """
    if not math.isfinite(budget_amp):
        return
    total = sum(_amp_energy_from_V(terms[b], scn, lc, V[b]) for b in range(len(V)))
    if total > budget_amp and total > 0:
        factor = budget_amp * (1.0 - 1e-9) / total
        for b in range(len(V)):
            V[b] = V[b] * factor


def _project_states_into_budget(states: list, terms, scn, lc,
                                budget_amp: float) -> None:
    """Exact post-recovery projection so C4 holds verbatim, not just to tol."""
    if not math.isfinite(budget_amp):
        return
    total = 0.0
    for b, st in enumerate(states):
        total += float(_energy_diag(terms[b], scn, lc) @ st.amplitudes ** 2)
    if total > budget_amp and total > 0:
        factor = math.sqrt(max(budget_amp, 0.0) / total)
        for st in states:
            st.theta_diag = st.theta_diag * factor


def _interval_aux(terms: list[_SlotTerms], V, lc) -> FpAuxiliaries:
    v = np.zeros(len(terms))
    mu = np.zeros(len(terms))
    for i, st in enumerate(terms):
        sig = st.c4 ** 2 * max(float(np.real(np.conj(st.g) @ V @ st.g)), 0.0)
        noise = st.c5sq * float(st.a2diag @ np.real(np.diag(V))) + lc.sigma2_sq
        v[i], mu[i] = _aux_from_powers(sig, noise)
    return FpAuxiliaries(v=v, mu=mu)


def build_ris_sdp(terms: list[_SlotTerms], aux: FpAuxiliaries, pen: PenaltyState,
                  V_q: np.ndarray, lc: LinkConstants, scn: Scenario,
                  budget_rhs: float) -> sdp.SdpProblem:
    """Linearized per-interval SDP in V: surrogate rate minus rank-one penalty.

    Constraints: one energy row (C4 share of this interval) plus per-element
    diagonal amplitude bounds (C5).
    """
    mn = scn.mn
    C = np.zeros((mn, mn), dtype=complex)
    for i, st in enumerate(terms):
        A1 = np.outer(st.g, np.conj(st.g))
        tq = float(np.real(np.conj(st.g) @ V_q @ st.g))
        gnorm2 = float(np.real(np.vdot(st.g, st.g)))
        c7 = 2.0 * aux.mu[i] * math.sqrt(1.0 + aux.v[i]) * st.c4
        if c7 > 0.0 and tq > 1e-18 * gnorm2 * max(np.trace(V_q).real, 1e-300):
            C += (c7 / (2.0 * math.sqrt(tq))) * A1
        musq = aux.mu[i] ** 2
        C -= musq * st.c4 ** 2 * A1
        C -= np.diag(musq * st.c5sq * st.a2diag).astype(complex)
    # the penalty weight acts relative to a unit-norm rate surrogate
    C /= max(float(np.linalg.norm(C)), 1e-300)
    evals, evecs = np.linalg.eigh(0.5 * (V_q + V_q.conj().T))
    u = evecs[:, -1]
    C += pen.rho * (np.outer(u, np.conj(u)) - np.eye(mn))

    ediag = _energy_diag(terms, scn, lc)
    if not math.isfinite(budget_rhs):
        budget_rhs = 10.0 * lc.a_max ** 2 * float(np.sum(ediag)) + 1.0
    energy_row = sdp.LinearConstraint(np.diag(ediag).astype(complex), sdp.SENSE_LE,
                                      float(budget_rhs))
    cons = [energy_row]
    for i in range(mn):
        e = np.zeros((mn, mn), dtype=complex)
        e[i, i] = 1.0
        cons.append(sdp.LinearConstraint(e, sdp.SENSE_LE, lc.a_max ** 2))
    return sdp.SdpProblem(objective=C, constraints=cons)


def recover_rank_one(V, a_max: float) -> RisState:
    """Principal-component extraction with per-element amplitude clipping."""
    vals, vecs = np.linalg.eigh(0.5 * (np.asarray(V) + np.asarray(V).conj().T))
    lam = max(float(vals[-1]), 0.0)
    theta = math.sqrt(lam) * vecs[:, -1]
    amps = np.abs(theta)
    over = amps > a_max
    if np.any(over):
        theta[over] *= a_max / amps[over]
    if abs(theta[0]) > 1e-300:
        theta = theta * cmath.exp(-1j * cmath.phase(complex(theta[0])))
    return RisState(theta)


def rank_one_residual(V) -> float:
    """Relative nuclear-minus-spectral gap; zero exactly for rank-one PSD V."""
    nuc = sdp.nuclear_norm(V)
    if nuc <= 0:
        return 0.0
    return (nuc - sdp.spectral_norm(V)) / nuc


def _rates_from_V(terms, V, lc) -> float:
    """Sum of slot rates (bits) for one interval evaluated at a lifted V."""
    total = 0.0
    for st in terms:
        sig = st.c4 ** 2 * max(float(np.real(np.conj(st.g) @ V @ st.g)), 0.0)
        noise = st.c5sq * float(st.a2diag @ np.real(np.diag(V))) + lc.sigma2_sq
        total += math.log2(1.0 + sig / noise)
    return total


def _solve_block(prob, cfg, context: str):
    sol = sdp.solve_sdp(prob, tol=cfg.sdp_tol, max_iter=cfg.sdp_max_iter)
    if sol.status == "infeasible":
        raise SubproblemError(f"{context}: SDP reported infeasible")
    return sol


def _psd_clean(X) -> np.ndarray:
    X = 0.5 * (np.asarray(X) + np.asarray(X).conj().T)
    vals, vecs = np.linalg.eigh(X)
    vals = np.maximum(vals, 0.0)
    return (vecs * vals) @ vecs.conj().T


def optimize_ris_beamforming(scn: Scenario, K: int, w, r, lc: LinkConstants,
                             cfg: OptimizerConfig | None = None,
                             pen: PenaltyState | None = None,
                             V_init: list | None = None):
    """FP + SCA + penalty continuation over the per-interval lifted matrices.

    Returns (states, V_list, trace). ``trace`` rows carry
    (round, rho, objective bits, max rank residual).
    """
    cfg = cfg or OptimizerConfig()
    pen = pen or PenaltyState(cfg.rho0, cfg.rho_step, cfg.rho_max)
    B = scn.intervals(K)
    mn = scn.mn
    switching = B * mn * lc.p_c_w
    budget_amp = lc.e_max - switching

    terms = [_interval_terms(scn, K, b, w, r, lc) for b in range(B)]

    if budget_amp <= 1e-18:  # C4 pins the amplification to zero
        zeros = [RisState.zeros(mn) for _ in range(B)]
        return zeros, [np.zeros((mn, mn), dtype=complex) for _ in range(B)], \
            {"rounds": [], "solves": 0, "forced_zero": True}

    if V_init is None:
        denom = sum(float(np.sum(_energy_diag(tm, scn, lc))) for tm in terms)
        if math.isfinite(budget_amp) and lc.eta > 0 and denom > 0:
            amp0 = min(lc.a_max, math.sqrt(0.5 * budget_amp / denom))
        else:
            amp0 = lc.a_max
        V = [amp0 ** 2 * np.eye(mn, dtype=complex) for _ in range(B)]
    else:
        V = [np.asarray(v, dtype=complex).copy() for v in V_init]

    rows = []
    solves = 0
    prev_obj = -math.inf
    int_obj = [-math.inf] * B
    int_rhs = [math.inf] * B
    for rnd in range(cfg.inner_max_rounds):
        _rescale_into_budget(V, terms, scn, lc, budget_amp)
        for b in range(B):
            others = sum(_amp_energy_from_V(terms[bb], scn, lc, V[bb])
                         for bb in range(B) if bb != b)
            rhs = budget_amp - others if math.isfinite(budget_amp) else math.inf
            # a converged interval is left alone unless its budget share shrank
            cur = _rates_from_V(terms[b], V[b], lc)
            if (rnd > 0 and rank_one_residual(V[b]) <= cfg.rank_tol
                    and abs(cur - int_obj[b]) <= cfg.inner_eps / max(B, 1)
                    and rhs >= int_rhs[b] * (1.0 - 1e-9)):
                int_obj[b] = cur
                continue
            aux = _interval_aux(terms[b], V[b], lc)
            prob = build_ris_sdp(terms[b], aux, pen, V[b], lc, scn, max(rhs, 0.0))
            sol = _solve_block(prob, cfg, f"ris-beamforming b={b} round={rnd}")
            V[b] = _psd_clean(sol.X)
            int_obj[b] = _rates_from_V(terms[b], V[b], lc)
            int_rhs[b] = rhs
            solves += 1
        rho_used = pen.rho
        pen.advance()
        obj = sum(int_obj)
        rres = max(rank_one_residual(V[b]) for b in range(B))
        rows.append((rnd, rho_used, obj, rres))
        if rres <= cfg.rank_tol and abs(obj - prev_obj) <= cfg.inner_eps:
            break
        prev_obj = obj

    states = [recover_rank_one(V[b], lc.a_max) for b in range(B)]
    _project_states_into_budget(states, terms, scn, lc, budget_amp)
    return states, V, {"rounds": rows, "solves": solves, "forced_zero": False}


# ---------------------------------------------------------------------------
# SDR + Gaussian randomization baseline for the RIS block

def sdr_gr_baseline(scn: Scenario, K: int, w, r, lc: LinkConstants,
                    n_samples: int = 100, seed: int = 0,
                    cfg: OptimizerConfig | None = None, V_init=None):
    """Rank-unconstrained relaxation followed by Gaussian randomization.

    One penalty-free SDP solve per interval (auxiliaries taken at the warm
    state), then ``n_samples`` candidates per interval drawn from CN(0, V),
    each scaled into the amplitude and energy constraints; the best by
    achieved rate wins. Falls back to eigen recovery only if no sample
    scales into feasibility.
    """
    if n_samples < 1:
        raise ValueError("need at least one randomization sample")
    cfg = cfg or OptimizerConfig()
    B = scn.intervals(K)
    mn = scn.mn
    budget_amp = lc.e_max - B * mn * lc.p_c_w
    if budget_amp <= 1e-18:
        zeros = [RisState.zeros(mn) for _ in range(B)]
        return zeros, [np.zeros((mn, mn), dtype=complex) for _ in range(B)]

    terms = [_interval_terms(scn, K, b, w, r, lc) for b in range(B)]
    if V_init is None:
        amp0 = uniform_amplitude(scn, K, lc, r, margin=0.5)
        V = [amp0 ** 2 * np.eye(mn, dtype=complex) for _ in range(B)]
    else:
        V = [np.asarray(v, dtype=complex).copy() for v in V_init]
    _rescale_into_budget(V, terms, scn, lc, budget_amp)
    pen = PenaltyState(0.0, 1.0, 0.0)
    for b in range(B):
        others = sum(_amp_energy_from_V(terms[bb], scn, lc, V[bb])
                     for bb in range(B) if bb != b)
        rhs = budget_amp - others if math.isfinite(budget_amp) else math.inf
        aux = _interval_aux(terms[b], V[b], lc)
        prob = build_ris_sdp(terms[b], aux, pen, V[b], lc, scn, max(rhs, 0.0))
        sol = _solve_block(prob, cfg, f"sdr-relaxation b={b}")
        V[b] = _psd_clean(sol.X)
    states: list[RisState] = []
    spent = 0.0
    for b in range(B):
        rng = slot_rng(scn.seed + seed, b, STREAM_GR)
        if math.isfinite(budget_amp):
            pending = sum(_amp_energy_from_V(terms[bb], scn, lc, V[bb])
                          for bb in range(b + 1, B))
            share = max(budget_amp - spent - pending, 0.0)
        else:
            share = math.inf
        vals, vecs = np.linalg.eigh(_psd_clean(V[b]))
        root = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T
        draws = (rng.standard_normal((n_samples, mn))
                 + 1j * rng.standard_normal((n_samples, mn))) / math.sqrt(2.0)
        ediag = _energy_diag(terms[b], scn, lc)
        best, best_rate = None, -math.inf
        for cand in draws @ root.T:
            theta = np.asarray(cand, dtype=complex).copy()
            peak = float(np.max(np.abs(theta)))
            if peak > lc.a_max and peak > 0:
                theta *= lc.a_max / peak
            if math.isfinite(share):
                e_amp = float(ediag @ np.abs(theta) ** 2)
                if e_amp > max(share, 0.0):
                    if share <= 0 or e_amp <= 0:
                        continue
                    theta *= math.sqrt(share / e_amp)
            Vc = np.outer(theta, np.conj(theta))
            rate = _rates_from_V(terms[b], Vc, lc)
            if rate > best_rate:
                best, best_rate = theta, rate
        if best is None:  # no sample scaled into feasibility
            best = recover_rank_one(V[b], lc.a_max).theta_diag
            e_amp = float(ediag @ np.abs(best) ** 2)
            if math.isfinite(share) and e_amp > share:
                best = best * math.sqrt(max(share, 0.0) / e_amp) if e_amp > 0 else best
        states.append(RisState(best))
        if math.isfinite(budget_amp):
            spent += float(ediag @ np.abs(best) ** 2)
    return states, V


# ---------------------------------------------------------------------------
# orientation block

def _lift_direction(r) -> np.ndarray:
    v = np.append(np.asarray(r, dtype=float), 1.0)
    return np.outer(v, v)


def _a4(l_sr, l_ru) -> np.ndarray:
    A = np.zeros((4, 4))
    A[:3, :3] = 0.5 * (np.outer(l_sr, l_ru) + np.outer(l_ru, l_sr))
    return A


def _a_cross(l) -> np.ndarray:
    A = np.zeros((4, 4))
    A[:3, 3] = 0.5 * np.asarray(l, dtype=float)
    A[3, :3] = 0.5 * np.asarray(l, dtype=float)
    return A


def build_orientation_sdp(scn: Scenario, K: int, w, thetas, aux_all,
                          pen: PenaltyState, lc: LinkConstants,
                          R_q: np.ndarray, budget_amp: float) -> sdp.SdpProblem:
    """4x4 lifted-direction SDP with per-slot incidence constraints."""
    B = scn.intervals(K)
    l_ru = scn.geoms[0].l_ru
    A5 = _a_cross(l_ru)
    C = np.zeros((4, 4))
    e_coefs = []
    thermal = 0.0
    for b in range(B):
        theta = thetas[b].theta_diag
        for k in range(K):
            t = b * K + k
            g = scn.geoms[t]
            chan = scn.chans[t]
            z = np.vdot(chan.H_ru, theta * (chan.H_sr @ np.asarray(w[b, k], dtype=complex)))
            c8 = abs(lc.c1 * z)
            c9sq = lc.c2 ** 2 * lc.sigma1_sq * float(
                np.sum(np.abs(chan.H_ru) ** 2 * np.abs(theta) ** 2))
            A4 = _a4(g.l_sr, l_ru)
            v_t, mu_t = aux_all[t]
            tq = max(float(np.sum(A4 * R_q)), 0.0)
            c10 = 2.0 * mu_t * math.sqrt(1.0 + v_t) * c8
            if c10 > 0.0 and tq > 1e-18:
                C += (c10 / (2.0 * math.sqrt(tq))) * A4
            C -= mu_t ** 2 * (c8 ** 2 * A4 + c9sq * A5)
            e_coefs.append((lc.eta * scn.scene.slot_s * float(
                np.sum(np.abs(lc.c1 * theta * (chan.H_sr @ np.asarray(w[b, k]))) ** 2)),
                g.l_sr))
            thermal += lc.eta * lc.sigma1_sq * scn.scene.slot_s * float(
                np.sum(np.abs(theta) ** 2))
    C /= max(float(np.linalg.norm(C)), 1e-300)
    evals, evecs = np.linalg.eigh(0.5 * (R_q + R_q.T))
    u = evecs[:, -1]
    C += pen.rho * (np.outer(u, u) - np.eye(4))

    e44 = np.zeros((4, 4))
    e44[3, 3] = 1.0
    cons = [sdp.LinearConstraint(np.eye(4, dtype=complex), sdp.SENSE_EQ, 2.0),
            sdp.LinearConstraint(e44.astype(complex), sdp.SENSE_EQ, 1.0),
            sdp.LinearConstraint(A5.astype(complex), sdp.SENSE_GE, 0.0),
            sdp.LinearConstraint(A5.astype(complex), sdp.SENSE_LE, 1.0)]
    seen = set()
    E_mat = np.zeros((4, 4))
    for coef, l_sr in e_coefs:
        key = tuple(np.round(l_sr, 12))
        if key not in seen:
            seen.add(key)
            A6 = _a_cross(l_sr)
            cons.append(sdp.LinearConstraint(A6.astype(complex), sdp.SENSE_GE, 0.0))
            cons.append(sdp.LinearConstraint(A6.astype(complex), sdp.SENSE_LE, 1.0))
        E_mat += coef * _a_cross(l_sr)
    if math.isfinite(budget_amp):
        rhs = budget_amp - thermal
    else:
        rhs = float(np.sum(np.abs(E_mat))) * 10.0 + 1.0
    cons.append(sdp.LinearConstraint(E_mat.astype(complex), sdp.SENSE_LE, rhs))
    return sdp.SdpProblem(objective=C.astype(complex), constraints=cons)


def recover_direction(R) -> np.ndarray:
    """Unit direction from a (near) rank-one lifted matrix."""
    R = 0.5 * (np.asarray(R, dtype=float) + np.asarray(R, dtype=float).T)
    if R[3, 3] < 0.5:
        raise ValueError("degenerate lifted matrix: R[3,3] < 0.5")
    vals, vecs = np.linalg.eigh(R)
    u = vecs[:, -1]
    if abs(u[3]) < 1e-9:
        raise ValueError("degenerate lifted matrix: homogeneous component vanished")
    u = u / u[3]
    return unit(u[:3])


def _project_c2(r, scn: Scenario) -> tuple[np.ndarray, bool]:
    """Pull r toward the bisector until every slot sees a nonnegative incidence."""
    def ok(v):
        if float(v @ scn.geoms[0].l_ru) < 0:
            return False
        return all(float(v @ g.l_sr) >= 0 for g in scn.geoms)

    if ok(r):
        return r, False
    target = scn.bisector()
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(unit((1 - mid) * r + mid * target)):
            hi = mid
        else:
            lo = mid
    return unit((1 - hi) * r + hi * target), True


def _orientation_aux(scn: Scenario, K: int, w, thetas, r, lc) -> list:
    out = []
    B = scn.intervals(K)
    for b in range(B):
        theta = thetas[b].theta_diag
        for k in range(K):
            t = b * K + k
            g = scn.geoms[t]
            chan = scn.chans[t]
            z = np.vdot(chan.H_ru, theta * (chan.H_sr @ np.asarray(w[b, k], dtype=complex)))
            c8 = abs(lc.c1 * z)
            c9sq = lc.c2 ** 2 * lc.sigma1_sq * float(
                np.sum(np.abs(chan.H_ru) ** 2 * np.abs(theta) ** 2))
            f_sr = max(float(r @ g.l_sr), 0.0)
            f_ru = max(float(r @ g.l_ru), 0.0)
            sig = c8 ** 2 * f_sr * f_ru
            noise = c9sq * f_ru + lc.sigma2_sq
            out.append(_aux_from_powers(sig, noise))
    return out


def _orientation_rate_bits(scn, K, w, thetas, R, lc) -> float:
    """All-slot rate sum evaluated on the lifted R."""
    total = 0.0
    B = scn.intervals(K)
    l_ru = scn.geoms[0].l_ru
    A5 = _a_cross(l_ru)
    for b in range(B):
        theta = thetas[b].theta_diag
        for k in range(K):
            t = b * K + k
            g = scn.geoms[t]
            chan = scn.chans[t]
            z = np.vdot(chan.H_ru, theta * (chan.H_sr @ np.asarray(w[b, k], dtype=complex)))
            c8 = abs(lc.c1 * z)
            c9sq = lc.c2 ** 2 * lc.sigma1_sq * float(
                np.sum(np.abs(chan.H_ru) ** 2 * np.abs(theta) ** 2))
            sig = c8 ** 2 * max(float(np.sum(_a4(g.l_sr, l_ru) * R)), 0.0)
            noise = c9sq * max(float(np.sum(A5 * R)), 0.0) + lc.sigma2_sq
            total += math.log2(1.0 + sig / noise)
    return total


def optimize_orientation(scn: Scenario, K: int, w, thetas, r0, lc: LinkConstants,
                         cfg: OptimizerConfig | None = None,
                         pen: PenaltyState | None = None,
                         R_init: np.ndarray | None = None):
    """Penalty continuation on the lifted direction; returns (r, R, trace)."""
    cfg = cfg or OptimizerConfig()
    pen = pen or PenaltyState(cfg.rho0, cfg.rho_step, cfg.rho_max)
    B = scn.intervals(K)
    mn = scn.mn
    budget_amp = lc.e_max - B * mn * lc.p_c_w
    R = _lift_direction(r0) if R_init is None else np.asarray(R_init, dtype=float).copy()
    r_cur = r0
    rows = []
    solves = 0
    prev_obj = -math.inf
    for rnd in range(cfg.inner_max_rounds):
        aux = _orientation_aux(scn, K, w, thetas, r_cur, lc)
        prob = build_orientation_sdp(scn, K, w, thetas, aux, pen, lc, R, budget_amp)
        sol = _solve_block(prob, cfg, f"orientation round={rnd}")
        R = 0.5 * (np.real(sol.X) + np.real(sol.X).T)
        solves += 1
        rho_used = pen.rho
        pen.advance()
        obj = _orientation_rate_bits(scn, K, w, thetas, R, lc)
        rres = rank_one_residual(R)
        rows.append((rnd, rho_used, obj, rres))
        try:
            r_cur = recover_direction(R)
        except ValueError:
            r_cur = r0
        if rres <= cfg.rank_tol and abs(obj - prev_obj) <= cfg.inner_eps:
            break
        prev_obj = obj
    r_new, projected = _project_c2(r_cur, scn)
    return r_new, R, {"rounds": rows, "solves": solves, "projected": projected}


# ---------------------------------------------------------------------------
# initialization and the AO driver

def uniform_amplitude(scn: Scenario, K: int, lc: LinkConstants, r0,
                      margin: float = 1.0) -> float:
    """Largest safe common amplitude under the energy budget, any unit w.

    Uses the spectral-norm bound ||Theta H_sr w||^2 <= A^2 ||H_sr||_2^2, so the
    returned amplitude keeps C4 feasible regardless of the beamformers.
    ``margin`` scales the available amplification budget (0.5 = half).
    """
    B = scn.intervals(K)
    mn = scn.mn
    budget_amp = lc.e_max - B * mn * lc.p_c_w
    if budget_amp <= 1e-18:
        return 0.0
    if not math.isfinite(budget_amp) or lc.eta == 0:
        return lc.a_max
    denom = 0.0
    for t in range(scn.n_slots):
        f_sr = max(float(np.asarray(r0) @ scn.geoms[t].l_sr), 0.0)
        spec = float(np.linalg.norm(scn.chans[t].H_sr, 2)) ** 2
        denom += scn.scene.slot_s * lc.eta * (lc.c1 ** 2 * f_sr * spec
                                              + lc.sigma1_sq * mn)
    if denom <= 0:
        return lc.a_max
    return min(lc.a_max, math.sqrt(margin * budget_amp / denom))


def random_phase_states(scn: Scenario, K: int, amp: float,
                        stream: int = STREAM_INIT) -> list[RisState]:
    B = scn.intervals(K)
    phases = slot_rng(scn.seed, 0, stream).uniform(0.0, 2.0 * math.pi, (B, scn.mn))
    return [RisState(amp * np.exp(1j * phases[b])) for b in range(B)]


def initial_state(scn: Scenario, K: int, lc: LinkConstants,
                  cfg: OptimizerConfig | None = None):
    """Uniform-amplitude random-phase RIS state, bisector direction, matched w."""
    B = scn.intervals(K)
    r0 = scn.bisector()
    amp = uniform_amplitude(scn, K, lc, r0, margin=0.5)
    thetas = random_phase_states(scn, K, amp, STREAM_INIT)
    L = scn.fading.sat_antennas
    w = np.zeros((B, K, L), dtype=complex)
    for b in range(B):
        for k in range(K):
            t = b * K + k
            w[b, k] = optimize_transmit_bf(scn.chans[t].H_sr, scn.chans[t].H_ru,
                                           thetas[b], lc)
    return w, thetas, r0


def _interval_rate(scn, K, b, w, theta_b, r, lc) -> float:
    from .link import snr
    total = 0.0
    for k in range(K):
        t = b * K + k
        g = scn.geoms[t]
        gam = snr(w[b, k], theta_b, r, scn.chans[t].H_sr, scn.chans[t].H_ru,
                  g.l_sr, g.l_ru, lc)
        total += math.log2(1.0 + gam)
    return total


def alternating_optimize(K: int, scn: Scenario, lc: LinkConstants,
                         cfg: OptimizerConfig | None = None,
                         theta_solver: str = "penalty",
                         warm_start=None) -> AoReport:
    """Cyclic w -> Theta -> r updates with monotone safeguarded acceptance."""
    cfg = cfg or OptimizerConfig()
    if theta_solver not in ("penalty", "sdr-gr"):
        raise ValueError(f"unknown theta solver {theta_solver!r}")
    B = scn.intervals(K)
    mn = scn.mn
    if B * mn * lc.p_c_w > lc.e_max:
        raise SubproblemError("switching energy alone exceeds the budget")

    if warm_start is None:
        w, thetas, r = initial_state(scn, K, lc, cfg)
    else:
        w, thetas, r = warm_start
        w = np.array(w, dtype=complex)
    V_state = [np.outer(st.theta_diag, np.conj(st.theta_diag)) for st in thetas]
    R_state = _lift_direction(r)

    rbar = average_rate_of(scn, K, w, thetas, r, lc)
    trace = [rbar]
    notes = []
    fp_rounds = 0
    sdp_solves = 0
    rank_res = []
    cont_trace = []
    converged = False
    iterations = 0

    switching = B * mn * lc.p_c_w
    for it in range(1, cfg.ao_max_iter + 1):
        iterations = it
        # transmit beamforming, independent per slot; if the sharper
        # beamformers push the amplifier draw over the budget, pair them
        # with an exact RIS amplitude rescale and keep the pair only if
        # the average rate does not drop
        w_cand = w.copy()
        for b in range(B):
            for k in range(K):
                t = b * K + k
                w_cand[b, k] = optimize_transmit_bf(scn.chans[t].H_sr,
                                                    scn.chans[t].H_ru,
                                                    thetas[b], lc)
        e_new = energy_of(scn, K, w_cand, thetas, r, lc)
        if e_new <= lc.e_max:
            w = w_cand
        else:
            amp_new = e_new - switching
            factor = math.sqrt(max(lc.e_max - switching, 0.0)
                               * (1.0 - 1e-12) / amp_new)
            scaled = [RisState(st.theta_diag * factor) for st in thetas]
            if (average_rate_of(scn, K, w_cand, scaled, r, lc)
                    >= average_rate_of(scn, K, w, thetas, r, lc) - 1e-12):
                w, thetas = w_cand, scaled
                V_state = [np.outer(st.theta_diag, np.conj(st.theta_diag))
                           for st in thetas]

        # RIS beamforming with per-interval safeguarded acceptance; the
        # penalty continuation restarts each visit so the fresh auxiliaries
        # can actually move the iterate before it re-collapses (a stiffer
        # start after the first pass, when the state is already near rank one)
        if theta_solver == "penalty":
            rho_start = cfg.rho0 if it == 1 else cfg.rho0_warm
            pen_theta = PenaltyState(rho_start, cfg.rho_step, cfg.rho_max)
            cand, V_new, tr = optimize_ris_beamforming(scn, K, w, r, lc, cfg,
                                                       pen_theta, V_state)
            sdp_solves += tr["solves"]
            fp_rounds += len(tr["rounds"])
            if tr["rounds"]:
                rank_res.append(tr["rounds"][-1][3])
            for rnd, rho, obj, res in tr["rounds"]:
                cont_trace.append((len(cont_trace), rho, obj, res))
        else:
            cand, V_new = sdr_gr_baseline(scn, K, w, r, lc, cfg.gr_samples,
                                          seed=0, cfg=cfg, V_init=V_state)
        for b in range(B):
            trial = list(thetas)
            trial[b] = cand[b]
            if theta_solver != "penalty":
                # the randomized baseline replaces its state unconditionally
                if energy_of(scn, K, w, trial, r, lc) <= lc.e_max:
                    thetas = trial
                continue
            old_rate = _interval_rate(scn, K, b, w, thetas[b], r, lc)
            new_rate = _interval_rate(scn, K, b, w, cand[b], r, lc)
            if new_rate >= old_rate - 1e-12:
                if energy_of(scn, K, w, trial, r, lc) <= lc.e_max:
                    thetas = trial
        V_state = [np.outer(st.theta_diag, np.conj(st.theta_diag)) for st in thetas]

        # orientation with global safeguarded acceptance
        pen_r = PenaltyState(cfg.rho0 if it == 1 else cfg.rho0_warm,
                             cfg.rho_step, cfg.rho_max)
        r_cand, R_state, tr_r = optimize_orientation(scn, K, w, thetas, r, lc,
                                                     cfg, pen_r, R_state)
        sdp_solves += tr_r["solves"]
        if tr_r.get("projected"):
            notes.append(f"iter {it}: orientation projected into the C2 cone")
        if (average_rate_of(scn, K, w, thetas, r_cand, lc)
                >= average_rate_of(scn, K, w, thetas, r, lc) - 1e-12
                and energy_of(scn, K, w, thetas, r_cand, lc) <= lc.e_max):
            r = r_cand

        rbar_new = average_rate_of(scn, K, w, thetas, r, lc)
        trace.append(rbar_new)
        if rbar_new - rbar <= cfg.ao_eps:  # improvement exhausted (or noisy step)
            rbar = rbar_new
            converged = True
            break
        rbar = rbar_new

    bundle = make_bundle(scn, K, w, thetas, r, lc)
    bundle.validate(lc, n_slots=scn.n_slots)
    return AoReport(objective_trace=trace, iterations=iterations, converged=converged,
                    bundle=bundle, fp_rounds=fp_rounds, sdp_solves=sdp_solves,
                    rank_residuals=rank_res, continuation_trace=cont_trace,
                    notes=notes)
