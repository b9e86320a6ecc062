"""Dense Hermitian SDP kernel.

Eigendecomposition helpers, the complex-to-real embedding, and a small
primal-dual interior-point solver (Nesterov-Todd scaling, Mehrotra
predictor-corrector) for problems of the form

    maximize  Tr(C X)
    s.t.      Tr(A_i X)  <=/==/>=  b_i,      X >= 0 (PSD),

with C, A_i Hermitian. Inequalities get scalar slacks; the PSD block plus
the slack orthant are handled as a product cone. Everything is dense and
sized for n up to a few tens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

SENSE_LE = "<="
SENSE_EQ = "=="
SENSE_GE = ">="

_EIG_CLIP = 1e-300


def check_hermitian(H, tol: float = 1e-12) -> np.ndarray:
    """Validate conjugate symmetry (relative tol) and return the symmetrized copy."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - H.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (H + H.conj().T)


def hermitian_eig(H, tol: float = 1e-9):
    """Eigenvalues (descending) and orthonormal eigenvectors of a Hermitian matrix."""
    H = check_hermitian(H, tol=tol)
    w, v = np.linalg.eigh(H)
    return w[::-1], v[:, ::-1]


def complex_to_real_embed(H) -> np.ndarray:
    """[[Re H, -Im H], [Im H, Re H]]: symmetric, spectrum doubled in multiplicity."""
    H = np.asarray(H, dtype=complex)
    re, im = H.real, H.imag
    top = np.hstack([re, -im])
    bot = np.hstack([im, re])
    return np.vstack([top, bot])


def real_to_complex(Y) -> np.ndarray:
    """Inverse of the embedding for a general symmetric Y; result is Hermitian."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0] // 2
    re = 0.5 * (Y[:n, :n] + Y[n:, n:])
    im = 0.5 * (Y[n:, :n] - Y[:n, n:])
    X = re + 1j * im
    return 0.5 * (X + X.conj().T)


def nuclear_norm(H) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(check_hermitian(H, tol=1e-9)))))


def spectral_norm(H) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(check_hermitian(H, tol=1e-9)))))


@dataclass
class LinearConstraint:
    matrix: np.ndarray
    sense: str
    rhs: float

    def __post_init__(self) -> None:
        if self.sense not in (SENSE_LE, SENSE_EQ, SENSE_GE):
            raise ValueError(f"unknown constraint sense {self.sense!r}")
        if not math.isfinite(self.rhs):
            raise ValueError("constraint rhs must be finite")


@dataclass
class SdpProblem:
    """Standard-form instance: maximize Tr(objective @ X) under the constraints.

    ``diag_bounds`` (optional, length n) adds X_ii <= bound rows at solve time.
    """

    objective: np.ndarray
    constraints: list[LinearConstraint]
    diag_bounds: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(np.asarray(self.objective).shape[0])


@dataclass
class SdpSolution:
    X: np.ndarray
    objective_value: float
    duals: np.ndarray
    status: str                      # optimal | infeasible | max-iter
    kkt: dict = field(default_factory=dict)
    iterations: int = 0


def _psd_function(H, fn) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (H + H.T))
    return (v * fn(np.maximum(w, _EIG_CLIP))) @ v.T


class _Canonical:
    """Real embedded problem with row/objective scaling and slack bookkeeping."""

    def __init__(self, problem: SdpProblem):
        n_c = problem.dim
        C = check_hermitian(problem.objective)
        rows = list(problem.constraints)
        if problem.diag_bounds is not None:
            bounds = np.asarray(problem.diag_bounds, dtype=float)
            for i, bd in enumerate(bounds):
                e = np.zeros((n_c, n_c), dtype=complex)
                e[i, i] = 1.0
                rows.append(LinearConstraint(e, SENSE_LE, float(bd)))
        if not rows:
            raise ValueError("problem has no constraints")

        self.n_complex = n_c
        self.n = 2 * n_c
        self.m = len(rows)
        self.senses = [r.sense for r in rows]

        self.c_scale = max(1.0, float(np.linalg.norm(C)))
        self.C = complex_to_real_embed(C) / self.c_scale

        self.diag_rows: dict[int, np.ndarray] = {}
        self.dense_rows: dict[int, np.ndarray] = {}
        self.row_scale = np.ones(self.m)
        self.flip = np.ones(self.m)
        b = np.zeros(self.m)
        slack_of_row = np.full(self.m, -1, dtype=int)
        n_slack = 0
        for i, row in enumerate(rows):
            A = check_hermitian(row.matrix)
            if A.shape[0] != n_c:
                raise ValueError("constraint matrix dimension mismatch")
            Ah = complex_to_real_embed(A)
            bh = 2.0 * row.rhs
            if row.sense == SENSE_GE:
                Ah, bh = -Ah, -bh
                self.flip[i] = -1.0
            if row.sense != SENSE_EQ:
                slack_of_row[i] = n_slack
                n_slack += 1
            d = max(float(np.linalg.norm(Ah)), abs(bh), 1e-12)
            self.row_scale[i] = d
            Ah = Ah / d
            b[i] = bh / d
            off = Ah - np.diag(np.diag(Ah))
            if np.max(np.abs(off)) == 0.0:
                self.diag_rows[i] = np.diag(Ah).copy()
            else:
                self.dense_rows[i] = Ah
        self.b = b
        self.slack_of_row = slack_of_row
        self.p = n_slack
        self.ineq_rows = np.flatnonzero(slack_of_row >= 0)
        self.diag_ids = list(self.diag_rows)
        self.dense_ids = list(self.dense_rows)
        self.diag_stack = (np.column_stack([self.diag_rows[i] for i in self.diag_ids])
                           if self.diag_ids else np.zeros((self.n, 0)))
        self.dense_stack = (np.stack([self.dense_rows[i] for i in self.dense_ids])
                            if self.dense_ids else np.zeros((0, self.n, self.n)))
        self.dense_flat = self.dense_stack.reshape(-1, self.n * self.n)

    # -- linear operator helpers -------------------------------------------
    def op_A(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(self.m)
        if self.diag_ids:
            out[self.diag_ids] = self.diag_stack.T @ np.diag(X)
        if self.dense_ids:
            out[self.dense_ids] = self.dense_flat @ X.reshape(-1)
        return out

    def op_At(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        if self.diag_ids:
            out[np.diag_indices(self.n)] = self.diag_stack @ y[self.diag_ids]
        if self.dense_ids:
            out += (y[self.dense_ids] @ self.dense_flat).reshape(self.n, self.n)
        return out

    def duals_external(self, y: np.ndarray) -> np.ndarray:
        return y * self.flip * self.c_scale / self.row_scale

    def objective_external(self, X: np.ndarray) -> float:
        return 0.5 * self.c_scale * float(np.sum(self.C * X))


class _NumericalBreakdown(Exception):
    """Iterates hit the floating-point floor; fall back to the best iterate."""


def _chol_or_raise(X: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(X)):
        raise _NumericalBreakdown
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        try:
            jitter = 1e-12 * max(float(np.trace(X)), 1e-300) / X.shape[0]
            return np.linalg.cholesky(X + jitter * np.eye(X.shape[0]))
        except np.linalg.LinAlgError as exc:
            raise _NumericalBreakdown from exc


def _max_step_psd(L: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX PSD, given the Cholesky factor of X."""
    if not np.all(np.isfinite(dX)):
        raise _NumericalBreakdown
    T = solve_triangular(L, solve_triangular(L, dX, lower=True).T, lower=True)
    try:
        lam = float(np.min(np.linalg.eigvalsh(0.5 * (T + T.T))))
    except np.linalg.LinAlgError as exc:
        raise _NumericalBreakdown from exc
    if lam >= 0.0:
        return math.inf
    return -1.0 / lam


def _max_step_pos(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


def solve_sdp(problem: SdpProblem, tol: float = 1e-7, max_iter: int = 100,
              verbose: bool = False) -> SdpSolution:
    """Primal-dual interior-point solve on the real embedding.

    Returns an SdpSolution whose ``kkt`` dict carries the scaled primal/dual
    residuals, the complementarity gap, and the most negative eigenvalues of
    the recovered primal/dual matrices.
    """
    can = _Canonical(problem)
    n, m, p = can.n, can.m, can.p
    b, C = can.b, can.C

    scale_p = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    X = scale_p * np.eye(n)
    s = scale_p * np.ones(p)
    Z = np.eye(n)
    z = np.ones(p)
    y = np.zeros(m)

    tau = 0.98
    status = "max-iter"
    cert_residual = math.nan
    it = 0
    best = None
    best_merit = math.inf
    stall = 0
    since_best = 0

    def residuals():
        r_p = b - can.op_A(X)
        if p:
            r_p[can.ineq_rows] -= s
        R_d = can.op_At(y) - C - Z
        r_ds = (y[can.ineq_rows] - z) if p else np.zeros(0)
        return r_p, R_d, r_ds

    for it in range(1, max_iter + 1):
        r_p, R_d, r_ds = residuals()
        mu = (float(np.sum(X * Z)) + float(s @ z)) / (n + p)
        obj_p = float(np.sum(C * X))
        obj_d = float(b @ y)
        pres = float(np.linalg.norm(r_p)) / (1.0 + float(np.linalg.norm(b)))
        dres = math.sqrt(float(np.sum(R_d * R_d)) + float(r_ds @ r_ds)) / (1.0 + float(np.linalg.norm(C)))
        half_cs = 0.5 * can.c_scale
        gap = half_cs * abs(obj_p - obj_d) / (1.0 + half_cs * abs(obj_p))
        compl = half_cs * (float(np.sum(X * Z)) + float(s @ z)) / (1.0 + half_cs * abs(obj_p))
        merit = max(pres, dres, gap)
        if merit < 0.98 * best_merit and np.all(np.isfinite(X)):
            best_merit = merit
            best = (X.copy(), y.copy())
            since_best = 0
        else:
            since_best += 1
            if since_best >= 5:  # numerical floor: no real progress left
                break
        if pres <= 0.5 * tol and dres <= 0.5 * tol and gap <= 0.8 * tol and compl <= tol:
            status = "optimal"
            best = (X.copy(), y.copy())
            break

        # infeasibility heuristic: diverging multipliers forming a Farkas ray
        ynorm = float(np.linalg.norm(y))
        if ynorm > 1e8 * scale_p:
            yh = y / ynorm
            Sy = can.op_At(yh)
            lam_min = float(np.min(np.linalg.eigvalsh(Sy)))
            ineq_ok = float(np.min(yh[can.ineq_rows])) if p else 0.0
            bty = float(b @ yh)
            viol = max(-lam_min, -ineq_ok, 0.0)
            if bty < -math.sqrt(tol) and viol <= math.sqrt(tol):
                status = "infeasible"
                cert_residual = viol / max(-bty, 1e-300)
                break

        try:
            step = _nt_step(can, X, Z, s, z, y, r_p, R_d, r_ds, mu, tau, p, n,
                            verbose, it, pres, dres, gap)
        except (_NumericalBreakdown, np.linalg.LinAlgError):
            break
        if step is None:
            break
        dX, dy, dZ, ds, dz, ap, ad = step
        if max(ap, ad) < 5e-3:
            stall += 1
            if stall >= 2:
                break
        else:
            stall = 0

        X = X + ap * dX
        s = s + ap * ds
        y = y + ad * dy
        Z = Z + ad * dZ
        z = z + ad * dz
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(Z)):
            break

    if status != "optimal" and best is not None:
        X, y = best
    X_c = real_to_complex(X)
    duals = can.duals_external(y)
    obj = can.objective_external(X)
    kkt = _kkt_report(problem, can, X_c, duals, obj)
    if status == "infeasible":
        kkt["infeasibility_certificate"] = cert_residual
    return SdpSolution(X=X_c, objective_value=obj, duals=duals, status=status,
                       kkt=kkt, iterations=it)


def _nt_step(can, X, Z, s, z, y, r_p, R_d, r_ds, mu, tau, p, n, verbose, it,
             pres, dres, gap):
    """One Mehrotra predictor-corrector step in the Nesterov-Todd scaling."""
    m = can.m
    # scaling point W with W Z W = X, via eigh of Z
    ez, Uz = np.linalg.eigh(0.5 * (Z + Z.T))
    ez = np.maximum(ez, _EIG_CLIP)
    Zinv = (Uz / ez) @ Uz.T
    Zhalf = (Uz * np.sqrt(ez)) @ Uz.T
    Zinvhalf = (Uz / np.sqrt(ez)) @ Uz.T
    Mm = Zhalf @ X @ Zhalf
    Mhalf = _psd_function(Mm, np.sqrt)
    W = Zinvhalf @ Mhalf @ Zinvhalf
    W = 0.5 * (W + W.T)
    if not np.all(np.isfinite(W)) or float(np.max(np.abs(W))) > 1e120:
        raise _NumericalBreakdown
    w2 = s / z if p else np.zeros(0)

    # Schur complement M_ij = <A_i, W A_j W> (+ slack diagonal)
    W2el = W * W
    dense_ids = can.dense_ids
    M = np.zeros((m, m))
    Ys = {}
    if dense_ids:
        stack = can.dense_stack  # (n_dense, n, n)
        Ymats = np.einsum("ab,kbc,cd->kad", W, stack, W, optimize=True)
        Ys = {j: Ymats[idx] for idx, j in enumerate(dense_ids)}
        flat = Ymats.reshape(len(dense_ids), -1)
        M[np.ix_(dense_ids, dense_ids)] = can.dense_flat @ flat.T
    diag_ids = can.diag_ids
    if diag_ids:
        D = can.diag_stack  # (n, n_diag)
        block = D.T @ W2el @ D
        M[np.ix_(diag_ids, diag_ids)] = block
        if dense_ids:
            Ydiag = np.stack([np.diag(Ys[j]) for j in dense_ids])  # (n_dense, n)
            cross = D.T @ Ydiag.T
            M[np.ix_(diag_ids, dense_ids)] = cross
            M[np.ix_(dense_ids, diag_ids)] = cross.T
    if p:
        M[can.ineq_rows, can.ineq_rows] += w2
    if not np.all(np.isfinite(M)):
        raise _NumericalBreakdown
    M += 1e-14 * max(np.trace(M), 1.0) / m * np.eye(m)
    try:
        Mf = np.linalg.cholesky(M)

        def solve_M(rhs):
            return np.linalg.solve(Mf.T, np.linalg.solve(Mf, rhs))
    except np.linalg.LinAlgError:
        def solve_M(rhs):
            return np.linalg.lstsq(M, rhs, rcond=None)[0]

    G_rd = W @ R_d @ W

    def direction(Rmu, Rmu_s):
        rhs = can.op_A(Rmu) - can.op_A(G_rd) - r_p
        if p:
            rhs[can.ineq_rows] += Rmu_s - w2 * r_ds
        dy = solve_M(rhs)
        dZ = can.op_At(dy) + R_d
        dz = (dy[can.ineq_rows] + r_ds) if p else np.zeros(0)
        dX = Rmu - W @ dZ @ W
        dX = 0.5 * (dX + dX.T)
        ds = (Rmu_s - w2 * dz) if p else np.zeros(0)
        return dX, dy, dZ, ds, dz

    Lx = _chol_or_raise(X)
    Lz = _chol_or_raise(Z)

    def step_lengths(dX, dZ, ds, dz):
        ap = min(1.0, tau * min(_max_step_psd(Lx, dX), _max_step_pos(s, ds)))
        ad = min(1.0, tau * min(_max_step_psd(Lz, dZ), _max_step_pos(z, dz)))
        return ap, ad

    # predictor
    dXa, _, dZa, dsa, dza = direction(-X, -s if p else np.zeros(0))
    apa, ada = step_lengths(dXa, dZa, dsa, dza)
    mu_aff = (float(np.sum((X + apa * dXa) * (Z + ada * dZa)))
              + float((s + apa * dsa) @ (z + ada * dza))) / (n + p)
    sigma = min(0.99, max(1e-6, (max(mu_aff, 0.0) / mu) ** 3))

    # corrector with the Mehrotra second-order term
    corr = dXa @ dZa @ Zinv
    Rmu = sigma * mu * Zinv - X - 0.5 * (corr + corr.T)
    Rmu_s = (sigma * mu / z - s - dsa * dza / z) if p else np.zeros(0)
    dX, dy, dZ, ds, dz = direction(Rmu, Rmu_s)
    ap, ad = step_lengths(dX, dZ, ds, dz)
    fallback = min(ap, ad) < 1e-2
    if fallback:
        # corrector too aggressive; retreat to a centering step
        Rmu = 0.8 * mu * Zinv - X
        Rmu_s = (0.8 * mu / z - s) if p else np.zeros(0)
        dX, dy, dZ, ds, dz = direction(Rmu, Rmu_s)
        ap, ad = step_lengths(dX, dZ, ds, dz)
    if verbose:
        print(f"it={it:3d} mu={mu:9.2e} pres={pres:8.1e} dres={dres:8.1e} "
              f"gap={gap:8.1e} sigma={sigma:6.3f} ap={ap:5.3f} ad={ad:5.3f} "
              f"fb={int(fallback)}")
    return dX, dy, dZ, ds, dz, ap, ad


def _kkt_report(problem: SdpProblem, can: _Canonical, X_c, duals, obj) -> dict:
    rows = list(problem.constraints)
    if problem.diag_bounds is not None:
        n_c = problem.dim
        for i, bd in enumerate(np.asarray(problem.diag_bounds, dtype=float)):
            e = np.zeros((n_c, n_c), dtype=complex)
            e[i, i] = 1.0
            rows.append(LinearConstraint(e, SENSE_LE, float(bd)))
    viol = 0.0
    bmax = 1.0
    dual_obj = 0.0
    Zc = -np.asarray(problem.objective, dtype=complex)
    for lam, row in zip(duals, rows):
        val = float(np.real(np.trace(np.asarray(row.matrix) @ X_c)))
        bmax = max(bmax, abs(row.rhs))
        if row.sense == SENSE_LE:
            viol = max(viol, val - row.rhs)
        elif row.sense == SENSE_GE:
            viol = max(viol, row.rhs - val)
        else:
            viol = max(viol, abs(val - row.rhs))
        dual_obj += lam * row.rhs
        Zc = Zc + lam * np.asarray(row.matrix, dtype=complex)
    min_eig_x = float(np.min(np.linalg.eigvalsh(0.5 * (X_c + X_c.conj().T))))
    min_eig_z = float(np.min(np.linalg.eigvalsh(0.5 * (Zc + Zc.conj().T))))
    return {
        "primal_residual": viol / bmax,
        "dual_residual": max(0.0, -min_eig_z) / max(1.0, float(np.linalg.norm(problem.objective))),
        "duality_gap": abs(dual_obj - obj) / (1.0 + abs(obj)),
        "min_eig_X": min_eig_x,
        "min_eig_Z": min_eig_z,
    }


def dump_problem(problem: SdpProblem, path) -> None:
    """Text dump: first line 'n m', then the objective, then each constraint.

    Matrices are row-major, one row per line, entries as 're,im' pairs.
    Constraint blocks start with '<sense> <rhs>'.
    """
    def write_matrix(fh, A):
        A = np.asarray(A, dtype=complex)
        for row in A:
            fh.write(" ".join(f"{v.real:.17g},{v.imag:.17g}" for v in row) + "\n")

    rows = list(problem.constraints)
    if problem.diag_bounds is not None:
        n_c = problem.dim
        for i, bd in enumerate(np.asarray(problem.diag_bounds, dtype=float)):
            e = np.zeros((n_c, n_c), dtype=complex)
            e[i, i] = 1.0
            rows.append(LinearConstraint(e, SENSE_LE, float(bd)))
    with open(path, "w") as fh:
        fh.write(f"{problem.dim} {len(rows)}\n")
        write_matrix(fh, problem.objective)
        for r in rows:
            fh.write(f"{r.sense} {r.rhs:.17g}\n")
            write_matrix(fh, r.matrix)


def load_problem(path) -> SdpProblem:
    """Read back a dump_problem file."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    n, m = (int(v) for v in lines[0].split())

    def parse_matrix(start):
        rows = []
        for ln in lines[start:start + n]:
            rows.append([complex(*map(float, tok.split(","))) for tok in ln.split()])
        return np.array(rows, dtype=complex)

    C = parse_matrix(1)
    cons = []
    pos = 1 + n
    for _ in range(m):
        sense, rhs = lines[pos].split()
        A = parse_matrix(pos + 1)
        cons.append(LinearConstraint(A, sense, float(rhs)))
        pos += 1 + n
    return SdpProblem(objective=C, constraints=cons)
