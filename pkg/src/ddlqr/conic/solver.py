"""Interior-point solver for dense LMI problems.

Infeasible-start primal-dual method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps, dense Cholesky factorizations throughout. The
slack of every block is an independent iterate, so equality rows encoded as
paired one-dimensional blocks (whose feasible set has empty interior) need
no special handling.

Schur-complement assembly exploits the structure recorded by the problem
builder: per-entry coefficients and column families have closed-form pairwise
contributions, and a declared slack corner (whose packed coefficients form an
identity) is eliminated analytically through congruences with the corner of
the scaling matrix, never materializing the corner-corner operator.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .problem import LmiProblem, smat, svec, svec_len

logger = logging.getLogger(__name__)

__all__ = ["SolverStatus", "SolverSettings", "ConicSolution", "solve"]


class SolverStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITERS = "MaxIters"
    NUMERICAL_ERROR = "NumericalError"


@dataclass
class SolverSettings:
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iters: int = 200
    verbose: bool = False

    def __post_init__(self):
        if self.tol_gap <= 0 or self.tol_feas <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class ConicSolution:
    status: SolverStatus
    y: np.ndarray
    objective: float
    gap: float
    iters: int
    wall_time: float
    primal_res: float = float("nan")
    dual_res: float = float("nan")
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is SolverStatus.OPTIMAL


class _FactorError(Exception):
    pass


# Equality rows encoded as inequality pairs drive both pair slacks to zero,
# so the Schur complement's conditioning degrades as mu shrinks and the
# attainable residuals bottom out above the requested tolerances. A stalled
# iterate whose best snapshot sits below these caps is returned as optimal
# instead of being iterated into factorization breakdown; above them a stall
# is a genuine failure.
_FEAS_CAP = 1e-6
_GAP_CAP = 1e-6
_DUAL_CAP = 1e-5


def _nt_scaling(S: np.ndarray, Z: np.ndarray):
    """Per-block NT scaling: lam (diagonal of the scaled point), R, Rinv,
    and the metric Wm = Rinv.T Rinv, so that Rinv S Rinv.T = R.T Z R = diag(lam)."""
    try:
        L_s = np.linalg.cholesky(S)
        L_z = np.linalg.cholesky(Z)
    except np.linalg.LinAlgError as exc:
        raise _FactorError(f"iterate lost positive definiteness: {exc}") from None
    U, lam, Vt = np.linalg.svd(L_z.T @ L_s)
    if np.min(lam) <= 0.0:
        raise _FactorError("NT scaling hit a zero singular value")
    root = np.sqrt(lam)
    R = L_s @ (Vt.T / root)
    Linv = scipy.linalg.solve_triangular(L_s, np.eye(S.shape[0]), lower=True)
    Rinv = (Vt * root[:, None]) @ Linv
    Wm = Rinv.T @ Rinv
    return lam, R, Rinv, Wm


def _boundary_step(lam: np.ndarray, D_scaled: np.ndarray) -> float:
    """Largest alpha with diag(lam) + alpha * D_scaled still PSD."""
    scale = np.sqrt(lam)
    Dn = D_scaled / np.outer(scale, scale)
    m = float(np.linalg.eigvalsh(0.5 * (Dn + Dn.T))[0])
    if m >= -1e-13:
        return np.inf
    return 1.0 / (-m)


class _Factorization:
    """One iteration's Schur complement, reduced over declared slack corners."""

    def __init__(self, compiled, Wms, oidx, pos_of, num_vars):
        self.compiled = compiled
        self.Wms = Wms
        self.oidx = oidx
        self.pos_of = pos_of
        self.num_vars = num_vars
        ko = oidx.size
        M = np.zeros((ko, ko))
        self.corner_data = []

        for cb, Wm in zip(compiled, Wms):
            self._accumulate(M, cb, Wm)
            if cb.corner is not None:
                self.corner_data.append(self._corner_reduce(M, cb, Wm))

        self.M_true = M
        scale = float(np.max(np.diag(M))) if ko else 1.0
        if not np.isfinite(scale) or scale <= 0.0:
            scale = 1.0
        self.factor = None
        for jitter in (0.0, 1e-12 * scale, 1e-9 * scale):
            try:
                self.factor = scipy.linalg.cho_factor(
                    M + jitter * np.eye(ko) if jitter else M, lower=True
                )
                break
            except np.linalg.LinAlgError:
                continue
        if self.factor is None:
            raise _FactorError("Schur complement not positive definite after jitter")

    # -- assembly -------------------------------------------------------------

    def _accumulate(self, M, cb, Wm):
        pos_of = self.pos_of
        a, b, vals = cb.ent_i, cb.ent_j, cb.ent_val
        ns = vals.size

        if cb.dim == 1 and not cb.families and cb.corner is None:
            if ns:
                p = pos_of[cb.ent_var]
                w = Wm[0, 0]
                M[np.ix_(p, p)] += (w * w) * np.outer(vals, vals)
            return

        if ns:
            ubar = np.where(a == b, 0.5 * vals, vals)
            Waa = Wm[np.ix_(a, a)]
            Wbb = Wm[np.ix_(b, b)]
            Wab = Wm[np.ix_(a, b)]
            delta = 2.0 * np.outer(ubar, ubar) * (Waa * Wbb + Wab * Wab.T)
            p = pos_of[cb.ent_var]
            np.add.at(M, (p[:, None], p[None, :]), delta)

        fams = cb.families
        if not fams:
            return
        Us = [Wm @ f.C for f in fams]

        for f1, U1 in zip(fams, Us):
            nq1 = f1.varmat.shape[1]
            v1 = pos_of[f1.varmat].ravel()
            for f2, U2 in zip(fams, Us):
                nq2 = f2.varmat.shape[1]
                v2 = pos_of[f2.varmat].ravel()
                H12 = f1.C.T @ U2
                Wee = Wm[f1.col0 : f1.col0 + nq1, f2.col0 : f2.col0 + nq2]
                A_ = U2[f1.col0 : f1.col0 + nq1, :]  # (nq1, T2)
                B_ = U1[f2.col0 : f2.col0 + nq2, :]  # (nq2, T1)
                term1 = np.einsum("ac,db->bacd", A_, B_)
                term2 = np.einsum("ad,bc->bacd", Wee, H12)
                delta = 2.0 * (term1 + term2)
                np.add.at(
                    M,
                    (v1[:, None], v2[None, :]),
                    delta.reshape(v1.size, v2.size),
                )

        if ns:
            p = pos_of[cb.ent_var]
            ubar = np.where(a == b, 0.5 * vals, vals)
            for f, U in zip(fams, Us):
                nq = f.varmat.shape[1]
                cols = np.arange(f.col0, f.col0 + nq)
                Wbc = Wm[np.ix_(b, cols)]  # (ns, nq)
                Wac = Wm[np.ix_(a, cols)]
                Ua = U[a, :]  # (ns, T)
                Ub = U[b, :]
                delta = 2.0 * ubar[:, None, None] * (
                    np.einsum("st,sq->stq", Ua, Wbc) + np.einsum("st,sq->stq", Ub, Wac)
                )
                pf = pos_of[f.varmat].ravel()
                flat = delta.reshape(ns, pf.size)
                np.add.at(M, (p[:, None], pf[None, :]), flat)
                np.add.at(M, (pf[:, None], p[None, :]), flat.T)

    def _corner_reduce(self, M, cb, Wm):
        """Build the corner-coupling matrices of one block and subtract the
        corner's Schur correction from M in place."""
        dc = cb.corner.dc
        v0 = cb.corner.var_start
        Wd = Wm[:dc, :dc]
        cf = scipy.linalg.cho_factor(Wd, lower=True)
        Wdinv = scipy.linalg.cho_solve(cf, np.eye(dc))
        Wdinv = 0.5 * (Wdinv + Wdinv.T)

        loc = {}
        for v in cb.ent_var:
            loc.setdefault(int(v), len(loc))
        for f in cb.families:
            for v in f.varmat.ravel():
                loc.setdefault(int(v), len(loc))
        n_loc = len(loc)
        loc_glob = np.array(sorted(loc, key=loc.get), dtype=np.intp)
        X = np.zeros((n_loc, dc, dc))

        if cb.ent_var.size:
            a, b, vals = cb.ent_i, cb.ent_j, cb.ent_val
            ubar = np.where(a == b, 0.5 * vals, vals)
            A1 = Wm[:dc, a]  # (dc, ns)
            B1 = Wm[:dc, b]
            OP = np.einsum("s,is,js->sij", ubar, A1, B1)
            lp = np.array([loc[int(v)] for v in cb.ent_var], dtype=np.intp)
            np.add.at(X, lp, OP + OP.transpose(0, 2, 1))
        for f in cb.families:
            U = Wm @ f.C
            nq = f.varmat.shape[1]
            cols = np.arange(f.col0, f.col0 + nq)
            OPf = np.einsum("it,jq->tqij", U[:dc, :], Wm[:dc, cols])
            OPf = OPf.reshape(-1, dc, dc)
            lp = np.array([loc[int(v)] for v in f.varmat.ravel()], dtype=np.intp)
            np.add.at(X, lp, OPf + OPf.transpose(0, 2, 1))

        SKX = np.matmul(Wdinv, np.matmul(X, Wdinv))
        gp = self.pos_of[loc_glob]
        M[np.ix_(gp, gp)] -= np.tensordot(X, SKX, axes=([1, 2], [1, 2]))
        return {"dc": dc, "v0": v0, "Wdinv": Wdinv, "X": X, "gp": gp}

    # -- solves ---------------------------------------------------------------

    def solve_kkt(self, E_list, rd):
        """Solve M dy = A*(E) - rd, with corner back-substitution."""
        g = np.zeros(self.num_vars)
        for cb, E in zip(self.compiled, E_list):
            cb.adjoint(E, g)
        full_rhs = g - rd

        r = full_rhs[self.oidx].copy()
        corner_rw = []
        for data in self.corner_data:
            dc, v0 = data["dc"], data["v0"]
            Trw = smat(full_rhs[v0 : v0 + svec_len(dc)], dc)
            TE = data["Wdinv"] @ Trw @ data["Wdinv"]
            r[data["gp"]] -= np.tensordot(data["X"], TE, axes=([1, 2], [0, 1]))
            corner_rw.append(Trw)

        sol = scipy.linalg.cho_solve(self.factor, r)
        for _ in range(2):
            resid = r - self.M_true @ sol
            sol = sol + scipy.linalg.cho_solve(self.factor, resid)

        dy = np.zeros(self.num_vars)
        dy[self.oidx] = sol
        for data, Trw in zip(self.corner_data, corner_rw):
            dc, v0 = data["dc"], data["v0"]
            Mwo_dy = np.tensordot(sol[data["gp"]], data["X"], axes=1)
            dW = data["Wdinv"] @ (Trw - Mwo_dy) @ data["Wdinv"]
            dy[v0 : v0 + svec_len(dc)] = svec(0.5 * (dW + dW.T))
        return dy


def _empty_solution(c, k, t0):
    if np.any(c != 0.0):
        return ConicSolution(
            status=SolverStatus.UNBOUNDED,
            y=np.zeros(k),
            objective=-np.inf,
            gap=0.0,
            iters=0,
            wall_time=time.perf_counter() - t0,
            message="no constraints restrain a nonzero objective",
        )
    return ConicSolution(
        status=SolverStatus.OPTIMAL,
        y=np.zeros(k),
        objective=0.0,
        gap=0.0,
        iters=0,
        wall_time=time.perf_counter() - t0,
        primal_res=0.0,
        dual_res=0.0,
    )


def solve(problem: LmiProblem, settings: SolverSettings | None = None) -> ConicSolution:
    """Minimize c.T y over the intersection of the problem's LMI blocks.

    Statuses are values, never exceptions: Infeasible/Unbounded come from
    residual-growth heuristics, NumericalError from factorization failure or
    stagnation, MaxIters from the iteration cap.
    """
    t0 = time.perf_counter()
    cfg = settings if settings is not None else SolverSettings()
    k = problem.num_vars
    c_raw = problem.objective
    # Large objective coefficients put the dual solution far from the unit
    # initialization and the first Newton directions overshoot the cone.
    # Solve with a scaled-down objective and map the reported value back.
    s_obj = max(1.0, float(np.max(np.abs(c_raw))) if k else 1.0)
    c = c_raw / s_obj
    compiled = problem.compiled()

    if not compiled:
        return _empty_solution(c, k, t0)

    touched = np.zeros(k, dtype=bool)
    for cb in compiled:
        touched[cb.vars_touched()] = True
    if np.any(c[~touched] != 0.0):
        return ConicSolution(
            status=SolverStatus.UNBOUNDED,
            y=np.zeros(k),
            objective=-np.inf,
            gap=0.0,
            iters=0,
            wall_time=time.perf_counter() - t0,
            message="objective moves along an unconstrained variable",
        )

    corner_mask = np.zeros(k, dtype=bool)
    for cb in compiled:
        if cb.corner is not None:
            corner_mask[cb.corner.var_start : cb.corner.var_start + svec_len(cb.corner.dc)] = True
    oidx = np.flatnonzero(touched & ~corner_mask)
    pos_of = np.full(k, -1, dtype=np.intp)
    pos_of[oidx] = np.arange(oidx.size)

    dims = np.array([cb.dim for cb in compiled])
    sum_dim = float(dims.sum())
    normF0 = np.array([1.0 + np.linalg.norm(cb.F0, "fro") for cb in compiled])
    cnorm = 1.0 + float(np.linalg.norm(c))

    y = np.zeros(k)
    S = [normF0[i] * np.eye(cb.dim) for i, cb in enumerate(compiled)]
    Z = [np.eye(cb.dim) for cb in compiled]

    best_merit = np.inf
    stall = 0
    tiny_steps = 0
    snap = None
    status = SolverStatus.MAX_ITERS
    message = ""
    it = 0
    obj = float(c @ y)
    gap = sum_dim
    pres = dres = np.inf

    feas_cap = max(_FEAS_CAP, cfg.tol_feas)
    gap_cap = max(_GAP_CAP, cfg.tol_gap)
    dual_cap = max(_DUAL_CAP, cfg.tol_feas)
    snap_pmerit = np.inf

    def snap_ok():
        return (
            snap is not None
            and snap["pres"] <= feas_cap
            and snap["relgap"] <= gap_cap
        )

    for it in range(1, cfg.max_iters + 1):
        Sy = [cb.apply(y) for cb in compiled]
        Rp = [S[i] - Sy[i] for i in range(len(compiled))]
        rd = c - problem.adjoint(Z)
        gap = float(sum(np.vdot(S[i], Z[i]) for i in range(len(compiled))))
        obj = float(c @ y)
        pres = max(
            float(np.linalg.norm(Rp[i], "fro")) / normF0[i] for i in range(len(compiled))
        )
        dres = float(np.linalg.norm(rd)) / cnorm
        # Convergence is judged in the problem's own scale: measuring the gap
        # against the scaled-down objective would relax it by s_obj.
        relgap = s_obj * gap / (1.0 + s_obj * abs(obj))
        merit = max(pres, dres, relgap)

        if cfg.verbose:
            logger.info(
                "iter %3d obj % .6e pres %.3e dres %.3e relgap %.3e",
                it, obj, pres, dres, relgap,
            )

        if not np.isfinite(merit):
            status, message = SolverStatus.NUMERICAL_ERROR, "non-finite iterate"
            break
        if pres <= cfg.tol_feas and dres <= cfg.tol_feas and relgap <= cfg.tol_gap:
            status = SolverStatus.OPTIMAL
            break
        if obj <= -1e10 and pres <= 1e-6:
            status, message = SolverStatus.UNBOUNDED, "objective diverges along feasible iterates"
            break
        zn = float(sum(np.linalg.norm(Zb, "fro") for Zb in Z))
        if zn >= 1e10:
            f0z = float(sum(np.vdot(cb.F0, Zb) for cb, Zb in zip(compiled, Z)))
            adj_ratio = float(np.linalg.norm(c - rd)) / zn
            if f0z < 0.0 and adj_ratio <= 1e-8:
                status, message = SolverStatus.INFEASIBLE, "dual improving ray detected"
                break
        # The returned iterate is the best-primal one: in the degenerate tail
        # the dual residual decays while (pres, relgap) keep polishing, so
        # dual quality gates insertion but never selects the snapshot.
        pmerit = max(pres, relgap)
        if dres <= dual_cap and pmerit < snap_pmerit:
            snap_pmerit = pmerit
            snap = {
                "y": y.copy(), "obj": obj, "gap": gap,
                "pres": pres, "dres": dres, "relgap": relgap,
            }
        if pmerit < 0.9 * best_merit:
            best_merit = pmerit
            stall = 0
        else:
            stall += 1
            if stall >= 4 and snap_ok():
                status = SolverStatus.OPTIMAL
                message = "converged to attainable precision"
                y, obj, gap = snap["y"], snap["obj"], snap["gap"]
                pres, dres = snap["pres"], snap["dres"]
                break
            if stall >= 12 and pmerit <= 1e-2 or stall >= 25:
                status, message = SolverStatus.NUMERICAL_ERROR, "stagnation"
                break

        try:
            scal = [_nt_scaling(S[i], Z[i]) for i in range(len(compiled))]
            fact = _Factorization(
                compiled, [sc[3] for sc in scal], oidx, pos_of, k
            )
        except _FactorError as exc:
            if snap_ok():
                status = SolverStatus.OPTIMAL
                message = f"attainable precision; next factorization failed: {exc}"
                y, obj, gap = snap["y"], snap["obj"], snap["gap"]
                pres, dres = snap["pres"], snap["dres"]
            else:
                status, message = SolverStatus.NUMERICAL_ERROR, str(exc)
            break

        mu = gap / sum_dim

        # Predictor: pure Newton step toward the boundary.
        E_aff = [
            -Z[i] + scal[i][3] @ Rp[i] @ scal[i][3] for i in range(len(compiled))
        ]
        dy_aff = fact.solve_kkt(E_aff, rd)
        # One common step length for (y, S) and Z: keeps both residual
        # recursions shrinking at the same rate, which separate step sizes
        # do not guarantee for infeasible starts.
        a_aff = 1.0
        ds_aff = []
        dz_aff = []
        for i, cb in enumerate(compiled):
            lam, R, Rinv, Wm = scal[i]
            dS = cb.apply_lin(dy_aff) - Rp[i]
            dst = Rinv @ dS @ Rinv.T
            dst = 0.5 * (dst + dst.T)
            dzt = -np.diag(lam) - dst
            ds_aff.append(dst)
            dz_aff.append(dzt)
            a_aff = min(a_aff, 0.9995 * _boundary_step(lam, dst))
            a_aff = min(a_aff, 0.9995 * _boundary_step(lam, dzt))

        mu_aff = 0.0
        for i in range(len(compiled)):
            lam = scal[i][0]
            Sa = np.diag(lam) + a_aff * ds_aff[i]
            Za = np.diag(lam) + a_aff * dz_aff[i]
            mu_aff += float(np.vdot(Sa, Za))
        mu_aff /= sum_dim
        sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)

        # Corrector with Mehrotra's second-order term.
        E_cor = []
        C_mats = []
        for i in range(len(compiled)):
            lam, R, Rinv, Wm = scal[i]
            cross = ds_aff[i] @ dz_aff[i]
            C_raw = sigma * mu * np.eye(lam.size) - np.diag(lam**2) - 0.5 * (cross + cross.T)
            C_mat = 2.0 * C_raw / np.add.outer(lam, lam)
            C_mats.append(C_mat)
            E_cor.append(Rinv.T @ C_mat @ Rinv + Wm @ Rp[i] @ Wm)
        dy = fact.solve_kkt(E_cor, rd)

        a_max = np.inf
        ds_list = []
        dz_list = []
        for i, cb in enumerate(compiled):
            lam, R, Rinv, Wm = scal[i]
            dS = cb.apply_lin(dy) - Rp[i]
            dst = Rinv @ dS @ Rinv.T
            dst = 0.5 * (dst + dst.T)
            dzt = C_mats[i] - dst
            ds_list.append(dS)
            dz_list.append(Rinv.T @ dzt @ Rinv)
            a_max = min(a_max, _boundary_step(lam, dst))
            a_max = min(a_max, _boundary_step(lam, dzt))

        gamma = 0.9 + 0.09 * min(1.0, a_aff)
        alpha = min(1.0, gamma * a_max)
        if cfg.verbose:
            logger.info(
                "        sigma %.4f a_aff %.5f alpha %.5f mu %.3e", sigma, a_aff, alpha, mu
            )

        if alpha < 1e-10:
            tiny_steps += 1
            if tiny_steps >= 2:
                if snap_ok():
                    status = SolverStatus.OPTIMAL
                    message = "attainable precision; step lengths collapsed"
                    y, obj, gap = snap["y"], snap["obj"], snap["gap"]
                    pres, dres = snap["pres"], snap["dres"]
                else:
                    status, message = SolverStatus.NUMERICAL_ERROR, "step lengths collapsed"
                break
        else:
            tiny_steps = 0

        y = y + alpha * dy
        for i in range(len(compiled)):
            S[i] = 0.5 * ((S[i] + alpha * ds_list[i]) + (S[i] + alpha * ds_list[i]).T)
            Z[i] = 0.5 * ((Z[i] + alpha * dz_list[i]) + (Z[i] + alpha * dz_list[i]).T)

    return ConicSolution(
        status=status,
        y=y,
        objective=s_obj * obj,
        gap=s_obj * gap,
        iters=it,
        wall_time=time.perf_counter() - t0,
        primal_res=pres,
        dual_res=dres,
        message=message,
    )
