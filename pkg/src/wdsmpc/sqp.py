"""Sequential quadratic programming with damped BFGS and an l1 merit.

Constraints of the horizon problem are affine in the decision vector, so
their linearization is exact and the Jacobians are computed once. Once a
feasible iterate is found every QP step keeps it feasible, and the
active-set QP is warm-started from the previous working set.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import objective as obj
from .qp import InfeasibleQP, active_set, find_feasible


@dataclass(frozen=True)
class SolverOptions:
    kkt_tol: float = 1e-6
    max_iter: int = 100
    hessian: str = "damped-BFGS"
    merit_penalty_init: float = 10.0
    ls_backtrack: float = 0.5
    ls_min_step: float = 1e-10
    armijo: float = 1e-4

    def __post_init__(self):
        if not self.kkt_tol > 0:
            raise ValueError("kkt_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.hessian != "damped-BFGS":
            raise ValueError(f"unsupported hessian update {self.hessian!r}")


@dataclass
class SolverResult:
    z_star: np.ndarray
    cost: float
    kkt_residual: float
    max_violation: float
    iterations: int
    wall_time: float
    status: str
    lam_eq: np.ndarray = None
    lam_in: np.ndarray = None
    merit_history: list = field(default_factory=list)
    schedule: object = None

    @property
    def converged(self):
        return self.status == "converged"


def _nonzero_rows(A, b, tol):
    norms = np.max(np.abs(A), axis=1) if A.size else np.zeros(A.shape[0])
    keep = norms > 0.0
    const_resid = b[~keep]
    return keep, const_resid


def initial_hessian(problem, z):
    """Objective Hessian at ``z`` with negative curvature clipped, plus a small shift.

    Safety and smoothness terms are quadratic, so their part is exact; the
    economic part is separable per step and pump.
    """
    w = problem.weights
    H = 2.0 * w.w2 * problem.X_map.T @ problem.X_map
    H += 2.0 * w.w3 * problem.DU_map.T @ problem.DU_map
    if w.w1:
        U = (problem.U_const + problem.U_map @ z).reshape(problem.layout.Np, -1)
        curv = obj.economic_curvature(problem.model, U, problem.tariff_forecast,
                                      problem.horizon.dt).ravel()
        curv = w.w1 * np.maximum(curv, 0.0)
        H += problem.U_map.T @ (curv[:, None] * problem.U_map)
    n = H.shape[0]
    scale = max(1.0, np.trace(H) / n)
    H += 1e-8 * scale * np.eye(n)
    return 0.5 * (H + H.T)


def kkt_measures(g, A_eq, b_eq, A_in, b_in, z, lam_eq, lam_in):
    """Return ``(stationarity, complementarity, max_violation)`` at ``z``."""
    r = g.copy()
    if A_eq.shape[0]:
        r += A_eq.T @ lam_eq
    if A_in.shape[0]:
        r += A_in.T @ lam_in
    c_in = A_in @ z - b_in
    c_eq = A_eq @ z - b_eq
    viol = max(np.max(np.abs(c_eq), initial=0.0), np.max(c_in, initial=0.0))
    # natural residual min(lam, slack): insensitive to the scale of the multipliers
    comp = np.max(np.abs(np.minimum(lam_in, -c_in)), initial=0.0)
    dual = np.max(-lam_in, initial=0.0)
    return max(np.max(np.abs(r), initial=0.0), dual), comp, viol


def solve(problem, options=None, z0=None, hessian0=None):
    """Solve an assembled horizon problem.

    ``problem`` must provide ``objective(z)``, ``gradient(z)``, ``zero()``
    and the affine constraint data ``A_eq, b_eq, A_in, b_in``.
    """
    options = options or SolverOptions()
    t_start = time.perf_counter()
    tol = options.kkt_tol
    z = problem.zero() if z0 is None else np.array(z0, dtype=float)
    if z.shape != problem.zero().shape:
        raise ValueError(f"z0 has shape {z.shape}, expected {problem.zero().shape}")
    schedule = getattr(problem, "schedule", None)

    A_eq, b_eq = problem.A_eq, problem.b_eq
    A_in, b_in = problem.A_in, problem.b_in
    keep_eq, const_eq = _nonzero_rows(A_eq, b_eq, tol)
    keep_in, const_in = _nonzero_rows(A_in, b_in, tol)

    def finish(status, z, lam_eq_r, lam_in_r, kkt, viol, it, merit):
        lam_eq = np.zeros(A_eq.shape[0])
        lam_eq[keep_eq] = lam_eq_r
        lam_in = np.zeros(A_in.shape[0])
        lam_in[keep_in] = lam_in_r
        return SolverResult(z, float(problem.objective(z)), float(kkt), float(viol), it,
                            time.perf_counter() - t_start, status, lam_eq, lam_in, merit,
                            schedule)

    Ae, be = A_eq[keep_eq], b_eq[keep_eq]
    Ai, bi = A_in[keep_in], b_in[keep_in]
    if np.max(np.abs(const_eq), initial=0.0) > tol or np.min(const_in, initial=0.0) < -tol:
        return finish("infeasible_qp", z, np.zeros(Ae.shape[0]), np.zeros(Ai.shape[0]),
                      np.inf, np.inf, 0, [])
    if hasattr(problem, "repair"):
        z = problem.repair(z)
    try:
        z = find_feasible(Ae, be, Ai, bi, z)
    except InfeasibleQP:
        return finish("infeasible_qp", z, np.zeros(Ae.shape[0]), np.zeros(Ai.shape[0]),
                      np.inf, np.inf, 0, [])

    if hessian0 is not None:
        B = np.array(hessian0, dtype=float)
    elif hasattr(problem, "X_map"):
        B = initial_hessian(problem, z)
    else:
        B = np.eye(z.size)

    rho = options.merit_penalty_init

    # round-off below this is not a violation; rho is large enough to let it
    # swamp the Armijo decrease near convergence otherwise
    feas_tol = 1e-9 * (1.0 + max(np.max(np.abs(be), initial=0.0), np.max(np.abs(bi), initial=0.0)))

    def violation(z):
        return (np.sum(np.maximum(np.abs(Ae @ z - be) - feas_tol, 0.0))
                + np.sum(np.maximum(Ai @ z - bi - feas_tol, 0.0)))

    evaluate = getattr(problem, "evaluate", None) or (
        lambda z: (problem.objective(z), problem.gradient(z)))
    f, g = evaluate(z)
    v = violation(z)
    working = []
    lam_eq = np.zeros(Ae.shape[0])
    lam_in = np.zeros(Ai.shape[0])
    history = [f + rho * v]
    status = "max_iter"
    kkt, viol = np.inf, np.inf
    it = 0
    for it in range(1, options.max_iter + 1):
        try:
            qp = active_set(B, g, Ae, be - Ae @ z, Ai, bi - Ai @ z, np.zeros(z.size), working)
        except InfeasibleQP:
            status = "infeasible_qp"
            break
        working = qp.working
        lam_eq, lam_in = qp.lam_eq, qp.lam_in
        p = qp.x
        stat, comp, viol = kkt_measures(g, Ae, be, Ai, bi, z, lam_eq, lam_in)
        kkt = max(stat, comp)
        if kkt <= tol and viol <= tol:
            status = "converged"
            break

        rho = max(rho, 1.1 * np.max(np.abs(np.concatenate([lam_eq, lam_in])), initial=0.0))
        phi0 = f + rho * v
        slope = g @ p - rho * v
        alpha = 1.0
        while True:
            z_try = z + alpha * p
            (f_try, g_try), v_try = evaluate(z_try), violation(z_try)
            phi_try = f_try + rho * v_try
            if phi_try <= phi0 + options.armijo * alpha * slope:
                break
            alpha *= options.ls_backtrack
            if alpha < options.ls_min_step:
                break
        if alpha < options.ls_min_step:
            status = "line_search_failure"
            break

        s = z_try - z
        y = g_try - g
        z, g, f, v = z_try, g_try, f_try, v_try
        history.append(phi_try)

        Bs = B @ s
        sBs = s @ Bs
        if sBs > 0.0:
            sy = s @ y
            if sy >= 0.2 * sBs:
                r = y
            else:
                theta = 0.8 * sBs / (sBs - sy)
                r = theta * y + (1.0 - theta) * Bs
            B = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / (s @ r)
            B = 0.5 * (B + B.T)

    if status == "max_iter":
        stat, comp, viol = kkt_measures(g, Ae, be, Ai, bi, z, lam_eq, lam_in)
        kkt = max(stat, comp)
    return finish(status, z, lam_eq, lam_in, kkt, viol, it, history)


def warm_start(previous, problem):
    """Shift the previous reduced moves one block forward, zero the slacks."""
    z0 = problem.zero()
    if previous is None or previous.schedule is None:
        return z0
    if previous.schedule != problem.schedule or previous.z_star.shape != z0.shape:
        return z0
    moves, _ = problem.layout.split(previous.z_star)
    # the appended block holds the input constant
    shifted = np.vstack([moves[1:], np.zeros_like(moves[-1:])])
    z0[problem.layout.move_slice] = shifted.ravel()
    return z0
