"""Dense primal active-set solver for convex quadratic programs.

Solves::

    min  0.5 x'Hx + g'x
    s.t. A_eq x  = b_eq
         A_in x <= b_in

with ``H`` symmetric positive definite. Each iteration solves the KKT
system of the current working set. An infeasible starting point is first
repaired with a phase-1 problem that minimizes the largest violation.
"""

from dataclasses import dataclass, field

import numpy as np


class InfeasibleQP(RuntimeError):
    pass


@dataclass
class QPResult:
    x: np.ndarray
    lam_eq: np.ndarray
    lam_in: np.ndarray
    working: list
    iterations: int
    status: str = "optimal"
    history: list = field(default_factory=list)


def _empty(n):
    return np.zeros((0, n)), np.zeros(0)


def _kkt_solve(H, rhs, A):
    n, m = H.shape[0], A.shape[0]
    if m == 0:
        K, r = H, rhs
    else:
        K = np.empty((n + m, n + m))
        K[:n, :n] = H
        K[:n, n:] = A.T
        K[n:, :n] = A
        K[n:, n:] = 0.0
        r = np.zeros(n + m)
        r[:n] = rhs
    try:
        sol = np.linalg.solve(K, r)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, r, rcond=None)[0]
    return sol[:n], sol[n:]


def _independent_rows(A_fixed, A_cand, cand_idx, tol=1e-9):
    """Greedily keep candidate rows that are independent of the kept set."""
    n = A_cand.shape[1]
    stacked = np.vstack([A_fixed, A_cand])
    if stacked.shape[0] <= n:
        sv = np.linalg.svd(stacked, compute_uv=False)
        if sv[-1] > tol * max(sv[0], 1.0):
            return list(cand_idx)
    Q = np.zeros((0, n))

    def residual(row):
        r = row.copy()
        for _ in range(2):
            r -= Q.T @ (Q @ r)
        return r

    for row in A_fixed:
        r = residual(row)
        nr = np.linalg.norm(r)
        if nr > tol * max(np.linalg.norm(row), 1.0):
            Q = np.vstack([Q, r / nr])
    keep = []
    for i, row in zip(cand_idx, A_cand):
        r = residual(row)
        nr = np.linalg.norm(r)
        if nr > tol * max(np.linalg.norm(row), 1.0):
            keep.append(i)
            Q = np.vstack([Q, r / nr])
    return keep


def active_set(H, g, A_eq, b_eq, A_in, b_in, x0, working=(), max_iter=None, tol=1e-9):
    """Primal active-set iterations from a feasible ``x0``.

    ``working`` seeds the working set with inequality indices; seeds that
    are not active at ``x0`` or are linearly dependent are discarded.
    Ties (equal multipliers or equal step ratios) break toward the lowest
    constraint index.
    """
    n = H.shape[0]
    m_in = A_in.shape[0]
    n_eq = A_eq.shape[0]
    x = np.array(x0, dtype=float)
    if max_iter is None:
        max_iter = 10 * (n + m_in) + 50
    slack = b_in - A_in @ x
    scale = 1.0 + np.abs(b_in)
    seeds = sorted(i for i in set(working) if abs(slack[i]) <= 1e-8 * scale[i])
    W = _independent_rows(A_eq, A_in[seeds], seeds) if seeds else []
    A_all = np.vstack([A_eq, A_in])
    eq_rows = list(range(n_eq))

    history = []
    full_step = False
    for it in range(1, max_iter + 1):
        A_W = A_all[eq_rows + [n_eq + i for i in W]]
        p, lam = _kkt_solve(H, -(H @ x + g), A_W)
        lam_w = lam[n_eq:]
        # after an unblocked full step x already minimizes over the working set;
        # what remains of p is round-off
        if full_step or (n == 0 or abs(p).max() <= tol * (1.0 + abs(x).max())):
            full_step = False
            if lam_w.size == 0 or lam_w.min() >= -tol * (1.0 + abs(lam_w).max()):
                lam_in = np.zeros(m_in)
                lam_in[W] = np.maximum(lam_w, 0.0)
                return QPResult(x, lam[:n_eq], lam_in, list(W), it, "optimal", history)
            drop = int(np.argmin(lam_w))
            history.append(("drop", W[drop]))
            W = W[:drop] + W[drop + 1:]
            continue
        Ap = A_in @ p
        alpha, block = 1.0, None
        if m_in:
            mask = Ap > tol * (1.0 + abs(Ap).max())
            mask[W] = False
            cand = np.flatnonzero(mask)
            if cand.size:
                ratios = np.maximum(slack[cand], 0.0) / Ap[cand]
                j = int(np.argmin(ratios))
                if ratios[j] < 1.0:
                    alpha, block = ratios[j], int(cand[j])
        x = x + alpha * p
        slack = slack - alpha * Ap
        full_step = block is None
        if block is not None:
            history.append(("add", block))
            W = sorted(W + [block])
    lam_in = np.zeros(m_in)
    return QPResult(x, np.zeros(n_eq), lam_in, list(W), max_iter, "max_iter", history)


def find_feasible(A_eq, b_eq, A_in, b_in, x0, tol=1e-9):
    """Return a point satisfying the constraints, starting from ``x0``.

    Raises :class:`InfeasibleQP` if no such point exists.
    """
    n = len(x0)
    x = np.array(x0, dtype=float)
    if A_eq.shape[0]:
        r = b_eq - A_eq @ x
        x = x + np.linalg.lstsq(A_eq, r, rcond=None)[0]
        if np.max(np.abs(b_eq - A_eq @ x)) > tol * (1.0 + np.max(np.abs(b_eq))):
            raise InfeasibleQP("equality constraints are inconsistent")
    if A_in.shape[0] == 0:
        return x
    viol = np.max(A_in @ x - b_in)
    if viol <= 0.0:
        return x

    # phase 1 in (x, t): min M t + 0.5 (|x - x0|^2 + t^2), A_in x - t <= b_in, t >= 0
    M = 1e6 * (1.0 + np.max(np.abs(b_in)))
    H1 = np.eye(n + 1)
    g1 = np.concatenate([-x, [M]])
    Aeq1 = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1))])
    Ain1 = np.vstack([np.hstack([A_in, -np.ones((A_in.shape[0], 1))]),
                      np.concatenate([np.zeros(n), [-1.0]])[None, :]])
    bin1 = np.concatenate([b_in, [0.0]])
    start = np.concatenate([x, [viol]])
    res = active_set(H1, g1, Aeq1, b_eq, Ain1, bin1, start, tol=tol)
    t = res.x[-1]
    if res.status != "optimal" or t > 1e-7 * (1.0 + np.max(np.abs(b_in))):
        raise InfeasibleQP(f"inequality constraints cannot be satisfied (residual {t:.3g})")
    x = res.x[:n]
    # phase 1 stops with t at round-off level; project onto its working set
    # so the active constraints hold exactly
    rows = [i for i in res.working if i < A_in.shape[0]]
    A_act = np.vstack([A_eq, A_in[rows]])
    r = np.concatenate([b_eq, b_in[rows]]) - A_act @ x
    if A_act.shape[0]:
        x_pol = x + np.linalg.lstsq(A_act, r, rcond=None)[0]
        if np.max(A_in @ x_pol - b_in) <= max(np.max(A_in @ x - b_in), 0.0):
            x = x_pol
    return x


def solve_qp(H, g, A_eq=None, b_eq=None, A_in=None, b_in=None, x0=None,
             working=(), max_iter=None, tol=1e-9):
    """Solve a convex QP; see the module docstring for the problem form.

    Returns a :class:`QPResult`. Raises :class:`InfeasibleQP` when the
    constraint set is empty.
    """
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = H.shape[0]
    if A_eq is None:
        A_eq, b_eq = _empty(n)
    if A_in is None:
        A_in, b_in = _empty(n)
    A_eq, b_eq = np.atleast_2d(np.asarray(A_eq, float)).reshape(-1, n), np.asarray(b_eq, float)
    A_in, b_in = np.atleast_2d(np.asarray(A_in, float)).reshape(-1, n), np.asarray(b_in, float)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    x = find_feasible(A_eq, b_eq, A_in, b_in, x0, tol)
    return active_set(H, g, A_eq, b_eq, A_in, b_in, x, working, max_iter, tol)
