"""One receding-horizon instance frozen into a finite-dimensional NLP.

Single shooting: the level trajectory is eliminated through the rollout,
so the decision vector only holds the reduced input-rate moves and the
four level slacks.

Node balances ``E u + Lambda d = 0`` are enforced by construction. Inputs
are written as ``u = u_dem(d) + N v`` where ``u_dem`` is the minimum-norm
demand-consistent flow and the columns of ``N`` span the null space of
``E``. The rate of change of ``v`` is what gets blocked. Channels that do
not appear in any node balance keep their own coordinate, so pump rates
are blocked per channel exactly as in plain delta-input blocking.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from . import objective as obj
from .blocking import binary_blocking_matrix, interpolation_matrix
from .integrator import Horizon, rollout
from .network import node_residual


class HorizonError(ValueError):
    pass


@dataclass(frozen=True)
class DecisionLayout:
    Np: int
    Nc: int
    n_free: int
    n_x: int

    @property
    def n_moves(self):
        return self.Nc * self.n_free

    @property
    def n_slack(self):
        return 2 * self.n_x

    @property
    def size(self):
        return self.n_moves + self.n_slack

    @property
    def move_slice(self):
        return slice(0, self.n_moves)

    @property
    def slack_slice(self):
        return slice(self.n_moves, self.size)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[self.move_slice].reshape(self.Nc, self.n_free), z[self.slack_slice]


def input_parametrization(model):
    """Return ``(N, P)``: free-input basis and demand-to-input map.

    ``u = P d + N v`` satisfies every node balance for any ``v`` whenever
    the demand is consistent with ``E``.
    """
    E, Lam = model.node_input_map, model.node_disturbance_map
    n_u = model.n_u
    if E.shape[0] == 0 or not np.any(E):
        return np.eye(n_u), np.zeros((n_u, model.n_d))
    touched = np.flatnonzero(np.any(E != 0, axis=0))
    N_parts = []
    for i in range(n_u):
        if i not in touched:
            col = np.zeros(n_u)
            col[i] = 1.0
            N_parts.append(col[:, None])
    sub = null_space(E[:, touched])
    if sub.size:
        block = np.zeros((n_u, sub.shape[1]))
        block[touched] = sub
        N_parts.append(block)
    N = np.hstack(N_parts) if N_parts else np.zeros((n_u, 0))
    P = -np.linalg.pinv(E) @ Lam
    return N, P


@dataclass(frozen=True, eq=False)
class OcpProblem:
    model: object
    horizon: Horizon
    schedule: object
    expansion: object
    weights: obj.Weights
    demand_forecast: np.ndarray
    tariff_forecast: np.ndarray
    x0: np.ndarray
    u_prev: np.ndarray
    k: int
    layout: DecisionLayout
    free_basis: np.ndarray
    demand_map: np.ndarray
    U_const: np.ndarray
    U_map: np.ndarray
    DU_const: np.ndarray
    DU_map: np.ndarray
    X_const: np.ndarray
    X_map: np.ndarray
    X_ref: np.ndarray
    A_in: np.ndarray
    b_in: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    abs_eps: object = None

    @property
    def v_prev(self):
        return self.free_basis.T @ self.u_prev

    def evaluate(self, z):
        """Objective value and gradient at ``z`` in one pass over the affine maps."""
        z = np.asarray(z, dtype=float)
        lay, w = self.layout, self.weights
        U = (self.U_const + self.U_map @ z).reshape(lay.Np, -1)
        dev = self.X_const + self.X_map @ z - self.X_ref
        DU = self.DU_const + self.DU_map @ z
        econ, dU = obj.economic_costs(self.model, U, self.tariff_forecast,
                                      self.horizon.dt, self.abs_eps)
        xi = z[lay.slack_slice]
        f = w.w1 * econ.sum() + w.w2 * (dev @ dev) + w.w3 * (DU @ DU) + w.w_slack * xi.sum()
        g = (w.w1 * (dU.ravel() @ self.U_map) + (2.0 * w.w2 * dev) @ self.X_map
             + (2.0 * w.w3 * DU) @ self.DU_map)
        g[lay.slack_slice] += w.w_slack
        return float(f), g

    def objective(self, z):
        return self.evaluate(z)[0]

    def gradient(self, z):
        return self.evaluate(z)[1]

    def zero(self):
        return np.zeros(self.layout.size)

    def repair(self, z):
        """Copy of ``z`` with the slacks raised just enough to cover level violations."""
        z = np.array(z, dtype=float)
        lay = self.layout
        n_x = lay.n_x
        X = (self.X_const + self.X_map @ z).reshape(lay.Np, n_x)
        lo = np.max(self.model.level_min - X, axis=0)
        hi = np.max(X - self.model.level_max, axis=0)
        xi = z[lay.slack_slice]
        z[lay.slack_slice] = np.maximum(xi, np.concatenate([lo, hi]))
        return z


def _lower_ones(n):
    return np.tril(np.ones((n, n)))


def assemble(scenario, schedule, x0, u_prev, k, interpolate=True, abs_eps=None):
    """Freeze the horizon starting at step ``k`` into an :class:`OcpProblem`."""
    model = scenario.model
    Np = schedule.Np
    horizon = Horizon(Np, scenario.dt)
    n_series = min(len(scenario.demand), len(scenario.tariff))
    if k < 0 or k + Np > n_series:
        raise HorizonError(
            f"horizon [{k}, {k + Np}) exceeds the {n_series}-step forecast series")
    D = np.array(scenario.demand[k:k + Np], dtype=float)
    psi = np.array(scenario.tariff[k:k + Np], dtype=float)
    x0 = np.array(x0, dtype=float)
    u_prev = np.array(u_prev, dtype=float)
    expansion = interpolation_matrix(schedule) if interpolate else binary_blocking_matrix(schedule)

    N, P = input_parametrization(model)
    n_u, n_x, n_free = model.n_u, model.n_x, N.shape[1]
    layout = DecisionLayout(Np, schedule.Nc, n_free, n_x)
    nz = layout.size
    L = _lower_ones(Np)
    W = expansion.W

    # U = U_part + 1 (x) N v_prev + (L W (x) N) r
    U_part = D @ P.T
    U_const = (U_part + N @ (N.T @ u_prev)).ravel()
    U_map = np.zeros((Np * n_u, nz))
    U_map[:, layout.move_slice] = np.kron(L @ W, N)

    diff = np.eye(Np) - np.eye(Np, k=-1)
    Dop = np.kron(diff, np.eye(n_u))
    DU_const = Dop @ U_const
    DU_const[:n_u] -= u_prev
    DU_map = Dop @ U_map

    dt = scenario.dt
    Bu = model.tank_input_map / model.areas[:, None]
    Bd = model.tank_disturbance_map / model.areas[:, None]
    cum_u = dt * np.kron(L, Bu)
    X_const = np.tile(x0, Np) + cum_u @ U_const + dt * np.kron(L, Bd) @ D.ravel()
    X_map = cum_u @ U_map

    # inequalities A_in z <= b_in
    fmin = np.tile(model.bounds.flow_min, Np)
    fmax = np.tile(model.bounds.flow_max, Np)
    hmin = np.tile(model.level_min, Np)
    hmax = np.tile(model.level_max, Np)
    slack_lo = np.zeros((Np * n_x, nz))
    slack_hi = np.zeros((Np * n_x, nz))
    eye_x = np.eye(n_x)
    s0 = layout.n_moves
    slack_lo[:, s0:s0 + n_x] = np.tile(eye_x, (Np, 1))
    slack_hi[:, s0 + n_x:s0 + 2 * n_x] = np.tile(eye_x, (Np, 1))
    slack_nonneg = np.zeros((layout.n_slack, nz))
    slack_nonneg[:, layout.slack_slice] = -np.eye(layout.n_slack)
    A_in = np.vstack([-U_map, U_map, -X_map - slack_lo, X_map - slack_hi, slack_nonneg])
    b_in = np.concatenate([U_const - fmin, fmax - U_const,
                           X_const - hmin, hmax - X_const, np.zeros(layout.n_slack)])

    # equalities A_eq z = b_eq (node balances at every step)
    E, Lam = model.node_input_map, model.node_disturbance_map
    A_eq = np.kron(np.eye(Np), E) @ U_map
    b_eq = -(np.kron(np.eye(Np), E) @ U_const + (D @ Lam.T).ravel())
    A_eq[np.abs(A_eq) < 1e-13] = 0.0

    arrays = dict(U_const=U_const, U_map=U_map, DU_const=DU_const, DU_map=DU_map,
                  X_const=X_const, X_map=X_map, A_in=A_in, b_in=b_in,
                  A_eq=A_eq, b_eq=b_eq, X_ref=np.tile(model.level_ref, Np), demand_forecast=D, tariff_forecast=psi,
                  x0=x0, u_prev=u_prev, free_basis=N, demand_map=P)
    for a in arrays.values():
        a.setflags(write=False)
    return OcpProblem(model=model, horizon=horizon, schedule=schedule, expansion=expansion,
                      weights=scenario.weights, k=int(k), layout=layout, abs_eps=abs_eps,
                      **arrays)


def decode(z, problem):
    """Map a decision vector to ``(DU, U, X, xi)`` trajectories.

    ``X`` comes from the RK4 rollout, not from the affine maps.
    """
    lay = problem.layout
    moves, xi = lay.split(z)
    N = problem.free_basis
    DV = problem.expansion.W @ moves
    V = problem.v_prev + np.cumsum(DV, axis=0)
    U = problem.demand_forecast @ problem.demand_map.T + V @ N.T
    DU = np.diff(U, axis=0, prepend=problem.u_prev[None, :])
    X = rollout(problem.model, problem.x0, U, problem.demand_forecast, problem.horizon)
    return DU, U, X, xi.copy()


def encode(U, problem, xi=None):
    """Inverse of :func:`decode` for unblocked schedules.

    ``U`` must satisfy the node balances; its demand-driven component is
    discarded.
    """
    if not problem.schedule.is_unblocked:
        raise ValueError("encode is only defined for unblocked schedules")
    N = problem.free_basis
    V = np.asarray(U, dtype=float) @ N
    DV = np.diff(V, axis=0, prepend=problem.v_prev[None, :])
    slack = np.zeros(problem.layout.n_slack) if xi is None else np.asarray(xi, dtype=float)
    return np.concatenate([DV.ravel(), slack])


def constraint_eval(z, problem):
    """Return ``(eq, ineq)`` residual vectors; feasible means eq == 0, ineq <= 0.

    Inequality order: flow lower bounds, flow upper bounds, level lower
    bounds, level upper bounds (each stacked step-major), then ``-xi``.
    """
    DU, U, X, xi = decode(z, problem)
    m = problem.model
    n_x = m.n_x
    eq = np.concatenate([node_residual(m, U[j], problem.demand_forecast[j])
                         for j in range(problem.layout.Np)])
    lo, hi = xi[:n_x], xi[n_x:]
    ineq = np.concatenate([
        (m.bounds.flow_min - U).ravel(),
        (U - m.bounds.flow_max).ravel(),
        ((m.level_min - lo) - X[1:]).ravel(),
        (X[1:] - (m.level_max + hi)).ravel(),
        -xi,
    ])
    return eq, ineq


def trajectory_cost(problem, z, abs_eps="problem"):
    """Objective evaluated along the decoded (rollout) trajectories."""
    DU, U, X, xi = decode(z, problem)
    eps = problem.abs_eps if abs_eps == "problem" else abs_eps
    return obj.total_cost(problem.model, problem.weights, problem.tariff_forecast,
                          problem.model.level_ref, X, U, DU, xi, problem.horizon.dt, eps)
