"""Independent reference solutions used by the solver tests."""

import numpy as np


def quadratic_optimum(p, w2, w3):
    """Unconstrained minimizer of the tracking plus smoothness terms, by normal equations."""
    mv = p.layout.move_slice
    Xm, Dm = p.X_map[:, mv], p.DU_map[:, mv]
    H = 2 * w2 * (Xm.T @ Xm) + 2 * w3 * (Dm.T @ Dm)
    rhs = -(2 * w2 * Xm.T @ (p.X_const - p.X_ref) + 2 * w3 * Dm.T @ p.DU_const)
    z = p.zero()
    z[mv] = np.linalg.solve(H, rhs)
    return z


def grid_optimum(s, n=201):
    """Brute force over both hourly pump flows of the two-step toy, slacks set minimal."""
    m, tank, pump = s.model, s.model.tanks[0], s.model.pumps[0]
    q = np.linspace(0.0, m.bounds.flow_max[0], n)
    q1, q2 = np.meshgrid(q, q, indexing="ij")
    d = s.demand[:2, 0]
    x1 = tank.level_init + (q1 - d[0]) * s.dt / tank.area
    x2 = x1 + (q2 - d[1]) * s.dt / tank.area
    lo = np.maximum(np.maximum(tank.level_min - x1, tank.level_min - x2), 0.0)
    hi = np.maximum(np.maximum(x1 - tank.level_max, x2 - tank.level_max), 0.0)

    def power(qq):
        a, b, c = pump.head_coeffs
        ea, eb, ec = pump.eff_coeffs
        eta = np.clip(ea * qq * qq + eb * qq + ec, pump.eta_floor, 1.0)
        return 9810.0 * (qq / 3600.0) * (a * qq * qq + b * qq + c) / (1000.0 * eta)

    w = s.weights
    cost = (w.w1 * s.dt * (s.tariff[0] * power(q1) + s.tariff[1] * power(q2))
            + w.w2 * ((x1 - tank.level_ref) ** 2 + (x2 - tank.level_ref) ** 2)
            + w.w3 * ((q1 - s.u_prev[0]) ** 2 + (q2 - q1) ** 2)
            + w.w_slack * (lo + hi))
    i = np.unravel_index(np.argmin(cost), cost.shape)
    return cost[i], (q1[i], q2[i])
