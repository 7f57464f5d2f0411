"""Stage costs and the weighted horizon objective.

Economic cost is pump electrical energy times the hourly tariff,
``gamma/1000 * psi * H(q) * q / eta(q)`` with q converted to m^3/s.
Safety cost is the squared deviation of tank levels from their reference
and smoothness cost is the squared input rate.
"""

from dataclasses import dataclass

import numpy as np

from .network import (pump_efficiency, pump_efficiency_derivative, pump_head,
                      pump_head_derivative)

SPECIFIC_WEIGHT = 9810.0  # N/m^3
POWER_CONSTANT = SPECIFIC_WEIGHT / 1000.0  # kW per (m^3/s * m)
SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class Weights:
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    w_slack: float = 1e4

    def violations(self):
        out = []
        for name in ("w1", "w2", "w3", "w_slack"):
            if getattr(self, name) < 0:
                out.append(f"weights: {name} must be >= 0")
        if not self.w_slack > max(self.w1, self.w2, self.w3):
            out.append("weights: w_slack must exceed w1, w2 and w3")
        return out


def _smooth_abs(p, eps):
    """``|p|`` (``eps == 0``), ``sqrt(p^2 + eps^2)`` (``eps > 0``) or ``p`` (``None``)."""
    if eps is None:
        return p, np.ones_like(p)
    if eps == 0.0:
        return np.abs(p), np.sign(p)
    s = np.sqrt(p * p + eps * eps)
    return s, p / s


def pump_power(curve, q):
    """Electrical power in kW drawn by a pump delivering ``q`` m^3/hr."""
    return POWER_CONSTANT * pump_head(curve, q) * (q / SECONDS_PER_HOUR) / pump_efficiency(curve, q)


def economic_stage_cost(model, u, tariff, dt=1.0, abs_eps=0.0):
    """Energy cost of one step, summed over the pump channels."""
    u = np.asarray(u, dtype=float)
    total = 0.0
    for p in model.pumps:
        val, _ = _smooth_abs(tariff * pump_power(p, u[p.channel]), abs_eps)
        total += val
    return float(total * dt)


def safety_stage_cost(x, x_ref):
    r = np.asarray(x, dtype=float) - np.asarray(x_ref, dtype=float)
    return float(r @ r)


def smoothness_stage_cost(du):
    du = np.asarray(du, dtype=float)
    return float(du @ du)


def economic_costs(model, U, tariff, dt=1.0, abs_eps=0.0):
    """Per-step economic costs over a horizon and their derivative w.r.t. ``U``.

    ``abs_eps=None`` drops the absolute value. Pump power is nonnegative
    whenever pump flows are, so on the feasible set this is the same cost
    without the kink at zero flow, where idle pumps sit.

    Returns ``(costs, dcost_dU)`` with shapes ``(Np,)`` and ``(Np, n_u)``.
    """
    U = np.asarray(U, dtype=float)
    tariff = np.broadcast_to(np.asarray(tariff, dtype=float), U.shape[:1])
    ch, (a_h, b_h, c_h), (a_e, b_e, c_e), floor = model.pump_table
    q = U[:, ch]
    H = (a_h * q + b_h) * q + c_h
    raw = (a_e * q + b_e) * q + c_e
    inside = (raw > floor) & (raw < 1.0)
    eta = np.where(inside, raw, np.maximum(np.minimum(raw, 1.0), floor))
    deta = inside * (2.0 * a_e * q + b_e)
    scale = (POWER_CONSTANT * dt / SECONDS_PER_HOUR) * tariff[:, None]
    Hq_eta = H * q / eta
    power = scale * Hq_eta
    dpower = scale * ((2.0 * a_h * q + b_h) * q + H - Hq_eta * deta) / eta
    val, sgn = _smooth_abs(power, abs_eps)
    grad = np.zeros_like(U)
    grad[:, ch] = sgn * dpower
    return val.sum(axis=1), grad


def economic_curvature(model, U, tariff, dt=1.0):
    """Second derivative of each pump's energy cost w.r.t. its own flow.

    Shape ``(Np, n_u)``; zero on non-pump channels. The cost is separable
    across steps and channels, so this is the full Hessian diagonal.
    """
    U = np.asarray(U, dtype=float)
    tariff = np.asarray(tariff, dtype=float)
    curv = np.zeros_like(U)
    for p in model.pumps:
        q = U[:, p.channel]
        a_h = p.head_coeffs[0]
        H, dH = pump_head(p, q), pump_head_derivative(p, q)
        eta, deta = pump_efficiency(p, q), pump_efficiency_derivative(p, q)
        d2eta = np.where(deta != 0.0, 2.0 * p.eff_coeffs[0], 0.0)
        num, dnum, d2num = H * q, H + dH * q, 2.0 * dH + 2.0 * a_h * q
        first = (dnum * eta - num * deta) / eta ** 2
        second = (d2num * eta - num * d2eta) / eta ** 2 - 2.0 * deta * first / eta
        curv[:, p.channel] += POWER_CONSTANT * tariff * dt / SECONDS_PER_HOUR * second
    return curv


def stage_costs(model, tariff, x_ref, X, U, DU, dt=1.0, abs_eps=0.0):
    """Unweighted per-step ``(economic, safety, smoothness)`` arrays.

    ``X`` is the ``(Np + 1, n_x)`` trajectory; step ``j`` is charged for the
    level ``X[j + 1]`` reached after applying ``U[j]``.
    """
    econ, _ = economic_costs(model, U, tariff, dt, abs_eps)
    dev = np.asarray(X, dtype=float)[1:] - np.asarray(x_ref, dtype=float)
    safe = np.sum(dev * dev, axis=1)
    DU = np.asarray(DU, dtype=float)
    smooth = np.sum(DU * DU, axis=1)
    return econ, safe, smooth


def total_cost(model, weights, tariff, x_ref, X, U, DU, xi, dt=1.0, abs_eps=0.0):
    econ, safe, smooth = stage_costs(model, tariff, x_ref, X, U, DU, dt, abs_eps)
    return float(weights.w1 * econ.sum() + weights.w2 * safe.sum()
                 + weights.w3 * smooth.sum() + weights.w_slack * np.sum(xi))


def cost_gradient(z, problem):
    """Gradient of the problem objective with respect to the decision vector.

    Uses the problem's affine decision-to-trajectory maps, which are exact
    because the tank dynamics and the blocking expansion are linear.
    """
    z = np.asarray(z, dtype=float)
    w = problem.weights
    lay = problem.layout
    U = (problem.U_const + problem.U_map @ z).reshape(lay.Np, -1)
    Xf = (problem.X_const + problem.X_map @ z).reshape(lay.Np, -1)
    DU = problem.DU_const + problem.DU_map @ z

    g = np.zeros_like(z)
    if w.w1:
        _, dU = economic_costs(problem.model, U, problem.tariff_forecast,
                               problem.horizon.dt, problem.abs_eps)
        g += w.w1 * (problem.U_map.T @ dU.ravel())
    if w.w2:
        dev = (Xf - problem.model.level_ref).ravel()
        g += 2.0 * w.w2 * (problem.X_map.T @ dev)
    if w.w3:
        g += 2.0 * w.w3 * (problem.DU_map.T @ DU)
    g[lay.slack_slice] += w.w_slack
    return g
