"""Receding-horizon closed loop and blocked-versus-full comparison."""

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .blocking import schedule_from_lengths, unblocked_schedule
from .integrator import model_rhs, rk4_step
from .network import node_residual
from .objective import economic_stage_cost, safety_stage_cost, smoothness_stage_cost
from .ocp import assemble, decode
from .scenario import format_float
from .sqp import SolverOptions, solve, warm_start

log = logging.getLogger(__name__)

MAPE_ZERO_GUARD = 1e-9
LEVEL_TOL = 1e-6


class SimulationError(RuntimeError):
    def __init__(self, step, message):
        super().__init__(f"step {step}: {message}")
        self.step = step


class ComparisonError(ValueError):
    pass


@dataclass
class SimulationLog:
    """Per-step closed-loop record.

    Row ``k`` holds the level ``x[k]`` measured before acting, the applied
    input ``u[k]``, its rate ``du[k] = u[k] - u[k-1]`` and the true demand
    ``d[k]``. Stage costs are charged for the applied step: economic on
    ``u[k]`` at tariff ``k``, safety on the level reached ``x[k+1]``,
    smoothness on ``du[k]``.
    """

    mode: str
    lengths: tuple
    scenario_hash: str
    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    d: np.ndarray
    cost_econ: np.ndarray
    cost_safe: np.ndarray
    cost_smooth: np.ndarray
    xi: np.ndarray
    solve_time: np.ndarray
    status: list
    iterations: np.ndarray
    node_residual: np.ndarray
    x_final: np.ndarray
    input_names: tuple = ()

    @property
    def T(self):
        return len(self.status)

    @property
    def flagged_steps(self):
        return [k for k, s in enumerate(self.status) if s != "converged"]

    def header(self):
        n_x, n_d, n_xi = self.x.shape[1], self.d.shape[1], self.xi.shape[1]
        names = self.input_names or tuple(f"u{i + 1}" for i in range(self.u.shape[1]))
        return (["k"] + [f"x{i + 1}" for i in range(n_x)] + list(names)
                + [f"d{i + 1}" for i in range(n_d)]
                + ["cost_econ", "cost_safe", "cost_smooth"]
                + [f"xi{i + 1}" for i in range(n_xi)] + ["solve_time", "status"])

    def rows(self):
        for k in range(self.T):
            yield ([k] + [format_float(v) for v in self.x[k]]
                   + [format_float(v) for v in self.u[k]]
                   + [format_float(v) for v in self.d[k]]
                   + [format_float(self.cost_econ[k]), format_float(self.cost_safe[k]),
                      format_float(self.cost_smooth[k])]
                   + [format_float(v) for v in self.xi[k]]
                   + [format_float(self.solve_time[k]), self.status[k]])

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows(self.rows())


def run_closed_loop(scenario, lengths=None, T=72, options=None, interpolate=True,
                    warm=True, progress=None):
    """Simulate the plant under receding-horizon control for ``T`` steps.

    ``lengths=None`` gives the full-degree-of-freedom controller; otherwise
    the input rates are blocked with the given block lengths.
    """
    options = options or SolverOptions()
    Np = scenario.Np
    schedule = unblocked_schedule(Np) if lengths is None else schedule_from_lengths(lengths, Np)
    mode = "full" if lengths is None else "idib"
    if scenario.n_steps < T + Np - 1:
        raise SimulationError(0, f"series of {scenario.n_steps} steps cannot cover "
                                 f"T={T} with Np={Np}")
    m = scenario.model
    rhs = model_rhs(m)
    n_x, n_u, n_d = m.n_x, m.n_u, m.n_d
    rec = dict(x=np.zeros((T, n_x)), u=np.zeros((T, n_u)), du=np.zeros((T, n_u)),
               d=np.zeros((T, n_d)), cost_econ=np.zeros(T), cost_safe=np.zeros(T),
               cost_smooth=np.zeros(T), xi=np.zeros((T, 2 * n_x)), solve_time=np.zeros(T),
               iterations=np.zeros(T, dtype=int), node_residual=np.zeros(T))
    status = []
    x = np.array(scenario.x0, dtype=float)
    u_prev = np.array(scenario.u_prev, dtype=float)
    previous = None
    for k in range(T):
        problem = assemble(scenario, schedule, x, u_prev, k, interpolate=interpolate)
        z0 = warm_start(previous, problem) if warm else None
        t0 = time.perf_counter()
        result = solve(problem, options, z0)
        elapsed = time.perf_counter() - t0
        if result.status == "infeasible_qp":
            raise SimulationError(k, "horizon problem is infeasible")
        if not result.converged:
            log.warning("step %d: solver stopped with status %s (kkt %.3g)",
                        k, result.status, result.kkt_residual)
        DU, U, X, xi = decode(result.z_star, problem)
        xi = np.maximum(xi, 0.0)  # QP round-off can leave -1e-14
        u = U[0]
        d = np.asarray(scenario.demand[k], dtype=float)
        x_next = rk4_step(rhs, x, u, d, scenario.dt)
        lo, hi = xi[:n_x], xi[n_x:]
        if np.any(x_next < m.level_min - lo - LEVEL_TOL) or np.any(x_next > m.level_max + hi + LEVEL_TOL):
            raise SimulationError(k, f"plant level {x_next} left the slack-relaxed bounds")

        rec["x"][k], rec["u"][k], rec["du"][k], rec["d"][k] = x, u, u - u_prev, d
        rec["cost_econ"][k] = economic_stage_cost(m, u, scenario.tariff[k], scenario.dt)
        rec["cost_safe"][k] = safety_stage_cost(x_next, m.level_ref)
        rec["cost_smooth"][k] = smoothness_stage_cost(u - u_prev)
        rec["xi"][k] = xi
        rec["solve_time"][k] = elapsed
        rec["iterations"][k] = result.iterations
        rec["node_residual"][k] = np.max(np.abs(node_residual(m, u, d)), initial=0.0)
        status.append(result.status)
        if progress:
            progress(k, result)

        x, u_prev, previous = x_next, u.copy(), result

    return SimulationLog(mode=mode, lengths=schedule.lengths,
                         scenario_hash=scenario.fingerprint(), status=status,
                         x_final=x, input_names=m.input_names, **rec)


def mape_details(reference, test, guard=MAPE_ZERO_GUARD):
    """MAPE in percent and the number of excluded near-zero reference samples.

    Returns ``(nan, n)`` when every reference sample is excluded.
    """
    ref = np.asarray(reference, dtype=float).ravel()
    tst = np.asarray(test, dtype=float).ravel()
    if ref.shape != tst.shape:
        raise ValueError(f"series lengths differ: {ref.size} vs {tst.size}")
    ok = np.abs(ref) >= guard
    excluded = int(ref.size - ok.sum())
    if not ok.any():
        return float("nan"), excluded
    return float(np.mean(np.abs((ref[ok] - tst[ok]) / ref[ok])) * 100.0), excluded


def mape(reference, test):
    return mape_details(reference, test)[0]


@dataclass
class ComparisonReport:
    channels: list
    mape: dict
    excluded: dict
    mean_reduction: float
    median_reduction: float
    p90_time_full: float
    p90_time_blocked: float
    mean_time_full: float
    mean_time_blocked: float
    time_full: np.ndarray
    time_blocked: np.ndarray
    econ_full: float
    econ_blocked: float
    flagged_full: list = field(default_factory=list)
    flagged_blocked: list = field(default_factory=list)

    @property
    def max_mape(self):
        vals = [v for v in self.mape.values() if np.isfinite(v)]
        return max(vals) if vals else float("nan")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["metric", "channel", "value", "excluded"])
            for c in self.channels:
                w.writerow(["mape_percent", c, format_float(self.mape[c]), self.excluded[c]])
            w.writerow(["mean_solve_time_reduction_percent", "", format_float(self.mean_reduction), ""])
            w.writerow(["median_solve_time_reduction_percent", "",
                        format_float(self.median_reduction), ""])
            w.writerow(["mean_solve_time_full_s", "", format_float(self.mean_time_full), ""])
            w.writerow(["mean_solve_time_blocked_s", "", format_float(self.mean_time_blocked), ""])
            w.writerow(["economic_cost_full", "", format_float(self.econ_full), ""])
            w.writerow(["economic_cost_blocked", "", format_float(self.econ_blocked), ""])
            w.writerow(["flagged_steps_full", "", len(self.flagged_full), ""])
            w.writerow(["flagged_steps_blocked", "", len(self.flagged_blocked), ""])

    def summary(self):
        lines = ["Blocked vs full-DoF closed loop", ""]
        lines.append(f"{'channel':<10}{'MAPE %':>12}{'excluded':>10}")
        for c in self.channels:
            lines.append(f"{c:<10}{self.mape[c]:>12.4f}{self.excluded[c]:>10d}")
        lines += [
            "",
            f"mean solve time full    : {self.mean_time_full * 1e3:.2f} ms",
            f"mean solve time blocked : {self.mean_time_blocked * 1e3:.2f} ms",
            f"mean time reduction     : {self.mean_reduction:.1f} %",
            f"median step reduction   : {self.median_reduction:.1f} %",
            f"economic cost full      : {self.econ_full:.4f}",
            f"economic cost blocked   : {self.econ_blocked:.4f}",
            f"flagged steps full/blk  : {self.flagged_full} / {self.flagged_blocked}",
        ]
        return "\n".join(lines) + "\n"


def compare(log_full, log_blocked):
    """MAPE per state and input channel (full run as reference) and speedup."""
    if log_full.scenario_hash != log_blocked.scenario_hash:
        raise ComparisonError("logs come from different scenarios")
    if log_full.T != log_blocked.T:
        raise ComparisonError(f"logs have different lengths ({log_full.T} vs {log_blocked.T})")
    n_x = log_full.x.shape[1]
    names = list(log_full.input_names or [f"u{i + 1}" for i in range(log_full.u.shape[1])])
    channels, values, excluded = [], {}, {}
    for i in range(n_x):
        c = f"x{i + 1}"
        channels.append(c)
        values[c], excluded[c] = mape_details(log_full.x[:, i], log_blocked.x[:, i])
    for i, c in enumerate(names):
        channels.append(c)
        values[c], excluded[c] = mape_details(log_full.u[:, i], log_blocked.u[:, i])
    tf, tb = log_full.solve_time, log_blocked.solve_time
    mean_f, mean_b = float(np.mean(tf)), float(np.mean(tb))
    reduction = 100.0 * (1.0 - mean_b / mean_f) if mean_f > 0 else 0.0
    per_step = 100.0 * (1.0 - tb / np.where(tf > 0, tf, np.nan))
    median_red = float(np.nanmedian(per_step)) if np.any(np.isfinite(per_step)) else 0.0
    if log_full is log_blocked:
        reduction = median_red = 0.0
    return ComparisonReport(
        channels=channels, mape=values, excluded=excluded,
        mean_reduction=reduction, median_reduction=median_red,
        p90_time_full=float(np.percentile(tf, 90)), p90_time_blocked=float(np.percentile(tb, 90)),
        mean_time_full=mean_f, mean_time_blocked=mean_b,
        time_full=tf.copy(), time_blocked=tb.copy(),
        econ_full=float(log_full.cost_econ.sum()), econ_blocked=float(log_blocked.cost_econ.sum()),
        flagged_full=log_full.flagged_steps, flagged_blocked=log_blocked.flagged_steps)
