"""Flow-based model of an aggregated water distribution system.

Tanks integrate the net routed flow, pumps carry quadratic head and
efficiency curves, and demand nodes impose linear flow balances.

Units throughout: flows in m^3/hr, levels and heads in m, areas in m^2,
time in hours.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TankParams:
    area: float
    level_min: float
    level_max: float
    level_ref: float
    level_init: float
    name: str = ""


@dataclass(frozen=True)
class PumpCurve:
    """Quadratic head and efficiency curves of one pump.

    Parameters
    ----------
    channel : int
        Index of the input channel carrying this pump's flow.
    head_coeffs : tuple of float
        ``(a, b, c)`` with ``H(q) = a q^2 + b q + c`` in m, q in m^3/hr.
    eff_coeffs : tuple of float
        ``(a, b, c)`` with ``eta(q) = a q^2 + b q + c`` as a fraction.
    eta_floor : float
        Lower clamp on the efficiency, keeps the energy cost finite.
    """

    channel: int
    head_coeffs: tuple
    eff_coeffs: tuple
    eta_floor: float = 0.05


@dataclass(frozen=True)
class ActuatorBounds:
    flow_min: np.ndarray
    flow_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flow_min", np.asarray(self.flow_min, dtype=float))
        object.__setattr__(self, "flow_max", np.asarray(self.flow_max, dtype=float))


def _as_matrix(a, rows=None, cols=None):
    m = np.asarray(a, dtype=float)
    if m.size == 0:
        if m.ndim == 2:
            return m.copy()
        return np.zeros((rows or 0, cols or 0))
    return np.atleast_2d(m)


@dataclass(frozen=True)
class NetworkModel:
    """Immutable description of the network.

    ``tank_input_map`` (n_x, n_u) and ``tank_disturbance_map`` (n_x, n_d)
    route signed flows into tanks. ``node_input_map`` (E, n_node x n_u) and
    ``node_disturbance_map`` (Lambda, n_node x n_d) define the demand
    balances ``E u + Lambda d = 0``.
    """

    tanks: tuple
    pumps: tuple
    bounds: ActuatorBounds
    tank_input_map: np.ndarray
    tank_disturbance_map: np.ndarray
    node_input_map: np.ndarray
    node_disturbance_map: np.ndarray
    input_names: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "tanks", tuple(self.tanks))
        object.__setattr__(self, "pumps", tuple(self.pumps))
        n_x, n_u = len(self.tanks), len(self.bounds.flow_min)
        bu = _as_matrix(self.tank_input_map, n_x, n_u)
        object.__setattr__(self, "tank_input_map", bu)
        object.__setattr__(self, "tank_disturbance_map",
                           _as_matrix(self.tank_disturbance_map, n_x, 0))
        e = _as_matrix(self.node_input_map, 0, n_u)
        object.__setattr__(self, "node_input_map", e)
        object.__setattr__(self, "node_disturbance_map",
                           _as_matrix(self.node_disturbance_map, e.shape[0],
                                      self.tank_disturbance_map.shape[1]))
        if not self.input_names:
            object.__setattr__(self, "input_names",
                               tuple(f"u{i + 1}" for i in range(n_u)))
        else:
            object.__setattr__(self, "input_names", tuple(self.input_names))
        for arr in (self.tank_input_map, self.tank_disturbance_map,
                    self.node_input_map, self.node_disturbance_map):
            arr.setflags(write=False)
        # column-wise pump coefficients for vectorized cost evaluation
        table = None
        if all(len(p.head_coeffs) == 3 and len(p.eff_coeffs) == 3 for p in self.pumps):
            table = (np.array([p.channel for p in self.pumps], dtype=int),
                     np.array([p.head_coeffs for p in self.pumps], dtype=float).reshape(-1, 3).T,
                     np.array([p.eff_coeffs for p in self.pumps], dtype=float).reshape(-1, 3).T,
                     np.array([p.eta_floor for p in self.pumps], dtype=float))
        object.__setattr__(self, "_pump_table", table)

    @property
    def pump_table(self):
        """``(channels, head_coeffs, eff_coeffs, eta_floors)``, coefficients as (3, n_pumps)."""
        if self._pump_table is None:
            raise ValueError("pump curves need exactly 3 coefficients")
        return self._pump_table

    @property
    def n_x(self):
        return len(self.tanks)

    @property
    def n_u(self):
        return self.tank_input_map.shape[1]

    @property
    def n_d(self):
        return self.tank_disturbance_map.shape[1]

    @property
    def n_node(self):
        return self.node_input_map.shape[0]

    @property
    def areas(self):
        return np.array([t.area for t in self.tanks], dtype=float)

    @property
    def level_min(self):
        return np.array([t.level_min for t in self.tanks], dtype=float)

    @property
    def level_max(self):
        return np.array([t.level_max for t in self.tanks], dtype=float)

    @property
    def level_ref(self):
        return np.array([t.level_ref for t in self.tanks], dtype=float)

    @property
    def level_init(self):
        return np.array([t.level_init for t in self.tanks], dtype=float)


def pump_head(curve, q):
    """Pump head in m at flow ``q`` (m^3/hr)."""
    a, b, c = curve.head_coeffs
    return a * q * q + b * q + c


def pump_head_derivative(curve, q):
    a, b, _ = curve.head_coeffs
    return 2.0 * a * q + b


def pump_efficiency(curve, q):
    """Pump efficiency at flow ``q``, clamped to ``[eta_floor, 1]``."""
    a, b, c = curve.eff_coeffs
    return np.clip(a * q * q + b * q + c, curve.eta_floor, 1.0)


def pump_efficiency_derivative(curve, q):
    # zero where the clamp is engaged
    a, b, c = curve.eff_coeffs
    raw = a * q * q + b * q + c
    inside = (raw > curve.eta_floor) & (raw < 1.0)
    return np.where(inside, 2.0 * a * q + b, 0.0)


def tank_rhs(model, u, d):
    """Level derivative in m/hr. Does not depend on the current levels."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if u.shape != (model.n_u,) or d.shape != (model.n_d,):
        raise ValueError(
            f"expected u of shape ({model.n_u},) and d of shape ({model.n_d},), "
            f"got {u.shape} and {d.shape}")
    return (model.tank_input_map @ u + model.tank_disturbance_map @ d) / model.areas


def node_residual(model, u, d):
    """Node balance residual ``E u + Lambda d``; zero when demand is met."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    return model.node_input_map @ u + model.node_disturbance_map @ d


def validate_model(model):
    """Return a list of human-readable invariant violations (empty if valid)."""
    problems = []
    n_x, n_u = model.n_x, model.n_u
    for i, t in enumerate(model.tanks):
        label = t.name or f"tank {i + 1}"
        if not t.area > 0:
            problems.append(f"{label}: area must be > 0 (got {t.area})")
        if not t.level_min < t.level_max:
            problems.append(f"{label}: level_min {t.level_min} must be < level_max {t.level_max}")
        if not t.level_min <= t.level_ref <= t.level_max:
            problems.append(f"{label}: level_ref {t.level_ref} outside [level_min, level_max]")
        if not t.level_min <= t.level_init <= t.level_max:
            problems.append(f"{label}: initial level {t.level_init} outside [level_min, level_max]")

    fmin, fmax = model.bounds.flow_min, model.bounds.flow_max
    if fmin.shape != fmax.shape:
        problems.append(f"bounds: flow_min has {fmin.size} entries, flow_max has {fmax.size}")
    else:
        for i in range(fmin.size):
            if not 0 <= fmin[i] <= fmax[i]:
                problems.append(
                    f"bounds: actuator {i + 1} needs 0 <= flow_min <= flow_max "
                    f"(got {fmin[i]}, {fmax[i]})")

    channels = [p.channel for p in model.pumps]
    for c in sorted({c for c in channels if channels.count(c) > 1}):
        problems.append(f"pump on channel {c}: more than one pump on the same channel")
    for p in model.pumps:
        if not 0 <= p.channel < n_u:
            problems.append(f"pump on channel {p.channel}: channel index out of range")
        if len(p.head_coeffs) != 3 or len(p.eff_coeffs) != 3:
            problems.append(f"pump on channel {p.channel}: curves need exactly 3 coefficients")
            continue
        if not p.head_coeffs[2] > 0:
            problems.append(f"pump on channel {p.channel}: shutoff head must be > 0")
        if not 0 < p.eta_floor <= 1:
            problems.append(f"pump on channel {p.channel}: eta_floor must lie in (0, 1]")

    if model.tank_input_map.shape != (n_x, n_u):
        problems.append(f"topology: tank_input_map must be {n_x}x{n_u}, "
                        f"got {model.tank_input_map.shape}")
    n_d = model.tank_disturbance_map.shape[1]
    if model.tank_disturbance_map.shape[0] != n_x:
        problems.append(f"topology: tank_disturbance_map must have {n_x} rows")
    if model.node_input_map.shape[1] != n_u:
        problems.append(f"topology: node_input_map must have {n_u} columns")
    if model.node_disturbance_map.shape != (model.node_input_map.shape[0], n_d):
        problems.append(f"topology: node_disturbance_map must be "
                        f"{model.node_input_map.shape[0]}x{n_d}, "
                        f"got {model.node_disturbance_map.shape}")
    for name in ("node_input_map", "node_disturbance_map"):
        m = getattr(model, name)
        if m.size and not np.all(np.isin(m, (-1.0, 0.0, 1.0))):
            problems.append(f"topology: {name} entries must be -1, 0 or +1")
    if model.tank_input_map.shape == (n_x, n_u) and model.node_input_map.shape[1] == n_u:
        used = np.any(model.tank_input_map != 0, axis=0) | np.any(model.node_input_map != 0, axis=0)
        for i in np.flatnonzero(~used):
            problems.append(f"topology: input channel {i + 1} is not connected to any tank or node")
    return problems
