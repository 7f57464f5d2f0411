"""Scenario files: network description, weights, demand and tariff series.

A scenario is a JSON document plus two CSV files referenced from its
``series`` section (paths relative to the JSON file)::

    {
      "name": "default-2tank",
      "dt": 1.0,
      "inputs": ["qv1", "qv2", "qp1", "qp2"],
      "tanks": [{"name", "area", "level_min", "level_max", "level_ref"}, ...],
      "pumps": [{"channel", "head", "efficiency", "eta_floor"}, ...],
      "bounds": {"flow_min": [...], "flow_max": [...]},
      "topology": {"tank_input_map", "tank_disturbance_map",
                   "node_input_map", "node_disturbance_map"},
      "initial": {"levels": [...], "u_prev": [...]},
      "weights": {"w1", "w2", "w3", "w_slack"},
      "series": {"demand": "demand.csv", "tariff": "tariff.csv"},
      "controller": {"Np": 24, "lengths": [1, 2, 3, 4, 5, 9]}
    }

``demand.csv`` has header ``hour,d1,...,dn`` and ``tariff.csv`` has header
``hour,price``; hours are 0-based and consecutive.

The ``default-2tank`` template is synthetic: two 200 m^2 tanks, each fed
by its own pump and drained through its own valve into a demand zone. Zone
one draws demands d1 and d3, zone two draws d2.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import ActuatorBounds, NetworkModel, PumpCurve, TankParams, validate_model
from .objective import Weights


class ScenarioError(ValueError):
    pass


_SCHEMA = {
    "name": None,
    "dt": None,
    "inputs": None,
    "tanks": {"name", "area", "level_min", "level_max", "level_ref"},
    "pumps": {"channel", "head", "efficiency", "eta_floor"},
    "bounds": {"flow_min", "flow_max"},
    "topology": {"tank_input_map", "tank_disturbance_map", "node_input_map",
                 "node_disturbance_map"},
    "initial": {"levels", "u_prev"},
    "weights": {"w1", "w2", "w3", "w_slack"},
    "series": {"demand", "tariff"},
    "controller": {"Np", "lengths"},
}
_REQUIRED = ("tanks", "pumps", "bounds", "topology", "initial", "series")

TEMPLATES = ("default-2tank",)


@dataclass(frozen=True, eq=False)
class Scenario:
    model: NetworkModel
    weights: Weights
    demand: np.ndarray
    tariff: np.ndarray
    u_prev: np.ndarray
    dt: float = 1.0
    Np: int = 24
    lengths: tuple = (1, 2, 3, 4, 5, 9)
    name: str = ""
    config: dict = None

    @property
    def x0(self):
        return self.model.level_init

    @property
    def n_steps(self):
        return min(len(self.demand), len(self.tariff))

    def fingerprint(self):
        """Stable hash of everything that influences a closed-loop run."""
        h = hashlib.sha256()
        cfg = dict(self.config or {})
        cfg.pop("series", None)
        h.update(json.dumps(cfg, sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.demand, dtype=float).tobytes())
        h.update(np.ascontiguousarray(self.tariff, dtype=float).tobytes())
        return h.hexdigest()

    def violations(self):
        out = validate_model(self.model)
        out += self.weights.violations()
        m = self.model
        if self.demand.ndim != 2 or self.demand.shape[1] != m.n_d:
            out.append(f"series: demand must have {m.n_d} columns")
        if np.any(self.tariff <= 0):
            out.append("series: tariff prices must be > 0")
        if np.any(self.demand < 0):
            out.append("series: demand must be >= 0")
        if self.u_prev.shape != (m.n_u,):
            out.append(f"initial: u_prev must have {m.n_u} entries")
        elif np.any(self.u_prev < m.bounds.flow_min) or np.any(self.u_prev > m.bounds.flow_max):
            out.append("initial: u_prev outside actuator bounds")
        if not self.dt > 0:
            out.append("dt must be positive")
        if sum(self.lengths) != self.Np:
            out.append(f"controller: lengths sum {sum(self.lengths)} ≠ Np {self.Np}")
        return out


def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ScenarioError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _get(d, key, where):
    try:
        return d[key]
    except KeyError:
        raise ScenarioError(f"{where}: missing key {key!r}") from None


def scenario_from_config(cfg, demand, tariff):
    if not isinstance(cfg, dict):
        raise ScenarioError("scenario root must be a JSON object")
    _check_keys(cfg, _SCHEMA, "scenario")
    for key in _REQUIRED:
        _get(cfg, key, "scenario")
    for key, allowed in _SCHEMA.items():
        if allowed is None or key not in cfg:
            continue
        items = cfg[key] if isinstance(cfg[key], list) else [cfg[key]]
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                raise ScenarioError(f"{key}: expected an object")
            _check_keys(item, allowed, f"{key}[{i}]" if isinstance(cfg[key], list) else key)

    try:
        initial = cfg["initial"]
        levels = _get(initial, "levels", "initial")
        tanks = []
        for i, t in enumerate(cfg["tanks"]):
            w = f"tanks[{i}]"
            tanks.append(TankParams(area=float(_get(t, "area", w)),
                                    level_min=float(_get(t, "level_min", w)),
                                    level_max=float(_get(t, "level_max", w)),
                                    level_ref=float(_get(t, "level_ref", w)),
                                    level_init=float(levels[i]),
                                    name=str(t.get("name", f"T{i + 1}"))))
        pumps = [PumpCurve(channel=int(_get(p, "channel", f"pumps[{i}]")),
                           head_coeffs=tuple(float(c) for c in _get(p, "head", f"pumps[{i}]")),
                           eff_coeffs=tuple(float(c) for c in _get(p, "efficiency", f"pumps[{i}]")),
                           eta_floor=float(p.get("eta_floor", 0.05)))
                 for i, p in enumerate(cfg["pumps"])]
        b = cfg["bounds"]
        bounds = ActuatorBounds(_get(b, "flow_min", "bounds"), _get(b, "flow_max", "bounds"))
        topo = cfg["topology"]
        model = NetworkModel(
            tanks=tanks, pumps=pumps, bounds=bounds,
            tank_input_map=_get(topo, "tank_input_map", "topology"),
            tank_disturbance_map=_get(topo, "tank_disturbance_map", "topology"),
            node_input_map=_get(topo, "node_input_map", "topology"),
            node_disturbance_map=_get(topo, "node_disturbance_map", "topology"),
            input_names=tuple(cfg.get("inputs", ())))
        weights = Weights(**{k: float(v) for k, v in cfg.get("weights", {}).items()})
        ctrl = cfg.get("controller", {})
        Np = int(ctrl.get("Np", 24))
        lengths = tuple(int(l) for l in ctrl.get("lengths", [1] * Np))
        u_prev = np.asarray(_get(initial, "u_prev", "initial"), dtype=float)
    except ScenarioError:
        raise
    except (TypeError, ValueError, IndexError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from exc

    demand = np.asarray(demand, dtype=float)
    if demand.ndim == 1:
        demand = demand[:, None]
    return Scenario(model=model, weights=weights, demand=demand,
                    tariff=np.asarray(tariff, dtype=float), u_prev=u_prev,
                    dt=float(cfg.get("dt", 1.0)), Np=Np, lengths=lengths,
                    name=str(cfg.get("name", "")), config=cfg)


def read_series_csv(path, expected_first="hour"):
    """Read an ``hour,<columns...>`` CSV; returns ``(column_names, values)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != expected_first:
        raise ScenarioError(f"{path}: first column must be {expected_first!r}")
    header = [c.strip() for c in rows[0]]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise ScenarioError(f"{path}: no data rows")
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ScenarioError(f"{path}: hours must be 0, 1, 2, ... without gaps")
    return header[1:], data[:, 1:]


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                            f"{exc.msg}") from exc
    if not isinstance(cfg, dict) or "series" not in cfg:
        raise ScenarioError(f"{path}: missing 'series' section")
    series = cfg["series"]
    _check_keys(series, _SCHEMA["series"], "series")
    try:
        _, demand = read_series_csv(path.parent / _get(series, "demand", "series"))
        _, tariff = read_series_csv(path.parent / _get(series, "tariff", "series"))
    except OSError as exc:
        raise ScenarioError(str(exc)) from exc
    if tariff.shape[1] != 1:
        raise ScenarioError("tariff CSV must have exactly the columns hour,price")
    return scenario_from_config(cfg, demand, tariff[:, 0])


def format_float(v):
    """Shortest round-trip decimal representation."""
    return repr(float(v))


def _series_csv(header, values):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for h, row in enumerate(np.atleast_2d(values)):
        w.writerow([h] + [format_float(v) for v in row])
    return buf.getvalue()


def write_scenario(scenario, path):
    """Write the scenario JSON and its two CSV files next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cfg = dict(scenario.config)
    stem = path.stem
    cfg["series"] = {"demand": f"{stem}_demand.csv", "tariff": f"{stem}_tariff.csv"}
    demand = np.asarray(scenario.demand)
    dcols = ["hour"] + [f"d{i + 1}" for i in range(demand.shape[1])]
    (path.parent / cfg["series"]["demand"]).write_text(_series_csv(dcols, demand))
    (path.parent / cfg["series"]["tariff"]).write_text(
        _series_csv(["hour", "price"], np.asarray(scenario.tariff)[:, None]))
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return path


# -- synthetic default ------------------------------------------------------

def _peak(h, centre, width):
    return np.exp(-0.5 * ((h - centre) / width) ** 2)


def diurnal_demand(hours, seed=7):
    """Three demand channels in m^3/hr: two diurnal patterns and a base load."""
    h = np.asarray(hours, dtype=float) % 24.0
    rng = np.random.default_rng(seed)
    d1 = (40.0 + 10.0 * np.sin(2 * np.pi * (h - 9.0) / 24.0)
          + 22.0 * _peak(h, 7.5, 1.5) + 28.0 * _peak(h, 19.0, 2.0))
    d2 = (30.0 + 8.0 * np.sin(2 * np.pi * (h - 12.0) / 24.0)
          + 12.0 * _peak(h, 9.0, 2.5) + 15.0 * _peak(h, 20.5, 2.5))
    d3 = np.full_like(h, 10.0)
    noise = 1.0 + 0.02 * rng.standard_normal((len(h), 2))
    return np.column_stack([d1 * noise[:, 0], d2 * noise[:, 1], d3])


def step_tariff(hours, off_peak=0.08, shoulder=0.14, peak=0.28):
    """Three-level time-of-use price per kWh."""
    h = np.asarray(hours) % 24
    price = np.full(h.shape, shoulder, dtype=float)
    price[(h < 7) | (h >= 23)] = off_peak
    price[(h >= 17) & (h < 21)] = peak
    return price


def default_config():
    return {
        "name": "default-2tank",
        "dt": 1.0,
        "inputs": ["qv1", "qv2", "qp1", "qp2"],
        "tanks": [
            {"name": "T1", "area": 200.0, "level_min": 1.0, "level_max": 5.0, "level_ref": 3.0},
            {"name": "T2", "area": 200.0, "level_min": 1.0, "level_max": 5.0, "level_ref": 3.0},
        ],
        "pumps": [
            {"channel": 2, "head": [-0.001, 0.0, 60.0],
             "efficiency": [-6e-05, 0.0108, 0.314], "eta_floor": 0.05},
            {"channel": 3, "head": [-0.0012, 0.02, 60.0],
             "efficiency": [-6e-05, 0.0108, 0.314], "eta_floor": 0.05},
        ],
        "bounds": {"flow_min": [0.0, 0.0, 0.0, 0.0],
                   "flow_max": [150.0, 150.0, 150.0, 150.0]},
        "topology": {
            "tank_input_map": [[-1.0, 0.0, 1.0, 0.0],
                               [0.0, -1.0, 0.0, 1.0]],
            "tank_disturbance_map": [[0.0, 0.0, 0.0],
                                     [0.0, 0.0, 0.0]],
            "node_input_map": [[1.0, 0.0, 0.0, 0.0],
                               [0.0, 1.0, 0.0, 0.0]],
            "node_disturbance_map": [[-1.0, 0.0, -1.0],
                                     [0.0, -1.0, 0.0]],
        },
        "initial": {"levels": [3.0, 3.0], "u_prev": [35.0, 35.0, 35.0, 35.0]},
        "weights": {"w1": 1.0, "w2": 1.0, "w3": 0.01, "w_slack": 10000.0},
        "series": {"demand": "demand.csv", "tariff": "tariff.csv"},
        "controller": {"Np": 24, "lengths": [1, 2, 3, 4, 5, 9]},
    }


def default_scenario(n_hours=120):
    """The synthetic ``default-2tank`` scenario held in memory."""
    hours = np.arange(n_hours)
    return scenario_from_config(default_config(), diurnal_demand(hours), step_tariff(hours))


def make_template(name, n_hours=120):
    if name == "default-2tank":
        return default_scenario(n_hours)
    raise ScenarioError(f"unknown template {name!r}; available: {', '.join(TEMPLATES)}")
