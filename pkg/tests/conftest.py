import numpy as np
import pytest
from hypothesis import settings

from wdsmpc import (ActuatorBounds, NetworkModel, PumpCurve, TankParams, Weights,
                    default_scenario)
from wdsmpc.scenario import Scenario

settings.register_profile("repo", max_examples=60, deadline=None, derandomize=True)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def model(scenario):
    return scenario.model


def single_tank_scenario(n_hours=8, area=100.0, demand=10.0, tariff=0.1, weights=None,
                         x0=3.0, u_prev=10.0, Np=2, lengths=(1, 1), flow_max=40.0):
    """One tank, one pump filling it, one demand draining it; no node balances."""
    model = NetworkModel(
        tanks=[TankParams(area, 1.0, 5.0, 3.0, x0, "T1")],
        pumps=[PumpCurve(0, (-0.002, 0.0, 40.0), (-2e-4, 0.02, 0.3))],
        bounds=ActuatorBounds([0.0], [flow_max]),
        tank_input_map=[[1.0]], tank_disturbance_map=[[-1.0]],
        node_input_map=np.zeros((0, 1)), node_disturbance_map=np.zeros((0, 1)),
        input_names=("qp1",))
    return Scenario(model=model, weights=weights or Weights(1.0, 1.0, 0.01, 1e4),
                    demand=np.full((n_hours, 1), float(demand)),
                    tariff=np.full(n_hours, float(tariff)), u_prev=np.array([u_prev]),
                    dt=1.0, Np=Np, lengths=tuple(lengths), name="toy", config={"name": "toy"})


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
