"""Economic MPC of aggregated water distribution systems with interpolated
delta-input move blocking."""

from .blocking import (BlockingSchedule, ExpansionMatrix, ScheduleError, binary_blocking_matrix,
                       expand, interpolation_matrix, schedule_from_lengths, unblocked_schedule)
from .integrator import Horizon, rk4_step, rollout
from .network import (ActuatorBounds, NetworkModel, PumpCurve, TankParams, node_residual,
                      pump_efficiency, pump_head, tank_rhs, validate_model)
from .objective import (Weights, cost_gradient, economic_stage_cost, safety_stage_cost,
                        smoothness_stage_cost, total_cost)
from .ocp import HorizonError, OcpProblem, assemble, constraint_eval, decode, encode
from .scenario import Scenario, ScenarioError, default_scenario, load_scenario, write_scenario
from .simulation import (ComparisonReport, SimulationLog, compare, mape, mape_details,
                         run_closed_loop)
from .sqp import SolverOptions, SolverResult, solve, warm_start

__version__ = "0.1.0"
