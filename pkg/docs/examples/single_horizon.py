"""
One horizon problem, full and blocked
=====================================

Assemble the first horizon of the synthetic two-tank scenario twice, once
with 24 free rate moves per pump and once with the six-block interpolated
schedule, solve both and compare the planned pump flows.
"""

import numpy as np

from wdsmpc import assemble, decode, default_scenario, schedule_from_lengths, solve
from wdsmpc import unblocked_schedule

np.set_printoptions(precision=1, suppress=True, linewidth=110)

scenario = default_scenario()
full = assemble(scenario, unblocked_schedule(24), scenario.x0, scenario.u_prev, k=0)
blocked = assemble(scenario, schedule_from_lengths(scenario.lengths, 24),
                   scenario.x0, scenario.u_prev, k=0)
print("decision variables: full", full.layout.size, " blocked", blocked.layout.size)

for name, problem in (("full", full), ("blocked", blocked)):
    res = solve(problem)
    _, U, X, xi = decode(res.z_star, problem)
    print(f"\n{name}: {res.status} after {res.iterations} iterations, "
          f"cost {res.cost:.3f}, {res.wall_time * 1e3:.1f} ms")
    print("  pump 1 plan:", U[:, 2])
    print("  pump 2 plan:", U[:, 3])
    print("  tank 1 level:", X[:, 0])

# the blocked feasible set sits inside the full one, so its optimum cannot be lower
