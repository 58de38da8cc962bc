"""Fleet sizing: how delay budgets shrink the number of vehicles needed.

With zero delay budgets the problem reduces to a maximum bipartite
matching over the shareability graph; the script verifies the solver
against that bound, then relaxes the budgets and watches the fleet
shrink as more plans become chainable.
"""

import dataclasses

from planchain import FleetSize, fleet_min_matching, solve_chaining
from planchain.instances import ChainGenParams, chain_instance_from_params

params = ChainGenParams(
    seed=21,
    plans=7,
    locations=6,
    horizon=60,
    d_max_range=(0, 0),
    fleet="dedicated",
    policy=FleetSize(),
)
instance = chain_instance_from_params(params)

print("== zero delay budgets: matching bound ==")
solution = solve_chaining(instance)
bound = fleet_min_matching(instance)
print(f"vehicles used by the exact solver: {solution.objective}")
print(f"|plans| - max matching:            {bound}")
assert solution.objective == bound

print("\n== growing delay budgets ==")
print("budget  vehicles")
for budget in (0, 2, 4, 8, 16):
    plans = tuple(dataclasses.replace(p, d_max=budget) for p in instance.plans)
    relaxed = dataclasses.replace(instance, plans=plans)
    used = solve_chaining(relaxed).objective
    print(f"{budget:6d}  {used:8d}")
print("\nDelay budgets only ever help: a plan that may start later can")
print("follow more predecessors, so the minimum fleet is non-increasing.")
