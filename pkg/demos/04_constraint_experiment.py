"""Comparison of the two variant-consistency constraint layouts.

The solver's default network gives every plan with delayed variants an
explicit zero-delay variant and couples both sides over that extended
set.  A weaker "literal" layout constrains only the delayed variants, so
a plan may arrive delayed yet leave through a base connection that was
checked undelayed.  This script measures how often that loophole
produces invalid or cheaper-looking solutions on random instances; the
independent validator is the referee.
"""

from planchain import solve_chaining, validate_chains
from planchain.errors import InfeasibleError, InternalSolverError
from planchain.instances import ChainGenParams, chain_instance_from_params

TRIALS = 200

feasible = 0
agree = 0
cheaper_but_invalid = 0
cheaper_and_valid = 0
broken = 0
for seed in range(TRIALS):
    instance = chain_instance_from_params(ChainGenParams(seed=seed, plans=6, vehicles=3))
    try:
        extended = solve_chaining(instance)
    except InfeasibleError:
        continue
    feasible += 1
    try:
        literal = solve_chaining(instance, constraint_mode="literal")
    except (InfeasibleError, InternalSolverError):
        broken += 1
        continue
    if literal.objective == extended.objective:
        agree += 1
        continue
    report = validate_chains(instance, literal.chains, literal.objective)
    if report.ok:
        cheaper_and_valid += 1
    else:
        cheaper_but_invalid += 1

print(f"feasible instances:                {feasible}")
print(f"identical objectives:              {agree}")
print(f"literal cheaper, chains INVALID:   {cheaper_but_invalid}")
print(f"literal cheaper, chains valid:     {cheaper_and_valid}")
print(f"literal layout unextractable:      {broken}")
print()
print("The weaker layout never costs more (it solves a relaxation), but any")
print("saving it reports comes from temporally impossible chains, which the")
print("validator rejects.  The extended layout is what the solver ships with.")
