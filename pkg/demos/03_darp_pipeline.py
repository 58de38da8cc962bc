"""Batch-and-chain pipeline on a random dial-a-ride instance.

Requests are split into time batches, each batch is solved exactly
(shared rides up to the vehicle capacity), and the resulting route plans
are chained across batches.  The insertion heuristic provides the
baseline; metrics show cost, fleet usage, occupancy, and delays.
"""

from planchain import evaluate_metrics, insertion_heuristic, run_proposed, run_single_batch
from planchain.darp import validate_darp_solution
from planchain.instances import DarpGenParams, darp_instance_from_params

instance = darp_instance_from_params(
    DarpGenParams(seed=17, requests=12, locations=8, horizon=40, delay_range=(0, 15), capacity=4, fleet_size=12)
)
span = max(r.t_r for r in instance.requests) - min(r.t_r for r in instance.requests) + 1
print(f"instance: {len(instance.requests)} requests over {span} ticks, capacity {instance.capacity}")

solutions = [insertion_heuristic(instance)]
for batch_len in (5, 10, span):
    solutions.append(run_proposed(instance, batch_len))
solutions.append(run_single_batch(instance))

print(f"\n{'method':>14} {'batch':>6} {'cost':>6} {'vehicles':>9} {'max delay':>10}")
for solution in solutions:
    issues = validate_darp_solution(instance, solution)
    assert not issues, issues
    metrics = evaluate_metrics(solution, instance)
    max_delay = max((d for _, d in solution.request_delays), default=0)
    batch = "-" if solution.batch_len is None else solution.batch_len
    print(f"{solution.method:>14} {batch:>6} {metrics.total_cost:>6} {metrics.used_vehicles:>9} {max_delay:>10}")

best = min(solutions[1:], key=lambda s: s.objective)
print(f"\noccupancy histogram of the best pipeline run ({best.method}, batch {best.batch_len}):")
for level, ticks in evaluate_metrics(best, instance).occupancy:
    print(f"  {level} on board: {ticks:4d} ticks  {'#' * (ticks // 4)}")
