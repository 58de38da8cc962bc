import pytest

from planchain import darp
from planchain.darp import (
    AUTO_FLEET,
    DarpInstance,
    Request,
    RoutePlan,
    Stop,
    evaluate_metrics,
    insertion_heuristic,
    optimal_plan_for_group,
    plans_to_chaining,
    run_proposed,
    run_single_batch,
    solve_batch_exact,
    validate_darp_solution,
)
from planchain.errors import GuardExceededError, InfeasibleError, InputError
from planchain.instances import DarpGenParams, darp_instance_from_params
from planchain.model import TravelMatrix, Vehicle

LINE = TravelMatrix([[0, 2, 4], [2, 0, 2], [4, 2, 0]])


def test_single_request_plan():
    r = Request(1, 0, 2, 0, 5)
    plan = optimal_plan_for_group([r], LINE, 4)
    assert [(s.kind, s.time) for s in plan.stops] == [("pickup", 0), ("dropoff", 4)]
    assert plan.total_duration == 4


def test_two_identical_requests_share():
    rs = [Request(1, 0, 2, 0, 5), Request(2, 0, 2, 0, 5)]
    plan = optimal_plan_for_group(rs, LINE, 4)
    assert plan.total_duration == 4
    assert sorted(plan.request_ids()) == [1, 2]


def test_two_opposed_zero_delay_requests_infeasible():
    rs = [Request(1, 0, 2, 0, 0), Request(2, 2, 0, 0, 0)]
    assert optimal_plan_for_group(rs, LINE, 4) is None


def test_group_capacity_guard():
    rs = [Request(i, 0, 2, 0, 5) for i in range(1, 4)]
    with pytest.raises(GuardExceededError):
        optimal_plan_for_group(rs, LINE, 2)


def test_anchor_floors_the_first_stop():
    r = Request(1, 0, 2, 0, 5)
    plan = optimal_plan_for_group([r], LINE, 4, anchor=3)
    assert plan.stops[0].time == 3


def test_batch_exact_prefers_sharing():
    rs = [Request(1, 0, 2, 0, 5), Request(2, 0, 2, 0, 5)]
    result = solve_batch_exact(rs, LINE, 4)
    assert result.proven_optimal
    assert len(result.plans) == 1
    assert result.plans[0].total_duration == 4


def test_batch_exact_opposed_requests_stay_separate():
    rs = [Request(1, 0, 2, 0, 0), Request(2, 2, 0, 0, 0)]
    result = solve_batch_exact(rs, LINE, 4)
    assert len(result.plans) == 2


def test_batch_exact_empty_and_guard():
    assert solve_batch_exact([], LINE, 4).plans == ()
    rs = [Request(i, 0, 2, i, 5) for i in range(1, 15)]
    with pytest.raises(GuardExceededError):
        solve_batch_exact(rs, LINE, 4)


def test_insertion_heuristic_examples():
    fleet = (Vehicle(1, 0, 0), Vehicle(2, 0, 0))
    # one request, one vehicle at its origin: direct service, no delay
    inst = DarpInstance((Request(1, 0, 2, 0, 5),), LINE, 4, fleet)
    sol = insertion_heuristic(inst)
    assert len(sol.routes) == 1
    assert sol.request_delays == ((1, 0),)

    # a second identical request shares the first vehicle
    inst2 = DarpInstance((Request(1, 0, 2, 0, 5), Request(2, 0, 2, 0, 5)), LINE, 4, fleet)
    sol2 = insertion_heuristic(inst2)
    assert len(sol2.routes) == 1

    # an opposed zero-delay request opens the second vehicle
    inst3 = DarpInstance((Request(1, 0, 2, 0, 0), Request(2, 2, 0, 0, 0)), LINE, 4, (Vehicle(1, 0, 0), Vehicle(2, 2, 0)))
    sol3 = insertion_heuristic(inst3)
    assert len(sol3.routes) == 2

    with pytest.raises(InfeasibleError):
        insertion_heuristic(DarpInstance((Request(1, 0, 2, 0, 0), Request(2, 2, 0, 0, 0)), LINE, 4, (Vehicle(1, 0, 0),)))
    with pytest.raises(InputError):
        insertion_heuristic(DarpInstance((), LINE, 4, AUTO_FLEET))


def test_plans_to_chaining_slacks():
    inst = DarpInstance((Request(1, 0, 2, 0, 5),), LINE, 4, AUTO_FLEET)
    plan = optimal_plan_for_group(list(inst.requests), LINE, 4)
    chain_plans, mapping = plans_to_chaining([plan], inst)
    assert chain_plans[0].t_or == 0 and chain_plans[0].t_de == 4
    assert chain_plans[0].d_max == 5  # uniform slack
    assert mapping[0] is plan


def test_plans_to_chaining_zero_slack_stop():
    inst = DarpInstance((Request(1, 0, 2, 0, 0),), LINE, 4, AUTO_FLEET)
    plan = optimal_plan_for_group(list(inst.requests), LINE, 4)
    chain_plans, _ = plans_to_chaining([plan], inst)
    assert chain_plans[0].d_max == 0


def test_shift_soundness_of_delay_budget():
    # shifting by d_max keeps every window satisfied; one more tick breaks one
    for seed in range(30):
        inst = darp_instance_from_params(DarpGenParams(seed=seed, requests=6, horizon=25))
        result = solve_batch_exact(list(inst.requests), inst.travel, inst.capacity)
        chain_plans, mapping = plans_to_chaining(result.plans, inst)
        for cp in chain_plans:
            shifted = mapping[cp.id].shifted(cp.d_max)
            for stop in shifted.stops:
                req = inst.request(stop.request_id)
                assert stop.time <= darp._latest_for_stop(stop, req, inst.travel)
            broken = mapping[cp.id].shifted(cp.d_max + 1)
            assert any(
                stop.time > darp._latest_for_stop(stop, inst.request(stop.request_id), inst.travel)
                for stop in broken.stops
            )


def test_run_proposed_chains_two_requests_onto_one_vehicle():
    # two requests far enough apart in time for one vehicle to serve both
    requests = (Request(1, 0, 1, 5, 0), Request(2, 2, 0, 20, 3))
    fleet = (Vehicle(1, 0, 0),)
    inst = DarpInstance(requests, LINE, 4, fleet)
    sol = run_proposed(inst, 10)
    assert validate_darp_solution(inst, sol) == []
    assert len(sol.routes) == 1
    plan_durations = 2 + 4
    connections = 0 + 2  # vehicle at plan 1 origin; 2 ticks from loc1 to loc2
    assert sol.objective == plan_durations + connections


def test_run_proposed_degenerate_batchings():
    for seed in range(10):
        inst = darp_instance_from_params(DarpGenParams(seed=seed, requests=6, fleet_size=6))
        span = max(r.t_r for r in inst.requests) - min(r.t_r for r in inst.requests) + 1
        single = run_proposed(inst, span)
        assert validate_darp_solution(inst, single) == []
        one_tick = run_proposed(inst, 1)
        assert validate_darp_solution(inst, one_tick) == []
        alias = run_single_batch(inst)
        assert alias.method == "single-batch"
        assert alias.objective == single.objective


def test_run_proposed_auto_fleet_and_delay_bounds():
    for seed in range(10):
        inst = darp_instance_from_params(DarpGenParams(seed=seed, requests=8))
        sol = run_proposed(inst, 10)
        assert validate_darp_solution(inst, sol) == []
        served = {rid for rid, _ in sol.request_delays}
        assert served == {r.id for r in inst.requests}
        for rid, delay in sol.request_delays:
            assert 0 <= delay <= inst.request(rid).max_delay


def test_run_proposed_reports_vehicle_shortfall():
    requests = (Request(1, 0, 2, 0, 0), Request(2, 2, 0, 0, 0))
    inst = DarpInstance(requests, LINE, 4, (Vehicle(1, 0, 0),))
    with pytest.raises(InfeasibleError) as err:
        run_proposed(inst, 5)
    assert "fleet" in str(err.value)


def test_metrics_single_request():
    inst = DarpInstance((Request(1, 0, 2, 0, 5),), LINE, 4, (Vehicle(1, 0, 0),))
    sol = insertion_heuristic(inst)
    metrics = evaluate_metrics(sol, inst)
    assert metrics.used_vehicles == 1
    assert metrics.total_cost == 4
    assert metrics.occupancy == ((1, 4),)
    assert metrics.delays == ((0, 1),)


def test_metrics_shared_plan_occupancy():
    inst = DarpInstance((Request(1, 0, 2, 0, 8), Request(2, 1, 2, 0, 8)), LINE, 4, (Vehicle(1, 0, 0),))
    sol = run_proposed(inst, 10)
    metrics = evaluate_metrics(sol, inst)
    assert any(level == 2 and ticks > 0 for level, ticks in metrics.occupancy)
    total_active = sum(t for _, t in metrics.occupancy)
    spans = sum(
        plan.last_time - (plan.first_time - inst.travel.duration(v.start_location, plan.stops[0].location))
        for v, plan in sol.routes
    )
    assert total_active == spans
    assert sum(c for _, c in metrics.delays) == len(inst.requests)


def test_metrics_empty_solution():
    inst = DarpInstance((), LINE, 4, AUTO_FLEET)
    sol = run_proposed(inst, 5)
    metrics = evaluate_metrics(sol, inst)
    assert metrics.total_cost == 0 and metrics.used_vehicles == 0
    assert metrics.occupancy == () and metrics.delays == ()


def test_metrics_reject_infeasible():
    inst = DarpInstance((Request(1, 0, 2, 0, 5),), LINE, 4, (Vehicle(1, 0, 0),))
    bad = darp.DarpSolution(
        method="ih",
        batch_len=None,
        routes=((Vehicle(1, 0, 0), RoutePlan((Stop(1, "pickup", 0, 0),))),),
        objective=0,
        request_delays=((1, 0),),
    )
    with pytest.raises(InfeasibleError):
        evaluate_metrics(bad, inst)


def test_validator_catches_capacity_and_window_violations():
    inst = DarpInstance((Request(1, 0, 2, 0, 1),), LINE, 4, (Vehicle(1, 0, 0),))
    late = darp.DarpSolution(
        method="ih",
        batch_len=None,
        routes=(
            (
                Vehicle(1, 0, 0),
                RoutePlan((Stop(1, "pickup", 0, 5), Stop(1, "dropoff", 2, 9))),
            ),
        ),
        objective=4,
        request_delays=((1, 5),),
    )
    issues = validate_darp_solution(inst, late)
    assert any("pickup" in i for i in issues)


def test_time_limited_batches_stay_feasible():
    inst = darp_instance_from_params(DarpGenParams(seed=3, requests=10, fleet_size=10))
    limited = run_proposed(inst, 10, time_limit_ms=0)
    assert limited.method == "proposed-lim"
    assert validate_darp_solution(inst, limited) == []
    exact = run_proposed(inst, 10)
    assert exact.method == "proposed"
    assert exact.objective <= limited.objective


def test_threaded_batches_match_sequential():
    for seed in range(6):
        inst = darp_instance_from_params(DarpGenParams(seed=seed, requests=10, fleet_size=10))
        sequential = run_proposed(inst, 5)
        threaded = run_proposed(inst, 5, threads=4)
        assert sequential == threaded


def test_single_batch_dominance_micro():
    # with exact single-batch solving, the pipeline never loses to greedy insertion
    for seed in range(25):
        inst = darp_instance_from_params(
            DarpGenParams(seed=seed, requests=6, fleet_size=6, horizon=30)
        )
        proposed = run_single_batch(inst)
        baseline = insertion_heuristic(inst)
        assert validate_darp_solution(inst, proposed) == []
        assert validate_darp_solution(inst, baseline) == []
        assert proposed.objective <= baseline.objective, seed
