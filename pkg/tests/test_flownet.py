import pytest

from planchain import oracle, variantgen
from planchain.flownet import (
    FlowInfeasibleError,
    FlowNetwork,
    build_network,
    check_conservation,
    residual_is_optimal,
    solve_mcf,
)
from planchain.instances import ChainGenParams, chain_instance_from_params
from planchain.model import (
    ChainingInstance,
    FleetSize,
    Plan,
    TravelCost,
    TravelMatrix,
    Vehicle,
)

from conftest import make_e1


def build_e1_network(policy=None, vehicles=None):
    inst = make_e1(policy=policy) if vehicles is None else make_e1(policy=policy, vehicles=vehicles)
    gen = variantgen.generate(inst)
    return inst, build_network(inst, gen)


def test_e1_network_shape():
    _, net = build_e1_network()
    assert len(net.nodes) == 11
    assert len(net.edges) == 12
    kinds = [n.kind for n in net.nodes]
    assert kinds[0] == "source" and kinds[-1] == "sink"
    # plan 2 gained an explicit zero-delay variant next to the generated one
    assert net.routed_delays == {1: (), 2: (0, 1)}
    assert net.nodes[net.source_id].supply == 2
    assert net.nodes[net.sink_id].supply == -2
    assert all(e.lower == 0 and e.upper == 1 and e.cost >= 0 for e in net.edges)


def test_minimal_network_without_variants():
    travel = TravelMatrix([[0]])
    inst = ChainingInstance(
        (Plan(1, 0, 0, 5, 6, 0),), (Vehicle(1, 0, 0),), travel, TravelCost()
    )
    net = build_network(inst, variantgen.generate(inst))
    assert len(net.nodes) == 5
    assert len(net.edges) == 4


def test_empty_network():
    inst = ChainingInstance((), (), TravelMatrix([[0]]), TravelCost())
    net = build_network(inst, variantgen.generate(inst))
    assert len(net.nodes) == 2
    assert len(net.edges) == 0
    assignment = solve_mcf(net)
    assert assignment.total_cost == 0


def test_parallel_edges_prefer_cheaper():
    inst = ChainingInstance((), (), TravelMatrix([[0]]), TravelCost())
    net = FlowNetwork(inst, "extended")
    s = net._add_node("source", None, 1)
    t = net._add_node("sink", None, -1)
    net.source_id, net.sink_id = s, t
    net.supply = 1
    e_costly = net._add_edge(s, t, 3)
    e_cheap = net._add_edge(s, t, 1)
    assignment = solve_mcf(net)
    assert assignment.flows[e_cheap] == 1
    assert assignment.flows[e_costly] == 0
    assert assignment.total_cost == 1


def test_e1_solve_and_active_edges():
    inst, net = build_e1_network()
    assignment = solve_mcf(net)
    assert assignment.total_cost == 2
    check_conservation(net, assignment)
    assert residual_is_optimal(net, assignment)
    active = {
        (net.nodes[net.edges[eid].tail].kind, net.nodes[net.edges[eid].head].kind)
        for eid in net.connection_edges
        if assignment.flows[eid] == 1
    }
    assert active == {("vehicle", "right_plan"), ("left_plan", "right_variant")}


def test_e1_without_vehicle_is_infeasible():
    inst = make_e1(vehicles=())
    net = build_network(inst, variantgen.generate(inst))
    with pytest.raises(FlowInfeasibleError) as err:
        solve_mcf(net)
    assert err.value.plan_id == 1


def test_edge_list_dump_golden():
    _, net = build_e1_network()
    lines = net.edge_list_text().splitlines()
    assert len(lines) == 12
    assert all(len(line.split()) == 5 for line in lines)
    # stable construction order: source fan-out first, sink fan-in last
    assert lines[0] == f"{net.source_id} {net.left_plan[1]} 0 1 0"
    assert lines[-1] == f"{net.right_plan[2]} {net.sink_id} 0 1 0"


def test_dump_is_deterministic():
    _, a = build_e1_network()
    _, b = build_e1_network()
    assert a.edge_list_text() == b.edge_list_text()


def test_matching_agreement_on_zero_delay_fleet_instances():
    # active vehicle edges in the flow == |P| - max bipartite matching
    for seed in range(30):
        inst = chain_instance_from_params(
            ChainGenParams(seed=seed, plans=6, d_max_range=(0, 0), fleet="dedicated", policy=FleetSize())
        )
        net = build_network(inst, variantgen.generate(inst))
        assignment = solve_mcf(net)
        vehicle_edges = sum(
            assignment.flows[eid]
            for eid in net.connection_edges
            if isinstance(net.edge_connection[eid].origin, Vehicle)
        )
        assert vehicle_edges == len(inst.plans) - (len(inst.plans) - oracle.fleet_min_matching(inst))


def test_disabled_edges_reduce_choices():
    inst, net = build_e1_network()
    assignment = solve_mcf(net)
    active = [eid for eid in net.connection_edges if assignment.flows[eid] == 1]
    cheap = min(active, key=lambda e: net.edges[e].cost)
    with pytest.raises(FlowInfeasibleError):
        # disabling the vehicle's only outgoing edge starves plan 1
        veh_edges = [
            eid
            for eid in net.connection_edges
            if isinstance(net.edge_connection[eid].origin, Vehicle)
        ]
        solve_mcf(net, disabled_edges=frozenset(veh_edges))


def test_warm_start_matches_cold():
    for seed in range(20):
        inst = chain_instance_from_params(ChainGenParams(seed=seed, plans=6, vehicles=2))
        net = build_network(inst, variantgen.generate(inst))
        try:
            cold = solve_mcf(net)
        except FlowInfeasibleError:
            continue
        warm = solve_mcf(net, initial_potentials=cold.potentials)
        assert warm.total_cost == cold.total_cost
