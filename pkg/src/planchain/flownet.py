"""Network construction and the exact min-cost flow solver.

The chaining problem becomes a flow network with a source feeding one unit
per plan, left/right node pairs per plan (and per variant for plans that
have delayed variants), vehicle nodes, and a sink that absorbs one unit
per plan.  Connection edges carry the policy cost; all structural edges
are free and every edge has bounds [0, 1].

Plans that have at least one delayed variant also receive an explicit
zero-delay variant node pair, and every connection of such a plan is
routed through variant nodes.  Without that strengthening a plan could be
entered as a delayed variant yet leave through a base connection whose
feasibility was checked undelayed, which silently produces temporally
invalid chains.  The weaker, variant-only constraint layout is still
available (``constraint_mode="literal"``) for comparison experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InputError
from .model import ChainingInstance, Vehicle
from .variantgen import Connection, GenerationResult

INF = 1 << 60


@dataclass(frozen=True)
class FlowNode:
    id: int
    kind: str  # source | sink | left_plan | right_plan | left_variant | right_variant | vehicle
    payload: object
    supply: int


@dataclass(frozen=True)
class FlowEdge:
    tail: int
    head: int
    lower: int
    upper: int
    cost: int


@dataclass(frozen=True)
class FlowAssignment:
    """Integral edge flows with the solver's optimality potentials."""

    flows: tuple[int, ...]
    total_cost: int
    potentials: tuple[int, ...]


class FlowInfeasibleError(InfeasibleError):
    def __init__(self, plan_id: int | None):
        self.plan_id = plan_id
        if plan_id is None:
            super().__init__("flow network is infeasible")
        else:
            super().__init__(f"no chain can reach plan {plan_id}: its right node is unreachable")


class FlowNetwork:
    """Immutable network plus lookup maps back into the domain objects."""

    def __init__(self, instance: ChainingInstance, constraint_mode: str):
        self.instance = instance
        self.constraint_mode = constraint_mode
        self.nodes: list[FlowNode] = []
        self.edges: list[FlowEdge] = []
        self.source_id = 0
        self.sink_id = 0
        self.left_plan: dict[int, int] = {}
        self.right_plan: dict[int, int] = {}
        self.left_variant: dict[tuple[int, int], int] = {}
        self.right_variant: dict[tuple[int, int], int] = {}
        self.vehicle_node: dict[int, int] = {}
        self.routed_delays: dict[int, tuple[int, ...]] = {}
        self.left_struct_edge: dict[tuple[int, int], int] = {}
        self.right_struct_edge: dict[tuple[int, int], int] = {}
        self.sink_edge: dict[int, int] = {}
        self.connection_edges: list[int] = []
        self.edge_connection: dict[int, Connection] = {}
        self.supply = 0
        self._arc_cache = None

    def _add_node(self, kind: str, payload, supply: int) -> int:
        node = FlowNode(len(self.nodes), kind, payload, supply)
        self.nodes.append(node)
        return node.id

    def _add_edge(self, tail: int, head: int, cost: int) -> int:
        self.edges.append(FlowEdge(tail, head, 0, 1, cost))
        return len(self.edges) - 1

    def edge_list_text(self) -> str:
        """Plain-text dump, one edge per line: tail head lower upper cost."""
        return "\n".join(f"{e.tail} {e.head} {e.lower} {e.upper} {e.cost}" for e in self.edges)


def build_network(
    instance: ChainingInstance,
    gen: GenerationResult,
    constraint_mode: str = "extended",
) -> FlowNetwork:
    """Assemble the flow network for a generation result.

    ``extended`` routes every connection of a variant-carrying plan through
    variant nodes (adding an explicit zero-delay variant); ``literal``
    keeps base connections on the plan nodes.
    """
    if constraint_mode not in ("extended", "literal"):
        raise InputError(f"unknown constraint mode {constraint_mode!r}")
    net = FlowNetwork(instance, constraint_mode)
    plans = instance.plans
    n_plans = len(plans)

    delayed = gen.delays_by_plan()
    for p in plans:
        if p.id in delayed:
            base = [0] if constraint_mode == "extended" else []
            net.routed_delays[p.id] = tuple(base + delayed[p.id])
        else:
            net.routed_delays[p.id] = ()

    net.supply = n_plans
    net.source_id = net._add_node("source", None, n_plans)
    for p in plans:
        net.left_plan[p.id] = net._add_node("left_plan", p.id, 0)
    for p in plans:
        for d in net.routed_delays[p.id]:
            net.left_variant[(p.id, d)] = net._add_node("left_variant", (p.id, d), 0)
    for v in instance.vehicles:
        net.vehicle_node[v.id] = net._add_node("vehicle", v.id, 0)
    for p in plans:
        for d in net.routed_delays[p.id]:
            net.right_variant[(p.id, d)] = net._add_node("right_variant", (p.id, d), 0)
    for p in plans:
        net.right_plan[p.id] = net._add_node("right_plan", p.id, 0)
    net.sink_id = net._add_node("sink", None, -n_plans)

    for p in plans:
        net._add_edge(net.source_id, net.left_plan[p.id], 0)
    for v in instance.vehicles:
        net._add_edge(net.source_id, net.vehicle_node[v.id], 0)
    for p in plans:
        for d in net.routed_delays[p.id]:
            net.left_struct_edge[(p.id, d)] = net._add_edge(
                net.left_plan[p.id], net.left_variant[(p.id, d)], 0
            )
    for conn in gen.connections:
        origin = conn.origin
        if isinstance(origin, Vehicle):
            tail = net.vehicle_node[origin.id]
        else:
            key = (origin.plan_id, origin.delay)
            tail = net.left_variant.get(key, net.left_plan.get(origin.plan_id))
            if key not in net.left_variant and origin.delay > 0:
                raise InputError(f"connection origin {key} has no variant node")
        tkey = (conn.target.plan_id, conn.target.delay)
        head = net.right_variant.get(tkey, net.right_plan.get(conn.target.plan_id))
        if tkey not in net.right_variant and conn.target.delay > 0:
            raise InputError(f"connection target {tkey} has no variant node")
        eid = net._add_edge(tail, head, conn.cost)
        net.connection_edges.append(eid)
        net.edge_connection[eid] = conn
    for p in plans:
        for d in net.routed_delays[p.id]:
            net.right_struct_edge[(p.id, d)] = net._add_edge(
                net.right_variant[(p.id, d)], net.right_plan[p.id], 0
            )
    for p in plans:
        net.sink_edge[p.id] = net._add_edge(net.right_plan[p.id], net.sink_id, 0)
    return net


def _arc_arrays(network: FlowNetwork):
    """Static residual-arc arrays, cached on the network (edges are immutable).

    Arc 2i is edge i forward, arc 2i+1 its reversal.  Two permutations give
    CSR-style access: by tail for graph walks, by head for the segmented
    Bellman relaxation.
    """
    cached = getattr(network, "_arc_cache", None)
    if cached is not None:
        return cached
    m = len(network.edges)
    n = len(network.nodes)
    tails = np.empty(2 * m, dtype=np.int64)
    heads = np.empty(2 * m, dtype=np.int64)
    cost = np.empty(2 * m, dtype=np.int64)
    upper = np.empty(2 * m, dtype=np.int64)
    for i, e in enumerate(network.edges):
        tails[2 * i] = e.tail
        heads[2 * i] = e.head
        cost[2 * i] = e.cost
        upper[2 * i] = e.upper
        tails[2 * i + 1] = e.head
        heads[2 * i + 1] = e.tail
        cost[2 * i + 1] = -e.cost
        upper[2 * i + 1] = 0
    by_tail = np.argsort(tails, kind="stable")
    by_head = np.argsort(heads, kind="stable")
    tail_starts = np.searchsorted(tails[by_tail], np.arange(n + 1))
    head_starts = np.searchsorted(heads[by_head], np.arange(n + 1))
    cache = (tails, heads, cost, upper, by_tail, tail_starts, by_head, head_starts)
    network._arc_cache = cache
    return cache


def _shortest_distances(n, src, caps, rc_head_sorted, tails_h, head_starts, head_empty):
    """Exact shortest distances over residual arcs via segmented relaxation.

    Costs are reduced by the current potentials; repeated whole-graph
    relaxation rounds converge in at most the hop length of the longest
    shortest path.
    """
    dist = np.full(n, INF, dtype=np.int64)
    dist[src] = 0
    cap_h = caps  # already permuted by caller
    while True:
        cand = np.where(cap_h > 0, dist[tails_h] + rc_head_sorted, INF)
        seg = np.minimum.reduceat(cand, head_starts[:-1]) if len(cand) else np.full(n, INF, dtype=np.int64)
        if len(cand):
            seg = np.where(head_empty, INF, seg)
        new = np.minimum(dist, seg)
        new[src] = 0
        if np.array_equal(new, dist):
            return dist
        dist = new


def solve_mcf(
    network: FlowNetwork,
    disabled_edges: frozenset[int] = frozenset(),
    initial_potentials: tuple[int, ...] | None = None,
) -> FlowAssignment:
    """Minimum-cost integral flow via successive shortest augmenting paths.

    Node potentials keep reduced costs non-negative; each phase computes
    exact shortest distances, updates the potentials, and then batches all
    unit augmentations of that reduced length through a blocking flow over
    the tight (zero reduced cost) arcs.  Raises ``FlowInfeasibleError``
    naming the first unreachable plan when fewer units than plans fit.
    """
    n = len(network.nodes)
    tails, heads, cost, upper, by_tail, tail_starts, by_head, head_starts = _arc_arrays(network)
    caps = upper.copy()
    if disabled_edges:
        idx = np.fromiter((2 * e for e in disabled_edges), dtype=np.int64)
        caps[idx] = 0

    pi = np.zeros(n, dtype=np.int64)
    if initial_potentials is not None and len(initial_potentials) == n:
        candidate = np.asarray(initial_potentials, dtype=np.int64)
        forward = np.arange(0, len(caps), 2)
        live = forward[caps[forward] > 0]
        if live.size == 0 or (cost[live] + candidate[tails[live]] - candidate[heads[live]] >= 0).all():
            pi = candidate.copy()

    src, snk = network.source_id, network.sink_id
    tails_h = tails[by_head]
    cost_h = cost[by_head]
    heads_t = heads[by_tail]
    tails_t = tails[by_tail]
    head_empty = head_starts[1:] == head_starts[:-1]

    sent = 0
    supply = network.supply
    while sent < supply:
        rc_h = cost_h + pi[tails_h] - pi[heads[by_head]]
        dist = _shortest_distances(n, src, caps[by_head], rc_h, tails_h, head_starts, head_empty)
        d_sink = int(dist[snk])
        if d_sink >= INF:
            raise FlowInfeasibleError(_first_unreachable_plan(network, caps, dist))
        pi = pi + np.minimum(dist, d_sink)

        # tight residual arcs, grouped by tail for the blocking flow
        rc_t = cost[by_tail] + pi[tails_t] - pi[heads_t]
        tight_t = (caps[by_tail] > 0) & (rc_t == 0)
        sel = by_tail[tight_t]
        sel_tails = tails[sel]
        starts = np.searchsorted(sel_tails, np.arange(n + 1))
        sel_heads = heads[sel].tolist()
        sel_list = sel.tolist()

        level = [-1] * n
        level[src] = 0
        queue = [src]
        for u in queue:
            lu = level[u] + 1
            for k in range(starts[u], starts[u + 1]):
                v = sel_heads[k]
                if level[v] < 0 and caps[sel_list[k]] > 0:
                    level[v] = lu
                    queue.append(v)
        if level[snk] < 0:  # pragma: no cover - the shortest path is tight
            raise InfeasibleError("internal: tight subgraph lost the sink")
        iters = [int(starts[u]) for u in range(n)]
        ends = [int(starts[u + 1]) for u in range(n)]
        stack = [src]
        path: list[int] = []
        while stack and sent < supply:
            u = stack[-1]
            if u == snk:
                for a in path:
                    caps[a] -= 1
                    caps[a ^ 1] += 1
                sent += 1
                stack = [src]
                path = []
                continue
            advanced = False
            while iters[u] < ends[u]:
                k = iters[u]
                v = sel_heads[k]
                a = sel_list[k]
                if caps[a] > 0 and level[v] == level[u] + 1:
                    stack.append(v)
                    path.append(a)
                    advanced = True
                    break
                iters[u] += 1
            if not advanced:
                level[u] = -1
                stack.pop()
                if path:
                    path.pop()
                if stack:
                    iters[stack[-1]] += 1

    flows_arr = caps[1::2]  # reverse-arc capacity equals the forward flow
    flows = tuple(int(f) for f in flows_arr)
    total = sum(int(network.edges[i].cost) * flows[i] for i in range(len(network.edges)))
    return FlowAssignment(flows, total, tuple(int(p) for p in pi))


def _first_unreachable_plan(network, caps, dist) -> int | None:
    missing = []
    for pid, eid in network.sink_edge.items():
        if caps[2 * eid + 1] == 0:  # no unit delivered for this plan yet
            node = network.right_plan[pid]
            missing.append((pid, bool(dist[node] >= INF)))
    for pid, unreachable in sorted(missing):
        if unreachable:
            return pid
    return min((pid for pid, _ in missing), default=None)


def residual_is_optimal(
    network: FlowNetwork,
    assignment: FlowAssignment,
    disabled_edges: frozenset[int] = frozenset(),
) -> bool:
    """Certificate check: no residual arc has a negative reduced cost."""
    pi = assignment.potentials
    for i, e in enumerate(network.edges):
        if i in disabled_edges:
            continue
        f = assignment.flows[i]
        if f < e.upper and e.cost + pi[e.tail] - pi[e.head] < 0:
            return False
        if f > 0 and -e.cost + pi[e.head] - pi[e.tail] < 0:
            return False
    return True


def check_conservation(network: FlowNetwork, assignment: FlowAssignment) -> None:
    """Assert flow conservation and bounds exactly; raises on violation."""
    balance = [0] * len(network.nodes)
    for i, e in enumerate(network.edges):
        f = assignment.flows[i]
        if not (e.lower <= f <= e.upper):
            raise InfeasibleError(f"edge {i} flow {f} outside [{e.lower}, {e.upper}]")
        balance[e.tail] += f
        balance[e.head] -= f
    for node in network.nodes:
        if balance[node.id] != node.supply:
            raise InfeasibleError(
                f"node {node.id} ({node.kind}) balance {balance[node.id]} != supply {node.supply}"
            )
