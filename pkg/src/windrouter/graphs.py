"""Directed cost-shifted graphs, the doubling transformation, and layered graphs.

Selecting a candidate position is encoded structurally: every position i
gets a companion fixed terminal i' reachable through exactly two
zero-cost arcs, one from the root (i stays unbuilt) and one from i
itself (i is built).  Any feasible tree must pick one of the pair, which
turns the quota into a budget on wasted production.

Arc costs carry the head's build cost on top of the cable cost, so a
tree's arc costs sum to exactly cable plus build outlays.  The layered
graph replicates positions once per hop level so that radial string
layouts with a hop limit H become plain arborescences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .errors import CorrespondenceError, InvariantError

if TYPE_CHECKING:
    from .instances import SiteInstance
    from .solution import Solution

ROOT_ID = -1  # node id used for an artificial root in solution arc lists

KIND_ROOT = "root"
KIND_SUBSTATION = "substation"
KIND_POSITION = "position"
KIND_DOUBLE = "double"
KIND_COPY = "copy"


@dataclass(frozen=True)
class GraphNode:
    kind: str
    ref: int | None = None  # position/substation id this node stands for
    layer: int | None = None  # set for layered copies only


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    cost_keur: float
    cable_keur: float  # cost minus the head's build-cost share


@dataclass
class TransformedGraph:
    """Directed graph over root, substations, positions, and doubles."""

    nodes: list[GraphNode]
    arcs: list[Arc]
    root: int  # node index
    doubling: dict[int, tuple[int, int]]  # position id -> (select arc idx, skip arc idx)
    instance: "SiteInstance | None" = None
    routing_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.node_index: dict[tuple[str, int | None], int] = {
            (n.kind, n.ref): i for i, n in enumerate(self.nodes)
        }
        self.arc_index: dict[tuple[int, int], int] = {(a.tail, a.head): i for i, a in enumerate(self.arcs)}

    @property
    def real_node_count(self) -> int:
        return sum(1 for n in self.nodes if n.kind != KIND_DOUBLE)

    def node_of_position(self, pos_id: int) -> int:
        return self.node_index[(KIND_POSITION, pos_id)]

    def node_id(self, idx: int) -> int:
        """External id of a node: position/substation id, ROOT_ID for an artificial root."""
        node = self.nodes[idx]
        return node.ref if node.ref is not None else ROOT_ID

    def min_incoming_cable_keur(self, pos_id: int) -> float:
        """Cheapest cable share of any arc into a position, over all tails."""
        cache = self.routing_cache.setdefault("min_in_cable", {})
        if pos_id not in cache:
            head = self.node_of_position(pos_id)
            cache[pos_id] = min(a.cable_keur for a in self.arcs if a.head == head)
        return cache[pos_id]


def build_transformed_graph(instance: "SiteInstance") -> TransformedGraph:
    """Complete bidirected cost-shifted graph plus the doubling arcs.

    A single substation is merged with the root; several substations
    hang off an artificial root through zero-cost arcs so that no
    substation-to-substation path can appear in a tree.
    """
    nodes: list[GraphNode] = []
    arcs: list[Arc] = []
    subs = instance.substations
    if len(subs) == 1:
        nodes.append(GraphNode(KIND_ROOT, subs[0].id))
        real = [subs[0]]
    else:
        nodes.append(GraphNode(KIND_ROOT, None))
        real = list(subs)
        for s in subs:
            nodes.append(GraphNode(KIND_SUBSTATION, s.id))
    for p in instance.positions:
        nodes.append(GraphNode(KIND_POSITION, p.id))
    real = real + list(instance.positions)

    build_cost = {p.id: p.build_cost_keur for p in instance.positions}
    node_idx: dict[int, int] = {}
    for i, n in enumerate(nodes):
        if n.ref is not None:
            node_idx[n.ref] = i

    if len(subs) > 1:
        for s in subs:
            arcs.append(Arc(0, node_idx[s.id], 0.0, 0.0))

    rate = instance.cable_cost_keur_per_km
    for a in real:
        for b in real:
            if a.id == b.id:
                continue
            cable = rate * math.hypot(a.x_m - b.x_m, a.y_m - b.y_m) / 1000.0
            cost = cable + build_cost.get(b.id, 0.0)
            arcs.append(Arc(node_idx[a.id], node_idx[b.id], cost, cable))

    doubling: dict[int, tuple[int, int]] = {}
    for p in instance.positions:
        nodes.append(GraphNode(KIND_DOUBLE, p.id))
        double_idx = len(nodes) - 1
        arcs.append(Arc(0, double_idx, 0.0, 0.0))  # skip arc: position stays unbuilt
        skip = len(arcs) - 1
        arcs.append(Arc(node_idx[p.id], double_idx, 0.0, 0.0))  # select arc
        doubling[p.id] = (len(arcs) - 1, skip)

    return TransformedGraph(nodes=nodes, arcs=arcs, root=0, doubling=doubling, instance=instance)


@dataclass
class LayeredGraph:
    """Hop-indexed replication of a transformed graph.

    Nodes are the root (and substations), one double per position, and a
    copy (i, h) for every position i reachable in exactly h hops,
    h = 1..H.  Copies without an incoming arc are omitted.  Arcs are
    grouped by level: level 0 leaves the root side (skip arcs and arcs
    into the first layer), level 1 holds the selection arcs from any
    copy down to its double, and level h >= 2 connects layer h-1 to h.
    """

    hop_limit: int
    nodes: list[GraphNode]
    arcs: list[Arc]
    arc_levels: list[int]
    root: int
    graph: TransformedGraph
    k_ub: int | None = None

    def __post_init__(self) -> None:
        self.copy_index: dict[tuple[int, int], int] = {
            (n.ref, n.layer): i for i, n in enumerate(self.nodes) if n.kind == KIND_COPY
        }
        self.double_index: dict[int, int] = {
            n.ref: i for i, n in enumerate(self.nodes) if n.kind == KIND_DOUBLE
        }
        self.arc_index: dict[tuple[int, int], int] = {(a.tail, a.head): i for i, a in enumerate(self.arcs)}

    @property
    def reachable_copies(self) -> set[tuple[int, int]]:
        return set(self.copy_index)

    def last_layer_arc_cap(self) -> int | None:
        """Bound on arcs entering the final layer implied by the turbine cap."""
        if self.k_ub is None:
            return None
        return self.k_ub // self.hop_limit


def build_layered_graph(
    graph: TransformedGraph,
    hop_limit: int,
    k_ub: int | None = None,
    root_cost_test: bool = True,
) -> LayeredGraph:
    """Unroll a transformed graph into hop layers.

    The directed root cost test drops any position-to-position arc whose
    cost is no better than connecting the head straight to the root
    side: such an arc can always be replaced by the direct connection
    without raising the cost or any hop count, so at least one optimal
    layout survives the pruning.
    """
    if hop_limit < 1:
        raise InvariantError("hop limit must be at least 1")

    v0 = [i for i, n in enumerate(graph.nodes) if n.kind in (KIND_ROOT, KIND_SUBSTATION)]
    pos_nodes = [(i, n) for i, n in enumerate(graph.nodes) if n.kind == KIND_POSITION]
    pos_ids = [n.ref for _, n in pos_nodes]

    out_arcs: dict[int, list[Arc]] = {}
    for a in graph.arcs:
        out_arcs.setdefault(a.tail, []).append(a)

    # Cheapest root-side arc into each position, for the root cost test.
    root_cost: dict[int, float] = {}
    for s in v0:
        for a in out_arcs.get(s, ()):  # skip arcs land on doubles; ignore them here
            head_kind = graph.nodes[a.head].kind
            if head_kind == KIND_POSITION:
                pid = graph.nodes[a.head].ref
                if pid not in root_cost or a.cost_keur < root_cost[pid]:
                    root_cost[pid] = a.cost_keur

    nodes: list[GraphNode] = [graph.nodes[i] for i in v0]
    root = 0
    arcs: list[Arc] = []
    levels: list[int] = []
    index: dict[tuple[str, int | None, int | None], int] = {
        (n.kind, n.ref, None): i for i, n in enumerate(nodes)
    }

    for pid in pos_ids:
        nodes.append(GraphNode(KIND_DOUBLE, pid))
        index[(KIND_DOUBLE, pid, None)] = len(nodes) - 1
        arcs.append(Arc(root, len(nodes) - 1, 0.0, 0.0))
        levels.append(0)

    # Layer 1: positions adjacent to the root side.
    current: dict[int, int] = {}
    for si, s in enumerate(v0):
        for a in out_arcs.get(s, ()):  # arcs from the root side into positions
            if graph.nodes[a.head].kind != KIND_POSITION:
                continue
            pid = graph.nodes[a.head].ref
            if pid not in current:
                nodes.append(GraphNode(KIND_COPY, pid, layer=1))
                index[(KIND_COPY, pid, 1)] = len(nodes) - 1
                current[pid] = len(nodes) - 1
            arcs.append(Arc(si, current[pid], a.cost_keur, a.cable_keur))
            levels.append(0)

    all_copies: dict[tuple[int, int], int] = {(pid, 1): idx for pid, idx in current.items()}

    for h in range(2, hop_limit + 1):
        nxt: dict[int, int] = {}
        for pid, tail_idx in sorted(current.items()):
            tail_node = graph.node_of_position(pid)
            for a in out_arcs.get(tail_node, ()):  # position-to-position arcs only
                if graph.nodes[a.head].kind != KIND_POSITION:
                    continue
                hid = graph.nodes[a.head].ref
                if root_cost_test and hid in root_cost and a.cost_keur >= root_cost[hid]:
                    continue
                if hid not in nxt:
                    nodes.append(GraphNode(KIND_COPY, hid, layer=h))
                    index[(KIND_COPY, hid, h)] = len(nodes) - 1
                    nxt[hid] = len(nodes) - 1
                arcs.append(Arc(tail_idx, nxt[hid], a.cost_keur, a.cable_keur))
                levels.append(h)
        for pid, idx in nxt.items():
            all_copies[(pid, h)] = idx
        current = nxt
        if not current:
            break

    # Selection arcs: every reachable copy can close onto its double.
    for (pid, h), idx in sorted(all_copies.items()):
        arcs.append(Arc(idx, index[(KIND_DOUBLE, pid, None)], 0.0, 0.0))
        levels.append(1)

    return LayeredGraph(
        hop_limit=hop_limit,
        nodes=nodes,
        arcs=arcs,
        arc_levels=levels,
        root=root,
        graph=graph,
        k_ub=k_ub,
    )


def aggregate_selection(
    layered: LayeredGraph, chosen_arc_ids: Iterable[int]
) -> tuple[dict[tuple[int, int], int], dict[int, int]]:
    """Collapse a layered arc assignment onto flat arc and selection counts.

    Returns (X_arcs, X_select): X_arcs[(i, j)] counts how many layers
    carry the flat arc i -> j (root-side tails map to their node id),
    X_select[i] counts the selection arcs closed onto i's double.
    """
    x_arcs: dict[tuple[int, int], int] = {}
    x_select: dict[int, int] = {}
    for aid in chosen_arc_ids:
        a = layered.arcs[aid]
        tail, head = layered.nodes[a.tail], layered.nodes[a.head]
        if head.kind == KIND_DOUBLE:
            if tail.kind == KIND_COPY:
                x_select[head.ref] = x_select.get(head.ref, 0) + 1
            continue  # skip arcs from the root do not select anything
        tail_id = tail.ref if tail.kind == KIND_COPY else (tail.ref if tail.ref is not None else ROOT_ID)
        key = (tail_id, head.ref)
        x_arcs[key] = x_arcs.get(key, 0) + 1
    return x_arcs, x_select


def decode_layered_solution(layered: LayeredGraph, chosen_arc_ids: Sequence[int]) -> "Solution":
    """Flatten a layered arborescence into a radial solution.

    Requires the correspondence hypotheses: at most one copy per
    position in the tree and at most one outgoing arc per copy into the
    next layer.  A double reached both through its position and through
    the root skip arc is normalized by ignoring the redundant skip arc.
    """
    from .solution import make_solution

    instance = layered.graph.instance
    if instance is None:
        raise InvariantError("decode requires a graph built from an instance")

    copies_used: dict[int, int] = {}  # position id -> layer
    children: dict[int, list[int]] = {}
    incoming: dict[int, int] = {}
    chosen = sorted(set(chosen_arc_ids))
    for aid in chosen:
        a = layered.arcs[aid]
        head = layered.nodes[a.head]
        if head.kind == KIND_COPY:
            if head.ref in copies_used and copies_used[head.ref] != head.layer:
                raise CorrespondenceError(
                    f"position {head.ref} appears in layers {copies_used[head.ref]} and {head.layer}"
                )
            copies_used[head.ref] = head.layer
            if a.head in incoming:
                raise CorrespondenceError(f"node copy {head.ref}@{head.layer} has two incoming arcs")
            incoming[a.head] = aid
            children.setdefault(a.tail, []).append(a.head)

    for tail_idx, heads in children.items():
        tail = layered.nodes[tail_idx]
        if tail.kind == KIND_COPY:
            next_layer = [h for h in heads if layered.nodes[h].kind == KIND_COPY]
            if len(next_layer) > 1:
                raise CorrespondenceError(
                    f"copy of position {tail.ref} has {len(next_layer)} outgoing arcs to the next layer"
                )

    # Walk root-side arcs to reconstruct the strings in deterministic order.
    sub_ids = sorted(
        n.ref for n in layered.nodes if n.kind in (KIND_ROOT, KIND_SUBSTATION) and n.ref is not None
    )
    strings: list[tuple[int, list[int]]] = []  # (anchor id, ordered position ids)
    arcs: list[tuple[int, int]] = []
    root_node = layered.nodes[layered.root]
    multi_sub = root_node.ref is None
    if multi_sub:
        for sid in sub_ids:
            arcs.append((ROOT_ID, sid))

    starts = []
    for aid in chosen:
        a = layered.arcs[aid]
        tail, head = layered.nodes[a.tail], layered.nodes[a.head]
        if head.kind == KIND_COPY and tail.kind in (KIND_ROOT, KIND_SUBSTATION):
            anchor = tail.ref if tail.ref is not None else ROOT_ID
            starts.append((anchor, a.head))
    for anchor, start_idx in sorted(starts):
        chain = []
        at = start_idx
        while at is not None:
            chain.append(layered.nodes[at].ref)
            nxt = [h for h in children.get(at, []) if layered.nodes[h].kind == KIND_COPY]
            at = nxt[0] if nxt else None
        strings.append((anchor, chain))
        prev = anchor
        for pid in chain:
            arcs.append((prev, pid))
            prev = pid

    selected = sorted(copies_used)
    return make_solution(
        instance,
        selected=selected,
        arcs=arcs,
        strings=[tuple(chain) for _, chain in strings],
    )


def encode_solution_layered(layered: LayeredGraph, solution: "Solution") -> list[int]:
    """Arc ids of the layered arborescence matching a radial solution.

    Raises CorrespondenceError when the solution uses an arc that the
    layered construction pruned or that exceeds the hop limit.
    """
    if solution.strings is None:
        raise CorrespondenceError("encoding requires a radial solution with strings")
    anchor_of: dict[int, int] = {}
    for tail, head in solution.arcs:
        anchor_of[head] = tail

    chosen: list[int] = []
    root_node = layered.graph.nodes[layered.graph.root]
    selected = set(solution.selected)
    for pid, double_idx in sorted(layered.double_index.items()):
        if pid not in selected:
            chosen.append(layered.arc_index[(layered.root, double_idx)])

    for string in solution.strings:
        if len(string) > layered.hop_limit:
            raise CorrespondenceError(f"string {string} exceeds hop limit {layered.hop_limit}")
        prev_idx: int | None = None
        for depth, pid in enumerate(string, start=1):
            copy = layered.copy_index.get((pid, depth))
            if copy is None:
                raise CorrespondenceError(f"no reachable copy for position {pid} at depth {depth}")
            if depth == 1:
                anchor = anchor_of.get(pid)
                tail_idx = next(
                    i
                    for i, n in enumerate(layered.nodes)
                    if n.kind in (KIND_ROOT, KIND_SUBSTATION)
                    and (n.ref == anchor or (n.ref is None and anchor == ROOT_ID))
                )
            else:
                tail_idx = prev_idx
            key = (tail_idx, copy)
            if key not in layered.arc_index:
                raise CorrespondenceError(f"arc into position {pid} at depth {depth} was pruned")
            chosen.append(layered.arc_index[key])
            prev_idx = copy
        chosen.append(layered.arc_index[(prev_idx, layered.double_index[string[-1]])])
        # selection arcs for every member of the string
        for depth, pid in enumerate(string[:-1], start=1):
            copy = layered.copy_index[(pid, depth)]
            chosen.append(layered.arc_index[(copy, layered.double_index[pid])])
    return sorted(set(chosen))


def to_dot(graph: TransformedGraph | LayeredGraph) -> str:
    """Graphviz rendering for debugging."""
    lines = ["digraph g {"]
    for i, n in enumerate(graph.nodes):
        label = f"{n.kind}:{n.ref}" + (f"@{n.layer}" if n.layer is not None else "")
        lines.append(f'  n{i} [label="{label}"];')
    for a in graph.arcs:
        lines.append(f'  n{a.tail} -> n{a.head} [label="{a.cost_keur:.3g}"];')
    lines.append("}")
    return "\n".join(lines)
