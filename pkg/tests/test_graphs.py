from __future__ import annotations

import pytest

from windrouter import (
    CorrespondenceError,
    aggregate_selection,
    build_layered_graph,
    build_transformed_graph,
    decode_layered_solution,
    encode_solution_layered,
    generate_synthetic_site,
    sph_radial,
)
from windrouter.graphs import (
    KIND_COPY,
    KIND_DOUBLE,
    KIND_POSITION,
    KIND_ROOT,
    Arc,
    GraphNode,
    TransformedGraph,
)

from helpers import toy_instance


def test_arc_cost_carries_head_build_cost():
    instance = toy_instance(
        coords=[(1000.0, 0.0)], build_costs=[1000.0], quota_mw=1.0, cable_cost=504.0
    )
    graph = build_transformed_graph(instance)
    idx = {(graph.nodes[a.tail].kind, graph.nodes[a.head].kind): a for a in graph.arcs}
    into_position = idx[(KIND_ROOT, KIND_POSITION)]
    assert into_position.cost_keur == pytest.approx(1504.0, abs=1e-9)
    into_substation = idx[(KIND_POSITION, KIND_ROOT)]
    assert into_substation.cost_keur == pytest.approx(504.0, abs=1e-9)  # no build share


def test_node_and_arc_counts():
    instance = toy_instance(coords=[(1000.0, 0.0), (0.0, 1000.0), (1000.0, 1000.0)])
    graph = build_transformed_graph(instance)
    assert len(graph.nodes) == 1 + 3 + 3  # merged root, positions, doubles
    assert len(graph.arcs) == 12 + 6  # 2*C(4,2) directed plus the doubling arcs
    for pid, (select_idx, skip_idx) in graph.doubling.items():
        select, skip = graph.arcs[select_idx], graph.arcs[skip_idx]
        assert select.cost_keur == 0.0 and skip.cost_keur == 0.0
        double = select.head
        incoming = [a for a in graph.arcs if a.head == double]
        assert len(incoming) == 2


def _four_position_graph() -> TransformedGraph:
    """Incomplete site graph: root sees 1 and 2; 3 and 4 sit one hop deeper."""
    nodes = [GraphNode(KIND_ROOT, 0)] + [GraphNode(KIND_POSITION, i) for i in (1, 2, 3, 4)]
    arcs = []
    edges = [(0, 1), (0, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    idx = {n.ref: k for k, n in enumerate(nodes)}
    for a, b in edges:
        cost = 10.0 if a == 0 else 1.0  # keep the root cost test quiet
        arcs.append(Arc(idx[a], idx[b], cost, cost))
        arcs.append(Arc(idx[b], idx[a], cost, cost))
    doubling = {}
    for pid in (1, 2, 3, 4):
        nodes.append(GraphNode(KIND_DOUBLE, pid))
        double = len(nodes) - 1
        arcs.append(Arc(idx[0], double, 0.0, 0.0))
        skip = len(arcs) - 1
        arcs.append(Arc(idx[pid], double, 0.0, 0.0))
        doubling[pid] = (len(arcs) - 1, skip)
    return TransformedGraph(nodes=nodes, arcs=arcs, root=0, doubling=doubling, instance=None)


def test_layered_reachable_copies_match_hand_construction():
    layered = build_layered_graph(_four_position_graph(), hop_limit=3)
    expected = {(1, 1), (2, 1), (3, 2), (4, 2), (1, 3), (2, 3), (3, 3), (4, 3)}
    assert layered.reachable_copies == expected


def test_layered_hop_one_only_first_layer():
    layered = build_layered_graph(_four_position_graph(), hop_limit=1)
    assert all(h == 1 for _, h in layered.reachable_copies)
    assert {p for p, _ in layered.reachable_copies} == {1, 2}


def test_root_cost_test_can_empty_higher_layers():
    # substation centered between the positions: every inter-position arc
    # costs at least the direct feed, so the test removes them all
    instance = toy_instance(
        coords=[(1000.0, 0.0), (0.0, 1000.0), (-1000.0, 0.0)],
        substations=[(0.0, 0.0)],
    )
    graph = build_transformed_graph(instance)
    pruned = build_layered_graph(graph, hop_limit=3)
    assert {c for c in pruned.reachable_copies if c[1] > 1} == set()
    unpruned = build_layered_graph(graph, hop_limit=3, root_cost_test=False)
    assert {c for c in unpruned.reachable_copies if c[1] > 1}


def test_layered_arc_levels_structure():
    instance = generate_synthetic_site(6, seed=8)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, hop_limit=3)
    for arc, level in zip(layered.arcs, layered.arc_levels):
        head = layered.nodes[arc.head]
        if level == 0:
            assert layered.nodes[arc.tail].kind == KIND_ROOT
            assert head.kind in (KIND_DOUBLE, KIND_COPY)
            if head.kind == KIND_COPY:
                assert head.layer == 1
        elif level == 1:
            assert head.kind == KIND_DOUBLE
            assert layered.nodes[arc.tail].kind == KIND_COPY
        else:
            assert head.kind == KIND_COPY and head.layer == level
            tail = layered.nodes[arc.tail]
            assert tail.kind == KIND_COPY and tail.layer == level - 1


def test_aggregate_selection_counts():
    instance = generate_synthetic_site(5, seed=12)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, hop_limit=3, root_cost_test=False)
    assert aggregate_selection(layered, []) == ({}, {})

    ids = [p.id for p in instance.positions]
    a, b = ids[0], ids[1]
    root = layered.root
    arc1 = layered.arc_index[(root, layered.copy_index[(a, 1)])]
    arc2 = layered.arc_index[(layered.copy_index[(a, 1)], layered.copy_index[(b, 2)])]
    sel_arc = layered.arc_index[(layered.copy_index[(a, 1)], layered.double_index[a])]
    x_arcs, x_sel = aggregate_selection(layered, [arc1, arc2, sel_arc])
    assert x_arcs[(a, b)] == 1
    assert x_arcs[(instance.substations[0].id, a)] == 1
    assert x_sel[a] == 1


def test_aggregate_same_flat_arc_two_layers():
    instance = generate_synthetic_site(5, seed=12)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, hop_limit=4, root_cost_test=False)
    ids = [p.id for p in instance.positions]
    a, b = ids[0], ids[1]
    chosen = [
        layered.arc_index[(layered.copy_index[(a, 1)], layered.copy_index[(b, 2)])],
        layered.arc_index[(layered.copy_index[(a, 3)], layered.copy_index[(b, 4)])],
    ]
    x_arcs, _ = aggregate_selection(layered, chosen)
    assert x_arcs[(a, b)] == 2


def test_decode_simple_string():
    instance = generate_synthetic_site(4, seed=3)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, hop_limit=2, root_cost_test=False)
    ids = [p.id for p in instance.positions]
    a, b = ids[0], ids[1]
    chosen = [
        layered.arc_index[(layered.root, layered.copy_index[(a, 1)])],
        layered.arc_index[(layered.copy_index[(a, 1)], layered.copy_index[(b, 2)])],
        layered.arc_index[(layered.copy_index[(a, 1)], layered.double_index[a])],
        layered.arc_index[(layered.copy_index[(b, 2)], layered.double_index[b])],
    ]
    for pid in ids[2:]:
        chosen.append(layered.arc_index[(layered.root, layered.double_index[pid])])
    solution = decode_layered_solution(layered, chosen)
    assert solution.selected == (a, b)
    assert solution.strings == ((a, b),)
    sub = instance.substations[0].id
    assert (sub, a) in solution.arcs and (a, b) in solution.arcs


def test_decode_rejects_two_copies_of_one_position():
    instance = generate_synthetic_site(4, seed=3)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, hop_limit=3, root_cost_test=False)
    ids = [p.id for p in instance.positions]
    a, b = ids[0], ids[1]
    chosen = [
        layered.arc_index[(layered.root, layered.copy_index[(a, 1)])],
        layered.arc_index[(layered.copy_index[(a, 1)], layered.copy_index[(b, 2)])],
        layered.arc_index[(layered.copy_index[(b, 2)], layered.copy_index[(a, 3)])],
    ]
    with pytest.raises(CorrespondenceError):
        decode_layered_solution(layered, chosen)


def test_decode_empty_tree_is_empty_solution():
    instance = generate_synthetic_site(4, seed=3)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, hop_limit=2)
    chosen = [
        layered.arc_index[(layered.root, layered.double_index[p.id])] for p in instance.positions
    ]
    solution = decode_layered_solution(layered, chosen)
    assert solution.selected == ()
    assert solution.total_cost_keur == 0.0


def test_encode_decode_round_trip_on_heuristic_layouts():
    for seed in range(20):
        instance = generate_synthetic_site(6 + seed % 4, seed=seed)
        graph = build_transformed_graph(instance)
        layered = build_layered_graph(graph, hop_limit=3)
        result = sph_radial(layered, instance)
        assert result.feasible
        chosen = encode_solution_layered(layered, result.solution)
        again = decode_layered_solution(layered, chosen)
        assert again.selected == result.solution.selected
        assert sorted(again.strings) == sorted(result.solution.strings)
        assert again.total_cost_keur == pytest.approx(result.solution.total_cost_keur, abs=1e-9)
