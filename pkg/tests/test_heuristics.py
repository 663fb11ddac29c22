from __future__ import annotations

import numpy as np
import pytest

from windrouter import (
    brute_force_oracle,
    build_layered_graph,
    build_transformed_graph,
    cost_bias,
    decode_layered_solution,
    encode_solution_layered,
    generate_synthetic_site,
    sph,
    sph_radial,
    verify_solution,
)

from helpers import toy_instance


def test_sph_takes_single_sufficient_turbine():
    instance = toy_instance(
        [(1000.0, 0.0), (4000.0, 0.0)],
        profits=[6.0, 6.0],
        build_costs=[900.0, 900.0],
        quota_mw=5.0,
    )
    graph = build_transformed_graph(instance)
    result = sph(graph, instance)
    assert result.feasible
    assert result.solution.selected == (1,)
    assert result.trace == (1,)
    sub = instance.substations[0].id
    assert result.solution.arcs == ((sub, 1),)


def test_sph_zero_quota_is_empty():
    instance = toy_instance([(1000.0, 0.0)], profits=[5.0], quota_mw=0.0)
    graph = build_transformed_graph(instance)
    result = sph(graph, instance)
    assert result.feasible
    assert result.solution.selected == ()
    assert result.solution.total_cost_keur == 0.0


def test_sph_infeasible_when_spacing_blocks_quota():
    instance = toy_instance(
        [(1000.0, 0.0), (1100.0, 0.0)],
        profits=[5.0, 5.0],
        quota_mw=9.0,
        d_min_m=1200.0,
    )
    graph = build_transformed_graph(instance)
    result = sph(graph, instance)
    assert not result.feasible
    assert result.solution is None


def test_sph_cost_upper_bounds_optimum():
    for seed in range(15):
        instance = generate_synthetic_site(8, seed=600 + seed)
        graph = build_transformed_graph(instance)
        result = sph(graph, instance)
        assert result.feasible
        optimum = brute_force_oracle(instance, graph=graph)
        assert result.solution.total_cost_keur >= optimum.total_cost_keur - 1e-9
        assert verify_solution(instance, result.solution) == []


def test_sph_deterministic():
    instance = generate_synthetic_site(9, seed=77)
    graph = build_transformed_graph(instance)
    a = sph(graph, instance)
    b = sph(graph, instance)
    assert a.solution == b.solution and a.trace == b.trace


def test_sph_tie_breaks_toward_smaller_ids():
    # two identical candidates equidistant from the substation
    instance = toy_instance(
        [(2000.0, 0.0), (-2000.0, 0.0)],
        profits=[5.0, 5.0],
        build_costs=[800.0, 800.0],
        quota_mw=4.0,
    )
    graph = build_transformed_graph(instance)
    result = sph(graph, instance)
    assert result.solution.selected == (1,)


def test_sph_radial_hop_one_feeds_everything_directly():
    instance = generate_synthetic_site(7, seed=9, quota=None)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, 1)
    result = sph_radial(layered, instance)
    assert result.feasible
    sub = instance.substations[0].id
    assert all(t == sub for t, _ in result.solution.arcs)
    assert all(len(s) == 1 for s in result.solution.strings)


def test_sph_radial_pigeonhole_on_string_count():
    coords = [(800.0 * k, 400.0 * (k % 3)) for k in range(1, 8)]
    instance = toy_instance(coords, profits=[5.0] * 7, quota_mw=34.9, d_min_m=0.0)
    graph = build_transformed_graph(instance)
    layered = build_layered_graph(graph, 6)
    result = sph_radial(layered, instance)
    assert result.feasible
    assert len(result.solution.selected) == 7
    assert len(result.solution.strings) >= 2


def test_sph_radial_decodes_and_verifies():
    for seed in range(15):
        instance = generate_synthetic_site(8, seed=700 + seed)
        graph = build_transformed_graph(instance)
        for hop in (1, 2, 3):
            layered = build_layered_graph(graph, hop)
            result = sph_radial(layered, instance)
            assert result.feasible
            assert verify_solution(instance, result.solution, hop=hop) == []
            chosen = encode_solution_layered(layered, result.solution)
            decoded = decode_layered_solution(layered, chosen)
            assert decoded.selected == result.solution.selected


def test_cost_bias_pointwise():
    costs = np.array([10.0, 20.0, 30.0])
    assert np.array_equal(cost_bias(costs, np.zeros(3)), costs)
    assert np.array_equal(cost_bias(costs, np.ones(3)), np.zeros(3))
    biased = cost_bias(costs, np.array([0.0, 0.5, 0.0]))
    assert biased.tolist() == [10.0, 10.0, 30.0]
    with pytest.raises(Exception):
        cost_bias(costs, np.array([0.0, 1.5, 0.0]))
