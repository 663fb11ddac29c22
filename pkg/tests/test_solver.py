from __future__ import annotations

import itertools
import math

import pytest

from windrouter import (
    BudgetError,
    InfeasibleError,
    SolverConfig,
    brute_force_oracle,
    build_transformed_graph,
    choose_split_value,
    generate_synthetic_site,
    parse_split_spec,
    solve,
    solve_hop,
    solve_with_split,
    solve_with_strategy,
    sph,
    verify_solution,
)
from windrouter.solution import Solution, make_solution

from helpers import (
    dense_instance,
    exhaustive_hop_optimum,
    exhaustive_tree_cost,
    toy_instance,
)


def _three_site_instance():
    """Profits 9, 8, 5 with no interference; the 9+8 pair covers the quota."""
    return toy_instance(
        coords=[(1500.0, 0.0), (0.0, 1500.0), (-4000.0, -4000.0)],
        profits=[9.0, 8.0, 5.0],
        build_costs=[1000.0, 1000.0, 600.0],
        quota_mw=12.0,
    )


def test_quota_pair_beats_everything_else():
    instance = _three_site_instance()
    result = solve(instance)
    assert result.proven_optimal

    best = math.inf
    best_sel = None
    q = {1: 9.0, 2: 8.0, 3: 5.0}
    for r in range(1, 4):
        for sel in itertools.combinations([1, 2, 3], r):
            if sum(q[i] for i in sel) < 12.0:
                continue
            cost = exhaustive_tree_cost(instance, list(sel))
            if cost < best:
                best, best_sel = cost, sel
    assert best_sel == (1, 2)
    assert result.solution.selected == (1, 2)
    assert result.solution.total_cost_keur == pytest.approx(best, abs=1e-6)


def test_zero_quota_yields_empty_solution():
    instance = toy_instance([(1000.0, 0.0)], profits=[5.0], quota_mw=0.0)
    result = solve(instance)
    assert result.solution.selected == ()
    assert result.solution.total_cost_keur == 0.0
    assert result.proven_optimal


def test_infeasible_instance_raises():
    instance = toy_instance(
        [(1000.0, 0.0), (1100.0, 0.0)], profits=[5.0, 5.0], quota_mw=9.0, d_min_m=1200.0
    )
    with pytest.raises(InfeasibleError):
        solve(instance)
    with pytest.raises(InfeasibleError):
        brute_force_oracle(instance)


def test_oracle_singleton_and_budget():
    instance = toy_instance([(1500.0, 0.0)], profits=[6.0], quota_mw=5.0)
    solution = brute_force_oracle(instance)
    assert solution.selected == (1,)
    big = generate_synthetic_site(13, seed=0)
    with pytest.raises(BudgetError):
        brute_force_oracle(big)


def test_solver_matches_oracle_smoke():
    for seed in range(12):
        instance = generate_synthetic_site(6 + seed % 5, seed=800 + seed)
        graph = build_transformed_graph(instance)
        result = solve(instance, graph=graph)
        oracle = brute_force_oracle(instance, graph=graph)
        assert result.solution.total_cost_keur == pytest.approx(
            oracle.total_cost_keur, abs=1e-6
        )
        assert verify_solution(instance, result.solution) == []


def test_hop_solver_matches_exhaustive_enumeration_smoke():
    for seed in range(6):
        instance = generate_synthetic_site(7, seed=900 + seed)
        for hop in (2, 3):
            result = solve_hop(instance, hop)
            expected = exhaustive_hop_optimum(instance, hop)
            assert result.solution.total_cost_keur == pytest.approx(expected, abs=1e-6)
            assert verify_solution(instance, result.solution, hop=hop) == []


def test_hop_pigeonhole_two_strings():
    coords = [(800.0 * k, 350.0 * (k % 2)) for k in range(1, 8)]
    instance = toy_instance(coords, profits=[5.0] * 7, quota_mw=34.9, d_min_m=0.0)
    result = solve_hop(instance, 6)
    assert len(result.solution.selected) == 7
    assert len(result.solution.strings) >= 2


def test_hop_single_chain_on_collinear_sites():
    coords = [(1000.0 * k, 0.0) for k in range(1, 5)]
    instance = toy_instance(coords, profits=[5.0] * 4, substations=[(0.0, 0.0)], quota_mw=19.9)
    result = solve_hop(instance, 6)
    assert result.solution.strings == ((1, 2, 3, 4),)


def test_hop_monotone_in_limit_and_bounded_by_free_tree():
    for seed in range(6):
        instance = generate_synthetic_site(7, seed=950 + seed)
        flat = solve(instance).solution.total_cost_keur
        costs = [solve_hop(instance, hop).solution.total_cost_keur for hop in (6, 3, 2, 1)]
        assert all(flat <= c + 1e-9 for c in costs)
        # tightening the limit can only raise the optimum
        assert all(a <= b + 1e-9 for a, b in zip(costs, costs[1:]))


def test_split_zero_certifies_up_outright():
    instance = generate_synthetic_site(7, seed=21)
    outcome = solve_with_split(instance, 0.0)
    assert outcome.certificate == "UpOptimalByCorollary"
    assert outcome.down is None
    assert outcome.best().solution.total_cost_keur == pytest.approx(
        solve(instance).solution.total_cost_keur, abs=1e-9
    )


def test_split_above_reachable_interference_lands_down():
    instance = _three_site_instance()  # zero interference everywhere
    outcome = solve_with_split(instance, 1.0)
    assert outcome.up is not None and outcome.up.solution is None
    assert outcome.certificate == "DownOptimal"
    assert outcome.best().solution.total_cost_keur == pytest.approx(
        solve(instance).solution.total_cost_keur, abs=1e-9
    )


def test_split_strategies_recombine_to_unsplit_optimum():
    for seed in (31, 32, 33):
        instance = dense_instance(seed, 8, 3)
        from windrouter import validate

        if validate(instance):
            continue
        graph = build_transformed_graph(instance)
        base = solve(instance, graph=graph).solution.total_cost_keur
        for spec in ("ilb", "heur:0.1", "heur:0.5", "heur:0.8", "mini:1"):
            config = parse_split_spec(spec)
            sv = choose_split_value(instance, config, graph)
            outcome = solve_with_split(
                instance, sv.value_mw, config, graph, proven_lower_bound=sv.proven_minimum_bound
            )
            best = outcome.best()
            assert best is not None, spec
            assert best.solution.total_cost_keur == pytest.approx(base, abs=1e-6), spec


def test_choose_split_value_examples():
    instance = _three_site_instance()  # interference-free
    assert choose_split_value(instance, parse_split_spec("ilb")).value_mw == 0.0

    dense = dense_instance(35, 8, 3)
    graph = build_transformed_graph(dense)
    heur = choose_split_value(dense, parse_split_spec("heur:0.1"), graph)
    full = sph(graph, dense)
    assert heur.value_mw == pytest.approx(0.1 * full.solution.i_tot_mw, abs=1e-12)

    from windrouter import total_interference_lb, n_min

    ilb = total_interference_lb(dense, n_min(dense))
    mini = choose_split_value(dense, parse_split_spec("mini:1"), graph)
    assert mini.value_mw >= ilb - 1e-12


def test_solve_with_strategy_matches_plain_solve():
    instance = dense_instance(36, 8, 3)
    base = solve(instance).solution.total_cost_keur
    for spec in ("none", "ilb", "heur:0.5", "mini:1"):
        result, outcome = solve_with_strategy(instance, parse_split_spec(spec))
        assert result.proven_optimal
        assert result.solution.total_cost_keur == pytest.approx(base, abs=1e-6)
        if spec == "none":
            assert outcome is None


def test_verify_catches_tampering():
    instance = _three_site_instance()
    solution = brute_force_oracle(instance)
    assert verify_solution(instance, solution) == []

    wrong_cost = Solution(
        selected=solution.selected,
        arcs=solution.arcs,
        total_cost_keur=solution.total_cost_keur + 5.0,
        quota_collected_mw=solution.quota_collected_mw,
        i_tot_mw=solution.i_tot_mw,
        strings=solution.strings,
    )
    assert any("cost" in v for v in verify_solution(instance, wrong_cost))

    close = toy_instance(
        [(1000.0, 0.0), (1100.0, 0.0)], profits=[5.0, 5.0], quota_mw=6.0, d_min_m=1200.0
    )
    bad = make_solution(close, selected=[1, 2], arcs=[(100, 1), (1, 2)])
    assert any("minimum distance" in v for v in verify_solution(close, bad))


def test_verify_catches_disconnection_and_missing_quota():
    instance = _three_site_instance()
    sub = instance.substations[0].id
    floating = make_solution(instance, selected=[1, 2], arcs=[(sub, 1), (3, 2)])
    problems = verify_solution(instance, floating)
    assert any("disconnected" in v or "not connected" in v for v in problems)

    short = make_solution(instance, selected=[3], arcs=[(sub, 3)])
    assert any("net quota" in v for v in verify_solution(instance, short))


def test_time_limit_returns_incumbent_unproven():
    instance = generate_synthetic_site(12, seed=55, quota=None)
    config = SolverConfig(time_limit_s=1e-6)
    result = solve(instance, config)
    assert not result.proven_optimal
    assert result.stats.status == "time_limit"
    if result.solution is not None:
        assert result.lower_bound_keur <= result.solution.total_cost_keur + 1e-9


def test_solver_config_validation():
    with pytest.raises(Exception):
        SolverConfig(split="bogus")
    with pytest.raises(Exception):
        SolverConfig(alpha=0.0)
    with pytest.raises(Exception):
        parse_split_spec("heur")
