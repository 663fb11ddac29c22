"""Exact desk-scale solvers for the integrated layout-and-routing problem.

The search branches over the selection status of each candidate position
(in before out, ordered by profit per build cost).  Connectivity is
enforced constructively: whenever a partial selection already nets the
quota, its exact routing is computed by the subset dynamic programs in
``routing`` and any strict superset is pruned, because adding a turbine
can only add cost.  Pruning otherwise combines spacing propagation,
turbine-count bounds, an optimistic quota completion check, and an
admissible cost bound (build costs plus cheapest feeding cables).

An interference split solves the problem twice over a threshold value:
once restricted to solutions at or above it, once below with the first
result as a cutoff.  When the threshold is a proven lower bound on the
least achievable interference, the second run is unnecessary and the
first result is certified optimal outright.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from . import bounds as bounds_mod
from . import routing
from .errors import BudgetError, InfeasibleError, InvariantError
from .graphs import TransformedGraph, build_layered_graph, build_transformed_graph
from .heuristics import sph, sph_radial
from .solution import Solution, empty_solution, make_solution

if TYPE_CHECKING:
    from .instances import SiteInstance

COST_EPS = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the exact solver.

    split selects the interference-splitting strategy: "none", "ilb"
    (proven lower bound), "heur" (fraction alpha of the construction
    heuristic's interference), or "mini" (best interference found by the
    auxiliary minimization within tau seconds).
    """

    time_limit_s: float | None = None
    split: str = "none"
    alpha: float = 0.1
    tau_s: float = 1.0
    hop: int | None = None
    exact_budget: int = 12
    threads: int = 1

    def __post_init__(self) -> None:
        if self.split not in ("none", "ilb", "heur", "mini"):
            raise InvariantError(f"unknown split strategy {self.split!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise InvariantError("alpha must lie in (0, 1]")
        if self.tau_s <= 0.0:
            raise InvariantError("tau must be positive")
        if self.threads < 1:
            raise InvariantError("threads must be at least 1")


def parse_split_spec(text: str) -> SolverConfig:
    """Parse a CLI split spec like "none", "ilb", "heur:0.5", "mini:300"."""
    if text in ("none", "ilb"):
        return SolverConfig(split=text)
    kind, sep, arg = text.partition(":")
    if not sep or kind not in ("heur", "mini"):
        raise InvariantError(f"split spec must be none|ilb|heur:ALPHA|mini:TAU, got {text!r}")
    value = float(arg)
    if kind == "heur":
        return SolverConfig(split="heur", alpha=value)
    return SolverConfig(split="mini", tau_s=value)


@dataclass
class SolveStats:
    nodes: int = 0
    routed_leaves: int = 0
    elapsed_s: float = 0.0
    status: str = "optimal"  # optimal | time_limit | infeasible | cutoff_empty


@dataclass(frozen=True)
class SolveResult:
    solution: Solution | None
    proven_optimal: bool
    lower_bound_keur: float
    stats: SolveStats


@dataclass(frozen=True)
class SplitValue:
    value_mw: float
    proven_minimum_bound: bool  # True when no feasible solution can fall below it


@dataclass(frozen=True)
class SplitOutcome:
    i_split_mw: float
    up: SolveResult | None
    down: SolveResult | None
    certificate: str | None  # UpOptimalByCorollary | UpOptimalByCutoff | DownOptimal | Infeasible

    def best(self) -> SolveResult | None:
        candidates = [r for r in (self.up, self.down) if r is not None and r.solution is not None]
        if not candidates:
            return None
        return min(candidates, key=lambda r: (r.solution.total_cost_keur, r.solution.selected))


@dataclass
class _Node:
    depth: int
    chosen: tuple[int, ...]
    banned: int
    itot_in: float
    build_in: float
    cable_in: float
    cross_vec: np.ndarray


class _Search:
    """One selection branch-and-bound run over a fixed constraint window.

    Nodes live on an explicit stack (in-branch on top), so a time limit
    leaves a well-defined open frontier whose cheapest bound is reported
    as the proven lower bound alongside the incumbent.
    """

    def __init__(
        self,
        instance: "SiteInstance",
        graph: TransformedGraph,
        *,
        hop: int | None,
        itot_min: float,
        itot_max: float,
        cost_cutoff: float | None,
        time_limit_s: float | None,
    ) -> None:
        self.instance = instance
        self.graph = graph
        self.hop = hop
        self.itot_min = itot_min
        self.itot_max = itot_max
        self.cost_cutoff = cost_cutoff
        self.deadline = None if time_limit_s is None else time.monotonic() + time_limit_s

        n = instance.n_positions
        self.n = n
        self.q = instance.profits_mw
        self.inter = instance.interference_or_default.values
        self.cross = self.inter + self.inter.T
        self.costs = np.array([p.build_cost_keur for p in instance.positions], dtype=float)
        self.ids = [p.id for p in instance.positions]
        self.conflicts = bounds_mod.dmin_conflict_masks(instance)
        self.min_cable = np.array(
            [graph.min_incoming_cable_keur(p.id) for p in instance.positions], dtype=float
        )
        # Count caps hold for globally optimal solutions; combined with the
        # split logic they preserve the recombined optimum (see module doc).
        self.k_ub = bounds_mod.k_upper_bound(instance)
        try:
            self.n_min = bounds_mod.n_min(instance)
        except InfeasibleError:
            self.n_min = n + 1  # quota unreachable even interference-free
        # in before out on the most quota per kEUR of build cost
        self.order = sorted(range(n), key=lambda i: (-(self.q[i] / self.costs[i]), self.ids[i]))

        self.quota = instance.quota_mw
        self.best_solution: Solution | None = None
        self.best_cost = math.inf
        self.stats = SolveStats()

    # -- candidate handling ------------------------------------------------

    def _offer(self, solution: Solution) -> None:
        cost = solution.total_cost_keur
        if self.cost_cutoff is not None and cost >= self.cost_cutoff - COST_EPS:
            return
        if cost < self.best_cost - COST_EPS or (
            abs(cost - self.best_cost) <= COST_EPS
            and (self.best_solution is None or solution.selected < self.best_solution.selected)
        ):
            self.best_cost = cost
            self.best_solution = solution

    def _route(self, chosen: Sequence[int]) -> Solution:
        sel_ids = sorted(self.ids[i] for i in chosen)
        self.stats.routed_leaves += 1
        subs = self.instance.substations
        if self.hop is None:
            terminals = ([s.id for s in subs] if len(subs) > 1 else []) + sel_ids
            _, arcs = routing.steiner_arborescence(self.graph, terminals)
            return make_solution(self.instance, selected=sel_ids, arcs=arcs)
        _, arcs, strings = routing.string_layout(self.graph, sel_ids, self.hop)
        return make_solution(self.instance, selected=sel_ids, arcs=arcs, strings=strings)

    # -- search ------------------------------------------------------------

    def run(self, initial: Solution | None) -> SolveResult:
        start = time.monotonic()
        if initial is not None:
            self._offer(initial)
        if self.quota <= 0.0:
            self._offer(empty_solution(self.instance, radial=self.hop is not None))
            self.stats.elapsed_s = time.monotonic() - start
            return SolveResult(self.best_solution, True, self.best_cost, self.stats)

        stack = [_Node(0, (), 0, 0.0, 0.0, 0.0, np.zeros(self.n))]
        timed_out = False
        while stack:
            if (
                self.deadline is not None
                and self.stats.nodes % 64 == 0
                and time.monotonic() > self.deadline
            ):
                timed_out = True
                break
            node = stack.pop()
            self._expand(node, stack)

        self.stats.elapsed_s = time.monotonic() - start
        if timed_out:
            self.stats.status = "time_limit"
            frontier = [self._node_lb(nd) for nd in stack]
            lb = min([self.best_cost] + frontier) if (frontier or self.best_solution) else 0.0
            return SolveResult(self.best_solution, False, lb, self.stats)
        if self.best_solution is None:
            self.stats.status = "cutoff_empty" if self.cost_cutoff is not None else "infeasible"
            return SolveResult(None, True, math.inf, self.stats)
        return SolveResult(self.best_solution, True, self.best_cost, self.stats)

    def _node_lb(self, node: _Node) -> float:
        lb = node.build_in + node.cable_in
        net = float(self.q[list(node.chosen)].sum()) - node.itot_in if node.chosen else 0.0
        if net < self.quota - 1e-9:
            extra = math.inf
            for i in self.order[node.depth :]:
                if node.banned >> i & 1:
                    continue
                extra = min(extra, self.costs[i] + self.min_cable[i])
            lb += 0.0 if math.isinf(extra) else extra
        return lb

    def _admits(self, lb: float) -> bool:
        limit = self.best_cost + COST_EPS
        if self.cost_cutoff is not None:
            limit = min(limit, self.cost_cutoff - COST_EPS)
        return lb <= limit

    def _expand(self, node: _Node, stack: list[_Node]) -> None:
        self.stats.nodes += 1
        if node.itot_in > self.itot_max + 1e-12:
            return  # interference only grows with more turbines
        if len(node.chosen) > self.k_ub:
            return

        net = float(self.q[list(node.chosen)].sum()) - node.itot_in if node.chosen else 0.0

        if net >= self.quota - 1e-9 and node.itot_in >= self.itot_min - 1e-12:
            if self._admits(node.build_in + node.cable_in):
                self._offer(self._route(node.chosen))
            return  # supersets are strictly more expensive

        undecided = [i for i in self.order[node.depth :] if not (node.banned >> i & 1)]
        if len(node.chosen) + len(undecided) < self.n_min:
            return
        # Optimistic completion: each undecided position adds at most its
        # profit net of interference against the current selection.
        gain = sum(max(0.0, float(self.q[i] - node.cross_vec[i])) for i in undecided)
        if net + gain < self.quota - 1e-9:
            return
        if self.itot_min > 0.0:
            reach = node.itot_in
            if undecided:  # most interference any completion can reach
                reach += float(sum(node.cross_vec[i] for i in undecided))
                reach += float(self.inter[np.ix_(undecided, undecided)].sum())
            if reach < self.itot_min - 1e-12:
                return

        if not self._admits(self._node_lb(node)):
            return
        if node.depth == self.n:
            return

        i = self.order[node.depth]
        if node.banned >> i & 1:
            stack.append(
                _Node(
                    node.depth + 1,
                    node.chosen,
                    node.banned,
                    node.itot_in,
                    node.build_in,
                    node.cable_in,
                    node.cross_vec,
                )
            )
            return

        out_child = _Node(
            node.depth + 1,
            node.chosen,
            node.banned | (1 << i),
            node.itot_in,
            node.build_in,
            node.cable_in,
            node.cross_vec,
        )
        in_child = _Node(
            node.depth + 1,
            node.chosen + (i,),
            node.banned | self.conflicts[i],
            node.itot_in + float(node.cross_vec[i]),
            node.build_in + float(self.costs[i]),
            node.cable_in + float(self.min_cable[i]),
            node.cross_vec + self.cross[i],
        )
        stack.append(out_child)
        stack.append(in_child)  # explore the in-branch first


def _initial_incumbent(
    instance: "SiteInstance",
    graph: TransformedGraph,
    hop: int | None,
    itot_min: float,
    itot_max: float,
) -> Solution | None:
    if hop is None:
        result = sph(graph, instance)
    else:
        layered = build_layered_graph(graph, hop)
        result = sph_radial(layered, instance)
    if not result.feasible or result.solution is None:
        return None
    s = result.solution
    if s.i_tot_mw < itot_min - 1e-12 or s.i_tot_mw > itot_max + 1e-12:
        return None
    return s


def _run_search(
    instance: "SiteInstance",
    graph: TransformedGraph | None,
    config: SolverConfig | None,
    *,
    hop: int | None,
    itot_min: float = 0.0,
    itot_max: float = math.inf,
    cost_cutoff: float | None = None,
    warm_start: bool = True,
) -> SolveResult:
    config = config or SolverConfig()
    graph = graph or build_transformed_graph(instance)
    search = _Search(
        instance,
        graph,
        hop=hop,
        itot_min=itot_min,
        itot_max=itot_max,
        cost_cutoff=cost_cutoff,
        time_limit_s=config.time_limit_s,
    )
    initial = _initial_incumbent(instance, graph, hop, itot_min, itot_max) if warm_start else None
    return search.run(initial)


def solve(
    instance: "SiteInstance",
    config: SolverConfig | None = None,
    graph: TransformedGraph | None = None,
) -> SolveResult:
    """Cost-minimal feasible layout and free-tree cabling.

    Raises InfeasibleError when no selection can net the quota; returns
    the incumbent with proven_optimal False when the time limit strikes
    first.  Ties between equal-cost solutions go to the smaller selection.
    """
    result = _run_search(instance, graph, config, hop=None)
    if result.solution is None and result.proven_optimal:
        raise InfeasibleError("no spacing-feasible selection nets the quota")
    return result


def solve_hop(
    instance: "SiteInstance",
    hop: int,
    config: SolverConfig | None = None,
    graph: TransformedGraph | None = None,
) -> SolveResult:
    """Cost-minimal radial layout with strings of at most ``hop`` turbines."""
    if hop < 1:
        raise InvariantError("hop limit must be at least 1")
    result = _run_search(instance, graph, config, hop=hop)
    if result.solution is None and result.proven_optimal:
        raise InfeasibleError("no spacing-feasible selection nets the quota")
    if result.solution is not None:
        _check_string_profile(result.solution, bounds_mod.k_upper_bound(instance), hop)
    return result


def _check_string_profile(solution: Solution, k_ub: int, hop: int) -> None:
    """Structural sanity of a radial solution; violations are solver bugs."""
    assert solution.strings is not None
    occupancy = [sum(1 for s in solution.strings if len(s) >= h) for h in range(1, hop + 1)]
    assert all(a >= b for a, b in zip(occupancy, occupancy[1:])), "layer occupancy must not grow"
    assert occupancy[-1] <= bounds_mod.last_layer_cap(max(k_ub, len(solution.selected)), hop)
    flat = [p for s in solution.strings for p in s]
    assert len(flat) == len(set(flat)), "strings revisit a position"


def choose_split_value(instance: "SiteInstance", config: SolverConfig, graph: TransformedGraph | None = None) -> SplitValue:
    """Interference threshold for the up/down split, per the configured strategy.

    The returned flag records whether the value is a proven lower bound
    on the least interference any feasible solution can have; only then
    may the down problem be skipped.
    """
    if config.split == "none":
        return SplitValue(0.0, True)
    ilb = bounds_mod.total_interference_lb(instance, max(1, _n_min_or_inf(instance)))
    if config.split == "ilb":
        return SplitValue(ilb, True)
    if config.split == "heur":
        graph = graph or build_transformed_graph(instance)
        result = sph(graph, instance)
        if not result.feasible or result.solution is None:
            raise InfeasibleError("construction heuristic found no feasible solution to split on")
        value = config.alpha * result.solution.i_tot_mw
        return SplitValue(value, value <= ilb + 1e-12)
    mini = bounds_mod.min_interference(instance, time_budget_s=config.tau_s)
    value = max(ilb, mini.i_tot_mw)
    return SplitValue(value, mini.proven_optimal or value <= ilb + 1e-12)


def _n_min_or_inf(instance: "SiteInstance") -> int:
    try:
        return bounds_mod.n_min(instance)
    except InfeasibleError:
        return instance.n_positions


def solve_with_split(
    instance: "SiteInstance",
    i_split_mw: float,
    config: SolverConfig | None = None,
    graph: TransformedGraph | None = None,
    proven_lower_bound: bool = False,
    hop: int | None = None,
) -> SplitOutcome:
    """Solve the problem as an up/down pair around an interference threshold.

    The up problem restricts solutions to total interference at or above
    the threshold.  If the threshold provably lower-bounds every feasible
    solution's interference, the up optimum is the global optimum.
    Otherwise the down problem (interference at or below the threshold)
    runs with the up optimum as a strict cutoff, and the global optimum
    is the better of the two.  Both sides keep the threshold itself
    feasible, so the two problems jointly cover everything.
    """
    if i_split_mw < 0.0:
        raise InvariantError("split value must be nonnegative")
    config = config or SolverConfig()
    graph = graph or build_transformed_graph(instance)

    up = _run_search(instance, graph, config, hop=hop, itot_min=i_split_mw)
    if not up.proven_optimal:
        return SplitOutcome(i_split_mw, up, None, None)

    if up.solution is not None and (proven_lower_bound or i_split_mw <= 0.0):
        return SplitOutcome(i_split_mw, up, None, "UpOptimalByCorollary")

    if up.solution is not None:
        down = _run_search(
            instance,
            graph,
            config,
            hop=hop,
            itot_max=i_split_mw,
            cost_cutoff=up.solution.total_cost_keur,
        )
        if not down.proven_optimal:
            return SplitOutcome(i_split_mw, up, down, None)
        if down.solution is not None:
            return SplitOutcome(i_split_mw, up, down, "DownOptimal")
        return SplitOutcome(i_split_mw, up, down, "UpOptimalByCutoff")

    down = _run_search(instance, graph, config, hop=hop, itot_max=i_split_mw)
    if not down.proven_optimal:
        return SplitOutcome(i_split_mw, up, down, None)
    if down.solution is not None:
        return SplitOutcome(i_split_mw, up, down, "DownOptimal")
    return SplitOutcome(i_split_mw, up, down, "Infeasible")


def solve_with_strategy(
    instance: "SiteInstance",
    config: SolverConfig,
    graph: TransformedGraph | None = None,
) -> tuple[SolveResult, SplitOutcome | None]:
    """Entry point honoring the configured split strategy."""
    graph = graph or build_transformed_graph(instance)
    if config.split == "none":
        return solve(instance, config, graph), None
    sv = choose_split_value(instance, config, graph)
    outcome = solve_with_split(
        instance,
        sv.value_mw,
        config,
        graph,
        proven_lower_bound=sv.proven_minimum_bound,
        hop=config.hop,
    )
    best = outcome.best()
    if best is None:
        statuses = [r.stats.status for r in (outcome.up, outcome.down) if r is not None]
        if any(s == "time_limit" for s in statuses):
            empty = SolveStats(status="time_limit")
            return SolveResult(None, False, 0.0, empty), outcome
        raise InfeasibleError("no spacing-feasible selection nets the quota")
    proven = outcome.certificate in ("UpOptimalByCorollary", "UpOptimalByCutoff", "DownOptimal")
    return SolveResult(best.solution, proven, best.lower_bound_keur, best.stats), outcome


# --------------------------------------------------------------------------
# Brute-force oracle

def brute_force_oracle(
    instance: "SiteInstance",
    hop: int | None = None,
    exact_budget: int = 12,
    graph: TransformedGraph | None = None,
) -> Solution:
    """Definitional optimum by subset enumeration.

    Every spacing-feasible subset netting the quota is a candidate; only
    the minimal feasible ones need routing, since adding a turbine never
    makes a layout cheaper.  Routing uses the same exact dynamic
    programs as the solver, so this checks the search, not the routing.
    """
    n = instance.n_positions
    if n > exact_budget:
        raise BudgetError(f"oracle limited to {exact_budget} positions, got {n}")
    if instance.quota_mw <= 0.0:
        return empty_solution(instance, radial=hop is not None)
    graph = graph or build_transformed_graph(instance)

    q = instance.profits_mw
    inter = instance.interference_or_default.values
    cross = inter + inter.T
    conflicts = bounds_mod.dmin_conflict_masks(instance)
    ids = [p.id for p in instance.positions]
    quota = instance.quota_mw

    size = 1 << n
    qsum = np.zeros(size)
    itot = np.zeros(size)
    ok = np.ones(size, dtype=bool)
    for m in range(1, size):
        low = (m & -m).bit_length() - 1
        rest = m ^ (1 << low)
        qsum[m] = qsum[rest] + q[low]
        add = 0.0
        mm = rest
        while mm:
            j = (mm & -mm).bit_length() - 1
            add += cross[low, j]
            mm &= mm - 1
        itot[m] = itot[rest] + add
        ok[m] = ok[rest] and not (conflicts[low] & rest)

    feasible = ok & (qsum - itot >= quota - 1e-9)
    if not feasible.any():
        raise InfeasibleError("no spacing-feasible selection nets the quota")

    minimal = []
    for m in range(1, size):
        if not feasible[m]:
            continue
        mm = m
        is_minimal = True
        while mm:
            bit = mm & -mm
            if feasible[m ^ bit]:
                is_minimal = False
                break
            mm ^= bit
        if is_minimal:
            minimal.append(m)

    builds = np.array([p.build_cost_keur for p in instance.positions])
    min_cable = np.array([graph.min_incoming_cable_keur(p.id) for p in instance.positions])

    def mask_lb(m: int) -> float:
        total = 0.0
        mm = m
        while mm:
            j = (mm & -mm).bit_length() - 1
            total += builds[j] + min_cable[j]
            mm &= mm - 1
        return total

    def mask_ids(m: int) -> tuple[int, ...]:
        out = []
        mm = m
        while mm:
            out.append(ids[(mm & -mm).bit_length() - 1])
            mm &= mm - 1
        return tuple(sorted(out))

    candidates = sorted(minimal, key=lambda m: (mask_lb(m), mask_ids(m)))
    best: Solution | None = None
    for m in candidates:
        if best is not None and mask_lb(m) > best.total_cost_keur + COST_EPS:
            continue
        sel = mask_ids(m)
        if hop is None:
            terminals = [s.id for s in instance.substations] if len(instance.substations) > 1 else []
            _, arcs = routing.steiner_arborescence(graph, list(terminals) + list(sel))
            cand = make_solution(instance, selected=sel, arcs=arcs)
        else:
            _, arcs, strings = routing.string_layout(graph, sel, hop)
            cand = make_solution(instance, selected=sel, arcs=arcs, strings=strings)
        if (
            best is None
            or cand.total_cost_keur < best.total_cost_keur - COST_EPS
            or (
                abs(cand.total_cost_keur - best.total_cost_keur) <= COST_EPS
                and cand.selected < best.selected
            )
        ):
            best = cand
    assert best is not None
    return best
