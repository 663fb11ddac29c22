"""Constructive primal heuristics.

The shortest-path construction grows a root component one terminal at a
time, always inserting the candidate that is cheapest to reach, keeping
a running interference total, and skipping candidates that would break
the minimum spacing against what is already built.  It never un-selects;
exhausting the candidates before the quota is met yields an infeasible
result rather than an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import InvariantError
from .graphs import KIND_DOUBLE, KIND_POSITION, LayeredGraph, ROOT_ID, TransformedGraph
from .solution import Solution, make_solution

if TYPE_CHECKING:
    from .instances import SiteInstance


@dataclass(frozen=True)
class HeuristicResult:
    solution: Solution | None
    feasible: bool
    trace: tuple[int, ...]  # position ids in insertion order


def cost_bias(costs: np.ndarray, guidance: np.ndarray) -> np.ndarray:
    """Scale arc costs down where guidance points: (1 - g) * c per arc."""
    g = np.asarray(guidance, dtype=float)
    if np.any(g < 0.0) or np.any(g > 1.0):
        raise InvariantError("guidance entries must lie in [0, 1]")
    return (1.0 - g) * np.asarray(costs, dtype=float)


def _arc_costs(graph: TransformedGraph, costs: Sequence[float] | None) -> np.ndarray:
    if costs is None:
        return np.array([a.cost_keur for a in graph.arcs], dtype=float)
    c = np.asarray(costs, dtype=float)
    if c.shape != (len(graph.arcs),):
        raise InvariantError(f"cost vector must have one entry per arc ({len(graph.arcs)})")
    if np.any(c < 0.0):
        raise InvariantError("arc costs must be nonnegative")
    return c


def sph(graph: TransformedGraph, instance: "SiteInstance", costs: Sequence[float] | None = None) -> HeuristicResult:
    """Grow a tree from the root until the net quota is covered.

    Works on the instance-level view of the transformed graph: the
    substations start connected (through the artificial root when there
    are several), and each step inserts the unbuilt position that is
    cheapest to reach from the component under the given arc costs.
    Ties break toward the smaller tail id, then the smaller candidate id.
    """
    arc_cost = _arc_costs(graph, costs)
    quota = instance.quota_mw
    q = instance.profits_mw
    inter = instance.interference_or_default.values
    d = instance.distances_m
    idx_by_id = {p.id: k for k, p in enumerate(instance.positions)}

    # Arc costs between real nodes, keyed by external ids.
    cost_of: dict[tuple[int, int], float] = {}
    for ai, a in enumerate(graph.arcs):
        head, tail = graph.nodes[a.head], graph.nodes[a.tail]
        if head.kind != KIND_POSITION or tail.kind == KIND_DOUBLE:
            continue
        cost_of[(tail.ref, head.ref)] = float(arc_cost[ai])

    multi = len(instance.substations) > 1
    arcs: list[tuple[int, int]] = [(ROOT_ID, s.id) for s in instance.substations] if multi else []
    selected: list[int] = []
    trace: list[int] = []
    net = 0.0

    # Cheapest way to reach each unconnected position from the component,
    # updated incrementally as nodes join.
    remaining = [p.id for p in instance.positions]
    reach: dict[int, tuple[float, int]] = {}
    for pid in remaining:
        entries = [(cost_of[(s.id, pid)], s.id) for s in instance.substations]
        reach[pid] = min(entries)

    while net < quota - 1e-9:
        best: tuple[float, int, int] | None = None
        for pid in remaining:
            c, tail_id = reach[pid]
            cand = (c, tail_id, pid)
            if best is None or cand < best:
                best = cand
        if best is None:
            return HeuristicResult(solution=None, feasible=False, trace=tuple(trace))
        c, tail_id, pid = best
        arcs.append((tail_id, pid))
        k = idx_by_id[pid]
        net += q[k] - sum(inter[idx_by_id[s], k] + inter[k, idx_by_id[s]] for s in selected)
        selected.append(pid)
        trace.append(pid)
        remaining.remove(pid)
        # Drop candidates now conflicting with the build; update reach costs.
        remaining = [
            r for r in remaining if d[idx_by_id[r], k] >= instance.d_min_m
        ]
        for r in remaining:
            c_new = cost_of[(pid, r)]
            if c_new < reach[r][0]:
                reach[r] = (c_new, pid)

    solution = make_solution(instance, selected=selected, arcs=arcs)
    return HeuristicResult(solution=solution, feasible=True, trace=tuple(trace))


def sph_radial(layered: LayeredGraph, instance: "SiteInstance") -> HeuristicResult:
    """String-growing variant of the construction heuristic.

    A new turbine either starts a fresh string at a substation or hooks
    onto the tail of a string that still has hop budget left.  The
    result always decodes as a radial layout with strings of at most the
    layered graph's hop limit.
    """
    hop_limit = layered.hop_limit
    quota = instance.quota_mw
    q = instance.profits_mw
    inter = instance.interference_or_default.values
    d = instance.distances_m
    idx_by_id = {p.id: k for k, p in enumerate(instance.positions)}
    pos_by_id = {p.id: p for p in instance.positions}
    rate = instance.cable_cost_keur_per_km

    def cable(a, b) -> float:
        return rate * math.hypot(a.x_m - b.x_m, a.y_m - b.y_m) / 1000.0

    multi = len(instance.substations) > 1
    arcs: list[tuple[int, int]] = [(ROOT_ID, s.id) for s in instance.substations] if multi else []
    strings: list[list[int]] = []
    selected: list[int] = []
    trace: list[int] = []
    net = 0.0
    remaining = [p.id for p in instance.positions]

    while net < quota - 1e-9:
        best = None  # (cost, attach id, candidate id, string index or -1)
        for pid in remaining:
            if any(d[idx_by_id[pid], idx_by_id[s]] < instance.d_min_m for s in selected):
                continue
            p = pos_by_id[pid]
            for s in instance.substations:
                cand = (cable(s, p) + p.build_cost_keur, s.id, pid, -1)
                if best is None or cand < best:
                    best = cand
            for si, string in enumerate(strings):
                if len(string) >= hop_limit:
                    continue
                tail = pos_by_id[string[-1]]
                cand = (cable(tail, p) + p.build_cost_keur, tail.id, pid, si)
                if best is None or cand < best:
                    best = cand
        if best is None:
            return HeuristicResult(solution=None, feasible=False, trace=tuple(trace))
        _, attach_id, pid, si = best
        arcs.append((attach_id, pid))
        if si < 0:
            strings.append([pid])
        else:
            strings[si].append(pid)
        k = idx_by_id[pid]
        net += q[k] - sum(inter[idx_by_id[s], k] + inter[k, idx_by_id[s]] for s in selected)
        selected.append(pid)
        trace.append(pid)
        remaining.remove(pid)

    solution = make_solution(instance, selected=selected, arcs=arcs, strings=[tuple(s) for s in strings])
    return HeuristicResult(solution=solution, feasible=True, trace=tuple(trace))
