"""Shared test fixtures and independent reference oracles.

The enumerators here deliberately avoid the package's dynamic programs:
trees are enumerated via parent vectors and string layouts via ordered
sequences with cut points, so they can confirm the solver's routing from
a different direction.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from windrouter import (
    InterferenceMatrix,
    Position,
    QuotaSpec,
    SiteInstance,
    TurbineSpec,
    WindBin,
    WindRose,
    generate_synthetic_site,
)

PLAIN_TURBINE = TurbineSpec(
    rated_power_mw=15.0,
    rotor_diameter_m=240.0,
    cut_in_ms=3.0,
    rated_speed_ms=10.59,
    cut_out_ms=25.0,
    thrust_coefficient=0.8,
)

ONE_BIN_ROSE = WindRose((WindBin(0.0, 8.0, 1.0),))


def toy_instance(
    coords: list[tuple[float, float]],
    profits: list[float] | None = None,
    interference: list[list[float]] | None = None,
    quota_mw: float = 1.0,
    d_min_m: float = 0.0,
    build_costs: list[float] | None = None,
    substations: list[tuple[float, float]] | None = None,
    cable_cost: float = 504.0,
) -> SiteInstance:
    """Hand-built instance with full control over profits and interference."""
    n = len(coords)
    builds = build_costs or [1000.0] * n
    subs = substations or [(0.0, 0.0)]
    positions = tuple(
        Position(
            id=i + 1,
            x_m=coords[i][0],
            y_m=coords[i][1],
            build_cost_keur=builds[i],
            profit_mw=None if profits is None else profits[i],
        )
        for i in range(n)
    )
    matrix = InterferenceMatrix(np.array(interference, dtype=float)) if interference is not None else (
        InterferenceMatrix(np.zeros((n, n)))
    )
    return SiteInstance(
        name="toy",
        substations=tuple(
            Position(id=100 + k, x_m=x, y_m=y, build_cost_keur=0.0) for k, (x, y) in enumerate(subs)
        ),
        positions=positions,
        cable_cost_keur_per_km=cable_cost,
        d_min_m=d_min_m,
        quota=QuotaSpec(mw=quota_mw),
        turbine=PLAIN_TURBINE,
        wind_rose=ONE_BIN_ROSE,
        interference=matrix,
    )


def suite_instance(seed: int, n: int, quota_turbines: int) -> SiteInstance:
    """One deterministic member of the acceptance suites."""
    return generate_synthetic_site(
        n, seed=seed, quota=QuotaSpec(equivalent_turbines=quota_turbines)
    )


def dense_instance(seed: int, n: int, quota_turbines: int) -> SiteInstance:
    """Tightly packed site: spacing conflicts and interference are common."""
    return generate_synthetic_site(
        n,
        region=(0.0, 0.0, 3600.0, 3600.0),
        seed=seed,
        quota=QuotaSpec(equivalent_turbines=quota_turbines),
    )


# ---------------------------------------------------------------------------
# Independent routing oracles

def _cable(instance: SiteInstance, a, b) -> float:
    return instance.cable_cost_keur_per_km * math.hypot(a.x_m - b.x_m, a.y_m - b.y_m) / 1000.0


def exhaustive_tree_cost(instance: SiteInstance, selection_ids: list[int]) -> float:
    """Cheapest tree spanning root, substations, and the selection.

    Enumerates every subset of unselected positions as intermediates and
    every parent vector over the node set; exponential, tiny inputs only.
    Arc cost into a position includes its build cost, matching the
    solver's cost shift.
    """
    subs = list(instance.substations)
    pos_by_id = {p.id: p for p in instance.positions}
    others = [p.id for p in instance.positions if p.id not in selection_ids]
    best = math.inf
    for r in range(len(others) + 1):
        for mids in itertools.combinations(others, r):
            nodes = [s.id for s in subs] + list(selection_ids) + list(mids)
            best = min(best, _best_parent_vector(instance, nodes, pos_by_id))
    return best


def _best_parent_vector(instance: SiteInstance, node_ids: list[int], pos_by_id) -> float:
    """Minimum arborescence over exactly these nodes, root excluded from ids."""
    sub_ids = {s.id for s in instance.substations}
    sub_by_id = {s.id: s for s in instance.substations}
    non_root = [i for i in node_ids if i not in sub_ids]
    anchors = sorted(sub_ids)
    best = math.inf
    m = len(non_root)
    if m == 0:
        return 0.0
    candidates = anchors + non_root
    for parents in itertools.product(range(len(candidates)), repeat=m):
        cost = 0.0
        ok = True
        # cycle check: follow parents upward from each node
        parent_of = {}
        for k, pk in enumerate(parents):
            child = non_root[k]
            parent = candidates[pk]
            if parent == child:
                ok = False
                break
            parent_of[child] = parent
        if not ok:
            continue
        for child in non_root:
            seen = {child}
            at = child
            while at in parent_of:
                at = parent_of[at]
                if at in seen:
                    ok = False
                    break
                seen.add(at)
            if not ok:
                break
        if not ok:
            continue
        for child, parent in parent_of.items():
            a = pos_by_id.get(parent) or sub_by_id.get(parent)
            b = pos_by_id[child]
            cost += _cable(instance, a, b) + b.build_cost_keur
            if cost >= best:
                break
        if cost < best:
            best = cost
    return best


def exhaustive_string_cost(instance: SiteInstance, selection_ids: list[int], hop: int) -> float:
    """Cheapest radial layout by enumerating ordered strings directly.

    Every permutation of the selection with every cut assignment is a
    candidate layout (each segment a substation-anchored string of at
    most ``hop`` turbines); no dynamic programming involved.
    """
    pos_by_id = {p.id: p for p in instance.positions}
    subs = list(instance.substations)
    builds = sum(pos_by_id[i].build_cost_keur for i in selection_ids)
    if not selection_ids:
        return 0.0

    def start_cost(pid: int) -> float:
        return min(_cable(instance, s, pos_by_id[pid]) for s in subs)

    best = [math.inf]

    def recurse(remaining: set[int], last: int | None, length: int, cost: float) -> None:
        if cost >= best[0]:
            return
        if not remaining:
            best[0] = cost
            return
        for nxt in sorted(remaining):
            rest = remaining - {nxt}
            if last is not None and length < hop:
                recurse(rest, nxt, length + 1, cost + _cable(instance, pos_by_id[last], pos_by_id[nxt]))
            recurse(rest, nxt, 1, cost + start_cost(nxt))

    recurse(set(selection_ids), None, 0, 0.0)
    return best[0] + builds


def exhaustive_hop_optimum(instance: SiteInstance, hop: int) -> float:
    """Global radial optimum by full selection enumeration plus string
    enumeration; independent of both the solver's search and its DP."""
    n = instance.n_positions
    ids = [p.id for p in instance.positions]
    q = instance.profits_mw
    inter = instance.interference_or_default.values
    d = instance.distances_m
    quota = instance.quota_mw

    feasible_masks = []
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        if any(
            d[a, b] < instance.d_min_m for ai, a in enumerate(members) for b in members[ai + 1 :]
        ):
            continue
        net = float(q[members].sum()) - float(inter[np.ix_(members, members)].sum())
        if net >= quota - 1e-9:
            feasible_masks.append(mask)
    assert feasible_masks, "oracle called on an infeasible instance"

    feasible = set(feasible_masks)
    best = math.inf
    for mask in feasible_masks:
        if any((mask ^ (1 << i)) in feasible for i in range(n) if mask >> i & 1):
            continue  # a proper subset is already feasible and strictly cheaper
        sel = [ids[i] for i in range(n) if mask >> i & 1]
        best = min(best, exhaustive_string_cost(instance, sel, hop))
    return best
