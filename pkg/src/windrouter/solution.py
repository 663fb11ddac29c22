"""Solution representation, independent verification, and the JSON contract.

A solution lists the selected position ids, the directed cable arcs of
the tree (node ids; -1 stands for the artificial root when the instance
has several substations), and, for radial layouts, the strings as
ordered position sequences.  Derived figures (cost, collected quota,
total interference) are always recomputed from instance data when a
solution is constructed, so they cannot drift from the structure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import InvariantError
from .graphs import ROOT_ID

if TYPE_CHECKING:
    from .instances import SiteInstance

COST_TOL_KEUR = 1e-6
QUOTA_TOL_MW = 1e-9


@dataclass(frozen=True)
class Solution:
    selected: tuple[int, ...]
    arcs: tuple[tuple[int, int], ...]
    total_cost_keur: float
    quota_collected_mw: float
    i_tot_mw: float
    strings: tuple[tuple[int, ...], ...] | None = None


def _id_maps(instance: "SiteInstance"):
    pos_by_id = {p.id: p for p in instance.positions}
    sub_by_id = {s.id: s for s in instance.substations}
    idx_by_id = {p.id: k for k, p in enumerate(instance.positions)}
    return pos_by_id, sub_by_id, idx_by_id


def root_id_of(instance: "SiteInstance") -> int:
    """Tree root in solution arc lists: the substation id, or -1 when several."""
    return instance.substations[0].id if len(instance.substations) == 1 else ROOT_ID


def cable_cost_keur(instance: "SiteInstance", tail: int, head: int) -> float:
    """Cable cost of one arc from node coordinates; artificial arcs are free."""
    if tail == ROOT_ID or head == ROOT_ID:
        return 0.0
    pos_by_id, sub_by_id, _ = _id_maps(instance)
    a = pos_by_id.get(tail) or sub_by_id.get(tail)
    b = pos_by_id.get(head) or sub_by_id.get(head)
    if a is None or b is None:
        raise InvariantError(f"arc ({tail}, {head}) references unknown node ids")
    return instance.cable_cost_keur_per_km * math.hypot(a.x_m - b.x_m, a.y_m - b.y_m) / 1000.0


def interference_total_mw(instance: "SiteInstance", selected: Sequence[int]) -> float:
    """Sum of pairwise interference over every ordered selected pair."""
    _, _, idx_by_id = _id_maps(instance)
    idx = [idx_by_id[i] for i in selected]
    if len(idx) <= 1:
        return 0.0
    sub = instance.interference_or_default.values[np.ix_(idx, idx)]
    return float(sub.sum())


def make_solution(
    instance: "SiteInstance",
    selected: Iterable[int],
    arcs: Iterable[tuple[int, int]],
    strings: Iterable[Sequence[int]] | None = None,
) -> Solution:
    """Assemble a solution, recomputing cost, quota, and interference."""
    pos_by_id, _, idx_by_id = _id_maps(instance)
    sel = tuple(sorted(selected))
    arc_list = tuple((int(t), int(h)) for t, h in arcs)
    cable = sum(cable_cost_keur(instance, t, h) for t, h in arc_list)
    build = sum(pos_by_id[h].build_cost_keur for _, h in arc_list if h in pos_by_id)
    profits = instance.profits_mw
    quota_collected = float(sum(profits[idx_by_id[i]] for i in sel))
    return Solution(
        selected=sel,
        arcs=arc_list,
        total_cost_keur=cable + build,
        quota_collected_mw=quota_collected,
        i_tot_mw=interference_total_mw(instance, sel),
        strings=None if strings is None else tuple(tuple(s) for s in strings),
    )


def empty_solution(instance: "SiteInstance", radial: bool = False) -> Solution:
    """The substations-only tree: no turbines, zero cable cost."""
    arcs = []
    if len(instance.substations) > 1:
        arcs = [(ROOT_ID, s.id) for s in instance.substations]
    return make_solution(instance, selected=(), arcs=arcs, strings=() if radial else None)


def verify_solution(instance: "SiteInstance", solution: Solution, hop: int | None = None) -> list[str]:
    """Re-derive feasibility from scratch; returns every violation found.

    Checks connectivity of the arc set as an arborescence spanning the
    substations and the selection, the net quota, pairwise spacing, the
    stated cost and interference figures, and for radial solutions the
    string structure against the hop limit.
    """
    out: list[str] = []
    pos_by_id, sub_by_id, idx_by_id = _id_maps(instance)
    root = root_id_of(instance)

    unknown = [i for i in solution.selected if i not in pos_by_id]
    if unknown:
        return [f"selected ids {unknown} are not positions of this instance"]
    if len(set(solution.selected)) != len(solution.selected):
        out.append("selected ids contain duplicates")

    heads = [h for _, h in solution.arcs]
    if len(set(heads)) != len(heads):
        out.append("some node has two incoming arcs")
    if any(h == root for h in heads):
        out.append("an arc enters the root")
    parent = {h: t for t, h in solution.arcs}
    for node in solution.arcs:
        for end in node:
            if end != ROOT_ID and end not in pos_by_id and end not in sub_by_id:
                out.append(f"arc endpoint {end} is not a node of this instance")
                return out

    # Every arc tail must itself be reachable from the root.
    reachable = {root}
    pending = dict(parent)
    progress = True
    while pending and progress:
        progress = False
        for h, t in list(pending.items()):
            if t in reachable:
                reachable.add(h)
                del pending[h]
                progress = True
    if pending:
        out.append(f"arcs into {sorted(pending)} are disconnected from the root")

    must_reach = set(solution.selected) | (set(sub_by_id) - {root})
    missing = sorted(m for m in must_reach if m not in reachable)
    if missing:
        out.append(f"nodes {missing} are not connected to the root")

    # Net quota, spacing, and the stated figures.
    profits = instance.profits_mw
    quota_collected = float(sum(profits[idx_by_id[i]] for i in solution.selected))
    i_tot = interference_total_mw(instance, solution.selected)
    if abs(quota_collected - solution.quota_collected_mw) > 1e-6:
        out.append(
            f"stated collected quota {solution.quota_collected_mw:.6f} MW differs from "
            f"recomputed {quota_collected:.6f} MW"
        )
    if abs(i_tot - solution.i_tot_mw) > 1e-6:
        out.append(
            f"stated interference {solution.i_tot_mw:.6f} MW differs from recomputed {i_tot:.6f} MW"
        )
    if quota_collected - i_tot < instance.quota_mw - QUOTA_TOL_MW:
        out.append(
            f"net quota {quota_collected - i_tot:.6f} MW falls short of {instance.quota_mw:.6f} MW"
        )
    d = instance.distances_m
    sel = sorted(solution.selected)
    for a in range(len(sel)):
        for b in range(a + 1, len(sel)):
            if d[idx_by_id[sel[a]], idx_by_id[sel[b]]] < instance.d_min_m:
                out.append(f"positions {sel[a]} and {sel[b]} violate the minimum distance")

    try:
        cable = sum(cable_cost_keur(instance, t, h) for t, h in solution.arcs)
    except InvariantError as exc:
        out.append(str(exc))
        return out
    build = sum(pos_by_id[h].build_cost_keur for _, h in solution.arcs if h in pos_by_id)
    if abs(cable + build - solution.total_cost_keur) > COST_TOL_KEUR:
        out.append(
            f"stated cost {solution.total_cost_keur:.6f} differs from recomputed {cable + build:.6f}"
        )
    tree_positions = {h for _, h in solution.arcs if h in pos_by_id}
    not_in_tree = sorted(set(solution.selected) - tree_positions)
    if not_in_tree:
        out.append(f"selected positions {not_in_tree} have no incoming arc")

    if hop is not None:
        out.extend(_verify_radial(instance, solution, hop))
    return out


def _verify_radial(instance: "SiteInstance", solution: Solution, hop: int) -> list[str]:
    out: list[str] = []
    if solution.strings is None:
        return ["radial check requested but the solution carries no strings"]
    seen: list[int] = []
    sub_ids = {s.id for s in instance.substations}
    anchor_of = {h: t for t, h in solution.arcs}
    for s in solution.strings:
        if not s:
            out.append("empty string")
            continue
        if len(s) > hop:
            out.append(f"string {list(s)} is longer than the hop limit {hop}")
        if anchor_of.get(s[0]) not in sub_ids:
            out.append(f"string {list(s)} is not anchored at a substation")
        for prev, nxt in zip(s, s[1:]):
            if anchor_of.get(nxt) != prev:
                out.append(f"string {list(s)} does not match the arc list at {prev}->{nxt}")
        seen.extend(s)
    if sorted(seen) != sorted(solution.selected):
        out.append("strings do not partition the selected set")
    outdeg: dict[int, int] = {}
    pos_ids = {p.id for p in instance.positions}
    for t, _ in solution.arcs:
        if t in pos_ids:
            outdeg[t] = outdeg.get(t, 0) + 1
    bad = sorted(i for i, k in outdeg.items() if k > 1)
    if bad:
        out.append(f"positions {bad} feed more than one cable onward")
    return out


# --------------------------------------------------------------------------
# JSON contract

def solution_to_dict(solution: Solution, proven_optimal: bool, lower_bound_keur: float) -> dict:
    doc: dict = {
        "selected": list(solution.selected),
        "arcs": [[t, h] for t, h in solution.arcs],
    }
    if solution.strings is not None:
        doc["strings"] = [list(s) for s in solution.strings]
    doc.update(
        {
            "total_cost_keur": solution.total_cost_keur,
            "quota_mw": solution.quota_collected_mw,
            "i_tot_mw": solution.i_tot_mw,
            "proven_optimal": bool(proven_optimal),
            "lower_bound_keur": lower_bound_keur,
        }
    )
    return doc


def solution_to_json(solution: Solution, proven_optimal: bool, lower_bound_keur: float) -> str:
    return json.dumps(solution_to_dict(solution, proven_optimal, lower_bound_keur), indent=2) + "\n"


def save_solution(solution: Solution, proven_optimal: bool, lower_bound_keur: float, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(solution_to_json(solution, proven_optimal, lower_bound_keur))


def load_solution_dict(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def solution_from_dict(doc: dict) -> tuple[Solution, bool, float]:
    solution = Solution(
        selected=tuple(doc["selected"]),
        arcs=tuple((t, h) for t, h in doc["arcs"]),
        total_cost_keur=float(doc["total_cost_keur"]),
        quota_collected_mw=float(doc["quota_mw"]),
        i_tot_mw=float(doc["i_tot_mw"]),
        strings=tuple(tuple(s) for s in doc["strings"]) if "strings" in doc else None,
    )
    return solution, bool(doc["proven_optimal"]), float(doc["lower_bound_keur"])
