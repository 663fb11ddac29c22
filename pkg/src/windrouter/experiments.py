"""Sequential-versus-integrated comparison harness.

Three pipelines produce a radial layout with the same hop limit:

* sequential: pick the cheapest-to-build quota-feasible selection first
  (cables ignored), then route it optimally with strings.
* select-then-route: solve the integrated free-tree problem first, then
  re-route its selection with capacity-limited strings.
* integrated: solve the hop-constrained problem outright.

The integrated optimum can never lose to the other two on the same
instance; the batch report quantifies by how much.  Cost reductions are
reported as (1 - new / base) * 100, positive when the new method is
cheaper.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

from . import bounds as bounds_mod
from .errors import InfeasibleError, InvariantError
from .graphs import ROOT_ID, build_transformed_graph
from .routing import string_layout
from .solution import Solution, make_solution
from .solver import SolveResult, SolveStats, SolverConfig, solve

if TYPE_CHECKING:
    from .instances import SiteInstance


@dataclass(frozen=True)
class ComparisonRow:
    instance_id: str
    cost_sequential_keur: float | None
    cost_select_route_keur: float | None
    cost_integrated_keur: float | None
    reduction_integrated_vs_sequential_pct: float | None
    reduction_select_route_vs_sequential_pct: float | None
    status_sequential: str
    status_select_route: str
    status_integrated: str


def _route_selection(instance: "SiteInstance", selection: Sequence[int], hop: int, graph=None) -> Solution:
    graph = graph or build_transformed_graph(instance)
    _, arcs, strings = string_layout(graph, selection, hop)
    return make_solution(instance, selected=selection, arcs=arcs, strings=strings)


def run_sequential(instance: "SiteInstance", hop: int, config: SolverConfig | None = None) -> SolveResult:
    """Layout first (build cost only), exact string routing second.

    Stage one ignores cables entirely, which is what makes the pipeline
    cheap to run and expensive to live with.
    """
    config = config or SolverConfig()
    _, selection, proven = bounds_mod.min_build_cost_selection(instance, time_budget_s=config.time_limit_s)
    solution = _route_selection(instance, selection, hop)
    stats = SolveStats(status="optimal" if proven else "time_limit")
    return SolveResult(solution, proven, solution.total_cost_keur if proven else 0.0, stats)


def run_select_then_route(
    instance: "SiteInstance", hop: int, config: SolverConfig | None = None
) -> SolveResult:
    """Integrated free-tree selection, then capacity-limited re-routing.

    The stage-one tree may bundle more turbines on a path than the hop
    limit allows; stage two rebuilds the cables as strings over the same
    selection, so the result is feasible but no longer jointly optimal.
    """
    config = config or SolverConfig()
    graph = build_transformed_graph(instance)
    stage1 = solve(instance, config, graph)
    if stage1.solution is None:
        return stage1
    solution = _route_selection(instance, stage1.solution.selected, hop, graph)
    stats = SolveStats(status=stage1.stats.status)
    return SolveResult(solution, stage1.proven_optimal, solution.total_cost_keur if stage1.proven_optimal else 0.0, stats)


def cost_reduction(c_base: float, c_new: float) -> float:
    """Relative saving of c_new against c_base, in percent.

    Positive when the new method is cheaper: (1 - c_new / c_base) * 100.
    """
    if c_base <= 0.0 or c_new <= 0.0:
        raise InvariantError("cost reduction needs positive costs")
    return (1.0 - c_new / c_base) * 100.0


CSV_COLUMNS = (
    "instance_id",
    "cost_sequential_keur",
    "cost_select_route_keur",
    "cost_integrated_keur",
    "reduction_integrated_vs_sequential_pct",
    "reduction_select_route_vs_sequential_pct",
    "status_sequential",
    "status_select_route",
    "status_integrated",
)


def compare_instance(
    instance_id: str,
    instance: "SiteInstance",
    hop: int,
    config: SolverConfig | None = None,
) -> ComparisonRow:
    """All three pipelines on one instance; failures become statuses."""
    from .solver import solve_hop

    config = config or SolverConfig()
    results: dict[str, tuple[float | None, str]] = {}
    for key, runner in (
        ("seq", lambda: run_sequential(instance, hop, config)),
        ("s2r", lambda: run_select_then_route(instance, hop, config)),
        ("hop", lambda: solve_hop(instance, hop, config)),
    ):
        try:
            res = runner()
            if res.solution is None:
                results[key] = (None, res.stats.status)
            else:
                status = "optimal" if res.proven_optimal else "heuristic"
                results[key] = (res.solution.total_cost_keur, status)
        except InfeasibleError:
            results[key] = (None, "infeasible")

    c_seq, st_seq = results["seq"]
    c_s2r, st_s2r = results["s2r"]
    c_hop, st_hop = results["hop"]

    def reduction(base, base_st, new, new_st):
        # comparable only when both are proven or both are heuristic
        if base is None or new is None or base_st != new_st:
            return None
        return cost_reduction(base, new)

    return ComparisonRow(
        instance_id=instance_id,
        cost_sequential_keur=c_seq,
        cost_select_route_keur=c_s2r,
        cost_integrated_keur=c_hop,
        reduction_integrated_vs_sequential_pct=reduction(c_seq, st_seq, c_hop, st_hop),
        reduction_select_route_vs_sequential_pct=reduction(c_seq, st_seq, c_s2r, st_s2r),
        status_sequential=st_seq,
        status_select_route=st_s2r,
        status_integrated=st_hop,
    )


def batch_report(
    instances: Iterable[tuple[str, "SiteInstance"]],
    hop: int,
    out_dir,
    config: SolverConfig | None = None,
) -> tuple[list[ComparisonRow], dict]:
    """Run the comparison over a batch and write CSV plus a JSON summary.

    Rows are ordered by instance id regardless of evaluation order, so
    the artifacts are reproducible.
    """
    import os

    rows = [compare_instance(iid, inst, hop, config) for iid, inst in instances]
    rows.sort(key=lambda r: r.instance_id)

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "comparison.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])

    hop_reductions = [
        r.reduction_integrated_vs_sequential_pct
        for r in rows
        if r.reduction_integrated_vs_sequential_pct is not None
    ]
    s2r_reductions = [
        r.reduction_select_route_vs_sequential_pct
        for r in rows
        if r.reduction_select_route_vs_sequential_pct is not None
    ]
    strict = sum(1 for x in hop_reductions if x > 1e-9)
    ties = sum(1 for x in hop_reductions if abs(x) <= 1e-9)
    summary = {
        "instances": len(rows),
        "comparable_integrated_vs_sequential": len(hop_reductions),
        "mean_reduction_integrated_vs_sequential_pct": _mean(hop_reductions),
        "mean_reduction_select_route_vs_sequential_pct": _mean(s2r_reductions),
        "strict_improvements_integrated_vs_sequential": strict,
        "ties_integrated_vs_sequential": ties,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return rows, summary


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def read_comparison_csv(path) -> list[ComparisonRow]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for rec in reader:
            rows.append(
                ComparisonRow(
                    instance_id=rec["instance_id"],
                    cost_sequential_keur=_parse_cell(rec["cost_sequential_keur"]),
                    cost_select_route_keur=_parse_cell(rec["cost_select_route_keur"]),
                    cost_integrated_keur=_parse_cell(rec["cost_integrated_keur"]),
                    reduction_integrated_vs_sequential_pct=_parse_cell(
                        rec["reduction_integrated_vs_sequential_pct"]
                    ),
                    reduction_select_route_vs_sequential_pct=_parse_cell(
                        rec["reduction_select_route_vs_sequential_pct"]
                    ),
                    status_sequential=rec["status_sequential"],
                    status_select_route=rec["status_select_route"],
                    status_integrated=rec["status_integrated"],
                )
            )
        return rows


def _parse_cell(text: str) -> float | None:
    return None if text == "" else float(text)


# --------------------------------------------------------------------------
# Rendering

def render_solution_svg(
    instance: "SiteInstance",
    solution: Solution,
    path,
    show_spacing_circles: bool = False,
) -> None:
    """Deterministic SVG of a layout: substations, turbines, cables.

    Byte-identical output for identical inputs; coordinates are mapped
    into a fixed 800-unit frame with a margin.
    """
    pts = [(p.x_m, p.y_m) for p in instance.substations] + [
        (p.x_m, p.y_m) for p in instance.positions
    ]
    xs, ys = zip(*pts)
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1.0)
    margin = 40.0
    scale = 720.0 / span

    def sx(x: float) -> float:
        return margin + (x - x0) * scale

    def sy(y: float) -> float:
        return margin + (y1 - y) * scale  # flip: north up

    def f(v: float) -> str:
        return f"{v:.2f}"

    by_id = {p.id: p for p in list(instance.substations) + list(instance.positions)}
    selected = set(solution.selected)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="800" '
        'viewBox="0 0 800 800">',
        '<rect width="800" height="800" fill="white"/>',
    ]
    if show_spacing_circles:
        r = instance.d_min_m / 2.0 * scale
        for pid in sorted(selected):
            p = by_id[pid]
            lines.append(
                f'<circle cx="{f(sx(p.x_m))}" cy="{f(sy(p.y_m))}" r="{f(r)}" fill="none" '
                'stroke="#cccccc" stroke-dasharray="4 4"/>'
            )
    for tail, head in solution.arcs:
        if tail == ROOT_ID or head == ROOT_ID:
            continue
        a, b = by_id[tail], by_id[head]
        lines.append(
            f'<line x1="{f(sx(a.x_m))}" y1="{f(sy(a.y_m))}" x2="{f(sx(b.x_m))}" '
            f'y2="{f(sy(b.y_m))}" stroke="#444444" stroke-width="2"/>'
        )
    for p in instance.positions:
        fill = "#2b8cbe" if p.id in selected else "#dddddd"
        lines.append(f'<circle cx="{f(sx(p.x_m))}" cy="{f(sy(p.y_m))}" r="6" fill="{fill}"/>')
    for s in instance.substations:
        x, y = sx(s.x_m), sy(s.y_m)
        lines.append(
            f'<rect x="{f(x - 8)}" y="{f(y - 8)}" width="16" height="16" fill="#d7301f"/>'
        )
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
