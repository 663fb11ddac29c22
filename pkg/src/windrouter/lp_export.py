"""Deterministic LP-format export of the compact MILP formulations.

Four models are emitted, all minimizing and all over the same instance
data:

* ``flow``: single-commodity flow connectivity on the original directed
  graph, binary arc and selection variables, quota net of interference,
  spacing pair constraints.  The interference constraint keeps its
  bilinear selection products (LP format carries them in brackets).
* ``flow-capa``: the same with the big-M flow coupling tightened to the
  hop limit H, the cable capacity in disguise.
* ``mini``: the interference-minimization auxiliary problem with the
  products linearized through standard envelope rows (exact at binary
  points under minimization pressure).
* ``trans``: the doubled-terminal reformulation; connectivity of the
  companion terminals is written as flow rows (a textual LP cannot carry
  the exponential directed-cut family), selection products linearized as
  in ``mini``.

Variable names are stable: x_<tail>_<head>, f_<tail>_<head>, y_<id>,
m_<i>_<j> (i < j), Itot.  Node names are v<id> for real nodes, w<id> for
companion terminals, and r for an artificial root.  A manifest with
variable/constraint counts and a content hash is written alongside.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import InvariantError, ParseError, UnsupportedModelError
from .graphs import KIND_DOUBLE, build_transformed_graph

if TYPE_CHECKING:
    from .instances import SiteInstance

MODELS = ("flow", "flow-capa", "mini", "trans")


@dataclass(frozen=True)
class ExportSpec:
    model: str
    hop: int | None = None
    include_ilb_cut: bool = False

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise UnsupportedModelError(f"unknown model {self.model!r}; pick one of {MODELS}")
        if self.model == "flow-capa" and (self.hop is None or self.hop < 1):
            raise InvariantError("flow-capa needs a hop limit of at least 1")


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.12g}"


class _LpWriter:
    def __init__(self) -> None:
        self.comments: list[str] = []
        self.objective: list[str] = []
        self.rows: list[tuple[str, str]] = []
        self.bounds: list[str] = []
        self.binaries: list[str] = []
        self.variables: dict[str, None] = {}

    def var(self, name: str) -> str:
        self.variables.setdefault(name)
        return name

    def row(self, name: str, expr: str) -> None:
        self.rows.append((name, expr))

    def term(self, coeff: float, name: str) -> str:
        c = abs(coeff)
        sign = "-" if coeff < 0 else "+"
        return f"{sign} {_fmt(c)} {self.var(name)}"

    def render(self) -> str:
        lines = [f"\\ {c}" for c in self.comments]
        lines.append("Minimize")
        lines.append(" obj: " + _join_terms(self.objective))
        lines.append("Subject To")
        for name, expr in self.rows:
            lines.append(f" {name}: {expr}")
        if self.bounds:
            lines.append("Bounds")
            lines.extend(f" {b}" for b in self.bounds)
        if self.binaries:
            lines.append("Binary")
            lines.extend(f" {b}" for b in self.binaries)
        lines.append("End")
        return "\n".join(lines) + "\n"


def _join_terms(terms: list[str]) -> str:
    joined = " ".join(terms)
    return joined.lstrip("+ ") if joined.startswith("+") else joined


def _real_arcs(instance: "SiteInstance"):
    """Directed arcs of the non-transformed graph with shifted costs."""
    graph = build_transformed_graph(instance)
    arcs = []
    for a in graph.arcs:
        tail, head = graph.nodes[a.tail], graph.nodes[a.head]
        if head.kind == KIND_DOUBLE:
            continue
        tail_name = "r" if tail.ref is None else f"v{tail.ref}"
        head_name = "r" if head.ref is None else f"v{head.ref}"
        arcs.append((tail_name, head_name, a.cost_keur))
    return graph, arcs


def _interference_pairs(instance: "SiteInstance"):
    inter = instance.interference_or_default.values
    ids = [p.id for p in instance.positions]
    pairs = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            both = float(inter[i, j] + inter[j, i])
            if both > 0.0:
                pairs.append((ids[i], ids[j], both))
    return pairs


def _dmin_pairs(instance: "SiteInstance"):
    d = instance.distances_m
    ids = [p.id for p in instance.positions]
    out = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            if d[i, j] < instance.d_min_m:
                out.append((ids[i], ids[j]))
    return out


def export_lp(instance: "SiteInstance", spec: ExportSpec, path) -> dict:
    """Write the chosen model and its manifest; returns the manifest."""
    if spec.model in ("flow", "flow-capa"):
        text = _render_flow(instance, spec)
    elif spec.model == "mini":
        text = _render_mini(instance, spec)
    else:
        text = _render_trans(instance, spec)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    summary = check_lp_roundtrip(path, manifest=None)
    manifest = {
        "model": spec.model,
        "objective_sense": "minimize",
        "n_variables": summary.n_variables,
        "n_constraints": summary.n_constraints,
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    with open(str(path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest


def _ilb_cut_row(instance: "SiteInstance", w: _LpWriter) -> None:
    from . import bounds

    try:
        nmin = bounds.n_min(instance)
    except Exception:
        nmin = instance.n_positions
    value = bounds.total_interference_lb(instance, max(1, nmin))
    w.row("interference_floor", f"{w.var('Itot')} >= {_fmt(value)}")


def _render_flow(instance: "SiteInstance", spec: ExportSpec) -> str:
    w = _LpWriter()
    w.comments.append(f"model: {spec.model}")
    w.comments.append("single-commodity flow connectivity over the directed site graph")
    graph, arcs = _real_arcs(instance)
    pos_ids = [p.id for p in instance.positions]
    sub_names = {"r"} if len(instance.substations) > 1 else set()
    sub_names |= {f"v{s.id}" for s in instance.substations}
    root_name = "r" if len(instance.substations) > 1 else f"v{instance.substations[0].id}"
    n_terminals = len(instance.substations) + len(pos_ids)
    big_m = spec.hop if spec.model == "flow-capa" else n_terminals
    w.comments.append(f"flow capacity per active arc: {big_m}")

    for tail, head, cost in arcs:
        if cost > 0.0:
            w.objective.append(w.term(cost, f"x_{tail}_{head}"))
        else:
            w.var(f"x_{tail}_{head}")

    quota_terms = [w.term(float(q), f"y_{i}") for i, q in zip(pos_ids, instance.profits_mw)]
    w.row("quota", _join_terms(quota_terms) + f" - {w.var('Itot')} >= {_fmt(instance.quota_mw)}")

    pairs = _interference_pairs(instance)
    if pairs:
        prods = " + ".join(f"{_fmt(c)} y_{i} * y_{j}" for i, j, c in pairs)
        w.row("interference", f"{w.var('Itot')} - [ {prods} ] >= 0")
    else:
        w.row("interference", f"{w.var('Itot')} >= 0")

    incoming: dict[str, list[str]] = {}
    outgoing: dict[str, list[str]] = {}
    for tail, head, _ in arcs:
        incoming.setdefault(head, []).append(f"f_{tail}_{head}")
        outgoing.setdefault(tail, []).append(f"f_{tail}_{head}")
    nodes = sorted(set(incoming) | set(outgoing))
    for node in nodes:
        if node == root_name:
            continue
        terms = [w.term(1.0, f) for f in incoming.get(node, [])]
        terms += [w.term(-1.0, f) for f in outgoing.get(node, [])]
        if node in sub_names:
            rhs = "= 1"
        else:
            pid = int(node[1:])
            rhs = f"- y_{pid} = 0"
        w.row(f"balance_{node}", _join_terms(terms) + f" {rhs}")

    for tail, head, _ in arcs:
        hname = head
        if hname.startswith("v") and int(hname[1:]) in set(pos_ids):
            w.row(f"active_{tail}_{head}", f"x_{tail}_{head} - y_{int(hname[1:])} <= 0")
    for tail, head, _ in arcs:
        w.row(f"cap_{tail}_{head}", f"f_{tail}_{head} - {_fmt(float(big_m))} x_{tail}_{head} <= 0")

    for i, j in _dmin_pairs(instance):
        w.row(f"spacing_{i}_{j}", f"y_{i} + y_{j} <= 1")

    if spec.include_ilb_cut:
        _ilb_cut_row(instance, w)

    for tail, head, _ in arcs:
        w.bounds.append(f"0 <= f_{tail}_{head}")
    w.binaries.extend(f"x_{t}_{h}" for t, h, _ in arcs)
    w.binaries.extend(f"y_{i}" for i in pos_ids)
    return w.render()


def _render_mini(instance: "SiteInstance", spec: ExportSpec) -> str:
    w = _LpWriter()
    w.comments.append("model: mini")
    w.comments.append("minimize total interference subject to net quota and spacing")
    pos_ids = [p.id for p in instance.positions]
    w.objective.append(w.term(1.0, "Itot"))

    quota_terms = [w.term(float(q), f"y_{i}") for i, q in zip(pos_ids, instance.profits_mw)]
    w.row("quota", _join_terms(quota_terms) + f" - {w.var('Itot')} >= {_fmt(instance.quota_mw)}")

    pairs = _interference_pairs(instance)
    if pairs:
        terms = [w.term(-c, f"m_{i}_{j}") for i, j, c in pairs]
        w.row("interference", f"{w.var('Itot')} " + " ".join(terms) + " >= 0")
        for i, j, _ in pairs:
            w.row(f"product_{i}_{j}", f"m_{i}_{j} - y_{i} - y_{j} >= -1")
            w.bounds.append(f"0 <= m_{i}_{j}")
    else:
        w.row("interference", f"{w.var('Itot')} >= 0")

    for i, j in _dmin_pairs(instance):
        w.row(f"spacing_{i}_{j}", f"y_{i} + y_{j} <= 1")
    if spec.include_ilb_cut:
        _ilb_cut_row(instance, w)
    w.binaries.extend(f"y_{i}" for i in pos_ids)
    return w.render()


def _render_trans(instance: "SiteInstance", spec: ExportSpec) -> str:
    w = _LpWriter()
    w.comments.append("model: trans")
    w.comments.append("doubled-terminal reformulation; quota counted as waste budget")
    w.comments.append(
        "connectivity of companion terminals written as flow rows, the textual"
    )
    w.comments.append(
        "equivalent of the exponential directed-cut family a solver would separate"
    )
    graph = build_transformed_graph(instance)
    pos_ids = [p.id for p in instance.positions]
    profits = {p.id: float(q) for p, q in zip(instance.positions, instance.profits_mw)}

    def name(idx: int) -> str:
        node = graph.nodes[idx]
        if node.kind == KIND_DOUBLE:
            return f"w{node.ref}"
        return "r" if node.ref is None else f"v{node.ref}"

    arcs = [(name(a.tail), name(a.head), a.cost_keur) for a in graph.arcs]
    for tail, head, cost in arcs:
        if cost > 0.0:
            w.objective.append(w.term(cost, f"x_{tail}_{head}"))
        else:
            w.var(f"x_{tail}_{head}")
    if not w.objective:
        w.objective.append(w.term(0.0, f"x_{arcs[0][0]}_{arcs[0][1]}"))

    root_name = "r" if len(instance.substations) > 1 else f"v{instance.substations[0].id}"
    total_profit = sum(profits.values())
    waste = [w.term(profits[i], f"x_{root_name}_w{i}") for i in pos_ids]
    w.row(
        "quota_waste",
        _join_terms(waste) + f" + {w.var('Itot')} <= {_fmt(total_profit - instance.quota_mw)}",
    )

    pairs = _interference_pairs(instance)
    select = {i: f"x_v{i}_w{i}" for i in pos_ids}
    if pairs:
        terms = [w.term(-c, f"m_{i}_{j}") for i, j, c in pairs]
        w.row("interference", f"{w.var('Itot')} " + " ".join(terms) + " >= 0")
        for i, j, _ in pairs:
            w.row(f"product_{i}_{j}", f"m_{i}_{j} - {select[i]} - {select[j]} >= -1")
            w.bounds.append(f"0 <= m_{i}_{j}")
    else:
        w.row("interference", f"{w.var('Itot')} >= 0")

    for i, j in _dmin_pairs(instance):
        w.row(f"spacing_{i}_{j}", f"{select[i]} + {select[j]} <= 1")

    # Flow rows: every companion terminal and non-root substation pulls one unit.
    incoming: dict[str, list[str]] = {}
    outgoing: dict[str, list[str]] = {}
    for tail, head, _ in arcs:
        incoming.setdefault(head, []).append(f"f_{tail}_{head}")
        outgoing.setdefault(tail, []).append(f"f_{tail}_{head}")
    sinks = {f"w{i}" for i in pos_ids}
    if len(instance.substations) > 1:
        sinks |= {f"v{s.id}" for s in instance.substations}
    nodes = sorted(set(incoming) | set(outgoing))
    for node in nodes:
        if node == root_name:
            continue
        terms = [w.term(1.0, f) for f in incoming.get(node, [])]
        terms += [w.term(-1.0, f) for f in outgoing.get(node, [])]
        rhs = "= 1" if node in sinks else "= 0"
        w.row(f"balance_{node}", _join_terms(terms) + f" {rhs}")
    big_m = len(instance.substations) + len(pos_ids)
    for tail, head, _ in arcs:
        w.row(f"cap_{tail}_{head}", f"f_{tail}_{head} - {_fmt(float(big_m))} x_{tail}_{head} <= 0")

    if spec.include_ilb_cut:
        _ilb_cut_row(instance, w)
    for tail, head, _ in arcs:
        w.bounds.append(f"0 <= f_{tail}_{head}")
    w.binaries.extend(f"x_{t}_{h}" for t, h, _ in arcs)
    return w.render()


# --------------------------------------------------------------------------
# Round-trip checking

@dataclass(frozen=True)
class LpSummary:
    objective_sense: str
    n_variables: int
    n_constraints: int
    variables: tuple[str, ...]
    rows: tuple[str, ...]


_SECTION_STARTS = {
    "minimize": "objective",
    "maximize": "objective",
    "subject": "rows",
    "st": "rows",
    "bounds": "bounds",
    "binary": "binary",
    "binaries": "binary",
    "general": "general",
    "end": "end",
}


def check_lp_roundtrip(path, manifest: dict | str | None = "auto") -> LpSummary:
    """Re-parse an emitted LP file and cross-check it against its manifest.

    manifest="auto" looks for <path>.manifest.json; pass None to skip the
    comparison or a dict/path to use explicitly.  Raises ParseError with
    a line number for malformed or truncated files.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    sense: str | None = None
    section: str | None = None
    variables: dict[str, None] = {}
    rows: list[str] = []
    saw_end = False
    in_brackets = False

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        word = line.split()[0].lower()
        if word in _SECTION_STARTS and not in_brackets:
            section = _SECTION_STARTS[word]
            if section == "objective":
                sense = "minimize" if word == "minimize" else "maximize"
            if section == "end":
                saw_end = True
                break
            continue
        if section is None:
            raise ParseError(f"{path}:{lineno}: content before any section keyword")
        if section in ("objective", "rows"):
            body = line
            if ":" in line:
                row_name, body = line.split(":", 1)
                if section == "rows":
                    rows.append(row_name.strip())
            for tok in body.replace("[", " [ ").replace("]", " ] ").split():
                if tok == "[":
                    in_brackets = True
                    continue
                if tok == "]":
                    in_brackets = False
                    continue
                if tok in ("+", "-", "*", "<=", ">=", "=", "<", ">"):
                    continue
                if _is_number(tok):
                    continue
                if not _is_name(tok):
                    raise ParseError(f"{path}:{lineno}: unexpected token {tok!r}")
                variables.setdefault(tok)
        elif section == "bounds":
            for tok in line.split():
                if tok in ("<=", ">=", "=", "free") or _is_number(tok):
                    continue
                if not _is_name(tok):
                    raise ParseError(f"{path}:{lineno}: unexpected token {tok!r} in bounds")
                variables.setdefault(tok)
        elif section in ("binary", "general"):
            for tok in line.split():
                if not _is_name(tok):
                    raise ParseError(f"{path}:{lineno}: unexpected token {tok!r} in {section}")
                variables.setdefault(tok)

    if in_brackets:
        raise ParseError(f"{path}: unterminated bracket expression")
    if not saw_end:
        raise ParseError(f"{path}: missing End marker (truncated file?)")
    if sense is None:
        raise ParseError(f"{path}: no objective section")

    summary = LpSummary(
        objective_sense=sense,
        n_variables=len(variables),
        n_constraints=len(rows),
        variables=tuple(variables),
        rows=tuple(rows),
    )

    if manifest == "auto":
        manifest_path = str(path) + ".manifest.json"
        try:
            with open(manifest_path, "r", encoding="utf-8") as fh:
                manifest = json.load(fh)
        except FileNotFoundError:
            manifest = None
    if isinstance(manifest, str):
        with open(manifest, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    if manifest is not None:
        if manifest["n_variables"] != summary.n_variables or manifest["n_constraints"] != summary.n_constraints:
            raise ParseError(
                f"{path}: parsed {summary.n_variables} variables / {summary.n_constraints} rows, "
                f"manifest says {manifest['n_variables']} / {manifest['n_constraints']}"
            )
        if manifest["objective_sense"] != summary.objective_sense:
            raise ParseError(f"{path}: objective sense disagrees with manifest")
    return summary


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _is_name(tok: str) -> bool:
    if not tok:
        return False
    head = tok[0]
    if not (head.isalpha() or head == "_"):
        return False
    return all(c.isalnum() or c == "_" for c in tok)
