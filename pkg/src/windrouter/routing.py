"""Exact cable routing for a fixed turbine selection.

Two routing regimes:

* free trees: a minimum-cost Steiner arborescence from the root through
  all substations and selected positions, where any unselected position
  may serve as an intermediate at the price of its build cost (the arc
  costs already carry the head's build cost).  Solved by subset dynamic
  programming over the terminal set on the metric closure.

* radial strings: the selection is partitioned into substation-anchored
  chains of at most H turbines each, the classic layout for capacitated
  collector circuits.  Intermediates never help on a chain (detours cost
  cable and a build cost), so the dynamic program runs over the
  selection only, with state (covered set, open chain tail, chain length).

Both solvers memoize per graph and selection, and both reconstruct the
actual arc sets, not just costs.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import BudgetError, InvariantError
from .graphs import KIND_DOUBLE, ROOT_ID, TransformedGraph

if TYPE_CHECKING:
    pass

STEINER_TERMINAL_LIMIT = 14
STRING_SELECTION_LIMIT = 12


def _metric_closure(graph: TransformedGraph) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """All-pairs shortest paths over the real nodes (doubles excluded).

    Returns (dist, next_hop, node indices) and caches on the graph.
    Paths may run through unselected positions; their shifted arc costs
    make that unattractive but legal.
    """
    cached = graph.routing_cache.get("metric")
    if cached is not None:
        return cached

    real = [i for i, n in enumerate(graph.nodes) if n.kind != KIND_DOUBLE]
    index = {node: k for k, node in enumerate(real)}
    m = len(real)
    dist = np.full((m, m), math.inf)
    np.fill_diagonal(dist, 0.0)
    nxt = np.full((m, m), -1, dtype=int)
    for a in graph.arcs:
        if graph.nodes[a.head].kind == KIND_DOUBLE:
            continue
        t, h = index[a.tail], index[a.head]
        if a.cost_keur < dist[t, h]:
            dist[t, h] = a.cost_keur
            nxt[t, h] = h
    for k in range(m):
        through = dist[:, k, None] + dist[None, k, :]
        better = through < dist - 1e-12
        dist = np.where(better, through, dist)
        nxt = np.where(better, nxt[:, k, None], nxt)

    result = (dist, nxt, real)
    graph.routing_cache["metric"] = result
    return result


def _expand_path(nxt: np.ndarray, real: list[int], a: int, b: int) -> list[tuple[int, int]]:
    """Arc list of the shortest path a -> b in compact metric indices."""
    if a == b:
        return []
    out = []
    at = a
    while at != b:
        step = int(nxt[at, b])
        if step < 0:
            raise InvariantError("path reconstruction hit an unreachable pair")
        out.append((at, step))
        at = step
    return out


def steiner_arborescence(graph: TransformedGraph, terminal_ids: Sequence[int]) -> tuple[float, list[tuple[int, int]]]:
    """Cheapest arborescence from the root spanning the given node ids.

    terminal_ids are external ids (substations and positions).  Returns
    the cost and the arc list as (tail id, head id) pairs, artificial
    root rendered as -1.  Subset dynamic programming over terminals:
    f(T, v) is the best tree hanging below v that covers terminal set T,
    built either by splitting T at v or by walking v to another node.
    """
    instance = graph.instance
    if instance is None:
        raise InvariantError("routing requires a graph built from an instance")
    terminals = sorted(set(terminal_ids))
    if len(terminals) > STEINER_TERMINAL_LIMIT:
        raise BudgetError(
            f"exact routing limited to {STEINER_TERMINAL_LIMIT} terminals, got {len(terminals)}"
        )
    key = ("steiner", tuple(terminals))
    cached = graph.routing_cache.get(key)
    if cached is not None:
        return cached

    dist, nxt, real = _metric_closure(graph)
    compact_of_id = {}
    for k, node_idx in enumerate(real):
        node = graph.nodes[node_idx]
        ident = node.ref if node.ref is not None else ROOT_ID
        compact_of_id[ident] = k
    root = compact_of_id[graph.node_id(graph.root)]

    term = [compact_of_id[t] for t in terminals]
    k = len(term)
    if k == 0:
        result = (0.0, [])
        graph.routing_cache[key] = result
        return result

    m = dist.shape[0]
    full = (1 << k) - 1
    # best[mask][v]: cost of an arborescence rooted at v covering mask
    best = np.full((1 << k, m), math.inf)
    choice: list[dict[int, tuple]] = [dict() for _ in range(1 << k)]
    for t_i, t in enumerate(term):
        best[1 << t_i] = dist[:, t]

    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        merged = np.full(m, math.inf)
        merged_pick: dict[int, tuple[int, int]] = {}
        low = mask & -mask
        sub = (mask - 1) & mask
        while sub:
            if sub & low:  # enumerate each split once
                other = mask ^ sub
                cand = best[sub] + best[other]
                better = cand < merged - 1e-15
                if np.any(better):
                    for v in np.nonzero(better)[0]:
                        merged_pick[int(v)] = (sub, other)
                    merged = np.where(better, cand, merged)
            sub = (sub - 1) & mask
        # Attach the branch point u below v along a shortest path.  The
        # graph is complete, so every u carries a finite split.
        total = dist + merged[None, :]
        arg = np.argmin(total, axis=1)
        best[mask] = total[np.arange(m), arg]
        for v in range(m):
            u = int(arg[v])
            choice[mask][v] = (u, merged_pick[u])

    arcs_compact: list[tuple[int, int]] = []

    def reconstruct(mask: int, v: int) -> None:
        if mask & (mask - 1) == 0:
            t = term[mask.bit_length() - 1]
            arcs_compact.extend(_expand_path(nxt, real, v, t))
            return
        u, (a, b) = choice[mask][v]
        arcs_compact.extend(_expand_path(nxt, real, v, u))
        reconstruct(a, u)
        reconstruct(b, u)

    cost = float(best[full][root])
    reconstruct(full, root)

    # Deduplicate: overlapping shortest paths can revisit an arc on ties.
    parent: dict[int, int] = {}
    for t, h in arcs_compact:
        if h not in parent:
            parent[h] = t
    id_of = {}
    for kk, node_idx in enumerate(real):
        node = graph.nodes[node_idx]
        id_of[kk] = node.ref if node.ref is not None else ROOT_ID
    arcs = [(id_of[t], id_of[h]) for h, t in sorted(parent.items())]

    result = (cost, arcs)
    graph.routing_cache[key] = result
    return result


def string_layout(
    graph: TransformedGraph,
    selection_ids: Sequence[int],
    hop_limit: int,
) -> tuple[float, list[tuple[int, int]], list[tuple[int, ...]]]:
    """Cheapest partition of a selection into substation-anchored strings.

    Returns (total cost including build costs, arc list, strings).  Each
    string holds at most hop_limit turbines; a turbine feeds at most one
    onward cable.  Dynamic programming over (covered subset, open string
    tail, open string length), extending the open string or opening a
    new one at any substation.
    """
    instance = graph.instance
    if instance is None:
        raise InvariantError("routing requires a graph built from an instance")
    if hop_limit < 1:
        raise InvariantError("hop limit must be at least 1")
    sel = sorted(set(selection_ids))
    if len(sel) > STRING_SELECTION_LIMIT:
        raise BudgetError(
            f"exact string routing limited to {STRING_SELECTION_LIMIT} turbines, got {len(sel)}"
        )
    key = ("strings", tuple(sel), hop_limit)
    cached = graph.routing_cache.get(key)
    if cached is not None:
        return cached

    pos_by_id = {p.id: p for p in instance.positions}
    builds = sum(pos_by_id[i].build_cost_keur for i in sel)
    subs = list(instance.substations)
    multi = len(subs) > 1
    base_arcs = [(ROOT_ID, s.id) for s in subs] if multi else []

    if not sel:
        result = (0.0, list(base_arcs), [])
        graph.routing_cache[key] = result
        return result

    rate = instance.cable_cost_keur_per_km

    def cable(a, b) -> float:
        return rate * math.hypot(a.x_m - b.x_m, a.y_m - b.y_m) / 1000.0

    k = len(sel)
    start_cost = []
    start_anchor = []
    for i in sel:
        best_c, best_s = math.inf, None
        for s in subs:
            c = cable(s, pos_by_id[i])
            if c < best_c - 1e-15:
                best_c, best_s = c, s.id
        start_cost.append(best_c)
        start_anchor.append(best_s)
    link = [[cable(pos_by_id[a], pos_by_id[b]) for b in sel] for a in sel]

    # state: (mask, tail index, open length) -> cable cost; parent for rebuild
    states: dict[tuple[int, int, int], float] = {}
    parent: dict[tuple[int, int, int], tuple] = {}
    for t in range(k):
        st = (1 << t, t, 1)
        states[st] = start_cost[t]
        parent[st] = ("start", t)

    # Transitions only add positions, so states of a mask are final once
    # the sweep reaches it; process masks ascending, states in fixed order.
    by_mask: dict[int, set[tuple[int, int]]] = {}
    for (mask, t, ln) in states:
        by_mask.setdefault(mask, set()).add((t, ln))
    full = (1 << k) - 1
    for mask in range(1, full + 1):
        entries = by_mask.get(mask)
        if not entries:
            continue
        for t, ln in sorted(entries):
            st = (mask, t, ln)
            cost = states[st]
            for j in range(k):
                if mask >> j & 1:
                    continue
                if ln < hop_limit:  # extend the open string
                    cand = cost + link[t][j]
                    nst = (mask | (1 << j), j, ln + 1)
                    if cand < states.get(nst, math.inf) - 1e-15:
                        states[nst] = cand
                        parent[nst] = ("extend", st)
                        by_mask.setdefault(mask | (1 << j), set()).add((j, ln + 1))
                cand = cost + start_cost[j]  # close it, open a new string at j
                nst = (mask | (1 << j), j, 1)
                if cand < states.get(nst, math.inf) - 1e-15:
                    states[nst] = cand
                    parent[nst] = ("open", st)
                    by_mask.setdefault(mask | (1 << j), set()).add((j, 1))

    best_state, best_cost = None, math.inf
    for t in range(k):
        for ln in range(1, hop_limit + 1):
            st = (full, t, ln)
            c = states.get(st, math.inf)
            if c < best_cost - 1e-15:
                best_cost, best_state = c, st

    if best_state is None:
        raise InvariantError("string layout search found no complete state")

    # Rebuild strings by walking parents backwards.
    chains: list[list[int]] = []
    st = best_state
    current: list[int] = []
    while True:
        how = parent[st]
        if how[0] == "start":
            current.append(sel[st[1]])
            chains.append(list(reversed(current)))
            break
        kind, prev = how
        current.append(sel[st[1]])
        if kind == "open":
            chains.append(list(reversed(current)))
            current = []
        st = prev
    chains.sort()

    arcs = list(base_arcs)
    strings = []
    for chain in chains:
        anchor = start_anchor[sel.index(chain[0])]
        prev_id = anchor
        for pid in chain:
            arcs.append((prev_id, pid))
            prev_id = pid
        strings.append(tuple(chain))

    result = (best_cost + builds, arcs, strings)
    graph.routing_cache[key] = result
    return result
