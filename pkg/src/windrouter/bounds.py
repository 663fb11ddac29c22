"""Lower bounds and auxiliary selection problems used for pruning and splitting.

Everything here works on the selection level only; no cable routing is
involved.  The interference bounds rest on a simple counting argument:
if at least k turbines must be built, every built turbine inflicts at
least the sum of its k-1 smallest admissible row entries, and the total
interference is at least the sum of the k smallest such row bounds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import BudgetError, InfeasibleError, InvariantError

if TYPE_CHECKING:
    from .graphs import TransformedGraph
    from .instances import SiteInstance

MIS_EXACT_LIMIT = 30


@dataclass(frozen=True)
class ConflictGraph:
    """Positions that can never be built together.

    An edge joins i and j when either would interfere with the other or
    they sit closer than the minimum distance.
    """

    n: int
    adjacency: tuple[int, ...]  # bitmask per position index

    @classmethod
    def from_instance(cls, instance: "SiteInstance") -> "ConflictGraph":
        n = instance.n_positions
        inter = instance.interference_or_default.values
        d = instance.distances_m
        masks = [0] * n
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                if inter[i, j] + inter[j, i] > 0.0 or d[i, j] < instance.d_min_m:
                    masks[i] |= 1 << j
        return cls(n=n, adjacency=tuple(masks))

    def edges(self) -> list[tuple[int, int]]:
        return [
            (i, j)
            for i in range(self.n)
            for j in range(i + 1, self.n)
            if self.adjacency[i] >> j & 1
        ]


@dataclass(frozen=True)
class CountBounds:
    n_min: int
    k_ub: int


def n_min(instance: "SiteInstance") -> int:
    """Fewest turbines any feasible selection can contain.

    Interference only lowers net output, so the count that the largest
    profits alone need to cover the quota is a valid minimum.
    """
    quota = instance.quota_mw
    if quota <= 0.0:
        return 0
    profits = np.sort(instance.profits_mw)[::-1]
    total = 0.0
    for k, q in enumerate(profits, start=1):
        total += q
        if total >= quota - 1e-12:
            return k
    raise InfeasibleError(
        f"quota {quota:.6g} MW exceeds the summed profits {total:.6g} MW"
    )


def interference_row_lb(instance: "SiteInstance", i: int, n_min_turbines: int) -> float:
    """Least interference position i must cause in any build of n_min turbines.

    Partners closer than the minimum distance are excluded (they can
    never coexist with i); the bound is the sum of the n_min - 1
    smallest remaining row entries, or 0 when too few partners remain.
    """
    if n_min_turbines < 1:
        raise InvariantError("n_min must be at least 1")
    inter = instance.interference_or_default.values
    d = instance.distances_m
    eligible = [
        inter[i, j]
        for j in range(instance.n_positions)
        if j != i and d[i, j] >= instance.d_min_m
    ]
    need = n_min_turbines - 1
    if need == 0 or len(eligible) < need:
        return 0.0
    return float(np.sort(np.array(eligible))[:need].sum())


def total_interference_lb(instance: "SiteInstance", n_min_turbines: int) -> float:
    """Valid lower bound on the total interference of any feasible selection."""
    rows = sorted(interference_row_lb(instance, i, n_min_turbines) for i in range(instance.n_positions))
    return float(sum(rows[:n_min_turbines]))


def max_weight_independent_set(instance: "SiteInstance", exact_limit: int = MIS_EXACT_LIMIT) -> tuple[float, tuple[int, ...]]:
    """Exact maximum-profit independent set of the conflict graph.

    Branch and bound over bitmasks with a greedy warm start; raises
    BudgetError beyond the exact size limit.  Returns the quota value
    and the selected position indices.
    """
    n = instance.n_positions
    if n > exact_limit:
        raise BudgetError(f"exact independent set limited to {exact_limit} positions, got {n}")
    conflicts = ConflictGraph.from_instance(instance).adjacency
    weights = instance.profits_mw

    order = sorted(range(n), key=lambda i: (-weights[i], i))
    greedy: list[int] = []
    used = 0
    for i in order:
        if not (used >> i & 1):
            greedy.append(i)
            used |= conflicts[i] | (1 << i)
    best = [float(sum(weights[i] for i in greedy)), sorted(greedy)]
    chosen: list[int] = []

    def dfs(mask: int, value: float, remaining: float) -> None:
        if mask == 0:
            if value > best[0] + 1e-12:
                best[0] = value
                best[1] = sorted(chosen)
            return
        if value + remaining <= best[0] + 1e-12:
            return
        pick, pick_w = -1, -1.0
        m = mask
        while m:
            lsb = m & -m
            i = lsb.bit_length() - 1
            if weights[i] > pick_w:
                pick, pick_w = i, weights[i]
            m ^= lsb
        removed = (conflicts[pick] & mask) | (1 << pick)
        lost = 0.0
        m = removed
        while m:
            lsb = m & -m
            lost += weights[lsb.bit_length() - 1]
            m ^= lsb
        chosen.append(pick)
        dfs(mask & ~removed, value + weights[pick], remaining - lost)
        chosen.pop()
        dfs(mask & ~(1 << pick), value, remaining - weights[pick])

    dfs((1 << n) - 1, 0.0, float(weights.sum()))
    return best[0], tuple(best[1])


def mis_quota(instance: "SiteInstance", exact_limit: int = MIS_EXACT_LIMIT) -> float:
    """Largest quota coverable with zero interference."""
    value, _ = max_weight_independent_set(instance, exact_limit=exact_limit)
    return value


@dataclass(frozen=True)
class MinInterferenceResult:
    i_tot_mw: float
    selection: tuple[int, ...]  # position ids
    proven_optimal: bool


def min_interference(
    instance: "SiteInstance",
    time_budget_s: float | None = None,
) -> MinInterferenceResult:
    """Least total interference of any quota-feasible, spacing-feasible selection.

    Selection branch and bound; the running interference is monotone in
    the selection, which makes the incumbent a hard pruning bound.  With
    a time budget the best selection found so far is returned and
    flagged as unproven.  Ties are resolved toward the lexicographically
    smallest selection.
    """
    value, selection, proven = _selection_minimize(
        instance,
        objective="interference",
        time_budget_s=time_budget_s,
    )
    if proven and instance.n_positions <= MIS_EXACT_LIMIT:
        zero = value <= 1e-12
        covered = mis_quota(instance) >= instance.quota_mw - 1e-9
        if zero != covered:
            raise AssertionError(
                "independent-set feasibility disagrees with the zero-interference optimum"
            )
    ids = tuple(sorted(instance.positions[i].id for i in selection))
    return MinInterferenceResult(i_tot_mw=value, selection=ids, proven_optimal=proven)


def min_build_cost_selection(instance: "SiteInstance", time_budget_s: float | None = None) -> tuple[float, tuple[int, ...], bool]:
    """Cheapest-to-build quota-feasible selection, ignoring cables.

    Returns (build cost, position ids, proven flag).  This is the
    layout-only first stage of the sequential pipeline.
    """
    value, selection, proven = _selection_minimize(
        instance,
        objective="build_cost",
        time_budget_s=time_budget_s,
    )
    ids = tuple(sorted(instance.positions[i].id for i in selection))
    return value, ids, proven


def _selection_minimize(
    instance: "SiteInstance",
    objective: str,
    time_budget_s: float | None,
) -> tuple[float, tuple[int, ...], bool]:
    """Shared branch and bound over position subsets.

    Minimizes either the total interference or the summed build cost
    subject to net quota and minimum spacing.  Both objectives are
    monotone under adding positions, so a node whose partial value
    already reaches the incumbent is dead, and once the partial net
    output covers the quota the partial selection itself is the best
    completion of its subtree.
    """
    n = instance.n_positions
    quota = instance.quota_mw
    q = instance.profits_mw
    inter = instance.interference_or_default.values
    cross = inter + inter.T  # cross[i, j]: interference a pair adds jointly
    conflicts = dmin_conflict_masks(instance)
    costs = np.array([p.build_cost_keur for p in instance.positions], dtype=float)

    if quota <= 0.0:
        return 0.0, (), True
    if float(q.sum()) < quota - 1e-9:
        raise InfeasibleError(
            f"quota {quota:.6g} MW exceeds the summed profits {float(q.sum()):.6g} MW"
        )

    if objective == "interference":
        degree = cross.sum(axis=1)
        order = sorted(range(n), key=lambda i: (-(q[i] / (1.0 + degree[i])), i))
    else:
        order = sorted(range(n), key=lambda i: (costs[i] / q[i], i))

    deadline = None if time_budget_s is None else time.monotonic() + time_budget_s
    best_value = math.inf
    best_sel: tuple[int, ...] = ()
    found = False
    timed_out = False
    chosen: list[int] = []

    def dfs(depth: int, in_mask: int, banned: int, value: float, net: float, cross_vec: np.ndarray) -> None:
        nonlocal best_value, best_sel, found, timed_out
        if timed_out or (deadline is not None and time.monotonic() > deadline):
            timed_out = True
            return
        if value > best_value + 1e-12:
            return
        if net >= quota - 1e-9:
            sel = tuple(sorted(instance.positions[i].id for i in chosen))
            if value < best_value - 1e-12 or (
                abs(value - best_value) <= 1e-12 and (not found or sel < tuple(sorted(instance.positions[i].id for i in best_sel)))
            ):
                best_value = value
                best_sel = tuple(chosen)
                found = True
            return  # supersets only add cost or interference
        if depth == n:
            return
        # Optimistic completion: every undecided position contributes its
        # profit net of the interference against the current selection.
        gain = 0.0
        for k in range(depth, n):
            i = order[k]
            if banned >> i & 1:
                continue
            g = q[i] - cross_vec[i]
            if g > 0.0:
                gain += g
        if net + gain < quota - 1e-9:
            return

        i = order[depth]
        if not (banned >> i & 1):
            extra = float(cross_vec[i])
            new_value = value + (float(costs[i]) if objective == "build_cost" else extra)
            if new_value <= best_value + 1e-12:
                chosen.append(i)
                dfs(
                    depth + 1,
                    in_mask | (1 << i),
                    banned | conflicts[i],
                    new_value,
                    net + q[i] - extra,
                    cross_vec + cross[i],
                )
                chosen.pop()
        dfs(depth + 1, in_mask, banned | (1 << i), value, net, cross_vec)

    dfs(0, 0, 0, 0.0, 0.0, np.zeros(n))
    if not found:
        if timed_out:
            raise InfeasibleError("no feasible selection found within the time budget")
        raise InfeasibleError(
            "no selection respecting the minimum distance nets the quota"
        )
    return best_value, best_sel, not timed_out


def dmin_conflict_masks(instance: "SiteInstance") -> list[int]:
    """Bitmasks of positions too close to each other (spacing only)."""
    n = instance.n_positions
    d = instance.distances_m
    masks = [0] * n
    for i in range(n):
        for j in range(n):
            if i != j and d[i, j] < instance.d_min_m:
                masks[i] |= 1 << j
    return masks


def k_upper_bound(instance: "SiteInstance") -> int:
    """Largest turbine count any optimal solution can use.

    Uses the worst-case net output of k turbines: the k smallest profits
    minus k times the largest possible per-turbine row interference.  If
    k turbines always cover the quota, any larger selection could drop
    to k of its members, stay feasible, and get strictly cheaper, so no
    optimum exceeds the first such k.  Falls back to the position count
    when the inequality never holds.
    """
    n = instance.n_positions
    quota = instance.quota_mw
    q_sorted = np.sort(instance.profits_mw)
    inter = instance.interference_or_default.values
    rows_desc = -np.sort(-inter, axis=1)

    def worst_net(k: int) -> float:
        if k == 0:
            return 0.0
        q_min = float(q_sorted[:k].sum())
        i_max_rows = rows_desc[:, : k - 1].sum(axis=1) if k > 1 else np.zeros(n)
        return q_min - k * float(i_max_rows.max(initial=0.0))

    prev = worst_net(0)
    for k in range(1, n + 1):
        cur = worst_net(k)
        if cur >= quota - 1e-12 and prev < quota - 1e-12:
            return k
        prev = cur
    return n


def count_bounds(instance: "SiteInstance") -> CountBounds:
    return CountBounds(n_min=n_min(instance), k_ub=k_upper_bound(instance))


def last_layer_cap(k_ub: int, hop_limit: int) -> int:
    """How many turbines can sit at the final hop depth."""
    if hop_limit < 1:
        raise InvariantError("hop limit must be at least 1")
    return k_ub // hop_limit


def routing_lower_bound(
    graph: "TransformedGraph",
    fixed_in: Sequence[int],
    fixed_out: Sequence[int] = (),
) -> float:
    """Admissible cost bound for completing a partial selection.

    Every selected position pays its build cost plus at least the
    cheapest cable that could feed it from the root side, the other
    selected positions, or any still-undecided position.  fixed_out
    positions are excluded as cable tails; routing through them would
    cost their build cost on top, which realistic build costs make more
    expensive than any cable saving.
    """
    instance = graph.instance
    if instance is None:
        raise InvariantError("routing bound requires a graph built from an instance")
    if not fixed_in:
        return 0.0
    pos_by_id = {p.id: p for p in instance.positions}
    out = set(fixed_out)
    total = 0.0
    for i in fixed_in:
        total += pos_by_id[i].build_cost_keur
        head = graph.node_of_position(i)
        best = math.inf
        for a in graph.arcs:
            if a.head != head:
                continue
            tail = graph.nodes[a.tail]
            if tail.kind == "position" and (tail.ref in out or tail.ref == i):
                continue
            best = min(best, a.cable_keur)
        total += 0.0 if math.isinf(best) else best
    return total
