"""Problem data model, JSON instance format, and synthetic site generation.

An instance bundles substations, candidate turbine positions with build
costs, a cable cost rate, a minimum turbine spacing, a production quota,
a turbine spec, a wind rose, and (optionally) a precomputed interference
matrix.  Units are fixed throughout: coordinates and distances in
meters, money in kEUR, cable cost in kEUR/km, power in MW.

The JSON document layout is described in the README.  Top-level keys, in
order: ``site``, ``substations``, ``positions``, ``cable_cost_keur_per_km``,
``d_min_m``, ``quota``, ``turbine``, ``wind_rose``, ``interference_mw``
(optional).  Numbers are written with 9 significant digits; instances
produced by the generator are pre-rounded so that save/load is lossless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantError, ParseError, SchemaError
from .wake import InterferenceMatrix, WakeParams, build_interference_matrix, power_output


def _round9(x: float) -> float:
    """Round to 9 significant digits, the on-disk number format."""
    return float(f"{float(x):.9g}")


@dataclass(frozen=True)
class Position:
    """A buildable point: either a substation (build cost 0) or a candidate.

    profit_mw optionally overrides the wind-rose-derived expected output
    of a turbine at this position; substations never carry one.
    """

    id: int
    x_m: float
    y_m: float
    build_cost_keur: float
    profit_mw: float | None = None


@dataclass(frozen=True)
class TurbineSpec:
    rated_power_mw: float
    rotor_diameter_m: float
    cut_in_ms: float
    rated_speed_ms: float
    cut_out_ms: float
    thrust_coefficient: float

    def __post_init__(self) -> None:
        if not (0.0 < self.cut_in_ms < self.rated_speed_ms < self.cut_out_ms):
            raise InvariantError(
                "turbine speeds must satisfy 0 < cut_in < rated_speed < cut_out, got "
                f"{self.cut_in_ms}, {self.rated_speed_ms}, {self.cut_out_ms}"
            )
        if self.rated_power_mw <= 0.0:
            raise InvariantError("rated power must be positive")
        if self.rotor_diameter_m <= 0.0:
            raise InvariantError("rotor diameter must be positive")
        if not (0.0 < self.thrust_coefficient < 1.0):
            raise InvariantError("thrust coefficient must lie in (0, 1)")


@dataclass(frozen=True)
class WindBin:
    direction_deg: float
    speed_ms: float
    probability: float


@dataclass(frozen=True)
class WindRose:
    """Discrete joint distribution of wind direction and speed."""

    bins: tuple[WindBin, ...]

    def __post_init__(self) -> None:
        if not self.bins:
            raise InvariantError("wind rose needs at least one bin")
        total = 0.0
        for b in self.bins:
            if not (0.0 <= b.direction_deg < 360.0):
                raise InvariantError(f"direction {b.direction_deg} outside [0, 360)")
            if b.speed_ms < 0.0:
                raise InvariantError(f"negative wind speed {b.speed_ms}")
            if b.probability < 0.0:
                raise InvariantError(f"negative probability {b.probability}")
            total += b.probability
        if abs(total - 1.0) > 1e-9:
            raise InvariantError(f"wind rose probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class QuotaSpec:
    """Required net production, either absolute or as a turbine count.

    Exactly one of the two fields is set.  A turbine count is converted
    through quota_for_equivalent_turbines, i.e. the interference-free
    expected output of that many machines under the instance's rose.
    """

    mw: float | None = None
    equivalent_turbines: int | None = None

    def __post_init__(self) -> None:
        if (self.mw is None) == (self.equivalent_turbines is None):
            raise InvariantError("quota must set exactly one of mw / equivalent_turbines")
        if self.equivalent_turbines is not None and self.equivalent_turbines <= 0:
            raise InvariantError("equivalent_turbines must be a positive integer")


def expected_turbine_output_mw(rose: WindRose, turbine: TurbineSpec) -> float:
    """Expected interference-free output of one turbine over the rose."""
    return sum(b.probability * power_output(b.speed_ms, turbine) for b in rose.bins)


def quota_for_equivalent_turbines(n: int, rose: WindRose, turbine: TurbineSpec) -> float:
    """Quota matching the expected output of n unwaked turbines."""
    if n <= 0:
        raise InvariantError("turbine count must be positive")
    return n * expected_turbine_output_mw(rose, turbine)


@dataclass(frozen=True)
class SiteInstance:
    name: str
    substations: tuple[Position, ...]
    positions: tuple[Position, ...]
    cable_cost_keur_per_km: float
    d_min_m: float
    quota: QuotaSpec
    turbine: TurbineSpec
    wind_rose: WindRose
    interference: InterferenceMatrix | None = None

    @property
    def n_positions(self) -> int:
        return len(self.positions)

    @cached_property
    def position_ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.positions)

    @cached_property
    def quota_mw(self) -> float:
        if self.quota.mw is not None:
            return self.quota.mw
        return quota_for_equivalent_turbines(self.quota.equivalent_turbines, self.wind_rose, self.turbine)

    @cached_property
    def profits_mw(self) -> np.ndarray:
        """Per-position interference-free expected output, MW."""
        base = expected_turbine_output_mw(self.wind_rose, self.turbine)
        out = np.array(
            [p.profit_mw if p.profit_mw is not None else base for p in self.positions],
            dtype=float,
        )
        out.setflags(write=False)
        return out

    @cached_property
    def distances_m(self) -> np.ndarray:
        """Euclidean distances between candidate positions, meters."""
        pts = np.array([[p.x_m, p.y_m] for p in self.positions], dtype=float)
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
        d.setflags(write=False)
        return d

    @cached_property
    def interference_or_default(self) -> InterferenceMatrix:
        """The embedded matrix, or one computed with default wake params."""
        if self.interference is not None:
            return self.interference
        return build_interference_matrix(self, WakeParams())

    def with_interference(self, matrix: InterferenceMatrix | None) -> "SiteInstance":
        return replace(self, interference=matrix)


# --------------------------------------------------------------------------
# JSON serialization

_TOP_KEYS = (
    "site",
    "substations",
    "positions",
    "cable_cost_keur_per_km",
    "d_min_m",
    "quota",
    "turbine",
    "wind_rose",
    "interference_mw",
)
_TURBINE_KEYS = (
    "rated_power_mw",
    "rotor_diameter_m",
    "cut_in_ms",
    "rated_speed_ms",
    "cut_out_ms",
    "thrust_coefficient",
)


def _require_keys(obj: dict, required: Sequence[str], optional: Sequence[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = [k for k in required if k not in obj]
    extra = [k for k in obj if k not in required and k not in optional]
    if missing:
        raise SchemaError(f"{where}: missing keys {missing}")
    if extra:
        raise SchemaError(f"{where}: unexpected keys {extra}")


def _number(obj: dict, key: str, where: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}.{key}: expected a number, got {type(v).__name__}")
    return float(v)


def _position_from_json(obj: dict, where: str, allow_profit: bool) -> Position:
    optional = ("profit_mw",) if allow_profit else ()
    _require_keys(obj, ("id", "x_m", "y_m", "build_cost_keur"), optional, where)
    ident = obj["id"]
    if isinstance(ident, bool) or not isinstance(ident, int):
        raise SchemaError(f"{where}.id: expected an integer")
    profit = None
    if allow_profit and "profit_mw" in obj:
        profit = _number(obj, "profit_mw", where)
    return Position(
        id=ident,
        x_m=_number(obj, "x_m", where),
        y_m=_number(obj, "y_m", where),
        build_cost_keur=_number(obj, "build_cost_keur", where),
        profit_mw=profit,
    )


def _position_to_json(p: Position, with_profit: bool) -> dict:
    out = {
        "id": p.id,
        "x_m": _round9(p.x_m),
        "y_m": _round9(p.y_m),
        "build_cost_keur": _round9(p.build_cost_keur),
    }
    if with_profit and p.profit_mw is not None:
        out["profit_mw"] = _round9(p.profit_mw)
    return out


def load_instance(path) -> SiteInstance:
    """Read an instance document and validate every structural invariant."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc

    _require_keys(doc, _TOP_KEYS[:-1], ("interference_mw",), "instance")
    if not isinstance(doc["site"], str):
        raise SchemaError("instance.site: expected a string")
    if not isinstance(doc["substations"], list) or not isinstance(doc["positions"], list):
        raise SchemaError("instance.substations / instance.positions must be arrays")

    substations = tuple(
        _position_from_json(o, f"substations[{k}]", allow_profit=False)
        for k, o in enumerate(doc["substations"])
    )
    positions = tuple(
        _position_from_json(o, f"positions[{k}]", allow_profit=True)
        for k, o in enumerate(doc["positions"])
    )

    quota_obj = doc["quota"]
    _require_keys(quota_obj, (), ("mw", "equivalent_turbines"), "quota")
    if len(quota_obj) != 1:
        raise SchemaError("quota must contain exactly one of mw / equivalent_turbines")
    if "mw" in quota_obj:
        quota = QuotaSpec(mw=_number(quota_obj, "mw", "quota"))
    else:
        n = quota_obj["equivalent_turbines"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise SchemaError("quota.equivalent_turbines: expected an integer")
        quota = QuotaSpec(equivalent_turbines=n)

    tobj = doc["turbine"]
    _require_keys(tobj, _TURBINE_KEYS, (), "turbine")
    turbine = TurbineSpec(**{k: _number(tobj, k, "turbine") for k in _TURBINE_KEYS})

    robj = doc["wind_rose"]
    _require_keys(robj, ("bins",), (), "wind_rose")
    if not isinstance(robj["bins"], list):
        raise SchemaError("wind_rose.bins must be an array")
    bins = []
    for k, entry in enumerate(robj["bins"]):
        if not isinstance(entry, list) or len(entry) != 3:
            raise SchemaError(f"wind_rose.bins[{k}]: expected [direction_deg, speed_ms, probability]")
        d, s, p = entry
        for v in (d, s, p):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(f"wind_rose.bins[{k}]: expected numbers")
        bins.append(WindBin(float(d), float(s), float(p)))
    rose = WindRose(tuple(bins))

    interference = None
    if "interference_mw" in doc:
        rows = doc["interference_mw"]
        n = len(positions)
        if not isinstance(rows, list) or len(rows) != n or any(
            not isinstance(r, list) or len(r) != n for r in rows
        ):
            raise SchemaError(f"interference_mw must be a {n}x{n} array")
        interference = InterferenceMatrix(np.array(rows, dtype=float))

    instance = SiteInstance(
        name=doc["site"],
        substations=substations,
        positions=positions,
        cable_cost_keur_per_km=_number(doc, "cable_cost_keur_per_km", "instance"),
        d_min_m=_number(doc, "d_min_m", "instance"),
        quota=quota,
        turbine=turbine,
        wind_rose=rose,
        interference=interference,
    )
    problems = validate(instance, check_feasibility=False)
    if problems:
        raise InvariantError(f"{path}: " + "; ".join(problems))
    return instance


def save_instance(instance: SiteInstance, path) -> None:
    """Write the instance document with fixed key order and number format."""
    doc: dict = {
        "site": instance.name,
        "substations": [_position_to_json(p, with_profit=False) for p in instance.substations],
        "positions": [_position_to_json(p, with_profit=True) for p in instance.positions],
        "cable_cost_keur_per_km": _round9(instance.cable_cost_keur_per_km),
        "d_min_m": _round9(instance.d_min_m),
        "quota": (
            {"mw": _round9(instance.quota.mw)}
            if instance.quota.mw is not None
            else {"equivalent_turbines": instance.quota.equivalent_turbines}
        ),
        "turbine": {k: _round9(getattr(instance.turbine, k)) for k in _TURBINE_KEYS},
        "wind_rose": {
            "bins": [
                [_round9(b.direction_deg), _round9(b.speed_ms), _round9(b.probability)]
                for b in instance.wind_rose.bins
            ]
        },
    }
    if instance.interference is not None:
        doc["interference_mw"] = [[_round9(v) for v in row] for row in instance.interference.values]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# Validation

def validate(instance: SiteInstance, check_feasibility: bool = True, exact_limit: int = 20) -> list[str]:
    """All invariant violations, as human-readable diagnostics.

    With check_feasibility the quota is additionally tested against what
    any spacing-respecting selection could net: first the cheap bound
    (quota above the summed profits is unreachable outright), then an
    exact small-scale search, falling back to a greedy certificate for
    large instances.  An empty list means the instance is well-formed
    and not trivially infeasible.
    """
    out: list[str] = []
    if not instance.substations:
        out.append("instance needs at least one substation")
    if not instance.positions:
        out.append("instance needs at least one position")
    ids = [p.id for p in instance.substations] + [p.id for p in instance.positions]
    if len(set(ids)) != len(ids):
        out.append("node ids must be unique across substations and positions")
    if any(i < 0 for i in ids):
        out.append("node ids must be nonnegative")
    for p in instance.substations:
        if p.build_cost_keur != 0.0:
            out.append(f"substation {p.id} must have build cost 0")
    for p in list(instance.substations) + list(instance.positions):
        if not (math.isfinite(p.x_m) and math.isfinite(p.y_m)):
            out.append(f"node {p.id} has non-finite coordinates")
    for p in instance.positions:
        if not (p.build_cost_keur > 0.0):
            out.append(f"position {p.id} must have strictly positive build cost")
        if p.profit_mw is not None and p.profit_mw <= 0.0:
            out.append(f"position {p.id} profit override must be positive")
    if instance.cable_cost_keur_per_km < 0.0:
        out.append("cable cost must be nonnegative")
    if instance.d_min_m < 0.0:
        out.append("minimum distance must be nonnegative")
    if instance.interference is not None and instance.positions and instance.interference.n != instance.n_positions:
        out.append(
            f"interference matrix is {instance.interference.n}x{instance.interference.n}, "
            f"expected {instance.n_positions}x{instance.n_positions}"
        )
    try:
        quota = instance.quota_mw
    except InvariantError as exc:
        out.append(str(exc))
        return out
    if quota <= 0.0:
        out.append("quota must be positive")
    if out or not check_feasibility:
        return out

    total_profit = float(instance.profits_mw.sum())
    if quota > total_profit + 1e-9:
        out.append(
            f"quota unreachable: requires {quota:.6g} MW but even an interference-free "
            f"build of all positions yields {total_profit:.6g} MW"
        )
        return out

    from . import bounds  # deferred; bounds builds on this module

    if instance.n_positions <= exact_limit:
        if bounds.mis_quota(instance, exact_limit=exact_limit) >= quota - 1e-9:
            return out  # a zero-interference selection already meets the quota
        try:
            bounds.min_interference(instance)
        except Exception as exc:  # InfeasibleError; anything else is a real bug
            from .errors import InfeasibleError

            if isinstance(exc, InfeasibleError):
                out.append(
                    "trivially infeasible: no selection respecting the minimum distance "
                    "nets the quota"
                )
            else:
                raise
    else:
        if not _greedy_quota_certificate(instance):
            out.append(
                "possibly infeasible: greedy selection could not net the quota "
                "(exact check skipped beyond size budget)"
            )
    return out


def _greedy_quota_certificate(instance: SiteInstance) -> bool:
    """Constructive feasibility check: greedily add best-net positions."""
    q = instance.profits_mw
    inter = instance.interference_or_default.values
    d = instance.distances_m
    n = instance.n_positions
    chosen: list[int] = []
    net = 0.0
    available = set(range(n))
    while available and net < instance.quota_mw - 1e-9:
        best, best_gain = None, -math.inf
        for j in sorted(available):
            if any(d[i, j] < instance.d_min_m for i in chosen):
                continue
            gain = q[j] - sum(inter[i, j] + inter[j, i] for i in chosen)
            if gain > best_gain:
                best, best_gain = j, gain
        if best is None or best_gain <= 0.0:
            return False
        chosen.append(best)
        available.discard(best)
        net += best_gain
    return net >= instance.quota_mw - 1e-9


# --------------------------------------------------------------------------
# Synthetic generation

@dataclass(frozen=True)
class CostField:
    """Linear cost ramp across the region.

    Build cost rises from base_keur to base_keur + amplitude_keur along
    the direction angle_deg (degrees counterclockwise from east).
    """

    base_keur: float = 900.0
    amplitude_keur: float = 1100.0
    angle_deg: float = 30.0

    def __post_init__(self) -> None:
        if self.base_keur <= 0.0:
            raise InvariantError("cost field base must be positive")
        if self.amplitude_keur < 0.0:
            raise InvariantError("cost field amplitude must be nonnegative")


DEFAULT_TURBINE = TurbineSpec(
    rated_power_mw=15.0,
    rotor_diameter_m=240.0,
    cut_in_ms=3.0,
    rated_speed_ms=10.59,
    cut_out_ms=25.0,
    thrust_coefficient=0.8,
)

DEFAULT_CABLE_COST_KEUR_PER_KM = 504.0
DEFAULT_D_MIN_M = 1200.0


def default_wind_rose() -> WindRose:
    """A mildly asymmetric eight-sector rose with a southwest maximum."""
    bins = [
        (0.0, 7.0, 0.08),
        (45.0, 6.5, 0.06),
        (90.0, 7.5, 0.07),
        (135.0, 8.0, 0.09),
        (180.0, 8.5, 0.12),
        (225.0, 9.5, 0.24),
        (270.0, 9.0, 0.20),
        (315.0, 8.0, 0.14),
    ]
    return WindRose(tuple(WindBin(*b) for b in bins))


def generate_synthetic_site(
    n_positions: int,
    region: tuple[float, float, float, float] = (0.0, 0.0, 7000.0, 7000.0),
    cost_field: CostField | None = None,
    seed: int = 0,
    *,
    quota: QuotaSpec | None = None,
    name: str | None = None,
    turbine: TurbineSpec = DEFAULT_TURBINE,
    wind_rose: WindRose | None = None,
    cable_cost_keur_per_km: float = DEFAULT_CABLE_COST_KEUR_PER_KM,
    d_min_m: float = DEFAULT_D_MIN_M,
    wake: WakeParams | None = None,
    embed_interference: bool = True,
) -> SiteInstance:
    """Sample a reproducible synthetic site.

    Candidate positions are i.i.d. uniform over the region rectangle
    under a generator seeded with ``seed``; build costs follow the cost
    field's smooth ramp; the single substation sits at the coordinate
    mean of the sampled positions.  All sampled numbers are pre-rounded
    to the on-disk precision so the instance survives save/load exactly.
    """
    if n_positions < 1:
        raise InvariantError("n_positions must be at least 1")
    x0, y0, x1, y1 = region
    if not (x1 > x0 and y1 > y0):
        raise InvariantError(f"degenerate region {region}")
    cost_field = cost_field or CostField()
    rose = wind_rose or default_wind_rose()
    quota = quota or QuotaSpec(equivalent_turbines=max(1, round(n_positions / 10)))

    rng = np.random.default_rng(seed)
    xs = rng.uniform(x0, x1, size=n_positions)
    ys = rng.uniform(y0, y1, size=n_positions)

    ux = math.cos(math.radians(cost_field.angle_deg))
    uy = math.sin(math.radians(cost_field.angle_deg))
    corners = [(cx, cy) for cx in (x0, x1) for cy in (y0, y1)]
    projections = [cx * ux + cy * uy for cx, cy in corners]
    lo, hi = min(projections), max(projections)
    span = hi - lo

    positions = []
    for k in range(n_positions):
        t = ((xs[k] * ux + ys[k] * uy) - lo) / span if span > 0 else 0.0
        positions.append(
            Position(
                id=k + 1,
                x_m=_round9(xs[k]),
                y_m=_round9(ys[k]),
                build_cost_keur=_round9(cost_field.base_keur + cost_field.amplitude_keur * t),
            )
        )
    substation = Position(
        id=0,
        x_m=_round9(float(np.mean([p.x_m for p in positions]))),
        y_m=_round9(float(np.mean([p.y_m for p in positions]))),
        build_cost_keur=0.0,
    )

    instance = SiteInstance(
        name=name or f"synthetic-n{n_positions}-seed{seed}",
        substations=(substation,),
        positions=tuple(positions),
        cable_cost_keur_per_km=_round9(cable_cost_keur_per_km),
        d_min_m=_round9(d_min_m),
        quota=quota if quota.mw is None else QuotaSpec(mw=_round9(quota.mw)),
        turbine=turbine,
        wind_rose=rose,
    )
    if embed_interference:
        matrix = build_interference_matrix(instance, wake or WakeParams())
        rounded = np.vectorize(_round9)(matrix.values) if matrix.n else matrix.values
        instance = instance.with_interference(InterferenceMatrix(rounded))
    return instance
