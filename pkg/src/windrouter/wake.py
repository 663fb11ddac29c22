"""Pairwise wake interference between turbine positions.

The wake behind an upstream turbine is modeled as a linearly expanding
cone with a uniform velocity deficit (Jensen / Park model).  Interference
between two positions is the expected power loss, in MW, that the
downstream turbine suffers over a wind rose, assuming both turbines are
built.  Losses are accumulated pairwise; no multi-wake superposition is
applied.

Wind directions follow the meteorological convention: degrees clockwise
from north, naming the direction the wind blows *from*.  A direction of
0 means wind out of the north, flowing south.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import InvariantError

if TYPE_CHECKING:
    from .instances import Position, SiteInstance, TurbineSpec, WindRose


@dataclass(frozen=True)
class WakeParams:
    """Tunables of the wake cone.

    decay_k is the dimensionless expansion rate of the cone radius per
    meter of downwind travel.  0.05 is a common offshore value.  The
    thrust coefficient defaults to the one on the turbine spec.
    """

    decay_k: float = 0.05
    thrust_coefficient: float | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.decay_k < 1.0):
            raise InvariantError(f"decay_k must lie in (0, 1), got {self.decay_k}")
        ct = self.thrust_coefficient
        if ct is not None and not (0.0 < ct < 1.0):
            raise InvariantError(f"thrust coefficient must lie in (0, 1), got {ct}")


@dataclass(frozen=True)
class InterferenceMatrix:
    """Dense pairwise interference in MW.

    Row i holds the losses position i inflicts on every other position;
    entry (i, j) is the expected MW lost at j when both i and j carry a
    turbine.  Rows and columns follow the order of the instance's
    position list.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvariantError(f"interference matrix must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvariantError("interference matrix contains non-finite entries")
        if np.any(v < 0.0):
            raise InvariantError("interference matrix contains negative entries")
        if np.any(np.diag(v) != 0.0):
            raise InvariantError("interference matrix diagonal must be exactly zero")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InterferenceMatrix):
            return NotImplemented
        return bool(np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]


def power_output(speed: float, turbine: TurbineSpec) -> float:
    """Electrical output in MW at a given hub wind speed.

    Zero below cut-in and at or above cut-out, the rated power on the
    rated plateau, and a cubic ramp in between, anchored so that output
    is exactly zero at cut-in and exactly rated at rated speed.
    """
    if speed < 0.0:
        raise InvariantError(f"wind speed must be nonnegative, got {speed}")
    if speed < turbine.cut_in_ms or speed >= turbine.cut_out_ms:
        return 0.0
    if speed >= turbine.rated_speed_ms:
        return turbine.rated_power_mw
    ci3 = turbine.cut_in_ms ** 3
    return turbine.rated_power_mw * (speed**3 - ci3) / (turbine.rated_speed_ms**3 - ci3)


def _power_curve(speeds: np.ndarray, turbine) -> np.ndarray:
    """Vectorized power curve; same piecewise rule as power_output."""
    s = np.asarray(speeds, dtype=float)
    ci3 = turbine.cut_in_ms ** 3
    ramp = turbine.rated_power_mw * (s**3 - ci3) / (turbine.rated_speed_ms**3 - ci3)
    out = np.where(s >= turbine.rated_speed_ms, turbine.rated_power_mw, ramp)
    out = np.where((s < turbine.cut_in_ms) | (s >= turbine.cut_out_ms), 0.0, out)
    return out


def _flow_vector(direction_deg: float) -> tuple[float, float]:
    """Unit vector pointing downwind for a meteorological direction."""
    theta = math.radians(direction_deg)
    return -math.sin(theta), -math.cos(theta)


def wake_deficit(
    upstream: Position,
    downstream: Position,
    direction_deg: float,
    params: WakeParams,
    turbine: TurbineSpec,
) -> float:
    """Fractional wind speed deficit at the downstream position.

    Returns (1 - sqrt(1 - Ct)) * (D / (D + 2 k x))^2 when the downstream
    hub lies inside the expanding cone (downwind distance x > 0 and
    crosswind offset at most D/2 + k x), else 0.  A position exactly
    abreast of the upstream turbine (x == 0) is unaffected.
    """
    dx = downstream.x_m - upstream.x_m
    dy = downstream.y_m - upstream.y_m
    if dx == 0.0 and dy == 0.0:
        raise InvariantError("upstream and downstream positions coincide")
    fx, fy = _flow_vector(direction_deg)
    downwind = dx * fx + dy * fy
    if downwind <= 0.0:
        return 0.0
    crosswind = abs(dx * fy - dy * fx)
    diameter = turbine.rotor_diameter_m
    if crosswind > diameter / 2.0 + params.decay_k * downwind:
        return 0.0
    ct = params.thrust_coefficient if params.thrust_coefficient is not None else turbine.thrust_coefficient
    return (1.0 - math.sqrt(1.0 - ct)) * (diameter / (diameter + 2.0 * params.decay_k * downwind)) ** 2


def pairwise_interference(
    i: Position,
    j: Position,
    rose: WindRose,
    params: WakeParams,
    turbine: TurbineSpec,
) -> float:
    """Expected MW lost at j because i is built, over the wind rose.

    For each rose bin the free-stream output is compared against the
    output at the waked speed v * (1 - deficit).  Per-bin losses are
    clamped at zero: near the cut-out speed a deficit can push a turbine
    back below cut-out and technically raise its output, which the
    nonnegative interference model deliberately ignores.
    """
    total = 0.0
    for b in rose.bins:
        deficit = wake_deficit(i, j, b.direction_deg, params, turbine)
        if deficit <= 0.0:
            continue
        free = power_output(b.speed_ms, turbine)
        waked = power_output(b.speed_ms * (1.0 - deficit), turbine)
        total += b.probability * max(0.0, free - waked)
    return total


def build_interference_matrix(instance: SiteInstance, params: WakeParams | None = None) -> InterferenceMatrix:
    """Full pairwise interference matrix for an instance's positions.

    Entry (i, j) equals pairwise_interference(position i, position j).
    The computation is vectorized per wind rose bin; every entry is a
    pure function of the two positions, so the result does not depend on
    evaluation order.
    """
    params = params or WakeParams()
    turbine = instance.turbine
    pts = np.array([[p.x_m, p.y_m] for p in instance.positions], dtype=float)
    n = len(pts)
    matrix = np.zeros((n, n), dtype=float)
    if n <= 1:
        return InterferenceMatrix(matrix)

    ct = params.thrust_coefficient if params.thrust_coefficient is not None else turbine.thrust_coefficient
    amplitude = 1.0 - math.sqrt(1.0 - ct)
    diameter = turbine.rotor_diameter_m
    # delta[i, j] = vector from upstream candidate i to downstream candidate j
    dx = pts[None, :, 0] - pts[:, None, 0]
    dy = pts[None, :, 1] - pts[:, None, 1]

    for b in instance.wind_rose.bins:
        if b.probability == 0.0:
            continue
        fx, fy = _flow_vector(b.direction_deg)
        downwind = dx * fx + dy * fy
        crosswind = np.abs(dx * fy - dy * fx)
        in_cone = (downwind > 0.0) & (crosswind <= diameter / 2.0 + params.decay_k * downwind)
        widened = diameter + 2.0 * params.decay_k * np.where(downwind > 0.0, downwind, 1.0)
        deficit = np.where(in_cone, amplitude * (diameter / widened) ** 2, 0.0)
        free = power_output(b.speed_ms, turbine)
        waked = _power_curve(b.speed_ms * (1.0 - deficit), turbine)
        matrix += b.probability * np.maximum(0.0, free - waked) * in_cone

    np.fill_diagonal(matrix, 0.0)
    return InterferenceMatrix(matrix)


def interference_to_csv(matrix: InterferenceMatrix, path) -> None:
    """Row-major CSV dump of the matrix, 9 significant digits."""
    lines = [",".join(f"{v:.9g}" for v in row) for row in matrix.values]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
