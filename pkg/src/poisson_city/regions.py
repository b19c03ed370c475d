"""Areas of the decomposition regions.

``Delta_n`` is the triangle cut off by consecutive tangent lines and ``x = 1``;
``Delta~_n`` is the triangle under tangent line ``n`` left of the y-axis;
``C_n`` is the part of ``Delta~_n`` that also lies under the opposite curve.
The triangles are exact. ``C_n`` is exact on the represented part of the
opposite curve and bracketed on ``(0, tail_s)``, where the curve is unknown.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRangeError
from .seminal import CurveVertex, SeminalCurve, extend_until


@dataclass(frozen=True, slots=True)
class TangentLine:
    """Line of height ``Y - sigma * t`` in the opposite curve's mirrored frame."""

    Y: float
    sigma: float

    @classmethod
    def of(cls, v: CurveVertex) -> "TangentLine":
        return cls(v.Y, v.sigma)


@dataclass(frozen=True, slots=True)
class AreaBracket:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)


def delta_area(v0: CurveVertex, v1: CurveVertex) -> float:
    """Triangle bounded by consecutive tangent lines and ``x = 1``."""
    return 0.5 * (1.0 - v1.S) ** 2 * (v1.sigma - v0.sigma)


def delta_tilde_area(v: CurveVertex) -> float:
    """Triangle with corners ``(0, 0)``, ``(0, Y)`` and ``(-Y/sigma, 0)``."""
    return 0.5 * v.Y * v.Y / v.sigma


def min_integral_segments(hi, lo, seg_y, seg_slope, line_y, line_slope, a, b) -> np.ndarray:
    """Exact integrals of ``min(piecewise curve, line)`` over ``[a_j, b_j]``.

    The curve is given as segments ``k`` (height ``seg_y[k] + seg_slope[k] t``
    on ``[lo[k], hi[k]]``), the lines as ``line_y[j] - line_slope[j] t``. On a
    single segment the min of two linear functions changes form at most once,
    so splitting at the crossing makes the trapezoid rule exact. Returns one
    value per line; the parts of ``[a_j, b_j]`` not covered by segments
    contribute nothing.
    """
    hi = np.asarray(hi, float)[None, :]
    lo = np.asarray(lo, float)[None, :]
    cy = np.asarray(seg_y, float)[None, :]
    cs = np.asarray(seg_slope, float)[None, :]
    ly = np.atleast_1d(np.asarray(line_y, float))[:, None]
    ls = np.atleast_1d(np.asarray(line_slope, float))[:, None]
    a = np.broadcast_to(np.atleast_1d(np.asarray(a, float)), ly.shape[:1])[:, None]
    b = np.broadcast_to(np.atleast_1d(np.asarray(b, float)), ly.shape[:1])[:, None]

    t0 = np.maximum(lo, a)
    t1 = np.minimum(hi, b)
    t1 = np.maximum(t1, t0)
    denom = cs + ls
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(denom != 0, (ly - cy) / denom, t0)
    tx = np.clip(tx, t0, t1)

    def f(t):
        return np.minimum(cy + cs * t, ly - ls * t)

    f0, fx, f1 = f(t0), f(tx), f(t1)
    return (0.5 * ((tx - t0) * (f0 + fx) + (t1 - tx) * (fx + f1))).sum(axis=1)


def integral_min_linear(curve: SeminalCurve, line: TangentLine, a: float, b: float) -> float:
    """Exact integral of ``min(Gamma(t), Y - sigma t)`` over ``[a, b]``."""
    if not (curve.tail_s <= a <= b <= 1.0):
        raise OutOfRangeError(
            f"[{a!r}, {b!r}] is not inside the represented range [{curve.tail_s!r}, 1]"
        )
    hi, lo, cy, cs = curve.segments()
    return float(min_integral_segments(hi, lo, cy, cs, line.Y, line.sigma, a, b)[0])


def c_region_brackets(line_y, line_slope, opposite: SeminalCurve) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper bounds on ``C`` areas for several lines at the current depth.

    Exact on ``[tail_s, min(1, Y/sigma)]``; on ``(0, tail_s)`` the integrand
    is at most ``min(Gamma(tail_s), Y)``.
    """
    line_y = np.atleast_1d(np.asarray(line_y, float))
    line_slope = np.atleast_1d(np.asarray(line_slope, float))
    ts = opposite.tail_s
    b = np.minimum(1.0, line_y / line_slope)
    hi, lo, cy, cs = opposite.segments()
    lower = min_integral_segments(hi, lo, cy, cs, line_y, line_slope, ts, b) if len(hi) else np.zeros_like(line_y)
    upper = lower + ts * np.minimum(opposite.tail_gamma, line_y)
    return lower, upper


def extend_for_c_tolerance(opposite: SeminalCurve, line_y, tol, stream=None, max_steps=None) -> None:
    """Extend ``opposite`` until every C bracket width is within its tolerance."""
    line_y = np.atleast_1d(np.asarray(line_y, float))
    tol = np.broadcast_to(np.asarray(tol, float), line_y.shape)
    need = np.isfinite(tol)
    if not need.any():
        return
    ly, tl = line_y[need], tol[need]

    def done(v: CurveVertex) -> bool:
        return bool(np.all(v.S * np.minimum(v.gamma, ly) <= tl))

    kw = {} if max_steps is None else {"max_steps": max_steps}
    extend_until(opposite, stream, done, **kw)


def c_region_area(line: TangentLine, opposite: SeminalCurve, stream=None, tol: float = 1e-8) -> AreaBracket:
    """Bracket on the area under both the opposite curve and ``line``.

    The opposite curve is extended in place (from ``stream``, default its own)
    until the bracket is narrower than ``tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol!r}")
    extend_for_c_tolerance(opposite, [line.Y], [tol], stream)
    lower, upper = c_region_brackets([line.Y], [line.sigma], opposite)
    return AreaBracket(float(lower[0]), float(upper[0]))


def polygon_area(points) -> float:
    """Shoelace area of a simple polygon given as ``[(x, y), ...]``."""
    pts = np.asarray(points, float)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def delta_corners(v0: CurveVertex, v1: CurveVertex) -> list[tuple[float, float]]:
    """Corners of ``Delta_n``: the junction and the two lines' heights at ``x = 1``."""
    return [
        (v1.S, v1.Y + v1.S * v1.sigma),
        (1.0, v0.Y + v0.sigma),
        (1.0, v1.Y + v1.sigma),
    ]


def delta_tilde_corners(v: CurveVertex) -> list[tuple[float, float]]:
    return [(0.0, 0.0), (0.0, v.Y), (-v.Y / v.sigma, 0.0)]
