"""Seminal curves simulated segment by segment in reversed time.

A curve is a concave, increasing, piecewise-linear function on ``(0, 1]``.
It is stored as the sequence of its tangent lines: vertex ``n`` records the
abscissa ``S`` at which line ``n`` becomes active (moving leftwards), the
line's y-intercept ``Y`` and its slope ``sigma``. Line ``n`` is the curve on
``S[n+1] < s <= S[n]``.

Reverse-time step, with ``E`` standard exponential and ``U`` uniform::

    1/S' = 1/S + 4 E / Y**2
    sigma' = sigma + (Y / S') sqrt(U)
    Y' = Y (1 - sqrt(U))

The left curve has the same law as the right one and is stored in mirrored
coordinates ``t = -x``, so every routine here treats both alike.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import DivergenceError, NeedsExtensionError, OutOfRangeError

DEFAULT_MAX_STEPS = 10**6


@dataclass(frozen=True, slots=True)
class CurveVertex:
    n: int
    S: float
    Y: float
    sigma: float

    @property
    def gamma(self) -> float:
        """Curve height at ``S``."""
        return self.Y + self.S * self.sigma


class SeminalCurve:
    """Initial segment of a seminal curve, extendable toward ``s = 0``.

    Vertices are append-only. ``E`` and ``U`` keep the innovations that
    produced each vertex (for vertex 0: the exponential behind ``Gamma(1)``
    and the uniform slope mark), so pathwise identities can be audited.
    ``stream`` is the curve's own random stream, used for later extension.
    """

    def __init__(
        self,
        vertices: Iterable[CurveVertex] = (),
        orientation: str = "right",
        stream=None,
        innovations: Iterable[tuple[float, float]] | None = None,
    ):
        if orientation not in ("right", "left"):
            raise ValueError(f"orientation must be 'right' or 'left', not {orientation!r}")
        self.orientation = orientation
        self.stream = stream
        self.S: list[float] = []
        self.Y: list[float] = []
        self.sigma: list[float] = []
        self.E: list[float] = []
        self.U: list[float] = []
        vertices = list(vertices)
        innovations = list(innovations) if innovations is not None else [(math.nan, math.nan)] * len(vertices)
        for v, (e, u) in zip(vertices, innovations):
            self._append(v.S, v.Y, v.sigma, e, u)
        self._cache_len = -1
        self._cache: tuple[np.ndarray, ...] | None = None

    def _append(self, S, Y, sigma, e=math.nan, u=math.nan):
        self.S.append(S)
        self.Y.append(Y)
        self.sigma.append(sigma)
        self.E.append(e)
        self.U.append(u)

    def __len__(self) -> int:
        return len(self.S)

    def __getitem__(self, n: int) -> CurveVertex:
        if n < 0:
            n += len(self.S)
        return CurveVertex(n, self.S[n], self.Y[n], self.sigma[n])

    @property
    def vertices(self) -> list[CurveVertex]:
        return [CurveVertex(i, s, y, g) for i, (s, y, g) in enumerate(zip(self.S, self.Y, self.sigma))]

    @property
    def tail_s(self) -> float:
        return self.S[-1]

    @property
    def tail_gamma(self) -> float:
        return self.Y[-1] + self.S[-1] * self.sigma[-1]

    @property
    def depth(self) -> int:
        """Index of the last vertex."""
        return len(self.S) - 1

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._cache_len != len(self.S):
            self._cache = (np.array(self.S), np.array(self.Y), np.array(self.sigma))
            self._cache_len = len(self.S)
        return self._cache

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(hi, lo, intercept, slope)`` for each fully represented segment.

        Segment ``k`` is line ``k`` on ``[S[k+1], S[k]]``; the last line has no
        represented segment (its left end is unknown).
        """
        S, Y, sig = self.arrays()
        return S[:-1], S[1:], Y[:-1], sig[:-1]

    def to_records(self) -> list[dict]:
        return [{"n": i, "S": s, "Y": y, "sigma": g} for i, (s, y, g) in enumerate(zip(self.S, self.Y, self.sigma))]

    def to_json(self) -> str:
        return json.dumps(self.to_records())

    @classmethod
    def from_json(cls, text: str, orientation: str = "right") -> "SeminalCurve":
        recs = sorted(json.loads(text), key=lambda r: r["n"])
        return cls([CurveVertex(r["n"], r["S"], r["Y"], r["sigma"]) for r in recs], orientation)

    def __repr__(self) -> str:
        return f"SeminalCurve(orientation={self.orientation!r}, depth={self.depth}, tail_s={self.tail_s:.3g})"


def _draw_initial(stream) -> tuple[CurveVertex, float, float]:
    while True:
        e = stream.exponential1()
        u = stream.uniform01()
        g1 = 2.0 * math.sqrt(e)
        sigma = g1 * u
        y = g1 - sigma
        if y > 0 and sigma > 0:
            return CurveVertex(0, 1.0, y, sigma), e, u


def draw_initial_state(stream) -> CurveVertex:
    """Vertex 0 at ``S = 1``.

    ``Gamma(1)`` is Rayleigh(sqrt 2) and the slope is uniform on
    ``[0, Gamma(1)]``; the measure-zero tie ``Y = 0`` is redrawn.
    """
    return _draw_initial(stream)[0]


def _step(S: float, Y: float, sigma: float, e: float, u: float) -> tuple[float, float, float]:
    inv = 1.0 / S + 4.0 * e / (Y * Y)
    S1 = 1.0 / inv
    ru = math.sqrt(u)
    return S1, Y * (1.0 - ru), sigma + (Y / S1) * ru


def step_reverse(v: CurveVertex, stream) -> CurveVertex:
    """Next tangent line of the curve, moving toward ``s = 0``."""
    e = stream.exponential1()
    u = stream.uniform01()
    S1, Y1, sig1 = _step(v.S, v.Y, v.sigma, e, u)
    return CurveVertex(v.n + 1, S1, Y1, sig1)


def new_curve(stream, orientation: str = "right") -> SeminalCurve:
    """Curve holding only vertex 0; ``stream`` is kept for later extension."""
    v, e, u = _draw_initial(stream)
    return SeminalCurve([v], orientation, stream, [(e, u)])


def _extend_one(curve: SeminalCurve, stream) -> None:
    e = stream.exponential1()
    u = stream.uniform01()
    S1, Y1, sig1 = _step(curve.S[-1], curve.Y[-1], curve.sigma[-1], e, u)
    if not (S1 > 0 and Y1 > 0 and math.isfinite(sig1)):
        raise DivergenceError(
            f"curve left floating-point range at vertex {len(curve)} (S={S1!r}, Y={Y1!r})"
        )
    curve._append(S1, Y1, sig1, e, u)


def extend_until(
    curve: SeminalCurve,
    stream=None,
    stop: Callable[[CurveVertex], bool] | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> SeminalCurve:
    """Append vertices until ``stop(last_vertex)`` holds.

    ``stream`` defaults to the curve's own stream. The curve is extended in
    place and returned. Raises ``DivergenceError`` after ``max_steps`` steps.
    """
    if stream is None:
        stream = curve.stream
    if stop is None:
        raise ValueError("extend_until needs a stop predicate")
    steps = 0
    while not stop(curve[-1]):
        if steps >= max_steps:
            raise DivergenceError(f"stop condition not met after {max_steps} steps")
        _extend_one(curve, stream)
        steps += 1
    return curve


def extend_to_depth(curve: SeminalCurve, depth: int, stream=None) -> SeminalCurve:
    """Make sure vertices ``0..depth`` exist."""
    if stream is None:
        stream = curve.stream
    while curve.depth < depth:
        _extend_one(curve, stream)
    return curve


def tail_mass_below(tol: float) -> Callable[[CurveVertex], bool]:
    """Stop predicate: ``tail_s * Gamma(tail_s) <= tol``.

    That product bounds both the width of the integral bracket and the tail
    error of every C-region computed against this curve.
    """
    return lambda v: v.S * v.gamma <= tol


def _segment_index(S: list[float], s: float) -> int:
    # S is strictly decreasing; return n with S[n] >= s > S[n+1]
    lo, hi = 0, len(S)
    while lo < hi:
        mid = (lo + hi) // 2
        if S[mid] >= s:
            lo = mid + 1
        else:
            hi = mid
    return lo - 1


def curve_value(curve: SeminalCurve, s: float) -> float:
    if not (curve.tail_s <= s <= 1.0):
        raise OutOfRangeError(f"s={s!r} outside represented range [{curve.tail_s!r}, 1]")
    n = _segment_index(curve.S, s)
    return curve.Y[n] + s * curve.sigma[n]


def curve_slope(curve: SeminalCurve, s: float) -> float:
    """Left-continuous derivative at ``s``."""
    if not (curve.tail_s <= s <= 1.0):
        raise OutOfRangeError(f"s={s!r} outside represented range [{curve.tail_s!r}, 1]")
    return curve.sigma[_segment_index(curve.S, s)]


def curve_integral_bracket(curve: SeminalCurve) -> tuple[float, float]:
    """Bounds on the integral of the curve over ``(0, 1]``.

    The lower end is the exact integral over ``[tail_s, 1]``; the upper end
    adds ``tail_s * Gamma(tail_s)``, valid because the curve is positive and
    increasing.
    """
    S, Y, sig = curve.arrays()
    G = Y + S * sig
    lower = float(0.5 * np.sum((S[:-1] - S[1:]) * (G[:-1] + G[1:])))
    return lower, lower + float(S[-1] * G[-1])


def curve_inverse(curve: SeminalCurve, eps: float) -> float:
    """The ``s`` with ``Gamma(s) = eps``; 1 when ``eps`` exceeds ``Gamma(1)``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    g1 = curve.Y[0] + curve.sigma[0]
    if eps > g1:
        return 1.0
    if eps < curve.tail_gamma:
        raise NeedsExtensionError(
            f"eps={eps!r} is below Gamma(tail_s)={curve.tail_gamma!r}; extend the curve first"
        )
    S, Y, sig = curve.S, curve.Y, curve.sigma
    # heights at vertices decrease with n
    lo, hi = 0, len(S)
    while lo < hi:
        mid = (lo + hi) // 2
        if Y[mid] + S[mid] * sig[mid] >= eps:
            lo = mid + 1
        else:
            hi = mid
    n = max(lo - 1, 0)
    return min(1.0, max(S[-1], (eps - Y[n]) / sig[n]))


def junction_residuals(curve: SeminalCurve) -> np.ndarray:
    """Relative mismatch of adjacent tangent lines at each junction.

    For ``n = 0..depth-1``: ``|l_n(S[n+1]) - l_{n+1}(S[n+1])| / Gamma(S[n+1])``.
    """
    S, Y, sig = curve.arrays()
    if len(S) < 2:
        return np.zeros(0)
    left = Y[:-1] + S[1:] * sig[:-1]
    right = Y[1:] + S[1:] * sig[1:]
    return np.abs(left - right) / right


def perpetuity_residuals(curve: SeminalCurve) -> np.ndarray:
    """Relative mismatch of ``Y[n+1]`` against ``Y[n] (1 - sqrt(U[n+1]))``."""
    Y = np.asarray(curve.Y)
    U = np.asarray(curve.U)
    if len(Y) < 2:
        return np.zeros(0)
    return np.abs(Y[1:] - Y[:-1] * (1.0 - np.sqrt(U[1:]))) / Y[1:]
