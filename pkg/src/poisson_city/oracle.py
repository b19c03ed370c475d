"""Brute-force pathway built directly on a finite window of the line process.

Nothing here uses the reverse-time dynamics. Lines are sampled in an
(intercept, slope) window, seminal curves are literal lower envelopes, and
whether a point pair is joined through the origin is decided by testing every
line for separation. Only lines with positive intercept can separate two
upper-half-plane points on opposite sides of the y-axis from the origin, and
such a line must satisfy ``b < max(y1, y2)`` and
``|sigma| < max(y1/|x1|, y2/x2)``, so those windows lose nothing.

Intensity in (intercept, slope) coordinates is ``db dsigma / 2``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySampleError, InvalidParameterError
from .regions import min_integral_segments
from .seminal import CurveVertex, SeminalCurve

SUBCLASSES = ("plus", "minus", "general")


@dataclass(frozen=True, slots=True)
class Line:
    """Non-vertical line ``y = b + sigma x``."""

    sigma: float
    b: float

    @property
    def y_minus(self) -> float:
        return self.b - self.sigma

    @property
    def y_plus(self) -> float:
        return self.b + self.sigma

    @classmethod
    def from_intercepts(cls, y_minus: float, y_plus: float) -> "Line":
        return cls(0.5 * (y_plus - y_minus), 0.5 * (y_plus + y_minus))

    def value(self, x):
        return self.b + self.sigma * x


@dataclass
class TruncatedLineSample:
    sigma: np.ndarray
    b: np.ndarray
    M: float
    B: float
    subclass: str

    def __len__(self) -> int:
        return len(self.b)

    @property
    def lines(self) -> list[Line]:
        return [Line(float(s), float(b)) for s, b in zip(self.sigma, self.b)]

    @classmethod
    def from_lines(cls, lines, M: float = math.inf, B: float = math.inf, subclass: str = "general"):
        lines = list(lines)
        return cls(
            np.array([l.sigma for l in lines], float),
            np.array([l.b for l in lines], float),
            M, B, subclass,
        )

    def mirrored(self) -> "TruncatedLineSample":
        """Reflect in the y-axis (``x -> -x``)."""
        sub = {"plus": "minus", "minus": "plus"}.get(self.subclass, self.subclass)
        return TruncatedLineSample(-self.sigma, self.b.copy(), self.M, self.B, sub)

    def __add__(self, other: "TruncatedLineSample") -> "TruncatedLineSample":
        sub = self.subclass if self.subclass == other.subclass else "general"
        return TruncatedLineSample(
            np.concatenate([self.sigma, other.sigma]),
            np.concatenate([self.b, other.b]),
            max(self.M, other.M), max(self.B, other.B), sub,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "b"])
        for s, b in zip(self.sigma.tolist(), self.b.tolist()):
            w.writerow([repr(s), repr(b)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, M=math.inf, B=math.inf, subclass="general") -> "TruncatedLineSample":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(
            np.array([float(r["sigma"]) for r in rows]),
            np.array([float(r["b"]) for r in rows]),
            M, B, subclass,
        )


def sample_lines(stream, subclass: str, M: float, B: float) -> TruncatedLineSample:
    """Poisson realization of the lines in one window.

    ``plus``: ``0 < sigma <= M, 0 < b <= B``; ``minus``: ``-M <= sigma < 0,
    0 < b <= B``; ``general``: ``|sigma| < M, |b| < B``.
    """
    if subclass not in SUBCLASSES:
        raise InvalidParameterError(f"unknown subclass {subclass!r}")
    if not (M > 0 and B > 0):
        raise InvalidParameterError(f"window sizes must be positive (M={M!r}, B={B!r})")
    g = stream.numpy
    if subclass == "general":
        k = g.poisson(2.0 * M * B)
        b = B * (2.0 * g.random(k) - 1.0)
        sigma = M * (2.0 * g.random(k) - 1.0)
    else:
        k = g.poisson(0.5 * M * B)
        b = B * (1.0 - g.random(k))
        sigma = M * (1.0 - g.random(k))
        if subclass == "minus":
            sigma = -sigma
    return TruncatedLineSample(sigma, b, M, B, subclass)


@dataclass
class Envelope:
    """Lower envelope on ``[breaks[0], breaks[-1]]``.

    Piece ``i`` is ``b[i] + sigma[i] x`` on ``[breaks[i], breaks[i+1]]``,
    pieces ordered left to right (so slopes decrease).
    """

    breaks: np.ndarray
    b: np.ndarray
    sigma: np.ndarray

    def _piece(self, x) -> np.ndarray:
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        return np.clip(idx, 0, len(self.b) - 1)

    def value(self, x):
        i = self._piece(x)
        return self.b[i] + self.sigma[i] * np.asarray(x, float)

    def slope(self, x):
        return self.sigma[self._piece(x)]

    def segments(self):
        """``(hi, lo, intercept, slope)`` per piece, as used by the region kernels."""
        return self.breaks[1:], self.breaks[:-1], self.b, self.sigma

    def integral(self) -> float:
        lo, hi = self.breaks[:-1], self.breaks[1:]
        return float(np.sum(self.b * (hi - lo) + 0.5 * self.sigma * (hi * hi - lo * lo)))

    def as_curve(self, orientation: str = "right") -> SeminalCurve:
        """Vertex list in the reverse-time convention (``S`` decreasing).

        A final vertex at the domain's left end repeats the last line, so the
        whole domain is represented.
        """
        verts = []
        k = len(self.b)
        for j, i in enumerate(range(k - 1, -1, -1)):
            verts.append(CurveVertex(j, float(self.breaks[i + 1]), float(self.b[i]), float(self.sigma[i])))
        verts.append(CurveVertex(k, float(self.breaks[0]), float(self.b[0]), float(self.sigma[0])))
        return SeminalCurve(verts, orientation)


def _candidates(b: np.ndarray, sigma: np.ndarray, a: float, c: float) -> np.ndarray:
    # keep lines that undercut both endpoint minimisers somewhere on [a, c]
    ia = int(np.argmin(b + sigma * a))
    ic = int(np.argmin(b + sigma * c))
    xs = [a, c]
    ds = sigma[ia] - sigma[ic]
    if ds != 0:
        xx = (b[ic] - b[ia]) / ds
        if a < xx < c:
            xs.append(xx)
    keep = np.zeros(len(b), bool)
    for x in xs:
        v = b + sigma * x
        keep |= (v <= b[ia] + sigma[ia] * x) & (v <= b[ic] + sigma[ic] * x)
    keep[ia] = keep[ic] = True
    return np.flatnonzero(keep)


def lower_envelope(sample: TruncatedLineSample, domain: tuple[float, float] = (0.0, 1.0)) -> Envelope:
    """Pointwise minimum of the sample's lines over ``domain``.

    Lines are sorted by slope and pruned with a stack (dual convex hull),
    after an exact pre-filter against the minimisers at both ends.
    """
    a, c = map(float, domain)
    if not a < c:
        raise InvalidParameterError(f"empty domain {domain!r}")
    if len(sample) == 0:
        raise EmptySampleError("no lines to take an envelope of")
    b_all = np.asarray(sample.b, float)
    s_all = np.asarray(sample.sigma, float)
    idx = _candidates(b_all, s_all, a, c)
    # steepest first; among equal slopes the lowest
    order = idx[np.lexsort((b_all[idx], -s_all[idx]))]
    hull: list[int] = []
    for i in order:
        bi, si = b_all[i], s_all[i]
        if hull and s_all[hull[-1]] == si:
            continue
        while len(hull) >= 2:
            j, k = hull[-1], hull[-2]
            # j is useless if i meets k no later than j does
            x_ik = (b_all[i] - b_all[k]) / (s_all[k] - si)
            x_jk = (b_all[j] - b_all[k]) / (s_all[k] - s_all[j])
            if x_ik <= x_jk:
                hull.pop()
            else:
                break
        hull.append(i)
    hb = b_all[hull]
    hs = s_all[hull]
    cuts = (hb[1:] - hb[:-1]) / (hs[:-1] - hs[1:])
    lefts = np.concatenate([[-np.inf], cuts])
    rights = np.concatenate([cuts, [np.inf]])
    live = (rights > a) & (lefts < c)
    lefts, rights, hb, hs = lefts[live], rights[live], hb[live], hs[live]
    breaks = np.concatenate([[a], np.clip(rights[:-1], a, c), [c]])
    return Envelope(breaks, hb, hs)


def _check_point(p, name):
    x, y = p
    if x == 0 or y <= 0:
        raise InvalidParameterError(f"{name}={p!r} must be off the axes with positive height")


def separates(line: Line, p1, p2) -> bool:
    """True iff ``p1`` and ``p2`` lie strictly on one side and the origin strictly on the other."""
    s1 = p1[1] - line.value(p1[0])
    s2 = p2[1] - line.value(p2[0])
    s0 = -line.b
    return (s1 > 0 and s2 > 0 and s0 < 0) or (s1 < 0 and s2 < 0 and s0 > 0)


def separated_by_any(sample: TruncatedLineSample, p1, p2) -> bool:
    s1 = p1[1] - (sample.b + sample.sigma * p1[0])
    s2 = p2[1] - (sample.b + sample.sigma * p2[0])
    s0 = -sample.b
    hit = ((s1 > 0) & (s2 > 0) & (s0 < 0)) | ((s1 < 0) & (s2 < 0) & (s0 > 0))
    return bool(hit.any())


def indicator_windows(p1, p2) -> tuple[float, float]:
    """Slope and intercept windows holding every line that could separate the pair."""
    (x1, y1), (x2, y2) = p1, p2
    return max(y1 / abs(x1), y2 / abs(x2)), max(y1, y2)


def boundary_indicator(p1, p2, stream, sample: TruncatedLineSample | None = None) -> bool:
    """Draw of the event that the origin is on the boundary of the pair's cell.

    ``p1`` must be in the upper-left quadrant, ``p2`` in the upper-right. When
    ``sample`` is given it is used instead of a fresh draw (it must cover the
    pair's windows); this couples queries for different pairs.
    """
    _check_point(p1, "p1")
    _check_point(p2, "p2")
    if not (p1[0] < 0 < p2[0]):
        raise InvalidParameterError("p1 must have negative abscissa and p2 positive")
    if sample is None:
        M, B = indicator_windows(p1, p2)
        sample = sample_lines(stream, "plus", M, B) + sample_lines(stream, "minus", M, B)
    return not separated_by_any(sample, p1, p2)


def separating_measure(p1, p2) -> float:
    """Intensity-measure of the set of lines separating the pair from the origin.

    Closed form; the void probability of the pair is ``exp(-separating_measure)``.
    """
    (x1, y1), (x2, y2) = p1, p2
    a, c = -x1, x2

    def wedge(a, y1, c, y2):
        # area of {b > 0, s > 0 : b + s c < y2, b - s a < y1}
        if y1 >= y2:
            return y2 * y2 / (2 * c)
        bs = (a * y2 + c * y1) / (a + c)
        return (y2 * bs - bs * bs / 2) / c - (bs - y1) ** 2 / (2 * a)

    return 0.5 * (wedge(a, y1, c, y2) + wedge(c, y2, a, y1))


def clip_below(poly: list[tuple[float, float]], b: float, sigma: float) -> list[tuple[float, float]]:
    """Part of a convex polygon with ``y <= b + sigma x`` (one Sutherland-Hodgman pass)."""
    out = []
    n = len(poly)
    if n == 0:
        return out
    px, py = poly[-1]
    pd = py - b - sigma * px
    for qx, qy in poly:
        qd = qy - b - sigma * qx
        if qd <= 0:
            if pd > 0:
                r = pd / (pd - qd)
                out.append((px + r * (qx - px), py + r * (qy - py)))
            out.append((qx, qy))
        elif pd <= 0:
            r = pd / (pd - qd)
            out.append((px + r * (qx - px), py + r * (qy - py)))
        px, py, pd = qx, qy, qd
    return out


def shoelace(poly) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * abs(s)


def valid_region_area(sample: TruncatedLineSample, p2, H: float, margin: float) -> float:
    """Area of left-box points joined to ``p2`` through the origin.

    The left box is ``[-1, -margin] x [0, H]``; it is clipped below every
    positive-intercept line that passes under ``p2``.
    """
    x2, y2 = p2
    h = sample.b + sample.sigma * x2
    poly = [(-1.0, 0.0), (-margin, 0.0), (-margin, H), (-1.0, H)]
    for i in np.flatnonzero((h < y2) & (sample.b > 0)):
        poly = clip_below(poly, float(sample.b[i]), float(sample.sigma[i]))
        if not poly:
            return 0.0
    return shoelace(poly)


@dataclass
class BoxVolume:
    mc: float
    se: float
    quad: float
    quad_error_bound: float
    n_lines: int
    H: float
    margin: float

    @property
    def agree(self) -> bool:
        return abs(self.mc - self.quad) <= 3.0 * self.se + self.quad_error_bound

    def as_dict(self) -> dict:
        return {
            "mc": self.mc, "se": self.se, "quad": self.quad,
            "quad_error_bound": self.quad_error_bound, "n_lines": self.n_lines,
            "H": self.H, "margin": self.margin, "agree": self.agree,
        }


def box_window_sample(stream, H: float, margin: float) -> TruncatedLineSample:
    M = H / margin
    return sample_lines(stream.child("plus"), "plus", M, H) + sample_lines(stream.child("minus"), "minus", M, H)


def _quad_column(b, sigma, x2, H, margin) -> float:
    h = b + sigma * x2
    keep = (h < H) & (b > 0)
    order = np.argsort(h[keep], kind="stable")
    hs = h[keep][order]
    bs = b[keep][order]
    ss = sigma[keep][order]
    poly = [(-1.0, 0.0), (-margin, 0.0), (-margin, H), (-1.0, H)]
    area = shoelace(poly)
    total = 0.0
    y_prev = 0.0
    for hi, bi, si in zip(hs.tolist(), bs.tolist(), ss.tolist()):
        if hi > y_prev:
            total += area * (hi - y_prev)
            y_prev = hi
        poly = clip_below(poly, bi, si)
        area = shoelace(poly) if poly else 0.0
        if area == 0.0:
            break
    return total + area * (H - y_prev)


def box_volume_two_ways(
    stream,
    H: float,
    n_mc: int,
    grid: int,
    margin: float = 0.1,
    sample: TruncatedLineSample | None = None,
) -> BoxVolume:
    """Volume of joined pairs in ``([-1,-m] x [0,H]) x ([m,1] x [0,H])``, computed twice.

    ``mc`` samples uniform point pairs and tests each against the shared
    realization. ``quad`` integrates exactly in the height of ``p2`` (the
    valid-``p1`` polygon only changes when ``p2`` crosses a line) and uses a
    ``grid``-point midpoint rule across its abscissa. ``quad_error_bound`` is
    the midpoint-rule bound from the Lipschitz constant ``max|sigma| * H (1-m)``.
    """
    if not margin > 0:
        raise InvalidParameterError("grid margin must be positive (the slope window would be infinite)")
    if not (H > 0 and n_mc > 0 and grid > 0):
        raise InvalidParameterError("H, n_mc and grid must be positive")
    if sample is None:
        sample = box_window_sample(stream.child("lines"), H, margin)
    width = 1.0 - margin
    area = width * H
    vol = area * area
    b, sigma = np.asarray(sample.b, float), np.asarray(sample.sigma, float)

    g = stream.child("mc").numpy
    hits = 0
    chunk = 20000
    done = 0
    while done < n_mc:
        k = min(chunk, n_mc - done)
        x1 = -(margin + width * g.random(k))
        y1 = H * g.random(k)
        x2 = margin + width * g.random(k)
        y2 = H * g.random(k)
        if len(b):
            above1 = y1[:, None] > b[None, :] + sigma[None, :] * x1[:, None]
            above2 = y2[:, None] > b[None, :] + sigma[None, :] * x2[:, None]
            sep = (above1 & above2 & (b[None, :] > 0)).any(axis=1)
            hits += int(k - sep.sum())
        else:
            hits += k
        done += k
    p = hits / n_mc
    mc = vol * p
    se = vol * math.sqrt(p * (1.0 - p) / n_mc)

    hstep = width / grid
    xs = margin + hstep * (np.arange(grid) + 0.5)
    if len(b):
        quad = hstep * sum(_quad_column(b, sigma, float(x), H, margin) for x in xs)
    else:
        quad = vol
    lip = (float(np.max(np.abs(sigma))) if len(sigma) else 0.0) * area
    bound = lip * hstep * width / 4.0
    return BoxVolume(mc, se, quad, bound, len(b), H, margin)


def tangent_lines(env: Envelope) -> list[tuple[float, float]]:
    """Envelope pieces as ``(b, sigma)``, ordered right to left (increasing height at the right end)."""
    return [(float(b), float(s)) for b, s in zip(env.b[::-1], env.sigma[::-1])]


def decomposition_valid_area(plus: TruncatedLineSample, minus: TruncatedLineSample, p2, margin: float = 0.0) -> float:
    """Valid left-point area for ``p2`` above the right seminal curve, as the
    seminal-curve decomposition computes it.

    The decomposition keeps only the last envelope tangent under ``p2``; the
    area is that of ``{t in [margin, 1]: y < min(left curve(t), tangent(-t))}``.
    Comparing with ``valid_region_area`` (which uses every line) measures the
    decomposition's error on a realization.
    """
    env_p = lower_envelope(plus, (0.0, 1.0))
    x2, y2 = p2
    if not y2 > float(env_p.value(x2)):
        raise InvalidParameterError("p2 must lie above the right seminal curve")
    tl = tangent_lines(env_p)
    below = [k for k, (b, s) in enumerate(tl) if b + s * x2 < y2]
    bn, sn = tl[max(below)]
    env_m = lower_envelope(minus.mirrored(), (0.0, 1.0))
    hi, lo, cy, cs = env_m.segments()
    upper = min(1.0, bn / sn)
    if upper <= margin:
        return 0.0
    return float(min_integral_segments(hi, lo, cy, cs, bn, sn, margin, upper)[0])
