"""Truncated estimator for the flow through the centre.

For one half-plane the 4-volume ``2F`` is the product of the two seminal
curve integrals plus, for each side, ``sum_n area(C_n) * area(Delta_n)``.
Keeping terms ``n = 0..N`` leaves an L1 error of at most
``20/7 * 3**-N + 20/27 * 6**-N``. Every quantity that is not a closed-form
triangle is bracketed, and the estimate is the midpoint of the bracket.

The total flow is the mean of the two independent half-plane estimates, so
that its expectation is 2 (see ``CALIBRATION``).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .rand_dist import RngStream
from .regions import c_region_brackets, extend_for_c_tolerance
from .seminal import SeminalCurve, curve_integral_bracket, extend_to_depth, new_curve

# E[T] under the "T is the mean of two copies of 2F" reading
CALIBRATION = 2.0

CSV_COLUMNS = ("replicate_id", "N", "value", "bracket_width", "l1_bound", "product_term", "sum_plus", "sum_minus")

CURVE_TAGS = (("upper", "left"), ("upper", "right"), ("lower", "left"), ("lower", "right"))


def l1_error_bound(N: int) -> float:
    """Bound on the mean absolute truncation error at depth ``N``."""
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N!r}")
    return 20.0 / 7.0 * 3.0 ** (-N) + 20.0 / 27.0 * 6.0 ** (-N)


@dataclass
class FlowEstimate:
    N: int
    value: float
    bracket_width: float
    l1_bound: float
    product_term: float
    plus_terms: np.ndarray
    minus_terms: np.ndarray
    lower: float
    upper: float
    product_lower: float
    halves: tuple["FlowEstimate", ...] = field(default=(), repr=False)

    @property
    def sum_plus(self) -> float:
        return float(np.sum(self.plus_terms))

    @property
    def sum_minus(self) -> float:
        return float(np.sum(self.minus_terms))

    @property
    def terms(self) -> list[float]:
        """Product term, then ``C+ Delta+`` and ``C- Delta-`` for ``n = 0..N``."""
        return [self.product_term, *self.plus_terms.tolist(), *self.minus_terms.tolist()]

    def row(self, replicate_id: int) -> dict:
        return {
            "replicate_id": replicate_id,
            "N": self.N,
            "value": self.value,
            "bracket_width": self.bracket_width,
            "l1_bound": self.l1_bound,
            "product_term": self.product_term,
            "sum_plus": self.sum_plus,
            "sum_minus": self.sum_minus,
        }


def _delta_areas(curve: SeminalCurve, N: int) -> np.ndarray:
    S, _, sig = curve.arrays()
    return 0.5 * (1.0 - S[1 : N + 2]) ** 2 * (sig[1 : N + 2] - sig[: N + 1])


def _c_tolerances(delta: np.ndarray, eps: float) -> np.ndarray:
    n = np.arange(len(delta))
    with np.errstate(divide="ignore"):
        return np.where(delta > 0, 2.0 ** (-n - 2) * eps / delta, np.inf)


def estimate_half_plane(gamma_minus: SeminalCurve, gamma_plus: SeminalCurve, N: int, eps: float,
                        stream=None) -> FlowEstimate:
    """Depth-``N`` estimate of ``2F`` for one half-plane.

    Both curves are extended in place: to at least ``N + 1`` vertices past
    the first, then until each ``C_n`` is known to within
    ``2**(-n-2) eps / area(Delta_n)`` and the integral product to within
    ``eps / 2``. Extension draws from each curve's own stream unless
    ``stream`` is given, in which case the two curves use its children
    ``"minus"`` and ``"plus"``.
    """
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N!r}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    sm_ = stream.child("minus") if stream is not None else gamma_minus.stream
    sp_ = stream.child("plus") if stream is not None else gamma_plus.stream
    extend_to_depth(gamma_minus, N + 1, sm_)
    extend_to_depth(gamma_plus, N + 1, sp_)

    d_plus = _delta_areas(gamma_plus, N)
    d_minus = _delta_areas(gamma_minus, N)
    yp = np.asarray(gamma_plus.Y[: N + 1])
    ym = np.asarray(gamma_minus.Y[: N + 1])
    extend_for_c_tolerance(gamma_minus, yp, _c_tolerances(d_plus, eps), sm_)
    extend_for_c_tolerance(gamma_plus, ym, _c_tolerances(d_minus, eps), sp_)

    while True:
        lo_m, up_m = curve_integral_bracket(gamma_minus)
        lo_p, up_p = curve_integral_bracket(gamma_plus)
        if up_m * up_p - lo_m * lo_p <= 0.5 * eps:
            break
        # deepen whichever curve contributes more to the product's width
        if (up_m - lo_m) * up_p >= (up_p - lo_p) * up_m:
            extend_to_depth(gamma_minus, gamma_minus.depth + 1, sm_)
        else:
            extend_to_depth(gamma_plus, gamma_plus.depth + 1, sp_)

    sp = np.asarray(gamma_plus.sigma[: N + 1])
    sm = np.asarray(gamma_minus.sigma[: N + 1])
    cp_lo, cp_up = c_region_brackets(yp, sp, gamma_minus)
    cm_lo, cm_up = c_region_brackets(ym, sm, gamma_plus)

    lower = lo_m * lo_p + float(np.dot(cp_lo, d_plus) + np.dot(cm_lo, d_minus))
    upper = up_m * up_p + float(np.dot(cp_up, d_plus) + np.dot(cm_up, d_minus))
    return FlowEstimate(
        N=N,
        value=0.5 * (lower + upper),
        bracket_width=upper - lower,
        l1_bound=l1_error_bound(N),
        product_term=0.5 * (lo_m * lo_p + up_m * up_p),
        plus_terms=0.5 * (cp_lo + cp_up) * d_plus,
        minus_terms=0.5 * (cm_lo + cm_up) * d_minus,
        lower=lower,
        upper=upper,
        product_lower=lo_m * lo_p,
    )


def draw_curves(stream) -> dict[tuple[str, str], SeminalCurve]:
    """The four independent curves of one replicate, each on its own child stream."""
    return {
        tag: new_curve(stream.child(*tag), "left" if tag[1] == "left" else "right")
        for tag in CURVE_TAGS
    }


def total_flow_from_curves(curves: dict, N: int, eps: float) -> FlowEstimate:
    up = estimate_half_plane(curves["upper", "left"], curves["upper", "right"], N, eps)
    low = estimate_half_plane(curves["lower", "left"], curves["lower", "right"], N, eps)
    return FlowEstimate(
        N=N,
        value=0.5 * (up.value + low.value),
        bracket_width=0.5 * (up.bracket_width + low.bracket_width),
        l1_bound=0.5 * (up.l1_bound + low.l1_bound),
        product_term=0.5 * (up.product_term + low.product_term),
        plus_terms=0.5 * (up.plus_terms + low.plus_terms),
        minus_terms=0.5 * (up.minus_terms + low.minus_terms),
        lower=0.5 * (up.lower + low.lower),
        upper=0.5 * (up.upper + low.upper),
        product_lower=0.5 * (up.product_lower + low.product_lower),
        halves=(up, low),
    )


def sample_total_flow(stream, N: int, eps: float) -> FlowEstimate:
    """One draw of the total central flow estimate.

    Curves come from child streams of ``stream`` and ``stream`` itself is not
    advanced, so repeated calls with the same stream see the same curves.
    """
    return total_flow_from_curves(draw_curves(stream), N, eps)


def _run_chunk(args):
    seed, ids, N, eps = args
    return [sample_total_flow(RngStream(seed, r), N, eps) for r in ids]


def simulate_flows(seed: int, replicates: int, N: int, eps: float, threads: int = 1, first_id: int = 0) -> list[FlowEstimate]:
    """Replicates ``first_id .. first_id + replicates - 1``; replicate ``r`` uses stream ``r``.

    Results do not depend on ``threads``.
    """
    ids = list(range(first_id, first_id + replicates))
    if threads <= 1 or replicates < 2 * threads:
        return _run_chunk((seed, ids, N, eps))
    chunks = [ids[i::threads] for i in range(threads)]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(_run_chunk, [(seed, c, N, eps) for c in chunks]))
    out: list[FlowEstimate | None] = [None] * replicates
    for c, part in zip(chunks, parts):
        for r, est in zip(c, part):
            out[r - first_id] = est
    return out


@dataclass
class FlowSummary:
    count: int
    mean: float
    se: float
    mean_bracket_width: float
    max_bracket_width: float
    l1_bound: float
    product_mean: float
    product_se: float

    @property
    def error_budget(self) -> float:
        """``3 SE`` plus the largest bracket half-width plus the L1 bound."""
        return 3.0 * self.se + 0.5 * self.max_bracket_width + self.l1_bound

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "se": self.se,
            "mean_bracket_width": self.mean_bracket_width,
            "max_bracket_width": self.max_bracket_width,
            "l1_bound": self.l1_bound,
            "product_mean": self.product_mean,
            "product_se": self.product_se,
            "error_budget": self.error_budget,
        }


def summarize(estimates: list[FlowEstimate]) -> FlowSummary:
    v = np.array([e.value for e in estimates])
    p = np.array([e.product_term for e in estimates])
    w = np.array([e.bracket_width for e in estimates])
    n = len(v)
    ddof = 1 if n > 1 else 0
    return FlowSummary(
        count=n,
        mean=float(v.mean()),
        se=float(v.std(ddof=ddof) / math.sqrt(n)),
        mean_bracket_width=float(w.mean()),
        max_bracket_width=float(w.max()),
        l1_bound=float(max(e.l1_bound for e in estimates)),
        product_mean=float(p.mean()),
        product_se=float(p.std(ddof=ddof) / math.sqrt(n)),
    )


def estimates_to_csv(estimates: list[FlowEstimate], first_id: int = 0) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for i, e in enumerate(estimates):
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in e.row(first_id + i).items()})
    return buf.getvalue()
