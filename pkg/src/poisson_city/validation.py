"""Statistical checks of the curve dynamics, the estimator and the oracle.

Every check returns a ``TestReport``. Monte Carlo checks accept within three
standard errors plus any deterministic slack the check documents; KS checks
use the exact two-sided 1% critical value.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, stats

from .estimator import CALIBRATION, l1_error_bound, simulate_flows, summarize
from .oracle import (
    TruncatedLineSample,
    box_volume_two_ways,
    decomposition_valid_area,
    lower_envelope,
    sample_lines,
    valid_region_area,
)
from .rand_dist import RngStream, SquaredUniformStream
from .seminal import curve_value, extend_to_depth, extend_until, new_curve, perpetuity_residuals

DEFAULT_SEED = 20240611
SQRT_PI_2 = math.sqrt(math.pi) / 2.0
PRODUCT_MEAN = 4.0 * math.pi / 9.0


@dataclass
class TestReport:
    __test__ = False  # keep pytest from collecting it

    name: str
    statistic: float
    threshold: float
    n_samples: int
    passed: bool
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def reports_to_json(reports: list[TestReport]) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2)


def _se(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(len(x)))


def _seed_of(stream) -> int | None:
    return getattr(stream, "seed", None)


def dynamics_values(stream, s: float, n: int) -> np.ndarray:
    """``Gamma(s)`` from ``n`` independent curves built by the reverse-time dynamics."""
    out = np.empty(n)
    for r in range(n):
        c = new_curve(stream.child("curve", str(r)))
        if s < 1.0:
            extend_until(c, stop=lambda v: v.S < s)
        out[r] = curve_value(c, s)
    return out


def envelope_window(s: float) -> tuple[float, float]:
    """Default ``(M, B)`` for envelope laws at abscissa ``s``.

    Only lines with ``b < Gamma(s)`` and ``sigma < Gamma(s)/s`` matter at
    ``s``, and ``P(Gamma(s) > 20) = exp(-100/s)``.
    """
    return 50.0 / s, 20.0


def envelope_values(stream, s: float, n: int, slopes: bool = False):
    """``Gamma(s)`` (and the slope there) from literal envelopes of sampled lines."""
    M, B = envelope_window(s)
    vals = np.empty(n)
    slp = np.empty(n)
    for r in range(n):
        env = lower_envelope(sample_lines(stream.child("env", str(r)), "plus", M, B), (0.0, 1.0))
        vals[r] = env.value(s)
        slp[r] = env.slope(s)
    return (vals, slp) if slopes else vals


def ks_rayleigh(stream, s: float, n: int, source: str = "dynamics", scale: float = 1.0) -> TestReport:
    """KS test of ``Gamma(s)`` against survival ``exp(-g**2 / (4 s))`` at the 1% level.

    ``scale`` multiplies the samples before testing (a power control).
    """
    if not 0 < s <= 1:
        raise ValueError(f"s must be in (0, 1], got {s!r}")
    if source == "dynamics":
        x = dynamics_values(stream, s, n)
    elif source == "envelope":
        x = envelope_values(stream, s, n)
    else:
        raise ValueError(f"unknown source {source!r}")
    x = x * scale
    d = stats.kstest(x, lambda g: -np.expm1(-np.square(g) / (4.0 * s))).statistic
    crit = float(stats.kstwo.ppf(0.99, n))
    return TestReport(
        f"ks_rayleigh_{source}_s{s:g}", float(d), crit, n, bool(d <= crit), _seed_of(stream),
        {"s": s, "scale": scale},
    )


def ks_slope_mark(stream, s: float, n: int, source: str = "dynamics") -> TestReport:
    """KS test that ``Y(s) / Gamma(s)`` is uniform, i.e. the slope mark is conditionally uniform.

    ``Y(s)`` is the intercept of the tangent line active at ``s``.
    """
    marks = np.empty(n)
    if source == "dynamics":
        for r in range(n):
            c = new_curve(stream.child("curve", str(r)))
            if s < 1.0:
                extend_until(c, stop=lambda v: v.S < s)
            k = max(i for i in range(len(c)) if c.S[i] >= s)
            g = c.Y[k] + s * c.sigma[k]
            marks[r] = c.Y[k] / g
    else:
        vals, slp = envelope_values(stream, s, n, slopes=True)
        marks = (vals - s * slp) / vals
    d = stats.kstest(marks, "uniform").statistic
    crit = float(stats.kstwo.ppf(0.99, n))
    return TestReport(f"ks_slope_mark_{source}_s{s:g}", float(d), crit, n, bool(d <= crit), _seed_of(stream), {"s": s})


def _intercepts(stream, n_max: int, reps: int) -> np.ndarray:
    ys = np.empty((reps, n_max + 1))
    for r in range(reps):
        c = extend_to_depth(new_curve(stream.child("curve", str(r))), n_max)
        ys[r] = c.Y[: n_max + 1]
    return ys


def martingale_check(stream, n_max: int, reps: int, base: float = 3.0) -> TestReport:
    """Every ``E[base**n Y_n]`` for ``n <= n_max`` within 3 SE of ``sqrt(pi)/2``."""
    if n_max > 15:
        raise ValueError("n_max above 15 makes the variance of 3**n Y_n useless")
    ys = _intercepts(stream, n_max, reps) * base ** np.arange(n_max + 1)
    means = ys.mean(axis=0)
    ses = ys.std(axis=0, ddof=1) / math.sqrt(reps)
    z = np.abs(means - SQRT_PI_2) / ses
    return TestReport(
        "martingale", float(z.max()), 3.0, reps, bool(z.max() <= 3.0), _seed_of(stream),
        {"base": base, "means": means.tolist(), "se": ses.tolist()},
    )


def perpetuity_identity_check(stream, n_max: int, reps: int, tol: float = 1e-12) -> TestReport:
    """Largest relative error of ``Y_{n+1} = Y_n (1 - sqrt(U_{n+1}))`` over all steps."""
    worst = 0.0
    for r in range(reps):
        c = extend_to_depth(new_curve(stream.child("curve", str(r))), n_max)
        worst = max(worst, float(perpetuity_residuals(c).max(initial=0.0)))
    return TestReport("perpetuity_identity", worst, tol, reps, worst <= tol, _seed_of(stream), {"n_max": n_max})


def decay_check(stream, n: int, reps: int, base: float = 3.0) -> TestReport:
    """Paired comparison of ``base**n Y_n**3 / S_n`` with ``(3/10)**n Y_0**3 + (12/7) Y_0``.

    Passes when the mean paired difference is at most 3 SE.
    """
    x = np.empty(reps)
    z = np.empty(reps)
    for r in range(reps):
        c = extend_to_depth(new_curve(stream.child("curve", str(r))), n)
        x[r] = base**n * c.Y[n] ** 3 / c.S[n]
        z[r] = 0.3**n * c.Y[0] ** 3 + 12.0 / 7.0 * c.Y[0]
    d = x - z
    se = _se(d)
    return TestReport(
        f"decay_n{n}", float(d.mean()), 3.0 * se, reps, bool(d.mean() <= 3.0 * se), _seed_of(stream),
        {"base": base, "lhs_mean": float(x.mean()), "bound_mean": float(z.mean()), "se": se},
    )


# (name, f(u) for the uniform identities, exact value)
UNIFORM_MOMENTS = (
    ("E[1-sqrt U]", lambda u: 1.0 - np.sqrt(u), 1.0 / 3.0),
    ("E[(1-sqrt U)^2]", lambda u: (1.0 - np.sqrt(u)) ** 2, 1.0 / 6.0),
    ("E[(1-sqrt U)^3]", lambda u: (1.0 - np.sqrt(u)) ** 3, 1.0 / 10.0),
    ("E[(1-sqrt U)/sqrt U]", lambda u: (1.0 - np.sqrt(u)) / np.sqrt(u), 1.0),
    ("E[(1-sqrt U)^3/sqrt U]", lambda u: (1.0 - np.sqrt(u)) ** 3 / np.sqrt(u), 0.5),
)


def moment_quadrature() -> dict[str, float]:
    """Each identity's expectation by adaptive quadrature (independent of sampling)."""
    out = {}
    for name, f, _ in UNIFORM_MOMENTS:
        # substitute u = v**2 to remove the 1/sqrt(u) endpoint singularity
        out[name] = integrate.quad(lambda v: 2.0 * v * f(v * v), 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)[0]
    out["E[Gamma(1)^2]"] = integrate.quad(
        lambda g: g * g * 0.5 * g * math.exp(-g * g / 4.0), 0.0, math.inf, epsabs=1e-13, epsrel=1e-13
    )[0]
    return out


def moment_unit_checks(stream=None, n: int = 10**6, quad_tol: float = 1e-10) -> TestReport:
    """The six moments, by quadrature (to ``quad_tol``) and by ``n`` samples (3 SE)."""
    if stream is None:
        stream = RngStream(DEFAULT_SEED, 0, ("moments",))
    exact = {name: v for name, _, v in UNIFORM_MOMENTS}
    exact["E[Gamma(1)^2]"] = 4.0
    quad = moment_quadrature()
    quad_err = {k: abs(quad[k] - exact[k]) for k in exact}

    u = stream.child("u").uniforms(n)
    samples = {name: f(u) for name, f, _ in UNIFORM_MOMENTS}
    e = -np.log1p(-stream.child("e").uniforms(n))
    samples["E[Gamma(1)^2]"] = 4.0 * e
    z = {k: abs(float(v.mean()) - exact[k]) / _se(v) for k, v in samples.items()}

    worst_z = max(z.values())
    passed = worst_z <= 3.0 and max(quad_err.values()) <= quad_tol
    return TestReport(
        "moment_unit_checks", worst_z, 3.0, n, passed, _seed_of(stream),
        {
            "exact": exact,
            "quadrature": quad,
            "quadrature_error": quad_err,
            "sample_mean": {k: float(v.mean()) for k, v in samples.items()},
            "z": z,
        },
    )


def mean_flow_experiment(seed: int, N: int, eps: float, reps: int, threads: int = 1,
                         calibration: float = CALIBRATION, estimates=None) -> tuple[TestReport, TestReport]:
    """Mean of the total-flow estimate against ``calibration``, and the product term against ``4 pi / 9``.

    Passing ``estimates`` reuses an existing batch.
    """
    if estimates is None:
        estimates = simulate_flows(seed, reps, N, eps, threads)
    summ = summarize(estimates)
    band = 3.0 * summ.se + eps + l1_error_bound(N)
    dev = abs(summ.mean - calibration)
    flow = TestReport(
        "mean_flow", dev, band, summ.count, bool(dev <= band), seed,
        {"N": N, "eps": eps, "calibration": calibration, **summ.as_dict()},
    )
    # each half's integral product is bracketed to eps/2
    pband = 3.0 * summ.product_se + 0.25 * eps
    pdev = abs(summ.product_mean - PRODUCT_MEAN)
    prod = TestReport(
        "product_term", pdev, pband, summ.count, bool(pdev <= pband), seed,
        {"target": PRODUCT_MEAN, "mean": summ.product_mean, "se": summ.product_se},
    )
    return flow, prod


def void_probability_check(stream, M: float, B: float, reps: int) -> TestReport:
    """Frequency of an empty plus-window against ``exp(-M B / 2)``."""
    empty = np.array([len(sample_lines(stream.child("void", str(r)), "plus", M, B)) == 0 for r in range(reps)], float)
    p = math.exp(-0.5 * M * B)
    se = math.sqrt(p * (1 - p) / reps)
    dev = abs(float(empty.mean()) - p)
    return TestReport("void_probability", dev, 3.0 * se, reps, dev <= 3.0 * se, _seed_of(stream), {"M": M, "B": B, "target": p})


def oracle_box_check(stream, H: float = 3.0, n_mc: int = 10**5, grid: int = 200, realizations: int = 1) -> TestReport:
    """MC and quadrature box volumes on shared realizations, plus the exact empty case."""
    worst = -math.inf
    rows = []
    ok = True
    for r in range(realizations):
        bv = box_volume_two_ways(stream.child("box", str(r)), H, n_mc, grid)
        excess = abs(bv.mc - bv.quad) - (3.0 * bv.se + bv.quad_error_bound)
        worst = max(worst, excess)
        ok &= bv.agree
        rows.append(bv.as_dict())
    empty = TruncatedLineSample(np.zeros(0), np.zeros(0), 1.0, 1.0, "general")
    ev = box_volume_two_ways(stream.child("empty"), H, 1000, 4, sample=empty)
    exact_empty = ev.mc == ev.quad == (H * (1 - ev.margin)) ** 2
    ok &= exact_empty
    return TestReport(
        "oracle_box_volume", worst, 0.0, realizations * n_mc, bool(ok), _seed_of(stream),
        {"boxes": rows, "empty_exact": exact_empty},
    )


def decomposition_check(stream, realizations: int = 20, points: int = 20, tol: float = 1e-9) -> TestReport:
    """Seminal-curve decomposition versus brute-force clipping of valid left points.

    For points above the right seminal curve, compares the valid area the
    decomposition assigns (last tangent under the point, left curve) with the
    clipped area from every line. The statistic is the largest absolute gap.
    """
    H, margin = 6.0, 0.05
    # every line that can separate a pair with both abscissae at least margin
    # away from the axis has |sigma| < H / margin
    M, B = 1.5 * H / margin, H
    worst = 0.0
    min_gap = math.inf
    n = 0
    over = 0
    g = stream.child("points").numpy
    for r in range(realizations):
        plus = sample_lines(stream.child("plus", str(r)), "plus", M, B)
        minus = sample_lines(stream.child("minus", str(r)), "minus", M, B)
        env_p = lower_envelope(plus, (0.0, 1.0))
        env_m = lower_envelope(minus.mirrored(), (0.0, 1.0))
        if float(env_m.value(1.0)) >= H:
            continue
        for _ in range(points):
            x2 = margin + (1.0 - margin) * g.random()
            lo = float(env_p.value(x2))
            if lo >= H:
                continue
            y2 = lo + (H - lo) * g.random()
            dec = decomposition_valid_area(plus, minus, (x2, y2), margin)
            truth = valid_region_area(plus + minus, (x2, y2), H, margin)
            gap = dec - truth
            worst = max(worst, abs(gap))
            min_gap = min(min_gap, gap)
            over += gap > tol
            n += 1
    return TestReport(
        "decomposition_cross_check", worst, tol, n, worst <= tol, _seed_of(stream),
        {"pairs_over_counted": over, "min_gap": min_gap},
    )


def run_battery(seed: int = DEFAULT_SEED, quick: bool = False, corrupt: bool = False, threads: int = 1) -> list[TestReport]:
    """All checks with default sizes (``quick`` shrinks them for smoke runs).

    ``corrupt`` swaps the uniform sampler for ``U**2`` in the curve and
    moment checks; those must then fail.
    """
    root = RngStream(seed)

    def src(*tags):
        s = root.child(*tags)
        return SquaredUniformStream(s) if corrupt else s

    n_ks = 2000 if quick else 10**4
    reps = 2000 if quick else 10**4
    out = []
    for s in (1.0, 0.5, 0.25):
        out.append(ks_rayleigh(src("ks", "dyn", str(s)), s, n_ks, "dynamics"))
        out.append(ks_rayleigh(root.child("ks", "env", str(s)), s, n_ks, "envelope"))
    out.append(ks_slope_mark(src("mark", "dyn"), 0.5, n_ks, "dynamics"))
    out.append(ks_slope_mark(root.child("mark", "env"), 0.5, n_ks, "envelope"))
    out.append(martingale_check(src("martingale"), 10, reps))
    out.append(perpetuity_identity_check(src("perpetuity"), 10, reps))
    for n in (4, 8):
        out.append(decay_check(src("decay", str(n)), n, 2 * reps))
    out.append(moment_unit_checks(src("moments"), 10**5 if quick else 10**6))
    flow_reps = 2000 if quick else 10**4
    out.extend(mean_flow_experiment(seed, 20, 1e-4, flow_reps, threads))
    out.append(void_probability_check(root.child("void"), 2.0, 1.0, reps))
    out.append(oracle_box_check(root.child("oracle"), n_mc=2 * 10**4 if quick else 10**5))
    out.append(decomposition_check(root.child("decomposition"), 5 if quick else 20))
    return out


__all__ = [
    "DEFAULT_SEED",
    "TestReport",
    "decay_check",
    "decomposition_check",
    "dynamics_values",
    "envelope_values",
    "ks_rayleigh",
    "ks_slope_mark",
    "martingale_check",
    "mean_flow_experiment",
    "moment_quadrature",
    "moment_unit_checks",
    "oracle_box_check",
    "perpetuity_identity_check",
    "reports_to_json",
    "run_battery",
    "void_probability_check",
]
