import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from poisson_city.errors import EmptySampleError, InvalidParameterError
from poisson_city.oracle import (
    Line,
    TruncatedLineSample,
    box_volume_two_ways,
    boundary_indicator,
    clip_below,
    decomposition_valid_area,
    indicator_windows,
    lower_envelope,
    sample_lines,
    separated_by_any,
    separates,
    separating_measure,
    shoelace,
    valid_region_area,
)
from poisson_city.rand_dist import RngStream, rayleigh_cdf
from poisson_city.seminal import curve_value, junction_residuals
from poisson_city.validation import decomposition_check

EMPTY = TruncatedLineSample(np.zeros(0), np.zeros(0), 1.0, 1.0, "general")


def lines(*pairs):
    return TruncatedLineSample.from_lines([Line(s, b) for s, b in pairs])


def test_line_intercept_parametrization():
    ln = Line.from_intercepts(0.5, 2.5)
    assert (ln.sigma, ln.b) == (1.0, 1.5)
    assert (ln.y_minus, ln.y_plus) == (0.5, 2.5)


@pytest.mark.parametrize("subclass", ["plus", "minus", "general"])
def test_sample_window_invariants(subclass):
    s = sample_lines(RngStream(1), subclass, 10.0, 5.0)
    assert np.all(np.abs(s.sigma) <= 10.0)
    if subclass == "plus":
        assert np.all((s.b > 0) & (s.b <= 5) & (s.sigma > 0))
    elif subclass == "minus":
        assert np.all((s.b > 0) & (s.b <= 5) & (s.sigma < 0))
    else:
        assert np.all(np.abs(s.b) < 5)


def test_sample_count_mean():
    n = [len(sample_lines(RngStream(2, r), "plus", 10.0, 5.0)) for r in range(10**4)]
    assert abs(np.mean(n) - 25) < 0.5


def test_segment_hits_match_intercept_intensity():
    # lines meeting {x = 1, 0 < y < 1}; with intercepts y0 at x=0 and y1 at x=1,
    # the intensity is dy0 dy1 / 2 on 0 < y0 < y1 < 1
    expected = integrate.dblquad(lambda y1, y0: 0.5, 0, 1, lambda y0: y0, lambda y0: 1.0)[0]
    hits = np.array([
        np.count_nonzero((lambda s: (s.b + s.sigma > 0) & (s.b + s.sigma < 1))(sample_lines(RngStream(3, r), "plus", 10.0, 5.0)))
        for r in range(10**4)
    ])
    assert abs(hits.mean() - expected) <= 3 * hits.std(ddof=1) / 100


def test_vanishing_window_is_empty():
    assert all(len(sample_lines(RngStream(4, r), "plus", 10.0, 1e-9)) == 0 for r in range(100))


def test_bad_window_rejected():
    with pytest.raises(InvalidParameterError):
        sample_lines(RngStream(1), "plus", 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        sample_lines(RngStream(1), "sideways", 1.0, 1.0)


def test_void_probability():
    empty = np.array([len(sample_lines(RngStream(5, r), "plus", 2.0, 1.0)) == 0 for r in range(20000)])
    p = math.exp(-1.0)
    assert abs(empty.mean() - p) <= 3 * math.sqrt(p * (1 - p) / 20000)


def test_csv_round_trip():
    s = sample_lines(RngStream(6), "general", 3.0, 2.0)
    back = TruncatedLineSample.from_csv(s.to_csv())
    assert np.array_equal(back.sigma, s.sigma) and np.array_equal(back.b, s.b)


def test_envelope_single_line():
    env = lower_envelope(lines((0.5, 1.0)), (0.0, 1.0))
    assert env.value(0.3) == pytest.approx(1.15)
    assert list(env.breaks) == [0.0, 1.0]


def test_envelope_two_lines():
    env = lower_envelope(lines((1.0, 1.0), (0.0, 2.0)), (0.0, 1.0))
    for x in np.linspace(0, 1, 11):
        assert env.value(x) == pytest.approx(1 + x)


def test_envelope_empty():
    with pytest.raises(EmptySampleError):
        lower_envelope(EMPTY, (0.0, 1.0))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-5, 5)), min_size=1, max_size=40))
def test_envelope_is_pointwise_min(pairs):
    s = lines(*pairs)
    env = lower_envelope(s, (0.0, 1.0))
    x = np.linspace(0, 1, 101)
    brute = np.min(s.b[None, :] + s.sigma[None, :] * x[:, None], axis=1)
    np.testing.assert_allclose(env.value(x), brute, rtol=1e-9, atol=1e-9 * (1 + np.abs(brute).max()))
    assert np.all(np.diff(env.sigma) < 0)


def test_envelope_as_curve_is_consistent():
    env = lower_envelope(sample_lines(RngStream(7), "plus", 100.0, 20.0), (0.0, 1.0))
    c = env.as_curve()
    assert junction_residuals(c)[:-1].max(initial=0.0) <= 1e-12
    for s in np.linspace(0.01, 1, 30):
        assert curve_value(c, s) == pytest.approx(float(env.value(s)), rel=1e-12)


def test_envelope_law_at_half():
    s = 0.5
    vals = [float(lower_envelope(sample_lines(RngStream(8, r), "plus", 50 / s, 20.0), (0.0, 1.0)).value(s)) for r in range(3000)]
    d = stats.kstest(vals, lambda g: rayleigh_cdf(g, s)).statistic
    assert d < stats.kstwo.ppf(0.99, 3000)


def test_separates_examples():
    ln = Line(1.0, 0.5)
    assert separates(ln, (-0.5, 1.0), (0.25, 1.0))
    # the origin and both points are on the same side
    assert not separates(ln, (-0.1, 0.1), (0.05, 0.2))
    # negative intercept: origin above, upper points above too
    for sig in (-30.0, -1.0, 0.5, 40.0):
        assert not separates(Line(sig, -0.2), (-0.5, 1.0), (0.5, 1.0))


def test_boundary_indicator_rejects_axis_points():
    for p1, p2 in (((0.0, 1.0), (0.5, 1.0)), ((-0.5, 0.0), (0.5, 1.0)), ((0.5, 1.0), (0.5, 1.0))):
        with pytest.raises(InvalidParameterError):
            boundary_indicator(p1, p2, RngStream(1))


def test_separating_measure_matches_quadrature():
    for p1, p2 in (((-0.5, 1.0), (0.5, 1.0)), ((-0.3, 0.7), (0.8, 1.9)), ((-0.9, 2.0), (0.2, 0.4))):
        M, B = indicator_windows(p1, p2)

        (x1, y1), (x2, y2) = p1, p2

        def inner(b):
            # the indicator in sigma jumps where the line passes through p1 or p2
            kinks = [k for k in ((y1 - b) / x1, (y2 - b) / x2) if -M < k < M]
            f = lambda sig: 0.5 * separates(Line(sig, b), p1, p2)
            return integrate.quad(f, -M, M, points=kinks, limit=200)[0]

        q = integrate.quad(inner, 0, B, limit=200)[0]
        assert separating_measure(p1, p2) == pytest.approx(q, rel=1e-3)


def test_boundary_indicator_void_probability():
    p1, p2 = (-0.5, 1.0), (0.5, 1.0)
    hits = np.array([boundary_indicator(p1, p2, RngStream(9, r)) for r in range(10**4)], float)
    p = math.exp(-separating_measure(p1, p2))
    assert abs(hits.mean() - p) <= 3 * math.sqrt(p * (1 - p) / 10**4)


def test_boundary_indicator_low_points():
    assert all(boundary_indicator((-0.5, 1e-6), (0.5, 1e-6), RngStream(10, r)) for r in range(200))


def test_indicator_monotone_in_heights():
    g = np.random.default_rng(0)
    for r in range(300):
        x1, x2 = -g.uniform(0.1, 1), g.uniform(0.1, 1)
        y1, y2 = g.uniform(0.1, 2, 2)
        k1, k2 = 1 + g.uniform(0, 1, 2)
        M, B = indicator_windows((x1, y1 * k1), (x2, y2 * k2))
        st_ = RngStream(11, r)
        sample = sample_lines(st_, "plus", M, B) + sample_lines(st_, "minus", M, B)
        low = boundary_indicator((x1, y1), (x2, y2), None, sample)
        high = boundary_indicator((x1, y1 * k1), (x2, y2 * k2), None, sample)
        assert low or not high


def test_clip_and_shoelace():
    sq = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    assert shoelace(sq) == 1.0
    assert shoelace(clip_below(sq, 0.5, 0.0)) == pytest.approx(0.5)
    assert shoelace(clip_below(sq, 0.0, 1.0)) == pytest.approx(0.5)
    assert clip_below(sq, -1.0, 0.0) == []


def test_box_empty_realization_exact():
    bv = box_volume_two_ways(RngStream(1), 3.0, 1000, 8, sample=EMPTY)
    assert bv.mc == bv.quad == (3.0 * 0.9) ** 2
    assert bv.se == 0.0


def test_box_margin_must_be_positive():
    with pytest.raises(InvalidParameterError):
        box_volume_two_ways(RngStream(1), 3.0, 10, 4, margin=0.0)


def test_box_single_line_by_hand():
    # y = 0.5 + x, H = 1, margin 0.1: left box above it 0.82, right box 0.08,
    # volume 0.81 - 0.82 * 0.08; column integrals 0.9 - 0.82 (0.5 - x2)+
    one = lines((1.0, 0.5))
    bv = box_volume_two_ways(RngStream(12), 1.0, 10**5, 4, sample=one)
    cols = [0.9 - 0.82 * max(0.5 - x, 0.0) for x in (0.2125, 0.4375, 0.6625, 0.8875)]
    assert bv.quad == pytest.approx(0.225 * sum(cols), rel=1e-12)
    exact = 0.81 - 0.82 * 0.08
    assert abs(bv.quad - exact) <= bv.quad_error_bound
    assert abs(bv.mc - exact) <= 3 * bv.se
    fine = box_volume_two_ways(RngStream(12), 1.0, 10, 400, sample=one)
    assert fine.quad == pytest.approx(exact, abs=1e-5)


def test_box_random_realization_two_ways():
    bv = box_volume_two_ways(RngStream(13), 3.0, 10**5, 200)
    assert bv.n_lines > 0
    assert bv.agree


def test_valid_area_agrees_with_indicator_sampling():
    g = np.random.default_rng(1)
    st_ = RngStream(14)
    sample = sample_lines(st_, "plus", 30.0, 3.0) + sample_lines(st_, "minus", 30.0, 3.0)
    p2 = (0.4, 1.2)
    area = valid_region_area(sample, p2, 3.0, 0.1)
    n = 40000
    p1 = np.column_stack([-g.uniform(0.1, 1, n), g.uniform(0, 3, n)])
    ok = np.array([not separated_by_any(sample, tuple(p), p2) for p in p1], float)
    est = 2.7 * ok.mean()
    assert abs(est - area) <= 3 * 2.7 * ok.std() / math.sqrt(n)


def test_decomposition_overcounts_fixture():
    # y = 1.2 + 5x is never on the right envelope (it stays above 1 + x) but
    # passes under x2 = (0.2, 2.3), cutting the valid left region down
    plus = lines((1.0, 1.0), (20.0, 0.1), (5.0, 1.2))
    minus = lines((-1.0, 1.0))
    env = lower_envelope(plus, (0.0, 1.0))
    assert np.all(1.2 + 5 * np.linspace(0, 1, 50) > env.value(np.linspace(0, 1, 50)))
    dec = decomposition_valid_area(plus, minus, (0.2, 2.3))
    true = valid_region_area(plus + minus, (0.2, 2.3), 10.0, 0.0)
    assert dec == pytest.approx(0.5, rel=1e-12)
    # int_0^0.05 (1 - t) + int_0.05^0.24 (1.2 - 5t)
    assert true == pytest.approx(0.139, rel=1e-12)


def test_decomposition_never_undercounts():
    rep = decomposition_check(RngStream(15), realizations=10, points=10)
    assert rep.n_samples > 0
    assert rep.details["min_gap"] >= -1e-9


@pytest.mark.xfail(strict=True, reason="non-tangent lines under x2 are missing from the decomposition")
def test_decomposition_matches_indicator_on_realizations():
    assert decomposition_check(RngStream(16), realizations=20, points=20).passed
