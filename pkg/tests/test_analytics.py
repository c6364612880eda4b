import math

import mpmath
import pytest
from hypothesis import given, settings
from scipy import integrate

from smflow import analytics, catalog
from smflow.analytics import (
    AgeGrid,
    MeetScenario,
    MergeScenario,
    QuadratureConfig,
    QuadratureError,
    UnsupportedMatrix,
)
from smflow.rates import Constant, PiecewiseConstant, RateMatrix, Saturating, constant_matrix

from conftest import rate_matrices

Q = QuadratureConfig()
SMALL_AGES = AgeGrid(3, 4.0)


def test_two_state_always_meets():
    m = catalog.saturating_two_state()
    for y1, y2 in [(0.0, 1.0), (0.0, 0.0), (3.0, 0.2), (50.0, 7.0)]:
        r = analytics.meet_next_prob(m, MeetScenario(1, 2, y1, y2), Q)
        assert r.value == pytest.approx(1.0, abs=1e-9)
        assert r.error < 1e-8
    m2 = constant_matrix([1, 2], {(1, 2): 0.7, (2, 1): 4.0})
    assert analytics.meet_next_prob(m2, MeetScenario(2, 1), Q).value == pytest.approx(1.0, abs=1e-9)


def test_three_state_constant_meet_values():
    m = catalog.three_state_constant()
    # rows: 1 -> {2: 1, 3: 2}, 2 -> {1: 3, 3: 1}, 3 -> {1: 1, 2: 1}
    assert analytics.meet_next_prob(m, MeetScenario(1, 2), Q).value == pytest.approx(4 / 7, abs=1e-9)
    assert analytics.not_meet_prob(m, MeetScenario(1, 2), Q).value == pytest.approx(3 / 7, abs=1e-9)
    assert analytics.markov_meet_prob(m, 1, 2) == 4 / 7
    assert analytics.markov_meet_prob(m, 2, 3) == pytest.approx(2 / 6)


def test_routes_agree():
    for m in (catalog.three_state_mixed(), catalog.three_state_saturating(), catalog.three_state_constant()):
        for sc in (MeetScenario(1, 2, 0.0, 0.0), MeetScenario(3, 1, 0.7, 2.5), MeetScenario(2, 3, 5.0, 0.1)):
            d = analytics.not_meet_prob(m, sc, Q, route="direct")
            c = analytics.not_meet_prob(m, sc, Q, route="complement")
            assert abs(d.value - c.value) <= 2 * Q.abs_tol + d.error + c.error
            assert abs(d.value - c.value) < 1e-8
    with pytest.raises(ValueError):
        analytics.not_meet_prob(m, MeetScenario(1, 2), Q, route="sideways")


def test_markov_closed_form_errors():
    with pytest.raises(UnsupportedMatrix):
        analytics.markov_meet_prob(catalog.saturating_two_state(), 1, 2)
    with pytest.raises(ValueError):
        analytics.markov_meet_prob(catalog.three_state_constant(), 2, 2)
    with pytest.raises(ValueError):
        MeetScenario(1, 1)


def test_merge_prob_constant_rates_is_one():
    m = catalog.three_state_constant()
    for k in m.states:
        for y in (0.0, 1.0, 10.0, 1e3):
            assert analytics.merge_prob(m, MergeScenario(k, y), Q).value == pytest.approx(1.0, abs=1e-8)


def test_merge_prob_zero_gap_is_one():
    for m in (catalog.saturating_two_state(), catalog.three_state_mixed()):
        for k in m.states:
            assert analytics.merge_prob(m, MergeScenario(k, 0.0), Q).value == pytest.approx(1.0, abs=1e-8)


def _merge_oracle_two_state(y):
    y = mpmath.mpf(y)

    def f(s):
        surv = mpmath.exp(-((s) - mpmath.log((1 + y + s) / (1 + y))))
        return surv * s / (1 + s)

    return float(mpmath.quad(f, [0, 1, 10, 100, mpmath.inf]))


def test_merge_prob_large_gap_matches_oracle():
    mpmath.mp.dps = 30
    limit = float(mpmath.quad(lambda t: mpmath.exp(-t) * t / (1 + t), [0, 1, mpmath.inf]))
    assert limit == pytest.approx(1 - math.e * float(mpmath.e1(1)), abs=1e-14)
    assert limit == pytest.approx(0.403653, abs=1e-6)
    m = catalog.saturating_two_state()
    for y in (1.0, 10.0, 1e4):
        v = analytics.merge_prob(m, MergeScenario(1, y), Q).value
        assert v == pytest.approx(_merge_oracle_two_state(y), abs=1e-8)
    v = analytics.merge_prob(m, MergeScenario(1, 1e4), Q).value
    assert abs(v - limit) < 1e-3
    assert v < (1 + math.exp(-1)) / 2


def test_merge_prob_small_gap_limit():
    m = catalog.saturating_two_state()
    rep = analytics.merge_prob_limit_y0(m, 1, Q)
    assert rep.monotone
    assert rep.gap < 1e-2
    assert rep.values[-1] == pytest.approx(1.0, abs=1e-2)
    vals = [analytics.merge_prob(m, MergeScenario(1, y), Q).value for y in (1e4, 100, 10, 1, 0.1, 1e-2, 1e-3)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_never_meet_bound_examples():
    two = analytics.never_meet_bound(catalog.saturating_two_state(), Q, 3, SMALL_AGES)
    assert two.value == pytest.approx(0.0, abs=1e-8)
    m = catalog.three_state_constant()
    rng = analytics.not_meet_range(m, Q)
    # worst pair is (2, 3): meets with probability (1 + 1) / (4 + 2); best is (1, 3): (2 + 1) / (3 + 2)
    assert rng.sup == pytest.approx(2 / 3, abs=1e-9)
    assert rng.inf == pytest.approx(2 / 5, abs=1e-9)
    for n in range(1, 6):
        b = analytics.never_meet_bound(m, Q, n, rng=rng)
        assert b.value == pytest.approx((2 / 3) ** n, rel=1e-8)
        assert not b.vacuous and b.caveat


def test_polylog_closed_forms():
    assert analytics.polylog_neg(1, 0.5) == pytest.approx(2.0, abs=1e-15)
    assert analytics.polylog_neg(2, 0.5) == pytest.approx(6.0, abs=1e-15)
    assert analytics.eulerian_row(3) == [1, 4, 1]
    assert analytics.eulerian_row(4) == [1, 11, 11, 1]
    for r in (1, 2, 3, 4):
        for z in (0.1, 3 / 7, 0.5, 2 / 3, 0.9):
            exact = float(mpmath.polylog(-r, z))
            assert analytics.polylog_neg(r, z) == pytest.approx(exact, rel=1e-12)
            assert abs(analytics.polylog_neg(r, z) - analytics.polylog_series(r, z)) < 1e-10 * max(1, exact)
    assert analytics.polylog_neg_over_z(2, 0.0) == 1.0
    with pytest.raises(ValueError):
        analytics.polylog_neg(0, 0.5)


def test_moment_bound_examples():
    m = catalog.three_state_constant()
    rng = analytics.not_meet_range(m, Q)
    s, i = 2 / 3, 2 / 5
    b1 = analytics.moment_bound(m, Q, 1, rng=rng)
    b2 = analytics.moment_bound(m, Q, 2, rng=rng)
    assert b1.value == pytest.approx((1 - i) * (1 / (1 - s) ** 2), rel=1e-8)
    assert b2.value == pytest.approx((1 - i) * (1 + s) / (1 - s) ** 3, rel=1e-8)
    assert (b1.value, b2.value) == pytest.approx((5.4, 27.0), rel=1e-8)
    two = analytics.moment_bound(catalog.saturating_two_state(), Q, 2, SMALL_AGES)
    assert two.value == pytest.approx(1.0, abs=1e-7)


def test_merge_inf_bound_examples():
    b = analytics.merge_inf_bound(constant_matrix([1, 2], {(1, 2): 3.0, (2, 1): 1.0}))
    assert b.value == pytest.approx(1 / 4)
    assert analytics.merge_inf_bound(catalog.three_state_constant()).value == pytest.approx(2 / 9)
    assert analytics.merge_inf_bound(catalog.saturating_two_state()).value == 0.0
    assert analytics.merge_inf_bound(catalog.saturating_two_state()).vacuous
    mixed = analytics.merge_inf_bound(catalog.three_state_mixed())
    # row infima: 1 -> 0.5, 2 -> 0.4, 3 -> 0.2 + 0.7; the smallest over C
    m = catalog.three_state_mixed()
    assert mixed.value == pytest.approx(0.4 / m.C)


def test_error_estimate_is_honest_when_tolerance_tightens():
    loose = QuadratureConfig(rel_tol=1e-6, abs_tol=1e-6)
    tight = QuadratureConfig(rel_tol=1e-12, abs_tol=1e-13, tail_eps=1e-14)
    for m in (catalog.three_state_mixed(), catalog.three_state_saturating()):
        for sc in (MeetScenario(1, 3, 0.0, 2.0), MeetScenario(2, 1, 1.3, 0.0)):
            a, b = analytics.meet_next_prob(m, sc, loose), analytics.meet_next_prob(m, sc, tight)
            assert abs(a.value - b.value) <= a.error + b.error
        a = analytics.merge_prob(m, MergeScenario(1, 3.0), loose)
        b = analytics.merge_prob(m, MergeScenario(1, 3.0), tight)
        assert abs(a.value - b.value) <= a.error + b.error


def _nested_oracle(m, sc):
    """All-numerical evaluation: inner cumulative hazards by QUADPACK, the outer integral by mpmath."""
    mpmath.mp.dps = 15
    i, j, y1, y2 = sc.i, sc.j, sc.y1, sc.y2
    ri = [m.rates[(i, k)] for k in m.states if k != i]
    rj = [m.rates[(j, k)] for k in m.states if k != j]

    def pts(fs, y0, hi):
        return sorted({0, hi, *[b - y0 for f in fs for b in f.breakpoints if 0 < b - y0 < hi]})

    def inner(fs, y0, y):
        if y == 0:
            return 0
        total = 0.0
        for f in fs:
            p = pts([f], y0, float(y))
            total += sum(integrate.quad(lambda u: f.value(y0 + u), a, b, epsabs=1e-13)[0] for a, b in zip(p, p[1:]))
        return total

    def g(y):
        s = inner(ri, y1, y) + inner(rj, y2, y)
        return mpmath.exp(-s) * (m.rate(i, j, float(y1 + y)) + m.rate(j, i, float(y2 + y)))

    upper = 10.0
    while inner(ri, y1, upper) + inner(rj, y2, upper) < 40.0:
        upper *= 2
    cut = sorted(set(pts(ri, y1, upper)) | set(pts(rj, y2, upper)))
    return float(mpmath.quad(g, cut))


@settings(max_examples=12, deadline=None)
@given(m=rate_matrices(max_states=3))
def test_meet_prob_against_nested_oracle(m):
    sc = MeetScenario(m.states[0], m.states[1], 0.3, 1.7)
    r = analytics.meet_next_prob(m, sc, Q)
    assert r.value == pytest.approx(_nested_oracle(m, sc), abs=1e-6)


def test_quadrature_error_when_hazard_stays_bounded():
    dead = RateMatrix(
        [1, 2],
        {(1, 2): PiecewiseConstant([1.0], [1.0], 0.0), (2, 1): PiecewiseConstant([2.0], [0.5], 0.0)},
    )
    with pytest.raises(QuadratureError):
        analytics.meet_next_prob(dead, MeetScenario(1, 2), Q)
    with pytest.raises(QuadratureError):
        analytics.merge_prob(dead, MergeScenario(1, 0.5), Q)


def test_analyze_reports():
    m = catalog.three_state_mixed()
    reps = analytics.analyze(m, [MeetScenario(1, 2)], [MergeScenario(3, 1.0)], Q, SMALL_AGES, r_max=2, n_max=3)
    kinds = [r.quantity for r in reps]
    assert "meet_next_prob" in kinds and "merge_prob" in kinds
    for r in reps:
        d = r.to_dict()
        assert "value" in d


def test_mixed_families_survive_quadrature():
    m = RateMatrix(
        [1, 2, 3],
        {
            (1, 2): Saturating(0.3),
            (1, 3): PiecewiseConstant([0.2, 0.9, 4.0], [0.0, 3.0, 0.1], 0.05),
            (2, 1): Constant(0.05),
            (2, 3): Saturating(5.0),
            (3, 1): PiecewiseConstant([0.5], [5.0], 0.2),
            (3, 2): Constant(1.0),
        },
    )
    for sc in (MeetScenario(1, 2, 0.0, 0.0), MeetScenario(1, 3, 0.1, 3.9), MeetScenario(3, 2, 0.5, 0.5)):
        a = analytics.meet_next_prob(m, sc, Q)
        b = analytics.not_meet_prob(m, sc, Q)
        assert 0.0 <= a.value <= 1.0
        assert a.value + b.value == pytest.approx(1.0, abs=1e-8)


def test_nearly_coincident_breakpoints():
    # a breakpoint and its copy shifted by one ulp must not leave a sliver segment
    m = RateMatrix([1, 2], {(1, 2): Constant(1.17), (2, 1): PiecewiseConstant([0.7, 6.3, 6.7], [1.2, 4.4, 0.3], 1.7)})
    r = analytics.merge_prob(m, MergeScenario(2, 2.220446049250313e-16), Q)
    assert r.value == pytest.approx(1.0, abs=1e-8)
