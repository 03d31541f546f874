import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampspec.eigencurves import (
    CurveFamily,
    asymptotic_slope,
    count_real_points,
    default_mu_range,
    essential_interval,
    intersect_all,
    required_curve_count,
    sample_eigencurves,
    tabulate,
    thresholds,
)
from dampspec.errors import RangeError
from dampspec.grid import build_grid, sample_coefficients


def lines(*intercepts, slope=1.0, essential=None):
    funcs = [lambda mu, c=c: c + slope * mu for c in intercepts]
    a = (slope, slope)
    return CurveFamily(funcs, min(a), max(a), essential)


def closed_form_table(*intercepts, span=30.0, samples=301, slope=1.0, essential=None):
    mus = np.union1d(np.linspace(-span, span, samples), [0.0])
    return tabulate(lines(*intercepts, slope=slope, essential=essential), mus)


def kinds(records, curve=1):
    return [(r.kind, r.mu_star) for r in records if r.curve == curve and r.kind != "range-warning"]


class TestClosedFormIntersections:
    def test_two_transversal_roots(self):
        recs = intersect_all(closed_form_table(1.0), 3.0)
        found = kinds(recs)
        assert [k for k, _ in found] == ["transversal", "transversal"]
        mus = sorted(m for _, m in found)
        np.testing.assert_allclose(mus, [-4.5 - math.sqrt(11.25), -4.5 + math.sqrt(11.25)], atol=1e-8)
        for r in recs:
            if r.kind == "transversal":
                assert abs(r.residual) <= 1e-10
                assert np.sign(r.lam) == np.sign(r.mu_star) and r.lam == pytest.approx(r.mu_star / 3)

    def test_no_root_below_discriminant(self):
        assert kinds(intersect_all(closed_form_table(1.0), 1.0)) == []

    def test_double_root_is_a_tangency(self):
        found = kinds(intersect_all(closed_form_table(1.0), 2.0))
        assert len(found) == 1
        kind, mu = found[0]
        assert kind == "tangency" and mu == pytest.approx(-2.0, abs=1e-6)

    @pytest.mark.parametrize("alpha, count", [(1.9999, 0), (2.0001, 2)])
    def test_near_double_root(self, alpha, count):
        found = kinds(intersect_all(closed_form_table(1.0, samples=41), alpha))
        assert sum(k == "transversal" for k, _ in found) == count

    def test_second_curve_tangency_with_first_crossing(self):
        recs = intersect_all(closed_form_table(1.0, 4.0), 4.0)
        assert [k for k, _ in kinds(recs, 1)] == ["transversal", "transversal"]
        (kind, mu), = kinds(recs, 2)
        assert kind == "tangency" and mu == pytest.approx(-8.0, abs=1e-6)

    def test_range_warning_when_table_too_short(self):
        recs = intersect_all(closed_form_table(1.0, span=3.0, samples=31), 3.0)
        warn = [r for r in recs if r.kind == "range-warning"]
        assert warn and all(r.classification == "unknown" for r in warn)

    def test_no_range_warning_on_certified_range(self):
        lo, hi = default_mu_range(1.0, 1.0, 3.0)
        recs = intersect_all(closed_form_table(1.0, span=hi), 3.0)
        assert not [r for r in recs if r.kind == "range-warning"]

    @pytest.mark.parametrize("alpha", [0.0, -1.0])
    def test_alpha_must_be_positive(self, alpha):
        with pytest.raises(ValueError):
            intersect_all(closed_form_table(1.0), alpha)

    @given(st.floats(0.5, 5.0), st.floats(0.3, 6.0))
    def test_agrees_with_quadratic_formula(self, c, alpha):
        """gamma = c + mu meets -(mu/alpha)^2 where mu^2 + alpha^2 mu + alpha^2 c = 0."""
        disc = alpha**4 - 4 * alpha**2 * c
        span = 1.1 * alpha**2 + 1
        recs = kinds(intersect_all(closed_form_table(c, span=span, samples=201), alpha))
        if disc > 1e-3:
            expected = sorted([(-alpha**2 - math.sqrt(disc)) / 2, (-alpha**2 + math.sqrt(disc)) / 2])
            np.testing.assert_allclose(sorted(m for _, m in recs), expected, atol=1e-8)
        elif disc < -1e-3:
            assert recs == []


class TestTables:
    def test_constant_damping_gives_lines(self, interval_grid):
        c = sample_coefficients(interval_grid, "1", "0")
        t = sample_eigencurves(interval_grid, c, (-10, 10), 21, k=3)
        g0 = t.curves[:, t.zero_index()]
        np.testing.assert_allclose(t.curves, g0[:, None] + t.mu_samples[None, :], atol=1e-9)
        np.testing.assert_allclose(g0, [1, 4, 9], rtol=2e-4)

    def test_rows_are_ordered_and_lipschitz(self, interval_grid):
        c = sample_coefficients(interval_grid, "sign(x - pi/2)", "cos(2*x)")
        t = sample_eigencurves(interval_grid, c, (-40, 40), 161, k=5)
        assert np.all(np.diff(t.curves, axis=0) >= -1e-9)
        assert t.lipschitz_violations() == []
        assert t.lipschitz_bound == 1.0

    @given(
        st.lists(st.floats(-2, 2, allow_nan=False), min_size=4, max_size=4),
        st.lists(st.floats(0, 3, allow_nan=False), min_size=4, max_size=4),
    )
    def test_lipschitz_law_random_piecewise(self, avals, bvals):
        g = build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": 79}]})
        x = g.coordinates()[0]
        piece = np.minimum((x / math.pi * 4).astype(int), 3)
        c = sample_coefficients(g, np.array(avals)[piece], np.array(bvals)[piece])
        t = sample_eigencurves(g, c, (-30, 30), 61, k=4)
        assert t.lipschitz_violations() == []

    def test_zero_sample_is_inserted(self, small_interval):
        c = sample_coefficients(small_interval, "1", "0")
        t = sample_eigencurves(small_interval, c, (-1, 2), 4, k=1)
        assert 0.0 in t.mu_samples
        assert t.covers(1.5) and not t.covers(2.5)

    def test_missing_zero_raises(self, small_interval):
        c = sample_coefficients(small_interval, "1", "0")
        t = sample_eigencurves(small_interval, c, (1, 2), 4, k=1)
        with pytest.raises(RangeError):
            t.zero_index()

    def test_parallel_matches_serial(self, interval_grid):
        c = sample_coefficients(interval_grid, "sin(x) - 0.3", "0")
        a = sample_eigencurves(interval_grid, c, (-20, 20), 41, k=3)
        b = sample_eigencurves(interval_grid, c, (-20, 20), 41, k=3, workers=3)
        np.testing.assert_array_equal(a.curves, b.curves)


class TestAsymptotics:
    def test_constant_slope(self):
        t = closed_form_table(1.0, 4.0, slope=-0.5, span=400.0)
        for side in (1, -1):
            s = asymptotic_slope(t, 2, side)
            assert s.slope == pytest.approx(-0.5, abs=1e-12)

    def test_sign_changing_limits(self, interval_grid):
        c = sample_coefficients(interval_grid, "sign(x - pi/2)", "0")
        mus = np.concatenate([-np.logspace(2, 4, 7)[::-1], [0.0], np.logspace(2, 4, 7)])
        from dampspec.eigencurves import SchrodingerFamily

        t = tabulate(SchrodingerFamily(interval_grid, c, 1), mus)
        plus = asymptotic_slope(t, 1, +1)
        minus = asymptotic_slope(t, 1, -1)
        assert abs(plus.ratio + 1) <= 0.05 and abs(minus.ratio - 1) <= 0.05
        assert abs(plus.slope + 1) < abs(plus.previous_slope + 1) + 1e-12

    def test_short_table(self, small_interval):
        c = sample_coefficients(small_interval, "1", "0")
        t = sample_eigencurves(small_interval, c, (-5, 5), 11, k=1)
        with pytest.raises(RangeError):
            asymptotic_slope(t, 1, 1)


class TestThresholds:
    def test_constant_negative_damping(self, interval_grid, anti_damped):
        t = sample_eigencurves(interval_grid, anti_damped, (-80, 80), 321, k=3)
        g0 = t.curves[:, t.zero_index()]
        recs = [thresholds(t, n, +1) for n in (1, 2, 3)]
        for n, r in enumerate(recs, start=1):
            assert r.found and r.mechanism == "tangency"
            assert r.alpha_threshold == pytest.approx(2 * math.sqrt(g0[n - 1]), rel=1e-6)
            assert r.witness == pytest.approx(2 * g0[n - 1], rel=1e-3)
        assert [r.alpha_threshold for r in recs] == sorted(r.alpha_threshold for r in recs)
        assert not thresholds(t, 1, -1).found

    def test_bound_state_gives_zero_threshold(self, interval_grid):
        c = sample_coefficients(interval_grid, "1", "-30*exp(-10*(x - pi/2)^2)")
        t = sample_eigencurves(interval_grid, c, (-20, 20), 81, k=2)
        r = thresholds(t, 1, +1)
        assert t.curves[0, t.zero_index()] < 0
        assert r.found and r.alpha_threshold == 0.0 and r.mechanism == "crossing"

    def test_crossing_witness_formula(self):
        t = closed_form_table(-1.0, slope=1.0, span=30.0)
        r = thresholds(t, 1, -1)
        assert r.alpha_threshold == 0.0 and r.witness == 0.0


class TestCounts:
    def test_constant_case(self, interval_grid, anti_damped):
        t = sample_eigencurves(interval_grid, anti_damped, default_mu_range(1.0, 1.0, 3.0), 401, k=4)
        counts = count_real_points(t, 3.0)
        assert counts.n0 == 0
        assert counts.positive["discrete"] == 2 and counts.negative["discrete"] == 0
        assert counts.lower_bounds["positive"] == 2 and counts.holds

    @pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0])
    def test_one_bound_state(self, alpha):
        g = build_grid({"axes": [{"truncated": True, "radius": 20.0, "points": 399}]})
        c = sample_coefficients(g, "1 - 0.5*exp(-x^2)", "-2/cosh(x)^2", a_inf=1.0, b_inf=0.0)
        t = sample_eigencurves(g, c, default_mu_range(-1.0, 1.0, alpha), 201, k=2)
        counts = count_real_points(t, alpha)
        assert counts.n0 == 1
        assert counts.positive["discrete"] >= 1 and counts.holds

    def test_negative_essential_threshold_flags_both_sides(self):
        g = build_grid({"axes": [{"truncated": True, "radius": 20.0, "points": 199}]})
        c = sample_coefficients(g, "0.5", "-1", a_inf=0.5, b_inf=-1.0)
        t = sample_eigencurves(g, c, (-20, 20), 41, k=1)
        counts = count_real_points(t, 1.0)
        assert counts.essential_flags["positive"] and counts.essential_flags["negative"]


class TestEssentialInterval:
    @pytest.mark.parametrize(
        "g0, ainf, alpha, expected",
        [(0.0, 1.0, 2.0, (-2.0, 0.0)), (0.0, -1.0, 2.0, (0.0, 2.0)), (1.0, 0.0, 3.0, None)],
    )
    def test_examples(self, g0, ainf, alpha, expected):
        assert essential_interval(g0, ainf, alpha) == (pytest.approx(expected) if expected else None)

    @given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0.1, 10))
    def test_endpoints_solve_quadratic(self, g0, ainf, alpha):
        span = essential_interval(g0, ainf, alpha)
        if span is None:
            assert alpha**2 * ainf**2 - 4 * g0 < 0
            return
        for x in span:
            scale = x**2 + abs(alpha * ainf * x) + abs(g0) + 1
            assert abs(x**2 + alpha * ainf * x + g0) <= 1e-12 * scale


def test_required_curve_count():
    g0 = np.array([1.0, 4.0, 9.0, 16.0])
    assert required_curve_count(g0, 1.0, 3.0) == 1
    assert required_curve_count(g0, 1.0, 6.0) == 3
