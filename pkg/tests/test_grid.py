import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dampspec.errors import CoefficientError, CoefficientValidationError, ConfigError
from dampspec.grid import (
    assemble_schrodinger,
    build_grid,
    dirichlet_laplacian,
    l2_norm,
    s0_norm,
    sample_coefficients,
)

from conftest import discrete_dirichlet


class TestBuildGrid:
    def test_interval_spacing(self):
        g = build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": 199}]})
        assert g.spacing == (math.pi / 200,)
        assert g.size == 199 and not g.is_truncated

    def test_truncated_line(self):
        g = build_grid({"axes": [{"truncated": True, "radius": 20.0, "points": 999}]})
        assert (g.lower, g.upper) == ((-20.0,), (20.0,))
        assert g.spacing[0] == pytest.approx(40 / 1000)
        x = g.coordinates()[0]
        assert x[0] == pytest.approx(-20 + 0.04) and x[-1] == pytest.approx(20 - 0.04)
        assert g.radius == (20.0,)

    def test_square_counts(self):
        g = build_grid({"axes": [{"lower": 0, "upper": math.pi, "points": 49}] * 2})
        assert g.size == 2401 and g.dimension == 2
        assert g.cell_volume == pytest.approx((math.pi / 50) ** 2)

    def test_flat_index_is_x_major(self):
        g = build_grid({"axes": [{"lower": 0, "upper": 1, "points": 4}, {"lower": 0, "upper": 1, "points": 3}]})
        x, y = g.coordinates()
        k = g.flat_index(2, 1)
        assert k == 2 * 3 + 1
        assert x[k] == pytest.approx(3 / 5) and y[k] == pytest.approx(2 / 4)

    @pytest.mark.parametrize(
        "descriptor",
        [
            {},
            {"axes": [{"lower": 1.0, "upper": 1.0, "points": 10}]},
            {"axes": [{"lower": 0.0, "upper": 1.0, "points": 0}]},
            {"axes": [{"lower": 0.0, "upper": 1.0, "points": 2.5}]},
            {"axes": [{"truncated": True, "radius": -1.0, "points": 10}]},
            {"axes": [{"lower": 0.0, "upper": 1.0, "points": 2}]},
            {"dimension": 2, "axes": [{"lower": 0.0, "upper": 1.0, "points": 9}]},
        ],
    )
    def test_rejects_bad_descriptors(self, descriptor):
        with pytest.raises(ConfigError):
            build_grid(descriptor)

    def test_refined_and_enlarged(self):
        g = build_grid({"axes": [{"truncated": True, "radius": 20.0, "points": 399}]})
        big = g.enlarged(2.0)
        assert big.radius == (40.0,) and big.spacing == pytest.approx(g.spacing)
        fine = g.refined(2)
        assert fine.spacing[0] == pytest.approx(g.spacing[0] / 2)


class TestCoefficients:
    def test_constant(self, interval_grid):
        c = sample_coefficients(interval_grid, "1", "0")
        assert c.a_min == c.a_max == 1.0 and c.b_min == 0.0

    def test_sign_changing_with_decaying_tail(self):
        g = build_grid({"axes": [{"truncated": True, "radius": 20.0, "points": 799}]})
        c = sample_coefficients(g, "if(abs(x) < 1, -1, 0.5/(1 + x^2))", "0", a_inf=0.0)
        assert c.a_min == -1.0 and c.a_inf == 0.0 and c.indefinite

    def test_tail_with_nonzero_limit_is_rejected_for_zero(self):
        g = build_grid({"axes": [{"truncated": True, "radius": 20.0, "points": 799}]})
        spec = "if(abs(x) < 1, -1, 0.5 * x^2/(1 + x^2))"
        with pytest.raises(CoefficientValidationError):
            sample_coefficients(g, spec, "0", a_inf=0.0)
        assert sample_coefficients(g, spec, "0", a_inf=0.5).a_inf == 0.5

    def test_harmonic_potential_minimum(self):
        g = build_grid({"axes": [{"truncated": True, "radius": 10.0, "points": 400}]})
        c = sample_coefficients(g, "0", "x^2")
        assert 0 <= c.b_min < g.spacing[0] ** 2

    def test_non_finite_sample(self, interval_grid):
        with pytest.raises(CoefficientError, match="not finite"):
            sample_coefficients(interval_grid, "1/(x - x)", "0")

    def test_declared_limit_needs_truncation(self, interval_grid):
        with pytest.raises(CoefficientValidationError):
            sample_coefficients(interval_grid, "1", "0", a_inf=1.0)

    def test_arrays_and_callables(self, interval_grid):
        x = interval_grid.coordinates()[0]
        c1 = sample_coefficients(interval_grid, np.sin(x), lambda x: x**2)
        np.testing.assert_array_equal(c1.a_values, np.sin(x))
        np.testing.assert_allclose(c1.b_values, x**2)
        assert not c1.a_values.flags.writeable

    def test_bounds_hold_pointwise(self, interval_grid):
        c = sample_coefficients(interval_grid, "sin(3*x)", "cos(x)")
        assert np.all(c.a_min <= c.a_values) and np.all(c.a_values <= c.a_max)
        assert np.all(c.b_values >= c.b_min)


class TestAssembly:
    def test_three_point_stencil(self):
        g = build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": 3}]})
        c = sample_coefficients(g, "0", "0")
        h = math.pi / 4
        expected = np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]]) / h**2
        np.testing.assert_array_equal(assemble_schrodinger(g, c, 0.0).toarray(), expected)

    def test_constant_shift_is_exact(self, interval_grid):
        c = sample_coefficients(interval_grid, "1", "x")
        S0 = assemble_schrodinger(interval_grid, c, 0.0).toarray()
        S5 = assemble_schrodinger(interval_grid, c, 5.0).toarray()
        np.testing.assert_array_equal(S5 - S0, 5.0 * np.eye(interval_grid.size))

    def test_pointwise_shift(self, interval_grid):
        c = sample_coefficients(interval_grid, "sign(x - pi/2)", "0")
        D = assemble_schrodinger(interval_grid, c, -3.0).toarray() - assemble_schrodinger(interval_grid, c, 0.0).toarray()
        np.testing.assert_allclose(np.diag(D), -3.0 * c.a_values, rtol=0, atol=1e-9)
        assert np.count_nonzero(D - np.diag(np.diag(D))) == 0

    @pytest.mark.parametrize("m", [9, 49, 199])
    def test_dirichlet_spectrum_closed_form(self, m):
        g = build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": m}]})
        vals = np.linalg.eigvalsh(dirichlet_laplacian(g).toarray())
        expected = [discrete_dirichlet(n, m) for n in range(1, m + 1)]
        np.testing.assert_allclose(vals, expected, rtol=1e-11)

    def test_second_order_convergence(self):
        errs = []
        for m in (49, 99, 199):
            g = build_grid({"axes": [{"lower": 0.0, "upper": math.pi, "points": m}]})
            lam = np.linalg.eigvalsh(dirichlet_laplacian(g).toarray())[1]
            errs.append(abs(lam - 4.0))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(rates - 2.0) < 0.05)

    def test_2d_is_kronecker_sum(self):
        g = build_grid({"axes": [{"lower": 0, "upper": math.pi, "points": 7}, {"lower": 0, "upper": math.pi, "points": 5}]})
        L = dirichlet_laplacian(g).toarray()
        vals = np.sort(np.linalg.eigvalsh(L))
        ex = sorted(discrete_dirichlet(i, 7) + discrete_dirichlet(j, 5) for i in range(1, 8) for j in range(1, 6))
        np.testing.assert_allclose(vals, ex, rtol=1e-12)

    @given(st.floats(-50, 50, allow_nan=False))
    def test_symmetry_is_bit_exact(self, mu):
        g = build_grid({"axes": [{"lower": 0, "upper": 2, "points": 6}, {"lower": 0, "upper": 1, "points": 5}]})
        c = sample_coefficients(g, "sin(3*x) - y", "x*y")
        S = assemble_schrodinger(g, c, mu).matrix
        assert (S - S.T).count_nonzero() == 0


def test_s0_norm_matches_discrete_gradient(interval_grid):
    """Summation by parts: h*psi^T S0 psi equals the forward-difference energy."""
    c = sample_coefficients(interval_grid, "0", "1 + cos(x)")
    S0 = assemble_schrodinger(interval_grid, c, 0.0)
    rng = np.random.default_rng(3)
    psi = rng.standard_normal(interval_grid.size)
    h = interval_grid.spacing[0]
    padded = np.concatenate([[0.0], psi, [0.0]])
    grad = np.diff(padded) / h
    energy = h * (np.sum(grad**2) + np.sum((c.b_values - c.b_min) * psi**2) + np.sum(psi**2))
    assert s0_norm(S0, c, psi) == pytest.approx(math.sqrt(energy), rel=1e-12)
    assert l2_norm(interval_grid, psi) == pytest.approx(math.sqrt(h * np.sum(psi**2)))
