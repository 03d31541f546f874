import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from dampspec.damped import BlockOperator, assemble_block, cross_validate, spectrum
from dampspec.eigencurves import default_mu_range, intersect_all, sample_eigencurves
from dampspec.errors import ConfigError, TableExtensionRequired
from dampspec.grid import SymmetricOperator, assemble_schrodinger, sample_coefficients

from conftest import discrete_dirichlet


def block_for(grid, a, b, alpha):
    c = sample_coefficients(grid, a, b)
    return assemble_block(assemble_schrodinger(grid, c), c, alpha), c


def quadratic_roots(p, q):
    """Roots of lam^2 + p lam + q = 0."""
    return np.roots([1.0, p, q])


class TestAssembly:
    def test_action(self, small_interval):
        blk, c = block_for(small_interval, "sin(x) - 0.5", "x", 2.5)
        rng = np.random.default_rng(0)
        p1, p2 = rng.standard_normal((2, blk.n))
        top, bottom = blk.apply(p1, p2)
        np.testing.assert_array_equal(top, p2)
        np.testing.assert_allclose(bottom, -(blk.S0.matrix @ p1) - 2.5 * c.a_values * p2, rtol=1e-15)
        np.testing.assert_allclose(blk.sparse() @ np.concatenate([p1, p2]), blk.matvec(np.concatenate([p1, p2])))

    def test_trace(self, small_interval):
        blk, c = block_for(small_interval, "cos(x)", "0", 1.7)
        assert np.trace(blk.dense()) == pytest.approx(-1.7 * c.a_values.sum(), abs=1e-12)

    def test_negative_alpha_rejected(self, small_interval):
        c = sample_coefficients(small_interval, "1", "0")
        with pytest.raises(ConfigError):
            assemble_block(assemble_schrodinger(small_interval, c), c, -1.0)

    @given(st.floats(-5, 5), st.floats(-3, 3), st.floats(0, 10))
    def test_scalar_case(self, small_interval, gamma, cval, alpha):
        op = SymmetricOperator(sp.csr_matrix([[gamma]]), 0.0, small_interval)
        blk = BlockOperator(op, np.array([cval]), alpha)
        ev = np.sort_complex(np.linalg.eigvals(blk.dense()))
        expected = np.sort_complex(quadratic_roots(alpha * cval, gamma))
        # a double root is only resolved to sqrt(eps)
        np.testing.assert_allclose(ev, expected, atol=1e-7 * (1 + abs(gamma) + alpha * abs(cval)))


class TestSpectrum:
    def test_undamped(self, small_interval):
        blk, c = block_for(small_interval, "1", "0", 0.0)
        rep = spectrum(blk)
        assert rep.real_eigenvalues.size == 0
        imag = np.sort(rep.eigenvalues.imag[rep.eigenvalues.imag > 0])
        expected = np.sqrt([discrete_dirichlet(n, 49) for n in range(1, 50)])
        np.testing.assert_allclose(imag, expected, rtol=1e-10)
        assert np.max(np.abs(rep.eigenvalues.real)) < 1e-9

    def test_positive_damping_alpha_3(self, interval_grid):
        blk, _ = block_for(interval_grid, "1", "0", 3.0)
        rep = spectrum(blk, curve_count=3)
        g1 = discrete_dirichlet(1, 199)
        expected = np.sort(quadratic_roots(3.0, g1).real)
        np.testing.assert_allclose(rep.real_eigenvalues, expected, rtol=1e-10)
        np.testing.assert_allclose(expected, [-2.618034, -0.381966], atol=2e-5)
        assert np.all(rep.qep_residuals <= 1e-8) and np.all(rep.cross_check <= 1e-8)

    def test_positive_damping_alpha_1(self, interval_grid):
        blk, _ = block_for(interval_grid, "1", "0", 1.0)
        rep = spectrum(blk)
        assert rep.real_eigenvalues.size == 0
        g1 = discrete_dirichlet(1, 199)
        pair = quadratic_roots(1.0, g1)
        for lam in pair:
            assert np.min(np.abs(rep.eigenvalues - lam)) < 1e-10

    def test_negative_damping_alpha_3(self, interval_grid):
        blk, _ = block_for(interval_grid, "-1", "0", 3.0)
        rep = spectrum(blk)
        g1 = discrete_dirichlet(1, 199)
        np.testing.assert_allclose(rep.real_eigenvalues, np.sort(quadratic_roots(-3.0, g1).real), rtol=1e-10)
        np.testing.assert_allclose(rep.real_eigenvalues, [0.381966, 2.618034], atol=2e-5)

    def test_conjugate_pairs_and_qep(self, small_interval):
        blk, _ = block_for(small_interval, "if(x < 1, -2, 1)", "x", 4.0)
        rep = spectrum(blk)
        ev = rep.eigenvalues
        np.testing.assert_allclose(np.sort_complex(ev), np.sort_complex(ev.conj()), atol=1e-9)
        assert np.all(rep.residuals < 1e-8 * np.abs(blk.dense()).sum(axis=0).max())
        assert np.all(rep.qep_residuals <= 1e-8)

    def test_velocity_component_is_lambda_times_position(self, small_interval):
        blk, _ = block_for(small_interval, "-1", "0", 5.0)
        A = blk.dense()
        vals, vecs = np.linalg.eig(A)
        n = blk.n
        for lam, v in zip(vals, vecs.T):
            assert np.linalg.norm(v[n:] - lam * v[:n]) <= 1e-10 * max(1.0, np.linalg.norm(v))

    def test_real_window_matches_full(self, interval_grid):
        blk, _ = block_for(interval_grid, "if(x < 1.5, 1, -0.5)", "0", 8.0)
        full = spectrum(blk)
        win = spectrum(blk, "real-window", shifts=list(full.real_eigenvalues + 1e-3))
        np.testing.assert_allclose(win.real_eigenvalues, full.real_eigenvalues, rtol=1e-9)

    def test_dense_budget(self, interval_grid):
        blk, _ = block_for(interval_grid, "1", "0", 1.0)
        with pytest.raises(ConfigError):
            spectrum(blk, dense_budget=100)
        with pytest.raises(ConfigError):
            spectrum(blk, "real-window")
        with pytest.raises(ConfigError):
            spectrum(blk, "nonsense")


class TestCrossValidation:
    def table_for(self, grid, c, alpha, k=6):
        g1 = float(np.linalg.eigvalsh(assemble_schrodinger(grid, c).toarray())[0])
        return sample_eigencurves(grid, c, default_mu_range(g1, c.a_norm, alpha), 401, k=k)

    @pytest.mark.parametrize("a, alpha", [("1", 3.0), ("1", 1.0), ("-1", 3.0), ("-1", 5.0)])
    def test_constant_scenarios(self, interval_grid, a, alpha):
        blk, c = block_for(interval_grid, a, "0", alpha)
        t = self.table_for(interval_grid, c, alpha)
        summary = cross_validate(spectrum(blk), t, alpha)
        assert summary.ok and summary.max_distance < 1e-9
        assert len(summary.matches) == summary.n_predicted

    def test_sign_changing_past_threshold(self, interval_grid):
        alpha = 6.0
        blk, c = block_for(interval_grid, "sign(x - pi/2)", "0", alpha)
        t = self.table_for(interval_grid, c, alpha)
        recs = intersect_all(t, alpha)
        positives = [r for r in recs if r.kind == "transversal" and r.lam > 0]
        assert positives
        summary = cross_validate(spectrum(blk), t, alpha, records=recs)
        assert summary.ok
        matched = {round(m["lambda"], 9) for m in summary.matches}
        assert all(round(r.lam, 9) in matched for r in positives)

    def test_undamped_has_no_real_points(self, interval_grid):
        blk, c = block_for(interval_grid, "sign(x - pi/2)", "0", 0.0)
        t = self.table_for(interval_grid, c, 1.0, k=2)
        summary = cross_validate(spectrum(blk), t, 0.0)
        assert summary.ok and summary.n_real == 0 and summary.n_predicted == 0

    def test_extension_request(self, interval_grid):
        blk, c = block_for(interval_grid, "1", "0", 3.0)
        t = sample_eigencurves(interval_grid, c, (-2, 2), 21, k=2)
        with pytest.raises(TableExtensionRequired) as exc:
            cross_validate(spectrum(blk), t, 3.0)
        assert exc.value.mu_values

    def test_mismatch_is_reported(self, interval_grid):
        """Validating against a table of a different operator must fail loudly."""
        alpha = 3.0
        blk, _ = block_for(interval_grid, "-1", "0", alpha)
        other = sample_coefficients(interval_grid, "-1", "0.5")
        t = self.table_for(interval_grid, other, alpha)
        summary = cross_validate(spectrum(blk), t, alpha)
        assert not summary.ok
        directions = {m["direction"] for m in summary.mismatches}
        assert directions == {"block->curves", "curves->block"}
