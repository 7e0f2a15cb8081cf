import numpy as np
import pytest

import malab as M
from malab.errors import DegenerateReference, MassMismatchError

from conftest import normalized_density, residual_sup


class TestSolveExponential:
    def test_unit_density_gives_zero(self, grid1, theta1):
        f = M.Density(M.ScalarField.constant(grid1, 1.0), p=2.0)
        rep = M.solve_exponential(theta1, f)
        assert np.abs(rep.solution.values).max() <= 1e-8
        assert rep.final_residual_sup <= 1e-9

    def test_shift_identity(self, grid1, theta1, smooth_density1):
        # replacing f by e^c f shifts the solution by exactly -c
        c = 0.37
        rep = M.solve_exponential(theta1, smooth_density1)
        shifted = M.Density(
            M.ScalarField(grid1, np.exp(c) * smooth_density1.values), p=2.0
        )
        rep_c = M.solve_exponential(theta1, shifted)
        assert np.abs(rep_c.solution.values - (rep.solution.values - c)).max() < 1e-7

    def test_residual_oracle(self, grid1, theta1, smooth_density1):
        rep = M.solve_exponential(theta1, smooth_density1, tol=1e-9)
        # independent evaluation of both sides of the equation
        assert residual_sup(theta1, rep.solution, smooth_density1.values) <= 1e-9
        assert M.is_theta_psh(theta1, rep.solution, 1e-8)

    def test_n2_residual_oracle(self, grid2, theta2, smooth_density2):
        rep = M.solve_exponential(theta2, smooth_density2, tol=1e-7)
        assert residual_sup(theta2, rep.solution, smooth_density2.values) <= 1e-7

    def test_monotone_comparison(self, grid1, theta1, smooth_density1):
        # denser right-hand side pushes the solution down
        tol = 1e-9
        bump = np.maximum(
            0.2 * np.sin(2 * np.pi * 2 * grid1.axis_coords(0)), 0.0
        )
        f_big = M.Density(
            M.ScalarField(grid1, smooth_density1.values + np.broadcast_to(bump, grid1.shape)),
            p=2.0,
        )
        lo = M.solve_exponential(theta1, smooth_density1, tol)
        hi = M.solve_exponential(theta1, f_big, tol)
        assert np.all(hi.solution.values <= lo.solution.values + 10 * tol)

    def test_newton_quadratic_tail(self, grid1, theta1):
        # drive undamped Newton steps by hand and check that once the
        # sup-residual is below 1e-3 it contracts at least quadratically
        from malab.elliptic import _Engine, _NewtonState
        from malab.geometry import hessian_values

        x = grid1.axis_coords(0)
        vals = np.exp(1.0 * np.broadcast_to(np.sin(2 * np.pi * x), grid1.shape))
        vals = normalized_density(grid1, vals)
        engine = _Engine(theta1, grid1, np.log(vals), 1e-12, zero_order=True)

        state = _NewtonState(theta1, grid1, np.zeros(grid1.shape))
        residuals = []
        for _ in range(12):
            r_sup = float(np.abs(engine.strong_residual(state)).max())
            residuals.append(r_sup)
            if r_sup < 1e-14:
                break
            step = engine.newton_step(state, engine.log_residual(state))
            state.accept(1.0, step, hessian_values(step, grid1))
        tail = [r for r in residuals if r < 1e-3]
        assert len(tail) >= 2
        for a, b in zip(tail, tail[1:]):
            if a > 1e-13:
                assert b <= max(50.0 * a * a, 1e-13)

    def test_uniqueness_across_initial_guesses(self, grid1, theta1, smooth_density1):
        rep = M.solve_exponential(theta1, smooth_density1, check_uniqueness=True)
        assert rep.final_residual_sup <= 1e-9

    def test_report_json_keys(self, grid1, theta1, smooth_density1):
        rep = M.solve_exponential(theta1, smooth_density1, check_uniqueness=False)
        d = rep.to_json_dict()
        assert set(d) == {"iterations", "final_residual_sup", "damping_history"}


class TestSolveNormalized:
    def test_unit_density(self, grid1, theta1):
        rep = M.solve_normalized(theta1, M.ScalarField.constant(grid1, 1.0))
        assert np.abs(rep.solution.values).max() <= 1e-9

    def test_sine_density(self, grid1, theta1):
        x = grid1.axis_coords(0)
        h = M.ScalarField(
            grid1, 1.0 + 0.2 * np.broadcast_to(np.sin(2 * np.pi * x), grid1.shape)
        )
        rep = M.solve_normalized(theta1, h, tol=1e-9)
        assert rep.solution.values.max() == 0.0
        assert np.abs(M.ma_density(theta1, rep.solution).values - h.values).max() <= 1e-9
        assert M.is_theta_psh(theta1, rep.solution, 1e-8)

    def test_translation_equivariance(self, grid1, theta1):
        x = grid1.axis_coords(0)
        base = 1.0 + 0.2 * np.broadcast_to(np.sin(2 * np.pi * x), grid1.shape)
        shift = 5  # grid cells
        rolled = np.roll(base, shift, axis=0)
        rho = M.solve_normalized(theta1, M.ScalarField(grid1, base.copy())).solution
        rho_rolled = M.solve_normalized(theta1, M.ScalarField(grid1, rolled)).solution
        assert np.abs(np.roll(rho.values, shift, axis=0) - rho_rolled.values).max() <= 1e-8

    def test_mass_mismatch_rejected(self, grid1, theta1):
        h = M.ScalarField.constant(grid1, 1.01)
        with pytest.raises(MassMismatchError):
            M.solve_normalized(theta1, h)


class TestBuildReferenceDensity:
    def test_constant_gap(self, grid1):
        f = M.Density(M.ScalarField.constant(grid1, 1.0), p=2.0)
        g = M.Density(M.ScalarField.constant(grid1, 1.5), p=2.0)
        h, a = M.build_reference_density(f, g, 2.0)
        assert a == 0.0
        assert np.abs(h.values - 1.0).max() < 1e-12

    def test_ordered_densities_degenerate(self, grid1):
        f = M.Density(M.ScalarField.constant(grid1, 2.0), p=2.0)
        g = M.Density(M.ScalarField.constant(grid1, 1.0), p=2.0)
        with pytest.raises(DegenerateReference):
            M.build_reference_density(f, g, 2.0)

    def test_quadrature_oracle(self, grid1, rng):
        from malab.families import random_density

        dV = M.NormalizedVolume(grid1)
        f = random_density(grid1, rng, p=2.0, amp=0.3)
        g = random_density(grid1, rng, p=2.0, amp=0.3)
        h, a = M.build_reference_density(f, g, 2.0)
        gap = np.maximum(g.values - f.values, 0.0)
        norm_p = float((np.mean(gap**2)) ** 0.5)
        norm_1 = float(np.mean(gap))
        assert abs(a - (1.0 - norm_1 / norm_p)) < 1e-12
        assert 0.0 <= a <= 1.0
        assert abs(dV.integrate(h) - 1.0) <= 1e-10
        assert M.lp_norm(h, 2.0, dV) <= 2.0 + 1e-12
        # the normalized problem accepts this right-hand side
        rep = M.solve_normalized(M.HermitianForm.identity(1), h)
        assert rep.solution.values.max() == 0.0
