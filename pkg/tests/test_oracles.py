import numpy as np
import pytest

import malab as M

from conftest import normalized_density


class TestComparisonElliptic:
    def test_constant_lift_passes(self, grid1, theta1, rng):
        from malab.families import random_psh

        u = random_psh(grid1, theta1, rng, margin=0.5, amp=0.5)
        c = 0.4
        v = M.ScalarField(grid1, u.values + c)
        verdict = M.comparison_elliptic(u, v, theta1, 1e-9)
        assert verdict.hypothesis_met
        assert verdict.passed
        assert abs(verdict.worst_margin - c) < 1e-12

    def test_equal_fields_zero_margin(self, grid1, theta1, rng):
        from malab.families import random_psh

        u = random_psh(grid1, theta1, rng, margin=0.5, amp=0.5)
        verdict = M.comparison_elliptic(u, u, theta1, 1e-9)
        assert verdict.passed
        assert verdict.worst_margin == 0.0

    def test_solver_pair_with_ordered_densities(self, grid1, theta1, smooth_density1):
        tol = 1e-9
        bump = np.maximum(0.1 * np.sin(2 * np.pi * grid1.axis_coords(0)), 0.0)
        f_big = M.Density(
            M.ScalarField(grid1, smooth_density1.values + np.broadcast_to(bump, grid1.shape)),
            p=2.0,
        )
        u = M.solve_exponential(theta1, f_big, tol, check_uniqueness=False).solution
        v = M.solve_exponential(theta1, smooth_density1, tol, check_uniqueness=False).solution
        verdict = M.comparison_elliptic(u, v, theta1, 10 * tol)
        assert verdict.hypothesis_met
        assert verdict.worst_margin >= -10 * tol

    def test_negative_control_reports_violation(self, grid1, theta1, rng):
        from malab.families import random_psh

        u = random_psh(grid1, theta1, rng, margin=0.5, amp=0.5)
        v = M.ScalarField(grid1, u.values - 0.2)
        verdict = M.comparison_elliptic(u, v, theta1, 1e-9)
        assert not verdict.passed
        assert not verdict.hypothesis_met
        assert abs(verdict.worst_margin - (-0.2)) <= 1e-6

    def test_verdict_deterministic(self, grid1, theta1, rng):
        from malab.families import random_psh

        u = random_psh(grid1, theta1, rng, margin=0.5, amp=0.5)
        v = M.ScalarField(grid1, u.values + 0.1)
        v1 = M.comparison_elliptic(u, v, theta1, 1e-9)
        v2 = M.comparison_elliptic(u, v, theta1, 1e-9)
        assert v1 == v2


class TestComparisonParabolic:
    @pytest.fixture
    def setting(self, grid1_small, theta1):
        x = grid1_small.axis_coords(0)
        fv = normalized_density(
            grid1_small,
            1.0 + 0.2 * np.broadcast_to(np.sin(2 * np.pi * x), grid1_small.shape),
        )
        f = M.Density(M.ScalarField(grid1_small, fv), p=2.0)
        forcing = M.ForcingSpec("linear_r", slope_r=1.0)
        path = M.FormPath.constant(theta1, 1.0)
        return grid1_small, f, forcing, path

    def test_identical_trajectories(self, setting):
        grid, f, forcing, path = setting
        times = np.linspace(0, 1, 5)
        traj = M.evolve(path, forcing, f, M.ScalarField.zeros(grid), 1.0, 1e-3,
                        sample_times=times)
        verdict = M.comparison_parabolic(traj, traj, forcing, f, path, 1e-8)
        assert verdict.hypothesis_met
        assert verdict.passed
        assert verdict.worst_margin >= 0.0

    def test_constant_lift(self, setting, rng):
        from malab.families import random_psh

        grid, f, forcing, path = setting
        times = np.linspace(0, 1, 5)
        phi0 = random_psh(grid, path.at(0.0), rng, margin=0.4, amp=0.3)
        psi0 = M.ScalarField(grid, phi0.values + 0.3)
        lo = M.evolve(path, forcing, f, phi0, 1.0, 1e-3, sample_times=times)
        hi = M.evolve(path, forcing, f, psi0, 1.0, 1e-3, sample_times=times)
        verdict = M.comparison_parabolic(lo, hi, forcing, f, path, 1e-6)
        assert verdict.hypothesis_met
        assert verdict.passed

    def test_barrier_against_perturbed_solution(self, setting, rng):
        # full semi-stability pipeline: barrier of the f-flow is a
        # subsolution for (G, g) and stays below the g-flow plus the initial
        # gap
        from malab.families import random_psh

        grid, f, forcing, path = setting
        x = grid.axis_coords(0)
        bump = np.maximum(0.01 * np.sin(2 * np.pi * 2 * x), 0.0)
        g = M.Density(
            M.ScalarField(grid, f.values + np.broadcast_to(bump, grid.shape)),
            p=2.0, f_min=f.f_min,
        )
        G = M.ForcingSpec("affine", offset=0.05, slope_r=1.0)
        times = np.linspace(0, 1, 6)
        phi0 = random_psh(grid, path.at(0.0), rng, margin=0.3, amp=0.2)
        traj_f = M.evolve(path, forcing, f, phi0, 1.0, 1e-3, sample_times=times)
        traj_g = M.evolve(path, G, g, phi0, 1.0, 1e-3, sample_times=times)

        theta = path.lower_bound_form()
        consts = M.parabolic_constants(traj_f, forcing, G, g, 2.0, theta=theta)
        assert consts.delta < 0.5
        h, _ = M.build_reference_density(f, g, 2.0)
        rho = M.solve_normalized(theta, h).solution
        barrier = M.parabolic_barrier(traj_f, rho, consts)
        verdict = M.comparison_parabolic(barrier, traj_g, G, g, path, 1e-5)
        assert verdict.hypothesis_met
        assert verdict.passed

    def test_mismatched_times_rejected(self, setting):
        grid, f, forcing, path = setting
        t1 = M.evolve(path, forcing, f, M.ScalarField.zeros(grid), 1.0, 1e-3,
                      sample_times=np.linspace(0, 1, 4))
        t2 = M.evolve(path, forcing, f, M.ScalarField.zeros(grid), 1.0, 1e-3,
                      sample_times=np.linspace(0, 1, 5))
        with pytest.raises(ValueError):
            M.comparison_parabolic(t1, t2, forcing, f, path, 1e-8)


class TestDomination:
    def test_equal_fields(self, grid1, theta1, rng):
        from malab.families import random_psh

        u = random_psh(grid1, theta1, rng, margin=0.4, amp=0.4)
        mask = np.zeros(grid1.shape, dtype=bool)
        mask[: grid1.resolution // 2] = True
        verdict = M.domination_check(u, u, mask, theta1, 1e-9)
        assert verdict.passed and verdict.hypothesis_met

    def test_pointwise_max_construction(self, grid1, theta1, rng):
        from malab.families import random_psh

        for _ in range(5):
            v = random_psh(grid1, theta1, rng, margin=0.4, amp=0.4)
            w = random_psh(grid1, theta1, rng, margin=0.4, amp=0.4)
            u = M.ScalarField(grid1, np.maximum(v.values, w.values))
            mask = np.zeros(grid1.shape, dtype=bool)
            mask[4:20] = True
            verdict = M.domination_check(u, v, mask, theta1, 1e-9)
            assert verdict.hypothesis_met
            assert verdict.passed

    def test_empty_mask_rejected(self, grid1, theta1):
        z = M.ScalarField.zeros(grid1)
        with pytest.raises(ValueError):
            M.domination_check(z, z, np.zeros(grid1.shape, dtype=bool), theta1, 1e-9)

    def test_negative_control(self, grid1, theta1, rng):
        from malab.families import random_psh

        v = random_psh(grid1, theta1, rng, margin=0.4, amp=0.4)
        u = M.ScalarField(grid1, v.values - 0.2)
        mask = np.ones(grid1.shape, dtype=bool)
        verdict = M.domination_check(u, v, mask, theta1, 1e-9)
        assert not verdict.hypothesis_met  # full Monge-Ampere mass sits on {u < v}
        assert not verdict.passed
        assert abs(verdict.worst_margin - (-0.2)) <= 1e-6
