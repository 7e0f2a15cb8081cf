import numpy as np
import pytest

import malab as M
from malab.geometry import hessian_values

from conftest import brute_force_form_distance, fd_complex_hessian_entry


class TestTorusGrid:
    def test_invariants(self):
        g = M.TorusGrid(2, 16)
        assert g.npoints == 16**4
        assert g.spacing == 1.0 / 16

    @pytest.mark.parametrize("n,res", [(1, 7), (1, 9), (1, 4), (3, 16), (0, 16)])
    def test_rejects_bad_parameters(self, n, res):
        with pytest.raises(ValueError):
            M.TorusGrid(n, res)


class TestScalarField:
    def test_rejects_nan(self, grid1):
        vals = np.zeros(grid1.shape)
        vals[0, 0] = np.nan
        with pytest.raises(ValueError):
            M.ScalarField(grid1, vals)

    def test_rejects_wrong_count(self, grid1):
        with pytest.raises(ValueError):
            M.ScalarField(grid1, np.zeros(17))

    def test_values_frozen(self, grid1):
        f = M.ScalarField.zeros(grid1)
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0


class TestHermitianForm:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            M.HermitianForm(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            M.HermitianForm(np.array([[1.0, 0], [0, -0.5]]))


class TestComplexHessian:
    def test_constant_gives_zero(self, grid1):
        H = M.complex_hessian(M.ScalarField.constant(grid1, 3.7))
        assert np.abs(H.values).max() < 1e-12

    def test_cosine_matches_quarter_laplacian(self, grid1):
        # phi = cos(2 pi x): H11 = Lap(phi)/4 = -pi^2 cos(2 pi x)
        x = grid1.axis_coords(0)
        phi = M.ScalarField(grid1, np.broadcast_to(np.cos(2 * np.pi * x), grid1.shape).copy())
        H = M.complex_hessian(phi)
        expected = -np.pi**2 * np.broadcast_to(np.cos(2 * np.pi * x), grid1.shape)
        assert np.abs(H.entry(0, 0).real - expected).max() < 1e-11

    def test_offdiagonal_matches_finite_differences(self):
        grid = M.TorusGrid(2, 32)
        X = grid.meshgrid()
        phi = M.ScalarField(grid, np.sin(2 * np.pi * X[0]) * np.sin(2 * np.pi * X[3]))
        H = M.complex_hessian(phi)
        oracle = fd_complex_hessian_entry(phi.values, grid, 0, 1)
        assert np.abs(H.entry(0, 1) - oracle).max() <= 1e-6

    def test_hermitian_at_every_point(self, grid2, rng):
        from malab.families import random_bandlimited

        phi = random_bandlimited(grid2, rng, amp=1.0)
        H = M.complex_hessian(phi)
        assert H.hermitian_defect() == 0.0

    def test_linearity(self, grid1, rng):
        from malab.families import random_bandlimited

        a, b = 1.7, -0.4
        u = random_bandlimited(grid1, rng, amp=1.0)
        v = random_bandlimited(grid1, rng, amp=1.0)
        combo = M.ScalarField(grid1, a * u.values + b * v.values)
        lhs = M.complex_hessian(combo).values
        rhs = a * M.complex_hessian(u).values + b * M.complex_hessian(v).values
        scale = max(np.abs(rhs).max(), 1.0)
        assert np.abs(lhs - rhs).max() / scale < 1e-12

    def test_trace_integrates_to_zero(self, grid2, theta2, rng):
        from malab.families import random_bandlimited

        phi = random_bandlimited(grid2, rng, amp=0.8)
        H = hessian_values(phi.values, grid2)
        ginv = theta2.inverse()
        trace = np.einsum("kj,...jk->...", ginv, H).real
        assert abs(trace.mean()) < 1e-10


class TestFormDistance:
    def test_identity(self, theta2):
        assert M.form_distance(theta2, theta2) == 0.0

    def test_doubling(self, theta1):
        d = M.form_distance(theta1.scaled(2.0), theta1)
        assert abs(d - np.log(2.0)) < 1e-12

    def test_symmetry_and_brute_force(self, rng):
        for _ in range(5):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m1 = M.HermitianForm(a @ a.conj().T + 0.5 * np.eye(2))
            b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            m2 = M.HermitianForm(b @ b.conj().T + 0.5 * np.eye(2))
            d = M.form_distance(m1, m2)
            assert abs(d - M.form_distance(m2, m1)) < 1e-12
            assert abs(d - brute_force_form_distance(m1, m2)) < 1e-4

    def test_triangle_inequality(self, rng):
        forms = []
        for _ in range(6):
            a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            forms.append(M.HermitianForm(a @ a.conj().T + 0.4 * np.eye(2)))
        for i in range(len(forms)):
            for j in range(len(forms)):
                for k in range(len(forms)):
                    dij = M.form_distance(forms[i], forms[j])
                    dik = M.form_distance(forms[i], forms[k])
                    dkj = M.form_distance(forms[k], forms[j])
                    assert dij <= dik + dkj + 1e-10


class TestInterpolateFamily:
    def test_endpoints(self, theta1, theta2):
        omega = M.HermitianForm(2 * np.eye(1))
        assert M.interpolate_family(theta1, omega, 0.0) == theta1
        assert M.interpolate_family(theta1, omega, 1.0) == omega

    def test_midpoint_scaling(self, theta1):
        mid = M.interpolate_family(theta1, theta1.scaled(2.0), 0.5)
        assert np.allclose(mid.entries, 1.5 * np.eye(1))

    def test_rejects_out_of_range(self, theta1):
        with pytest.raises(ValueError):
            M.interpolate_family(theta1, theta1, 1.5)

    def test_b1_bound_brackets_sampled_derivative(self):
        omega0 = M.HermitianForm(np.array([[1.0, 0.1], [0.1, 2.0]]))
        omega1 = M.HermitianForm(np.array([[1.5, -0.2], [-0.2, 1.2]]))
        path = M.FormPath(omega0, omega1, 2.0)
        b1 = path.b1_bound()
        from scipy.linalg import eigh

        D = (omega1.entries - omega0.entries) / 2.0
        for s in np.linspace(0, 1, 41):
            form = M.interpolate_family(omega0, omega1, s)
            lam = eigh(D, form.entries, eigvals_only=True)
            assert np.abs(lam).max() <= b1 + 1e-12


class TestFieldFiles:
    def test_round_trip_bit_exact(self, tmp_path, grid2_small, rng):
        from malab.families import random_bandlimited

        phi = random_bandlimited(grid2_small, rng, amp=1.3)
        path = tmp_path / "field.fld"
        M.write_field(path, phi)
        back = M.read_field(path)
        assert back.grid == grid2_small
        assert np.array_equal(back.values, phi.values)
        # header is ASCII followed by raw little-endian payload
        raw = path.read_bytes()
        assert raw.startswith(b"MAFLD1 n=2 res=8\n")

    def test_rejects_truncated(self, tmp_path, grid1_small):
        path = tmp_path / "field.fld"
        M.write_field(path, M.ScalarField.zeros(grid1_small))
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError):
            M.read_field(path)
