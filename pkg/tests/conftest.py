import numpy as np
import pytest

import malab as M

# ---------------------------------------------------------------------------
# independent oracles (finite differences, brute-force scans)
# ---------------------------------------------------------------------------

# 8th-order central first-derivative stencil; periodic via np.roll
_FD8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_FD8_OFFSETS = np.arange(-4, 5)


def fd_first_derivative(values, axis, h):
    out = np.zeros_like(values)
    for c, off in zip(_FD8, _FD8_OFFSETS):
        if c != 0.0:
            out += c * np.roll(values, -off, axis=axis)
    return out / h


def fd_complex_hessian_entry(values, grid, j, k):
    """Finite-difference oracle for the (j, k) complex Hessian entry."""
    h = grid.spacing
    dxj = fd_first_derivative(values, 2 * j, h)
    dyj = fd_first_derivative(values, 2 * j + 1, h)
    # (d/dx_j - i d/dy_j)(d/dx_k + i d/dy_k) / 4
    dzj = 0.5 * (dxj - 1j * dyj)
    re = fd_first_derivative(dzj.real, 2 * k, h) + 1j * fd_first_derivative(dzj.imag, 2 * k, h)
    im = fd_first_derivative(dzj.real, 2 * k + 1, h) + 1j * fd_first_derivative(dzj.imag, 2 * k + 1, h)
    return 0.5 * (re + 1j * im)


def brute_force_form_distance(omega, theta, t_hi=5.0, steps=200001):
    """Linear scan for the smallest t with exp(-t) omega <= theta <= exp(t) omega."""
    ts = np.linspace(0.0, t_hi, steps)
    for t in ts:
        lo = theta.entries - np.exp(-t) * omega.entries
        hi = np.exp(t) * omega.entries - theta.entries
        if np.linalg.eigvalsh(lo)[0] >= -1e-13 and np.linalg.eigvalsh(hi)[0] >= -1e-13:
            return float(t)
    raise AssertionError("scan bracket too small")


def residual_sup(theta, phi, f_values):
    """Independent evaluation of sup |ma_density - exp(phi) f|."""
    ma = M.ma_density(theta, phi).values
    return float(np.abs(ma - np.exp(phi.values) * f_values).max())


def normalized_density(grid, values):
    vals = np.asarray(values, dtype=float)
    vals = vals / (vals.sum() / grid.npoints)
    return vals


# ---------------------------------------------------------------------------
# fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def grid1():
    return M.TorusGrid(1, 32)


@pytest.fixture
def grid1_small():
    return M.TorusGrid(1, 16)


@pytest.fixture
def grid2():
    return M.TorusGrid(2, 16)


@pytest.fixture
def grid2_small():
    return M.TorusGrid(2, 8)


@pytest.fixture
def theta1():
    return M.HermitianForm.identity(1)


@pytest.fixture
def theta2():
    return M.HermitianForm(np.array([[1.2, 0.2 + 0.1j], [0.2 - 0.1j, 1.0]]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def smooth_density1(grid1):
    x = grid1.axis_coords(0)
    y = grid1.axis_coords(1)
    vals = np.exp(0.3 * np.broadcast_to(np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), grid1.shape))
    return M.Density(M.ScalarField(grid1, normalized_density(grid1, vals)), p=2.0)


@pytest.fixture
def smooth_density2(grid2):
    X = grid2.meshgrid()
    vals = np.exp(0.2 * np.sin(2 * np.pi * X[0]) * np.cos(2 * np.pi * X[3]))
    return M.Density(M.ScalarField(grid2, normalized_density(grid2, vals)), p=2.0)
