"""Complex Monge-Ampere operator and the shared measure-theoretic vocabulary.

The discrete Monge-Ampere measure of a potential ``phi`` against a flat form
``theta`` (matrix ``g``) is the pointwise determinant ratio
``det(g + H(phi)) / det(g)`` taken against the normalized volume ``dV`` of
total mass one. With this bookkeeping every form has unit volume, which is
the normalization all the stability constants assume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import HermitianField, HermitianForm, ScalarField, TorusGrid, complex_hessian


@dataclass(frozen=True)
class NormalizedVolume:
    """Uniform-weight quadrature with total discrete mass exactly one.

    On the periodic torus the trapezoidal rule has equal weights and is
    exact for band-limited integrands, keeping quadrature consistent with
    the spectral calculus.
    """

    grid: TorusGrid

    @property
    def weight(self) -> float:
        return 1.0 / self.grid.npoints

    def integrate(self, h) -> float:
        vals = h.values if isinstance(h, ScalarField) else np.asarray(h)
        return float(vals.sum() * self.weight)


@dataclass(frozen=True)
class Density:
    """Strictly positive density with a reference integrability exponent p > 1.

    The continuum theory allows densities that merely lie in L^p and may
    vanish; the Newton linearization degenerates where the density does, so
    the lab works above a positive floor ``f_min``.
    """

    field: ScalarField
    p: float
    f_min: float = 1e-6

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError(f"integrability exponent must exceed 1, got {self.p}")
        if self.f_min <= 0:
            raise ValueError("density floor must be positive")
        if self.field.min() < self.f_min:
            raise ValueError(
                f"density dips below its floor: min {self.field.min():.3e} < "
                f"f_min {self.f_min:.3e}"
            )

    @property
    def grid(self) -> TorusGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


# ---------------------------------------------------------------------------
# determinant helpers (n <= 2, closed forms)
# ---------------------------------------------------------------------------


def _det_hermitian(stack: np.ndarray) -> np.ndarray:
    """Determinant of a stack of 1x1 or 2x2 Hermitian matrices (real output)."""
    n = stack.shape[-1]
    if n == 1:
        return stack[..., 0, 0].real
    a = stack[..., 0, 0].real
    d = stack[..., 1, 1].real
    b = stack[..., 0, 1]
    return a * d - (b.real**2 + b.imag**2)


def _min_eig_hermitian(stack: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a stack of 1x1 or 2x2 Hermitian matrices."""
    n = stack.shape[-1]
    if n == 1:
        return stack[..., 0, 0].real
    a = stack[..., 0, 0].real
    d = stack[..., 1, 1].real
    b = stack[..., 0, 1]
    half_tr = 0.5 * (a + d)
    rad = np.sqrt((0.5 * (a - d)) ** 2 + b.real**2 + b.imag**2)
    return half_tr - rad


def _shifted_hessian(theta: HermitianForm, hess: HermitianField) -> np.ndarray:
    return theta.entries[(np.newaxis,) * len(hess.grid.shape)] + hess.values


def ma_density(theta: HermitianForm, phi: ScalarField) -> ScalarField:
    """Density of the Monge-Ampere measure of ``phi`` against ``dV``.

    Pointwise ``det(g + H(phi)) / det(g)``. Strictly positive whenever
    ``theta + dd^c phi > 0``; may go negative for non-psh input, which is
    left to the caller to interpret.
    """
    if theta.n != phi.grid.n:
        raise ValueError("form dimension does not match the grid")
    hess = complex_hessian(phi)
    det = _det_hermitian(_shifted_hessian(theta, hess))
    return ScalarField(phi.grid, det / theta.det())


def ma_density_from_hessian(theta: HermitianForm, hess: HermitianField) -> np.ndarray:
    """Raw determinant-ratio array for callers that already hold the Hessian."""
    return _det_hermitian(_shifted_hessian(theta, hess)) / theta.det()


def is_theta_psh(theta: HermitianForm, phi: ScalarField, tol: float) -> bool:
    """True iff g + H(phi) has smallest eigenvalue >= -tol at every point."""
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    return min_eig_shifted(theta, phi) >= -tol


def min_eig_shifted(theta: HermitianForm, phi: ScalarField) -> float:
    """Smallest eigenvalue of g + H(phi) over the grid."""
    hess = complex_hessian(phi)
    return float(_min_eig_hermitian(_shifted_hessian(theta, hess)).min())


def lp_norm(h: ScalarField, p: float, dV: NormalizedVolume) -> float:
    """L^p norm against the normalized volume; monotone in p."""
    if p < 1:
        raise ValueError(f"exponent must satisfy p >= 1, got {p}")
    return float(dV.integrate(np.abs(h.values) ** p) ** (1.0 / p))


def oscillation(phi: ScalarField) -> float:
    """sup - inf of a field; zero iff constant."""
    return phi.max() - phi.min()


def positive_part(h: ScalarField) -> ScalarField:
    """Pointwise max(h, 0)."""
    return ScalarField(h.grid, np.maximum(h.values, 0.0))
