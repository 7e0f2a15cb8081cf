"""Newton-Krylov solver for the exponential Monge-Ampere equation.

Two flavours share one engine:

* ``solve_exponential``: det(g + H(phi))/det(g) = exp(phi) * f, the
  well-posed equation whose zero-order term removes the constant ambiguity;
* ``solve_normalized``: det(g + H(rho))/det(g) = h with the sup-zero
  normalization, the reference problem every stability constant leans on.

The linearization of ``log det(g + H(phi))`` in direction ``psi`` is
``tr((g + H(phi))^{-1} H(psi))``, a variable-coefficient elliptic operator.
Steps are solved by GMRES preconditioned with the exact constant-coefficient
symbol at phi = 0, inverted spectrally; a damped line search keeps
``g + H(phi)`` positive definite throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ConvergenceError, DegenerateReference, MassMismatchError, PositivityError
from .geometry import (
    HermitianForm,
    ScalarField,
    TorusGrid,
    _hessian_multiplier,
    hessian_values,
)
from .ma_ops import (
    Density,
    NormalizedVolume,
    _det_hermitian,
    _min_eig_hermitian,
    is_theta_psh,
    lp_norm,
    positive_part,
)

MAX_NEWTON_ITERATIONS = 60
MIN_DAMPING = 1e-10


def default_tolerance(grid: TorusGrid) -> float:
    return 1e-9 if grid.n == 1 else 1e-7


@dataclass
class SolveReport:
    """Outcome of one Newton solve."""

    solution: ScalarField
    iterations: int
    final_residual_sup: float
    newton_damping_history: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual_sup": self.final_residual_sup,
            "damping_history": list(self.newton_damping_history),
        }


class _NewtonState:
    """Iterate plus its cached Hessian; Hessian linearity keeps the line
    search free of transforms."""

    def __init__(self, theta: HermitianForm, grid: TorusGrid, phi: np.ndarray):
        self.theta = theta
        self.grid = grid
        self.phi = phi.copy()
        self.hess = hessian_values(self.phi, grid)
        self.g_bcast = theta.entries[(np.newaxis,) * len(grid.shape)]
        self.det_g = theta.det()

    def shifted(self, alpha: float = 0.0, dhess: np.ndarray | None = None) -> np.ndarray:
        h = self.hess if dhess is None else self.hess + alpha * dhess
        return self.g_bcast + h

    def accept(self, alpha: float, dphi: np.ndarray, dhess: np.ndarray):
        self.phi = self.phi + alpha * dphi
        self.hess = self.hess + alpha * dhess


def _constant_symbol(theta: HermitianForm, grid: TorusGrid) -> np.ndarray:
    """Fourier symbol of psi -> tr(g^{-1} H(psi)); real and <= 0."""
    ginv = theta.inverse()
    n = grid.n
    sym = np.zeros(grid.shape, dtype=float)
    for j in range(n):
        sym = sym + ginv[j, j].real * _hessian_multiplier(grid, j, j)
    for j in range(n):
        for k in range(j + 1, n):
            cross = ginv[k, j] * _hessian_multiplier(grid, j, k)
            sym = sym + 2.0 * cross.real
    return sym


def _trace_contract(a_inv_weights, hess: np.ndarray, n: int) -> np.ndarray:
    """tr(A^{-1} H) from precomputed pointwise inverse data."""
    if n == 1:
        return hess[..., 0, 0].real * a_inv_weights
    inv_det, a, b, d = a_inv_weights
    return (
        d * hess[..., 0, 0].real
        + a * hess[..., 1, 1].real
        - 2.0 * (b.conj() * hess[..., 0, 1]).real
    ) * inv_det


def _inverse_weights(shifted: np.ndarray, n: int):
    if n == 1:
        return 1.0 / shifted[..., 0, 0].real
    a = shifted[..., 0, 0].real
    d = shifted[..., 1, 1].real
    b = shifted[..., 0, 1]
    det = a * d - (b.real**2 + b.imag**2)
    return (1.0 / det, a, b, d)


class _Engine:
    """Shared Newton-Krylov machinery for both equation flavours."""

    def __init__(self, theta, grid, log_f, tol, zero_order: bool):
        self.theta = theta
        self.grid = grid
        self.log_f = log_f
        self.tol = tol
        self.zero_order = zero_order  # True for the exponential equation
        sym = _constant_symbol(theta, grid)
        if zero_order:
            self.precond_sym = 1.0 / (sym - 1.0)
        else:
            sym_safe = sym.copy()
            flat0 = (0,) * len(grid.shape)
            sym_safe[flat0] = 1.0  # zero mode handled by projection
            self.precond_sym = 1.0 / sym_safe
            self.precond_sym[flat0] = 0.0

    # residuals ---------------------------------------------------------

    def strong_residual(self, state: _NewtonState, shifted=None) -> np.ndarray:
        """ma_density - exp(phi) f  (or ma_density - h)."""
        sh = state.shifted() if shifted is None else shifted
        ma = _det_hermitian(sh) / state.det_g
        if self.zero_order:
            return ma - np.exp(state.phi + self.log_f)
        return ma - np.exp(self.log_f)

    def log_residual(self, state: _NewtonState) -> np.ndarray:
        sh = state.shifted()
        ma = _det_hermitian(sh) / state.det_g
        r = np.log(ma) - self.log_f
        if self.zero_order:
            r = r - state.phi
        else:
            r = r - r.mean()
        return r

    # Newton step ---------------------------------------------------------

    def newton_step(self, state: _NewtonState, r_log: np.ndarray) -> np.ndarray:
        grid = self.grid
        n = grid.n
        weights = _inverse_weights(state.shifted(), n)

        def matvec(v):
            psi = v.reshape(grid.shape)
            if not self.zero_order:
                psi = psi - psi.mean()
            out = _trace_contract(weights, hessian_values(psi, grid), n)
            if self.zero_order:
                out = out - psi
            else:
                out = out - out.mean()
            return out.ravel()

        def psolve(v):
            psi_hat = np.fft.fftn(v.reshape(grid.shape))
            out = np.fft.ifftn(self.precond_sym * psi_hat).real
            return out.ravel()

        npts = grid.npoints
        op = LinearOperator((npts, npts), matvec=matvec, dtype=float)
        pre = LinearOperator((npts, npts), matvec=psolve, dtype=float)
        rhs = -r_log.ravel()
        eta = min(1e-2, max(1e-12, 0.1 * float(np.abs(r_log).max())))
        sol, _ = gmres(op, rhs, rtol=eta, atol=0.0, restart=40, maxiter=200, M=pre)
        dphi = sol.reshape(grid.shape)
        if not self.zero_order:
            dphi = dphi - dphi.mean()
        return dphi

    # driver -------------------------------------------------------------

    def solve(self, phi0: np.ndarray) -> tuple[np.ndarray, int, float, list]:
        grid = self.grid
        state = _NewtonState(self.theta, grid, phi0)
        if float(_min_eig_hermitian(state.shifted()).min()) <= 0.0:
            raise PositivityError("initial guess is not strictly plurisubharmonic")

        damping: list[float] = []
        history: list[float] = []
        res_sup = float(np.abs(self.strong_residual(state)).max())
        history.append(res_sup)
        iterations = 0
        while res_sup > self.tol:
            if iterations >= MAX_NEWTON_ITERATIONS:
                raise ConvergenceError(
                    f"Newton did not converge in {MAX_NEWTON_ITERATIONS} iterations "
                    f"(residual {res_sup:.3e})",
                    history,
                )
            r_log = self.log_residual(state)
            dphi = self.newton_step(state, r_log)
            dhess = hessian_values(dphi, grid)

            alpha = 1.0
            positivity_ok = False
            while alpha >= MIN_DAMPING:
                sh = state.shifted(alpha, dhess)
                if float(_min_eig_hermitian(sh).min()) > 0.0:
                    positivity_ok = True
                    trial_phi = state.phi + alpha * dphi
                    ma = _det_hermitian(sh) / state.det_g
                    if self.zero_order:
                        trial_res = ma - np.exp(trial_phi + self.log_f)
                    else:
                        trial_res = ma - np.exp(self.log_f)
                    trial_sup = float(np.abs(trial_res).max())
                    if trial_sup <= (1.0 - 0.25 * alpha) * res_sup or trial_sup <= self.tol:
                        break
                alpha *= 0.5
            else:
                if not positivity_ok:
                    raise PositivityError(
                        "line search could not restore positivity of g + H(phi)"
                    )
                raise ConvergenceError(
                    f"Newton stagnated (damping underflow at residual {res_sup:.3e})",
                    history,
                )

            state.accept(alpha, dphi, dhess)
            damping.append(alpha)
            res_sup = trial_sup
            history.append(res_sup)
            iterations += 1

        return state.phi, iterations, res_sup, damping


def solve_exponential(
    theta: HermitianForm,
    f: Density,
    tol: float | None = None,
    *,
    initial_guess: ScalarField | None = None,
    check_uniqueness: bool = True,
) -> SolveReport:
    """Solve ``ma_density(theta, phi) = exp(phi) f`` to sup-norm ``tol``.

    The accepted solution is strictly theta-psh. The continuum solution is
    unique (comparison principle); the discrete analogue is enforced by
    re-running from a shifted initial guess and requiring agreement within
    ``10 tol``, unless ``check_uniqueness`` is disabled.
    """
    grid = f.grid
    if tol is None:
        tol = default_tolerance(grid)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    log_f = np.log(f.values)
    engine = _Engine(theta, grid, log_f, tol, zero_order=True)
    phi0 = initial_guess.values if initial_guess is not None else np.zeros(grid.shape)
    phi, iters, res_sup, damping = engine.solve(phi0)

    if check_uniqueness:
        alt0 = phi0 + 0.5
        phi_alt, _, _, _ = engine.solve(alt0)
        drift = float(np.abs(phi - phi_alt).max())
        if drift > 10.0 * tol:
            raise ConvergenceError(
                f"solutions from two initial guesses differ by {drift:.3e} "
                f"(> 10 tol = {10 * tol:.3e})",
                [res_sup],
            )

    solution = ScalarField(grid, phi)
    if not is_theta_psh(theta, solution, 1e-8):
        raise PositivityError("converged iterate failed the psh acceptance check")
    return SolveReport(solution, iters, res_sup, damping)


def solve_normalized(
    theta: HermitianForm,
    h: ScalarField,
    tol: float | None = None,
) -> SolveReport:
    """Solve ``ma_density(theta, rho) = h`` with ``max(rho) = 0``.

    ``h`` must be strictly positive with unit mass to 1e-10 (compatibility
    with the unit-volume normalization). The Newton iterate is mean-pinned;
    the sup-zero normalization is applied after convergence, which leaves
    the Monge-Ampere density unchanged.
    """
    grid = h.grid
    if tol is None:
        tol = default_tolerance(grid)
    dV = NormalizedVolume(grid)
    mass = dV.integrate(h)
    if abs(mass - 1.0) > 1e-10:
        raise MassMismatchError(
            f"reference density has mass {mass:.12f}, expected 1 within 1e-10"
        )
    if h.min() <= 0:
        raise ValueError("reference density must be strictly positive on the grid")

    engine = _Engine(theta, grid, np.log(h.values), tol, zero_order=False)
    rho, iters, res_sup, damping = engine.solve(np.zeros(grid.shape))
    rho = rho - rho.max()
    solution = ScalarField(grid, rho)
    if not is_theta_psh(theta, solution, 1e-8):
        raise PositivityError("converged iterate failed the psh acceptance check")
    return SolveReport(solution, iters, res_sup, damping)


def build_reference_density(
    f: Density, g: Density, p: float
) -> tuple[ScalarField, float]:
    """Unit-mass reference density built from the positive part of g - f.

    Returns ``(h, a)`` with ``h = a + (g-f)_+ / ||(g-f)_+||_p`` and
    ``a = 1 - ||(g-f)_+||_1 / ||(g-f)_+||_p`` in [0, 1]. The L^p norm of h
    is at most 2. Raises ``DegenerateReference`` when the gap vanishes, in
    which case callers fall back to the plain comparison argument.
    """
    if f.grid != g.grid:
        raise ValueError("densities live on different grids")
    dV = NormalizedVolume(f.grid)
    gap = positive_part(ScalarField(f.grid, g.values - f.values))
    norm_p = lp_norm(gap, p, dV)
    if norm_p == 0.0:
        raise DegenerateReference("(g - f)_+ vanishes; g <= f everywhere")
    norm_1 = lp_norm(gap, 1.0, dV)
    a = 1.0 - norm_1 / norm_p
    a = min(max(a, 0.0), 1.0)
    h = ScalarField(f.grid, a + gap.values / norm_p)
    return h, a
