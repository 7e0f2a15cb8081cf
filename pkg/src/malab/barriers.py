"""Explicit sub/supersolution constructions and their constants.

Every stability estimate in the lab is proved by tilting a solution into a
barrier: a convex combination with a reference potential plus explicitly
computed constant shifts, chosen so the result is a sub- or supersolution
for the perturbed data. This module builds those barriers exactly, with all
constants assembled from the formulas the estimates prescribe.

One bookkeeping wrinkle is recorded here once: Monge-Ampere densities in
this lab are determinant ratios normalized per form (every form has unit
volume). When two different forms enter one inequality, the ratio of their
determinants appears as an extra factor; the constructors below fold that
factor into the constant shifts (``d_min`` arguments). For a fixed form the
factor is one and the formulas reduce to the plain assemblies.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import CoarseBranchRequired
from .geometry import FormPath, HermitianForm, ScalarField
from .ma_ops import Density, NormalizedVolume, lp_norm, positive_part
from .parabolic import FlowTrajectory, ForcingSpec, forcing_gap_sup

NAN = float("nan")


@dataclass
class BarrierConstants:
    """Constants of the barrier assemblies, serialized next to experiment
    manifests. Fields not used by a particular construction stay NaN."""

    eps: float = NAN
    delta: float = NAN
    B: float = NAN
    M: float = NAN
    M0: float = NAN
    M1: float = NAN
    M2: float = NAN
    N: float = NAN
    m0: float = NAN
    m1: float = NAN
    C0: float = NAN
    C1: float = NAN
    C2: float = NAN
    C3: float = NAN
    C4: float = NAN
    a_lower: float = NAN
    A_upper: float = NAN
    lipschitz_L: float = NAN
    gap_pos_p: float = NAN
    gap_sup_interval: float = NAN
    gap_sup_global: float = NAN
    det_correction: float = 1.0

    def to_json_dict(self) -> dict:
        out = {}
        for key, val in asdict(self).items():
            out[key] = None if isinstance(val, float) and math.isnan(val) else val
        return out


# ---------------------------------------------------------------------------
# elliptic barrier
# ---------------------------------------------------------------------------


def _require_normalized_reference(rho: ScalarField, tol: float = 1e-9) -> None:
    if rho.max() > tol or rho.max() < -tol:
        raise ValueError("reference potential must satisfy sup rho = 0")


def elliptic_barrier(phi: ScalarField, rho: ScalarField, eps: float) -> ScalarField:
    """Tilted convex combination ``(1-eps) phi + eps rho - C2 eps + n log(1-eps)``.

    With ``C2 = -inf phi`` the result lies below ``phi`` pointwise and is a
    subsolution for the perturbed density whenever ``eps`` carries the
    positive-part gap. Requires ``0 <= eps < 1`` and ``rho <= 0`` with
    ``sup rho = 0``.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    _require_normalized_reference(rho)
    if eps == 0.0:
        return phi
    n = phi.grid.n
    c2 = -phi.min()
    vals = (
        (1.0 - eps) * phi.values
        + eps * rho.values
        - c2 * eps
        + n * math.log(1.0 - eps)
    )
    return ScalarField(phi.grid, vals)


def varying_form_rescale(psi: ScalarField, c: float) -> ScalarField:
    """Shrink a potential so it stays psh for a nearby smaller form.

    Returns ``(1-c) psi + n log(1-c) + c inf psi`` for ``0 <= c <= 1/2``;
    theta-psh whenever ``(1-c) omega <= theta``.
    """
    if not 0.0 <= c <= 0.5:
        raise ValueError(f"rescale parameter must lie in [0, 1/2], got {c}")
    if c == 0.0:
        return psi
    n = psi.grid.n
    vals = (1.0 - c) * psi.values + n * math.log(1.0 - c) + c * psi.min()
    return ScalarField(psi.grid, vals)


# ---------------------------------------------------------------------------
# parabolic barrier constants
# ---------------------------------------------------------------------------


def parabolic_constants(
    traj: FlowTrajectory,
    forcing_f: ForcingSpec,
    forcing_g: ForcingSpec,
    g: Density,
    p: float,
    *,
    theta: HermitianForm | None = None,
    det_correction: float | None = None,
) -> BarrierConstants:
    """Assemble the constants of the parabolic barrier for data (G, g).

    Extrema ``m0, m1, M0, M1`` are the exact discrete extrema of the sampled
    trajectory. The forcing-gap term uses the compact interval spanned by
    the trajectory (the sup over all real r is reported alongside and can be
    infinite). ``delta`` carries the per-form determinant correction.
    """
    grid = traj.grid
    n = grid.n
    T = float(traj.times[-1])
    m0 = traj.inf_phi()
    m1 = traj.inf_phi_dot()
    M0 = traj.sup_phi()
    M1 = traj.sup_phi_dot()
    L = max(forcing_f.lipschitz_L, forcing_g.lipschitz_L)

    gap_int = forcing_gap_sup(
        forcing_f, forcing_g, grid, T, r_interval=(m0, M0), positive_part_only=True
    )
    gap_glob = forcing_gap_sup(
        forcing_f, forcing_g, grid, T, r_interval=None, positive_part_only=True
    )
    N = forcing_g.sup_on(T, M0)
    M2 = N + max(M1, L * abs(M0))
    B = max(L * max(-m0, 0.0) - m1 + 2.0 * n * math.log(2.0), 0.0)

    if det_correction is None:
        det_correction = 1.0
        if theta is not None and not (
            traj.form_path.is_constant
            and np.array_equal(traj.form_path.omega0.entries, theta.entries)
        ):
            _, logdet_max = traj.form_path.log_det_range()
            det_correction = math.exp(math.log(theta.det()) - logdet_max)
    det_correction = min(det_correction, 1.0)

    dV = NormalizedVolume(grid)
    gap_pos = lp_norm(
        positive_part(ScalarField(grid, g.values - traj.density.values)), p, dV
    )
    delta = gap_pos ** (1.0 / n) * math.exp(M2 / n) / det_correction ** (1.0 / n)

    return BarrierConstants(
        delta=delta,
        B=B,
        M=gap_int,
        M0=M0,
        M1=M1,
        M2=M2,
        N=N,
        m0=m0,
        m1=m1,
        lipschitz_L=L,
        gap_pos_p=gap_pos,
        gap_sup_interval=gap_int,
        gap_sup_global=gap_glob,
        det_correction=det_correction,
    )


def parabolic_barrier(
    traj: FlowTrajectory, rho: ScalarField, constants: BarrierConstants
) -> FlowTrajectory:
    """Barrier trajectory ``(1-d) phi + d rho + n log(1-d) - B d t - M t``.

    ``rho`` is the normalized reference potential for the positive-part gap.
    The stored time derivative is the exact derivative of the formula, so
    snapshot classification inherits no scheme error. Raises
    ``CoarseBranchRequired`` when ``delta >= 1/2`` (callers then use the
    coarse constant instead).
    """
    _require_normalized_reference(rho)
    delta = constants.delta
    if math.isnan(delta):
        raise ValueError("constants.delta is not set")
    if delta >= 0.5:
        raise CoarseBranchRequired(delta)
    n = traj.grid.n
    B, M = constants.B, constants.M
    log_term = n * math.log(1.0 - delta)
    snaps, dots = [], []
    for i in range(len(traj)):
        t = float(traj.times[i])
        phi = traj.snapshots[i].values
        dot = traj.phi_dot[i].values
        snaps.append(
            ScalarField(
                traj.grid,
                (1.0 - delta) * phi + delta * rho.values + log_term - B * delta * t - M * t,
            )
        )
        dots.append(ScalarField(traj.grid, (1.0 - delta) * dot - B * delta - M))
    return FlowTrajectory(
        grid=traj.grid,
        times=traj.times.copy(),
        snapshots=snaps,
        phi_dot=dots,
        form_path=traj.form_path,
        forcing=traj.forcing,
        density=traj.density,
        checkpoint_dts=list(traj.checkpoint_dts),
        steps=traj.steps,
        rejections=traj.rejections,
    )


# ---------------------------------------------------------------------------
# uniform sandwich barriers
# ---------------------------------------------------------------------------


def uniform_bound_barriers(
    rho_c0: ScalarField,
    phi0: ScalarField,
    forcing: ForcingSpec,
    pinching: tuple[float, float],
    c0: float,
    T: float,
    *,
    times=None,
    form_path: FormPath | None = None,
    theta: HermitianForm | None = None,
    density: Density | None = None,
) -> tuple[FlowTrajectory, FlowTrajectory, BarrierConstants]:
    """Constant-slope barriers squeezing any flow solution from both sides.

    ``rho_c0`` solves the reference problem with density ``c0 f`` and
    ``sup rho = 0``; ``pinching = (a, A)`` bounds the form family against the
    reference form theta. Returns ``(u, v, constants)`` where

    * ``u(t) = a rho - C1 - max(C3 - n log a - log(c0 dmin), 0) t`` is a
      subsolution against the moving family, and
    * ``v(t) = A rho + C2 + [max(-C4 + n log A + log c0, 0) + extra] t`` is a
      supersolution for the constant form ``A theta``,

    with ``C1 = sup(a rho - phi0)``, ``C2 = sup(phi0 - A rho)`` and C3/C4 the
    extrema of the forcing along the initial profile. ``dmin`` and ``extra``
    are the per-form determinant corrections; both vanish for a constant
    family equal to theta.
    """
    a, A = pinching
    if a <= 0:
        raise ValueError("lower pinching constant must be positive")
    if A < a:
        raise ValueError("pinching interval is empty")
    _require_normalized_reference(rho_c0)
    grid = phi0.grid
    n = grid.n

    c1 = float((a * rho_c0.values - phi0.values).max())
    c2 = float((phi0.values - A * rho_c0.values).max())
    c3 = forcing.sup_at_profile(T, phi0)
    c4 = forcing.inf_at_profile(T, phi0)

    d_min_u = 1.0
    extra_v = 0.0
    if form_path is not None and theta is not None and not (
        form_path.is_constant
        and np.array_equal(form_path.omega0.entries, theta.entries)
        and a == 1.0
        and A == 1.0
    ):
        logdet_min, logdet_max = form_path.log_det_range()
        logdet_theta = math.log(theta.det())
        d_min_u = min(math.exp(logdet_theta - logdet_max), 1.0)
        extra_v = max(0.0, (n * math.log(A) + logdet_theta) - logdet_min)

    slope_u = max(c3 - n * math.log(a) - math.log(c0 * d_min_u), 0.0)
    slope_v = max(-c4 + n * math.log(A) + math.log(c0), 0.0) + extra_v

    if times is None:
        times = np.linspace(0.0, T, 9)
    times = np.asarray(times, dtype=float)

    traj_density = density
    if traj_density is None:
        traj_density = Density(ScalarField(grid, np.ones(grid.shape)), p=2.0, f_min=0.5)

    def affine_traj(base_vals, offset, slope, path):
        snaps = [
            ScalarField(grid, base_vals + offset + slope * float(t)) for t in times
        ]
        dots = [ScalarField(grid, np.full(grid.shape, slope)) for _ in times]
        return FlowTrajectory(
            grid=grid,
            times=times.copy(),
            snapshots=snaps,
            phi_dot=dots,
            form_path=path,
            forcing=forcing,
            density=traj_density,
        )

    u_path = form_path if form_path is not None else FormPath.constant(
        theta if theta is not None else HermitianForm.identity(n), max(T, 1e-30)
    )
    base_theta = theta if theta is not None else u_path.omega0
    v_path = FormPath.constant(base_theta.scaled(A), max(T, 1e-30))
    u = affine_traj(a * rho_c0.values, -c1, -slope_u, u_path)
    v = affine_traj(A * rho_c0.values, c2, slope_v, v_path)

    constants = BarrierConstants(
        C0=c0,
        C1=c1,
        C2=c2,
        C3=c3,
        C4=c4,
        a_lower=a,
        A_upper=A,
        det_correction=d_min_u,
    )
    return u, v, constants
