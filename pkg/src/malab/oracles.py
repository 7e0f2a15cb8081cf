"""Comparison and domination principles as falsifiable predicates.

Each oracle checks a hypothesis and a conclusion separately; ``passed``
reflects the conclusion margin alone (so negative controls register their
violation), while ``hypothesis_met`` tells callers whether the verdict is
meaningful as a test of the principle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import FormPath, HermitianForm, ScalarField
from .ma_ops import Density, NormalizedVolume, ma_density
from .parabolic import (
    SOLUTION,
    SUBSOLUTION,
    SUPERSOLUTION,
    FlowTrajectory,
    ForcingSpec,
    classify_residual,
)


@dataclass(frozen=True)
class OracleVerdict:
    """Outcome of one principle check.

    ``worst_margin`` is the most negative slack of the conclusion; the
    witness locates where it occurs (grid index, and time index when the
    check is parabolic). ``passed`` holds iff ``worst_margin >= -tolerance``.
    """

    passed: bool
    worst_margin: float
    witness: tuple
    tolerance: float
    hypothesis_met: bool = True

    def to_json_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "worst_margin": self.worst_margin,
            "witness": [int(i) for i in self.witness] if self.witness else None,
            "tolerance": self.tolerance,
            "hypothesis_met": bool(self.hypothesis_met),
        }


def _verdict_from_slack(slack: np.ndarray, tol: float, hypothesis_met: bool,
                        time_index=None) -> OracleVerdict:
    worst = float(slack.min())
    flat = int(np.argmin(slack))
    idx = np.unravel_index(flat, slack.shape)
    witness = tuple(int(i) for i in idx)
    if time_index is not None:
        witness = (int(time_index),) + witness
    return OracleVerdict(
        passed=bool(worst >= -tol),
        worst_margin=worst,
        witness=witness,
        tolerance=tol,
        hypothesis_met=hypothesis_met,
    )


def comparison_elliptic(
    u: ScalarField, v: ScalarField, theta: HermitianForm, tol: float
) -> OracleVerdict:
    """Exponential comparison: if e^{-u} MA(u) >= e^{-v} MA(v) then u <= v.

    The hypothesis is checked pointwise with tolerance ``tol``; the verdict
    margin is the slack of the conclusion, min(v - u).
    """
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    lhs = np.exp(-u.values) * ma_density(theta, u).values
    rhs = np.exp(-v.values) * ma_density(theta, v).values
    hypothesis_met = bool(np.all(lhs >= rhs - tol))
    slack = v.values - u.values
    return _verdict_from_slack(slack, tol, hypothesis_met)


def comparison_parabolic(
    traj_sub: FlowTrajectory,
    traj_super: FlowTrajectory,
    forcing: ForcingSpec,
    f: Density,
    form_path: FormPath,
    tol: float,
) -> OracleVerdict:
    """Parabolic comparison: sup over the cylinder of (phi - psi) is at most
    the positive part of the initial gap.

    The hypothesis (sub/supersolution classification at every sampled time)
    is verified with the same tolerance before the conclusion is scanned.
    """
    if len(traj_sub) != len(traj_super) or not np.allclose(
        traj_sub.times, traj_super.times
    ):
        raise ValueError("trajectories must share their sample times")
    hypothesis_met = True
    for i in range(len(traj_sub)):
        t = float(traj_sub.times[i])
        omega_t = form_path.at(t)
        cls_sub = classify_residual(traj_sub.snapshot(i), omega_t, forcing, f, tol)
        cls_super = classify_residual(traj_super.snapshot(i), omega_t, forcing, f, tol)
        if cls_sub not in (SUBSOLUTION, SOLUTION) or cls_super not in (
            SUPERSOLUTION,
            SOLUTION,
        ):
            hypothesis_met = False
            break

    bound = float(
        np.maximum(traj_sub.snapshots[0].values - traj_super.snapshots[0].values, 0.0).max()
    )
    worst = np.inf
    worst_witness = (0,) + (0,) * len(traj_sub.grid.shape)
    for i in range(len(traj_sub)):
        gap = traj_sub.snapshots[i].values - traj_super.snapshots[i].values
        slack = bound - gap
        m = float(slack.min())
        if m < worst:
            worst = m
            idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
            worst_witness = (i,) + tuple(int(j) for j in idx)
    return OracleVerdict(
        passed=bool(worst >= -tol),
        worst_margin=worst,
        witness=worst_witness,
        tolerance=tol,
        hypothesis_met=hypothesis_met,
    )


def domination_check(
    u: ScalarField,
    v: ScalarField,
    mask: np.ndarray,
    theta: HermitianForm,
    tol: float,
) -> OracleVerdict:
    """Domination: no Monge-Ampere mass of u on {u < v} inside D forces
    u >= v throughout D, given the boundary condition on the collar.

    The measure-zero hypothesis is discretized as "discrete mass below half
    a cell mass"; the boundary limsup becomes a one-cell collar comparison
    (points of D with a neighbour outside D along any axis).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != u.grid.shape:
        raise ValueError("mask shape does not match the grid")
    if not mask.any():
        raise ValueError("domain mask is empty")
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")

    outside = ~mask
    collar = np.zeros_like(mask)
    if outside.any():
        for axis in range(mask.ndim):
            collar |= mask & np.roll(outside, 1, axis=axis)
            collar |= mask & np.roll(outside, -1, axis=axis)

    boundary_ok = True
    if collar.any():
        boundary_ok = bool(
            np.min(u.values[collar] - v.values[collar]) >= -tol
        )

    dV = NormalizedVolume(u.grid)
    ma_u = ma_density(theta, u).values
    region = mask & (u.values < v.values - tol)
    mass = float(np.sum(ma_u[region]) * dV.weight) if region.any() else 0.0
    mass_ok = mass < 0.5 * dV.weight

    hypothesis_met = boundary_ok and mass_ok
    slack_full = np.where(mask, u.values - v.values, np.inf)
    return _verdict_from_slack(slack_full, tol, hypothesis_met)
