"""Time integration of the complex Monge-Ampere flow with forcing.

The flow rewrites the parabolic equation as a method-of-lines system

    d phi / dt = log ma_density(omega_t, phi) - log f - F(t, x, phi),

integrated by an explicit embedded Runge-Kutta pair (Bogacki-Shampine 3(2))
with proportional step control, step rejection on positivity loss of
``omega_t + dd^c phi``, and exact landing on requested sample times. The
time derivative stored with each snapshot is the right-hand side evaluated
at that snapshot, so residual classification at snapshot times is exact.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError
from .geometry import (
    FormPath,
    HermitianForm,
    ScalarField,
    TorusGrid,
    field_sha256,
    hessian_values,
    quarter_laplacian,
    read_field,
    write_field,
)
from .ma_ops import Density, _det_hermitian, _min_eig_hermitian

FORCING_FAMILIES = ("zero", "linear_r", "affine", "spatial_sine")

SUBSOLUTION = "subsolution"
SUPERSOLUTION = "supersolution"
SOLUTION = "solution"
NEITHER = "neither"


# ---------------------------------------------------------------------------
# forcing terms
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _spatial_profile_cached(space_amp: float, space_freq: int, grid: TorusGrid):
    x0 = grid.axis_coords(0)
    prof = space_amp * np.sin(2.0 * np.pi * space_freq * x0)
    return np.broadcast_to(prof, grid.shape)


@dataclass(frozen=True)
class ForcingSpec:
    """Parametric forcing F(t, x, r): affine in t and r plus a spatial wave.

    All built-in families are non-decreasing in r (slope_r >= 0) and
    uniformly Lipschitz in (t, r) with constant ``max(slope_r, |slope_t|)``.
    """

    family: str = "zero"
    offset: float = 0.0
    slope_r: float = 0.0
    slope_t: float = 0.0
    space_amp: float = 0.0
    space_freq: int = 1

    def __post_init__(self):
        if self.family not in FORCING_FAMILIES:
            raise ValueError(f"unknown forcing family {self.family!r}")
        if self.slope_r < 0:
            raise ValueError("forcing must be non-decreasing in r (slope_r >= 0)")
        allowed = {
            "zero": (),
            "linear_r": ("slope_r",),
            "affine": ("offset", "slope_r", "slope_t"),
            "spatial_sine": ("offset", "slope_r", "slope_t", "space_amp"),
        }[self.family]
        for name in ("offset", "slope_r", "slope_t", "space_amp"):
            if name not in allowed and getattr(self, name) != 0.0:
                raise ValueError(
                    f"family {self.family!r} does not take a nonzero {name}"
                )
        if self.space_freq < 1:
            raise ValueError("space_freq must be a positive integer")

    # -- evaluation ------------------------------------------------------

    @property
    def lipschitz_L(self) -> float:
        return max(self.slope_r, abs(self.slope_t))

    @property
    def monotone_in_r(self) -> bool:
        return self.slope_r >= 0

    def spatial(self, grid: TorusGrid) -> np.ndarray:
        if self.space_amp == 0.0:
            return np.zeros(grid.shape)
        return _spatial_profile_cached(self.space_amp, self.space_freq, grid)

    def __call__(self, t, r, grid: TorusGrid):
        """F(t, x, r); ``r`` may be a scalar or a grid-shaped array."""
        out = self.offset + self.slope_r * np.asarray(r) + self.slope_t * t
        if self.space_amp != 0.0:
            out = out + self.spatial(grid)
        return np.broadcast_to(out, grid.shape) if np.ndim(out) == 0 else out

    def r_derivative_bound(self) -> float:
        return self.slope_r

    # -- closed-form extrema ----------------------------------------------

    def sup_on(self, T: float, r_hi: float) -> float:
        """Upper bound of F over [0,T] x X x (-inf, r_hi] (continuum sin sup)."""
        return self.offset + self.slope_r * r_hi + max(self.slope_t * T, 0.0) + abs(self.space_amp)

    def inf_on(self, T: float, r_lo: float) -> float:
        return self.offset + self.slope_r * r_lo + min(self.slope_t * T, 0.0) - abs(self.space_amp)

    def sup_at_profile(self, T: float, r: ScalarField) -> float:
        """Exact grid sup of F(t, x, r(x)) over t in [0, T]."""
        core = self.slope_r * r.values + self.spatial(r.grid)
        return self.offset + float(core.max()) + max(self.slope_t * T, 0.0)

    def inf_at_profile(self, T: float, r: ScalarField) -> float:
        core = self.slope_r * r.values + self.spatial(r.grid)
        return self.offset + float(core.min()) + min(self.slope_t * T, 0.0)

    def validate_samples(self, grid: TorusGrid, rng, samples: int = 64) -> None:
        """Spot-check the Lipschitz bound and r-monotonicity on random draws."""
        L = self.lipschitz_L
        for _ in range(samples):
            t1, t2 = rng.uniform(0, 2, size=2)
            r1, r2 = rng.uniform(-3, 3, size=2)
            idx = tuple(rng.integers(0, grid.resolution, size=2 * grid.n))
            s = self.spatial(grid)[idx]
            f1 = self.offset + self.slope_r * r1 + self.slope_t * t1 + s
            f2 = self.offset + self.slope_r * r2 + self.slope_t * t2 + s
            if abs(f1 - f2) > L * (abs(r1 - r2) + abs(t1 - t2)) + 1e-12:
                raise AssertionError("Lipschitz bound violated by sample")
            lo, hi = min(r1, r2), max(r1, r2)
            flo = self.offset + self.slope_r * lo + self.slope_t * t1 + s
            fhi = self.offset + self.slope_r * hi + self.slope_t * t1 + s
            if fhi < flo - 1e-12:
                raise AssertionError("monotonicity in r violated by sample")

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "offset": self.offset,
            "slope_r": self.slope_r,
            "slope_t": self.slope_t,
            "space_amp": self.space_amp,
            "space_freq": self.space_freq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForcingSpec":
        return cls(**d)


def forcing_gap_sup(
    f_spec: ForcingSpec,
    g_spec: ForcingSpec,
    grid: TorusGrid,
    T: float,
    r_interval: tuple[float, float] | None = None,
    positive_part_only: bool = False,
) -> float:
    """Sup of (G - F) or |G - F| over [0,T] x X x R (or a compact r-interval).

    The difference is affine in t and r, so extrema sit at interval corners;
    the spatial part is scanned exactly on the grid. With ``r_interval=None``
    and differing r-slopes the supremum is infinite.
    """
    d_off = g_spec.offset - f_spec.offset
    d_sr = g_spec.slope_r - f_spec.slope_r
    d_st = g_spec.slope_t - f_spec.slope_t
    spatial = g_spec.spatial(grid) - f_spec.spatial(grid)
    if r_interval is None:
        if d_sr != 0.0:
            return math.inf
        r_corners = [0.0]
    else:
        r_corners = [r_interval[0], r_interval[1]]
    worst = -math.inf
    for r in r_corners:
        for t in (0.0, T):
            core = d_off + d_sr * r + d_st * t + spatial
            hi = float(core.max())
            if not positive_part_only:
                hi = max(hi, float(np.abs(core).max()))
            worst = max(worst, hi)
    if positive_part_only:
        worst = max(worst, 0.0)
    return worst


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowSnapshot:
    """One (t, phi, phi_dot) triple; phi_dot is the stored RHS evaluation."""

    t: float
    phi: ScalarField
    phi_dot: ScalarField


@dataclass
class FlowTrajectory:
    """Sampled flow: increasing times, potentials, and stored derivatives."""

    grid: TorusGrid
    times: np.ndarray
    snapshots: list
    phi_dot: list
    form_path: FormPath
    forcing: ForcingSpec
    density: Density
    checkpoint_dts: list = field(default_factory=list)
    steps: int = 0
    rejections: int = 0

    def __len__(self):
        return len(self.snapshots)

    def snapshot(self, i: int) -> FlowSnapshot:
        return FlowSnapshot(float(self.times[i]), self.snapshots[i], self.phi_dot[i])

    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def sup_phi(self) -> float:
        return max(s.max() for s in self.snapshots)

    def inf_phi(self) -> float:
        return min(s.min() for s in self.snapshots)

    def sup_phi_dot(self) -> float:
        return max(s.max() for s in self.phi_dot)

    def inf_phi_dot(self) -> float:
        return min(s.min() for s in self.phi_dot)

    def index_of_time(self, t: float, tol: float = 1e-12) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(float(self.times[i]) - t) > tol:
            raise KeyError(f"time {t} is not a sample time")
        return i

    # -- persistence -------------------------------------------------------

    def save(self, directory) -> None:
        """Persist as a directory: manifest JSON plus MAFLD1 files."""
        import os

        os.makedirs(directory, exist_ok=True)
        entries = []
        for i in range(len(self)):
            phi_name = f"phi_{i:04d}.fld"
            dot_name = f"phidot_{i:04d}.fld"
            write_field(os.path.join(directory, phi_name), self.snapshots[i])
            write_field(os.path.join(directory, dot_name), self.phi_dot[i])
            entries.append(
                {
                    "t": float(self.times[i]),
                    "phi": phi_name,
                    "phi_sha256": field_sha256(os.path.join(directory, phi_name)),
                    "phi_dot": dot_name,
                    "phi_dot_sha256": field_sha256(os.path.join(directory, dot_name)),
                }
            )
        manifest = {
            "format": "MAFLD1",
            "grid": {"n": self.grid.n, "resolution": self.grid.resolution},
            "times": [float(t) for t in self.times],
            "checkpoint_dts": [float(d) for d in self.checkpoint_dts],
            "snapshots": entries,
            "forcing": self.forcing.to_dict(),
            "form_path": {
                "omega0_re": self.form_path.omega0.entries.real.tolist(),
                "omega0_im": self.form_path.omega0.entries.imag.tolist(),
                "omega1_re": self.form_path.omega1.entries.real.tolist(),
                "omega1_im": self.form_path.omega1.entries.imag.tolist(),
                "T": self.form_path.T,
            },
            "density": {"p": self.density.p, "f_min": self.density.f_min,
                        "file": "density.fld"},
            "steps": self.steps,
            "rejections": self.rejections,
        }
        write_field(os.path.join(directory, "density.fld"), self.density.field)
        with open(os.path.join(directory, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory) -> "FlowTrajectory":
        import os

        with open(os.path.join(directory, "manifest.json")) as fh:
            manifest = json.load(fh)
        grid = TorusGrid(manifest["grid"]["n"], manifest["grid"]["resolution"])
        snaps, dots = [], []
        for entry in manifest["snapshots"]:
            snaps.append(read_field(os.path.join(directory, entry["phi"])))
            dots.append(read_field(os.path.join(directory, entry["phi_dot"])))
        fp = manifest["form_path"]
        omega0 = HermitianForm(np.array(fp["omega0_re"]) + 1j * np.array(fp["omega0_im"]))
        omega1 = HermitianForm(np.array(fp["omega1_re"]) + 1j * np.array(fp["omega1_im"]))
        density = Density(
            read_field(os.path.join(directory, manifest["density"]["file"])),
            manifest["density"]["p"],
            manifest["density"]["f_min"],
        )
        return cls(
            grid=grid,
            times=np.array(manifest["times"]),
            snapshots=snaps,
            phi_dot=dots,
            form_path=FormPath(omega0, omega1, fp["T"]),
            forcing=ForcingSpec.from_dict(manifest["forcing"]),
            density=density,
            checkpoint_dts=list(manifest["checkpoint_dts"]),
            steps=manifest["steps"],
            rejections=manifest["rejections"],
        )


# ---------------------------------------------------------------------------
# right-hand side and integrator
# ---------------------------------------------------------------------------


class _FlowRHS:
    def __init__(self, form_path: FormPath, forcing: ForcingSpec, f: Density):
        self.form_path = form_path
        self.forcing = forcing
        self.grid = f.grid
        self.log_f = np.log(f.values)
        self._const_form = form_path.omega0 if form_path.is_constant else None

    def form_at(self, t: float) -> HermitianForm:
        return self._const_form if self._const_form is not None else self.form_path.at(t)

    def __call__(self, t: float, y: np.ndarray) -> np.ndarray:
        """RHS array; an all-NaN result signals positivity loss to the stepper."""
        grid = self.grid
        form = self.form_at(t)
        if grid.n == 1:
            g11 = form.entries[0, 0].real
            ma = 1.0 + quarter_laplacian(y, grid) / g11
            floor = ma.min()
        else:
            shifted = form.entries[(np.newaxis,) * len(grid.shape)] + hessian_values(y, grid)
            floor = _min_eig_hermitian(shifted).min()
            if np.isfinite(floor) and floor > 0.0:
                ma = _det_hermitian(shifted) / form.det()
            else:
                return np.full(grid.shape, np.nan)
        if not np.isfinite(floor) or ma.min() <= 0.0:
            return np.full(grid.shape, np.nan)
        return np.log(ma) - self.log_f - self.forcing(t, y, grid)


def evolve(
    form_path,
    forcing: ForcingSpec,
    f: Density,
    phi0: ScalarField,
    T: float,
    dt: float,
    *,
    t0: float = 0.0,
    rtol: float = 1e-8,
    atol: float = 1e-11,
    sample_times=None,
    n_samples: int = 33,
    dt_min: float = 1e-12,
) -> FlowTrajectory:
    """Integrate the flow from ``t0`` to ``T`` and sample it.

    ``dt`` seeds the adaptive controller. Snapshots are taken exactly at the
    requested sample times (default: uniform grid including both endpoints);
    each records the right-hand side as phi_dot together with the step-size
    proposal, so a run can be checkpointed at any sample time and resumed
    bit-for-bit.
    """
    if isinstance(form_path, HermitianForm):
        form_path = FormPath.constant(form_path, max(T, 1e-30))
    grid = f.grid
    if phi0.grid != grid:
        raise ValueError("initial potential and density live on different grids")
    if T <= t0:
        raise ValueError("final time must exceed the initial time")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rhs = _FlowRHS(form_path, forcing, f)

    if sample_times is None:
        sample_times = np.linspace(t0, T, n_samples)
    sample_times = np.unique(np.concatenate([[t0, T], np.asarray(sample_times, float)]))
    if sample_times[0] < t0 - 1e-15 or sample_times[-1] > T + 1e-15:
        raise ValueError("sample times must lie in [t0, T]")

    y = phi0.values.copy()
    t = float(sample_times[0])
    k1 = rhs(t, y)
    if not np.all(np.isfinite(k1)):
        raise ValueError("initial potential is not strictly psh for omega at t0")

    times, snaps, dots, dts = [t], [ScalarField(grid, y)], [ScalarField(grid, k1)], []
    dt_prop = min(dt, float(sample_times[-1] - t))
    dts.append(dt_prop)
    steps = rejections = 0
    # hysteresis: after a rejection, hold the step size for a while instead
    # of probing the stability boundary again right away
    growth_hold = 0

    for target in sample_times[1:]:
        target = float(target)
        while t < target:
            remaining = target - t
            lands = dt_prop >= remaining
            dt_step = remaining if lands else dt_prop
            k2 = rhs(t + 0.5 * dt_step, y + (0.5 * dt_step) * k1)
            k3 = rhs(t + 0.75 * dt_step, y + (0.75 * dt_step) * k2)
            y_new = y + dt_step * ((2.0 / 9.0) * k1 + (1.0 / 3.0) * k2 + (4.0 / 9.0) * k3)
            k4 = rhs(t + dt_step, y_new)
            err = dt_step * (
                (-5.0 / 72.0) * k1 + (1.0 / 12.0) * k2 + (1.0 / 9.0) * k3 - (1.0 / 8.0) * k4
            )
            finite = np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))
            if finite:
                scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
                E = float(np.max(np.abs(err) / scale))
            else:
                E = math.inf
            if E <= 1.0:
                t = target if lands else t + dt_step
                y = y_new
                k1 = k4
                steps += 1
                factor = 2.0 if E == 0.0 else min(2.0, max(0.2, 0.9 * E ** (-1.0 / 3.0)))
                if growth_hold > 0:
                    factor = min(factor, 1.0)
                    growth_hold -= 1
                dt_prop = dt_step * factor
            else:
                rejections += 1
                growth_hold = 16
                factor = 0.5 if not finite else min(0.5, max(0.1, 0.9 * E ** (-1.0 / 3.0)))
                dt_prop = dt_step * factor
                if dt_prop < dt_min:
                    raise IntegrationError(
                        f"step size underflow at t={t:.6g} (dt={dt_prop:.3e})",
                        t=t,
                        dt=dt_prop,
                    )
        times.append(t)
        snaps.append(ScalarField(grid, y))
        dots.append(ScalarField(grid, k1))
        dts.append(dt_prop)

    return FlowTrajectory(
        grid=grid,
        times=np.array(times),
        snapshots=snaps,
        phi_dot=dots,
        form_path=form_path,
        forcing=forcing,
        density=f,
        checkpoint_dts=dts,
        steps=steps,
        rejections=rejections,
    )


# ---------------------------------------------------------------------------
# residual classification and derivative bounds
# ---------------------------------------------------------------------------


def classify_residual(
    snapshot: FlowSnapshot,
    omega_t: HermitianForm,
    forcing: ForcingSpec,
    f: Density,
    tol: float,
) -> str:
    """Pointwise sub/supersolution test at one snapshot.

    Compares the Monge-Ampere density of phi against
    ``exp(phi_dot + F(t, x, phi)) f`` with tolerance ``tol``; a field that
    satisfies both inequalities is a solution.
    """
    from .ma_ops import ma_density

    grid = snapshot.phi.grid
    lhs = ma_density(omega_t, snapshot.phi).values
    rhs = np.exp(
        snapshot.phi_dot.values + forcing(snapshot.t, snapshot.phi.values, grid)
    ) * f.values
    sub = bool(np.all(lhs >= rhs - tol))
    sup = bool(np.all(lhs <= rhs + tol))
    if sub and sup:
        return SOLUTION
    if sub:
        return SUBSOLUTION
    if sup:
        return SUPERSOLUTION
    return NEITHER


@dataclass(frozen=True)
class PhiDotBoundReport:
    """Margins for the parabolic gradient-bound scan (report only)."""

    b1: float
    drift_c: float
    b0: float
    h_max: float
    h_bound: float
    margin_upper: float
    g_min: float
    g_bound: float
    margin_lower: float
    passed: bool


def phi_dot_bound_check(
    trajectory: FlowTrajectory,
    b1: float,
    drift_c: float,
    *,
    slack: float = 1e-6,
) -> PhiDotBoundReport:
    """Scan the trajectory for the maximum-principle bound on phi_dot.

    With ``H = phi_dot - b1 phi - (C+1) t`` the maximum over the space-time
    cylinder is bounded by ``max(sup phi_dot(0) - b1 inf phi(0), B0 b1)``
    where B0 is the uniform bound on |phi|; the mirrored combination
    ``G = phi_dot + b1 phi + (C+1) t`` obeys the analogous lower bound.
    """
    if b1 < 0:
        raise ValueError("b1 must be nonnegative")
    b0 = max(abs(trajectory.sup_phi()), abs(trajectory.inf_phi()))
    phi0 = trajectory.snapshots[0]
    dot0 = trajectory.phi_dot[0]

    h_max = -math.inf
    g_min = math.inf
    for i in range(len(trajectory)):
        t = float(trajectory.times[i])
        phi = trajectory.snapshots[i].values
        dot = trajectory.phi_dot[i].values
        H = dot - b1 * phi - (drift_c + 1.0) * t
        G = dot + b1 * phi + (drift_c + 1.0) * t
        h_max = max(h_max, float(H.max()))
        g_min = min(g_min, float(G.min()))

    h_bound = max(dot0.max() - b1 * phi0.min(), b0 * b1)
    g_bound = min(dot0.min() + b1 * phi0.min(), -b0 * b1)
    margin_upper = h_bound + slack - h_max
    margin_lower = g_min - (g_bound - slack)
    return PhiDotBoundReport(
        b1=b1,
        drift_c=drift_c,
        b0=b0,
        h_max=h_max,
        h_bound=h_bound,
        margin_upper=margin_upper,
        g_min=g_min,
        g_bound=g_bound,
        margin_lower=margin_lower,
        passed=bool(margin_upper >= 0.0 and margin_lower >= 0.0),
    )
