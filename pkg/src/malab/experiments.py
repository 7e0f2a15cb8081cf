"""Stability experiment harness.

Every run solves both sides of a stability estimate, assembles the explicit
proof-level bound (empirical reference constants standing in for the
existence-level ones), and asserts a nonnegative margin per report row. The
bound assemblies live here so the barrier, solver, and oracle layers stay
free of experiment policy.

Naming convention for the two-sided assemblies: each direction applies the
semi-stability estimate with one field as subsolution and the other as
supersolution, then the row bound is the max over directions, which
dominates ``sup |phi - psi|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barriers import (
    BarrierConstants,
    parabolic_constants,
    uniform_bound_barriers,
)
from .elliptic import (
    SolveReport,
    build_reference_density,
    default_tolerance,
    solve_exponential,
    solve_normalized,
)
from .errors import DegenerateReference, MarginViolation
from .geometry import (
    FormPath,
    HermitianForm,
    ScalarField,
    TorusGrid,
    form_distance,
)
from .ma_ops import Density, NormalizedVolume, lp_norm, oscillation, positive_part
from .parabolic import FlowTrajectory, ForcingSpec, evolve, forcing_gap_sup, phi_dot_bound_check


# ---------------------------------------------------------------------------
# perturbation families and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationFamily:
    """Base density plus a perturbation direction and a list of scales.

    ``additive`` mode clamps at the density floor (the realized gap is
    recomputed from the clamped density); ``multiplicative`` mode scales by
    ``exp(s h)`` and is always admissible.
    """

    base: Density
    direction: ScalarField
    scales: tuple
    mode: str = "additive"

    def __post_init__(self):
        if self.mode not in ("additive", "multiplicative"):
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if self.direction.grid != self.base.grid:
            raise ValueError("direction field lives on the wrong grid")
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if any(s < 0 for s in self.scales):
            raise ValueError("scales must be nonnegative")

    def realize(self, s: float) -> Density:
        if s == 0.0:
            return self.base
        if self.mode == "additive":
            vals = np.maximum(
                self.base.values + s * self.direction.values, self.base.f_min
            )
        else:
            vals = np.exp(s * self.direction.values) * self.base.values
        f_min = min(self.base.f_min, float(vals.min()))
        return Density(ScalarField(self.base.grid, vals), p=self.base.p, f_min=f_min)


@dataclass
class StabilityRow:
    s: float
    lp_gap: float
    lp_gap_pos: float
    sup_diff: float
    bound: float
    margin: float
    details: dict = field(default_factory=dict)

    def csv_values(self):
        return (self.s, self.lp_gap, self.lp_gap_pos, self.sup_diff, self.bound, self.margin)


@dataclass
class StabilityReport:
    rows: list
    fitted_exponent: float
    constants_used: BarrierConstants
    extra: dict = field(default_factory=dict)

    def max_lhs_rhs_ratio(self) -> float:
        ratios = [r.sup_diff / r.bound for r in self.rows if r.bound > 0]
        return max(ratios) if ratios else 0.0


def fit_loglog_exponent(gaps, diffs, n_points: int = 3) -> float:
    """Least-squares slope of log(diff) against log(gap), smallest scales only."""
    pairs = [(g, d) for g, d in zip(gaps, diffs) if g > 0 and d > 0]
    pairs.sort(key=lambda p: p[0])
    pairs = pairs[:n_points]
    if len(pairs) < 2:
        return float("nan")
    lg = np.log([p[0] for p in pairs])
    ld = np.log([p[1] for p in pairs])
    slope = np.polyfit(lg, ld, 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# elliptic two-sided bound assembly
# ---------------------------------------------------------------------------


def _one_sided_bound(
    theta: HermitianForm,
    sub: ScalarField,
    super_: ScalarField,
    sub_density: np.ndarray,
    super_density: np.ndarray,
    p: float,
    tol: float,
) -> tuple[float, dict]:
    """Bound on sup(sub - super) for a subsolution/supersolution pair.

    Dichotomy on ``eps = exp(sup sub / n) ||(g - f)_+||_p^{1/n}``: the small
    branch solves the reference problem and uses the explicit constant
    ``(C1 + osc(sub) - inf(super) + 2n) exp(sup sub / n)``; the large branch
    uses the coarse doubling bound. A vanishing positive-part gap reduces to
    the plain comparison principle. Solver slack ``10 tol`` is added so
    discrete solutions at tolerance cannot produce spurious violations.
    """
    grid = sub.grid
    n = grid.n
    dV = NormalizedVolume(grid)
    gap = positive_part(ScalarField(grid, super_density - sub_density))
    gap_p = lp_norm(gap, p, dV)
    slack = 10.0 * tol
    details = {"gap_pos_p": gap_p}
    if gap_p == 0.0:
        details["branch"] = "comparison"
        return slack, details

    eps = math.exp(sub.max() / n) * gap_p ** (1.0 / n)
    details["eps"] = eps
    if eps >= 0.5:
        details["branch"] = "coarse"
        bound = max(sub.max() - super_.min(), 0.0) * 2.0 * eps + slack
        return bound, details

    h, a = build_reference_density(
        Density(ScalarField(grid, sub_density), p=p, f_min=float(sub_density.min())),
        Density(ScalarField(grid, super_density), p=p, f_min=float(super_density.min())),
        p,
    )
    ref = solve_normalized(theta, h, tol=None)
    c1 = float(np.abs(ref.solution.values).max())
    details.update({"branch": "reference", "a": a, "c1_sup_rho": c1})
    bound = (
        (c1 + oscillation(sub) - super_.min() + 2.0 * n)
        * math.exp(sub.max() / n)
        * gap_p ** (1.0 / n)
        + slack
    )
    return bound, details


def two_sided_elliptic_bound(
    theta: HermitianForm,
    phi: ScalarField,
    psi: ScalarField,
    f: Density,
    g: Density,
    p: float,
    tol: float,
) -> tuple[float, dict]:
    """Two-sided stability bound dominating sup |phi - psi|."""
    b1, d1 = _one_sided_bound(theta, phi, psi, f.values, g.values, p, tol)
    b2, d2 = _one_sided_bound(theta, psi, phi, g.values, f.values, p, tol)
    return max(b1, b2), {"forward": d1, "reverse": d2}


# ---------------------------------------------------------------------------
# elliptic stability run
# ---------------------------------------------------------------------------


def elliptic_stability_run(
    family: PerturbationFamily,
    p: float,
    theta: HermitianForm,
    *,
    tol: float | None = None,
    threads: int = 1,
    exponent_points: int = 3,
) -> StabilityReport:
    """Solve the perturbed equation across all scales and check every margin.

    A margin below zero raises ``MarginViolation`` carrying the witness
    fields. The fitted exponent is the log-log slope of ``sup |phi - psi|``
    against ``||f - g||_p`` over the smallest scales.
    """
    grid = family.base.grid
    if tol is None:
        tol = default_tolerance(grid)
    dV = NormalizedVolume(grid)
    base_report = solve_exponential(theta, family.base, tol)
    phi = base_report.solution

    def run_scale(s: float) -> StabilityRow:
        g_s = family.realize(s)
        if np.array_equal(g_s.values, family.base.values):
            psi = phi
        else:
            psi = solve_exponential(theta, g_s, tol).solution
        diff = ScalarField(grid, phi.values - psi.values)
        sup_diff = float(np.abs(diff.values).max())
        lp_gap = lp_norm(ScalarField(grid, g_s.values - family.base.values), p, dV)
        lp_gap_pos = lp_norm(
            positive_part(ScalarField(grid, g_s.values - family.base.values)), p, dV
        )
        bound, details = two_sided_elliptic_bound(
            theta, phi, psi, family.base, g_s, p, tol
        )
        margin = bound - sup_diff
        row = StabilityRow(s, lp_gap, lp_gap_pos, sup_diff, bound, margin, details)
        if margin < 0:
            raise MarginViolation(
                f"stability margin violated at scale {s}: bound {bound:.6e} < "
                f"sup-difference {sup_diff:.6e}",
                row=row,
                witness_fields={"phi": phi, "psi": psi, "f": family.base.field,
                                "g": g_s.field},
            )
        return row

    scales = sorted(family.scales)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_scale, scales))
    else:
        rows = [run_scale(s) for s in scales]

    exponent = fit_loglog_exponent(
        [r.lp_gap for r in rows], [r.sup_diff for r in rows], exponent_points
    )
    constants = BarrierConstants()
    for row in reversed(rows):
        det = row.details.get("forward", {})
        if det.get("branch") == "reference":
            constants = BarrierConstants(
                eps=det.get("eps", float("nan")),
                C1=det.get("c1_sup_rho", float("nan")),
                gap_pos_p=det.get("gap_pos_p", float("nan")),
            )
            break
    report = StabilityReport(rows, exponent, constants)
    report.extra["max_lhs_rhs_ratio"] = report.max_lhs_rhs_ratio()
    report.extra["solver_tol"] = tol
    return report


# ---------------------------------------------------------------------------
# Hoelder interpolation check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InterpolationVerdict:
    ok: bool
    lhs: float
    rhs: float
    rel_margin: float
    t: float
    epsilon: float
    l1_ok: bool
    l1_lhs: float
    l1_rhs: float


def interpolation_check(
    h: ScalarField, p: float, r: float, dV: NormalizedVolume, n_dim: int = 1
) -> InterpolationVerdict:
    """Interpolation inequality ||h||_r <= ||h||_1^{(1-t)/r} ||h||_p^{tp/r}.

    ``t = (r-1)/(p-1)``. Also checks the derived exponent trade: with
    ``beta = (1-t)/r`` and ``epsilon = n (1-beta)/beta``, the L^1-based
    bound ``C ||h||_1^{1/(n+eps)}`` with ``C = ||h||_p^{tp/(rn)}`` dominates
    the L^r quantity raised to 1/n.
    """
    if not (1.0 < r < p):
        raise ValueError(f"need 1 < r < p, got r={r}, p={p}")
    t = (r - 1.0) / (p - 1.0)
    norm_1 = lp_norm(h, 1.0, dV)
    norm_r = lp_norm(h, r, dV)
    norm_p = lp_norm(h, p, dV)
    rhs = norm_1 ** ((1.0 - t) / r) * norm_p ** (t * p / r)
    scale = max(rhs, norm_r, 1e-300)
    rel_margin = (rhs - norm_r) / scale
    ok = norm_r <= rhs * (1.0 + 1e-10) + 1e-300

    beta = (1.0 - t) / r
    epsilon = n_dim * (1.0 - beta) / beta if beta > 0 else float("inf")
    l1_lhs = norm_r ** (1.0 / n_dim)
    c_factor = norm_p ** (t * p / (r * n_dim))
    l1_rhs = c_factor * norm_1 ** (1.0 / (n_dim + epsilon))
    l1_ok = l1_lhs <= l1_rhs * (1.0 + 1e-10) + 1e-300
    return InterpolationVerdict(ok, norm_r, rhs, rel_margin, t, epsilon, l1_ok, l1_lhs, l1_rhs)


# ---------------------------------------------------------------------------
# varying reference forms
# ---------------------------------------------------------------------------


def _rescaled_direction_bound(
    target_form: HermitianForm,
    source_form: HermitianForm,
    moved: ScalarField,
    fixed: ScalarField,
    moved_density: np.ndarray,
    fixed_density: np.ndarray,
    p: float,
    tol: float,
) -> tuple[float, dict]:
    """Bound on sup(moved - fixed) when the two solve against different forms.

    ``moved`` solves against ``source_form``; shrinking it by
    ``c = 1 - exp(-d)`` with the determinant tilt makes it a subsolution for
    ``target_form`` (the form of ``fixed``), and the fixed-form estimate is
    then unwound through the rescale.
    """
    grid = moved.grid
    n = grid.n
    d = form_distance(source_form, target_form)
    slack = 10.0 * tol
    details = {"form_distance": d}
    if d == 0.0 and np.array_equal(source_form.entries, target_form.entries):
        bound, det = _one_sided_bound(
            target_form, moved, fixed, moved_density, fixed_density, p, tol
        )
        details.update(det)
        return bound, details

    c = 1.0 - math.exp(-d)
    if c > 0.5:
        details["branch"] = "coarse-distance"
        return max(moved.max() - fixed.min(), 0.0) + slack, details
    tilt = max(0.0, math.log(target_form.det() / source_form.det()))
    rescaled_vals = (
        (1.0 - c) * moved.values + n * math.log(1.0 - c) + c * moved.min() - tilt
    )
    rescaled = ScalarField(grid, rescaled_vals)
    core, det = _one_sided_bound(
        target_form, rescaled, fixed, moved_density, fixed_density, p, tol
    )
    details.update(det)
    details.update({"c": c, "tilt": tilt})
    # unwind the rescale: moved - fixed <= [core + c(sup fixed - inf moved)
    #                                       - n log(1-c) + tilt] / (1-c)
    bound = (
        core + c * max(fixed.max() - moved.min(), 0.0)
        + 2.0 * n * math.log(2.0) * c + tilt
    ) / (1.0 - c) + slack
    return bound, details


def varying_forms_run(
    f: Density,
    g: Density,
    theta: HermitianForm,
    omega: HermitianForm,
    p: float,
    *,
    tol: float | None = None,
    scale_label: float | None = None,
) -> StabilityReport:
    """Stability of the solutions when both the density and the form move.

    Produces a one-row report whose bound combines the density gap with the
    form distance through the rescaled-potential construction.
    """
    grid = f.grid
    if tol is None:
        tol = default_tolerance(grid)
    dV = NormalizedVolume(grid)
    phi = solve_exponential(theta, f, tol).solution
    psi = solve_exponential(omega, g, tol).solution
    d = form_distance(omega, theta)
    sup_diff = float(np.abs(phi.values - psi.values).max())

    b_psi, det1 = _rescaled_direction_bound(
        theta, omega, psi, phi, g.values, f.values, p, tol
    )
    b_phi, det2 = _rescaled_direction_bound(
        omega, theta, phi, psi, f.values, g.values, p, tol
    )
    bound = max(b_psi, b_phi)
    lp_gap = lp_norm(ScalarField(grid, g.values - f.values), p, dV)
    lp_gap_pos = lp_norm(positive_part(ScalarField(grid, g.values - f.values)), p, dV)
    margin = bound - sup_diff
    row = StabilityRow(
        scale_label if scale_label is not None else d,
        lp_gap,
        lp_gap_pos,
        sup_diff,
        bound,
        margin,
        {"d": d, "psi_direction": det1, "phi_direction": det2},
    )
    if margin < 0:
        raise MarginViolation(
            f"varying-form margin violated: bound {bound:.6e} < {sup_diff:.6e}",
            row=row,
            witness_fields={"phi": phi, "psi": psi},
        )
    report = StabilityReport([row], float("nan"), BarrierConstants())
    report.extra["form_distance"] = d
    return report


# ---------------------------------------------------------------------------
# parabolic stability run
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowData:
    forcing: ForcingSpec
    density: Density
    initial: ScalarField


def _direction_amplitude(
    traj_sub: FlowTrajectory,
    traj_super: FlowTrajectory,
    data_sub: FlowData,
    data_super: FlowData,
    theta: HermitianForm,
    form_path: FormPath,
    p: float,
    T: float,
    tol: float,
) -> tuple[float, BarrierConstants]:
    """Amplitude A for one direction of the parabolic stability estimate.

    Small-gap branch: ``A1 = (M0 + sup|rho| + 2n log 2 + B T) exp(M2/n)``
    over the determinant correction; otherwise the coarse constant built
    from the sandwich barriers.
    """
    grid = traj_sub.grid
    n = grid.n
    constants = parabolic_constants(
        traj_sub, data_sub.forcing, data_super.forcing, data_super.density, p,
        theta=theta,
    )
    gap_pos = constants.gap_pos_p
    if gap_pos == 0.0:
        return 0.0, constants
    dmin = constants.det_correction

    if constants.delta < 0.5:
        h, _ = build_reference_density(data_sub.density, data_super.density, p)
        rho = solve_normalized(theta, h, tol=None).solution
        sup_rho = float(np.abs(rho.values).max())
        amplitude = (
            (constants.M0 + sup_rho + 2.0 * n * math.log(2.0) + constants.B * T)
            * math.exp(constants.M2 / n)
            / dmin ** (1.0 / n)
        )
        return amplitude, constants

    # coarse branch: uniform sandwich bounds stand in for the observed range
    c0_sub = 1.0 / NormalizedVolume(grid).integrate(data_sub.density.field)
    c0_super = 1.0 / NormalizedVolume(grid).integrate(data_super.density.field)
    a_pinch = form_path.pinching(theta)
    rho_sub = solve_normalized(
        theta,
        ScalarField(grid, c0_sub * data_sub.density.values),
        tol=None,
    ).solution
    rho_super = solve_normalized(
        theta,
        ScalarField(grid, c0_super * data_super.density.values),
        tol=None,
    ).solution
    _, v_sub, _ = uniform_bound_barriers(
        rho_sub, data_sub.initial, data_sub.forcing, a_pinch, c0_sub, T,
        form_path=form_path, theta=theta, density=data_sub.density,
    )
    u_super, _, _ = uniform_bound_barriers(
        rho_super, data_super.initial, data_super.forcing, a_pinch, c0_super, T,
        form_path=form_path, theta=theta, density=data_super.density,
    )
    spread = max(v_sub.sup_phi() - u_super.inf_phi(), 0.0)
    amplitude = 2.0 * math.exp(constants.M2 / n) / dmin ** (1.0 / n) * spread
    return amplitude, constants


def parabolic_stability_run(
    data_a: FlowData,
    data_b: FlowData,
    form_path: FormPath,
    T: float,
    p: float,
    *,
    dt: float = 1e-3,
    rtol: float = 1e-8,
    atol: float = 1e-11,
    n_samples: int = 17,
    tol: float | None = None,
    scale_label: float | None = None,
) -> StabilityReport:
    """Evolve both data sets and check the three-term parabolic bound.

    RHS = sup|phi0 - psi0| + T sup|F - G| + A ||g - f||_p^{1/n}, with the
    forcing gap taken over the compact range the trajectories visit (the
    global-in-r gap is reported alongside) and A assembled per direction.
    """
    grid = data_a.density.grid
    if tol is None:
        tol = default_tolerance(grid)
    theta = form_path.lower_bound_form()
    sample_times = np.linspace(0.0, T, n_samples)

    traj_a = evolve(form_path, data_a.forcing, data_a.density, data_a.initial,
                    T, dt, rtol=rtol, atol=atol, sample_times=sample_times)
    traj_b = evolve(form_path, data_b.forcing, data_b.density, data_b.initial,
                    T, dt, rtol=rtol, atol=atol, sample_times=sample_times)

    sup_diff = max(
        float(np.abs(traj_a.snapshots[i].values - traj_b.snapshots[i].values).max())
        for i in range(len(traj_a))
    )
    term_initial = float(np.abs(data_a.initial.values - data_b.initial.values).max())
    r_lo = min(traj_a.inf_phi(), traj_b.inf_phi())
    r_hi = max(traj_a.sup_phi(), traj_b.sup_phi())
    gap_interval = forcing_gap_sup(
        data_a.forcing, data_b.forcing, grid, T, r_interval=(r_lo, r_hi)
    )
    gap_global = forcing_gap_sup(data_a.forcing, data_b.forcing, grid, T, r_interval=None)

    amp_ab, const_ab = _direction_amplitude(
        traj_a, traj_b, data_a, data_b, theta, form_path, p, T, tol
    )
    amp_ba, const_ba = _direction_amplitude(
        traj_b, traj_a, data_b, data_a, theta, form_path, p, T, tol
    )
    amplitude = max(amp_ab, amp_ba)

    dV = NormalizedVolume(grid)
    lp_gap = lp_norm(
        ScalarField(grid, data_b.density.values - data_a.density.values), p, dV
    )
    lp_gap_pos = lp_norm(
        positive_part(
            ScalarField(grid, data_b.density.values - data_a.density.values)
        ),
        p,
        dV,
    )
    slack = 10.0 * tol + 10.0 * max(rtol, atol) * max(1.0, T)
    bound = term_initial + T * gap_interval + amplitude * lp_gap ** (1.0 / grid.n) + slack
    margin = bound - sup_diff

    b1 = max(form_path.b1_bound(),
             data_a.forcing.r_derivative_bound(),
             data_b.forcing.r_derivative_bound())
    drift_c = b1 * grid.n + abs(data_a.forcing.slope_t)
    dot_report = phi_dot_bound_check(traj_a, b1, drift_c)

    row = StabilityRow(
        scale_label if scale_label is not None else lp_gap,
        lp_gap,
        lp_gap_pos,
        sup_diff,
        bound,
        margin,
        {
            "term_initial": term_initial,
            "term_forcing": T * gap_interval,
            "term_density": amplitude * lp_gap ** (1.0 / grid.n),
            "gap_sup_interval": gap_interval,
            "gap_sup_global": gap_global,
            "amplitude": amplitude,
            "steps_a": traj_a.steps,
            "steps_b": traj_b.steps,
            "phi_dot_bound_passed": dot_report.passed,
        },
    )
    if margin < 0:
        raise MarginViolation(
            f"parabolic margin violated: bound {bound:.6e} < {sup_diff:.6e}",
            row=row,
            witness_fields={"phi_T": traj_a.final(), "psi_T": traj_b.final()},
        )
    report = StabilityReport([row], float("nan"), const_ab)
    report.extra["constants_reverse"] = const_ba.to_json_dict()
    report.extra["phi_dot_bound"] = dot_report
    return report


# ---------------------------------------------------------------------------
# oracle verification battery
# ---------------------------------------------------------------------------


def oracle_battery(
    grid: TorusGrid,
    theta: HermitianForm,
    rng,
    *,
    n_shift_pairs: int = 20,
    n_solver_pairs: int = 10,
    n_negative: int = 5,
    n_domination: int = 10,
    tol: float = 1e-8,
) -> list:
    """Seeded battery of oracle checks, returned as report rows.

    Positive cases construct hypothesis-satisfying pairs (constant lifts and
    ordered-density solver pairs); negative controls violate hypothesis and
    conclusion together and must be reported as failing. A parabolic
    comparison probe closes the battery.
    """
    from .families import random_density, random_psh
    from .oracles import comparison_elliptic, comparison_parabolic, domination_check

    rows = []

    def add(oracle, case_id, expected, verdict):
        rows.append(
            {
                "oracle": oracle,
                "case_id": case_id,
                "expected": expected,
                "passed": bool(verdict.passed),
                "hypothesis_met": bool(verdict.hypothesis_met),
                "worst_margin": verdict.worst_margin,
                "ok": bool(verdict.passed == (expected == "pass")),
            }
        )

    for i in range(n_shift_pairs):
        u = random_psh(grid, theta, rng, margin=0.5, amp=0.5)
        c = float(rng.uniform(0.05, 1.0))
        v = ScalarField(grid, u.values + c)
        add("comparison_elliptic", f"shift_{i:03d}", "pass",
            comparison_elliptic(u, v, theta, tol))

    for i in range(n_solver_pairs):
        g_dens = random_density(grid, rng, p=2.0, amp=0.25)
        bump = rng.uniform(0.02, 0.2) * (
            1.0 + np.sin(2 * np.pi * int(rng.integers(1, 3)) * grid.axis_coords(0))
        )
        f_vals = g_dens.values + np.broadcast_to(bump, grid.shape)
        f_dens = Density(ScalarField(grid, f_vals), p=2.0, f_min=g_dens.f_min)
        u = solve_exponential(theta, f_dens, check_uniqueness=False).solution
        v = solve_exponential(theta, g_dens, check_uniqueness=False).solution
        add("comparison_elliptic", f"solver_{i:03d}", "pass",
            comparison_elliptic(u, v, theta, 10.0 * default_tolerance(grid)))

    for i in range(n_negative):
        u = random_psh(grid, theta, rng, margin=0.5, amp=0.5)
        v = ScalarField(grid, u.values - 0.2)
        add("comparison_elliptic", f"negative_{i:03d}", "fail",
            comparison_elliptic(u, v, theta, tol))

    for i in range(n_domination):
        v = random_psh(grid, theta, rng, margin=0.4, amp=0.4)
        w = random_psh(grid, theta, rng, margin=0.4, amp=0.4)
        u = ScalarField(grid, np.maximum(v.values, w.values))
        mask = np.zeros(grid.shape, dtype=bool)
        half = grid.resolution // 2
        mask[(slice(0, half),) + (slice(None),) * (len(grid.shape) - 1)] = True
        add("domination", f"max_{i:03d}", "pass",
            domination_check(u, v, mask, theta, tol))

    # negative domination control: u far below v, mass hypothesis broken
    v = random_psh(grid, theta, rng, margin=0.4, amp=0.4)
    u = ScalarField(grid, v.values - 0.2)
    mask = np.ones(grid.shape, dtype=bool)
    add("domination", "negative_000", "fail", domination_check(u, v, mask, theta, tol))

    # parabolic comparison probe: constant lift of a smooth flow
    from .families import sine_field

    f_vals = 1.0 + 0.2 * sine_field(grid, axis=0, freq=1, amp=1.0).values
    f_vals = f_vals / NormalizedVolume(grid).integrate(f_vals)
    f_dens = Density(ScalarField(grid, f_vals), p=2.0)
    forcing = ForcingSpec("linear_r", slope_r=1.0)
    phi0 = random_psh(grid, theta, rng, margin=0.4, amp=0.3)
    psi0 = ScalarField(grid, phi0.values + 0.25)
    path = FormPath.constant(theta, 0.5)
    times = np.linspace(0.0, 0.5, 6)
    traj_lo = evolve(path, forcing, f_dens, phi0, 0.5, 1e-3, sample_times=times)
    traj_hi = evolve(path, forcing, f_dens, psi0, 0.5, 1e-3, sample_times=times)
    add("comparison_parabolic", "lift_000", "pass",
        comparison_parabolic(traj_lo, traj_hi, forcing, f_dens, path, 1e-4))
    return rows
