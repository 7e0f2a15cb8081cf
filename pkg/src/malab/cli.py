"""Command-line interface: configuration, orchestration, artifact layout.

    malab <subcommand> --config <path> [--out <dir>] [--seed <u64>] [--threads <k>]

Subcommands are the experiment kinds plus ``describe`` (a dry run that
prints the derived plan without computing). Every run writes a manifest
echoing its configuration, the delimited report, and the figures for that
report next to it. Exit codes: 0 success, 1 numeric failure (diagnostic
JSON in the output directory), 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .elliptic import default_tolerance, solve_exponential, solve_normalized
from .errors import (
    ConvergenceError,
    IntegrationError,
    MarginViolation,
    MassMismatchError,
    PositivityError,
)
from .experiments import (
    FlowData,
    PerturbationFamily,
    elliptic_stability_run,
    oracle_battery,
    parabolic_stability_run,
    varying_forms_run,
)
from .families import density_from_config, field_from_config, random_psh
from .geometry import FormPath, HermitianForm, ScalarField, TorusGrid, write_field
from .ma_ops import NormalizedVolume
from .parabolic import ForcingSpec, evolve
from .reporting import (
    plot_oracle_margins,
    plot_stability_loglog,
    plot_trajectory,
    write_json,
    write_stability_csv,
    write_verdict_csv,
)

KINDS = (
    "solve-elliptic",
    "solve-normalized",
    "evolve",
    "stability-elliptic",
    "stability-parabolic",
    "varying-forms",
    "verify-oracles",
)


class UsageError(ValueError):
    """Configuration problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    embedded = raw.get("config")
    if isinstance(embedded, dict) and "kind" in embedded:
        raw = embedded  # accept a manifest with its echoed configuration
    return raw


def _form_from_config(spec, n: int) -> HermitianForm:
    if spec is None:
        return HermitianForm.identity(n)
    if isinstance(spec, (int, float)):
        return HermitianForm(float(spec) * np.eye(n))
    re = np.array(spec["re"], dtype=float)
    im = np.array(spec.get("im", np.zeros_like(re)), dtype=float)
    return HermitianForm(re + 1j * im)


def validate_config(cfg: dict) -> dict:
    if "kind" not in cfg:
        raise UsageError("config is missing 'kind'")
    kind = cfg["kind"]
    if kind not in KINDS:
        raise UsageError(f"unknown kind {kind!r}; expected one of {KINDS}")
    grid_cfg = cfg.get("grid", {})
    n = grid_cfg.get("n", 1)
    res = grid_cfg.get("resolution", 32)
    try:
        TorusGrid(n, res)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    p = cfg.get("p", 2.0)
    if p <= 1.0:
        raise UsageError(f"integrability exponent p must exceed 1, got {p}")
    if cfg.get("tol") is not None and cfg["tol"] <= 0:
        raise UsageError("tol must be positive")
    if kind in ("evolve", "stability-parabolic"):
        if cfg.get("T", 1.0) <= 0 or cfg.get("dt", 1e-3) <= 0:
            raise UsageError("T and dt must be positive")
    for key in ("scales", "omega_scales"):
        if key in cfg and any(s < 0 for s in cfg[key]):
            raise UsageError(f"{key} must be nonnegative")
    try:
        if "forcing" in cfg:
            ForcingSpec.from_dict(cfg["forcing"])
        if "forcing_b" in cfg:
            ForcingSpec.from_dict(cfg["forcing_b"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad forcing spec: {exc}") from exc
    return cfg


def _grid(cfg) -> TorusGrid:
    g = cfg.get("grid", {})
    return TorusGrid(g.get("n", 1), g.get("resolution", 32))


def _rng(cfg, seed_override=None):
    seed = seed_override if seed_override is not None else cfg.get("seed", 0)
    return np.random.default_rng(int(seed)), int(seed)


# ---------------------------------------------------------------------------
# describe
# ---------------------------------------------------------------------------


def describe(cfg: dict) -> str:
    cfg = validate_config(cfg)
    kind = cfg["kind"]
    grid = _grid(cfg)
    p = cfg.get("p", 2.0)
    tol = cfg.get("tol") or default_tolerance(grid)
    lines = [
        f"plan: {kind}",
        f"grid: n={grid.n} resolution={grid.resolution} points={grid.npoints}",
        f"p: {p}  tol: {tol:g}",
        f"memory per field: {grid.npoints * 8 / 1024:.1f} KiB",
    ]
    theta = _form_from_config(cfg.get("theta"), grid.n)
    lines.append(f"theta: min eig {theta.min_eig():.4g}, det {theta.det():.4g}")
    if "forcing" in cfg:
        fo = ForcingSpec.from_dict(cfg["forcing"])
        lines.append(f"forcing: {fo.family} L={fo.lipschitz_L:g}")
    if kind == "evolve":
        T, dt = cfg.get("T", 1.0), cfg.get("dt", 1e-3)
        omega1 = cfg.get("omega1")
        path = FormPath(theta, _form_from_config(omega1, grid.n) if omega1 else theta, T)
        stiff = np.pi**2 * 2 * grid.n * (grid.resolution / 2) ** 2 / theta.min_eig()
        lines.append(f"T={T} dt(initial)={dt:g}")
        lines.append(f"form derivative bound B1: {path.b1_bound():g}")
        lines.append(
            f"step estimate: ~{int(T * max(stiff / 2.5, 1 / dt))} "
            f"(stability-limited explicit stepping)"
        )
    if kind == "stability-elliptic":
        scales = cfg.get("scales", [])
        lines.append(f"scales: {len(scales)} -> {2 * len(scales)} solves (2 per scale)")
    if kind == "stability-parabolic":
        lines.append("flows: 2 (one per data set) plus reference solves")
    if kind == "varying-forms":
        oscales = cfg.get("omega_scales", [])
        count = max(len(oscales), 1)
        lines.append(f"form scales: {count} -> {2 * count} solves (2 per scale)")
    if kind == "verify-oracles":
        lines.append("battery: elliptic comparisons, domination, parabolic probe")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def run(cfg: dict, out_dir, seed=None, threads: int = 1) -> int:
    cfg = validate_config(cfg)
    kind = cfg["kind"]
    os.makedirs(out_dir, exist_ok=True)
    rng, seed_used = _rng(cfg, seed)
    t_start = time.perf_counter()
    artifacts: list[str] = []

    try:
        status = _dispatch(kind, cfg, out_dir, rng, threads, artifacts)
    except (MarginViolation, ConvergenceError, PositivityError,
            IntegrationError, MassMismatchError) as exc:
        diagnostic = {
            "error": type(exc).__name__,
            "message": str(exc),
        }
        if isinstance(exc, ConvergenceError):
            diagnostic["residual_history"] = exc.residual_history
        if isinstance(exc, MarginViolation) and exc.row is not None:
            diagnostic["row"] = {
                "s": exc.row.s,
                "lp_gap": exc.row.lp_gap,
                "sup_diff": exc.row.sup_diff,
                "bound": exc.row.bound,
                "margin": exc.row.margin,
            }
            for name, fld in exc.witness_fields.items():
                path = os.path.join(out_dir, f"witness_{name}.fld")
                write_field(path, fld)
        write_json(os.path.join(out_dir, "diagnostic.json"), diagnostic)
        print(f"error: {exc}", file=sys.stderr)
        status = 1

    manifest = {
        "config": cfg,
        "kind": kind,
        "seed": seed_used,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t_start,
        "artifacts": artifacts,
        "exit_status": status,
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return status


def _dispatch(kind, cfg, out_dir, rng, threads, artifacts) -> int:
    grid = _grid(cfg)
    p = cfg.get("p", 2.0)
    tol = cfg.get("tol")
    theta = _form_from_config(cfg.get("theta"), grid.n)

    if kind == "solve-elliptic":
        f = density_from_config(grid, cfg.get("density", {"family": "constant", "value": 1.0}), p, rng)
        report = solve_exponential(theta, f, tol)
        write_field(os.path.join(out_dir, "solution.fld"), report.solution)
        write_json(os.path.join(out_dir, "solve_report.json"), report.to_json_dict())
        artifacts += ["solution.fld", "solve_report.json"]
        return 0

    if kind == "solve-normalized":
        f = density_from_config(grid, cfg.get("density", {"family": "constant", "value": 1.0}), p, rng)
        report = solve_normalized(theta, f.field, tol)
        write_field(os.path.join(out_dir, "solution.fld"), report.solution)
        write_json(os.path.join(out_dir, "solve_report.json"), report.to_json_dict())
        artifacts += ["solution.fld", "solve_report.json"]
        return 0

    if kind == "evolve":
        f = density_from_config(grid, cfg.get("density", {"family": "constant", "value": 1.0}), p, rng)
        forcing = ForcingSpec.from_dict(cfg.get("forcing", {"family": "zero"}))
        T, dt = cfg.get("T", 1.0), cfg.get("dt", 1e-3)
        omega1 = cfg.get("omega1")
        path = FormPath(theta, _form_from_config(omega1, grid.n) if omega1 else theta, T)
        phi0_cfg = cfg.get("phi0", {"family": "constant", "value": 0.0})
        if phi0_cfg.get("family") == "random_psh":
            phi0 = random_psh(grid, theta, rng, margin=phi0_cfg.get("margin", 0.5),
                              amp=phi0_cfg.get("amp", 0.3))
        else:
            phi0 = field_from_config(grid, phi0_cfg, rng)
        traj = evolve(path, forcing, f, phi0, T, dt,
                      n_samples=cfg.get("samples", 17),
                      rtol=cfg.get("rtol", 1e-8), atol=cfg.get("atol", 1e-11))
        traj.save(os.path.join(out_dir, "trajectory"))
        plot_trajectory(os.path.join(out_dir, "trajectory.svg"), traj, "flow range")
        artifacts += ["trajectory/", "trajectory.svg"]
        return 0

    if kind == "stability-elliptic":
        f = density_from_config(grid, cfg.get("density", {"family": "constant", "value": 1.0}), p, rng)
        direction = field_from_config(grid, cfg.get("direction", {"family": "sine"}), rng)
        family = PerturbationFamily(f, direction, tuple(cfg.get("scales", [0.01, 0.1])),
                                    cfg.get("mode", "additive"))
        report = elliptic_stability_run(family, p, theta, tol=tol, threads=threads)
        _emit_stability(out_dir, report, "elliptic stability", artifacts)
        return 0

    if kind == "varying-forms":
        f = density_from_config(grid, cfg.get("density", {"family": "constant", "value": 1.0}), p, rng)
        g = density_from_config(grid, cfg["density_b"], p, rng) if "density_b" in cfg else f
        rows = []
        extras = {}
        if "omega_scales" in cfg:
            for s in cfg["omega_scales"]:
                omega = theta.scaled(float(np.exp(s)))
                rep = varying_forms_run(f, g, theta, omega, p, tol=tol, scale_label=s)
                rows += rep.rows
                extras[f"s={s}"] = rep.extra
        else:
            omega = _form_from_config(cfg.get("omega"), grid.n)
            rep = varying_forms_run(f, g, theta, omega, p, tol=tol)
            rows += rep.rows
            extras["single"] = rep.extra
        from .experiments import StabilityReport
        from .barriers import BarrierConstants

        report = StabilityReport(rows, float("nan"), BarrierConstants(), extras)
        _emit_stability(out_dir, report, "varying reference forms", artifacts)
        return 0

    if kind == "stability-parabolic":
        f = density_from_config(grid, cfg.get("density", {"family": "constant", "value": 1.0}), p, rng)
        g = density_from_config(grid, cfg["density_b"], p, rng) if "density_b" in cfg else f
        forcing_a = ForcingSpec.from_dict(cfg.get("forcing", {"family": "linear_r", "slope_r": 1.0}))
        forcing_b = ForcingSpec.from_dict(cfg.get("forcing_b", cfg.get("forcing", {"family": "linear_r", "slope_r": 1.0})))
        T, dt = cfg.get("T", 1.0), cfg.get("dt", 1e-3)
        omega1 = cfg.get("omega1")
        path = FormPath(theta, _form_from_config(omega1, grid.n) if omega1 else theta, T)
        phi0 = _initial_field(cfg.get("phi0"), grid, theta, rng)
        psi0 = _initial_field(cfg.get("phi0_b"), grid, theta, rng)
        report = parabolic_stability_run(
            FlowData(forcing_a, f, phi0), FlowData(forcing_b, g, psi0), path, T, p,
            dt=dt, n_samples=cfg.get("samples", 17), tol=tol,
        )
        _emit_stability(out_dir, report, "parabolic stability", artifacts)
        return 0

    if kind == "verify-oracles":
        rows = oracle_battery(grid, theta, rng)
        write_verdict_csv(os.path.join(out_dir, "verdicts.csv"), rows)
        write_json(os.path.join(out_dir, "verdicts.json"), {"rows": rows})
        plot_oracle_margins(os.path.join(out_dir, "verdicts.svg"), rows, "oracle margins")
        artifacts += ["verdicts.csv", "verdicts.json", "verdicts.svg"]
        failures = [r for r in rows if not r["ok"]]
        if failures:
            print(f"{len(failures)} oracle case(s) failed", file=sys.stderr)
            return 1
        return 0

    raise UsageError(f"unhandled kind {kind!r}")


def _initial_field(spec, grid, theta, rng) -> ScalarField:
    if spec is None:
        return ScalarField.zeros(grid)
    if spec.get("family") == "random_psh":
        return random_psh(grid, theta, rng, margin=spec.get("margin", 0.5),
                          amp=spec.get("amp", 0.3))
    return field_from_config(grid, spec, rng)


def _emit_stability(out_dir, report, title, artifacts) -> None:
    write_stability_csv(os.path.join(out_dir, "report.csv"), report.rows)
    payload = {
        "fitted_exponent": report.fitted_exponent,
        "constants_used": report.constants_used.to_json_dict(),
        "max_lhs_rhs_ratio": report.max_lhs_rhs_ratio(),
        "rows": [
            {
                "s": r.s,
                "lp_gap": r.lp_gap,
                "lp_gap_pos": r.lp_gap_pos,
                "sup_diff": r.sup_diff,
                "bound": r.bound,
                "margin": r.margin,
            }
            for r in report.rows
        ],
    }
    for key, value in report.extra.items():
        if isinstance(value, (int, float, str, bool, dict, list)) or value is None:
            payload.setdefault("extra", {})[key] = value
    write_json(os.path.join(out_dir, "report.json"), payload)
    plot_stability_loglog(os.path.join(out_dir, "report.svg"), report.rows, title)
    artifacts += ["report.csv", "report.json", "report.svg"]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="malab",
        description="Monge-Ampere laboratory on the flat complex torus",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS + ("describe",):
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="rng seed override")
        sp.add_argument("--threads", type=int, default=1,
                        help="concurrent solves inside one run")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "describe":
            print(describe(cfg))
            return 0
        if cfg.get("kind") != args.command:
            raise UsageError(
                f"subcommand {args.command!r} does not match config kind "
                f"{cfg.get('kind')!r}"
            )
        out_dir = args.out or cfg.get("out") or f"runs/{args.command}"
        return run(cfg, out_dir, seed=args.seed, threads=args.threads)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
