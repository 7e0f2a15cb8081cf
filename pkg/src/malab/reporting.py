"""Report emission: delimited tables, JSON manifests, and figures.

CSV outputs are byte-stable for a fixed configuration and seed: floats are
written with repr-faithful precision and rows are sorted by their scale
column before writing. Figures are rendered with the Agg backend next to
the tables they illustrate.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

STABILITY_COLUMNS = ("s", "lp_gap", "lp_gap_pos", "sup_diff", "bound", "margin")
VERDICT_COLUMNS = (
    "oracle",
    "case_id",
    "expected",
    "passed",
    "hypothesis_met",
    "worst_margin",
    "ok",
)


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_stability_csv(path, rows) -> None:
    """Rows are StabilityRow objects; columns are fixed by contract."""
    lines = [",".join(STABILITY_COLUMNS)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row.csv_values()))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_verdict_csv(path, rows: list) -> None:
    lines = [",".join(VERDICT_COLUMNS)]
    for row in rows:
        lines.append(",".join(fmt(row[c]) for c in VERDICT_COLUMNS))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_json_dict"):
        return obj.to_json_dict()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def plot_stability_loglog(path, rows, title: str) -> None:
    """Log-log figure of the observed gap and its bound, written as SVG."""
    gaps = np.array([r.lp_gap for r in rows])
    diffs = np.array([r.sup_diff for r in rows])
    bounds = np.array([r.bound for r in rows])
    mask = (gaps > 0) & (diffs > 0)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    if mask.any():
        ax.loglog(gaps[mask], diffs[mask], "o-", label="sup |phi - psi|")
        ax.loglog(gaps[mask], bounds[mask], "s--", label="bound")
    ax.set_xlabel(r"$\|f-g\|_p$")
    ax.set_ylabel("sup-norm gap")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_trajectory(path, traj, title: str) -> None:
    """Range of the potential along the flow, written as SVG."""
    t = np.asarray(traj.times)
    sup = [s.max() for s in traj.snapshots]
    inf = [s.min() for s in traj.snapshots]
    dot_sup = [d.max() for d in traj.phi_dot]
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.plot(t, sup, label="sup phi")
    ax.plot(t, inf, label="inf phi")
    ax.plot(t, dot_sup, ":", label="sup phi_dot")
    ax.set_xlabel("t")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_oracle_margins(path, rows, title: str) -> None:
    """Scatter of conclusion margins per oracle case, written as SVG."""
    margins = [r["worst_margin"] for r in rows]
    colors = ["tab:green" if r["ok"] else "tab:red" for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.scatter(range(len(rows)), margins, c=colors, s=14)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("case")
    ax.set_ylabel("worst margin")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
