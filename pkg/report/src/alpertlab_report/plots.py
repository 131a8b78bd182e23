"""SVG figures for the decay and frame-sweep experiments.

Figures are regenerated on every call and written under names derived from the
source file's content hash, so a rerun with the same configuration reproduces
the same file names.  All annotation numbers are quoted verbatim from the CSV.
"""

from __future__ import annotations

import json
import math
import os
import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .tables import SweepTable


def build_decay_figure(table: SweepTable):
    """Log-log scatter per case with the CSV's fitted line and the expected
    reference slope; returns (figure, info) with one fitted line per case."""
    cases = table.groups("case")
    ncase = len(cases)
    ncols = min(3, ncase)
    nrows = math.ceil(ncase / ncols)
    fig, axes = plt.subplots(nrows, ncols, figsize=(4.2 * ncols, 3.4 * nrows),
                             squeeze=False)
    info = {"cases": [], "fitted_lines": 0}
    for k, (case, rows) in enumerate(cases.items()):
        ax = axes[k // ncols][k % ncols]
        xs = np.array([float(r["ratio"]) for r in rows])
        ys = np.array([float(r["value"]) for r in rows])
        slope_str = rows[0]["slope"]
        expected_str = rows[0]["expected"]
        ax.plot(xs, np.maximum(ys, 1e-300), "o", ms=5, label="measured")
        if np.all(ys > 0) and len(xs) > 1 and xs.min() != xs.max():
            slope = float(slope_str)
            anchor = ys[0] * (xs / xs[0]) ** slope
            ax.plot(xs, anchor, "-", lw=1.4,
                    label=f"fit: slope {slope_str}")
            expected = float(expected_str)
            ref = ys[0] * (xs / xs[0]) ** expected
            ax.plot(xs, ref, "--", lw=1.1, color="gray",
                    label=f"expected: {expected_str}")
            info["fitted_lines"] += 1
            ax.set_xscale("log", base=2)
            ax.set_yscale("log", base=2)
        ax.set_title(case)
        ax.set_xlabel("scale ratio / eta")
        ax.set_ylabel("|inner product|")
        ax.legend(fontsize=7)
        info["cases"].append(case)
    for k in range(ncase, nrows * ncols):
        axes[k // ncols][k % ncols].axis("off")
    fig.tight_layout()
    return fig, info


def render_decay_plot(csv_path: str, out_dir: str | None = None) -> str:
    table = SweepTable.load(csv_path, "inner_decay")
    fig, _ = build_decay_figure(table)
    out_dir = out_dir or os.path.dirname(csv_path) or "."
    os.makedirs(out_dir, exist_ok=True)
    out = os.path.join(out_dir, f"decay_{table.content_hash()}.svg")
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out


def build_sweep_figure(table: SweepTable, summary: dict | None):
    """Deviation and residuals against beta, with the measured eta_0 marked."""
    groups = table.groups("metric")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 3.6))
    dev_rows = groups.get("deviation", [])
    betas = [float(r["beta"]) for r in dev_rows]
    devs = [float(r["value"]) for r in dev_rows]
    ax1.semilogy(betas, devs, "o-", label="deviation")
    tr = groups.get("deviation_transpose", [])
    if tr:
        ax1.semilogy([float(r["beta"]) for r in tr], [float(r["value"]) for r in tr],
                     "s--", ms=4, label="transpose")
    eta0 = summary.get("eta0_measured") if summary else None
    if eta0 is not None:
        ax1.axvline(-math.log2(eta0), color="gray", lw=1.0, ls=":",
                    label=f"measured eta0 = {eta0:g}")
    else:
        warnings.warn("eta0 missing from the JSON summary; plotting without marker")
    ax1.set_xlabel("beta (eta = 2^-beta)")
    ax1.set_ylabel("||I - S_eta||_2")
    ax1.legend(fontsize=8)
    res = [r for r in groups.get("residual", [])]
    ps = sorted({r["p"] for r in res})
    for p in ps:
        for f in sorted({r["f"] for r in res if r["p"] == p}):
            rows = [r for r in res if r["p"] == p and r["f"] == f]
            ax2.semilogy([float(r["beta"]) for r in rows],
                         [max(float(r["value"]), 1e-300) for r in rows],
                         "o-", ms=4, label=f"{f}, p={p}")
    ax2.set_xlabel("beta (eta = 2^-beta)")
    ax2.set_ylabel("relative reproduction residual, p in {" + ", ".join(ps) + "}")
    ax2.legend(fontsize=7)
    fig.tight_layout()
    return fig, {"ps": ps, "eta0": eta0}


def render_eta_sweep(csv_path: str, json_path: str | None = None,
                     out_dir: str | None = None) -> str:
    table = SweepTable.load(csv_path, "frame")
    summary = None
    if json_path is None:
        guess = os.path.join(os.path.dirname(csv_path), "frame_summary.json")
        json_path = guess if os.path.exists(guess) else None
    if json_path is not None:
        with open(json_path) as fh:
            summary = json.load(fh)
    fig, _ = build_sweep_figure(table, summary)
    out_dir = out_dir or os.path.dirname(csv_path) or "."
    os.makedirs(out_dir, exist_ok=True)
    out = os.path.join(out_dir, f"sweep_{table.content_hash()}.svg")
    fig.savefig(out, format="svg")
    plt.close(fig)
    return out
