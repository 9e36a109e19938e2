"""Render figures for a completed study directory.

Reads the CSV artifacts written by :func:`borefield_uq.scenario.run_study`
and saves PNG figures next to them: mean/std evolution across scenarios,
relative differences against the deterministic reference, output
densities, heat-pump COP, and per-exchanger marginal surfaces.
"""

from __future__ import annotations

import csv
import glob
import os

import numpy as np

from .scenario import RESULT_COLUMNS, _cell_tag


def _load_results(study_dir):
    path = os.path.join(study_dir, "results.csv")
    if not os.path.exists(path):
        raise ValueError(f"{study_dir} has no results.csv; run a study first")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    for row in rows:
        for key in RESULT_COLUMNS:
            if key not in ("layout", "distribution", "termination"):
                row[key] = float(row[key])
    return rows


def _groups(rows):
    layouts = sorted({r["layout"] for r in rows})
    dists = sorted({r["distribution"] for r in rows})
    scenarios = sorted({r["scenario_deg"] for r in rows})
    return layouts, dists, scenarios


def _series(rows, layout, dist, column):
    pts = sorted(((r["scenario_deg"], r[column]) for r in rows
                  if r["layout"] == layout and r["distribution"] == dist))
    return [p[0] for p in pts], [p[1] for p in pts]


def render_study(study_dir, out_dir) -> list[str]:
    """Render all figures for ``study_dir``; returns the files written."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = _load_results(study_dir)
    layouts, dists, scenarios = _groups(rows)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def save(fig, name):
        path = os.path.join(out_dir, name)
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    # mean +- std and std evolution across scenarios
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    for layout in layouts:
        for dist in dists:
            x, m = _series(rows, layout, dist, "mean_c")
            _, s = _series(rows, layout, dist, "std_c")
            label = f"{layout} ({dist})"
            axes[0].errorbar(x, m, yerr=s, marker="o", capsize=3, label=label)
            axes[1].plot(x, s, marker="o", label=label)
    axes[0].set_xlabel("max inclination (deg)")
    axes[0].set_ylabel("mean T_avg (C)")
    axes[0].set_title("mean with one standard deviation")
    axes[1].set_xlabel("max inclination (deg)")
    axes[1].set_ylabel("std of T_avg (C)")
    axes[1].set_title("standard deviation")
    axes[1].legend(fontsize=8)
    save(fig, "evolution.png")

    # relative differences vs the deterministic reference
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for layout in layouts:
        for dist in dists:
            x, dm = _series(rows, layout, dist, "mean_rel_diff_pct")
            _, dt = _series(rows, layout, dist, "t_min_rel_diff_pct")
            ax.plot(x, dm, marker="o", label=f"{layout} ({dist}) mean")
            ax.plot(x, dt, marker="s", linestyle="--",
                    label=f"{layout} ({dist}) lower bound")
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("max inclination (deg)")
    ax.set_ylabel("difference vs reference (%)")
    ax.legend(fontsize=7)
    save(fig, "relative_differences.png")

    # heat-pump COP of the mean
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for layout in layouts:
        for dist in dists:
            x, c = _series(rows, layout, dist, "cop")
            ax.plot(x, c, marker="o", label=f"{layout} ({dist})")
    ax.set_xlabel("max inclination (deg)")
    ax.set_ylabel("COP of mean T_avg")
    ax.legend(fontsize=8)
    save(fig, "cop.png")

    # output densities, one panel per layout, curves per scenario
    for dist in dists:
        fig, axes = plt.subplots(1, len(layouts),
                                 figsize=(5.2 * len(layouts), 4.0), squeeze=False)
        for ax, layout in zip(axes[0], layouts):
            for deg in scenarios:
                path = os.path.join(study_dir,
                                    f"density_{_cell_tag(layout, deg)}_{dist}.csv")
                if not os.path.exists(path):
                    continue
                data = np.loadtxt(path, delimiter=",", skiprows=1)
                if data.ndim == 1 or data.shape[0] < 2:
                    continue  # degenerate scenario (point mass)
                ax.plot(data[:, 0], data[:, 1], label=f"{deg:g} deg")
            ax.set_title(f"{layout} ({dist})")
            ax.set_xlabel("T_avg (C)")
            ax.set_ylabel("density")
            ax.legend(fontsize=8)
        save(fig, f"densities_{dist}.png")

    # per-exchanger marginal surfaces, one figure per cell
    for layout in layouts:
        for deg in scenarios:
            tag = _cell_tag(layout, deg)
            paths = sorted(glob.glob(os.path.join(study_dir, f"marginal_{tag}_bhe*.csv")),
                           key=lambda p: int(p.rsplit("bhe", 1)[1].split(".")[0]))
            if not paths:
                continue
            cols = int(np.ceil(np.sqrt(len(paths))))
            rows_n = int(np.ceil(len(paths) / cols))
            fig, axes = plt.subplots(rows_n, cols,
                                     figsize=(3.6 * cols, 3.0 * rows_n),
                                     squeeze=False)
            for k, path in enumerate(paths):
                ax = axes[k // cols][k % cols]
                data = np.loadtxt(path, delimiter=",", skiprows=1)
                az = np.unique(data[:, 0])
                inc = np.unique(data[:, 1])
                table = data[:, 2].reshape(az.size, inc.size)
                pc = ax.pcolormesh(az, inc, table.T, shading="auto", cmap="RdBu_r")
                fig.colorbar(pc, ax=ax, label="% vs reference")
                bhe = path.rsplit("bhe", 1)[1].split(".")[0]
                ax.set_title(f"exchanger {bhe}", fontsize=9)
                ax.set_xlabel("azimuth (deg)")
                ax.set_ylabel("inclination (deg)")
            for k in range(len(paths), rows_n * cols):
                axes[k // cols][k % cols].axis("off")
            save(fig, f"marginals_{tag}.png")

    return written
