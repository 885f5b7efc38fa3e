"""Benchmark report rendering: markdown/CSV tables and matplotlib figures.

The figure palette follows the map legend used throughout the project:
violet for unknown, blue for free space, yellow for obstacles.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .gridmap import FREE, OCCUPIED, UNKNOWN, GoalHeatmap, OccupancyGrid  # noqa: E402

PALETTE = {"unknown": "#5b3a9b", "free": "#3b6fd4", "occupied": "#f2c12e"}
GRID_CMAP = ListedColormap([PALETTE["unknown"], PALETTE["free"], PALETTE["occupied"]])

_METHOD_LABELS = {
    "a": ("GT", "--", "--"),
    "b": ("GT", "GT", "GT"),
    "c": ("GT", "Pred", "GT"),
    "d": ("GT", "GT", "Pred"),
    "e": ("GT", "Pred", "Pred"),
}


def render_markdown(report) -> str:
    """Success-rate table shaped like the benchmark matrix."""
    diameters = sorted({int(k.split("|")[1]) for k in report.cells})
    v_maxes = sorted({float(k.split("|")[2]) for k in report.cells})
    configs = sorted({k.split("|")[0] for k in report.cells})
    out = io.StringIO()
    out.write("# Benchmark report\n\n")
    out.write(f"- config hash: `{report.config_hash}`\n")
    out.write(f"- tool version: {report.tool_version}\n")
    out.write(f"- seeds: {report.seeds}\n")
    out.write(f"- flagged episodes (remote fallback, excluded): {report.flagged_episodes}\n\n")
    header = ["Case", "L1", "L2 Map", "L2 Subgoal"]
    for d in diameters:
        for v in v_maxes:
            header.append(f"ld {d} @ {v:g} m/s")
    out.write("| " + " | ".join(header) + " |\n")
    out.write("|" + "---|" * len(header) + "\n")
    for c in configs:
        l1, l2m, l2g = _METHOD_LABELS.get(c, ("?", "?", "?"))
        row = [f"({c})", l1, l2m, l2g]
        for d in diameters:
            for v in v_maxes:
                r = report.rate(c, d, v)
                cell = report.cells.get(report.key(c, d, v), {})
                n = cell.get("trials", 0)
                row.append("--" if r is None else f"{r:.2f} (n={n})")
        out.write("| " + " | ".join(row) + " |\n")
    return out.getvalue()


def render_csv(report) -> str:
    """Delimited per-cell results."""
    out = io.StringIO()
    w = csv.writer(out)
    w.writerow(["config", "link_diameter", "v_max", "successes", "collisions",
                "timeouts", "trials", "flagged", "success_rate"])
    for key in sorted(report.cells):
        c, d, v = key.split("|")
        cell = report.cells[key]
        rate = "" if cell["trials"] == 0 else f"{cell['successes'] / cell['trials']:.4f}"
        w.writerow([c, d, v, cell["successes"], cell["collisions"], cell["timeouts"],
                    cell["trials"], cell["flagged"], rate])
    return out.getvalue()


def success_rate_figure(report, v_max: float, path: str | Path) -> None:
    """Grouped bars: success rate per link diameter for each config."""
    diameters = sorted({int(k.split("|")[1]) for k in report.cells})
    configs = sorted({k.split("|")[0] for k in report.cells})
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(configs), 1)
    xs = np.arange(len(diameters))
    for i, c in enumerate(configs):
        rates = [report.rate(c, d, v_max) for d in diameters]
        vals = [0.0 if r is None else r for r in rates]
        ax.bar(xs + i * width, vals, width, label=f"({c})")
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels([str(d) for d in diameters])
    ax.set_xlabel("link diameter")
    ax.set_ylabel("success rate")
    ax.set_ylim(0, 1.05)
    ax.set_title(f"success rate at v_max = {v_max:g} m/s")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def grid_axes_image(ax, grid: OccupancyGrid, alpha: float = 1.0) -> None:
    ax.imshow(grid.cells + 1, cmap=GRID_CMAP, vmin=0, vmax=2, origin="lower",
              alpha=alpha, interpolation="nearest")


def training_pair_figure(pair, path: str | Path) -> None:
    """Level-1 / Level-2 / heatmap panels for one training pair."""
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6))
    grid_axes_image(axes[0], pair.l1)
    axes[0].set_title("Level-1")
    grid_axes_image(axes[1], pair.l2)
    axes[1].set_title("Level-2")
    axes[2].imshow(pair.heatmap.values, cmap="magma", origin="lower",
                   interpolation="nearest")
    axes[2].set_title("subgoal heatmap")
    for ax in axes:
        ax.plot(120, 120, marker=(3, 0, -90), color="red", markersize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle(f"{pair.record_id}  instructions={[i.to_json() for i in pair.instructions]}",
                 fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def episode_figure(episode, path: str | Path, traces: dict[str, list] | None = None) -> None:
    """World-frame view of an environment, its route, and optional traces."""
    fig, ax = plt.subplots(figsize=(6, 6))
    v = episode.env.vertices
    ring = np.vstack([v, v[:1]])
    ax.fill(ring[:, 0], ring[:, 1], color=PALETTE["free"], alpha=0.35, zorder=0)
    ax.plot(ring[:, 0], ring[:, 1], color=PALETTE["occupied"], lw=2)
    ax.plot(episode.route.points[:, 0], episode.route.points[:, 1], "k--", lw=1,
            label="route")
    ax.plot(*episode.start, "go", label="start")
    ax.plot(*episode.goal, "r*", markersize=12, label="goal")
    for label, trace in (traces or {}).items():
        pts = np.array([t["pose"][:2] for t in trace])
        ax.plot(pts[:, 0], pts[:, 1], lw=1.5, label=label)
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    ax.set_title(f"episode {episode.episode_id} (link diameter {episode.link_diameter})")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def write_report_files(report, out_dir: str | Path, figures: bool = True) -> list[Path]:
    """Write report.json, report.md, report.csv, and success-rate figures."""
    from .datagen import canonical_json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    p = out_dir / "report.json"
    p.write_text(canonical_json(report.to_json()) + "\n")
    files.append(p)
    p = out_dir / "report.md"
    p.write_text(render_markdown(report))
    files.append(p)
    p = out_dir / "report.csv"
    p.write_text(render_csv(report))
    files.append(p)
    if figures:
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        for v in sorted({float(k.split("|")[2]) for k in report.cells}):
            fp = fig_dir / f"success_rate_v{v:g}.png"
            success_rate_figure(report, v, fp)
            files.append(fp)
    return files
