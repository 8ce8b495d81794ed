"""Figure renderers for the report files.

Figures are saved to files (Agg backend); the CSV/JSONL data remains the
authoritative output, the PNGs are companions for eyeballing.
"""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def _group_curves(rows, key_idx=0, x_idx=1, y_idx=2):
    curves = defaultdict(list)
    for row in rows:
        curves[row[key_idx]].append((row[x_idx], row[y_idx]))
    return {k: sorted(v) for k, v in curves.items()}


def render_boundary_curves(report, path) -> None:
    """Step curves of the exit depth over the unit interval, one per n."""
    curves = _group_curves(report.rows)
    fig, ax = plt.subplots(figsize=(7, 5))
    for n, pts in sorted(curves.items()):
        xs, ys = zip(*pts)
        ax.step(xs, ys, where="post", label=f"n={n}", lw=1.0)
    ax.set_xlabel("end position on [0,1]")
    ax.set_ylabel("exit depth")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_smoothed_curves(report, path) -> None:
    curves = _group_curves(report.rows)
    fig, ax = plt.subplots(figsize=(7, 5))
    for n, pts in sorted(curves.items()):
        xs, ys = zip(*pts)
        ax.plot(xs, ys, label=f"n={n}", lw=1.0)
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.set_xlabel("end position on [0,1]")
    ax.set_ylabel("smoothed centered silhouette")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_edge_freeze(report, path) -> None:
    """Histogram of entry times per window pair (missing = never entered)."""
    per_pair = defaultdict(list)
    never = defaultdict(int)
    for seed, i, j, t in report.rows:
        if t == "" or t is None:
            never[(i, j)] += 1
        else:
            per_pair[(i, j)].append(int(t))
    fig, ax = plt.subplots(figsize=(7, 5))
    for (i, j), times in sorted(per_pair.items()):
        label = f"pair ({i},{j})"
        if never[(i, j)]:
            label += f" [{never[(i, j)]} never]"
        ax.hist(times, bins=30, histtype="step", label=label)
    ax.set_xlabel("entry time")
    ax.set_ylabel("runs")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_rho_convergence(report, path) -> None:
    by_h = defaultdict(list)
    for h_id, n, mean, stderr, expected in report.rows:
        by_h[h_id].append((n, mean, stderr, expected))
    fig, ax = plt.subplots(figsize=(7, 5))
    for h_id, pts in sorted(by_h.items()):
        pts.sort()
        ns = [p[0] for p in pts]
        means = [p[1] for p in pts]
        errs = [p[2] for p in pts]
        line = ax.errorbar(ns, means, yerr=errs, label=h_id, capsize=2)
        ax.axhline(pts[0][3], color=line.lines[0].get_color(), ls="--", lw=0.6)
    ax.set_xlabel("n")
    ax.set_ylabel("sampling density")
    ax.legend()
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


_RENDERERS = {
    "figure1": render_boundary_curves,
    "figure2": render_smoothed_curves,
    "edge-freeze": render_edge_freeze,
    "rho-convergence": render_rho_convergence,
}


def render_report(kind: str, report, path) -> None:
    _RENDERERS[kind](report, path)
