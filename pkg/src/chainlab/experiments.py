"""Experiment configs, digit streams, reports, and the run bundle.

Reports are plain (columns, rows) pairs written as CSV or JSONL; the figure
reports additionally render to PNG next to the data file.  Every report is
reproducible byte-for-byte from (config, master seed, digits table): each
replicate draws from a stream addressed by its index, so parallel and serial
runs merge to identical rows.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Iterable, NamedTuple

import numpy as np

from . import __version__
from .chains import ChainSpec, entry_time, simulate, trajectory_to_jsonl
from .errors import CapabilityError
from .graphs import Graph, sampling_density
from .martin import er_limit_value
from .rng import splitmix64, stream
from .silhouette import LabeledTree, SilhouetteCurve, end_grid, end_to_unit

PI_STREAM_CAP = 10_000

NAMED_SUBGRAPHS: dict[str, Graph] = {
    "point": Graph.single_vertex(),
    "K2": Graph.complete(2),
    "K3": Graph.complete(3),
    "path3": Graph.from_edges(3, [(1, 2), (2, 3)]),
    "empty2": Graph.empty(2),
    "empty3": Graph.empty(3),
}

OUTPUT_KINDS = ("figure1", "figure2", "edge-freeze", "rho-convergence", "trajectory")
_OUTPUT_CHAIN = {
    "figure1": "bst",
    "figure2": "bst",
    "edge-freeze": "uniform-attachment",
    "rho-convergence": "er-relabel",
}


class Report(NamedTuple):
    columns: tuple[str, ...]
    rows: list[tuple]


def replicate_seed(master_seed: int, r: int) -> int:
    """Stable per-replicate seed; independent of evaluation order."""
    return splitmix64(splitmix64(master_seed) ^ r)


# ---------------------------------------------------------------------------
# Digit streams
# ---------------------------------------------------------------------------

def _pi_digits() -> str:
    return resources.files("chainlab.data").joinpath("pi_digits.txt").read_text().strip()


def pi_digit_stream(which: str, count: int) -> list[float]:
    """Keys from alternating ten-digit blocks of the fractional expansion of
    pi: block 1, 3, 5, ... feed the left stream, block 2, 4, 6, ... the right.

    The vendored table holds 2*10^5 decimals, enough for 10^4 keys per
    stream; the values of each stream are checked pairwise distinct.
    """
    which = {"left": "left", "right": "right", "pi-left": "left", "pi-right": "right"}.get(which)
    if which is None:
        raise ValueError("stream must be 'left' or 'right'")
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > PI_STREAM_CAP:
        raise CapabilityError(f"digit table serves at most {PI_STREAM_CAP} keys per stream")
    digits = _pi_digits()
    offset = 0 if which == "left" else 10
    vals = []
    for t in range(count):
        start = offset + 20 * t
        block = digits[start : start + 10]
        if len(block) < 10:
            raise CapabilityError("digit table exhausted")
        vals.append(float("0." + block))
    if len(set(vals)) != len(vals):
        raise AssertionError("digit blocks collide; stream keys must be distinct")
    return vals


# ---------------------------------------------------------------------------
# Figure data
# ---------------------------------------------------------------------------

def figure1_data(n_list: Iterable[int], seed: int, depth: int) -> Report:
    """Exit-depth step curves over the end grid for several times along one
    shared tree-chain run: columns (n, beta, B_value)."""
    n_list = sorted(set(int(n) for n in n_list))
    if depth > 16:
        raise ValueError("grid depth capped at 16")
    if min(n_list) < 1:
        raise ValueError("times must be >= 1")
    tr = simulate(ChainSpec("bst"), max(n_list), seed)
    grid = end_grid(depth)
    betas = [end_to_unit(u) for u in grid]
    rows = []
    for n in n_list:
        curve = SilhouetteCurve(tr.state_at(n))
        for u, beta in zip(grid, betas):
            rows.append((n, beta, curve.boundary(u)))
    return Report(("n", "beta", "B_value"), rows)


def figure2_data(
    n_list: Iterable[int],
    source: str,
    depth: int,
    *,
    seed: int = 0,
) -> Report:
    """Smoothed-silhouette curves at the requested sizes, driven by a pi
    digit stream or by seeded uniform keys: columns (n, beta, Y_value)."""
    n_list = sorted(set(int(n) for n in n_list))
    if depth > 16:
        raise ValueError("grid depth capped at 16")
    n_max = max(n_list)
    if source in ("pi-left", "pi-right", "left", "right"):
        keys = pi_digit_stream(source, n_max)
    elif source == "seed":
        keys = list(stream(seed, 3).random(n_max))
    else:
        raise ValueError(f"unknown key source {source!r}")
    grid = end_grid(depth)
    betas = [end_to_unit(u) for u in grid]
    rows = []
    tree = LabeledTree()
    consumed = 0
    for n in n_list:
        for key in keys[consumed:n]:
            tree = tree.insert(key)
        consumed = n
        curve = SilhouetteCurve(tree.shape())
        for u, beta in zip(grid, betas):
            rows.append((n, beta, curve.smoothed(u).value))
    return Report(("n", "beta", "Y_value"), rows)


def left_subtree_proportion(source: str, n: int) -> float:
    """Fraction of the first n inserted keys that landed in the left subtree."""
    keys = pi_digit_stream(source, n) if source != "seed" else None
    if keys is None:
        raise ValueError("left_subtree_proportion needs a pi stream source")
    tree = LabeledTree()
    for key in keys:
        tree = tree.insert(key)
    return tree.shape().fringe_count((0,)) / n


# ---------------------------------------------------------------------------
# Graph-chain reports
# ---------------------------------------------------------------------------

def edge_freeze_report(window: int, horizon: int, seeds: int, master_seed: int) -> Report:
    """Entry time of every pair inside the window along attachment runs:
    columns (seed, i, j, entry_time) with empty entry_time when the pair has
    not entered by the horizon."""
    if window > 6:
        raise ValueError("window capped at 6")
    if window < 2 or horizon < window:
        raise ValueError("need 2 <= window <= horizon")
    spec = ChainSpec("uniform-attachment")
    pairs = [(i, j) for j in range(2, window + 1) for i in range(1, j)]
    rows = []
    for r in range(seeds):
        tr = simulate(spec, horizon, replicate_seed(master_seed, r))
        for i, j in pairs:
            t = entry_time(tr, (i, j))
            rows.append((r, i, j, t if t is not None else ""))
    return Report(("seed", "i", "j", "entry_time"), rows)


def _rho_one_replicate(args) -> list[tuple]:
    theta, names, checkpoints, seed = args
    spec = ChainSpec("er-relabel", theta)
    tr = simulate(spec, max(checkpoints), seed)
    out = []
    for n in checkpoints:
        g = tr.state_at(n)
        for name in names:
            out.append((name, n, sampling_density(NAMED_SUBGRAPHS[name], g)))
    return out


def rho_convergence_report(
    theta: float,
    subgraphs: Iterable[str],
    checkpoints: Iterable[int],
    replicates: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> Report:
    """Sampling densities of fixed subgraphs along relabeled binomial runs,
    averaged over replicates: columns (H_id, n, mean_rho, stderr, expected).

    The expected column is the closed-form limit value of each subgraph.
    """
    names = list(subgraphs)
    for name in names:
        if name not in NAMED_SUBGRAPHS:
            raise ValueError(f"unknown subgraph id {name!r}")
    checkpoints = sorted(set(int(n) for n in checkpoints))
    if min(checkpoints) < max(NAMED_SUBGRAPHS[n].n for n in names):
        raise ValueError("checkpoints must not precede the largest subgraph")
    jobs = [
        (theta, names, checkpoints, replicate_seed(master_seed, r))
        for r in range(replicates)
    ]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(_rho_one_replicate, jobs))
    else:
        per_rep = [_rho_one_replicate(j) for j in jobs]
    samples: dict[tuple[str, int], list[float]] = {}
    for rep_rows in per_rep:  # merge keyed by (H, n); replicate order fixed
        for name, n, rho in rep_rows:
            samples.setdefault((name, n), []).append(rho)
    rows = []
    for name in names:
        expected = er_limit_value(NAMED_SUBGRAPHS[name], theta)
        for n in checkpoints:
            vals = samples[(name, n)]
            mean = float(np.mean(vals))
            stderr = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            rows.append((name, n, mean, stderr, expected))
    return Report(("H_id", "n", "mean_rho", "stderr", "expected"), rows)


def silhouette_cauchy_report(
    n_list: Iterable[int],
    seeds: int,
    depth: int,
    master_seed: int,
) -> Report:
    """Sup gap of the smoothed silhouette between n and 2n over the end grid,
    per seed: columns (seed, n, sup_gap)."""
    n_list = sorted(set(int(n) for n in n_list))
    grid = end_grid(depth)
    spec = ChainSpec("bst")
    rows = []
    for r in range(seeds):
        tr = simulate(spec, 2 * max(n_list), replicate_seed(master_seed, r))
        curves = {n: SilhouetteCurve(tr.state_at(n)) for n in n_list}
        curves_2n = {n: SilhouetteCurve(tr.state_at(2 * n)) for n in n_list}
        for n in n_list:
            sup = max(
                abs(curves_2n[n].smoothed(u).value - curves[n].smoothed(u).value)
                for u in grid
            )
            rows.append((r, n, sup))
    return Report(("seed", "n", "sup_gap"), rows)


# ---------------------------------------------------------------------------
# Experiment bundle
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    chain: str = "bst"
    theta: float | None = None
    horizon: int = 100
    replicates: int = 1
    master_seed: int = 0
    outputs: tuple[str, ...] = ("trajectory",)
    format: str = "csv"
    depth: int = 10
    source: str = "pi-left"
    n_list: tuple[int, ...] | None = None
    checkpoints: tuple[int, ...] | None = None
    subgraphs: tuple[str, ...] = ("point", "K2", "K3")
    window: int = 3
    workers: int = 1
    plot: bool = True

    def violations(self) -> list[str]:
        problems = []
        try:
            ChainSpec(self.chain, self.theta)
        except ValueError as exc:
            problems.append(str(exc))
        if self.horizon < 1:
            problems.append(f"horizon must be >= 1, got {self.horizon}")
        if self.replicates < 1:
            problems.append(f"replicates must be >= 1, got {self.replicates}")
        if not 1 <= self.depth <= 16:
            problems.append(f"depth must lie in [1,16], got {self.depth}")
        if self.format not in ("csv", "jsonl"):
            problems.append(f"format must be csv or jsonl, got {self.format!r}")
        if not self.outputs:
            problems.append("outputs must not be empty")
        for out in self.outputs:
            if out not in OUTPUT_KINDS:
                problems.append(f"unknown output {out!r}")
            elif out in _OUTPUT_CHAIN and _OUTPUT_CHAIN[out] != self.chain:
                problems.append(f"output {out!r} requires chain {_OUTPUT_CHAIN[out]!r}")
        if self.source not in ("pi-left", "pi-right", "seed"):
            problems.append(f"unknown source {self.source!r}")
        if not 2 <= self.window <= 6:
            problems.append(f"window must lie in [2,6], got {self.window}")
        if self.workers < 1:
            problems.append(f"workers must be >= 1, got {self.workers}")
        for name in self.subgraphs:
            if name not in NAMED_SUBGRAPHS:
                problems.append(f"unknown subgraph id {name!r}")
        return problems

    def validated(self) -> "ExperimentConfig":
        problems = self.violations()
        if problems:
            raise ValueError("invalid experiment config: " + "; ".join(problems))
        return self


def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_report(report: Report, fmt: str) -> str:
    if fmt == "csv":
        lines = [",".join(report.columns)]
        lines.extend(",".join(_format_cell(v) for v in row) for row in report.rows)
        return "\n".join(lines) + "\n"
    if fmt == "jsonl":
        lines = [json.dumps(dict(zip(report.columns, row))) for row in report.rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def write_report(report: Report, path, fmt: str) -> None:
    path.write_text(format_report(report, fmt))


def read_report_csv(path) -> Report:
    lines = path.read_text().strip().splitlines()
    columns = tuple(lines[0].split(","))
    rows = [tuple(ln.split(",")) for ln in lines[1:]]
    return Report(columns, rows)


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Produce every requested report (plus figures) and a manifest.

    Returns the manifest dict; rerunning with the same config overwrites the
    same files with identical bytes (wall time lives only in the manifest).
    """
    from pathlib import Path

    cfg.validated()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    files: dict[str, str] = {}
    oracles: dict[str, str] = {}

    for kind in cfg.outputs:
        if kind == "trajectory":
            tr = simulate(ChainSpec(cfg.chain, cfg.theta), cfg.horizon, replicate_seed(cfg.master_seed, 0))
            path = out / "trajectory.jsonl"
            path.write_text(trajectory_to_jsonl(tr))
            files[kind] = path.name
            continue
        if kind == "figure1":
            n_list = cfg.n_list or (50, 100, 200)
            report = figure1_data(n_list, replicate_seed(cfg.master_seed, 0), cfg.depth)
        elif kind == "figure2":
            n_list = cfg.n_list or (500, 1000)
            report = figure2_data(n_list, cfg.source, cfg.depth, seed=cfg.master_seed)
        elif kind == "edge-freeze":
            report = edge_freeze_report(cfg.window, cfg.horizon, cfg.replicates, cfg.master_seed)
        elif kind == "rho-convergence":
            checkpoints = cfg.checkpoints or tuple(
                sorted({max(2, cfg.horizon // 8), cfg.horizon // 4, cfg.horizon // 2, cfg.horizon})
            )
            report = rho_convergence_report(
                cfg.theta,
                cfg.subgraphs,
                checkpoints,
                cfg.replicates,
                cfg.master_seed,
                workers=cfg.workers,
            )
            oracles["expected"] = "er_limit_value closed form (edge-probability powers)"
        else:  # pragma: no cover
            raise AssertionError(kind)
        ext = "csv" if cfg.format == "csv" else "jsonl"
        path = out / f"{kind.replace('-', '_')}.{ext}"
        write_report(report, path, cfg.format)
        files[kind] = path.name
        if cfg.plot:
            from . import plotting

            png = out / f"{kind.replace('-', '_')}.png"
            plotting.render_report(kind, report, png)
            files[kind + "-figure"] = png.name

    manifest = {
        "config": asdict(cfg),
        "code_version": __version__,
        "files": files,
        "oracles": oracles,
        "wall_time_s": round(time.perf_counter() - started, 6),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
