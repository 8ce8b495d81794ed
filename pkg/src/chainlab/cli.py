"""Command-line front end.

Subcommands: simulate, kernel, transform, silhouette, experiment.  Every flag
has a config twin (--config FILE, JSON or key=value lines); explicit flags
win over config values.  Exit codes: 0 ok, 2 validation, 3 capability guard,
4 I/O.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .chains import ChainSpec, simulate, trajectory_to_jsonl
from .errors import CapabilityError
from .experiments import ExperimentConfig, Report, format_report, run_experiment
from .graphs import parse_graph_text
from .martin import (
    er_kernel,
    exact_conditional_oracle,
    parse_adjacency_limit_text,
    pm_kernel,
    ua_extended_kernel,
    ua_kernel,
)
from .silhouette import (
    SilhouetteCurve,
    end_grid,
    end_to_unit,
    parse_split_table_text,
    parse_tree_text,
    smoothed_limit_density_part,
    smoothed_limit_mass_part,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CAPABILITY = 3
EXIT_IO = 4


def _load_config(path: str) -> dict:
    text = Path(path).read_text()
    stripped = text.strip()
    if stripped.startswith("{"):
        return json.loads(stripped)
    cfg = {}
    for ln in stripped.splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        if "=" not in ln:
            raise ValueError(f"config line must be key=value, got {ln!r}")
        key, _, value = ln.partition("=")
        try:
            cfg[key.strip()] = json.loads(value.strip())
        except json.JSONDecodeError:
            cfg[key.strip()] = value.strip()
    return cfg


def _merged(args: argparse.Namespace, config: dict, key: str, default=None):
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return default


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args, config) -> int:
    kind = _merged(args, config, "chain")
    if kind is None:
        raise ValueError("simulate requires --chain")
    fmt = _merged(args, config, "format", "jsonl")
    if fmt != "jsonl":
        raise ValueError("simulate emits trajectories as jsonl only")
    theta = _merged(args, config, "theta")
    spec = ChainSpec(kind, theta)
    horizon = int(_merged(args, config, "n", 10))
    seed = int(_merged(args, config, "seed", 0))
    tr = simulate(spec, horizon, seed)
    _emit(trajectory_to_jsonl(tr), _merged(args, config, "out"))
    return EXIT_OK


def _cmd_kernel(args, config) -> int:
    kind = _merged(args, config, "kind")
    if kind not in ("ua", "er", "pm", "ua-extended"):
        raise ValueError("kernel --kind must be one of ua, er, pm, ua-extended")
    m_file = _merged(args, config, "m_file")
    if m_file is None:
        raise ValueError("kernel requires --m-file")
    g_m = parse_graph_text(Path(m_file).read_text())
    theta = _merged(args, config, "theta")
    payload: dict = {"kind": kind, "m": g_m.n}
    if kind == "ua-extended":
        limit_file = _merged(args, config, "limit_file")
        if limit_file is None:
            raise ValueError("ua-extended kernel requires --limit-file")
        limit = parse_adjacency_limit_text(Path(limit_file).read_text())
        value = ua_extended_kernel(g_m, limit)
        payload["n"] = None
    else:
        n_file = _merged(args, config, "n_file")
        if n_file is None:
            raise ValueError("kernel requires --n-file")
        g_n = parse_graph_text(Path(n_file).read_text())
        payload["n"] = g_n.n
        if kind == "ua":
            value = ua_kernel(g_m, g_n)
        elif kind == "er":
            if theta is None:
                raise ValueError("er kernel requires --theta")
            value = er_kernel(g_m, g_n, float(theta))
        else:
            if theta is None:
                raise ValueError("pm kernel requires --theta")
            value = pm_kernel(g_m, g_n, float(theta))
    payload["value"] = value
    payload["log_value"] = math.log(value) if value > 0 else None
    if getattr(args, "oracle", False) and kind in ("ua", "er", "pm"):
        if kind == "ua":
            spec = ChainSpec("uniform-attachment")
        elif kind == "er":
            spec = ChainSpec("er-relabel", float(theta))
        else:
            spec = ChainSpec("er-memory", float(theta))
        from .chains import start_state

        cond = exact_conditional_oracle(spec, g_m, g_n)
        marg = exact_conditional_oracle(spec, start_state(spec), g_n)
        payload["oracle"] = float(cond / marg) if marg else None
    _emit(json.dumps(payload) + "\n", _merged(args, config, "out"))
    return EXIT_OK


def _cmd_transform(args, config) -> int:
    from .transforms import forbidden_edge_checks, isolated_node_limit, simulate_conditioned

    horizon = int(_merged(args, config, "n", 10))
    seed = int(_merged(args, config, "seed", 0))
    isolate = _merged(args, config, "isolate")
    target_file = _merged(args, config, "target_file")
    if (isolate is None) == (target_file is None):
        raise ValueError("transform requires exactly one of --isolate or --target-file")
    if isolate is not None:
        one_sided = bool(_merged(args, config, "one_sided", False))
        limit = isolated_node_limit(int(isolate), horizon, both_sides=not one_sided)
        conditioning = {"isolate": int(isolate), "both_sides": not one_sided}
    else:
        limit = parse_adjacency_limit_text(Path(target_file).read_text())
        conditioning = {"target_file": str(target_file)}
    tr = simulate_conditioned(limit, horizon, seed)
    checks = forbidden_edge_checks(tr, limit)
    head = {
        "chain": "uniform-attachment",
        "conditioned": conditioning,
        "seed": seed,
        "horizon": horizon,
    }
    lines = [json.dumps(head)]
    for t, (delta, ok) in enumerate(zip(tr.deltas, checks), start=2):
        lines.append(
            json.dumps(
                {
                    "n": t,
                    "delta": {"added": [[int(i), int(j)] for i, j in delta]},
                    "forbidden_ok": bool(ok),
                }
            )
        )
    _emit("\n".join(lines) + "\n", _merged(args, config, "out"))
    return EXIT_OK


def _cmd_silhouette(args, config) -> int:
    curve_kind = _merged(args, config, "curve", "boundary")
    depth = int(_merged(args, config, "depth", 10))
    if not 1 <= depth <= 16:
        raise ValueError(f"depth must lie in [1,16], got {depth}")
    fmt = _merged(args, config, "format", "csv")
    grid = end_grid(depth)
    if curve_kind in ("boundary", "smoothed"):
        tree_file = _merged(args, config, "tree_file")
        if tree_file is None:
            raise ValueError(f"curve {curve_kind!r} requires --tree-file")
        tree = parse_tree_text(Path(tree_file).read_text())
        curve = SilhouetteCurve(tree)
        if curve_kind == "boundary":
            rows = [(end_to_unit(u), curve.boundary(u)) for u in grid]
        else:
            rows = [(end_to_unit(u), curve.smoothed(u).value) for u in grid]
    elif curve_kind in ("limit-mass", "limit-density"):
        xi_file = _merged(args, config, "xi_file")
        if xi_file is None:
            raise ValueError(f"curve {curve_kind!r} requires --xi-file")
        table = parse_split_table_text(Path(xi_file).read_text())
        m = min(depth, table.depth)
        fn = smoothed_limit_mass_part if curve_kind == "limit-mass" else smoothed_limit_density_part
        rows = [(end_to_unit(u), fn(table, u, m)) for u in grid]
    else:
        raise ValueError(f"unknown curve {curve_kind!r}")
    report = Report(("beta_of_end", "value"), rows)
    _emit(format_report(report, fmt), _merged(args, config, "out"))
    return EXIT_OK


def _cmd_experiment(args, config) -> int:
    def pick(key, default):
        return _merged(args, config, key, default)

    outputs = pick("outputs", None)
    if isinstance(outputs, str):
        outputs = tuple(s.strip() for s in outputs.split(",") if s.strip())
    elif outputs is not None:
        outputs = tuple(outputs)

    def int_list(key):
        val = pick(key, None)
        if val is None:
            return None
        if isinstance(val, str):
            return tuple(int(s) for s in val.split(",") if s.strip())
        return tuple(int(v) for v in val)

    subgraphs = pick("subgraphs", None)
    if isinstance(subgraphs, str):
        subgraphs = tuple(s.strip() for s in subgraphs.split(",") if s.strip())

    cfg = ExperimentConfig(
        chain=pick("chain", "bst"),
        theta=pick("theta", None),
        horizon=int(pick("horizon", 100)),
        replicates=int(pick("replicates", 1)),
        master_seed=int(pick("master_seed", pick("seed", 0) or 0)),
        outputs=outputs or ("trajectory",),
        format=pick("format", "csv"),
        depth=int(pick("depth", 10)),
        source=pick("source", "pi-left"),
        n_list=int_list("n_list"),
        checkpoints=int_list("checkpoints"),
        subgraphs=subgraphs or ("point", "K2", "K3"),
        window=int(pick("window", 3)),
        workers=int(pick("workers", 1)),
        plot=not bool(pick("no_plot", False)),
    )
    out_dir = pick("out", "chainlab-out")
    manifest = run_experiment(cfg, out_dir)
    sys.stdout.write(json.dumps({"out": str(out_dir), "files": manifest["files"]}) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted both before and after the subcommand; the
    # SUPPRESS default keeps an unset subparser copy from clobbering a value
    # parsed by the main parser
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="config file (JSON or key=value lines)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    common.add_argument("--format", choices=["csv", "jsonl"], default=argparse.SUPPRESS,
                        help="report format")

    parser = argparse.ArgumentParser(prog="chainlab", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run a chain and emit its trajectory")
    p.add_argument("--chain", choices=["polya", "records", "uniform-attachment", "er-memory", "er-relabel", "bst"])
    p.add_argument("--theta", type=float)
    p.add_argument("--n", type=int, help="horizon (final time)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("kernel", parents=[common], help="evaluate a limit kernel on two states")
    p.add_argument("--kind", choices=["ua", "er", "pm", "ua-extended"])
    p.add_argument("--m-file", dest="m_file", help="graph file for the earlier state")
    p.add_argument("--n-file", dest="n_file", help="graph file for the later state")
    p.add_argument("--limit-file", dest="limit_file", help="adjacency-limit file (lines 'i j b')")
    p.add_argument("--theta", type=float)
    p.add_argument("--oracle", action="store_true", help="also report the exact enumeration ratio")
    p.set_defaults(func=_cmd_kernel)

    p = sub.add_parser("transform", parents=[common], help="simulate the conditioned attachment chain")
    p.add_argument("--isolate", type=int, help="condition on this node staying isolated")
    p.add_argument("--target-file", dest="target_file", help="adjacency-limit file")
    p.add_argument("--one-sided", dest="one_sided", action="store_const", const=True,
                   help="only forbid pairs whose larger element is the isolated node")
    p.add_argument("--n", type=int, help="horizon (final time)")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("silhouette", parents=[common], help="emit a silhouette curve over an end grid")
    p.add_argument("--tree-file", dest="tree_file", help="tree file (one word per line, '-' root)")
    p.add_argument("--xi-file", dest="xi_file", help="split-table file (lines 'word value')")
    p.add_argument("--curve", choices=["boundary", "smoothed", "limit-mass", "limit-density"])
    p.add_argument("--depth", type=int, help="end-grid depth (<= 16)")
    p.set_defaults(func=_cmd_silhouette)

    p = sub.add_parser("experiment", parents=[common], help="run a configured experiment bundle")
    p.add_argument("--chain")
    p.add_argument("--theta", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--outputs", help="comma-separated report list")
    p.add_argument("--depth", type=int)
    p.add_argument("--source", choices=["pi-left", "pi-right", "seed"])
    p.add_argument("--n-list", dest="n_list", help="comma-separated times")
    p.add_argument("--checkpoints", help="comma-separated times")
    p.add_argument("--subgraphs", help="comma-separated subgraph ids")
    p.add_argument("--window", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-plot", dest="no_plot", action="store_const", const=True)
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    try:
        config_path = getattr(args, "config", None)
        config = _load_config(config_path) if config_path else {}
        return args.func(args, config)
    except CapabilityError as exc:
        print(f"capability guard: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except ValueError as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
