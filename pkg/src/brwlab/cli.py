"""Command-line front end for the scans and one-off object dumps.

Every subcommand reads the same JSON config (--config), with common
fields overridable by flags. Data goes to --out (or stdout when the
format allows it), progress lines to stderr. Exit status is nonzero
when the check suite reports a failure or an input is rejected.
"""

from __future__ import annotations

import argparse
import json
import sys

from .branching import sample_backbone_tree
from .harness import (
    ConfigError,
    ExperimentConfig,
    GAMMA_COLUMNS,
    RESISTANCE_COLUMNS,
    check_suite,
    fit_exponent,
    intersection_columns,
    read_scan_csv,
    render_csv,
    replicate_rng,
    scan_gamma,
    scan_intersections,
    scan_resistance,
)
from .resistance import resistance_row
from .trace import embed, read_edge_list


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--seed", type=int, help="override the config seed")
    sub.add_argument("--replicates", type=int, help="override the replicate count")
    sub.add_argument("--threads", type=int, help="worker threads (determinism unaffected)")
    sub.add_argument("--dim", type=int, help="simple-walk dimension shorthand")
    sub.add_argument("--out", help="output file (default stdout where possible)")


def _config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for key in ("seed", "replicates", "threads", "dim"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "n", None):
        data["n_list"] = list(args.n)
    if getattr(args, "delta_n", None):
        data["delta_n_list"] = list(args.delta_n)
    return ExperimentConfig.from_dict(data)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_sample_tree(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if not cfg.n_list:
        print("sample-tree needs --n or n_list in the config", file=sys.stderr)
        return 2
    n = cfg.n_list[0]
    rng = replicate_rng(cfg.seed, 0, n, 0)
    tree = sample_backbone_tree(cfg.progeny_law(), n, cfg.m_for(n), rng)
    lines = [
        f"# conditioned tree n={tree.n} m={tree.m} vertices={tree.num_vertices}",
        "vertex,parent,height,side_root,anchor",
    ]
    for v in range(tree.num_vertices):
        lines.append(
            f"{v},{tree.parent[v]},{tree.height[v]},{tree.side_root[v]},{tree.anchor[v]}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    print(f"[sample-tree] n={n} vertices={tree.num_vertices}", file=sys.stderr)
    return 0


def _cmd_embed(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if not cfg.n_list:
        print("embed needs --n or n_list in the config", file=sys.stderr)
        return 2
    if not args.out:
        print("embed writes an edge list; --out is required", file=sys.stderr)
        return 2
    n = cfg.n_list[0]
    rng = replicate_rng(cfg.seed, 0, n, 0)
    tree = sample_backbone_tree(cfg.progeny_law(), n, cfg.m_for(n), rng)
    graph = embed(tree, cfg.step_law(), rng)
    graph.write_edge_list(args.out)
    print(
        f"[embed] n={n} points={graph.num_points} edges={graph.num_edges} -> {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_resistance(args: argparse.Namespace) -> int:
    graph = read_edge_list(args.input)
    row = resistance_row(graph, n=args.n, method=args.method)
    _emit(json.dumps(row, sort_keys=True) + "\n", args.out)
    return 0


def _cmd_scan_r(args: argparse.Namespace) -> int:
    cfg = _config(args)
    rows = scan_resistance(cfg)
    _emit(render_csv(cfg, RESISTANCE_COLUMNS, rows), args.out)
    return 0


def _cmd_scan_gamma(args: argparse.Namespace) -> int:
    cfg = _config(args)
    rows = scan_gamma(cfg)
    _emit(render_csv(cfg, GAMMA_COLUMNS, rows), args.out)
    return 0


def _cmd_scan_intersections(args: argparse.Namespace) -> int:
    cfg = _config(args)
    rows = scan_intersections(cfg, jsonl_path=args.records)
    _emit(render_csv(cfg, intersection_columns(cfg.theta_grid), rows), args.out)
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    _, rows = read_scan_csv(args.input)
    report = fit_exponent(rows, model=args.model)
    _emit(json.dumps(report.to_json(), sort_keys=True) + "\n", args.out)
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    cfg = _config(args)
    report = check_suite(cfg, fault=args.fault)
    _emit(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", args.out)
    return 0 if report.all_pass else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brwlab",
        description="Monte Carlo scans for critical branching random walk traces",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("sample-tree", help="dump one conditioned tree as CSV")
    _add_common(s)
    s.add_argument("--n", type=_int_list, help="backbone length (first entry used)")
    s.set_defaults(func=_cmd_sample_tree)

    s = subs.add_parser("embed", help="sample a tree and write its trace edge list")
    _add_common(s)
    s.add_argument("--n", type=_int_list, help="backbone length (first entry used)")
    s.set_defaults(func=_cmd_embed)

    s = subs.add_parser("resistance", help="resistance summary of a stored edge list")
    s.add_argument("--in", dest="input", required=True, help="edge list file")
    s.add_argument("--n", type=int, default=None, help="target level (default: trace n)")
    s.add_argument("--method", default="auto", help="solver method")
    s.add_argument("--out", help="output file (default stdout)")
    s.set_defaults(func=_cmd_resistance)

    s = subs.add_parser("scan-r", help="resistance scan over n_list")
    _add_common(s)
    s.add_argument("--n", type=_int_list, help="comma-separated n values")
    s.set_defaults(func=_cmd_scan_r)

    s = subs.add_parser("scan-gamma", help="endpoint-conditioned resistance scan")
    _add_common(s)
    s.add_argument("--n", type=_int_list, help="comma-separated n values")
    s.set_defaults(func=_cmd_scan_gamma)

    s = subs.add_parser("scan-intersections", help="two-tree collision scan")
    _add_common(s)
    s.add_argument("--delta-n", type=_int_list, help="comma-separated delta_n values")
    s.add_argument("--records", help="also write per-replicate JSON lines here")
    s.set_defaults(func=_cmd_scan_intersections)

    s = subs.add_parser("fit", help="fit an exponent to a scan CSV")
    s.add_argument("--in", dest="input", required=True, help="scan CSV from scan-r")
    s.add_argument("--model", choices=("power", "log-correction"), default="power")
    s.add_argument("--out", help="output file (default stdout)")
    s.set_defaults(func=_cmd_fit)

    s = subs.add_parser("check", help="run the invariant check suite")
    _add_common(s)
    s.add_argument(
        "--fault",
        choices=("solver_residual", "asymmetric_step"),
        default=None,
        help="inject a known defect to exercise the corresponding check",
    )
    s.set_defaults(func=_cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
