"""Command-line front end.

Subcommands: verify (run the learned search), replay (verify against a
recorded trace), baseline (DFS/BFS), theorem-check (random-strategy bound
sweep), gen-synthetic (write a trace file), config (inspect defaults).

Every flag of the form --loop-alpha, --dqn-lr, --search-workers,
--backend-synthetic-correct-depth overrides the matching config key.
Artifacts are byte-identical across same-seed runs; wall-time columns stay
zero unless --timing true is given, since real timings are not
reproducible.
"""
from __future__ import annotations

import argparse
import json
import signal
import sys
from pathlib import Path
from typing import Any, Mapping

from . import baselines, config as cfgmod, theorem
from .backend import (
    SyntheticBackend,
    default_trace_depth,
    load_trace,
    make_synthetic_factory,
    write_trace,
)
from .dqn import save_checkpoint
from .errors import ConfigError, TraceFormatError
from .search import EpochStats, SearchResult, run as run_search

CSV_HEADER = "epoch,eps,loss,transitions,incorrect,incomplete,complete,coverage,wall_ms"


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def stats_csv(stats: list[EpochStats], timing: bool) -> str:
    lines = [CSV_HEADER]
    for s in stats:
        wall = s.wall_ms if timing else 0.0
        lines.append(
            ",".join(
                [
                    _fmt(s.epoch),
                    _fmt(s.epsilon),
                    _fmt(s.mean_loss),
                    _fmt(s.transitions_added),
                    _fmt(s.incorrect),
                    _fmt(s.incomplete_events),
                    _fmt(s.complete),
                    _fmt(s.coverage),
                    _fmt(wall),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def result_json(result: SearchResult) -> str:
    payload = {
        "verdict": result.verdict,
        "path": None
        if result.path is None
        else [{"id": n.id, "step": n.step, "rule": n.rule} for n in result.path.nodes],
        "epochs": result.epochs,
        "coverage": result.coverage,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _flag_name(dotted: str) -> str:
    return "--" + dotted.replace(".", "-").replace("_", "-")


def _collect_leaves(node: Mapping[str, Any], prefix: str = "") -> list[str]:
    leaves = []
    for key, value in node.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            leaves.extend(_collect_leaves(value, dotted + "."))
        else:
            leaves.append(dotted)
    return leaves

_OVERRIDE_KEYS = [k for k in _collect_leaves(cfgmod.DEFAULTS) if k not in ("seed", "out_dir")]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON config file")
    parser.add_argument("--seed", type=int, help="root seed (overrides config file)")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    group = parser.add_argument_group("config overrides")
    for dotted in _OVERRIDE_KEYS:
        group.add_argument(
            _flag_name(dotted),
            dest=f"cfg::{dotted}",
            metavar="V",
            help=argparse.SUPPRESS,
        )


def _effective_config(args: argparse.Namespace) -> dict[str, Any]:
    overrides = {}
    for key, value in vars(args).items():
        if key.startswith("cfg::") and value is not None:
            overrides[key.split("::", 1)[1]] = value
    cfg = cfgmod.load_config(
        config_file=args.config,
        overrides=overrides,
        seed_flag=args.seed,
    )
    if args.out is not None:
        cfg["out_dir"] = args.out
    return cfg


def _backend_factory(cfg: dict[str, Any], force_trace: str | None = None):
    kind = cfg["backend"]["kind"]
    if force_trace is not None:
        backend = load_trace(force_trace)
        return lambda: backend
    if kind == "trace":
        trace_file = cfg["backend"]["trace_file"]
        if not trace_file:
            raise ConfigError("backend.kind is trace but backend.trace_file is unset")
        backend = load_trace(trace_file)
        return lambda: backend
    return make_synthetic_factory(cfgmod.build_synthetic_spec(cfg))


def _write_run_artifacts(cfg: dict[str, Any], result: SearchResult) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "epochs.csv").write_text(stats_csv(result.stats, cfg["timing"]))
    (out / "result.json").write_text(result_json(result))
    save_checkpoint(result.network, out / "checkpoint.json", cfgmod.config_hash(cfg))
    return out


def _run_verify(args: argparse.Namespace, force_trace: str | None = None) -> int:
    cfg = _effective_config(args)
    factory = _backend_factory(cfg, force_trace)
    stop = {"flag": False}

    def _on_sigint(signum, frame):  # second interrupt falls back to default
        stop["flag"] = True
        signal.signal(signal.SIGINT, signal.default_int_handler)

    previous = signal.signal(signal.SIGINT, _on_sigint)
    try:
        result = run_search(
            cfgmod.build_search_config(cfg), factory, should_stop=lambda: stop["flag"]
        )
    finally:
        signal.signal(signal.SIGINT, previous)
    out = _write_run_artifacts(cfg, result)
    print(
        f"verdict={result.verdict} epochs={result.epochs} "
        f"coverage={result.coverage} out={out}"
    )
    return 0 if result.found else 1


def _run_baseline(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    factory = _backend_factory(cfg)
    loop_cfg = cfgmod.build_loop_config(cfg)
    limits = baselines.SearchLimits(max_nodes=args.max_nodes, max_seconds=args.max_seconds)
    rank = args.rank_prefixes.split(",") if args.rank_prefixes else None
    if args.algo == "dfs":
        result = baselines.dfs_search(
            factory, loop_cfg, node_order=args.node_order, rank_prefixes=rank, limits=limits
        )
    else:
        result = baselines.bfs_search(factory, loop_cfg, limits=limits)
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    wall = result.wall_ms if cfg["timing"] else 0.0
    row = [
        "0",
        "",
        "",
        "0",
        "1" if result.verdict != "found" else "0",
        "0",
        "1" if result.found else "0",
        str(result.coverage),
        repr(wall),
    ]
    (out / "baseline.csv").write_text(CSV_HEADER + "\n" + ",".join(row) + "\n")
    payload = {
        "algo": args.algo,
        "verdict": result.verdict,
        "coverage": result.coverage,
        "backtracks": result.backtracks,
        "expansions": result.expansions,
        "wall_ms": wall,
        "path": None
        if result.path is None
        else [{"id": n.id, "step": n.step, "rule": n.rule} for n in result.path.nodes],
    }
    (out / "baseline.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(
        f"algo={args.algo} verdict={result.verdict} coverage={result.coverage} "
        f"backtracks={result.backtracks} out={out}"
    )
    return 0 if result.found else 1


def _run_theorem_check(args: argparse.Namespace) -> int:
    result = theorem.sweep(args.seed, args.count)
    violations: list[str] = []
    max_identity_err = 0.0
    max_z = 0.0
    for k, inst in enumerate(result.instances):
        rep = inst.report
        if not rep.holds:
            violations.append(f"instance {k}: p={float(rep.p):.6f} >= bound {float(rep.bound):.6f}")
        for r in range(rep.n_paths):
            lhs = rep.alphas[r]
            rhs = sum(rep.betas[r][s] for s in range(rep.y)) / rep.x
            err = abs(float(lhs - rhs))
            max_identity_err = max(max_identity_err, err)
            if err > 1e-12:
                violations.append(f"instance {k}: identity error {err:.3e}")
        if args.trials > 0:
            mc = theorem.monte_carlo_p(inst.marked, inst.node, args.trials, seed=args.seed + k)
            p = float(rep.p)
            sigma = (p * (1 - p) / mc.incorrect_walks) ** 0.5
            if sigma == 0.0:
                if mc.estimate != p:
                    violations.append(f"instance {k}: exact p={p} but estimate {mc.estimate}")
            else:
                z = abs(mc.estimate - p) / sigma
                max_z = max(max_z, z)
                if z > 3.0:
                    violations.append(f"instance {k}: Monte Carlo z={z:.2f} > 3")

    print(f"{'instances':>22}: {len(result.instances)}")
    print(f"{'degenerate skipped':>22}: {result.degenerate_skipped}")
    print(f"{'bound holds':>22}: {sum(i.report.holds for i in result.instances)}"
          f"/{len(result.instances)}")
    print(f"{'max identity error':>22}: {max_identity_err:.3e}")
    if args.trials > 0:
        print(f"{'max Monte Carlo z':>22}: {max_z:.3f} ({args.trials} trials)")
    for line in violations[:20]:
        print("VIOLATION:", line)
    print("result:", "ok" if not violations else f"{len(violations)} violations")
    return 0 if not violations else 1


def _run_gen_synthetic(args: argparse.Namespace) -> int:
    cfg = _effective_config(args)
    spec = cfgmod.build_synthetic_spec(cfg)
    backend = SyntheticBackend(spec)
    depth = args.depth if args.depth is not None else default_trace_depth(
        spec, cfg["loop"]["alpha"]
    )
    n = write_trace(backend, args.trace_out, depth, max_nodes=args.max_nodes)
    print(f"wrote {n} nodes to {args.trace_out} (depth {depth})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proofpath",
        description="Learned proof-path search over pluggable prover backends.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the learned search")
    _add_config_flags(p_verify)

    p_replay = sub.add_parser("replay", help="run the search against a trace file")
    _add_config_flags(p_replay)
    p_replay.add_argument("--trace", required=True, metavar="FILE")

    p_base = sub.add_parser("baseline", help="run a DFS or BFS baseline")
    _add_config_flags(p_base)
    p_base.add_argument("--algo", choices=("dfs", "bfs"), required=True)
    p_base.add_argument(
        "--node-order", choices=("first-listed", "static-rank"), default="first-listed"
    )
    p_base.add_argument("--rank-prefixes", metavar="CSV", default=None)
    p_base.add_argument("--max-nodes", type=int, default=100_000)
    p_base.add_argument("--max-seconds", type=float, default=None)

    p_thm = sub.add_parser("theorem-check", help="sweep the random-strategy bound")
    p_thm.add_argument("--seed", type=int, default=1)
    p_thm.add_argument("--count", type=int, default=500)
    p_thm.add_argument("--trials", type=int, default=10_000)

    p_gen = sub.add_parser("gen-synthetic", help="write a trace file for a synthetic spec")
    _add_config_flags(p_gen)
    p_gen.add_argument("--trace-out", required=True, metavar="FILE")
    p_gen.add_argument("--depth", type=int, default=None)
    p_gen.add_argument("--max-nodes", type=int, default=250_000)

    p_cfg = sub.add_parser("config", help="inspect configuration")
    p_cfg.add_argument("--dump-defaults", action="store_true")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _run_verify(args)
        if args.command == "replay":
            return _run_verify(args, force_trace=args.trace)
        if args.command == "baseline":
            return _run_baseline(args)
        if args.command == "theorem-check":
            return _run_theorem_check(args)
        if args.command == "gen-synthetic":
            return _run_gen_synthetic(args)
        if args.command == "config":
            if args.dump_defaults:
                print(cfgmod.dump_defaults())
                return 0
            parser.error("config needs --dump-defaults")
    except (ConfigError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover


def entry() -> None:  # console-script hook
    raise SystemExit(main())


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
