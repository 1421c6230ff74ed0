"""Command-line pipelines: discover, generate, balance, evaluate, optimize-k,
tstr.

Every run writes its resolved configuration next to its outputs so results
can be reproduced byte-for-byte. Progress goes to stderr; stdout stays silent
unless --json asks for machine-readable results. Exit codes: 0 success,
1 computation error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import hyperopt, metrics_entropy, metrics_similarity, pts as pts_module, tstr as tstr_module
from .generator import BalanceConfig, GenerationConfig, generate_balanced, generate_log
from .log_io import (
    CsvMapping,
    MappingError,
    load_log,
    log_to_json,
    parse_timestamp_ms,
    write_csv,
    write_xes,
)
from .log_model import temporal_split

logger = logging.getLogger("logaug")

SEED_ENV_VAR = "LOGAUG_SEED"

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Configuration or input problems that are the caller's to fix."""


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc


def _load_mapping(path) -> CsvMapping:
    if path is None:
        raise UsageError("CSV input/output needs --mapping")
    raw_path = Path(path)
    if not raw_path.exists():
        raise UsageError(f"mapping file not found: {path}")
    data = raw_path.read_bytes()
    if raw_path.suffix == ".toml":
        payload = tomllib.loads(data.decode("utf-8"))
    else:
        payload = json.loads(data)
    try:
        return CsvMapping.from_dict(payload)
    except MappingError as exc:
        raise UsageError(str(exc)) from exc


def _read_log(path, mapping_path):
    if path is None:
        raise UsageError("missing input log path")
    if not Path(path).exists():
        raise UsageError(f"input file not found: {path}")
    name = str(path)
    lowered = name[:-3] if name.endswith(".gz") else name
    if lowered.endswith(".csv"):
        return load_log(path, _load_mapping(mapping_path))
    return load_log(path)


def _write_log(log, path, mapping_path):
    name = str(path)
    lowered = name[:-3] if name.endswith(".gz") else name
    if lowered.endswith(".xes"):
        data = write_xes(log, compress=name.endswith(".gz"))
    elif lowered.endswith(".csv"):
        data = write_csv(log, _load_mapping(mapping_path))
    elif lowered.endswith(".json"):
        data = log_to_json(log)
    else:
        raise UsageError(f"cannot infer output log format from {name!r}")
    Path(path).write_bytes(data)


def _write_json(payload: dict, path) -> None:
    Path(path).write_bytes(
        json.dumps(payload, sort_keys=True, indent=2).encode("utf-8")
    )


def _write_resolved_config(args: argparse.Namespace, out_path) -> None:
    resolved = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("func", "config") and value is not None
    }
    _write_json(resolved, str(out_path) + ".config.json")


def _maybe_print_json(args, payload: dict) -> None:
    if getattr(args, "json", False):
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# --- subcommands ---

def _cmd_discover(args) -> int:
    log = _read_log(args.input, args.mapping)
    report: dict = {}
    if args.k == "auto":
        split = temporal_split(log, 0.8)
        sweep = hyperopt.optimize_k(
            split.train, split.test,
            k_candidates=args.k_candidates,
            gen_traces=args.gen_traces,
            seed=args.seed,
        )
        k = sweep.selected_k
        report["sweep"] = sweep.to_dict()
        logger.info("selected k=%d from sweep", k)
    else:
        try:
            k = int(args.k)
        except ValueError as exc:
            raise UsageError(f"--k must be an integer or 'auto', got {args.k!r}") from exc
    model = pts_module.discover(log, k)
    pts_module.save_pts(model, args.out)
    report["model"] = model.summary()
    _write_json(report, str(args.out) + ".report.json")
    _write_resolved_config(args, args.out)
    logger.info("model with %d control-flow states written to %s",
                len(model.cf.transitions), args.out)
    _maybe_print_json(args, report)
    return EXIT_OK


def _cmd_generate(args) -> int:
    model = pts_module.load_pts(args.model)
    config = GenerationConfig(
        n_traces=args.n,
        seed=args.seed,
        start_time_ms=parse_timestamp_ms(args.start_time) if args.start_time else 0,
        max_trace_length=args.max_trace_length,
    )
    log, gen_report = generate_log(model, config)
    _write_log(log, args.out, args.mapping)
    _write_json(gen_report.to_dict(), str(args.out) + ".report.json")
    _write_resolved_config(args, args.out)
    logger.info("generated %d traces into %s", len(log), args.out)
    _maybe_print_json(args, gen_report.to_dict())
    return EXIT_OK


def _cmd_balance(args) -> int:
    model = pts_module.load_pts(args.model)
    train = _read_log(args.train, args.mapping)
    config = GenerationConfig(
        n_traces=len(train),
        seed=args.seed,
        start_time_ms=(
            parse_timestamp_ms(args.start_time) if args.start_time else train.epoch_ms
        ),
        max_trace_length=args.max_trace_length,
    )
    balance = BalanceConfig(
        target_activity=args.activity,
        target_fraction=args.target_fraction,
        max_rejections_per_trace=args.max_rejections,
    )
    log, gen_report = generate_balanced(model, train, config, balance)
    _write_log(log, args.out, args.mapping)
    _write_json(gen_report.to_dict(), str(args.out) + ".report.json")
    _write_resolved_config(args, args.out)
    _maybe_print_json(args, gen_report.to_dict())
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    real = _read_log(args.real, args.mapping)
    gen = _read_log(args.gen, args.gen_mapping or args.mapping)
    similarity = metrics_similarity.evaluate_all(real, gen, workers=args.workers)
    payload = {
        "similarity": similarity.to_dict(),
        "entropy": {
            "real": metrics_entropy.entropy_report(real).to_dict(),
            "generated": metrics_entropy.entropy_report(gen).to_dict(),
        },
    }
    if args.tstr_train:
        train = _read_log(args.tstr_train, args.mapping)
        learner = tstr_module.baseline_learner("regression", seed=args.seed)
        result = tstr_module.tstr_rmae(train, gen, real, learner, runs=args.runs)
        payload["tstr"] = result.to_dict()
    _write_json(payload, args.out)
    _write_resolved_config(args, args.out)
    if args.table:
        sys.stderr.write(similarity.to_table() + "\n")
    _maybe_print_json(args, payload)
    return EXIT_OK


def _cmd_optimize_k(args) -> int:
    sweeps = []
    for path in args.input:
        log = _read_log(path, args.mapping)
        split = temporal_split(log, 0.8)
        sweeps.append(
            hyperopt.optimize_k(
                split.train, split.test,
                k_candidates=args.k_candidates,
                gen_traces=args.gen_traces,
                seed=args.seed,
            )
        )
    result = sweeps[0] if len(sweeps) == 1 else hyperopt.aggregate_sweeps(sweeps)
    _write_json(result.to_dict(), args.out)
    if args.plot_data:
        Path(args.plot_data).write_text(result.plot_data(), encoding="utf-8")
    _write_resolved_config(args, args.out)
    logger.info("selected k=%d", result.selected_k)
    _maybe_print_json(args, result.to_dict())
    return EXIT_OK


def _cmd_tstr(args) -> int:
    train = _read_log(args.train, args.mapping)
    gen = _read_log(args.gen, args.gen_mapping or args.mapping)
    test = _read_log(args.test, args.mapping)
    payload: dict = {}
    learner = tstr_module.baseline_learner("regression", seed=args.seed)
    payload["rmae"] = tstr_module.tstr_rmae(train, gen, test, learner, runs=args.runs).to_dict()
    if args.activity:
        classifier = tstr_module.baseline_learner("classification", seed=args.seed)
        balanced = _read_log(args.balanced, args.mapping) if args.balanced else gen
        payload["fscore"] = tstr_module.rare_activity_fscore(
            train, balanced, test, args.activity, classifier, runs=args.runs
        ).to_dict()
    _write_json(payload, args.out)
    _write_resolved_config(args, args.out)
    _maybe_print_json(args, payload)
    return EXIT_OK


# --- argument plumbing ---

def _parse_k_candidates(raw: str):
    try:
        values = sorted({int(part) for part in raw.split(",") if part.strip()})
    except ValueError as exc:
        raise UsageError(f"bad k candidate list {raw!r}") from exc
    if not values or any(v < 1 for v in values):
        raise UsageError(f"k candidates must be positive integers, got {raw!r}")
    return values


def _apply_config_file(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Fill flags still at their parser default from the [command] section of
    the TOML config file, so explicit flags win."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {args.config}")
    payload = tomllib.loads(path.read_text(encoding="utf-8"))
    section = payload.get(args.command, {})
    for key, value in section.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"unknown config key {key!r} for command {args.command!r}")
        if getattr(args, attr) == parser_defaults.get(attr):
            setattr(args, attr, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logaug",
        description="Discover a probabilistic transition system from an event "
                    "log, generate synthetic logs, and evaluate them.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_seed=True):
        p.add_argument("--config", help="TOML config file; flags override it")
        p.add_argument("--mapping", help="column mapping (TOML/JSON) for CSV logs")
        p.add_argument("--json", action="store_true",
                       help="print machine-readable results on stdout")
        if needs_seed:
            p.add_argument("--seed", type=int, default=None,
                           help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")

    p = sub.add_parser("discover", help="learn a transition-system model from a log")
    common(p)
    p.add_argument("--input", required=True, help="training event log")
    p.add_argument("--k", default="3", help="history length, or 'auto' for the elbow sweep")
    p.add_argument("--k-candidates", type=_parse_k_candidates, default=None,
                   help="comma-separated candidate ks for --k auto (default 1..6)")
    p.add_argument("--gen-traces", type=int, default=None,
                   help="traces generated per sweep candidate")
    p.add_argument("--out", required=True, help="model output path (.pts.json.gz)")
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("generate", help="generate a synthetic log from a model")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True, help="number of traces")
    p.add_argument("--start-time", default=None, help="ISO timestamp of the first arrival")
    p.add_argument("--max-trace-length", type=int, default=None)
    p.add_argument("--out", required=True, help="output log (.xes[.gz]/.csv/.json)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("balance", help="rebalance a log toward a rare activity")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True, help="training log to rebalance")
    p.add_argument("--activity", required=True, help="target activity")
    p.add_argument("--target-fraction", type=float, default=0.5)
    p.add_argument("--max-rejections", type=int, default=1000)
    p.add_argument("--start-time", default=None)
    p.add_argument("--max-trace-length", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_balance)

    p = sub.add_parser("evaluate", help="similarity + entropy report for a log pair")
    common(p)
    p.add_argument("--real", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--gen-mapping", default=None,
                   help="separate CSV mapping for the generated log")
    p.add_argument("--tstr-train", default=None,
                   help="training log; enables the train-on-synthetic protocol")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--workers", type=int, default=None,
                   help="parallel metric workers (results are schedule-independent)")
    p.add_argument("--table", action="store_true", help="print an aligned table to stderr")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("optimize-k", help="elbow sweep over history lengths")
    common(p)
    p.add_argument("--input", nargs="+", required=True,
                   help="one or more logs; several are averaged per k")
    p.add_argument("--k-candidates", type=_parse_k_candidates, default=None)
    p.add_argument("--gen-traces", type=int, default=None)
    p.add_argument("--plot-data", default=None, help="two-column sweep data output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_optimize_k)

    p = sub.add_parser("tstr", help="train-on-synthetic-test-on-real protocols")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--gen-mapping", default=None)
    p.add_argument("--activity", default=None,
                   help="also run the rare-activity classification protocol")
    p.add_argument("--balanced", default=None,
                   help="rebalanced log for the classification protocol (default: --gen)")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_tstr)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        defaults = {
            action.dest: action.default
            for action in parser._subparsers._group_actions[0].choices[args.command]._actions
        }
        _apply_config_file(args, defaults)
        if getattr(args, "seed", None) is None and hasattr(args, "seed"):
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
