"""Command-line entry point: ``contcat <command> ...``."""

import argparse
import json
import math
import os
import sys
import time
import warnings
from datetime import datetime, timezone

from . import __version__
from .calibration import calibrate
from .evaluation import (
    MatrixOracle,
    SyntheticConfig,
    conformance,
    evaluate,
    generate_synthetic,
)
from .io import (
    StreamOracle,
    config_to_dict,
    dump_json,
    file_digest,
    load_calibration,
    load_costs,
    load_result,
    load_scores,
    save_calibration,
    save_report,
    save_result,
    write_scores,
)
from .ranker import RankerConfig, run_fixed_length, run_random_baseline, run_ranker
from .session import ItemBank


class CLIError(Exception):
    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message, where="argv")


def _id_list(text):
    ids = [s.strip() for s in text.split(",") if s.strip()]
    if not ids:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return ids


def _float_list(text):
    try:
        return [float(s) for s in _id_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _budget(text):
    if text.lower() in ("inf", "none", "unlimited"):
        return math.inf
    return float(text)


def _score_options(p):
    p.add_argument("--aggregate-duplicates", action="store_true",
                   help="average repeated (model, item) rows")
    p.add_argument("--clamp", action="store_true", help="clamp out-of-range scores to [0, 1]")
    p.add_argument("--per-item-scale", action="store_true",
                   help="min-max scale every item column to [0, 1]")


def _ranking_options(p):
    p.add_argument("--calib", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scores", help="replay scores from this file")
    src.add_argument("--live", action="store_true",
                     help="request scores over stdout/stdin, one JSON line each")
    p.add_argument("--models", type=_id_list, required=True)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--budget", type=_budget, default=math.inf)
    p.add_argument("--costs", help="CSV with model_id,cost_per_item")
    p.add_argument("--confidence-rule", choices=["band", "two-sided"], default="band")
    p.add_argument("--se-mode", choices=["posterior", "fisher"], default="posterior")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _score_options(p)


def build_parser():
    parser = _Parser(prog="contcat", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("calibrate", help="estimate item difficulties and noise")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--models", type=_id_list, help="calibrate on these models only")
    p.add_argument("--exclude-models", type=_id_list, default=[],
                   help="leave these models out (hold-out set)")
    p.add_argument("--dataset")
    p.add_argument("--metric")
    _score_options(p)

    p = sub.add_parser("rank", help="adaptive multi-model ranking")
    _ranking_options(p)
    p = sub.add_parser("baseline", help="random-allocation baseline")
    _ranking_options(p)
    p = sub.add_parser("fixed", help="fixed-length CAT ablation")
    _ranking_options(p)
    p.add_argument("--n", type=int, required=True, help="items per model")

    p = sub.add_parser("evaluate", help="score a ranking against full evaluation")
    p.add_argument("--result", required=True)
    p.add_argument("--truth-scores", required=True)
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _score_options(p)

    p = sub.add_parser("conformance", help="variance-structure R^2")
    p.add_argument("--calib", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--out", required=True)
    _score_options(p)

    p = sub.add_parser("synth", help="sample a score file from the response model")
    p.add_argument("--models", type=int, required=True)
    p.add_argument("--items", type=int, required=True)
    p.add_argument("--k", type=float, default=0.1)
    p.add_argument("--theta", type=_float_list, help="abilities (default: N(0, 1) draws)")
    p.add_argument("--b-mean", type=float, default=0.0)
    p.add_argument("--b-sd", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", help="generating parameters (default: <out>.truth.json)")
    return parser


def _require_file(path, flag):
    if not os.path.isfile(path):
        raise CLIError(f"file not found: {path}", where=flag)


def _scores(args, path, flag):
    _require_file(path, flag)
    return load_scores(path, aggregate_duplicates=args.aggregate_duplicates, clamp=args.clamp,
                       scale_per_item=args.per_item_scale)


def cmd_calibrate(args):
    matrix = _scores(args, args.scores, "--scores")
    if args.models:
        matrix = matrix.select_models(args.models)
    if args.exclude_models:
        matrix = matrix.drop_models(args.exclude_models)
    meta = {"dataset": args.dataset, "metric": args.metric}
    art = calibrate(matrix, args.epsilon, metadata={k: v for k, v in meta.items() if v})
    save_calibration(art, args.out)
    return {"inputs": [args.scores], "outputs": [args.out]}


def _ranking_setup(args):
    _require_file(args.calib, "--calib")
    bank = ItemBank.from_artifact(load_calibration(args.calib))
    costs = None
    inputs = [args.calib]
    if args.costs:
        _require_file(args.costs, "--costs")
        costs = load_costs(args.costs)
        inputs.append(args.costs)
    if args.live:
        oracle = StreamOracle(sys.stdin, sys.stdout)
    else:
        matrix = _scores(args, args.scores, "--scores")
        unknown = [m for m in args.models if m not in matrix.models]
        if unknown:
            raise CLIError(f"model {unknown[0]!r} not in score file", where="--models")
        oracle = MatrixOracle(matrix)
        inputs.append(args.scores)
    config = RankerConfig(
        gamma=args.gamma, n_init=args.n_init, n_max=args.n_max, budget=args.budget,
        seed=args.seed, confidence_rule=args.confidence_rule, se_mode=args.se_mode,
    )
    return bank, oracle, config, costs, inputs


def cmd_rank(args):
    bank, oracle, config, costs, inputs = _ranking_setup(args)
    if args.command == "rank":
        result = run_ranker(args.models, bank, oracle, config, costs=costs)
    elif args.command == "baseline":
        result = run_random_baseline(args.models, bank, oracle, config, costs=costs)
    else:
        result = run_fixed_length(args.models, bank, oracle, args.n, config, costs=costs)
    save_result(result, args.out, config=config_to_dict(config))
    return {"inputs": inputs, "outputs": [args.out]}


def cmd_evaluate(args):
    _require_file(args.result, "--result")
    result = load_result(args.result)
    truth = _scores(args, args.truth_scores, "--truth-scores")
    report = evaluate(result, truth, n_boot=args.n_boot, level=args.level, seed=args.seed)
    save_report(report, args.out)
    return {"inputs": [args.result, args.truth_scores], "outputs": [args.out]}


def cmd_conformance(args):
    _require_file(args.calib, "--calib")
    calib = load_calibration(args.calib)
    matrix = _scores(args, args.scores, "--scores")
    r2 = conformance(matrix, calib, n_bins=args.bins, min_count=args.min_count)
    dump_json({"format": "contcat.conformance", "version": 1, "r2": r2, "bins": args.bins,
               "min_count": args.min_count, "k": calib.k}, args.out)
    return {"inputs": [args.calib, args.scores], "outputs": [args.out]}


def cmd_synth(args):
    theta = tuple(args.theta) if args.theta else ("normal", 0.0, 1.0)
    n_models = len(args.theta) if args.theta else args.models
    if args.theta and len(args.theta) != args.models:
        raise CLIError(f"--theta has {len(args.theta)} values but --models is {args.models}",
                       where="--theta")
    config = SyntheticConfig(
        n_models=n_models, n_items=args.items, theta_gen=theta,
        b_gen=("normal", args.b_mean, args.b_sd), k_true=args.k, seed=args.seed,
    )
    matrix, truth = generate_synthetic(config)
    write_scores(matrix, args.out)
    truth_out = args.truth_out or f"{args.out}.truth.json"
    dump_json({"format": "contcat.synthetic_truth", "version": 1, "k": truth.k,
               "theta": truth.theta, "b": truth.b}, truth_out)
    return {"inputs": [], "outputs": [args.out, truth_out]}


COMMANDS = {
    "calibrate": cmd_calibrate,
    "rank": cmd_rank,
    "baseline": cmd_rank,
    "fixed": cmd_rank,
    "evaluate": cmd_evaluate,
    "conformance": cmd_conformance,
    "synth": cmd_synth,
}


def _write_manifest(args, argv, info, started, elapsed):
    config = {k: v for k, v in vars(args).items() if k != "command"}
    config = {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in config.items()}
    manifest = {
        "format": "contcat.manifest",
        "version": 1,
        "tool_version": __version__,
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {p: file_digest(p) for p in info["inputs"]},
        "outputs": info["outputs"],
        "started": started,
        "seconds": elapsed,
    }
    dump_json(manifest, f"{info['outputs'][0]}.manifest.json")


def _fail(command, message, where=None):
    record = {"status": "error", "command": command, "message": message}
    if where:
        record["where"] = where
    print(json.dumps(record), file=sys.stderr)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    command = None
    try:
        args = build_parser().parse_args(argv)
        command = args.command
        started = datetime.now(timezone.utc).isoformat()
        t0 = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            info = COMMANDS[command](args)
        for w in caught:
            print(json.dumps({"status": "warning", "command": command, "message": str(w.message)}),
                  file=sys.stderr)
        _write_manifest(args, argv, info, started, time.perf_counter() - t0)
    except CLIError as exc:
        _fail(command, str(exc), exc.where)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        _fail(command, str(msg))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
