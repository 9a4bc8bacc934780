"""Command-line surface tying the pipeline together.

Subcommands: ``simulate-envelope``, ``predict``, ``evaluate``, ``synth``,
``experiment``.  All flags are long-form; a JSON config file may supply any
flag (command line wins on conflict).  ``RANKCP_PARALLEL`` sets the default
parallelism degree; results never depend on it.

Exit codes: 0 ok, 2 usage/type error, 3 insufficient Monte-Carlo sample,
4 data error, 5 infeasible level.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__, io
from .conformal import (
    FCP_CONTROLLED,
    MARGINAL,
    calibrate,
    fcp_calibration,
    predict_sets,
    proxy_scores,
    select_k,
)
from .envelope import DEFAULT_K, ENVELOPE_KINDS
from .errors import (
    DimensionMismatch,
    InfeasibleLevel,
    InsufficientSample,
    InvalidData,
    InvalidInput,
    RankCPError,
)
from .evaluate import (
    DATA_MODELS,
    ExperimentConfig,
    build_envelope,
    run_experiment,
    synthesize_problem,
)
from .ranks import ranks_within
from .streams import default_workers
from .targets import test_only_set, topk_candidates

TOOL = "rankcp"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SAMPLING = 3
EXIT_DATA = 4
EXIT_INFEASIBLE = 5


def _opt(name, converter, default, help_text, choices=None):
    return {
        "name": name,
        "converter": converter,
        "default": default,
        "help": help_text,
        "choices": choices,
    }


def _bool_flag(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise InvalidInput(f"expected on/off, got {value!r}")


COMMANDS: dict[str, list[dict]] = {
    "simulate-envelope": [
        _opt("n", int, None, "calibration set size (required)"),
        _opt("m", int, None, "test set size (required)"),
        _opt("delta", float, 0.1, "envelope miscoverage level"),
        _opt("kind", str, "quantile", "envelope kind", choices=ENVELOPE_KINDS),
        _opt("K", int, DEFAULT_K, "Monte-Carlo trajectory count"),
        _opt("seed", int, 0, "simulation seed"),
        _opt("workers", int, None, "parallel chunks (default: RANKCP_PARALLEL)"),
        _opt("out", str, None, "output envelope JSON path (required)"),
    ],
    "predict": [
        _opt("scores", str, None, "scores CSV path (required)"),
        _opt("envelope", str, None, "envelope JSON path (required)"),
        _opt("alpha", float, 0.1, "target miscoverage per item"),
        _opt("mode", str, "RA", "score family", choices=("RA", "VA")),
        _opt("fcp", _bool_flag, False, "FCP-calibrated threshold (on/off)"),
        _opt("beta", float, 0.25, "FCP exceedance budget (fcp=on)"),
        _opt("fcp-K", int, 10_000, "replicates for FCP calibration (fcp=on)"),
        _opt("seed", int, 0, "seed for FCP calibration (fcp=on)"),
        _opt("test-only", _bool_flag, False, "add test-only rank columns"),
        _opt("top-k", int, 0, "add a top-k candidate column (0 disables)"),
        _opt("workers", int, None, "parallel chunks (default: RANKCP_PARALLEL)"),
        _opt("out", str, None, "output sets CSV path (required)"),
    ],
    "evaluate": [
        _opt("sets", str, None, "sets CSV path (required)"),
        _opt("truth", str, None, "scores CSV with true_value column (required)"),
        _opt("out", str, None, "output metrics JSON path (required)"),
    ],
    "synth": [
        _opt("model", str, "sigmoid", "data model", choices=DATA_MODELS),
        _opt("n", int, None, "calibration set size (required)"),
        _opt("m", int, None, "test set size (required)"),
        _opt("noise-sd", float, 0.07, "toy ranker noise"),
        _opt("data-noise-sd", float, 0.07, "generator noise"),
        _opt("d", int, 5, "feature dimension (sigmoid model)"),
        _opt("mode", str, "RA", "ranker output type", choices=("RA", "VA")),
        _opt("seed", int, 0, "generation seed"),
        _opt("out", str, None, "output scores CSV path (required)"),
    ],
    "experiment": [
        _opt("n", int, 200, "calibration set size"),
        _opt("m", int, 200, "test set size"),
        _opt("reps", int, 500, "repetitions"),
        _opt("alpha", float, 0.1, "target miscoverage per item"),
        _opt("beta", float, 0.25, "FCP exceedance budget"),
        _opt("delta", float, 0.02, "envelope miscoverage level"),
        _opt("mode", str, "RA", "score family", choices=("RA", "VA")),
        _opt("envelope-kind", str, "quantile", "envelope kind", choices=ENVELOPE_KINDS),
        _opt("K-env", int, 20_000, "envelope trajectory count"),
        _opt("K-fcp", int, 10_000, "FCP calibration replicates"),
        _opt("data-model", str, "sigmoid", "data model", choices=DATA_MODELS),
        _opt("noise-sd", float, 0.07, "toy ranker noise"),
        _opt("seed", int, 0, "master seed"),
        _opt(
            "fcp-mode", str, MARGINAL, "threshold selection",
            choices=(MARGINAL, FCP_CONTROLLED),
        ),
        _opt("k-top", int, 0, "top-k target size (0: 5% of m)"),
        _opt("workers", int, None, "parallel chunks (default: RANKCP_PARALLEL)"),
        _opt("out", str, None, "output report CSV path (required)"),
    ],
}

REQUIRED = {
    "simulate-envelope": ("n", "m", "out"),
    "predict": ("scores", "envelope", "out"),
    "evaluate": ("sets", "truth", "out"),
    "synth": ("n", "m", "out"),
    "experiment": ("out",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="Prediction intervals for item ranks around a black-box ranker.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in COMMANDS.items():
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="JSON file supplying any flag")
        for opt in options:
            p.add_argument(
                f"--{opt['name']}",
                default=argparse.SUPPRESS,
                help=opt["help"],
                dest=opt["name"].replace("-", "_"),
            )
    return parser


def _resolve(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, config-file values, and explicit flags (flags win)."""
    options = {opt["name"]: opt for opt in COMMANDS[command]}
    values = {name: opt["default"] for name, opt in options.items()}
    if args.config is not None:
        doc = io.read_json(args.config)
        if not isinstance(doc, dict):
            raise InvalidData(f"{args.config}: config must be a JSON object")
        for key, value in doc.items():
            name = key.replace("_", "-")
            if name not in options:
                raise InvalidInput(f"unknown config key {key!r} for {command}")
            values[name] = value
    for name in options:
        attr = name.replace("-", "_")
        if hasattr(args, attr):
            values[name] = getattr(args, attr)
    resolved = {}
    for name, opt in options.items():
        value = values[name]
        if value is None:
            if name in REQUIRED[command]:
                raise InvalidInput(f"--{name} is required for {command}")
            resolved[name] = None
            continue
        try:
            value = opt["converter"](value)
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"--{name}: {exc}") from exc
        if opt["choices"] is not None and value not in opt["choices"]:
            raise InvalidInput(
                f"--{name} must be one of {', '.join(map(str, opt['choices']))}"
            )
        resolved[name] = value
    return resolved


def _workers(resolved: dict) -> int:
    return resolved.get("workers") or default_workers()


def _manifest(command: str, resolved: dict, seeds: dict, inputs: dict, extras: dict,
              out: str) -> None:
    io.RunManifest(
        tool=TOOL,
        version=__version__,
        command=command,
        config={k: v for k, v in resolved.items()},
        seeds=seeds,
        inputs={name: io.file_digest(path) for name, path in inputs.items()},
        extras=extras,
    ).write(out)


def _cmd_simulate_envelope(resolved: dict) -> int:
    mc = resolved["kind"] in ("linear", "quantile")
    env = build_envelope(
        resolved["kind"], resolved["n"], resolved["m"], resolved["delta"],
        resolved["K"], resolved["seed"], workers=_workers(resolved),
    )
    io.write_envelope(env, resolved["out"])
    _manifest(
        "simulate-envelope", resolved,
        seeds={"envelope": resolved["seed"] if mc else None},
        inputs={},
        extras={"param": env.param},
        out=resolved["out"],
    )
    return EXIT_OK


def _cmd_predict(resolved: dict) -> int:
    problem = io.read_scores(resolved["scores"], resolved["mode"])
    env = io.read_envelope(resolved["envelope"])
    if (env.n, env.m) != (problem.n, problem.m):
        raise DimensionMismatch(
            f"envelope is ({env.n}, {env.m}) but scores file has "
            f"({problem.n}, {problem.m})"
        )
    meta = None
    if resolved["fcp"]:
        meta = fcp_calibration(
            resolved["alpha"], resolved["beta"], env.delta, problem.n, problem.m,
            resolved["fcp-K"], resolved["seed"], workers=_workers(resolved),
        )
        k = meta.k
    else:
        k = select_k(resolved["alpha"], env.delta, problem.n)
    thr = calibrate(
        proxy_scores(problem, env), k, alpha=resolved["alpha"],
        fcp_mode=FCP_CONTROLLED if resolved["fcp"] else MARGINAL, fcp_meta=meta,
    )
    sets = predict_sets(problem, thr)
    extra_test = (
        [test_only_set(s, env) for s in sets] if resolved["test-only"] else None
    )
    top = (
        topk_candidates(sets, resolved["top-k"]) if resolved["top-k"] > 0 else None
    )
    io.write_sets(sets, resolved["out"], test_only=extra_test, top_candidates=top)
    _manifest(
        "predict", resolved,
        seeds={"fcp": resolved["seed"] if resolved["fcp"] else None},
        inputs={"scores": resolved["scores"], "envelope": resolved["envelope"]},
        extras={
            "k": thr.k,
            "threshold": thr.value,
            "t_hat": None if meta is None else meta.t_hat,
        },
        out=resolved["out"],
    )
    return EXIT_OK


def _cmd_evaluate(resolved: dict) -> int:
    sets = io.read_sets(resolved["sets"])
    ids, n, m, truth = io.read_truth(resolved["truth"])
    pooled = ranks_within(truth)
    rank_by_id = dict(zip(ids, pooled.tolist()))
    missing = [s.item for s in sets if s.item not in rank_by_id]
    if missing:
        raise DimensionMismatch(
            f"ids in sets file missing from truth file: {missing[:5]}"
        )
    items = [
        {
            "id": s.item,
            "true_rank": int(rank_by_id[s.item]),
            "covered": bool(s.contains(int(rank_by_id[s.item]))),
        }
        for s in sets
    ]
    covered = [it["covered"] for it in items]
    doc = {
        "fcp": 1.0 - sum(covered) / len(covered) if covered else 0.0,
        "relative_length": float(np.mean([s.size for s in sets])) / (n + m),
        "items": items,
    }
    io.write_json(doc, resolved["out"])
    _manifest(
        "evaluate", resolved, seeds={},
        inputs={"sets": resolved["sets"], "truth": resolved["truth"]},
        extras={}, out=resolved["out"],
    )
    return EXIT_OK


def _cmd_synth(resolved: dict) -> int:
    problem = synthesize_problem(
        resolved["model"], resolved["n"], resolved["m"], resolved["noise-sd"],
        resolved["mode"], resolved["seed"], d=resolved["d"],
        data_noise_sd=resolved["data-noise-sd"],
    )
    io.write_scores(problem, resolved["out"])
    _manifest(
        "synth", resolved, seeds={"data": resolved["seed"]}, inputs={},
        extras={}, out=resolved["out"],
    )
    return EXIT_OK


def _cmd_experiment(resolved: dict) -> int:
    cfg = ExperimentConfig(
        n=resolved["n"], m=resolved["m"], reps=resolved["reps"],
        alpha=resolved["alpha"], beta=resolved["beta"], delta=resolved["delta"],
        mode=resolved["mode"], envelope_kind=resolved["envelope-kind"],
        K_env=resolved["K-env"], K_fcp=resolved["K-fcp"],
        data_model=resolved["data-model"], noise_sd=resolved["noise-sd"],
        master_seed=resolved["seed"], fcp_mode=resolved["fcp-mode"],
        k_top=resolved["k-top"] or None, workers=_workers(resolved),
    )
    report = run_experiment(cfg)
    io.write_report(report, resolved["out"])
    summary = report.aggregates()
    _manifest(
        "experiment", resolved, seeds={"master": resolved["seed"]}, inputs={},
        extras={"aggregates": summary}, out=resolved["out"],
    )
    for key in ("mean_fcp", "fcp_exceedance", "mean_relative_length",
                "mean_oracle_ratio"):
        print(f"{key}: {summary[key]:.6g}")
    return EXIT_OK


DISPATCH = {
    "simulate-envelope": _cmd_simulate_envelope,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        resolved = _resolve(args.command, args)
        return DISPATCH[args.command](resolved)
    except InvalidInput as exc:
        print(f"{TOOL}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientSample as exc:
        print(f"{TOOL}: sampling error: {exc}", file=sys.stderr)
        return EXIT_SAMPLING
    except InfeasibleLevel as exc:
        print(f"{TOOL}: infeasible level: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except RankCPError as exc:
        print(f"{TOOL}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
