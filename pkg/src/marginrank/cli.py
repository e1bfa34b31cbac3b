"""Command line entry point: gen | train | baseline | rerank | eval.

Each subcommand writes fixed-name artifacts into --out-dir plus a manifest
recording flags, input paths, and output checksums.  Flags mirror the
config dataclass fields one-to-one so a manifest is enough to reproduce a
run.  Exit codes: 0 success, 1 input error (unreadable or invalid data or
model files), 2 flag or config error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .baseline import LineSearchConfig, line_search_fit
from .core import QuerySession, SessionFormatError, emit_sessions, load_sessions
from .evaluation import (
    DEFAULT_K,
    EvalReport,
    Scorer,
    evaluate,
    model_scorer,
    original_scorer,
)
from .figures import lift_figure, risk_reward_figure, save_figure, trace_figure
from .manifest import RunManifest, write_manifest
from .rerank import (
    LINKS,
    MarginWeightModel,
    ModelFormatError,
    RerankConfig,
    adjust_scores,
    load_model,
    rerank,
    save_model,
)
from .synth import SyntheticSpec, generate_sessions
from .train import TrainingDiverged, fit, write_trace_csv

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _error(err: object, code: int) -> int:
    print(f"error: {err}", file=sys.stderr)
    return code


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_data(path: str) -> list[QuerySession]:
    sessions = load_sessions(path)
    if not sessions:
        raise SessionFormatError(f"{path} contains no sessions")
    return sessions


def _load_model_for(
    path: str, sessions: Sequence[QuerySession]
) -> tuple[MarginWeightModel, float]:
    model, alpha = load_model(path)
    data_dim = sessions[0].feature_dim
    if model.feature_dim != data_dim:
        raise ModelFormatError(
            f"{path}: model expects feature_dim {model.feature_dim}, "
            f"data has {data_dim}"
        )
    return model, alpha


def cmd_gen(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        spec = SyntheticSpec(
            n_queries=args.queries,
            mean_items=args.items,
            feature_dim=args.feature_dim,
            seed=args.seed,
            tension=args.tension,
            feature_coef=args.feature_coef,
        )
    except ValueError as err:
        return _error(err, EXIT_CONFIG)
    try:
        sessions = generate_sessions(spec)
    except RuntimeError as err:
        return _error(err, EXIT_INPUT)

    out = _out_dir(args)
    data_path = out / "sessions.csv"
    emit_sessions(sessions, data_path)
    manifest = RunManifest(
        command="gen",
        config=dataclasses.asdict(spec),
        inputs={},
        seed=spec.seed,
        duration_seconds=time.perf_counter() - start,
    ).with_outputs({"sessions": data_path})
    write_manifest(manifest, out / "gen_manifest.json")
    print(f"wrote {len(sessions)} sessions to {data_path}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        config = RerankConfig(
            alpha=args.alpha,
            gamma=args.gamma,
            theta_rank=args.theta_rank,
            theta_kendall=args.theta_kendall,
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            link=args.link,
            seed=args.seed,
        )
        if args.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {args.threads}")
    except ValueError as err:
        return _error(err, EXIT_CONFIG)
    try:
        sessions = _load_data(args.data)
    except (OSError, SessionFormatError) as err:
        return _error(err, EXIT_INPUT)

    out = _out_dir(args)
    try:
        model, trace = fit(sessions, config, threads=args.threads)
    except TrainingDiverged as err:
        write_trace_csv(err.trace, out / "trace.csv")
        return _error(f"{err} (partial trace written to {out / 'trace.csv'})",
                      EXIT_DIVERGED)

    model_path = out / "model.json"
    trace_path = out / "trace.csv"
    figure_path = out / "trace.png"
    save_model(model, config.alpha, model_path)
    write_trace_csv(trace, trace_path)
    save_figure(trace_figure(trace), figure_path)
    manifest = RunManifest(
        command="train",
        config={**dataclasses.asdict(config), "threads": args.threads},
        inputs={"data": args.data},
        seed=config.seed,
        duration_seconds=time.perf_counter() - start,
    ).with_outputs({"model": model_path, "trace": trace_path, "figure": figure_path})
    write_manifest(manifest, out / "train_manifest.json")
    print(
        f"trained on {len(sessions)} sessions for {config.epochs} epochs: "
        f"total loss {trace.total[0]:.6g} -> {trace.total[-1]:.6g}, "
        f"final mean tau {trace.mean_tau[-1]:.4f}"
    )
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        grid = np.linspace(args.grid_min, args.grid_max, args.grid_points)
        config = LineSearchConfig(
            weight_grid=tuple(float(w) for w in grid),
            alpha=args.alpha,
            consumer_weight=args.consumer_weight,
            margin_weight=args.margin_weight,
        )
    except ValueError as err:
        return _error(err, EXIT_CONFIG)
    try:
        sessions = _load_data(args.data)
    except (OSError, SessionFormatError) as err:
        return _error(err, EXIT_INPUT)

    model, result = line_search_fit(sessions, config)
    out = _out_dir(args)
    model_path = out / "ls_model.json"
    curve_path = out / "line_search.csv"
    save_model(model, config.alpha, model_path)
    lines = ["weight,objective"]
    lines += [
        f"{w:.9g},{obj:.9g}" for w, obj in zip(result.grid, result.objectives)
    ]
    curve_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = RunManifest(
        command="baseline",
        config={
            "grid_min": args.grid_min,
            "grid_max": args.grid_max,
            "grid_points": args.grid_points,
            "alpha": config.alpha,
            "consumer_weight": config.consumer_weight,
            "margin_weight": config.margin_weight,
        },
        inputs={"data": args.data},
        duration_seconds=time.perf_counter() - start,
    ).with_outputs({"model": model_path, "curve": curve_path})
    write_manifest(manifest, out / "baseline_manifest.json")
    print(
        f"line search over {len(result.grid)} weights: best weight "
        f"{result.weight:.4g} (objective {result.objective:.6g})"
    )
    return EXIT_OK


def cmd_rerank(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        sessions = _load_data(args.data)
        model, alpha = _load_model_for(args.model, sessions)
    except (OSError, SessionFormatError, ModelFormatError) as err:
        return _error(err, EXIT_INPUT)

    out = _out_dir(args)
    ranking_path = out / "ranking.csv"
    lines = ["query_id,item_id,position,adjusted_score"]
    for session in sessions:
        scores = adjust_scores(session, model, alpha)
        positions = rerank(session, model, alpha)
        for idx in np.argsort(positions):
            lines.append(
                f"{session.query_id},{session.items[idx].item_id},"
                f"{positions[idx]},{scores[idx]:.9g}"
            )
    ranking_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    manifest = RunManifest(
        command="rerank",
        config={"alpha": alpha},
        inputs={"data": args.data, "model": args.model},
        duration_seconds=time.perf_counter() - start,
    ).with_outputs({"ranking": ranking_path})
    write_manifest(manifest, out / "rerank_manifest.json")
    print(f"wrote rankings for {len(sessions)} sessions to {ranking_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    try:
        sessions = _load_data(args.data)
        methods: list[tuple[str, Scorer]] = [("original", original_scorer)]
        if args.ls_model:
            ls_model, ls_alpha = _load_model_for(args.ls_model, sessions)
            methods.append(("ls", model_scorer(ls_model, ls_alpha)))
        if args.model:
            lrr_model, lrr_alpha = _load_model_for(args.model, sessions)
            methods.append(("lrr", model_scorer(lrr_model, lrr_alpha)))
    except (OSError, SessionFormatError, ModelFormatError) as err:
        return _error(err, EXIT_INPUT)

    try:
        report = evaluate(
            sessions,
            methods,
            k=args.k,
            reference="original",
            risk_baseline=args.risk_baseline,
        )
    except ValueError as err:
        return _error(err, EXIT_CONFIG)

    out = _out_dir(args)
    csv_path = out / "report.csv"
    table_path = out / "report.txt"
    lifts_path = out / "lifts.png"
    rr_path = out / "risk_reward.png"
    csv_path.write_text(report.to_csv_text(), encoding="utf-8")
    table_path.write_text(report.to_table_text(), encoding="utf-8")
    save_figure(lift_figure(report), lifts_path)
    save_figure(risk_reward_figure(report), rr_path)
    manifest = RunManifest(
        command="eval",
        config={"k": args.k, "risk_baseline": report.risk_baseline},
        inputs={
            "data": args.data,
            **({"ls_model": args.ls_model} if args.ls_model else {}),
            **({"model": args.model} if args.model else {}),
        },
        duration_seconds=time.perf_counter() - start,
    ).with_outputs({
        "report_csv": csv_path,
        "report_table": table_path,
        "lifts_figure": lifts_path,
        "risk_reward_figure": rr_path,
    })
    write_manifest(manifest, out / "eval_manifest.json")
    print(report.to_table_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginrank",
        description="margin-aware re-ranking: data generation, training, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic session corpus")
    gen.add_argument("--queries", type=int, default=1000)
    gen.add_argument("--items", type=float, default=30.0,
                     help="mean items per query (Poisson, floor 2)")
    gen.add_argument("--feature-dim", type=int, default=4)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--tension", type=float, default=1.0,
                     help="strength of the margin/utility anti-correlation")
    gen.add_argument("--feature-coef", type=float, default=1.5,
                     help="how strongly features predict margin percent")
    gen.add_argument("--out-dir", required=True)
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="fit the margin-weight model")
    train.add_argument("--data", required=True, help="sessions CSV")
    train.add_argument("--alpha", type=float, default=0.0)
    train.add_argument("--gamma", type=float, default=1.0)
    train.add_argument("--theta-rank", type=float, default=1.0)
    train.add_argument("--theta-kendall", type=float, default=1.0)
    train.add_argument("--learning-rate", type=float, default=0.01)
    train.add_argument("--epochs", type=int, default=200)
    train.add_argument("--link", choices=LINKS, default="softplus")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--threads", type=int, default=1)
    train.add_argument("--out-dir", required=True)
    train.set_defaults(func=cmd_train)

    baseline = sub.add_parser("baseline", help="fit the line-search baseline")
    baseline.add_argument("--data", required=True, help="sessions CSV")
    baseline.add_argument("--grid-min", type=float, default=0.0)
    baseline.add_argument("--grid-max", type=float, default=4.0)
    baseline.add_argument("--grid-points", type=int, default=41)
    baseline.add_argument("--alpha", type=float, default=0.0)
    baseline.add_argument("--consumer-weight", type=float, default=1.0)
    baseline.add_argument("--margin-weight", type=float, default=1.0)
    baseline.add_argument("--out-dir", required=True)
    baseline.set_defaults(func=cmd_baseline)

    rr = sub.add_parser("rerank", help="apply a model to data and emit rankings")
    rr.add_argument("--data", required=True, help="sessions CSV")
    rr.add_argument("--model", required=True, help="model JSON artifact")
    rr.add_argument("--out-dir", required=True)
    rr.set_defaults(func=cmd_rerank)

    ev = sub.add_parser("eval", help="score methods on both objectives")
    ev.add_argument("--data", required=True, help="sessions CSV")
    ev.add_argument("--model", help="trained model JSON (reported as 'lrr')")
    ev.add_argument("--ls-model", help="baseline model JSON (reported as 'ls')")
    ev.add_argument("--k", type=int, default=DEFAULT_K)
    ev.add_argument("--risk-baseline", default=None,
                    help="method risk/reward counts against (default: original)")
    ev.add_argument("--out-dir", required=True)
    ev.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
