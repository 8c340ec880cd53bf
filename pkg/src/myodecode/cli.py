"""Command-line entry point for the decoding pipeline.

Every subcommand is a thin wrapper over one library call and emits
plot-ready CSV or structured text rather than rendered figures.  All
randomness hangs off ``--seed`` (default 2020), so identical invocations
on identical inputs produce identical outputs.

Exit codes: 0 success, 2 usage error (bad arguments, missing inputs),
3 I/O or schema error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import datastore, decoder, dsp, evaluation, runtime, synth
from .errors import NumericalError, SchemaError

DEFAULT_SEED = 2020

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_FILTER_FLAGS = {"lowcost": dsp.LOW_COST, "research": dsp.RESEARCH_GRADE}


def _out_dir() -> Path:
    return Path(os.environ.get("MYODECODE_OUT_DIR", "."))


def _resolve_out(arg: str | None, default_name: str) -> Path:
    return Path(arg) if arg is not None else _out_dir() / default_name


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"input file not found: {p}")
    return p


def _load_session(path: str) -> datastore.SessionLog:
    return datastore.read_session(_require_file(path))


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.schedule is not None:
        schedule = synth.parse_schedule(_require_file(args.schedule).read_text(encoding="ascii"))
    else:
        schedule = synth.DEFAULT_SCHEDULE
    profile = synth.make_profile(schedule)
    out = _resolve_out(args.out, "session.csv")
    log = runtime.record_training_session(
        profile,
        synth.default_synergy(),
        _FILTER_FLAGS[args.filter],
        args.seed,
        destination=out,
        session_id=args.session_id,
        sidecar=not args.no_sidecar,
    )
    print(f"wrote {log.n_frames} frames ({log.n_frames / 25.0:.1f} s) to {out}")
    if not args.no_sidecar:
        print(f"wrote full-rate sidecar to {datastore.sidecar_path(out)}")
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    log = _load_session(args.session)
    features = log.mav.astype(float)
    baseline = dsp.estimate_baseline(features, log.rest_mask())
    model = decoder.train(
        dsp.subtract_baseline(features, baseline),
        log.kin,
        dof_labels=log.dof_labels,
        baseline=baseline,
        ridge=args.ridge,
    )
    out = _resolve_out(args.out, "model.txt")
    decoder.save_model(model, out)
    print(f"trained on {log.n_frames} frames; model written to {out}")
    return EXIT_OK


def _cmd_decode(args: argparse.Namespace) -> int:
    log = _load_session(args.session)
    model = decoder.load_model(_require_file(args.model))
    source = runtime.replay_source(args.session)
    config = runtime.PipelineConfig(
        source=source,
        model=model,
        filter_variant=log.filter_variant,
        paced=args.paced,
    )
    trace, report = runtime.run_pipeline(config)
    out = _resolve_out(args.out, "trace.csv")
    trace.write_csv(out)
    print(f"decoded {trace.values.shape[0]} cycles to {out}")
    if args.timing is not None:
        Path(args.timing).write_text(report.to_text(), encoding="ascii")
        print(f"timing report written to {args.timing}")
    return EXIT_OK


def _session_arrays(log: datastore.SessionLog) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return log.mav.astype(float), log.kin, log.rest_mask()


def _cmd_eval(args: argparse.Namespace) -> int:
    features, kin, rest = _session_arrays(_load_session(args.session))
    report = evaluation.dof_sweep(features, kin, rest, args.k, args.seed)
    print(f"k={report.dof_count} subsets={report.n_subsets}")
    print(f"rmse_intended_mean={report.mean_intended:.4f}")
    print(f"rmse_unintended_mean={report.mean_unintended:.4f}")
    if args.out is not None:
        _write_sweep_csv(Path(args.out), [report])
        print(f"report written to {args.out}")
    return EXIT_OK


def _write_sweep_csv(path: Path, reports: list[evaluation.RmseReport]) -> None:
    lines = ["k,n_subsets,rmse_intended_mean,rmse_unintended_mean"]
    for r in reports:
        lines.append(f"{r.dof_count},{r.n_subsets},{r.mean_intended:.4f},{r.mean_unintended:.4f}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def _cmd_sweep(args: argparse.Namespace) -> int:
    features, kin, rest = _session_arrays(_load_session(args.session))
    reports = [
        evaluation.dof_sweep(features, kin, rest, k, args.seed) for k in range(1, 7)
    ]
    print("k,n_subsets,rmse_intended_mean,rmse_unintended_mean")
    for r in reports:
        print(f"{r.dof_count},{r.n_subsets},{r.mean_intended:.4f},{r.mean_unintended:.4f}")
    out = _resolve_out(args.out, "sweep.csv")
    _write_sweep_csv(out, reports)
    print(f"sweep table written to {out}")
    return EXIT_OK


def _cmd_snr(args: argparse.Namespace) -> int:
    log = _load_session(args.session)
    report = evaluation.session_snr(
        log.mav.astype(float), log.labels, movement_class=args.movement_class
    )
    lines = ["movement_class,electrode,snr"]
    lines += [f"{report.movement_class},{e},{v:.4f}" for e, v in enumerate(report.values)]
    lines.append(f"{report.movement_class},mean,{report.mean:.4f}")
    lines.append(f"{report.movement_class},sd,{report.sd:.4f}")
    print("\n".join(lines))
    if args.out is not None:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="ascii")
    return EXIT_OK


def _cmd_tost(args: argparse.Namespace) -> int:
    text = _require_file(args.diffs).read_text(encoding="ascii")
    diffs = [
        float(line.split("#", 1)[0])
        for line in text.splitlines()
        if line.split("#", 1)[0].strip()
    ]
    result = evaluation.tost_min_bounds(np.array(diffs), alpha=args.alpha)
    lines = [
        f"n: {result.n}",
        f"alpha: {result.alpha}",
        f"df: {result.df}",
        f"mean_diff: {result.mean_diff:.6f}",
        f"sd_diff: {result.sd_diff:.6f}",
        f"lower_bound: {result.lower_bound:.6f}",
        f"upper_bound: {result.upper_bound:.6f}",
    ]
    print("\n".join(lines))
    if args.out is not None:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="ascii")
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    log = _load_session(args.session)
    model = decoder.load_model(_require_file(args.model))
    config = runtime.PipelineConfig(
        source=runtime.replay_source(args.session),
        model=model,
        filter_variant=log.filter_variant,
        paced=True,
    )
    _, report = runtime.run_pipeline(config)
    print(report.to_text(), end="")
    if args.out is not None:
        Path(args.out).write_text(report.to_text(), encoding="ascii")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="myodecode",
        description="Synthetic-front-end myoelectric decoding pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="RNG seed (default 2020)")

    p = sub.add_parser("synth", help="synthesize a training session")
    p.add_argument("--schedule", help="plain-text movement schedule file")
    add_seed(p)
    p.add_argument("--filter", choices=sorted(_FILTER_FLAGS), default="lowcost")
    p.add_argument("--out", help="session CSV path (default $MYODECODE_OUT_DIR/session.csv)")
    p.add_argument("--session-id", default=None)
    p.add_argument("--no-sidecar", action="store_true", help="skip the full-rate raw sidecar")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a Kalman model from a session")
    p.add_argument("--session", required=True)
    p.add_argument("--out", help="model path (default $MYODECODE_OUT_DIR/model.txt)")
    p.add_argument("--ridge", type=float, default=None, help="ridge weight (default: auto)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="replay a session through the pipeline")
    p.add_argument("--session", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="trace CSV path (default $MYODECODE_OUT_DIR/trace.csv)")
    p.add_argument("--timing", help="also write the timing report here")
    p.add_argument("--paced", action="store_true", help="pace the producer at wall-clock rate")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("eval", help="50/50 split RMSE evaluation at one DOF count")
    p.add_argument("--session", required=True)
    add_seed(p)
    p.add_argument("--k", type=int, default=6, choices=range(1, 7), help="DOF count (default 6)")
    p.add_argument("--out", help="optional CSV output path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="RMSE sweep over k = 1..6 DOF combinations")
    p.add_argument("--session", required=True)
    add_seed(p)
    p.add_argument("--out", help="sweep CSV path (default $MYODECODE_OUT_DIR/sweep.csv)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("snr", help="per-electrode movement/rest SNR of a session")
    p.add_argument("--session", required=True)
    p.add_argument("--movement-class", choices=evaluation.MOVEMENT_CLASSES, default="digits")
    p.add_argument("--out", help="optional CSV output path")
    p.set_defaults(func=_cmd_snr)

    p = sub.add_parser("tost", help="minimum equivalence bounds for paired differences")
    p.add_argument("--diffs", required=True, help="text file, one difference per line")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", help="optional output path")
    p.set_defaults(func=_cmd_tost)

    p = sub.add_parser("bench", help="wall-clock-paced replay with timing summary")
    p.add_argument("--session", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="optional timing report path")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; pass both through
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"myodecode: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, OSError) as exc:
        print(f"myodecode: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"myodecode: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
