"""Command-line entry points.

    eegselect select  DATA --k 6 --evaluator linear --out report.json
    eegselect sweep   DATA --k 6 --seeds 0:10 --out sweep.json
    eegselect apply   REPORT DATA [--out applied.json]
    eegselect inspect REPORT [--artifacts]
    eegselect plugin-check -- <plugin command ...>

Exit codes: 0 success, 2 bad configuration, 3 evaluator or protocol
failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import tempfile

from .errors import (
    AllTrialsRejected,
    ConfigError,
    DatasetFormatError,
    EvaluatorFailure,
    InvalidSubset,
    IoFailure,
    StageFailure,
    TooFewTrials,
    WindowOutOfBounds,
)
from .preprocess import WindowSpec
from .pipeline import (
    DEFAULT_GAMMA_GRID,
    RunConfig,
    apply_report,
    canonical_json,
    emit_report,
    load_report,
    run_pipeline,
    run_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EVALUATOR = 3
EXIT_IO = 4


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", help="dataset file in the v1 tensor format")
    p.add_argument("--k", type=int, required=True, help="target channel count")
    p.add_argument("--mode", choices=("combined", "hics-only", "dgaff-only"),
                   default="combined")
    p.add_argument("--evaluator", default="linear",
                   help="planted | linear | external:<command>")
    p.add_argument("--m", type=float, default=2.0, dest="bias",
                   help="weight bias toward greedy-selected channels (>= 1)")
    p.add_argument("--gamma", type=float, default=0.3,
                   help="repetition-vs-fitness mix for the final pick")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="parallel evaluation workers")
    p.add_argument("--out", default=None, help="report path (canonical JSON)")

    ga = p.add_argument_group("genetic stage")
    ga.add_argument("--n-fp", type=int, default=12, dest="population_size",
                    help="population size")
    ga.add_argument("--n-g", type=int, default=12, dest="generations",
                    help="generation count")
    ga.add_argument("--n-p", type=int, default=None, dest="pairs",
                    help="parent pairs per generation (default round(7*n_fp/2))")
    ga.add_argument("--p-c", type=float, default=0.85, dest="crossover_prob")
    ga.add_argument("--p-m", type=float, default=0.08, dest="mutation_prob")
    ga.add_argument("--survivor-selection", choices=("rank", "tournament"),
                    default="rank",
                    help="next-generation selection: best-children by rank, "
                         "or with-replacement tournaments")
    ga.add_argument("--tournament-size", type=int, default=2,
                    help="contestants per tournament (tournament mode)")
    ga.add_argument("--no-weighted-init", action="store_true",
                    help="uniform initial population even in combined mode")
    ga.add_argument("--hics-full-sweep", action="store_true",
                    help="aggregate greedy levels to all channels, keep the best size")

    pre = p.add_argument_group("preprocessing")
    pre.add_argument("--cue-onset", type=float, default=None,
                     help="cue time in seconds; setting any window flag enables windowing")
    pre.add_argument("--pre-cue", type=float, default=None,
                     help="seconds before the cue to include (default 0.5)")
    pre.add_argument("--task-end", type=float, default=None,
                     help="imagery end in seconds (default 6.0)")
    pre.add_argument("--amp-limit", type=float, default=100.0,
                     help="amplitude normalization limit in microvolts")
    pre.add_argument("--valid-frac", type=float, default=0.2)

    ev = p.add_argument_group("evaluator options")
    ev.add_argument("--planted-channels", default=None,
                    help="comma-separated channel indices for --evaluator planted")
    ev.add_argument("--planted-sigma", type=float, default=0.0)
    ev.add_argument("--workdir", default=None,
                    help="where external-evaluator splits are materialized")

    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering next to the report")


def _window_from(args: argparse.Namespace) -> WindowSpec | None:
    if args.cue_onset is None and args.pre_cue is None and args.task_end is None:
        return None
    return WindowSpec(
        cue_onset_s=args.cue_onset if args.cue_onset is not None else 2.0,
        pre_cue_s=args.pre_cue if args.pre_cue is not None else 0.5,
        task_end_s=args.task_end if args.task_end is not None else 6.0,
    )


def _int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _seed_grid(text: str) -> tuple[int, ...]:
    """Accepts '0:30' (half-open range) or '0,3,7'."""
    if ":" in text:
        lo, hi = text.split(":", 1)
        try:
            seeds = tuple(range(int(lo), int(hi)))
        except ValueError:
            raise ConfigError(f"--seeds range must be int:int, got {text!r}") from None
        if not seeds:
            raise ConfigError(f"--seeds range {text!r} is empty")
        return seeds
    return _int_list(text, "--seeds")


def _gamma_grid(text: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise ConfigError(f"--gamma-sweep expects comma-separated reals, got {text!r}") from None
    if not grid:
        raise ConfigError("--gamma-sweep grid is empty")
    return grid


def _config_from(args: argparse.Namespace) -> RunConfig:
    planted = None
    if args.planted_channels is not None:
        planted = _int_list(args.planted_channels, "--planted-channels")
    return RunConfig(
        data_path=args.data,
        k=args.k,
        mode=args.mode,
        evaluator_spec=args.evaluator,
        bias=args.bias,
        gamma=args.gamma,
        window=_window_from(args),
        amplitude_limit=args.amp_limit,
        valid_fraction=args.valid_frac,
        seed=args.seed,
        threads=args.threads,
        population_size=args.population_size,
        generations=args.generations,
        pairs_per_generation=args.pairs,
        crossover_prob=args.crossover_prob,
        mutation_prob=args.mutation_prob,
        survivor_selection=args.survivor_selection,
        tournament_size=args.tournament_size,
        hics_full_sweep=args.hics_full_sweep,
        weighted_init=not args.no_weighted_init,
        planted_channels=planted,
        planted_sigma=args.planted_sigma,
        workdir=args.workdir,
    )


def _status(line: str) -> None:
    # human-readable progress goes to stderr so stdout stays parseable
    # (`eegselect select ... | jq .` must see only the report)
    print(line, file=sys.stderr)


def _emit(report: dict, out: str | None, figures: bool) -> None:
    if out is None:
        sys.stdout.write(canonical_json(report))
        return
    emit_report(report, out)
    from .figures import write_artifacts

    written = write_artifacts(report, out, figures=figures)
    _status(f"report: {out}")
    for path in written:
        _status(f"artifact: {path}")


def _cmd_select(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    report = run_pipeline(cfg)
    sel = report["selected"]
    _status(f"selected channels: {','.join(str(c) for c in sel['channels'])}"
            f"  fitness {sel['fitness']:.4f}")
    _emit(report, args.out, figures=not args.no_figures)
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    seeds = _seed_grid(args.seeds)
    grid = _gamma_grid(args.gamma_sweep) if args.gamma_sweep else DEFAULT_GAMMA_GRID
    report = run_sweep(cfg, seeds, gamma_grid=grid)
    hist = report["histogram"]
    top = sorted(range(len(hist["counts"])), key=lambda c: -hist["counts"][c])[: cfg.k]
    _status(f"{len(seeds)} runs; most-picked channels: "
            + ",".join(str(c) for c in sorted(top)))
    _emit(report, args.out, figures=not args.no_figures)
    return EXIT_OK


def _cmd_apply(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    result = apply_report(report, args.data, threads=args.threads)
    sel = result["selected"]
    _status(f"applied channels: {','.join(str(c) for c in sel['channels'])}"
            f"  fitness {sel['fitness']:.4f}")
    if args.out:
        emit_report(result, args.out)
        _status(f"report: {args.out}")
    else:
        sys.stdout.write(canonical_json(result))
    return EXIT_OK


def _cmd_inspect(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    kind = report.get("kind", "?")
    print(f"kind: {kind}   schema v{report.get('schema_version')}")
    cfg = report.get("config", {})
    print(f"mode {cfg.get('mode')}  k {cfg.get('k')}  evaluator {cfg.get('evaluator_spec')}"
          f"  seed {cfg.get('seed')}  gamma {cfg.get('gamma')}")
    if kind == "run":
        ds = report.get("dataset", {})
        print(f"data: {ds.get('n_train')} train / {ds.get('n_valid')} valid trials, "
              f"{ds.get('n_channels')} channels, {ds.get('num_classes')} classes")
        sel = report.get("selected", {})
        print(f"selected: {sel.get('channels')}  fitness {sel.get('fitness')}")
        ev = report.get("evaluations", {})
        print(f"evaluations: {ev.get('fresh')} fresh, {ev.get('cached')} cached, "
              f"{ev.get('distinct')} distinct subsets")
        if report.get("tally"):
            print("tally:")
            for e in report["tally"]:
                chans = ",".join(str(c) for c in e["channels"])
                print(f"  [{chans}]  r={e['count']}  r/n={e['frequency']:.3f}  "
                      f"y={e['fitness']:.4f}  score={e['combined_score']:.4f}")
    elif kind == "sweep":
        print(f"seeds: {report.get('seeds')}")
        hist = report.get("histogram", {})
        print(f"histogram counts: {hist.get('counts')}")
    if args.artifacts:
        from .figures import write_artifacts

        for path in write_artifacts(report, args.report, figures=True):
            print(f"artifact: {path}")
    return EXIT_OK


def _cmd_plugin_check(args: argparse.Namespace) -> int:
    from .external import run_conformance

    command = args.command
    if command and command[0] == "--":
        command = command[1:]
    if not command:
        raise ConfigError("plugin-check needs the plugin command after --")
    with tempfile.TemporaryDirectory(prefix="eegselect-conformance-") as workdir:
        results = run_conformance(command, workdir)
    for name, detail in results:
        print(f"ok   {name}: {detail}")
    print(f"{len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eegselect",
        description="Greedy + genetic EEG channel subset selection",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_select = sub.add_parser("select", help="run the full selection pipeline")
    _run_flags(p_select)
    p_select.set_defaults(fn=_cmd_select)

    p_sweep = sub.add_parser("sweep", help="seed grid + gamma grid experiment")
    _run_flags(p_sweep)
    p_sweep.add_argument("--seeds", required=True,
                         help="seed grid: '0:30' (half-open) or '0,3,7'")
    p_sweep.add_argument("--gamma-sweep", default=None,
                         help="comma-separated gamma grid "
                              "(default 0,0.1,0.3,0.5,0.7,0.9,1)")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_apply = sub.add_parser("apply", help="apply a saved selection to new data")
    p_apply.add_argument("report", help="run report from `select`")
    p_apply.add_argument("data", help="dataset to apply the selection to")
    p_apply.add_argument("--threads", type=int, default=1)
    p_apply.add_argument("--out", default=None)
    p_apply.set_defaults(fn=_cmd_apply)

    p_inspect = sub.add_parser("inspect", help="pretty-print a report")
    p_inspect.add_argument("report")
    p_inspect.add_argument("--artifacts", action="store_true",
                           help="also (re)write CSV/PNG artifacts next to it")
    p_inspect.set_defaults(fn=_cmd_inspect)

    p_check = sub.add_parser(
        "plugin-check",
        help="conformance-test an external evaluator plugin",
    )
    p_check.add_argument("command", nargs=argparse.REMAINDER,
                         help="plugin command, after --")
    p_check.set_defaults(fn=_cmd_plugin_check)

    return parser


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageFailure):
        return _exit_code(exc.cause) if exc.cause is not None else EXIT_CONFIG
    if isinstance(exc, EvaluatorFailure):
        return EXIT_EVALUATOR
    if isinstance(exc, (IoFailure, DatasetFormatError, OSError)):
        return EXIT_IO
    if isinstance(
        exc,
        (ConfigError, AllTrialsRejected, TooFewTrials, WindowOutOfBounds, InvalidSubset),
    ):
        return EXIT_CONFIG
    return EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as e:  # noqa: BLE001 - single translation point to exit codes
        if isinstance(e, StageFailure):
            print(f"error [{e.stage}]: {e.cause}", file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
