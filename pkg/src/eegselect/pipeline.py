"""End-to-end run orchestration: load, preprocess, greedy seed search,
weight formation, genetic refinement, final selection, final evaluation,
and the run report.

Modes:
  combined    greedy search to K-1 channels, weights biased toward them,
              genetic search over K-subsets, tally-based final choice
  hics-only   greedy search straight to K channels; no genetic stage
  dgaff-only  genetic search from a uniform initial population; no greedy
              stage (the ablation baseline)

Every evaluator call of a run flows through one shared cache, so a subset
revisited by any stage warm-starts instead of retraining. Reports are
canonical JSON (sorted keys); everything nondeterministic lives under the
"timings" key so two runs with the same config and seed are byte-identical
once that key is dropped.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import ConfigError, EmptyTally, IoFailure, StageFailure
from .evaluator import (
    EvalContext,
    Evaluator,
    LinearProbeEvaluator,
    PlantedEvaluator,
    SubsetCache,
    evaluate,
)
from .finalpick import SelectionTally, select_final, tally_unique
from .ga import GaConfig, GaStats, Population, run_dgaff
from .hics import HicsConfig, HicsTrace, run_hics
from .preprocess import (
    WindowSpec,
    normalize_amplitude,
    reject_artifacts,
    split_train_valid,
    window_trials,
)
from .subsets import ChannelSubset
from .tensorio import Dataset, load_dataset, save_dataset
from .weights import WeightVector, build_weights, uniform_weights

SCHEMA_VERSION = 1
MODES = ("combined", "hics-only", "dgaff-only")
DEFAULT_GAMMA_GRID = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)


@dataclass(frozen=True)
class RunConfig:
    data_path: str
    k: int
    mode: str = "combined"
    evaluator_spec: str = "linear"
    bias: float = 2.0
    gamma: float = 0.3
    window: WindowSpec | None = None
    amplitude_limit: float = 100.0
    valid_fraction: float = 0.2
    seed: int = 0
    threads: int = 1
    population_size: int = 12
    generations: int = 12
    pairs_per_generation: int | None = None
    crossover_prob: float = 0.85
    mutation_prob: float = 0.08
    survivor_selection: str = "rank"
    tournament_size: int = 2
    hics_full_sweep: bool = False
    weighted_init: bool = True
    planted_channels: tuple[int, ...] | None = None
    planted_sigma: float = 0.0
    workdir: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.mode == "dgaff-only" and not self.weighted_init:
            # harmless but meaningless: dgaff-only is already uniform
            object.__setattr__(self, "weighted_init", True)

    def ga_config(self, universe_size: int) -> GaConfig:
        return GaConfig(
            k_target=self.k,
            universe_size=universe_size,
            population_size=self.population_size,
            generations=self.generations,
            pairs_per_generation=self.pairs_per_generation,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob,
            survivor_selection=self.survivor_selection,
            tournament_size=self.tournament_size,
            seed=self.seed,
        )


def make_evaluator(cfg: RunConfig, universe_size: int) -> Evaluator:
    spec = cfg.evaluator_spec
    if spec == "planted":
        if cfg.planted_channels is None:
            raise ConfigError(
                "the planted evaluator needs --planted-channels (comma-separated indices)"
            )
        return PlantedEvaluator(
            ChannelSubset(cfg.planted_channels, universe_size),
            noise_sigma=cfg.planted_sigma,
            seed=cfg.seed,
        )
    if spec == "linear":
        return LinearProbeEvaluator()
    if spec.startswith("external:"):
        from .external import ExternalEvaluator

        command = spec[len("external:") :]
        if not command.strip():
            raise ConfigError("external evaluator command is empty")
        return ExternalEvaluator(command, pool_size=cfg.threads)
    raise ConfigError(
        f"unknown evaluator {spec!r}; expected planted, linear, or external:<command>"
    )


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except StageFailure:
        raise
    except Exception as e:
        raise StageFailure(name, e) from e
    finally:
        timings[name] = round(time.perf_counter() - start, 6)


def _preprocess(data: Dataset, cfg: RunConfig) -> tuple[Dataset, Dataset, dict]:
    total = data.n_trials
    clean = reject_artifacts(data)
    if cfg.window is not None:
        clean = window_trials(clean, cfg.window)
    clean = normalize_amplitude(clean, cfg.amplitude_limit)
    train, valid = split_train_valid(clean, cfg.valid_fraction, cfg.seed)
    stats = {
        "n_trials_total": total,
        "n_rejected": total - clean.n_trials,
        "n_train": train.n_trials,
        "n_valid": valid.n_trials,
        "n_channels": clean.n_channels,
        "n_samples": clean.n_samples,
        "sample_rate_hz": clean.sample_rate_hz,
        "num_classes": clean.num_classes,
    }
    return train, valid, stats


def _materialize_splits(
    train: Dataset, valid: Dataset, cfg: RunConfig
) -> tuple[str, str]:
    """External evaluators read the splits from disk; write them once."""
    base = cfg.workdir or os.path.dirname(os.path.abspath(cfg.data_path)) or "."
    os.makedirs(base, exist_ok=True)
    train_path = os.path.join(base, f"split-train-seed{cfg.seed}.sft")
    valid_path = os.path.join(base, f"split-valid-seed{cfg.seed}.sft")
    save_dataset(train, train_path)
    save_dataset(valid, valid_path)
    return train_path, valid_path


def _config_dict(cfg: RunConfig) -> dict:
    out = dataclasses.asdict(cfg)
    if cfg.window is not None:
        out["window"] = dataclasses.asdict(cfg.window)
    if cfg.planted_channels is not None:
        out["planted_channels"] = list(cfg.planted_channels)
    # worker count and scratch location cannot influence results, only how
    # fast they arrive; they live with the timings so reports from runs that
    # differ only in parallelism stay byte-identical outside that key
    del out["threads"], out["workdir"]
    return out


def _trace_dict(trace: HicsTrace, selected: ChannelSubset, fitness: float) -> dict:
    return {
        "levels": [
            {
                "level": lvl.level,
                "candidates": [[ch, score] for ch, score in lvl.candidates],
                "chosen": lvl.chosen,
                "chosen_fitness": lvl.chosen_fitness,
            }
            for lvl in trace.levels
        ],
        "selected": list(selected.members),
        "selected_fitness": fitness,
    }


def _ga_dict(population: Population, stats: GaStats) -> dict:
    return {
        "generations": [dataclasses.asdict(rec) | {"best_subset": list(rec.best_subset)}
                        for rec in stats.records],
        "final_population": [
            {"channels": list(ind.members), "fitness": score}
            for ind, score in zip(population.individuals, population.fitness)
        ],
    }


def _tally_dict(tally: SelectionTally, gamma: float) -> list[dict]:
    return [
        {
            "channels": list(e.subset.members),
            "count": e.count,
            "frequency": e.frequency,
            "fitness": e.fitness,
            "combined_score": e.combined_score(gamma),
        }
        for e in tally.entries
    ]


def _histogram(subsets: list[ChannelSubset], universe_size: int, k: int) -> dict:
    counts = [0] * universe_size
    for s in subsets:
        for ch in s.members:
            counts[ch] += 1
    if all(len(s) == k for s in subsets):
        assert sum(counts) == len(subsets) * k
    return {"counts": counts, "runs": len(subsets), "k": k}


def run_pipeline(cfg: RunConfig, gamma_grid: tuple[float, ...] | None = None) -> dict:
    """Execute one selection run and return the report as a plain dict."""
    timings: dict = {
        "started_at": datetime.now(timezone.utc).isoformat(),
        "threads": cfg.threads,
        "workdir": cfg.workdir,
    }
    t_total = time.perf_counter()

    with _stage("load", timings):
        data = load_dataset(cfg.data_path)
        if not 1 <= cfg.k <= data.n_channels:
            raise ConfigError(
                f"k={cfg.k} out of range for {data.n_channels}-channel data"
            )

    with _stage("preprocess", timings):
        train, valid, data_stats = _preprocess(data, cfg)

    cache = SubsetCache()
    evaluator: Evaluator | None = None
    try:
        with _stage("evaluator", timings):
            evaluator = make_evaluator(cfg, train.n_channels)
            train_path = valid_path = None
            if cfg.evaluator_spec.startswith("external:"):
                train_path, valid_path = _materialize_splits(train, valid, cfg)
            ctx = EvalContext(
                train, valid, data_stats["num_classes"], train_path, valid_path
            )

        report: dict = {
            "schema_version": SCHEMA_VERSION,
            "kind": "run",
            "config": _config_dict(cfg),
            "dataset": data_stats,
            "hics": None,
            "weights": None,
            "ga": None,
            "tally": None,
            "gamma_selections": None,
        }

        universe = train.n_channels
        weights: WeightVector | None = None
        tally: SelectionTally | None = None

        if cfg.mode in ("combined", "hics-only"):
            with _stage("hics", timings):
                hics_cfg = HicsConfig(cfg.k, universe, full_sweep=cfg.hics_full_sweep)
                levels = cfg.k if cfg.mode == "hics-only" and not cfg.hics_full_sweep else None
                greedy, trace = run_hics(
                    hics_cfg, evaluator, ctx, cache, threads=cfg.threads, n_levels=levels
                )
                greedy_fit = cache.latest(greedy).score if len(greedy) else 0.0
                report["hics"] = _trace_dict(trace, greedy, greedy_fit)

        if cfg.mode == "combined":
            with _stage("weights", timings):
                if cfg.weighted_init:
                    weights = build_weights(greedy, universe, cfg.bias)
                else:
                    weights = uniform_weights(universe)
                report["weights"] = list(weights.weights)
        elif cfg.mode == "dgaff-only":
            weights = uniform_weights(universe)
            report["weights"] = list(weights.weights)

        if cfg.mode in ("combined", "dgaff-only"):
            with _stage("ga", timings):
                population, ga_stats = run_dgaff(
                    cfg.ga_config(universe), weights, evaluator, ctx, cache,
                    threads=cfg.threads,
                )
                report["ga"] = _ga_dict(population, ga_stats)

            with _stage("select", timings):
                tally = tally_unique(population)
                report["tally"] = _tally_dict(tally, cfg.gamma)
                try:
                    winner = select_final(tally, cfg.gamma, required_size=cfg.k)
                    selected = winner.subset
                except EmptyTally:
                    # the last generation can in principle carry no valid-size
                    # individual at all; the cache still knows the best one seen
                    fallback = cache.best(size=cfg.k)
                    if fallback is None:
                        raise
                    selected = fallback[0]
                if gamma_grid:
                    report["gamma_selections"] = _gamma_selections(
                        tally, gamma_grid, cfg.k, cache
                    )
        else:
            selected = greedy

        with _stage("final-eval", timings):
            final = evaluate(evaluator, selected, ctx, cache)

        names = data.channel_names
        report["selected"] = {
            "channels": list(selected.members),
            "channel_names": [names[i] for i in selected.members] if names else None,
            "fitness": final.score,
            "state_key": final.state_key,
            "fresh": final.fresh,
        }
        report["histogram"] = _histogram([selected], universe, cfg.k)
        report["evaluations"] = {
            "fresh": cache.fresh_evaluations,
            "cached": cache.cached_requests,
            "total": cache.total_requests,
            "distinct": cache.distinct_subsets,
        }
    finally:
        if evaluator is not None:
            evaluator.close()

    timings["total_s"] = round(time.perf_counter() - t_total, 6)
    report["timings"] = timings
    return report


def _gamma_selections(
    tally: SelectionTally,
    grid: tuple[float, ...],
    k: int,
    cache: SubsetCache,
) -> list[dict]:
    out = []
    for g in grid:
        try:
            entry = select_final(tally, g, required_size=k)
            out.append(
                {
                    "gamma": g,
                    "channels": list(entry.subset.members),
                    "combined_score": entry.combined_score(g),
                    "fitness": entry.fitness,
                }
            )
        except EmptyTally:
            best = cache.best(size=k)
            out.append(
                {
                    "gamma": g,
                    "channels": list(best[0].members) if best else [],
                    "combined_score": None,
                    "fitness": best[1].score if best else None,
                }
            )
    return out


def run_sweep(
    cfg: RunConfig,
    seeds: tuple[int, ...],
    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID,
) -> dict:
    """Repeat the pipeline over a seed grid, re-picking the final subset at
    every gamma in the grid; aggregates the channel histogram across seeds."""
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    timings: dict = {
        "started_at": datetime.now(timezone.utc).isoformat(),
        "threads": cfg.threads,
        "workdir": cfg.workdir,
    }
    t_total = time.perf_counter()
    runs = []
    picks: list[ChannelSubset] = []
    totals = {"fresh": 0, "cached": 0, "total": 0, "distinct": 0}
    universe = None
    for seed in seeds:
        sub_cfg = dataclasses.replace(cfg, seed=seed)
        rep = run_pipeline(sub_cfg, gamma_grid=gamma_grid)
        universe = len(rep["histogram"]["counts"])
        picks.append(ChannelSubset(rep["selected"]["channels"], universe))
        for key in totals:
            totals[key] += rep["evaluations"][key]
        summary = {
            "seed": seed,
            "selected": rep["selected"],
            "gamma_selections": rep["gamma_selections"],
            "generations": [
                {
                    "index": g["index"],
                    "best_fitness": g["best_fitness"],
                    "mean_fitness": g["mean_fitness"],
                    "cache_best_fitness": g["cache_best_fitness"],
                }
                for g in (rep["ga"]["generations"] if rep["ga"] else [])
            ],
        }
        runs.append(summary)
        timings[f"seed-{seed}_s"] = rep["timings"]["total_s"]
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": "sweep",
        "config": _config_dict(cfg),
        "seeds": list(seeds),
        "gamma_grid": list(gamma_grid),
        "runs": runs,
        "histogram": _histogram(picks, universe, cfg.k),
        "evaluations": totals,
    }
    timings["total_s"] = round(time.perf_counter() - t_total, 6)
    report["timings"] = timings
    return report


def apply_report(report: dict, data_path: str, threads: int = 1) -> dict:
    """Application phase: take a saved run's selected channels to a new
    recording and evaluate them once. No search happens here."""
    if report.get("kind") != "run":
        raise ConfigError(f"apply needs a run report, got kind={report.get('kind')!r}")
    conf = report["config"]
    window = WindowSpec(**conf["window"]) if conf.get("window") else None
    cfg = RunConfig(
        data_path=data_path,
        k=conf["k"],
        mode=conf["mode"],
        evaluator_spec=conf["evaluator_spec"],
        bias=conf["bias"],
        gamma=conf["gamma"],
        window=window,
        amplitude_limit=conf["amplitude_limit"],
        valid_fraction=conf["valid_fraction"],
        seed=conf["seed"],
        threads=threads,
        planted_channels=tuple(conf["planted_channels"]) if conf.get("planted_channels") else None,
        planted_sigma=conf.get("planted_sigma", 0.0),
        workdir=conf.get("workdir"),
    )
    timings: dict = {
        "started_at": datetime.now(timezone.utc).isoformat(),
        "threads": cfg.threads,
        "workdir": cfg.workdir,
    }
    t_total = time.perf_counter()
    with _stage("load", timings):
        data = load_dataset(cfg.data_path)
    with _stage("preprocess", timings):
        train, valid, data_stats = _preprocess(data, cfg)
    subset = ChannelSubset(report["selected"]["channels"], train.n_channels)
    cache = SubsetCache()
    evaluator = None
    try:
        with _stage("evaluator", timings):
            evaluator = make_evaluator(cfg, train.n_channels)
            train_path = valid_path = None
            if cfg.evaluator_spec.startswith("external:"):
                train_path, valid_path = _materialize_splits(train, valid, cfg)
            ctx = EvalContext(
                train, valid, data_stats["num_classes"], train_path, valid_path
            )
        with _stage("final-eval", timings):
            record = evaluate(evaluator, subset, ctx, cache)
    finally:
        if evaluator is not None:
            evaluator.close()
    timings["total_s"] = round(time.perf_counter() - t_total, 6)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "apply",
        "config": _config_dict(cfg),
        "dataset": data_stats,
        "selected": {
            "channels": list(subset.members),
            "fitness": record.score,
            "state_key": record.state_key,
            "fresh": record.fresh,
        },
        "timings": timings,
    }


def canonical_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(report: dict, path: str) -> None:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(canonical_json(report))
    except OSError as e:
        raise IoFailure(f"cannot write report {path}: {e}") from e


def load_report(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise IoFailure(f"cannot read report {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise IoFailure(f"report {path} is not valid JSON: {e}") from e
