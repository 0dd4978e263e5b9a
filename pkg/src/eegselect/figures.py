"""Report artifacts: delimited summaries and rendered figures.

Given a report dict and the path its JSON lives at, writes CSV siblings
(tally, per-generation curves, channel histogram, greedy trace) and, when
asked, PNG figures of the same tables. Matplotlib loads lazily and only
with the Agg backend, so headless runs and --no-figures stay cheap.
"""

from __future__ import annotations

import csv
import os

from .errors import IoFailure


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _stem(report_path: str) -> str:
    root, _ = os.path.splitext(report_path)
    return root


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def write_artifacts(report: dict, report_path: str, figures: bool = True) -> list[str]:
    """Write all applicable artifacts next to the report; returns the paths."""
    stem = _stem(report_path)
    written: list[str] = []

    hist = report.get("histogram")
    if hist:
        path = f"{stem}.histogram.csv"
        _write_csv(
            path,
            ["channel", "count", "share"],
            [
                [ch, c, c / hist["runs"] if hist["runs"] else 0.0]
                for ch, c in enumerate(hist["counts"])
            ],
        )
        written.append(path)
        if figures:
            written.append(_histogram_png(hist, f"{stem}.histogram.png"))

    tally = report.get("tally")
    if tally:
        path = f"{stem}.tally.csv"
        _write_csv(
            path,
            ["channels", "count", "frequency", "fitness", "combined_score"],
            [
                [
                    " ".join(str(c) for c in e["channels"]),
                    e["count"],
                    e["frequency"],
                    e["fitness"],
                    e["combined_score"],
                ]
                for e in tally
            ],
        )
        written.append(path)
        if figures:
            written.append(_tally_png(tally, f"{stem}.tally.png"))

    ga = report.get("ga")
    gens = ga["generations"] if ga else None
    if gens:
        path = f"{stem}.generations.csv"
        _write_csv(
            path,
            ["generation", "best_fitness", "mean_fitness", "cache_best_fitness",
             "children_best", "children_mean"],
            [
                [g["index"], g["best_fitness"], g["mean_fitness"],
                 g["cache_best_fitness"], g["children_best"], g["children_mean"]]
                for g in gens
            ],
        )
        written.append(path)
        if figures:
            written.append(_generations_png(gens, f"{stem}.generations.png"))

    hics = report.get("hics")
    if hics and hics["levels"]:
        path = f"{stem}.hics.csv"
        _write_csv(
            path,
            ["level", "chosen", "chosen_fitness", "n_candidates"],
            [
                [lvl["level"], lvl["chosen"], lvl["chosen_fitness"], len(lvl["candidates"])]
                for lvl in hics["levels"]
            ],
        )
        written.append(path)
        if figures:
            written.append(_hics_png(hics["levels"], f"{stem}.hics.png"))

    if report.get("kind") == "sweep" and report.get("runs") and figures:
        written.append(_convergence_png(report["runs"], f"{stem}.convergence.png"))

    return written


def _histogram_png(hist: dict, path: str) -> str:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(max(6, len(hist["counts"]) * 0.35), 3.2))
    ax.bar(range(len(hist["counts"])), hist["counts"], color="#3b6ea5")
    ax.set_xlabel("channel")
    ax.set_ylabel(f"picks over {hist['runs']} run(s)")
    ax.set_title("Selected-channel histogram")
    ax.set_xticks(range(len(hist["counts"])))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _tally_png(tally: list[dict], path: str) -> str:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    freq = [e["frequency"] for e in tally]
    fit = [e["fitness"] for e in tally]
    score = [e["combined_score"] for e in tally]
    sc = ax.scatter(freq, fit, c=score, cmap="viridis", s=48)
    fig.colorbar(sc, ax=ax, label="combined score")
    ax.set_xlabel("repetition frequency")
    ax.set_ylabel("fitness")
    ax.set_title("Final-generation tally")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _generations_png(gens: list[dict], path: str) -> str:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    x = [g["index"] for g in gens]
    ax.plot(x, [g["best_fitness"] for g in gens], marker="o", label="population best")
    ax.plot(x, [g["mean_fitness"] for g in gens], marker=".", label="population mean")
    ax.plot(x, [g["cache_best_fitness"] for g in gens], linestyle="--",
            label="best seen (cache)")
    ax.set_xlabel("generation")
    ax.set_ylabel("fitness")
    ax.set_title("Genetic-stage convergence")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _hics_png(levels: list[dict], path: str) -> str:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    x = [lvl["level"] for lvl in levels]
    ax.plot(x, [lvl["chosen_fitness"] for lvl in levels], marker="o", color="#a1553a")
    for lvl in levels:
        ax.annotate(str(lvl["chosen"]), (lvl["level"], lvl["chosen_fitness"]),
                    textcoords="offset points", xytext=(0, 6), fontsize=8, ha="center")
    ax.set_xlabel("subset size after commit")
    ax.set_ylabel("fitness of committed subset")
    ax.set_title("Greedy forward search")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _convergence_png(runs: list[dict], path: str) -> str:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.6, 3.4))
    for run in runs:
        gens = run.get("generations") or []
        if not gens:
            continue
        ax.plot(
            [g["index"] for g in gens],
            [g["cache_best_fitness"] for g in gens],
            alpha=0.45,
            linewidth=1.0,
        )
    ax.set_xlabel("generation")
    ax.set_ylabel("best fitness seen")
    ax.set_title(f"Convergence across {len(runs)} seeds")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
