"""Select features per resource, cluster VMs on each subset, rank the selectors."""

from __future__ import annotations

import enum
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from vmfs.clustering import ClusterAssignment, davies_bouldin, dunn_index, kmeans
from vmfs.errors import PipelineError, VmfsError
from vmfs.roughset import USQR_BINS, usqr_select_dataset
from vmfs.selectors import (
    CFS_BINS,
    CHI2_CRITICAL_1DOF,
    FeatureSubset,
    Method,
    cfs_select,
    chi_select,
    relief_select,
    relief_weights,
    wrapper_select,
)
from vmfs.telemetry import (
    LabeledDataset,
    Resource,
    filter_by_resource,
    qualified_id,
    zscore_matrix,
)


class Ranking(str, enum.Enum):
    STANDARD = "standard"
    PAPER_VI_B = "paper"


# Davies-Bouldin / Dunn per selector as printed in the original study's
# results table, plus the selector it declared best.
REFERENCE_SCORES: dict[str, tuple[float, float]] = {
    "CFS": (9.9122e4, 1.4196e-6),
    "RELIEF": (2.2679e0, 1.0874e-9),
    "CHI2": (2.9018e7, 2.442e-9),
    "WRAPPER": (2.1199e7, 1.0862e-9),
    "USQR": (3.9079e5, 4.9040e-6),
}
REFERENCE_DECLARED_WINNER = "CFS"

# CFS subsets per resource reported by the original study on its own
# (unpublished) data. Informational only: synthetic data will not reproduce
# them.
REFERENCE_CFS_SUBSETS: dict[Resource, tuple[str, ...]] = {
    Resource.CPU: ("%USED", "%IDLE", "MIG/s"),
    Resource.DISK: ("CMDS/s", "LAT/rd"),
    Resource.NETWORK: ("PKTRX/s", "MbRX/s"),
    Resource.MEMORY: ("SWCUR", "COWH", "OVHD", "GRANT", "SZTGT"),
    Resource.POWER: ("%USED",),
}


@dataclass(frozen=True)
class RunConfig:
    selectors: tuple[Method, ...] = tuple(Method)
    k: int = 4
    seed: int = 0
    resources: frozenset[Resource] | None = None
    ranking: Ranking = Ranking.STANDARD
    cfs_bins: int = CFS_BINS
    cfs_denominator: str = "standard"
    relief_m: int | str = "all"
    relief_threshold: float = 0.0
    relief_top_k: int | None = None
    chi_critical: float = CHI2_CRITICAL_1DOF
    chi_top_k: int | None = None
    wrapper_mode: str = "greedy"
    usqr_bins: int = USQR_BINS
    jobs: int = 1
    timings: bool = False

    def __post_init__(self):
        sel = tuple(dict.fromkeys(Method(s) for s in self.selectors))
        object.__setattr__(self, "selectors", sel)
        object.__setattr__(self, "ranking", Ranking(self.ranking))
        if self.resources is not None:
            object.__setattr__(self, "resources", frozenset(Resource(r) for r in self.resources))
        if not sel:
            raise ValueError("at least one selector is required")
        if self.k < 2:
            raise ValueError("k must be >= 2")

    def to_dict(self) -> dict:
        return {
            "selectors": [s.value for s in self.selectors],
            "k": self.k,
            "seed": self.seed,
            "resources": None if self.resources is None
            else sorted(r.value for r in self.resources),
            "ranking": self.ranking.value,
            "cfs_bins": self.cfs_bins,
            "cfs_denominator": self.cfs_denominator,
            "relief_m": self.relief_m,
            "relief_threshold": self.relief_threshold,
            "relief_top_k": self.relief_top_k,
            "chi_critical": self.chi_critical,
            "chi_top_k": self.chi_top_k,
            "wrapper_mode": self.wrapper_mode,
            "usqr_bins": self.usqr_bins,
        }


def select_features(ds: LabeledDataset, method: Method, cfg: RunConfig = RunConfig()) -> FeatureSubset:
    """Run one selector on ``ds`` as-is (no per-resource split)."""
    method = Method(method)
    if method is Method.CFS:
        return cfs_select(ds, bins=cfg.cfs_bins, denominator=cfg.cfs_denominator)
    if method is Method.RELIEF:
        w = relief_weights(ds, m=cfg.relief_m, seed=cfg.seed)
        return relief_select(w, threshold=cfg.relief_threshold, top_k=cfg.relief_top_k)
    if method is Method.CHI2:
        return chi_select(ds, critical=cfg.chi_critical, top_k=cfg.chi_top_k)
    if method is Method.WRAPPER:
        return wrapper_select(ds, mode=cfg.wrapper_mode)
    return usqr_select_dataset(ds, bins=cfg.usqr_bins)


def select_by_resource(ds: LabeledDataset, method: Method,
                       cfg: RunConfig = RunConfig()) -> dict[Resource, FeatureSubset]:
    """One selection per resource group present in ``ds``."""
    return {res: select_features(filter_by_resource(ds, {res}), method, cfg)
            for res in ds.resources}


def cluster_vms(ds: LabeledDataset, features: Sequence[str], k: int, seed: int = 0):
    """K-means on z-scored per-VM mean vectors restricted to ``features``.

    Returns ``(vm_names, points, assignment)``.
    """
    names, means, _ = ds.vm_means()
    idx = [ds.column_index(f) for f in features]
    points = zscore_matrix(means[:, idx])
    return names, points, kmeans(points, k, seed=seed)


@dataclass
class SelectorResult:
    selector: str
    features: list[str]
    db: float | None
    dunn: float | None
    ms: float | None = None
    error: str | None = None
    # not serialized
    assignment: ClusterAssignment | None = field(default=None, compare=False, repr=False)
    subsets: dict | None = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        d = {
            "selector": self.selector,
            "features": list(self.features),
            "db": self.db,
            "dunn": self.dunn,
            "ms": self.ms,
        }
        if self.error is not None:
            d["error"] = self.error
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> SelectorResult:
        return cls(d["selector"], list(d["features"]), d["db"], d["dunn"],
                   d.get("ms"), d.get("error"))


@dataclass
class ComparisonReport:
    config: dict
    dataset: dict
    results: list[SelectorResult]
    rank_db: list[str]
    rank_dunn: list[str]
    winner: str
    errata: list[str]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "dataset": self.dataset,
            "results": [r.to_dict() for r in self.results],
            "rank_db": list(self.rank_db),
            "rank_dunn": list(self.rank_dunn),
            "winner": self.winner,
            "errata": list(self.errata),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ComparisonReport:
        return cls(
            config=d["config"],
            dataset=d["dataset"],
            results=[SelectorResult.from_dict(r) for r in d["results"]],
            rank_db=list(d["rank_db"]),
            rank_dunn=list(d["rank_dunn"]),
            winner=d["winner"],
            errata=list(d["errata"]),
        )

    @classmethod
    def from_json(cls, text: str) -> ComparisonReport:
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RankResult:
    rank_db: list[str]
    rank_dunn: list[str]
    winner: str
    excluded: list[str]


def rank_selectors(scores: Mapping[str, tuple[float, float]], rule=Ranking.STANDARD) -> RankResult:
    """Order selectors by Davies-Bouldin and by Dunn and pick a winner.

    ``rank_db`` is ascending DB and ``rank_dunn`` descending Dunn regardless
    of the rule. The STANDARD winner has the lowest DB, Dunn (higher better)
    breaking DB ties; PAPER_VI_B inverts both directions. Remaining ties go
    to the selector name.
    """
    rule = Ranking(rule)
    finite, excluded = {}, []
    for name, (db, dunn) in scores.items():
        if db is None or dunn is None or not (math.isfinite(db) and math.isfinite(dunn)):
            excluded.append(name)
        else:
            finite[name] = (float(db), float(dunn))
    if not finite:
        raise PipelineError("no selector has finite validity scores")
    rank_db = sorted(finite, key=lambda s: (finite[s][0], s))
    rank_dunn = sorted(finite, key=lambda s: (-finite[s][1], s))
    if rule is Ranking.STANDARD:
        winner = min(finite, key=lambda s: (finite[s][0], -finite[s][1], s))
    else:
        winner = min(finite, key=lambda s: (-finite[s][0], finite[s][1], s))
    return RankResult(rank_db, rank_dunn, winner, sorted(excluded))


def reference_errata() -> list[str]:
    std = rank_selectors(REFERENCE_SCORES, Ranking.STANDARD).winner
    inv = rank_selectors(REFERENCE_SCORES, Ranking.PAPER_VI_B).winner
    notes = [
        "ranking rule 'paper' (maximum Davies-Bouldin, minimum Dunn) inverts the "
        "conventional direction of both indices: lower Davies-Bouldin and higher "
        "Dunn indicate better-separated clusters",
        f"reference score table: rule 'standard' selects {std}, rule 'paper' selects "
        f"{inv}; the declared best selector {REFERENCE_DECLARED_WINNER} follows from "
        "neither",
        "reference score table: RELIEF Davies-Bouldin is printed as 2.2679e+00, "
        "several orders of magnitude below the other selectors; quoted uncorrected",
    ]
    return notes


def _run_one(ds: LabeledDataset, method: Method, cfg: RunConfig) -> SelectorResult:
    t0 = time.perf_counter()
    features: list[str] = []
    subsets = None
    try:
        subsets = select_by_resource(ds, method, cfg)
        for res, sub in subsets.items():
            features.extend(qualified_id(_bare(f), res) for f in sub.features)
        _, points, assignment = cluster_vms(ds, features, cfg.k, cfg.seed)
        db = davies_bouldin(points, assignment)
        dunn = dunn_index(points, assignment)
        error = None
    except VmfsError as exc:
        assignment, db, dunn = None, None, None
        error = f"{type(exc).__name__}: {exc}"
    ms = (time.perf_counter() - t0) * 1000.0 if cfg.timings else None
    return SelectorResult(method.value, features, db, dunn, ms, error,
                          assignment=assignment, subsets=subsets)


def _bare(feature_id: str) -> str:
    # per-resource datasets never need qualified ids, but be tolerant
    head, sep, tail = feature_id.partition(":")
    return tail if sep and head in Resource.__members__ else feature_id


def run_comparison(ds: LabeledDataset, cfg: RunConfig = RunConfig()) -> ComparisonReport:
    if cfg.resources is not None:
        ds = filter_by_resource(ds, cfg.resources)
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(lambda m: _run_one(ds, m, cfg), cfg.selectors))
    else:
        results = [_run_one(ds, m, cfg) for m in cfg.selectors]
    if all(r.error for r in results):
        detail = "; ".join(f"{r.selector}: {r.error}" for r in results)
        raise PipelineError(f"every selector failed ({detail})")
    ranked = rank_selectors({r.selector: (r.db, r.dunn) for r in results}, cfg.ranking)
    errata = reference_errata()
    for name in ranked.excluded:
        errata.append(f"{name} excluded from ranking: no finite validity scores")
    return ComparisonReport(
        config=cfg.to_dict(),
        dataset=ds.fingerprint(),
        results=results,
        rank_db=ranked.rank_db,
        rank_dunn=ranked.rank_dunn,
        winner=ranked.winner,
        errata=errata,
    )


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4e}"


def render_report(report: ComparisonReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [
        "## Cluster validity per selector",
        "",
        "| Selector | Davies-Bouldin | Dunn |",
        "|---|---|---|",
    ]
    for r in report.results:
        lines.append(f"| {r.selector} | {_fmt(r.db)} | {_fmt(r.dunn)} |")
    lines += [
        "",
        f"Winner ({report.config.get('ranking', 'standard')} ranking): **{report.winner}**",
        "",
        "## Selected features per resource",
        "",
        "| Resource | " + " | ".join(r.selector for r in report.results) + " |",
        "|---|" + "---|" * len(report.results),
    ]
    for res in Resource:
        cells = []
        for r in report.results:
            picked = [f.split(":", 1)[1] for f in r.features if f.split(":", 1)[0] == res.value]
            cells.append(", ".join(picked) if picked else "-")
        if any(c != "-" for c in cells):
            lines.append(f"| {res.value} | " + " | ".join(cells) + " |")
    failed = [r for r in report.results if r.error]
    if failed:
        lines += ["", "## Failures", ""]
        lines += [f"- {r.selector}: {r.error}" for r in failed]
    lines += ["", "## Errata", ""]
    lines += [f"- {e}" for e in report.errata]
    return "\n".join(lines) + "\n"
