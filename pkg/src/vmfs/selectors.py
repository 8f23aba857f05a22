"""Supervised feature selectors: CFS, RELIEF, chi-square and a 1-NN wrapper.

Every selector takes a labeled :class:`~vmfs.telemetry.LabeledDataset` and
returns a :class:`FeatureSubset`. Ties are always broken towards smaller
subsets and then lexicographically by feature id, so results are a pure
function of the data and the configuration.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from vmfs.errors import (
    DimensionError,
    DomainError,
    InsufficientClassError,
    LabelsRequiredError,
    ModeError,
)
from vmfs.telemetry import (
    LabeledDataset,
    equal_frequency_discretize,
    median_binarize,
    zscore_matrix,
)

CHI2_CRITICAL_1DOF = 3.841
CFS_BINS = 10
CFS_STALE_LIMIT = 5
WRAPPER_EXHAUSTIVE_MAX = 16


class Method(str, enum.Enum):
    CFS = "CFS"
    RELIEF = "RELIEF"
    CHI2 = "CHI2"
    WRAPPER = "WRAPPER"
    USQR = "USQR"


@dataclass(frozen=True)
class LogEntry:
    subset: tuple[str, ...]
    score: float
    note: str | None = None

    def to_dict(self) -> dict:
        d = {"subset": list(self.subset), "score": self.score}
        if self.note is not None:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> LogEntry:
        return cls(tuple(d["subset"]), float(d["score"]), d.get("note"))


@dataclass(frozen=True)
class FeatureSubset:
    selector: Method
    features: tuple[str, ...]
    scores: dict[str, float]
    search_log: tuple[LogEntry, ...] = ()
    # value of the search objective for ``features`` (merit, accuracy, ...)
    objective: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "selector", Method(self.selector))
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "search_log", tuple(self.search_log))
        if not self.features:
            raise ValueError("a feature subset must be non-empty")
        if len(set(self.features)) != len(self.features):
            raise ValueError("duplicate features in subset")

    @property
    def flagged(self) -> bool:
        return any(e.note for e in self.search_log)

    def to_dict(self) -> dict:
        return {
            "selector": self.selector.value,
            "features": list(self.features),
            "scores": {f: self.scores[f] for f in self.scores},
            "objective": self.objective,
            "log": [e.to_dict() for e in self.search_log],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> FeatureSubset:
        return cls(
            selector=d["selector"],
            features=tuple(d["features"]),
            scores={k: float(v) for k, v in d["scores"].items()},
            search_log=tuple(LogEntry.from_dict(e) for e in d.get("log", [])),
            objective=d.get("objective"),
        )


def _require_labels(ds: LabeledDataset) -> np.ndarray:
    if ds.labels is None:
        raise LabelsRequiredError("selector needs workload labels")
    return ds.label_codes()


def _subset_key(score: float, names: Sequence[str]) -> tuple:
    """Sort key: higher score first, then fewer features, then name order."""
    return (-score, len(names), tuple(sorted(names)))


# ---------------------------------------------------------------------------
# correlation measure


def _entropy(codes: np.ndarray) -> float:
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def symmetrical_uncertainty(x, y) -> float:
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise DimensionError("need at least 2 observations")
    hx, hy = _entropy(x), _entropy(y)
    if hx == 0.0 and hy == 0.0:
        return 1.0
    if hx == 0.0 or hy == 0.0:
        return 0.0
    _, joint = np.unique(np.stack([x, y], axis=1), axis=0, return_inverse=True)
    hxy = _entropy(joint.ravel())
    su = 2.0 * (hx + hy - hxy) / (hx + hy)
    return min(1.0, max(0.0, su))


@dataclass(frozen=True, eq=False)
class CorrelationCache:
    names: tuple[str, ...]
    feature_class: np.ndarray
    feature_feature: np.ndarray

    @classmethod
    def build(cls, names: Sequence[str], codes: np.ndarray, classes) -> CorrelationCache:
        p = codes.shape[1]
        fc = np.array([symmetrical_uncertainty(codes[:, j], classes) for j in range(p)])
        ff = np.eye(p)
        for i, j in itertools.combinations(range(p), 2):
            ff[i, j] = ff[j, i] = symmetrical_uncertainty(codes[:, i], codes[:, j])
        return cls(tuple(names), fc, ff)

    @classmethod
    def from_values(cls, feature_class: Mapping[str, float],
                    feature_feature: Mapping[tuple[str, str], float] = ()) -> CorrelationCache:
        names = tuple(feature_class)
        pos = {n: i for i, n in enumerate(names)}
        ff = np.eye(len(names))
        for (a, b), v in dict(feature_feature).items():
            ff[pos[a], pos[b]] = ff[pos[b], pos[a]] = v
        return cls(names, np.array([feature_class[n] for n in names], float), ff)

    def index(self, subset: Iterable) -> list[int]:
        out = set()
        for f in subset:
            out.add(f if isinstance(f, (int, np.integer)) else self.names.index(f))
        return sorted(int(i) for i in out)


def cfs_merit(subset, cache: CorrelationCache, denominator: str = "standard") -> float:
    """Heuristic merit of a feature subset.

    ``k * mean_rcf / sqrt(k + k(k-1) * mean_rff)``; ``denominator="paper"``
    swaps in ``k(k+1)``. For a single feature the feature-feature term is
    its self-correlation (1).
    """
    idx = cache.index(subset)
    k = len(idx)
    if k == 0:
        raise ValueError("empty subset")
    rcf = math.fsum(cache.feature_class[i] for i in idx) / k
    if k == 1:
        rff = float(cache.feature_feature[idx[0], idx[0]])
    else:
        pairs = [cache.feature_feature[i, j] for i, j in itertools.combinations(idx, 2)]
        rff = math.fsum(pairs) / len(pairs)
    if denominator == "standard":
        radicand = k + k * (k - 1) * rff
    elif denominator == "paper":
        radicand = k + k * (k + 1) * rff
    else:
        raise ValueError(f"unknown denominator mode {denominator!r}")
    if radicand <= 0:
        return 0.0
    return k * rcf / math.sqrt(radicand)


def cfs_cache(ds: LabeledDataset, bins: int = CFS_BINS) -> CorrelationCache:
    y = _require_labels(ds)
    disc = equal_frequency_discretize(ds, bins)
    return CorrelationCache.build(disc.names, disc.codes, y)


def cfs_best_first(cache: CorrelationCache, denominator: str = "standard",
                   stale_limit: int = CFS_STALE_LIMIT):
    """Forward best-first search from the empty set.

    Returns ``(best_indices, best_merit, log)``. Search stops after
    ``stale_limit`` consecutive expansions that do not raise the best merit.
    """
    names = cache.names
    p = len(names)
    best: tuple[int, ...] = ()
    best_merit = 0.0
    best_key = _subset_key(0.0, ())
    visited = {()}
    open_list = [(best_key, ())]
    log: list[LogEntry] = []
    stale = 0
    while open_list and stale < stale_limit:
        _, parent = heapq.heappop(open_list)
        improved = False
        for j in range(p):
            if j in parent:
                continue
            child = tuple(sorted(parent + (j,)))
            if child in visited:
                continue
            visited.add(child)
            merit = cfs_merit(child, cache, denominator)
            child_names = [names[i] for i in child]
            log.append(LogEntry(tuple(child_names), merit))
            key = _subset_key(merit, child_names)
            heapq.heappush(open_list, (key, child))
            if merit > best_merit:
                improved = True
            if key < best_key:
                best, best_merit, best_key = child, merit, key
        stale = 0 if improved else stale + 1
    return best, best_merit, log


def cfs_exhaustive(cache: CorrelationCache, denominator: str = "standard"):
    """Brute force over every non-empty subset; same tie-break as the search."""
    best_key, best = None, ()
    for r in range(1, len(cache.names) + 1):
        for combo in itertools.combinations(range(len(cache.names)), r):
            merit = cfs_merit(combo, cache, denominator)
            key = _subset_key(merit, [cache.names[i] for i in combo])
            if best_key is None or key < best_key:
                best_key, best = key, combo
    return best, -best_key[0]


def cfs_select(ds: LabeledDataset, bins: int = CFS_BINS,
               denominator: str = "standard") -> FeatureSubset:
    if ds.n_rows < 2:
        raise DimensionError("need at least 2 rows")
    cache = cfs_cache(ds, bins)
    best, merit, log = cfs_best_first(cache, denominator)
    if not best:
        j = min(range(len(cache.names)),
                key=lambda i: (-cache.feature_class[i], cache.names[i]))
        best = (j,)
        merit = cfs_merit(best, cache, denominator)
        log.append(LogEntry((cache.names[j],), merit,
                            note="fallback: no subset has positive merit"))
    feats = tuple(cache.names[i] for i in best)
    return FeatureSubset(
        selector=Method.CFS,
        features=feats,
        scores={cache.names[i]: float(cache.feature_class[i]) for i in best},
        search_log=tuple(log),
        objective=merit,
    )


# ---------------------------------------------------------------------------
# RELIEF


def _unit_scale(X: np.ndarray) -> np.ndarray:
    Z = zscore_matrix(X)
    lo, hi = Z.min(axis=0), Z.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (Z - lo) / span


def relief_weights(ds: LabeledDataset, m: int | str = "all", seed: int = 0,
                   chunk_elems: int = 4_000_000) -> dict[str, float]:
    """Relief weights with one near-hit and one near-miss per sampled row.

    Rows are put in a canonical (value-sorted) order first and nearest
    neighbor ties go to the earlier row in that order, which makes the
    full pass (``m="all"``) independent of the input row order.
    """
    y = _require_labels(ds)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise InsufficientClassError("RELIEF needs at least two classes")
    if counts.min() < 2:
        raise InsufficientClassError(
            "every class needs at least two instances for a near-hit"
        )
    order = np.lexsort(tuple(ds.X.T[::-1]) + (y,))
    X, y = _unit_scale(ds.X[order]), y[order]
    n, p = X.shape

    if m == "all":
        samples = np.arange(n)
    else:
        m = int(m)
        if m < 1:
            raise ValueError("m must be positive or 'all'")
        samples = np.sort(np.random.default_rng(seed).integers(0, n, size=m))
    total = np.zeros(p)
    step = max(1, chunk_elems // max(1, n * p))
    for start in range(0, len(samples), step):
        rows = samples[start:start + step]
        diff = np.abs(X[rows, None, :] - X[None, :, :])
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        dist[np.arange(len(rows)), rows] = np.inf
        same = y[rows, None] == y[None, :]
        hit = np.argmin(np.where(same, dist, np.inf), axis=1)
        miss = np.argmin(np.where(same, np.inf, dist), axis=1)
        r = np.arange(len(rows))
        total += (diff[r, miss] - diff[r, hit]).sum(axis=0)
    w = total / len(samples)
    return {fid: float(v) for fid, v in zip(ds.feature_ids, w)}


def _ranked(scores: Mapping[str, float]) -> list[str]:
    return sorted(scores, key=lambda f: (-scores[f], f))


def _threshold_subset(method: Method, scores: Mapping[str, float],
                      threshold: float | None, top_k: int | None,
                      log: list[LogEntry]) -> FeatureSubset:
    if not scores:
        raise ValueError("no scores")
    ranked = _ranked(scores)
    if top_k is not None:
        if top_k < 1:
            raise ValueError("top_k must be >= 1")
        chosen = ranked[:top_k]
    else:
        chosen = [f for f in ranked if scores[f] > threshold]
    if not chosen:
        chosen = ranked[:1]
        log.append(LogEntry(tuple(chosen), scores[chosen[0]],
                            note=f"fallback: no score above {threshold}"))
    return FeatureSubset(
        selector=method,
        features=tuple(chosen),
        scores={f: scores[f] for f in chosen},
        search_log=tuple(log),
    )


def relief_select(weights: Mapping[str, float], threshold: float = 0.0,
                  top_k: int | None = None) -> FeatureSubset:
    log = [LogEntry((f,), w) for f, w in sorted(weights.items())]
    return _threshold_subset(Method.RELIEF, weights, threshold, top_k, log)


# ---------------------------------------------------------------------------
# chi-square


def chi_square_stat(counts) -> float:
    """Pearson chi-square of a 2x2 table ``[[A, B], [C, D]]``.

    Rows are feature present / absent, columns class member / non-member.
    """
    table = np.asarray(counts, dtype=object).reshape(-1)
    if table.size != 4:
        raise DimensionError("expected a 2x2 table")
    vals = []
    for v in table:
        if isinstance(v, (int, np.integer)) or (isinstance(v, float) and v.is_integer()):
            v = int(v)
        else:
            v = float(v)
        if v < 0:
            raise DomainError("negative count")
        vals.append(v)
    a, b, c, d = vals
    n = a + b + c + d
    if n <= 0:
        raise DomainError("table total must be >= 1")
    den = (a + b) * (c + d) * (a + c) * (b + d)
    if den == 0:
        return 0.0
    return float(n * (a * d - b * c) ** 2 / den)


def chi_scores(ds: LabeledDataset) -> dict[str, float]:
    """Max over classes of the one-vs-rest chi-square of each binarized feature."""
    y = _require_labels(ds)
    classes = np.unique(y)
    out = {}
    for j, fid in enumerate(ds.feature_ids):
        t = median_binarize(ds.X[:, j])
        best = 0.0
        for c in classes:
            member = y == c
            table = [[int(np.sum(t & member)), int(np.sum(t & ~member))],
                     [int(np.sum(~t & member)), int(np.sum(~t & ~member))]]
            best = max(best, chi_square_stat(table))
        out[fid] = best
    return out


def chi_select(ds: LabeledDataset, critical: float = CHI2_CRITICAL_1DOF,
               top_k: int | None = None) -> FeatureSubset:
    scores = chi_scores(ds)
    return chi_select_scores(scores, critical, top_k)


def chi_select_scores(scores: Mapping[str, float], critical: float = CHI2_CRITICAL_1DOF,
                      top_k: int | None = None) -> FeatureSubset:
    log = [LogEntry((f,), s) for f, s in sorted(scores.items())]
    return _threshold_subset(Method.CHI2, scores, critical, top_k, log)


# ---------------------------------------------------------------------------
# wrapper


def _sq_diff(col: np.ndarray) -> np.ndarray:
    return (col[:, None] - col[None, :]) ** 2


def _loo_correct(dist: np.ndarray, y: np.ndarray) -> int:
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    nn = np.argmin(d, axis=1)
    return int(np.sum(y[nn] == y))


def loo_accuracy(ds: LabeledDataset, features: Iterable[str]) -> float:
    """Leave-one-out 1-NN accuracy on the z-scored ``features``."""
    y = _require_labels(ds)
    Z = zscore_matrix(ds.X)
    dist = np.zeros((ds.n_rows, ds.n_rows))
    for f in features:
        dist += _sq_diff(Z[:, ds.column_index(f)])
    return _loo_correct(dist, y) / ds.n_rows


def wrapper_select(ds: LabeledDataset, mode: str = "greedy") -> FeatureSubset:
    y = _require_labels(ds)
    if ds.n_rows < 2:
        raise DimensionError("need at least 2 rows")
    ids = ds.feature_ids
    Z = zscore_matrix(ds.X)
    n = ds.n_rows
    by_name = sorted(range(len(ids)), key=lambda j: ids[j])
    log: list[LogEntry] = []

    if mode == "exhaustive":
        if len(ids) > WRAPPER_EXHAUSTIVE_MAX:
            raise ModeError(
                f"exhaustive search over {len(ids)} features is too large "
                f"(limit {WRAPPER_EXHAUSTIVE_MAX}); use mode='greedy'"
            )
        sq = {j: _sq_diff(Z[:, j]) for j in by_name}
        best, best_correct, evaluated = None, -1, 0
        # sizes ascending, combinations in name order: first maximum wins
        for r in range(1, len(ids) + 1):
            for combo in itertools.combinations(by_name, r):
                dist = sum((sq[j] for j in combo[1:]), sq[combo[0]].copy())
                correct = _loo_correct(dist, y)
                evaluated += 1
                if correct > best_correct:
                    best, best_correct = combo, correct
                    log.append(LogEntry(tuple(ids[j] for j in combo), correct / n))
        log.append(LogEntry(tuple(ids[j] for j in best), best_correct / n,
                            note=f"exhaustive: {evaluated} subsets evaluated"))
        chosen = list(best)
        gains, acc_prev, dist = {}, 0.0, np.zeros((n, n))
        for j in chosen:
            dist += sq[j]
            acc = _loo_correct(dist, y) / n
            gains[ids[j]] = acc - acc_prev
            acc_prev = acc
        objective = best_correct / n
    elif mode == "greedy":
        chosen, gains = [], {}
        dist = np.zeros((n, n))
        current = 0
        remaining = list(by_name)
        while remaining:
            step_best, step_correct, step_dist = None, current, None
            for j in remaining:
                cand = dist + _sq_diff(Z[:, j])
                correct = _loo_correct(cand, y)
                log.append(LogEntry(tuple(ids[i] for i in chosen + [j]), correct / n))
                if correct > step_correct:
                    step_best, step_correct, step_dist = j, correct, cand
            if step_best is None:
                break
            gains[ids[step_best]] = (step_correct - current) / n
            chosen.append(step_best)
            remaining.remove(step_best)
            dist, current = step_dist, step_correct
        if not chosen:
            # no feature beats 0 correct: take the first by name
            j = by_name[0]
            chosen = [j]
            current = _loo_correct(_sq_diff(Z[:, j]), y)
            gains[ids[j]] = current / n
            log.append(LogEntry((ids[j],), current / n, note="fallback: no feature scores"))
        objective = current / n
    else:
        raise ModeError(f"unknown wrapper mode {mode!r}")

    feats = tuple(ids[j] for j in chosen)
    return FeatureSubset(
        selector=Method.WRAPPER,
        features=feats,
        scores={f: float(gains[f]) for f in feats},
        search_log=tuple(log),
        objective=float(objective),
    )
