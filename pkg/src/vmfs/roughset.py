"""Rough-set attribute dependency and Unsupervised Quick Reduct (USQR).

All functions work on a :class:`~vmfs.telemetry.DiscreteDataset`; attributes
are addressed by name. Dependency degrees are ratios of integers, so the
reduct search compares positive-region sizes as integers and never relies on
floating-point equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from vmfs.errors import DimensionError, UnknownAttributeError
from vmfs.selectors import FeatureSubset, LogEntry, Method
from vmfs.telemetry import DiscreteDataset, LabeledDataset, equal_frequency_discretize

USQR_BINS = 5


@dataclass(frozen=True)
class Partition:
    blocks: tuple[frozenset[int], ...]

    def __post_init__(self):
        seen: set[int] = set()
        for b in self.blocks:
            if not b:
                raise ValueError("empty block")
            if seen & b:
                raise ValueError("blocks overlap")
            seen |= b
        if seen != set(range(len(seen))):
            raise ValueError("blocks do not cover 0..n-1")

    @property
    def universe_size(self) -> int:
        return sum(len(b) for b in self.blocks)


@dataclass(frozen=True)
class DependencyScore:
    gamma: float
    positive_region_size: int
    universe_size: int


def _columns(ds: DiscreteDataset, attrs: Iterable[str]) -> list[int]:
    attrs = list(attrs)
    if not attrs:
        raise ValueError("attribute set is empty")
    idx = []
    for a in attrs:
        try:
            idx.append(ds.names.index(a))
        except ValueError:
            raise UnknownAttributeError(f"unknown attribute {a!r}") from None
    return sorted(set(idx))


def _block_ids(codes: np.ndarray, cols: Sequence[int]) -> np.ndarray:
    """Dense block id per object for the indiscernibility relation on ``cols``."""
    sub = codes[:, cols]
    _, inverse = np.unique(sub, axis=0, return_inverse=True)
    return inverse.ravel()


def indiscernibility_partition(ds: DiscreteDataset, attrs: Iterable[str]) -> Partition:
    ids = _block_ids(ds.codes, _columns(ds, attrs))
    blocks: dict[int, list[int]] = {}
    for obj, b in enumerate(ids):
        blocks.setdefault(int(b), []).append(obj)
    # dict preserves first-seen order == order of smallest member
    return Partition(tuple(frozenset(v) for v in blocks.values()))


def lower_approximation(p: Partition, x) -> frozenset[int]:
    x = set(x)
    out: set[int] = set()
    for b in p.blocks:
        if b <= x:
            out |= b
    return frozenset(out)


def upper_approximation(p: Partition, x) -> frozenset[int]:
    x = set(x)
    out: set[int] = set()
    for b in p.blocks:
        if b & x:
            out |= b
    return frozenset(out)


def positive_region(p: Partition, q: Partition) -> frozenset[int]:
    out: set[int] = set()
    for block in q.blocks:
        out |= lower_approximation(p, block)
    return frozenset(out)


def _pos_size(p_ids: np.ndarray, q_ids: np.ndarray) -> int:
    """Objects whose P-block lies inside a single Q-block."""
    n_p = int(p_ids.max()) + 1
    pairs = np.unique(p_ids.astype(np.int64) * (int(q_ids.max()) + 1) + q_ids)
    q_per_p = np.bincount(pairs // (int(q_ids.max()) + 1), minlength=n_p)
    pure = q_per_p == 1
    return int(np.sum(pure[p_ids]))


def dependency_degree(ds: DiscreteDataset, p_attrs, q_attrs) -> DependencyScore:
    p_ids = _block_ids(ds.codes, _columns(ds, p_attrs))
    q_ids = _block_ids(ds.codes, _columns(ds, q_attrs))
    pos = _pos_size(p_ids, q_ids)
    n = ds.n_rows
    return DependencyScore(pos / n, pos, n)


def _mean_pos_total(ds: DiscreteDataset, p_cols: Sequence[int],
                    single_ids: Sequence[np.ndarray]) -> int:
    p_ids = _block_ids(ds.codes, p_cols)
    return sum(_pos_size(p_ids, q) for q in single_ids)


def _single_ids(ds: DiscreteDataset) -> list[np.ndarray]:
    return [_block_ids(ds.codes, [j]) for j in range(len(ds.names))]


def mean_dependency(ds: DiscreteDataset, p_attrs) -> float:
    """Mean over every attribute ``a`` of the dependency of ``{a}`` on ``p_attrs``."""
    cols = _columns(ds, p_attrs)
    total = _mean_pos_total(ds, cols, _single_ids(ds))
    return total / (len(ds.names) * ds.n_rows)


def usqr_select(ds: DiscreteDataset) -> FeatureSubset:
    """Greedy unsupervised reduct.

    Starting from the empty set, repeatedly add the attribute that maximizes
    the mean dependency; stop once the full attribute set's mean dependency
    is reached or no single addition improves it.
    """
    if not ds.names:
        raise DimensionError("no attributes")
    if ds.n_rows < 2:
        raise DimensionError("need at least 2 rows")
    names = ds.names
    singles = _single_ids(ds)
    denom = len(names) * ds.n_rows
    target = _mean_pos_total(ds, list(range(len(names))), singles)
    by_name = sorted(range(len(names)), key=lambda j: names[j])

    chosen: list[int] = []
    current = 0
    gains: dict[str, float] = {}
    log: list[LogEntry] = []
    while current != target:
        best_j, best_total = None, current
        for j in by_name:
            if j in chosen:
                continue
            total = _mean_pos_total(ds, sorted(chosen + [j]), singles)
            log.append(LogEntry(tuple(names[i] for i in chosen + [j]), total / denom))
            if total > best_total:
                best_j, best_total = j, total
        if best_j is None:
            log.append(LogEntry(tuple(names[i] for i in chosen), current / denom,
                                note="plateau: no single attribute improves"))
            break
        gains[names[best_j]] = (best_total - current) / denom
        chosen.append(best_j)
        current = best_total
    feats = tuple(names[j] for j in chosen)
    return FeatureSubset(
        selector=Method.USQR,
        features=feats,
        scores={f: gains[f] for f in feats},
        search_log=tuple(log),
        objective=current / denom,
    )


def usqr_select_dataset(ds: LabeledDataset, bins: int = USQR_BINS) -> FeatureSubset:
    """Discretize a continuous dataset, then run :func:`usqr_select`. Labels are ignored."""
    return usqr_select(equal_frequency_discretize(ds, bins))
