import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from vmfs.errors import UnknownAttributeError
from vmfs.roughset import (
    Partition,
    dependency_degree,
    indiscernibility_partition,
    lower_approximation,
    mean_dependency,
    positive_region,
    upper_approximation,
    usqr_select,
    usqr_select_dataset,
)
from vmfs.telemetry import DiscreteDataset, LabeledDataset

ABC = DiscreteDataset.from_columns({"a": [0, 0, 1, 1], "b": [0, 1, 0, 1], "c": [0, 0, 1, 1]})


def blocks(p):
    return [set(b) for b in p.blocks]


class TestPartition:
    def test_binary(self):
        assert blocks(indiscernibility_partition(ABC, ["a"])) == [{0, 1}, {2, 3}]

    def test_distinct_rows(self):
        p = indiscernibility_partition(ABC, ["a", "b", "c"])
        assert blocks(p) == [{0}, {1}, {2}, {3}]

    def test_two_attrs(self):
        assert len(indiscernibility_partition(ABC, ["a", "b"]).blocks) == 4

    def test_block_order_by_smallest_member(self):
        ds = DiscreteDataset.from_columns({"x": [2, 0, 2, 1, 0]})
        assert blocks(indiscernibility_partition(ds, ["x"])) == [{0, 2}, {1, 4}, {3}]

    def test_unknown_attribute(self):
        with pytest.raises(UnknownAttributeError):
            indiscernibility_partition(ABC, ["zz"])
        with pytest.raises(AttributeError):
            dependency_degree(ABC, ["a"], ["zz"])

    def test_invalid_partitions(self):
        with pytest.raises(ValueError):
            Partition((frozenset({0, 1}), frozenset({1, 2})))
        with pytest.raises(ValueError):
            Partition((frozenset({0}), frozenset({2})))


P = Partition((frozenset({0, 1}), frozenset({2, 3})))


class TestApproximations:
    def test_universe(self):
        assert lower_approximation(P, {0, 1, 2, 3}) == {0, 1, 2, 3}

    def test_empty(self):
        assert lower_approximation(P, set()) == set()
        assert upper_approximation(P, set()) == set()

    def test_partial(self):
        assert lower_approximation(P, {0, 1, 2}) == {0, 1}
        assert upper_approximation(P, {0, 1, 2}) == {0, 1, 2, 3}

    def test_definable(self):
        assert lower_approximation(P, {2, 3}) == upper_approximation(P, {2, 3}) == {2, 3}

    def test_positive_region(self):
        q = indiscernibility_partition(ABC, ["b"])
        assert positive_region(P, q) == set()


class TestDependency:
    def test_self(self):
        assert dependency_degree(ABC, ["a"], ["a"]).gamma == 1.0

    def test_none(self):
        s = dependency_degree(ABC, ["a"], ["b"])
        assert s.gamma == 0.0 and s.positive_region_size == 0 and s.universe_size == 4

    def test_full_attrs(self):
        assert dependency_degree(ABC, ["a", "b", "c"], ["b"]).gamma == 1.0

    def test_mean_examples(self):
        assert mean_dependency(ABC, ["a", "b", "c"]) == 1.0
        assert mean_dependency(ABC, ["a"]) == pytest.approx(2 / 3)
        assert mean_dependency(ABC, ["b"]) == pytest.approx(1 / 3)


def random_discrete(seed, max_attrs=8, max_rows=32, max_card=3):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(1, max_attrs + 1))
    n = int(rng.integers(2, max_rows + 1))
    card = rng.integers(1, max_card + 1, p)
    return DiscreteDataset.from_columns(
        {f"x{j}": rng.integers(0, card[j], n) for j in range(p)})


def rows_of(ds):
    return [dict(zip(ds.names, r)) for r in ds.codes.tolist()]


@pytest.mark.parametrize("seed", range(25))
def test_gamma_matches_oracle(seed):
    ds = random_discrete(seed, max_attrs=5, max_rows=20)
    rows = rows_of(ds)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        p = list(rng.choice(ds.names, size=rng.integers(1, len(ds.names) + 1), replace=False))
        q = list(rng.choice(ds.names, size=rng.integers(1, len(ds.names) + 1), replace=False))
        assert dependency_degree(ds, p, q).gamma == float(oracles.gamma(rows, p, q))


class TestUsqr:
    def test_worked_example(self):
        sub = usqr_select(ABC)
        assert sub.features == ("a", "b")
        assert sub.scores["a"] == pytest.approx(2 / 3)
        assert sub.scores["b"] == pytest.approx(1 / 3)

    def test_worked_example_brute_force(self):
        rows = rows_of(ABC)
        full = [s for r in (1, 2) for s in itertools.combinations("abc", r)
                if oracles.mean_dep(rows, s, "abc") == 1]
        assert set(full) == {("a", "b"), ("b", "c")}

    def test_single_attribute(self):
        ds = DiscreteDataset.from_columns({"only": [0, 1, 1, 2]})
        assert usqr_select(ds).features == ("only",)

    def test_constant_attribute_never_added(self):
        ds = DiscreteDataset.from_columns({"a": [0, 1, 2, 3], "z": [4, 4, 4, 4]})
        assert usqr_select(ds).features == ("a",)

    @pytest.mark.parametrize("seed", range(20))
    def test_reaches_full_dependency(self, seed):
        ds = random_discrete(seed)
        sub = usqr_select(ds)
        assert sub.objective == mean_dependency(ds, ds.names)
        rows = rows_of(ds)
        assert oracles.mean_dep(rows, sub.features, ds.names) == \
            oracles.best_mean_dep_up_to(rows, ds.names, len(sub.features))

    def test_labels_ignored(self):
        rng = np.random.default_rng(1)
        cols = {"a": rng.normal(size=30), "b": rng.normal(size=30)}
        ds = LabeledDataset.from_arrays(cols)
        sub = usqr_select_dataset(ds)
        assert sub.selector.value == "USQR"


def test_full_set_mean_dependency_is_one():
    # every attribute is determined by a set containing it, duplicates or not
    for seed in range(40):
        ds = random_discrete(seed, max_rows=10, max_card=2)
        assert mean_dependency(ds, ds.names) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=20), st.data())
def test_lower_subset_upper(codes, data):
    ds = DiscreteDataset.from_columns({"a": codes})
    p = indiscernibility_partition(ds, ["a"])
    x = data.draw(st.sets(st.integers(0, len(codes) - 1)))
    assert lower_approximation(p, x) <= x <= upper_approximation(p, x)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_refinement_monotone(seed):
    ds = random_discrete(seed, max_attrs=5)
    names = list(ds.names)
    q = [names[-1]]
    prev = None
    for r in range(1, len(names) + 1):
        g = dependency_degree(ds, names[:r], q).gamma
        assert prev is None or g >= prev
        prev = g
        coarse = indiscernibility_partition(ds, names[:r])
        if r < len(names):
            fine = indiscernibility_partition(ds, names[:r + 1])
            assert all(any(b <= c for c in coarse.blocks) for b in fine.blocks)
