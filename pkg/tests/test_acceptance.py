"""Exit criteria. Each test prints one PASS/FAIL line (also listed in the
terminal summary under "acceptance criteria")."""

import itertools
import time

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

import oracles
from conftest import labeled, random_labeled, record_criterion
from vmfs.cli import main
from vmfs.clustering import davies_bouldin, dunn_index, kmeans
from vmfs.pipeline import REFERENCE_SCORES, ComparisonReport, Ranking, rank_selectors
from vmfs.roughset import (
    dependency_degree,
    indiscernibility_partition,
    lower_approximation,
    upper_approximation,
    usqr_select,
)
from vmfs.selectors import (
    cfs_best_first,
    cfs_cache,
    cfs_exhaustive,
    cfs_select,
    chi_square_stat,
    loo_accuracy,
    relief_weights,
    wrapper_select,
)
from vmfs.telemetry import DiscreteDataset, LabeledDataset, load_dataset, zscore_matrix

pytestmark = pytest.mark.acceptance


def test_ac01_validity_oracles():
    pts = np.array([[0.0], [2.0], [10.0], [12.0]])
    lab = np.array([0, 0, 1, 1])
    db, dunn = davies_bouldin(pts, lab), dunn_index(pts, lab)
    timings = []
    for _ in range(20):
        t0 = time.perf_counter()
        davies_bouldin(pts, lab)
        dunn_index(pts, lab)
        timings.append(time.perf_counter() - t0)
    ms = min(timings) * 1000
    ok = abs(db - 0.2) < 1e-9 and abs(dunn - 5.0) < 1e-9 and ms < 1.0
    assert record_criterion(1, "DB=0.2 and Dunn=5 on {0,2}/{10,12}", ok,
                            f"db={db!r} dunn={dunn!r} {ms:.3f} ms")


def test_ac02_index_invariances():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n, d, k = int(rng.integers(10, 201)), int(rng.integers(1, 11)), int(rng.integers(2, 6))
        X = rng.normal(size=(n, d)) + rng.normal(scale=3, size=(k, d))[rng.integers(0, k, n)]
        lab = kmeans(X, k, seed=int(rng.integers(1 << 31))).labels
        base = np.array([davies_bouldin(X, lab), dunn_index(X, lab)])
        shift = rng.normal(scale=50, size=d)
        scale = rng.uniform(0.1, 10)
        for Y in (X + shift, X * scale):
            moved = np.array([davies_bouldin(Y, lab), dunn_index(Y, lab)])
            worst = max(worst, float(np.max(np.abs(moved - base) / base)))
    shape = np.array([[0.0, 0.0], [1.0, 0.5], [0.5, 1.0], [-0.3, 0.2]])
    lab = np.repeat([0, 1], 4)
    dbs, dunns = [], []
    for gap in np.linspace(3, 60, 50):
        pts = np.vstack([shape, shape + [gap, 0.0]])
        dbs.append(davies_bouldin(pts, lab))
        dunns.append(dunn_index(pts, lab))
    monotone = bool(np.all(np.diff(dbs) < 0) and np.all(np.diff(dunns) > 0))
    ok = worst < 1e-9 and monotone
    assert record_criterion(2, "DB/Dunn translation+scale invariant, gap-monotone", ok,
                            f"max rel change {worst:.2e}, monotone={monotone}")


def test_ac03_kmeans_contract():
    rng = np.random.default_rng(3)
    datasets = []
    for _ in range(20):
        n, d = int(rng.integers(8, 80)), int(rng.integers(1, 6))
        datasets.append((rng.normal(size=(n, d)) * rng.uniform(0.5, 5), int(rng.integers(1, 7))))
    increases = empties = 0
    for X, k in datasets:
        for seed in range(100):
            a = kmeans(X, k, seed=seed)
            increases += int(np.sum(np.diff(a.history) > 0))
            empties += k - len(np.unique(a.labels))
    exact = True
    for seed in range(20):
        base = rng.normal(scale=10, size=(4, 3))
        X = np.repeat(base, 3, axis=0)
        exact &= kmeans(X, 4, seed=seed).inertia == 0.0
    ok = increases == 0 and empties == 0 and exact
    assert record_criterion(3, "k-means inertia monotone, no empty clusters, exact recovery", ok,
                            f"increases={increases} empty={empties} exact={exact}")


def test_ac04_cfs_best_first_equals_exhaustive():
    t0 = time.perf_counter()
    mismatches = 0
    for seed in range(100):
        cache = cfs_cache(random_labeled(1000 + seed))
        best, merit, _ = cfs_best_first(cache)
        ex, ex_merit = cfs_exhaustive(cache)
        mismatches += int(best != ex or merit != ex_merit)
    secs = time.perf_counter() - t0
    ok = mismatches == 0 and secs < 30
    assert record_criterion(4, "CFS best-first == exhaustive on 100 datasets", ok,
                            f"mismatches={mismatches} {secs:.1f} s")


def test_ac05_cfs_redundancy():
    both = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = 120
        y = rng.integers(0, 3, n)
        inf = y + rng.normal(0, 0.3, n)
        cols = {"inf_a": inf, "inf_b": inf.copy()}
        for j in range(3):
            cols[f"noise{j}"] = rng.normal(size=n)
        feats = cfs_select(labeled(cols, y)).features
        both += int({"inf_a", "inf_b"} <= set(feats))
    assert record_criterion(5, "CFS never keeps both copies of a duplicate", both == 0,
                            f"{both}/100 trials kept both")


def test_ac06_chi_square_oracle():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 300))
        t = rng.random(n) < rng.uniform(0.05, 0.95)
        c = rng.random(n) < rng.uniform(0.05, 0.95)
        table = [[int(np.sum(t & c)), int(np.sum(t & ~c))],
                 [int(np.sum(~t & c)), int(np.sum(~t & ~c))]]
        expected = float(oracles.chi_square_counts(t, c))
        got = chi_square_stat(table)
        worst = max(worst, abs(got - expected) / max(1.0, expected))
    perfect = all(chi_square_stat([[a, 0], [0, d]]) == a + d
                  for a in range(1, 40) for d in range(1, 40))
    ok = worst < 1e-9 and perfect
    assert record_criterion(6, "chi-square matches count oracle; perfect tables give N", ok,
                            f"max rel err {worst:.2e}, perfect={perfect}")


def test_ac07_relief_sanity():
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = np.repeat([0, 1], 30)
        ds = labeled({"informative": 3.0 * y + rng.normal(size=60),
                      "noise": rng.normal(size=60)}, y)
        w = relief_weights(ds)
        wins += int(w["informative"] > w["noise"])
    rng = np.random.default_rng(7)
    y = np.repeat([0, 1, 2], 10)
    ds = labeled({"a": y + rng.normal(size=30), "const": np.full(30, 4.2)}, y)
    const_zero = relief_weights(ds)["const"] == 0.0
    perm = rng.permutation(30)
    shuffled = LabeledDataset(ds.features, ds.X[perm], [ds.row_ids[i] for i in perm],
                              [ds.labels[i] for i in perm])
    invariant = relief_weights(ds) == relief_weights(shuffled)
    ok = wins >= 95 and const_zero and invariant
    assert record_criterion(7, "RELIEF ranks informative > noise, constant -> 0, permutation-invariant",
                            ok, f"wins={wins}/100 const0={const_zero} perm={invariant}")


def _random_discrete(rng):
    p = int(rng.integers(1, 9))
    n = int(rng.integers(2, 33))
    card = rng.integers(1, 4, p)
    return DiscreteDataset.from_columns({f"x{j}": rng.integers(0, card[j], n) for j in range(p)})


def test_ac08_usqr_oracles():
    t0 = time.perf_counter()
    abc = DiscreteDataset.from_columns({"a": [0, 0, 1, 1], "b": [0, 1, 0, 1], "c": [0, 0, 1, 1]})
    worked = usqr_select(abc).features == ("a", "b")
    rng = np.random.default_rng(8)
    failures = 0
    for _ in range(100):
        ds = _random_discrete(rng)
        rows = [dict(zip(ds.names, r)) for r in ds.codes.tolist()]
        best = max(oracles.mean_dep(rows, c, ds.names)
                   for r in range(1, len(ds.names) + 1)
                   for c in itertools.combinations(ds.names, r))
        got = oracles.mean_dep(rows, usqr_select(ds).features, ds.names)
        failures += int(got != best)
    secs = time.perf_counter() - t0
    ok = worked and failures == 0 and secs < 60
    assert record_criterion(8, "USQR worked example {a,b}; reduct attains full mean dependency",
                            ok, f"worked={worked} failures={failures} {secs:.1f} s")


def test_ac09_rough_set_invariants():
    rng = np.random.default_rng(9)
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        ds = DiscreteDataset.from_columns({"a": rng.integers(0, rng.integers(1, 6), n)})
        part = indiscernibility_partition(ds, ["a"])
        x = set(np.flatnonzero(rng.random(n) < rng.uniform(0, 1)).tolist())
        violations += int(not (lower_approximation(part, x) <= x <= upper_approximation(part, x)))
    drops = 0
    for _ in range(200):
        ds = _random_discrete(rng)
        names = list(rng.permutation(ds.names))
        q = list(rng.choice(ds.names, size=rng.integers(1, len(ds.names) + 1), replace=False))
        gammas = [dependency_degree(ds, names[:r], q).gamma for r in range(1, len(names) + 1)]
        drops += int(np.sum(np.diff(gammas) < 0))
    ok = violations == 0 and drops == 0
    assert record_criterion(9, "lower <= X <= upper; gamma monotone in P", ok,
                            f"approx violations={violations} gamma drops={drops}")


@pytest.fixture(scope="module")
def end_to_end(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("e2e")
    ds_path, r1, r2 = tmp / "ds.json", tmp / "r1.json", tmp / "r2.json"
    t0 = time.perf_counter()
    codes = [main(["synth", "--out", str(ds_path)]),
             main(["compare", "--dataset", str(ds_path), "--methods", "all", "--k", "4",
                   "--out", str(r1)])]
    secs = time.perf_counter() - t0
    codes.append(main(["compare", "--dataset", str(ds_path), "--methods", "all", "--k", "4",
                       "--out", str(r2)]))
    return {"ds": load_dataset(ds_path), "r1": r1.read_bytes(), "r2": r2.read_bytes(),
            "secs": secs, "codes": codes}


def test_ac10_end_to_end_shape(end_to_end):
    ds = end_to_end["ds"]
    report = ComparisonReport.from_json(end_to_end["r1"].decode())
    five = len(report.results) == 5 and all(r.features and r.error is None for r in report.results)
    _, means, vm_labels = ds.vm_means()
    assignment = kmeans(zscore_matrix(means), 4, seed=0)
    ari = adjusted_rand_score([w.value for w in vm_labels], assignment.labels)
    identical = end_to_end["r1"] == end_to_end["r2"]
    ok = (end_to_end["codes"] == [0, 0, 0] and end_to_end["secs"] < 60 and five
          and len(means) == 26 and ari >= 0.9 and identical)
    assert record_criterion(10, "synth + compare: 26 VMs, 5 non-empty subsets, ARI>=0.9, "
                                "byte-identical report", ok,
                            f"{end_to_end['secs']:.1f} s, ARI={ari:.3f}, identical={identical}")


def test_ac11_wrapper_bound():
    violations = 0
    mismatched = 0
    for seed in range(50):
        ds = random_labeled(2000 + seed)
        ids = ds.feature_ids
        brute = max(loo_accuracy(ds, c) for r in range(1, len(ids) + 1)
                    for c in itertools.combinations(ids, r))
        exhaustive = wrapper_select(ds, "exhaustive").objective
        greedy = wrapper_select(ds, "greedy").objective
        violations += int(greedy > exhaustive)
        mismatched += int(exhaustive != brute)
    ok = violations == 0 and mismatched == 0
    assert record_criterion(11, "greedy wrapper accuracy <= exhaustive (enumeration oracle)", ok,
                            f"violations={violations} exhaustive!=brute={mismatched}")


def test_ac12_erratum(end_to_end):
    std = rank_selectors(REFERENCE_SCORES, Ranking.STANDARD).winner
    inv = rank_selectors(REFERENCE_SCORES, Ranking.PAPER_VI_B).winner
    report = ComparisonReport.from_json(end_to_end["r1"].decode())
    ok = std == "RELIEF" and inv == "CHI2" and len(report.errata) > 0 and "CFS" not in (std, inv)
    assert record_criterion(12, "reference scores: standard->RELIEF, inverted->CHI2, errata present",
                            ok, f"standard={std} inverted={inv} errata={len(report.errata)}")
