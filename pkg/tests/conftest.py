import numpy as np
import pytest

from vmfs.synthgen import default_composition, generate
from vmfs.telemetry import LabeledDataset, Workload

W = list(Workload)


def labeled(cols, y):
    """Dataset from a name->values mapping and integer class codes."""
    return LabeledDataset.from_arrays(cols, labels=[W[int(i)] for i in y])


def random_labeled(seed, max_features=10):
    """Mixed informative / redundant / noise features, 2-4 classes."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(40, 160))
    p = int(rng.integers(2, max_features + 1))
    y = rng.integers(0, int(rng.integers(2, 5)), n)
    cols = {}
    for j in range(p):
        kind = rng.integers(3)
        if kind == 0:
            v = y * rng.uniform(0, 2) + rng.normal(0, 1, n)
        elif kind == 1 and j > 0:
            v = cols[f"f{rng.integers(j)}"] + rng.normal(0, rng.uniform(0, 1), n)
        else:
            v = rng.normal(0, 1, n)
        cols[f"f{j}"] = v
    return labeled(cols, y)


@pytest.fixture(scope="session")
def synthetic():
    return generate(default_composition())


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{number:02d} {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
