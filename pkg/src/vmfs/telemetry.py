"""esxtop telemetry: dataset types, CSV ingest, JSON I/O and preprocessing.

A :class:`LabeledDataset` is an instance-by-feature matrix. Rows are
``(vm_name, timestamp_index)`` samples, columns are esxtop counters tagged
with the resource group they describe. Feature names are only unique per
resource (``%USED`` exists for both CPU and power), so columns are addressed
by *feature ids*: the bare counter name when it is unambiguous within the
dataset, ``RESOURCE:name`` otherwise.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from vmfs.errors import DimensionError, EmptyDatasetError, ParseError


class Resource(str, enum.Enum):
    CPU = "CPU"
    MEMORY = "MEMORY"
    DISK = "DISK"
    NETWORK = "NETWORK"
    POWER = "POWER"


class Workload(str, enum.Enum):
    CPU_INTENSIVE = "cpu"
    MEM_INTENSIVE = "mem"
    DISK_INTENSIVE = "disk"
    NET_INTENSIVE = "net"

    @property
    def resource(self) -> Resource:
        return _WORKLOAD_RESOURCE[self]


_WORKLOAD_RESOURCE = {
    Workload.CPU_INTENSIVE: Resource.CPU,
    Workload.MEM_INTENSIVE: Resource.MEMORY,
    Workload.DISK_INTENSIVE: Resource.DISK,
    Workload.NET_INTENSIVE: Resource.NETWORK,
}

WORKLOAD_ORDER = tuple(Workload)

# Counter names per resource group, in esxtop display order.
FEATURE_SCHEMA: dict[Resource, tuple[str, ...]] = {
    Resource.CPU: (
        "%USED", "%RUN", "%SYS", "%WAIT", "%VMWAIT", "%RDY", "%IDLE",
        "%OVRP", "%CSTP", "%MLMTD", "%SWPWT", "SWTCH/s", "MIG/s",
    ),
    Resource.MEMORY: (
        "SWCUR", "SWTGT", "SWR/s", "SWW/s", "LLSWR/s", "LLSWW/s", "CPTDR",
        "CPTTGT", "ZERO", "SHRD", "SHRDSVD", "COWH", "NHN", "NMIG", "NRMEM",
        "NLMEM", "N_L", "GST_ND0", "OVD_ND0", "GST_ND1", "OVD_ND1", "OVHDUM",
        "OVHD", "OVHDMAX", "CMTTGT", "CMTCHRG", "CMTPPS", "CACHESZ",
        "CACHUSD", "ZIP/s", "UNZIP/s", "MEMSZ", "GRANT", "SZTGT", "TCHD",
        "TCHD_W", "ACTV", "ACTVS", "ACTVF", "ACTVN", "MCTLSZ", "MCTLTGT",
        "MCTLMAX",
    ),
    Resource.DISK: (
        "CMDS/s", "READS/s", "WRITES/s", "MBREAD/s", "MBWRTN/s", "LAT/rd",
        "LAT/wr",
    ),
    Resource.NETWORK: (
        "PKTTX/s", "MbTX/s", "PKTRX/s", "MbRX/s", "%DRPTX", "%DRPRX",
        "ACTN/s", "PKTTXMUL/s", "PKTRXMUL/s", "PKTTXBRD/s", "PKTRXBRD/s",
    ),
    Resource.POWER: (
        "%USED", "%UTIL", "%C0", "%C1", "%C2", "%C3", "%T0", "%T1", "%T2",
        "%T3", "%T4", "%T5", "%T6", "%T7",
    ),
}

# esxtop group -> resource; the VM group carries per-VM CPU counters, so a
# metric under it resolves by name (CPU first).
ESXTOP_GROUPS: dict[str, Resource | None] = {
    "VM": None,
    "Physical Cpu": Resource.CPU,
    "Memory": Resource.MEMORY,
    "Disk": Resource.DISK,
    "Network": Resource.NETWORK,
    "Power": Resource.POWER,
}
_GROUP_FOR_RESOURCE = {
    Resource.CPU: "VM",
    Resource.MEMORY: "Memory",
    Resource.DISK: "Disk",
    Resource.NETWORK: "Network",
    Resource.POWER: "Power",
}
_HEADER_CELL = re.compile(r"^(?P<group>[^()\\]+)\((?P<inst>[^()]*)\)\\(?P<metric>.+)$")


@dataclass(frozen=True, eq=False)
class FeatureColumn:
    name: str
    resource: Resource
    values: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, FeatureColumn):
            return NotImplemented
        return (
            self.name == other.name
            and self.resource == other.resource
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Immutable sample-by-feature matrix with optional workload labels."""

    features: tuple[tuple[str, Resource], ...]
    X: np.ndarray
    row_ids: tuple[tuple[str, int], ...]
    labels: tuple[Workload, ...] | None = None
    diagnostics: Mapping = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        if X.ndim != 2:
            raise DimensionError("feature matrix must be 2-D")
        features = tuple((str(n), Resource(r)) for n, r in self.features)
        if X.shape[1] != len(features):
            raise DimensionError(
                f"{len(features)} feature names for {X.shape[1]} columns"
            )
        if len(set(features)) != len(features):
            raise DimensionError("duplicate (name, resource) feature")
        row_ids = tuple((str(vm), int(t)) for vm, t in self.row_ids)
        if len(row_ids) != X.shape[0]:
            raise DimensionError(f"{len(row_ids)} row ids for {X.shape[0]} rows")
        labels = self.labels
        if labels is not None:
            labels = tuple(Workload(lab) for lab in labels)
            if len(labels) != X.shape[0]:
                raise DimensionError(f"{len(labels)} labels for {X.shape[0]} rows")
        if not np.all(np.isfinite(X)):
            raise DimensionError("feature matrix contains non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "diagnostics", dict(self.diagnostics))

    @classmethod
    def from_columns(cls, columns: Sequence[FeatureColumn], row_ids=None, labels=None):
        if not columns:
            raise EmptyDatasetError("no columns")
        X = np.column_stack([np.asarray(c.values, dtype=float) for c in columns])
        if row_ids is None:
            row_ids = [("vm", i) for i in range(X.shape[0])]
        return cls(
            features=tuple((c.name, c.resource) for c in columns),
            X=X,
            row_ids=row_ids,
            labels=labels,
        )

    @classmethod
    def from_arrays(cls, data: Mapping[str, Sequence[float]], labels=None,
                    resource=Resource.CPU, row_ids=None):
        """Convenience constructor: one resource, columns given by name."""
        cols = [FeatureColumn(name, Resource(resource), np.asarray(v, dtype=float))
                for name, v in data.items()]
        return cls.from_columns(cols, row_ids=row_ids, labels=labels)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_cols(self) -> int:
        return self.X.shape[1]

    @property
    def columns(self) -> list[FeatureColumn]:
        return [FeatureColumn(n, r, self.X[:, j]) for j, (n, r) in enumerate(self.features)]

    @property
    def feature_ids(self) -> tuple[str, ...]:
        counts: dict[str, int] = {}
        for name, _ in self.features:
            counts[name] = counts.get(name, 0) + 1
        return tuple(
            name if counts[name] == 1 else qualified_id(name, res)
            for name, res in self.features
        )

    @property
    def qualified_ids(self) -> tuple[str, ...]:
        return tuple(qualified_id(n, r) for n, r in self.features)

    @property
    def resources(self) -> tuple[Resource, ...]:
        seen = []
        for _, r in self.features:
            if r not in seen:
                seen.append(r)
        return tuple(seen)

    def column_index(self, feature_id: str) -> int:
        ids = self.feature_ids
        if feature_id in ids:
            return ids.index(feature_id)
        quals = self.qualified_ids
        if feature_id in quals:
            return quals.index(feature_id)
        raise KeyError(feature_id)

    def select(self, feature_ids: Iterable[str]) -> LabeledDataset:
        idx = [self.column_index(f) for f in feature_ids]
        if not idx:
            raise EmptyDatasetError("empty feature selection")
        return LabeledDataset(
            features=tuple(self.features[j] for j in idx),
            X=self.X[:, idx],
            row_ids=self.row_ids,
            labels=self.labels,
        )

    def label_codes(self) -> np.ndarray:
        """Class index per row, following ``Workload`` declaration order."""
        if self.labels is None:
            raise ValueError("dataset has no labels")
        order = {w: i for i, w in enumerate(WORKLOAD_ORDER)}
        return np.array([order[w] for w in self.labels], dtype=np.int64)

    def vm_names(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for vm, _ in self.row_ids:
            seen.setdefault(vm, None)
        return tuple(seen)

    def vm_means(self) -> tuple[tuple[str, ...], np.ndarray, tuple[Workload, ...] | None]:
        """Per-VM mean vectors, VMs in order of first appearance.

        A VM's label is the label of its first sample.
        """
        names = self.vm_names()
        pos = {vm: i for i, vm in enumerate(names)}
        groups = np.array([pos[vm] for vm, _ in self.row_ids])
        sums = np.zeros((len(names), self.n_cols))
        np.add.at(sums, groups, self.X)
        counts = np.bincount(groups, minlength=len(names)).astype(float)
        means = sums / counts[:, None]
        labels = None
        if self.labels is not None:
            first = {}
            for g, lab in zip(groups, self.labels):
                first.setdefault(int(g), lab)
            labels = tuple(first[i] for i in range(len(names)))
        return names, means, labels

    def with_labels(self, labels) -> LabeledDataset:
        return LabeledDataset(self.features, self.X, self.row_ids, labels, self.diagnostics)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.features == other.features
            and self.row_ids == other.row_ids
            and self.labels == other.labels
            and np.array_equal(self.X, other.X)
        )

    __hash__ = None

    # -- serialization --

    def to_dict(self) -> dict:
        return {
            "rows": [{"vm": vm, "t": t} for vm, t in self.row_ids],
            "labels": None if self.labels is None else [w.value for w in self.labels],
            "columns": [
                {"name": n, "resource": r.value, "values": self.X[:, j].tolist()}
                for j, (n, r) in enumerate(self.features)
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> LabeledDataset:
        try:
            rows = [(r["vm"], r["t"]) for r in d["rows"]]
            cols = d["columns"]
            if not cols:
                raise EmptyDatasetError("dataset has no columns")
            X = np.array([c["values"] for c in cols], dtype=float).T.reshape(len(rows), len(cols))
            features = tuple((c["name"], c["resource"]) for c in cols)
            labels = d.get("labels")
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed dataset JSON: {exc!r}") from exc
        except ValueError as exc:
            if isinstance(exc, EmptyDatasetError):
                raise
            raise ParseError(f"malformed dataset JSON: {exc}") from exc
        try:
            return cls(features=features, X=X, row_ids=rows, labels=labels)
        except ValueError as exc:
            if isinstance(exc, DimensionError):
                raise
            raise ParseError(f"malformed dataset JSON: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> LabeledDataset:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
        return cls.from_dict(d)

    def fingerprint(self) -> dict:
        digest = hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()
        return {"rows": self.n_rows, "cols": self.n_cols, "hash": digest}


def qualified_id(name: str, resource: Resource) -> str:
    return f"{Resource(resource).value}:{name}"


def save_dataset(ds: LabeledDataset, path) -> None:
    Path(path).write_text(ds.to_json(), encoding="utf-8")


def load_dataset(path) -> LabeledDataset:
    return LabeledDataset.from_json(Path(path).read_text(encoding="utf-8"))


# -- esxtop CSV --

def _resolve_resource(group: str, metric: str) -> Resource | None:
    if group not in ESXTOP_GROUPS:
        return None
    preferred = ESXTOP_GROUPS[group]
    if preferred is not None:
        return preferred if metric in FEATURE_SCHEMA[preferred] else None
    for res in Resource:
        if metric in FEATURE_SCHEMA[res]:
            return res
    return None


def parse_esxtop_csv(text) -> LabeledDataset:
    """Parse an esxtop batch-mode CSV export.

    Each header cell other than the first is ``Group(instance)\\metric``.
    Every instance becomes a VM; each data line contributes one row per VM.
    Rows are ordered VM-major (instances in header order), then by line.
    Cells whose metric is not a known counter of its resource group are
    skipped and tallied in ``diagnostics["skipped_count"]``.
    """
    if not isinstance(text, str):
        text = text.read()
    if not text.strip():
        raise ParseError("empty input", line=1)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except (StopIteration, csv.Error) as exc:
        raise ParseError(f"unreadable header: {exc}", line=1) from exc
    if len(header) < 2:
        raise ParseError("header needs a timestamp cell and at least one counter", line=1)

    instances: dict[str, dict[tuple[str, Resource], int]] = {}
    feature_order: dict[tuple[str, Resource], None] = {}
    skipped = []
    for col, cell in enumerate(header[1:], start=2):
        m = _HEADER_CELL.match(cell.strip())
        if m is None:
            raise ParseError(f"malformed header cell {cell!r}", line=1, column=col)
        group, inst, metric = m.group("group").strip(), m.group("inst"), m.group("metric")
        res = _resolve_resource(group, metric)
        if res is None:
            skipped.append(cell)
            continue
        key = (metric, res)
        slots = instances.setdefault(inst, {})
        if key in slots:
            raise ParseError(f"duplicate header cell {cell!r}", line=1, column=col)
        slots[key] = col - 1
        feature_order.setdefault(key, None)

    if not feature_order:
        raise EmptyDatasetError(
            f"no recognized counters in header ({len(skipped)} skipped)"
        )
    features = list(feature_order)
    for inst, slots in instances.items():
        missing = [f"{n} ({r.value})" for n, r in features if (n, r) not in slots]
        if missing:
            raise ParseError(f"instance {inst!r} lacks counters: {', '.join(missing)}", line=1)

    lines = []
    for lineno, record in enumerate(reader, start=2):
        if not record or all(not c.strip() for c in record):
            continue
        if len(record) != len(header):
            raise ParseError(
                f"expected {len(header)} cells, found {len(record)}", line=lineno
            )
        vals = []
        for col, cell in enumerate(record[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric cell {cell!r} under {header[col - 1]!r}",
                    line=lineno, column=col,
                ) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite cell {cell!r}", line=lineno, column=col)
            vals.append(v)
        lines.append(vals)
    if not lines:
        raise EmptyDatasetError("no data rows")

    raw = np.array(lines)
    blocks, row_ids = [], []
    for inst, slots in instances.items():
        idx = [slots[f] - 1 for f in features]
        blocks.append(raw[:, idx])
        row_ids.extend((inst, t) for t in range(len(lines)))
    return LabeledDataset(
        features=tuple(features),
        X=np.vstack(blocks),
        row_ids=row_ids,
        labels=None,
        diagnostics={"skipped_count": len(skipped), "skipped": skipped},
    )


def write_esxtop_csv(ds: LabeledDataset) -> str:
    """Render ``ds`` in the CSV dialect read by :func:`parse_esxtop_csv`.

    Every VM must have the same number of samples, at timestamps 0..T-1.
    """
    vms = ds.vm_names()
    per_vm: dict[str, list[int]] = {vm: [] for vm in vms}
    for i, (vm, _) in enumerate(ds.row_ids):
        per_vm[vm].append(i)
    lengths = {len(v) for v in per_vm.values()}
    if len(lengths) != 1:
        raise DimensionError("VMs have differing sample counts")
    n_t = lengths.pop()
    out = io.StringIO()
    w = csv.writer(out, quoting=csv.QUOTE_ALL, lineterminator="\n")
    header = ["(PDH-CSV 4.0) (UTC)(0)"]
    for vm in vms:
        for name, res in ds.features:
            header.append(f"{_GROUP_FOR_RESOURCE[res]}({vm})\\{name}")
    w.writerow(header)
    for t in range(n_t):
        row = [str(t)]
        for vm in vms:
            row.extend(repr(float(v)) for v in ds.X[per_vm[vm][t]])
        w.writerow(row)
    return out.getvalue()


def parse_label_sidecar(text: str) -> dict[str, Workload]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid label JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(raw, dict):
        raise ParseError("label sidecar must be a JSON object")
    try:
        return {str(vm): Workload(v) for vm, v in raw.items()}
    except ValueError as exc:
        raise ParseError(f"bad workload label: {exc}") from exc


def label_sidecar(ds: LabeledDataset) -> dict[str, str]:
    _, _, labels = ds.vm_means()
    if labels is None:
        raise ValueError("dataset has no labels")
    return {vm: lab.value for vm, lab in zip(ds.vm_names(), labels)}


def attach_labels(ds: LabeledDataset, mapping: Mapping[str, Workload]) -> LabeledDataset:
    missing = sorted({vm for vm, _ in ds.row_ids if vm not in mapping})
    if missing:
        raise ParseError(f"no label for VM(s): {', '.join(missing)}")
    return ds.with_labels([mapping[vm] for vm, _ in ds.row_ids])


# -- preprocessing --

def filter_by_resource(ds: LabeledDataset, resources) -> LabeledDataset:
    wanted = {Resource(r) for r in resources}
    if not wanted:
        raise ValueError("resource set is empty")
    idx = [j for j, (_, r) in enumerate(ds.features) if r in wanted]
    if not idx:
        raise EmptyDatasetError(
            f"no columns for resources {sorted(r.value for r in wanted)}"
        )
    return LabeledDataset(
        features=tuple(ds.features[j] for j in idx),
        X=ds.X[:, idx],
        row_ids=ds.row_ids,
        labels=ds.labels,
    )


def zscore_matrix(X: np.ndarray) -> np.ndarray:
    """Column-wise (x - mean) / population std; constant columns become 0."""
    X = np.asarray(X, dtype=float)
    out = np.zeros_like(X)
    std = X.std(axis=0)
    keep = (np.ptp(X, axis=0) > 0) & (std > 0)
    if keep.any():
        sub = X[:, keep]
        out[:, keep] = (sub - sub.mean(axis=0)) / std[keep]
    return out


def zscore_normalize(ds: LabeledDataset) -> LabeledDataset:
    if ds.n_rows < 2:
        raise DimensionError("z-scoring needs at least 2 rows")
    return LabeledDataset(ds.features, zscore_matrix(ds.X), ds.row_ids, ds.labels)


@dataclass(frozen=True, eq=False)
class DiscreteDataset:
    """Integer-coded view of a dataset.

    ``codes[i, j] == c`` means ``bin_edges[j][c-1] < x <= bin_edges[j][c]``
    (missing edges read as -inf / +inf).
    """

    names: tuple[str, ...]
    codes: np.ndarray
    bin_edges: tuple[np.ndarray, ...] = ()
    diagnostics: Mapping = field(default_factory=dict)

    def __post_init__(self):
        codes = np.array(self.codes, dtype=np.int64, copy=True)
        if codes.ndim != 2 or codes.shape[1] != len(self.names):
            raise DimensionError("codes must be rows x len(names)")
        if len(set(self.names)) != len(self.names):
            raise DimensionError("duplicate attribute names")
        if (codes < 0).any():
            raise DimensionError("codes must be non-negative")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "bin_edges", tuple(np.asarray(e, float) for e in self.bin_edges))

    @classmethod
    def from_columns(cls, data: Mapping[str, Sequence[int]]) -> DiscreteDataset:
        names = tuple(data)
        codes = np.column_stack([np.asarray(data[n], dtype=np.int64) for n in names])
        return cls(names=names, codes=codes)

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.names.index(name)]

    def bracket(self, j: int, code: int) -> tuple[float, float]:
        edges = self.bin_edges[j]
        lo = -np.inf if code == 0 else float(edges[code - 1])
        hi = np.inf if code >= len(edges) else float(edges[code])
        return lo, hi


def quantile_cuts(values: np.ndarray, bins: int) -> tuple[np.ndarray, bool]:
    """Cut points for equal-frequency binning and whether bins were reduced.

    Cuts are the lower empirical (i/bins)-quantiles, i.e. actual data values,
    so the coding depends only on the rank order of ``values``.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    distinct = np.unique(v)
    if len(distinct) < bins:
        return distinct[:-1], True
    pos = [(i * n + bins - 1) // bins - 1 for i in range(1, bins)]
    cuts = np.unique(v[pos])
    cuts = cuts[cuts < v[-1]]
    return cuts, len(cuts) + 1 < bins


def equal_frequency_discretize(ds: LabeledDataset, bins: int) -> DiscreteDataset:
    if bins < 2:
        raise ValueError("bins must be >= 2")
    degraded = {}
    codes = np.empty(ds.X.shape, dtype=np.int64)
    edges = []
    for j, fid in enumerate(ds.feature_ids):
        col = ds.X[:, j]
        cuts, reduced = quantile_cuts(col, min(bins, ds.n_rows))
        # ties (x == cut) stay in the lower bin
        codes[:, j] = np.searchsorted(cuts, col, side="left")
        edges.append(cuts)
        if reduced or bins > ds.n_rows:
            degraded[fid] = len(cuts) + 1
    return DiscreteDataset(
        names=ds.feature_ids,
        codes=codes,
        bin_edges=tuple(edges),
        diagnostics={"requested_bins": bins, "degraded": degraded},
    )


def median_binarize(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise DimensionError("median binarization needs at least 2 values")
    return v > np.median(v)
