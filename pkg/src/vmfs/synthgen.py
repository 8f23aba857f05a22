"""Seeded synthetic esxtop telemetry with planted workload archetypes.

Each VM runs one workload. Counters in the workload's own resource group are
"hot" (drawn around ``separation``), everything else is "cold" (around 0).
Power counters are never hot. Draws are clipped at 0 because esxtop
counters are non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vmfs.telemetry import (
    FEATURE_SCHEMA,
    LabeledDataset,
    Resource,
    Workload,
)

DEFAULT_SEED = 20130501
DEFAULT_COMPOSITION = {
    Workload.CPU_INTENSIVE: 7,
    Workload.MEM_INTENSIVE: 7,
    Workload.DISK_INTENSIVE: 7,
    Workload.NET_INTENSIVE: 5,
}


@dataclass(frozen=True)
class ArchetypeProfile:
    workload: Workload
    means: dict[tuple[str, Resource], float]
    stddevs: dict[tuple[str, Resource], float]

    def is_hot(self, feature: tuple[str, Resource]) -> bool:
        return feature[1] == self.workload.resource


@dataclass(frozen=True)
class SynthConfig:
    vm_counts: dict[Workload, int] = field(default_factory=lambda: dict(DEFAULT_COMPOSITION))
    samples_per_vm: int = 60
    seed: int = DEFAULT_SEED
    separation: float = 6.0
    resources: frozenset[Resource] = frozenset(Resource)

    def __post_init__(self):
        counts = {Workload(w): int(c) for w, c in self.vm_counts.items()}
        object.__setattr__(self, "vm_counts", counts)
        object.__setattr__(self, "resources", frozenset(Resource(r) for r in self.resources))
        if any(c < 0 for c in counts.values()):
            raise ValueError("VM counts must be non-negative")
        active = [w for w, c in counts.items() if c > 0]
        if sum(counts.values()) < len(active) or not active:
            raise ValueError("need at least one VM")
        if self.samples_per_vm < 1:
            raise ValueError("samples_per_vm must be >= 1")
        if self.separation < 0:
            raise ValueError("separation must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not self.resources:
            raise ValueError("resource set is empty")

    @property
    def total_vms(self) -> int:
        return sum(self.vm_counts.values())

    def features(self) -> list[tuple[str, Resource]]:
        return [(name, res) for res in Resource if res in self.resources
                for name in FEATURE_SCHEMA[res]]

    def profile(self, workload: Workload) -> ArchetypeProfile:
        feats = self.features()
        means = {f: (self.separation if f[1] == workload.resource else 0.0) for f in feats}
        return ArchetypeProfile(workload, means, {f: 1.0 for f in feats})


def default_composition() -> SynthConfig:
    """26 VMs split 7/7/7/5 (network gets 5), 60 samples each."""
    return SynthConfig()


def composition_for(total_vms: int) -> dict[Workload, int]:
    """Spread ``total_vms`` over the four workloads, earlier ones first."""
    base, extra = divmod(total_vms, len(Workload))
    return {w: base + (1 if i < extra else 0) for i, w in enumerate(Workload)}


def generate(cfg: SynthConfig) -> LabeledDataset:
    rng = np.random.default_rng(cfg.seed)
    feats = cfg.features()
    rows, row_ids, labels = [], [], []
    vm_no = 0
    for workload in Workload:
        prof = cfg.profile(workload)
        mu = np.array([prof.means[f] for f in feats])
        sd = np.array([prof.stddevs[f] for f in feats])
        for _ in range(cfg.vm_counts.get(workload, 0)):
            vm_no += 1
            vm = f"vm{vm_no:02d}"
            draw = rng.normal(mu, sd, size=(cfg.samples_per_vm, len(feats)))
            rows.append(np.maximum(draw, 0.0))
            row_ids.extend((vm, t) for t in range(cfg.samples_per_vm))
            labels.extend([workload] * cfg.samples_per_vm)
    return LabeledDataset(
        features=tuple(feats),
        X=np.vstack(rows),
        row_ids=row_ids,
        labels=labels,
    )
