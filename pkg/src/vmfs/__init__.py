"""Feature selection, K-means clustering and cluster-validity ranking for
hypervisor (esxtop) telemetry."""

from vmfs.errors import VmfsError
from vmfs.telemetry import LabeledDataset, DiscreteDataset, Resource, Workload

__version__ = "0.1.0"

__all__ = [
    "VmfsError",
    "LabeledDataset",
    "DiscreteDataset",
    "Resource",
    "Workload",
]
