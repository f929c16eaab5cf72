"""Group-level data containers shared by the estimator, simulator and file IO."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .graph import Graph

__all__ = ["GroupData", "Dataset"]


def _frozen_vector(v, n, name, group_id):
    v = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    if v.shape[0] != n:
        raise DataError(f"group {group_id!r}: {name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise DataError(f"group {group_id!r}: {name} contains non-finite values")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class GroupData:
    """One network with its covariate and (optionally) outcome vectors."""

    graph: Graph
    x: np.ndarray
    y: np.ndarray | None = None
    group_id: str = "0"

    def __post_init__(self):
        n = self.graph.n
        object.__setattr__(self, "group_id", str(self.group_id))
        object.__setattr__(self, "x", _frozen_vector(self.x, n, "x", self.group_id))
        if self.y is not None:
            object.__setattr__(self, "y", _frozen_vector(self.y, n, "y", self.group_id))

    @property
    def n(self):
        return self.graph.n

    def __eq__(self, other):
        if not isinstance(other, GroupData):
            return NotImplemented
        if (self.y is None) != (other.y is None):
            return False
        return (
            self.group_id == other.group_id
            and self.graph == other.graph
            and np.array_equal(self.x, other.x)
            and (self.y is None or np.array_equal(self.y, other.y))
        )

    __hash__ = None


@dataclass(frozen=True)
class Dataset:
    """A collection of independent groups, kept in ascending ``group_id`` order.

    Sorting at construction makes every downstream reduction run in the same
    order no matter how the caller listed the groups.
    """

    groups: tuple = field(default_factory=tuple)

    def __post_init__(self):
        groups = tuple(sorted(self.groups, key=lambda d: d.group_id))
        if not groups:
            raise DataError("a dataset needs at least one group")
        ids = [d.group_id for d in groups]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise DataError(f"duplicate group ids: {sorted(dup)}")
        object.__setattr__(self, "groups", groups)

    @property
    def G(self):
        return len(self.groups)

    @property
    def n(self):
        return sum(d.n for d in self.groups)

    @property
    def sizes(self):
        return np.array([d.n for d in self.groups], dtype=np.int64)

    @property
    def has_outcomes(self):
        return all(d.y is not None for d in self.groups)

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def size_buckets(self):
        """Map each distinct group size to the positions of groups of that size."""
        buckets = {}
        for k, d in enumerate(self.groups):
            buckets.setdefault(d.n, []).append(k)
        return buckets
