"""Undirected binary networks and their random-walk transition matrices."""

from dataclasses import dataclass

import numpy as np

from .errors import GraphError
from .kernels import row_normalize_stack

__all__ = ["Graph", "GraphError", "build_graph", "row_normalize", "leave_one_out"]


@dataclass(frozen=True, eq=False)
class Graph:
    """Adjacency structure of one group.

    The adjacency matrix is stored dense as a read-only ``uint8`` array; groups
    hold tens of agents, so dense storage is cheap and gives row access for free.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=np.uint8, copy=True)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {A.shape}")
        if np.any(A > 1):
            raise GraphError("adjacency entries must be 0 or 1")
        if np.any(np.diagonal(A)):
            raise GraphError("self-loops are not allowed")
        if not np.array_equal(A, A.T):
            raise GraphError("adjacency must be symmetric")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def degrees(self):
        return self.adjacency.sum(axis=1, dtype=np.int64)

    def edges(self):
        """Sorted list of ``(i, j)`` pairs with ``i < j``."""
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash((self.n, self.adjacency.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, edges={int(self.adjacency.sum()) // 2})"


def build_graph(n, edges):
    """Build a :class:`Graph` on ``n`` agents from unordered pairs.

    Duplicate pairs, in either orientation, collapse to a single link.
    """
    n = int(n)
    if n < 0:
        raise GraphError("agent count must be non-negative")
    A = np.zeros((n, n), dtype=np.uint8)
    for k, (i, j) in enumerate(edges):
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge {k} ({i}, {j}) out of range for n={n}")
        if i == j:
            raise GraphError(f"edge {k} is a self-loop on agent {i}")
        A[i, j] = A[j, i] = 1
    return Graph(A)


def row_normalize(g):
    """Transition matrix ``H``: each row divided by the agent's degree."""
    return row_normalize_stack(g.adjacency)


def leave_one_out(g, i):
    """Transition matrix of the network with every link of agent ``i`` removed.

    Degrees are recomputed on the reduced network, so this is not the same as
    zeroing row and column ``i`` of :func:`row_normalize`. Row and column
    ``i`` of the result are zero, which keeps the ``n x n`` indexing.
    """
    i = int(i)
    if not 0 <= i < g.n:
        raise IndexError(f"agent {i} out of range for n={g.n}")
    A = g.adjacency.astype(np.float64)
    A[i, :] = 0.0
    A[:, i] = 0.0
    return row_normalize_stack(A)
