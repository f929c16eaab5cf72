"""Hot loops: leave-own-out random walks over stacks of equal-sized groups.

Every kernel takes a stack of adjacency matrices ``A`` of shape ``(G, n, n)``
and covariates ``x`` of shape ``(G, n)``. Two implementations exist for each
kernel; :data:`peerfx._accel.BACKEND` picks the default one.
"""

import numpy as np

from ._accel import BACKEND, HAVE_NUMBA, njit

__all__ = ["leave_out_walks", "row_normalize_stack", "power_columns"]


def row_normalize_stack(A):
    """Row-normalize a stack of adjacency matrices; isolated rows stay zero."""
    A = np.asarray(A, dtype=np.float64)
    deg = A.sum(axis=-1, keepdims=True)
    return np.divide(A, deg, out=np.zeros_like(A), where=deg > 0)


def power_columns(H, v, steps):
    """Return ``(H v, H^2 v, ..., H^steps v)`` stacked on the last axis."""
    out = np.empty(v.shape + (steps,))
    w = v
    for s in range(steps):
        w = np.matmul(H, w[..., None])[..., 0]
        out[..., s] = w
    return out


@njit(cache=True)
def _walks_numba(A, x, steps):
    G, n, _ = A.shape
    first = np.zeros((G, n, steps))
    second = np.zeros((G, n, steps))
    if n < 2:
        return first, second
    deg = np.empty(n)
    w = np.empty(n)
    nw = np.empty(n)
    w1 = np.empty(n)
    scale = 1.0 / (n - 1)
    for g in range(G):
        Ag = A[g]
        xg = x[g]
        for r in range(n):
            acc = 0.0
            for c in range(n):
                acc += Ag[r, c]
            deg[r] = acc
        for i in range(n):
            for r in range(n):
                w[r] = xg[r]
            # column i of H_i is zero, so x_i never contributes
            w[i] = 0.0
            for s in range(steps):
                for r in range(n):
                    d = deg[r] - Ag[r, i]
                    if r == i or d <= 0.0:
                        nw[r] = 0.0
                        continue
                    acc = 0.0
                    for c in range(n):
                        acc += Ag[r, c] * w[c]
                    nw[r] = acc / d
                w, nw = nw, w
                if s == 0:
                    for r in range(n):
                        w1[r] = w[r]
                tot = 0.0
                dot = 0.0
                for r in range(n):
                    tot += w[r]
                    dot += w1[r] * w[r]
                first[g, i, s] = tot * scale
                second[g, i, s] = dot
    return first, second


def _walks_numpy(A, x, steps):
    G, n, _ = A.shape
    first = np.zeros((G, n, steps))
    second = np.zeros((G, n, steps))
    if n < 2:
        return first, second
    idx = np.arange(n)
    keep = (idx[:, None, None] != idx[None, :, None]) & (
        idx[:, None, None] != idx[None, None, :]
    )
    # Ai[g, i] is A_g with row and column i removed (kept as zeros)
    Ai = A[:, None, :, :] * keep[None]
    d = Ai.sum(axis=-1, keepdims=True)
    Hi = np.divide(Ai, d, out=np.zeros_like(Ai), where=d > 0)
    w = np.broadcast_to(x[:, None, :], (G, n, n))
    w1 = None
    for s in range(steps):
        w = np.matmul(Hi, w[..., None])[..., 0]
        if w1 is None:
            w1 = w
        first[:, :, s] = w.sum(axis=-1) / (n - 1)
        second[:, :, s] = (w1 * w).sum(axis=-1)
    return first, second


def leave_out_walks(A, x, steps, backend=None):
    """Leave-own-out walk averages and second moments for every agent.

    Parameters
    ----------
    A : ndarray, shape (G, n, n)
        Binary symmetric adjacency matrices.
    x : ndarray, shape (G, n)
        Covariate per agent.
    steps : int
        Number of walk steps ``S``.
    backend : {"numba", "numpy"}, optional
        Override the module default.

    Returns
    -------
    first : ndarray, shape (G, n, S)
        ``first[g, i, s-1] = sum(H_i^s x) / (n - 1)`` on group ``g``.
    second : ndarray, shape (G, n, S)
        ``second[g, i, s-1] = (H_i x) . (H_i^s x)``.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if A.ndim != 3 or A.shape[1] != A.shape[2] or x.shape != A.shape[:2]:
        raise ValueError(f"shape mismatch: A {A.shape}, x {x.shape}")
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    backend = backend or BACKEND
    if backend == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return _walks_numba(A, x, steps)
    if backend == "numpy":
        return _walks_numpy(A, x, steps)
    raise ValueError(f"unknown backend {backend!r}")
