import numpy as np
import pytest
from hypothesis import strategies as st

from peerfx.graph import Graph


def random_graph(rng, n, p):
    upper = np.triu(rng.random((n, n)) < p, 1)
    return Graph((upper | upper.T).astype(np.uint8))


def connected_graph(rng, n, p):
    while True:
        g = random_graph(rng, n, p)
        seen, stack = {0}, [0]
        while stack:
            r = stack.pop()
            for c in np.nonzero(g.adjacency[r])[0]:
                if c not in seen:
                    seen.add(int(c))
                    stack.append(int(c))
        if len(seen) == n:
            return g


def brute_leave_one_out(A, i):
    """Delete agent i, row-normalize the (n-1)-node graph in plain Python, pad back."""
    n = len(A)
    keep = [k for k in range(n) if k != i]
    out = np.zeros((n, n))
    for r in keep:
        deg = sum(A[r][c] for c in keep)
        for c in keep:
            if deg > 0:
                out[r, c] = A[r][c] / deg
    return out


def brute_q(A, s):
    """Q_s by explicit powers of the brute-force leave-one-out matrices."""
    n = len(A)
    Q = np.zeros((n, n))
    for i in range(n):
        P = np.eye(n)
        Hi = brute_leave_one_out(A, i)
        for _ in range(s):
            P = P @ Hi
        for j in range(n):
            Q[i, j] = sum(P[r, j] for r in range(n) if r != i) / (n - 1)
    return Q


@st.composite
def graphs(draw, min_n=2, max_n=8):
    n = draw(st.integers(min_n, max_n))
    bits = draw(st.lists(st.booleans(), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    A = np.zeros((n, n), dtype=np.uint8)
    iu = np.triu_indices(n, 1)
    A[iu] = bits
    return Graph(A + A.T)


@pytest.fixture
def path3():
    return Graph(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.uint8))
