import numpy as np
import pytest

from fragility.graph import WeightedGraph, graph_from_adjacency


class UnionFind:
    """Independent connectivity oracle for property tests."""

    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def uf_connected(adjacency: np.ndarray) -> bool:
    n = adjacency.shape[0]
    uf = UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if adjacency[i, j] > 0:
                uf.union(i, j)
    root = uf.find(0)
    return all(uf.find(k) == root for k in range(n))


def cycle_graph(n: int, w: float = 1.0) -> WeightedGraph:
    A = np.zeros((n, n))
    idx = np.arange(n)
    A[idx, (idx + 1) % n] = w
    A[(idx + 1) % n, idx] = w
    return graph_from_adjacency(A)


def random_connected_graph(rng: np.random.Generator, n: int, p: float = 0.15) -> WeightedGraph:
    A = np.triu((rng.random((n, n)) < p) * (rng.random((n, n)) * 2 + 0.2), 1)
    A = A + A.T
    for i in range(n - 1):
        if A[i, i + 1] == 0:
            A[i, i + 1] = A[i + 1, i] = rng.random() + 0.2
    return graph_from_adjacency(A)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
