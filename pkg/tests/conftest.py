import numpy as np
import pytest

from treespect.graphs import UndirectedGraph


def prufer_tree(seq: list[int], n: int) -> UndirectedGraph:
    """Decode a Prüfer sequence (length n-2, entries in [0,n)) into a tree."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    edges = []
    import heapq

    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    a = heapq.heappop(leaves)
    b = heapq.heappop(leaves)
    edges.append((a, b))
    return UndirectedGraph.from_edges(n, edges)


def random_tree(rng: np.random.Generator, n: int) -> UndirectedGraph:
    if n == 1:
        return UndirectedGraph(1)
    if n == 2:
        return UndirectedGraph.from_edges(2, [(0, 1)])
    seq = [int(x) for x in rng.integers(0, n, size=n - 2)]
    return prufer_tree(seq, n)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
