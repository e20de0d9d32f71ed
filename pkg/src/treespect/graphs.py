"""Undirected graphs and the pure graph predicates used across the package.

Nodes are integers 0..node_count-1 internally; human-readable labels are
attached only at serialization boundaries.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DataError

Edge = tuple[int, int]


def _norm_edge(a: int, b: int) -> Edge:
    if a == b:
        raise DataError(f"self-loop on node {a}")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class UndirectedGraph:
    """Simple undirected graph; immutable after construction."""

    node_count: int
    edges: frozenset[Edge] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.node_count < 1:
            raise DataError("graph needs at least one node")
        norm = frozenset(_norm_edge(a, b) for a, b in self.edges)
        object.__setattr__(self, "edges", norm)
        for a, b in norm:
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise DataError(f"edge ({a},{b}) outside [0,{self.node_count})")

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[Sequence[int]]) -> "UndirectedGraph":
        return cls(node_count, frozenset(_norm_edge(a, b) for a, b in edges))

    @classmethod
    def chain(cls, n: int) -> "UndirectedGraph":
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    def has_edge(self, a: int, b: int) -> bool:
        if a == b:
            return False
        return _norm_edge(a, b) in self.edges

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.node_count)]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def neighbors(self, i: int) -> frozenset[int]:
        self._check_node(i)
        return frozenset(b if a == i else a for a, b in self.edges if i in (a, b))

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    def leaves(self) -> frozenset[int]:
        adj = self.adjacency()
        return frozenset(i for i in range(self.node_count) if len(adj[i]) == 1)

    def remove_nodes(self, drop: Iterable[int]) -> "UndirectedGraph":
        """Same node set, but all edges incident to `drop` deleted."""
        dropped = set(drop)
        kept = frozenset(e for e in self.edges if not (e[0] in dropped or e[1] in dropped))
        return UndirectedGraph(self.node_count, kept)

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.node_count:
            raise DataError(f"node {i} outside [0,{self.node_count})")


def bfs_distances(g: UndirectedGraph, source: int) -> list[int]:
    """Shortest-path hop counts from source; -1 for unreachable nodes."""
    g._check_node(source)
    adj = g.adjacency()
    dist = [-1] * g.node_count
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def n_hop_neighbors(g: UndirectedGraph, i: int, n: int) -> frozenset[int]:
    """Nodes at shortest-path distance exactly n from i."""
    if n < 1:
        raise DataError("hop count must be positive")
    dist = bfs_distances(g, i)
    return frozenset(j for j, d in enumerate(dist) if d == n)


def is_tree(g: UndirectedGraph) -> bool:
    """Connected with exactly node_count-1 edges."""
    if len(g.edges) != g.node_count - 1:
        return False
    return all(d >= 0 for d in bfs_distances(g, 0))


def moral_graph(topology: UndirectedGraph) -> UndirectedGraph:
    """Tree edges plus an edge between every 2-hop pair."""
    if not is_tree(topology):
        raise DataError("moral graph construction requires a tree")
    extra = set(topology.edges)
    for i in range(topology.node_count):
        for j in n_hop_neighbors(topology, i, 2):
            if i < j:
                extra.add((i, j))
    return UndirectedGraph(topology.node_count, frozenset(extra))


def perturbed_graph(moral: UndirectedGraph, corrupt: frozenset[int] | set[int]) -> UndirectedGraph:
    """Moral graph plus edges between nodes joined by all-corrupt paths.

    Computed by contraction: each maximal corrupt set that is connected in
    the moral graph, together with its moral neighborhood, becomes a clique.
    Equivalent to enumerating moral paths whose interior nodes are all
    corrupt, but linear instead of exponential.
    """
    corrupt = frozenset(corrupt)
    for v in corrupt:
        moral._check_node(v)
    adj = moral.adjacency()
    edges = set(moral.edges)
    seen: set[int] = set()
    for start in sorted(corrupt):
        if start in seen:
            continue
        # flood the corrupt-connected region containing `start`
        region = {start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w in corrupt and w not in region:
                    region.add(w)
                    queue.append(w)
        seen |= region
        boundary = set().union(*(adj[v] for v in region)) - region
        clique = sorted(region | boundary)
        for a_idx, a in enumerate(clique):
            for b in clique[a_idx + 1:]:
                edges.add((a, b))
    return UndirectedGraph(moral.node_count, frozenset(edges))


def neighborhood_is_clique(g: UndirectedGraph, i: int) -> bool:
    """True iff every pair of i's neighbors is adjacent in g."""
    nbrs = sorted(g.neighbors(i))
    return all(g.has_edge(a, b) for k, a in enumerate(nbrs) for b in nbrs[k + 1:])


def separates(g: UndirectedGraph, c: int, d: int, cut: frozenset[int] | set[int]) -> bool:
    """True iff deleting the cut vertices leaves c and d disconnected."""
    cut = frozenset(cut)
    if c in cut or d in cut:
        raise DataError("endpoints may not belong to the cut set")
    g._check_node(c)
    g._check_node(d)
    if c == d:
        return False
    reach = bfs_distances(g.remove_nodes(cut), c)
    return reach[d] < 0


def connected_components(g: UndirectedGraph, within: Iterable[int] | None = None) -> list[frozenset[int]]:
    """Maximal connected node sets, ordered by smallest member.

    `within` restricts both the nodes considered and the paths allowed.
    """
    nodes = sorted(within) if within is not None else range(g.node_count)
    allowed = set(nodes)
    adj = g.adjacency()
    out: list[frozenset[int]] = []
    visited: set[int] = set()
    for s in nodes:
        if s in visited:
            continue
        comp = {s}
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w in allowed and w not in comp:
                    comp.add(w)
                    queue.append(w)
        visited |= comp
        out.append(frozenset(comp))
    return out


# ---------------------------------------------------------------------------
# serialization

def sorted_edges(g: UndirectedGraph) -> list[Edge]:
    return sorted(g.edges)


def graph_to_json(g: UndirectedGraph, labels: Sequence[str]) -> str:
    if len(labels) != g.node_count:
        raise DataError("label count does not match node count")
    payload = {
        "nodes": list(labels),
        "edges": [[labels[a], labels[b]] for a, b in sorted_edges(g)],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def graph_from_json(text: str) -> tuple[UndirectedGraph, list[str]]:
    payload = json.loads(text)
    labels = [str(x) for x in payload["nodes"]]
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise DataError("duplicate node labels")
    edges = [(index[str(a)], index[str(b)]) for a, b in payload["edges"]]
    return UndirectedGraph.from_edges(len(labels), edges), labels


def graph_to_dot(
    g: UndirectedGraph,
    labels: Sequence[str],
    node_colors: dict[int, str] | None = None,
    edge_colors: dict[Edge, str] | None = None,
    name: str = "g",
) -> str:
    node_colors = node_colors or {}
    edge_colors = edge_colors or {}
    lines = [f"graph {name} {{"]
    for i, lab in enumerate(labels):
        attrs = f' [style=filled, fillcolor="{node_colors[i]}"]' if i in node_colors else ""
        lines.append(f'  "{lab}"{attrs};')
    for a, b in sorted_edges(g):
        attrs = f' [color="{edge_colors[(a, b)]}"]' if (a, b) in edge_colors else ""
        lines.append(f'  "{labels[a]}" -- "{labels[b]}"{attrs};')
    lines.append("}")
    return "\n".join(lines) + "\n"
