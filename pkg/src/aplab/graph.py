"""Multigraph on vertex set 1..n, tuned for incremental edge insertion.

Parallel edges are allowed (they occur naturally in the processes simulated
here), loops are not.  Storage is a degree array plus an append-only edge
list; there is deliberately no adjacency matrix so n up to 10**6 stays cheap.
Adjacency structure is materialized on demand for the small-n exact checkers.
"""

from __future__ import annotations

from collections import Counter

__all__ = ["MultiGraph", "argmin_degree", "parse_edge_list", "format_edge_list"]


class MultiGraph:
    __slots__ = ("n", "degree", "edges")

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("need at least one vertex")
        self.n = n
        self.degree = [0] * (n + 1)  # index 0 unused
        self.edges: list[tuple[int, int]] = []

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError(f"loop edge ({u},{v}) rejected")
        if not (1 <= u <= self.n and 1 <= v <= self.n):
            raise ValueError(f"edge ({u},{v}) out of range 1..{self.n}")
        self.edges.append((u, v) if u < v else (v, u))
        self.degree[u] += 1
        self.degree[v] += 1

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def min_degree(self) -> int:
        return min(self.degree[1:])

    def multiplicity(self, u: int, v: int) -> int:
        e = (u, v) if u < v else (v, u)
        return sum(1 for f in self.edges if f == e)

    def edge_set(self) -> set[tuple[int, int]]:
        """Distinct edges, normalized u < v."""
        return set(self.edges)

    def edge_multiset(self) -> Counter:
        return Counter(self.edges)

    def adjacency(self) -> list[set[int]]:
        """Neighbor sets (parallel edges collapsed); index 0 unused."""
        adj: list[set[int]] = [set() for _ in range(self.n + 1)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def copy(self) -> "MultiGraph":
        g = MultiGraph.__new__(MultiGraph)
        g.n = self.n
        g.degree = list(self.degree)
        g.edges = list(self.edges)
        return g

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"MultiGraph(n={self.n}, m={self.num_edges})"


def argmin_degree(g: MultiGraph, exclude: int | None = None) -> int:
    """Lowest-index vertex of minimum degree, optionally skipping one vertex.

    Reference implementation: a plain scan.  Strategies keep incremental
    structures that must agree with this function (tested for equality).
    """
    best_v = 0
    best_d = None
    deg = g.degree
    for v in range(1, g.n + 1):
        if v == exclude:
            continue
        d = deg[v]
        if best_d is None or d < best_d:
            best_d = d
            best_v = v
    if best_v == 0:
        raise ValueError("no admissible vertex")
    return best_v


def format_edge_list(g: MultiGraph) -> str:
    """Plain-text edge list: header line 'n m', then one 'u v' line per edge."""
    lines = [f"{g.n} {g.num_edges}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> MultiGraph:
    """Inverse of format_edge_list.  Raises ValueError on malformed input."""
    lines = [ln for ln in (raw.strip() for raw in text.splitlines()) if ln]
    if not lines:
        raise ValueError("empty edge-list text")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"bad header {lines[0]!r}, expected 'n m'")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError as exc:
        raise ValueError(f"bad header {lines[0]!r}") from exc
    if len(lines) - 1 != m:
        raise ValueError(f"header promises {m} edges, found {len(lines) - 1}")
    g = MultiGraph(n)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"bad edge line {ln!r}") from exc
        g.add_edge(u, v)
    return g
