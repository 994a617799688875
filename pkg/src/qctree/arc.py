"""The chain metric of a diameter function on the vertex set V_K.

Distances come from shortest paths in the chain graph: vertices V_K, and one
edge (min e, max e) of weight Delta(e) for every dyadic edge of generation
<= K.  Optimal chains can be taken endpoint-linked, except that the first and
last edge need only contain the two points.  Every weight is 2^-a with a <= K,
so the engine works with integers in units of 2^-K and never touches floating
point.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .dyadic import DiameterTree, DyadicEdge, as_fraction, edges_upto


class ResolutionError(ValueError):
    """A coordinate is not a vertex of V_K."""


@dataclass(frozen=True)
class ChainGraph:
    size: int
    edges: tuple[tuple[int, int, int], ...]

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        adj = [[] for _ in range(self.size)]
        for u, v, w in self.edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        return tuple(tuple(a) for a in adj)


def chain_graph(tree: DiameterTree) -> ChainGraph:
    K = tree.resolution
    edges = []
    for e in edges_upto(K):
        u, v = e.vertex_span(K)
        edges.append((u, v, 1 << (K - tree.exponent(e))))
    return ChainGraph((1 << K) + 1, tuple(edges))


def _dijkstra(adj, src: int) -> list[int]:
    dist = [-1] * len(adj)
    heap = [(0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if dist[u] >= 0:
            continue
        dist[u] = d
        for v, w in adj[u]:
            if dist[v] < 0:
                heapq.heappush(heap, (d + w, v))
    return dist


class QuasiArc:
    """([0,1], d_Delta) sampled on V_K."""

    def __init__(self, tree: DiameterTree):
        self.tree = tree
        self.K = tree.resolution
        self.cells = 1 << self.K
        self.unit = Fraction(1, self.cells)

    def __repr__(self):
        return f"QuasiArc(K={self.K})"

    @property
    def vertices(self) -> list[Fraction]:
        return [self.point(i) for i in range(self.cells + 1)]

    def point(self, i: int) -> Fraction:
        return Fraction(i, self.cells)

    def index(self, x) -> int:
        if isinstance(x, int) and not isinstance(x, bool):
            x = Fraction(x)
        q = as_fraction(x)
        if not 0 <= q <= 1:
            raise ResolutionError(f"{q} lies outside [0, 1]")
        i = q * self.cells
        if i.denominator != 1:
            raise ResolutionError(f"{q} is finer than 2^-{self.K}")
        return int(i)

    @cached_property
    def graph(self) -> ChainGraph:
        return chain_graph(self.tree)

    @cached_property
    def graph_table(self) -> tuple[tuple[int, ...], ...]:
        """All-pairs shortest paths in the chain graph, in units of 2^-K."""
        adj = self.graph.adjacency
        return tuple(tuple(_dijkstra(adj, s)) for s in range(self.cells + 1))

    @cached_property
    def table(self) -> tuple[tuple[int, ...], ...]:
        """All-pairs distances d_Delta in units of 2^-K.

        A chain only has to contain y in its first edge and z in its last, so
        d(y, z) is the least graph distance G(a, b) over a <= y < z <= b.
        """
        g, m = self.graph_table, self.cells + 1
        t = [[0] * m for _ in range(m)]
        for y in range(m):
            for z in range(m - 1, y, -1):
                best = g[y][z]
                if y > 0 and t[y - 1][z] < best:
                    best = t[y - 1][z]
                if z < m - 1 and t[y][z + 1] < best:
                    best = t[y][z + 1]
                t[y][z] = best
        for y in range(m):
            for z in range(y):
                t[y][z] = t[z][y]
        return tuple(tuple(row) for row in t)

    def d(self, i: int, j: int) -> Fraction:
        return Fraction(self.table[i][j], self.cells)

    def distance(self, x, y) -> Fraction:
        return self.d(self.index(x), self.index(y))

    def matrix(self) -> list[list[Fraction]]:
        return [[Fraction(v, self.cells) for v in row] for row in self.table]

    def interval_diameter(self, x, y, brute: bool = False) -> Fraction:
        """diam [x, y]; by endpoints, or by scanning every sampled pair."""
        i, j = sorted((self.index(x), self.index(y)))
        if not brute:
            return self.d(i, j)
        t = self.table
        return Fraction(max(t[a][b] for a in range(i, j + 1) for b in range(a, j + 1)), self.cells)

    @cached_property
    def filtration(self):
        from .filtration import Filtration

        return Filtration(self.tree)


def distance(arc: QuasiArc, x, y) -> Fraction:
    return arc.distance(x, y)


def edge_distance_check(arc: QuasiArc) -> list[tuple[str, Fraction, Fraction]]:
    """Edges with d(min e, max e) != Delta(e), as (id, distance, Delta)."""
    bad = []
    for e in edges_upto(arc.K):
        u, v = e.vertex_span(arc.K)
        d, delta = arc.d(u, v), arc.tree.delta(e)
        if d != delta:
            bad.append((e.id, d, delta))
    return bad


def turning_ratio(order: list[int], dist) -> Fraction:
    """max over u<v of (max d(a,b), u<=a<b<=v) / d(u,v), along ``order``.

    ``dist(i, j)`` is any exact metric on the positions of ``order``.
    """
    m = len(order)
    best = Fraction(0) if m < 2 else None
    # inner[j] holds max d over sub-pairs of order[i..j] for the current i
    inner = [Fraction(0)] * m
    for i in range(m - 1, -1, -1):
        row = [Fraction(0)] * m
        for j in range(i + 1, m):
            dij = dist(order[i], order[j])
            sub = max(dij, row[j - 1], inner[j])
            row[j] = sub
            r = sub / dij
            if best is None or r > best:
                best = r
        inner = row
    return best


def bounded_turning_check(arc: QuasiArc, sample=None) -> Fraction:
    """Maximal turning ratio over a sorted sample of V_K (default: all of it)."""
    order = sorted(set(range(arc.cells + 1) if sample is None else (arc.index(x) for x in sample)))
    t = arc.table
    return turning_ratio(order, lambda a, b: Fraction(t[a][b]))


def lipschitz_constant(values, dist) -> Fraction:
    """max |f(i) - f(j)| / dist(i, j) over pairs i < j."""
    n = len(values)
    if n == 0:
        raise ValueError("empty function")
    best = 0
    for i in range(n):
        fi = values[i]
        for j in range(i + 1, n):
            r = abs(values[j] - fi) / dist(i, j)
            if r > best:
                best = r
    return best


def lipschitz_on_table(values, table, unit: int):
    """Lipschitz constant against an integer distance table in units of 1/unit.

    Rational inputs are compared by integer cross-multiplication; anything
    else falls back to plain division.
    """
    if not values:
        raise ValueError("empty function")
    if not all(isinstance(v, (int, Fraction)) for v in values):
        return lipschitz_constant(values, lambda i, j: table[i][j] / unit)
    q = math.lcm(*(Fraction(v).denominator for v in values))
    p = [int(v * q) for v in values]
    bn, bd = 0, 1
    n = len(p)
    for i in range(n):
        pi, row = p[i], table[i]
        for j in range(i + 1, n):
            num = abs(p[j] - pi)
            if num * bd > bn * row[j]:
                bn, bd = num, row[j]
    return Fraction(bn * unit, bd * q)


def lipschitz_norm(arc: QuasiArc, f, mode: str = "full_pairwise"):
    if len(f) == 0:
        raise ValueError("empty function")
    if len(f) != arc.cells + 1:
        raise ValueError(f"function needs {arc.cells + 1} values, got {len(f)}")
    if mode == "full_pairwise":
        return lipschitz_on_table(list(f), arc.table, arc.cells)
    if mode == "dyadic_local":
        best = 0
        for e in edges_upto(arc.K):
            u, v = e.vertex_span(arc.K)
            r = abs(f[v] - f[u]) / arc.tree.delta(e)
            if r > best:
                best = r
        return best
    raise ValueError(f"unknown mode {mode!r}")


def smallest_common_edge(x: Fraction, y: Fraction, K: int) -> DyadicEdge:
    """The smallest dyadic edge of generation <= K containing both points."""
    e = DyadicEdge(0, 1)
    while e.level < K:
        for c in e.children():
            if c.lo <= min(x, y) and max(x, y) <= c.hi:
                e = c
                break
        else:
            break
    return e
