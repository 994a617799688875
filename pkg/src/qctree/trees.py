"""Finite metric trees glued from quasiarcs, and tree-like decompositions.

A tree is built from arcs ([0,1], d_Delta) scaled by positive rationals.  Arc
i >= 1 is attached by identifying its coordinate 0 with a sampled point of an
earlier arc, and the distance between two vertices is the sum of within-arc
distances along the unique combinatorial path.  Distances are kept as
integers in a common unit so every comparison below is exact.

Pieces of a decomposition are vertex sets.  All pieces produced here are
subtrees, so two distinct points share at most one piece in a valid
decomposition and every hop of a decomposition path has a well-defined piece.
"""

from __future__ import annotations

import json
import math
import random
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path

from .arc import QuasiArc
from .dyadic import DiameterTree, ParseError, as_fraction, generate, load_tree, parse_tree


class PlanError(ValueError):
    """A glue plan that does not describe a tree."""


class DecompositionError(ValueError):
    """Pieces that do not support the requested construction."""


class ChainError(ValueError):
    """Input that is not a delta-chain."""


class LoopError(ValueError):
    """A sequence that is not a simple decomposition loop."""


class TruncationWarning(UserWarning):
    """Net levels beyond the point where every sampled leaf is already used."""


@dataclass(frozen=True)
class ArcSpec:
    tree: DiameterTree
    scale: Fraction = Fraction(1)


@dataclass(frozen=True)
class Attachment:
    arc: int
    host: int
    at: Fraction


@dataclass(frozen=True)
class GluePlan:
    arcs: tuple[ArcSpec, ...]
    attach: tuple[Attachment, ...] = ()

    def to_json(self) -> dict:
        return {
            "arcs": [{"tree": a.tree.to_json(), "scale": str(a.scale)} for a in self.arcs],
            "attach": [{"arc": t.arc, "host": t.host, "at": str(t.at)} for t in self.attach],
        }


def _tree_from(obj, base: Path | None) -> DiameterTree:
    if isinstance(obj, str):
        path = Path(obj)
        if base is not None and not path.is_absolute():
            path = base / path
        return load_tree(path)
    if isinstance(obj, dict) and "kind" in obj:
        opts = {k: obj[k] for k in ("seed", "p_halve", "period", "normalized") if k in obj}
        return generate(obj["kind"], int(obj.get("resolution", 4)), **opts)
    return parse_tree(obj)


def parse_plan(obj: dict, base: Path | None = None) -> GluePlan:
    """Plan from its JSON form; arc trees may be inline, generator specs or file names."""
    if not isinstance(obj, dict) or not isinstance(obj.get("arcs"), list):
        raise ParseError("glue plan needs an 'arcs' list")
    arcs = []
    for k, a in enumerate(obj["arcs"]):
        if not isinstance(a, dict) or "tree" not in a:
            raise ParseError(f"arc {k}: missing 'tree'")
        try:
            scale = as_fraction(a.get("scale", 1))
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"arc {k}: bad scale {a.get('scale')!r}") from exc
        arcs.append(ArcSpec(_tree_from(a["tree"], base), scale))
    attach = []
    for t in obj.get("attach") or []:
        try:
            attach.append(Attachment(int(t["arc"]), int(t["host"]), as_fraction(t["at"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad attachment {t!r}") from exc
    return GluePlan(tuple(arcs), tuple(attach))


def load_plan(path) -> GluePlan:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_plan(obj, path.parent)


def euclidean_arc(K: int = 3) -> DiameterTree:
    return generate("euclidean", K, normalized=False)


def star_plan(m: int = 3, K: int = 3, scale=1) -> GluePlan:
    """m arms glued at coordinate 0 of the first."""
    arcs = tuple(ArcSpec(euclidean_arc(K), as_fraction(scale)) for _ in range(m))
    return GluePlan(arcs, tuple(Attachment(i, 0, Fraction(0)) for i in range(1, m)))


def chain_plan(m: int = 4, K: int = 3, scale=1) -> GluePlan:
    """m arcs glued end to end."""
    arcs = tuple(ArcSpec(euclidean_arc(K), as_fraction(scale)) for _ in range(m))
    return GluePlan(arcs, tuple(Attachment(i, i - 1, Fraction(1)) for i in range(1, m)))


def random_plan(seed: int, n_arcs: int = 6, K: int = 4) -> GluePlan:
    rng = random.Random(seed)
    arcs, attach = [], []
    for i in range(n_arcs):
        kind = rng.choice(("random", "random", "euclidean", "snowflake"))
        tree = generate(kind, K, seed=rng.randrange(1 << 30))
        scale = Fraction(rng.randint(1, 4), rng.choice((1, 2, 4)))
        arcs.append(ArcSpec(tree, scale))
        if i:
            attach.append(Attachment(i, rng.randrange(i), Fraction(rng.randint(0, 1 << K), 1 << K)))
    return GluePlan(tuple(arcs), tuple(attach))


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


class MetricTree:
    """Vertices are sampled arc points; arc i's point 0 is its host point."""

    def __init__(self, plan: GluePlan):
        n = len(plan.arcs)
        if n == 0:
            raise PlanError("a tree needs at least one arc")
        for k, a in enumerate(plan.arcs):
            if a.scale <= 0:
                raise PlanError(f"arc {k}: scale must be positive")
        hosts: list[tuple[int, int] | None] = [None] * n
        self.arcs = tuple(QuasiArc(a.tree) for a in plan.arcs)
        for t in plan.attach:
            if not 1 <= t.arc < n:
                raise PlanError(f"attachment names nonexistent arc {t.arc}")
            if not 0 <= t.host < t.arc:
                raise PlanError(f"arc {t.arc}: host {t.host} must be an earlier arc")
            if hosts[t.arc] is not None:
                raise PlanError(f"arc {t.arc} is attached twice")
            h = self.arcs[t.host]
            try:
                idx = h.index(t.at)
            except ValueError as exc:
                raise PlanError(f"arc {t.arc}: {exc}") from exc
            hosts[t.arc] = (t.host, idx)
        missing = [i for i in range(1, n) if hosts[i] is None]
        if missing:
            raise PlanError(f"arcs {missing} are not attached")
        self.plan = plan
        self.scales = tuple(a.scale for a in plan.arcs)
        self.hosts = tuple(hosts)
        self.children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for i in range(1, n):
            h, idx = hosts[i]
            self.children[h].append((i, idx))

        self.coords: list[tuple[int, int]] = []
        self._vid: dict[tuple[int, int], int] = {}
        for i, a in enumerate(self.arcs):
            for k in range(a.cells + 1):
                if i and k == 0:
                    self._vid[(i, 0)] = self._vid[hosts[i]]
                    continue
                self._vid[(i, k)] = len(self.coords)
                self.coords.append((i, k))
        self.size = len(self.coords)
        self.unit = math.lcm(*(s.denominator * a.cells for s, a in zip(self.scales, self.arcs)))
        # within-arc distances in the common unit
        self._w = [
            [[t * s.numerator * (self.unit // (s.denominator * a.cells)) for t in row] for row in a.table]
            for s, a in zip(self.scales, self.arcs)
        ]

    def __repr__(self):
        return f"MetricTree(arcs={len(self.arcs)}, vertices={self.size})"

    def vertex(self, arc: int, idx: int) -> int:
        return self._vid[(arc, idx)]

    def vertex_at(self, arc: int, x) -> int:
        return self._vid[(arc, self.arcs[arc].index(x))]

    def label(self, v: int) -> str:
        i, k = self.coords[v]
        return f"{i}:{self.arcs[i].point(k)}"

    def arc_vertices(self, i: int) -> tuple[int, ...]:
        return tuple(self._vid[(i, k)] for k in range(self.arcs[i].cells + 1))

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        out = []
        for i in range(len(self.arcs)):
            vs = self.arc_vertices(i)
            out.extend((vs[k - 1], vs[k]) for k in range(1, len(vs)))
        return tuple(out)

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.size)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.size) if len(self.adjacency[v]) == 1)

    @cached_property
    def _rooted(self) -> tuple[list[int], list[int]]:
        parent, depth = [-1] * self.size, [0] * self.size
        seen, stack = {0}, [0]
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    parent[v], depth[v] = u, depth[u] + 1
                    stack.append(v)
        return parent, depth

    def path(self, u: int, v: int) -> tuple[int, ...]:
        """Vertices of the unique arc from u to v, in order."""
        parent, depth = self._rooted
        left, right = [u], [v]
        while depth[left[-1]] > depth[right[-1]]:
            left.append(parent[left[-1]])
        while depth[right[-1]] > depth[left[-1]]:
            right.append(parent[right[-1]])
        while left[-1] != right[-1]:
            left.append(parent[left[-1]])
            right.append(parent[right[-1]])
        return tuple(left + right[-2::-1])

    @cached_property
    def table(self) -> tuple[tuple[int, ...], ...]:
        """All-pairs path-sum distances in units of 1/unit."""
        return tuple(tuple(self._from(s)) for s in range(self.size))

    def _from(self, s: int) -> list[int]:
        out = [0] * self.size
        a0, c0 = self.coords[s]
        done = set()
        stack = [(a0, c0, 0)]
        while stack:
            a, c, base = stack.pop()
            done.add(a)
            row = self._w[a][c]
            for k in range(self.arcs[a].cells + 1):
                out[self._vid[(a, k)]] = base + row[k]
            for child, idx in self.children[a]:
                if child not in done:
                    stack.append((child, 0, base + row[idx]))
            if self.hosts[a] is not None and self.hosts[a][0] not in done:
                h, idx = self.hosts[a]
                stack.append((h, idx, base + row[0]))
        return out

    def d(self, u: int, v: int) -> Fraction:
        return Fraction(self.table[u][v], self.unit)

    @cached_property
    def diameter(self) -> Fraction:
        return Fraction(max(max(r) for r in self.table), self.unit)

    def bounded_turning(self) -> Fraction:
        """max over u != v of diam(path(u, v)) / d(u, v), computed exactly."""
        t, adj = self.table, self.adjacency
        best_n, best_d = 0, 1
        for u in range(self.size):
            # walk outward from u; diam of path(u, v) grows one vertex at a time
            diam = {u: 0}
            onpath = {u: (u,)}
            stack = [u]
            while stack:
                x = stack.pop()
                for y in adj[x]:
                    if y in diam:
                        continue
                    p = onpath[x] + (y,)
                    ty = t[y]
                    diam[y] = max(diam[x], max(ty[a] for a in p))
                    onpath[y] = p
                    stack.append(y)
                    if diam[y] * best_d > best_n * t[u][y]:
                        best_n, best_d = diam[y], t[u][y]
        return Fraction(best_n, best_d)

    def to_json(self) -> dict:
        return self.plan.to_json()


def build_glued_tree(plan: GluePlan) -> MetricTree:
    return MetricTree(plan)


# ---------------------------------------------------------------- pieces


@dataclass(frozen=True)
class PieceDecomposition:
    pieces: tuple[frozenset[int], ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.pieces:
            raise DecompositionError("no pieces")
        if any(not p for p in self.pieces):
            raise DecompositionError("empty piece")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"X{n}" for n in range(len(self.pieces))))

    @cached_property
    def membership(self) -> dict[int, tuple[int, ...]]:
        m: dict[int, list[int]] = {}
        for n, p in enumerate(self.pieces):
            for v in p:
                m.setdefault(v, []).append(n)
        return {v: tuple(ns) for v, ns in m.items()}

    @cached_property
    def vertices(self) -> frozenset[int]:
        return frozenset().union(*self.pieces)

    @cached_property
    def meets(self) -> tuple[frozenset[int], ...]:
        """X_n intersected with the union of earlier pieces (empty for n = 0)."""
        out, seen = [frozenset()], set(self.pieces[0])
        for p in self.pieces[1:]:
            out.append(frozenset(p & seen))
            seen |= p
        return tuple(out)

    @cached_property
    def branch_points(self) -> frozenset[int]:
        return frozenset(v for m in self.meets[1:] if len(m) == 1 for v in m)

    def piece_of(self, u: int, v: int) -> int | None:
        """Lowest index of a piece holding both points."""
        for n in self.membership.get(u, ()):
            if v in self.pieces[n]:
                return n
        return None


def arc_decomposition(T: MetricTree) -> PieceDecomposition:
    return PieceDecomposition(
        tuple(frozenset(T.arc_vertices(i)) for i in range(len(T.arcs))),
        tuple(f"arc {i}" for i in range(len(T.arcs))),
    )


@dataclass(frozen=True)
class LoopRecord:
    points: tuple[int, ...]
    pieces: tuple[int, ...]
    kind: str


@dataclass(frozen=True)
class TreelikeReport:
    ok: bool
    uncovered: tuple[int, ...]
    uniqueness: tuple[dict, ...]
    loops: tuple[LoopRecord, ...]

    @property
    def nontrivial_loops(self) -> tuple[LoopRecord, ...]:
        return tuple(l for l in self.loops if l.kind == "nontrivial")

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "uncovered": list(self.uncovered),
            "uniqueness_failures": list(self.uniqueness),
            "loops": [{"points": list(l.points), "pieces": list(l.pieces), "kind": l.kind} for l in self.loops],
        }


def classify_loop(decomp: PieceDecomposition, points, pieces) -> str:
    """'trivial' or 'nontrivial' for a simple decomposition loop; raises otherwise."""
    points, pieces = tuple(points), tuple(pieces)
    m = len(pieces)
    if m < 2 or len(points) != m + 1 or points[0] != points[-1]:
        raise LoopError("a loop needs at least two hops and z_0 = z_max")
    for i in range(m):
        if not {points[i], points[i + 1]} <= decomp.pieces[pieces[i]]:
            raise LoopError(f"hop {i + 1} is not inside piece {pieces[i]}")
    if len(set(points[1:])) != m:
        raise LoopError("loop points repeat")
    body = pieces[1:] if pieces[0] == pieces[-1] else pieces
    if len(set(body)) != len(body):
        raise LoopError("loop pieces repeat")
    if m == 2 and decomp.pieces[pieces[0]] == decomp.pieces[pieces[1]]:
        return "trivial"
    return "nontrivial"


def _find_loops(decomp: PieceDecomposition, limit: int = 16) -> list[LoopRecord]:
    """Cycles of the piece/point incidence graph, read back as decomposition loops."""
    shared = sorted(v for v, ns in decomp.membership.items() if len(ns) > 1)
    P = len(decomp.pieces)
    node = {v: P + k for k, v in enumerate(shared)}
    size = P + len(shared)
    uf = list(range(size))
    adj: list[list[int]] = [[] for _ in range(size)]
    found = []
    for v in shared:
        for n in decomp.membership[v]:
            a, b = node[v], n
            ra, rb = _find(uf, a), _find(uf, b)
            if ra != rb:
                uf[ra] = rb
                adj[a].append(b)
                adj[b].append(a)
                continue
            # a and b already connected: the forest path plus this edge is a cycle
            prev = {a: None}
            queue = [a]
            while queue and b not in prev:
                x = queue.pop(0)
                for y in adj[x]:
                    if y not in prev:
                        prev[y] = x
                        queue.append(y)
            cyc = [b]
            while cyc[-1] != a:
                cyc.append(prev[cyc[-1]])
            # cyc runs piece b ... point a; close it through the edge (a, b)
            pts = [x for x in cyc if x >= P]
            pcs = [x for x in cyc if x < P]
            # hop order: pts[0] -pcs[1]- pts[1] ... pts[-1] -pcs[0]- pts[0]
            loop_pts = tuple(shared[x - P] for x in pts) + (shared[pts[0] - P],)
            loop_pcs = tuple(pcs[1:]) + (pcs[0],)
            try:
                kind = classify_loop(decomp, loop_pts, loop_pcs)
            except LoopError:
                kind = "nontrivial"
            found.append(LoopRecord(loop_pts, loop_pcs, kind))
            if len(found) >= limit:
                return found
    return found


def validate_treelike(T: MetricTree | None, decomp: PieceDecomposition) -> TreelikeReport:
    """Branch-point uniqueness for every later piece and a search for non-trivial loops."""
    uncovered = ()
    if T is not None:
        uncovered = tuple(sorted(set(range(T.size)) - decomp.vertices))
    bad = []
    for n, m in enumerate(decomp.meets[1:], start=1):
        if len(m) != 1:
            bad.append({"piece": n, "label": decomp.labels[n], "meets": sorted(m)})
    loops = _find_loops(decomp)
    ok = not bad and not any(l.kind == "nontrivial" for l in loops)
    return TreelikeReport(ok, uncovered, tuple(bad), tuple(loops))


# ---------------------------------------------------------------- paths


@dataclass(frozen=True)
class DecompositionPath:
    points: tuple[int, ...]
    pieces: tuple[int, ...]
    length_ratio: Fraction | None = None

    def hops(self, T: MetricTree) -> list[Fraction]:
        return [T.d(a, b) for a, b in zip(self.points, self.points[1:])]


def is_decomposition_path(decomp: PieceDecomposition, points, pieces) -> bool:
    if len(points) != len(pieces) + 1:
        return False
    for i, n in enumerate(pieces):
        if not {points[i], points[i + 1]} <= decomp.pieces[n]:
            return False
    return all(z in decomp.branch_points for z in points[1:-1])


def minimality_violation(decomp: PieceDecomposition, points, pieces) -> tuple[int, int] | None:
    """First (k0, k1), k0 < k1, with z_{k1} in the piece of hop k0; None if minimal."""
    for k0 in range(1, len(pieces) + 1):
        X = decomp.pieces[pieces[k0 - 1]]
        for k1 in range(k0 + 1, len(points)):
            if points[k1] in X:
                return k0, k1
    return None


def is_minimal(decomp: PieceDecomposition, path: DecompositionPath) -> bool:
    return minimality_violation(decomp, path.points, path.pieces) is None


def induced_path(T: MetricTree, decomp: PieceDecomposition, x: int, y: int) -> DecompositionPath:
    """Split the arc [x, y] where the piece holding consecutive tree edges changes."""
    P = T.path(x, y)
    if len(P) == 1:
        return DecompositionPath((x,), ())
    labels = []
    for a, b in zip(P, P[1:]):
        n = decomp.piece_of(a, b)
        if n is None:
            raise DecompositionError(f"tree edge {T.label(a)} - {T.label(b)} lies in no piece")
        labels.append(n)
    points, pieces = [P[0]], [labels[0]]
    for k in range(1, len(labels)):
        if labels[k] != labels[k - 1]:
            points.append(P[k])
            pieces.append(labels[k])
    points.append(P[-1])
    return DecompositionPath(tuple(points), tuple(pieces))


def decomposition_path(T: MetricTree, decomp: PieceDecomposition, x: int, y: int,
                       mode: str = "minimal", C=None) -> DecompositionPath:
    path = induced_path(T, decomp, x, y)
    if mode not in ("minimal", "short"):
        raise ValueError(f"unknown mode {mode!r}")
    if x == y:
        return path
    ratio = sum(path.hops(T), Fraction(0)) / T.d(x, y)
    if mode == "short" and C is not None and ratio > C:
        raise DecompositionError(f"path sum is {ratio} times d(x, y), above C = {C}")
    return DecompositionPath(path.points, path.pieces, ratio)


@dataclass(frozen=True)
class GeometricConstants:
    c2: Fraction
    c3: Fraction
    pairs: int
    worst_c2: tuple[int, int] | None = None
    worst_c3: tuple[int, int] | None = None

    @property
    def C(self) -> Fraction:
        return max(self.c2, self.c3)


def geometric_constants(T: MetricTree, decomp: PieceDecomposition, pairs=None) -> GeometricConstants:
    """Measured constants of the max-hop bound for minimal paths and the sum bound for short ones."""
    if pairs is None:
        vs = sorted(decomp.vertices)
        pairs = [(a, b) for i, a in enumerate(vs) for b in vs[i + 1:]]
    pairs = [(a, b) for a, b in pairs if a != b]
    if not pairs:
        raise ValueError("no pairs of distinct points")
    t = T.table
    c2, c3, w2, w3 = Fraction(0), Fraction(0), None, None
    for a, b in pairs:
        p = induced_path(T, decomp, a, b)
        hops = [t[u][v] for u, v in zip(p.points, p.points[1:])]
        r2, r3 = Fraction(t[a][b], max(hops)), Fraction(sum(hops), t[a][b])
        if r2 > c2:
            c2, w2 = r2, (a, b)
        if r3 > c3:
            c3, w3 = r3, (a, b)
    return GeometricConstants(c2, c3, len(pairs), w2, w3)


# ---------------------------------------------------------------- DEBV


@dataclass(frozen=True)
class DEBVPiece:
    n: int
    j: int
    vertices: frozenset[int]
    attach: int | None

    @property
    def label(self) -> str:
        return f"K_{self.n}^{self.j}"


@dataclass(frozen=True)
class DEBVDecomposition:
    pieces: tuple[DEBVPiece, ...]
    nets: tuple[tuple[int, ...], ...]
    depth: int
    saturated_at: int | None
    anomalies: tuple[str, ...] = ()

    @cached_property
    def decomposition(self) -> PieceDecomposition:
        return PieceDecomposition(tuple(p.vertices for p in self.pieces), tuple(p.label for p in self.pieces))


def saturation_depth(T: MetricTree) -> int:
    """Least n at which the greedy nets contain every leaf."""
    L = T.leaves
    t = T.table
    diam = max(max(r) for r in t)
    gap = min(t[a][b] for i, a in enumerate(L) for b in L[i + 1:])
    n = 1
    while gap << n < diam:
        n += 1
    return n


def _nets(T: MetricTree, depth: int) -> list[list[int]]:
    t = T.table
    diam = max(max(r) for r in t)
    nets, cur = [], []
    for n in range(1, depth + 1):
        cur = list(cur)
        for v in T.leaves:
            # normalized distance d / diam at least 2^-n
            if v not in cur and all(t[v][q] << n >= diam for q in cur):
                cur.append(v)
        nets.append(cur)
    return nets


def debv(T: MetricTree, depth: int) -> DEBVDecomposition:
    """Pieces K_n^j from nested greedy nets on the leaves."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if len(T.leaves) < 2:
        raise DecompositionError("need at least two leaves")
    sat = saturation_depth(T)
    if depth > sat:
        warnings.warn(f"nets contain every sampled leaf from level {sat}; levels {sat + 1}..{depth} are empty",
                      TruncationWarning, stacklevel=2)
    nets = _nets(T, depth)
    pieces, anomalies = [], []
    prev_edges: set[tuple[int, int]] = set()
    prev_vertices: set[int] = set()
    for n, net in enumerate(nets, start=1):
        edges = set()
        for q in net[1:]:
            p = T.path(net[0], q)
            edges.update((min(a, b), max(a, b)) for a, b in zip(p, p[1:]))
        new = sorted(edges - prev_edges)
        if n == 1:
            verts = frozenset(v for e in edges for v in e)
            pieces.append(DEBVPiece(1, 1, verts, None))
        elif new:
            # closure components: new edges sharing any vertex belong together
            uf = {}
            for a, b in new:
                uf.setdefault(a, a)
                uf.setdefault(b, b)
            def root(x):
                while uf[x] != x:
                    uf[x] = uf[uf[x]]
                    x = uf[x]
                return x
            for a, b in new:
                uf[root(a)] = root(b)
            groups: dict[int, set[int]] = {}
            for v in uf:
                groups.setdefault(root(v), set()).add(v)
            for j, g in enumerate(sorted(groups.values(), key=min), start=1):
                meet = g & prev_vertices
                if len(meet) != 1:
                    anomalies.append(f"K_{n}^{j} meets T_{n - 1} in {len(meet)} points")
                pieces.append(DEBVPiece(n, j, frozenset(g), min(meet) if meet else None))
        prev_edges = edges
        prev_vertices = {v for e in edges for v in e}
    return DEBVDecomposition(tuple(pieces), tuple(tuple(x) for x in nets), depth,
                             sat if sat <= depth else None, tuple(anomalies))


# ---------------------------------------------------------------- arcs of a subtree


@dataclass(frozen=True)
class SubArc:
    vertices: tuple[int, ...]
    attach: int


def subtree_arcs(T: MetricTree, piece, p: int) -> list[SubArc]:
    """Split a subtree into arcs; the first holds p, each later one meets the earlier ones once."""
    K = frozenset(piece)
    if p not in K:
        raise ValueError("p must lie in the subtree")
    deg = {v: sum(1 for w in T.adjacency[v] if w in K) for v in K}
    leaves = sorted(v for v in K if deg[v] <= 1)
    if len(leaves) < 2:
        raise DecompositionError("a subtree with fewer than two points has no arcs")
    covering = [T.path(leaves[0], l) for l in leaves[1:]]
    first = next(i for i, c in enumerate(covering) if p in c)
    c = covering[first]
    k = c.index(p)
    out = [SubArc(part, p) for part in (c[: k + 1], c[k:]) if len(part) > 1]
    covered = set(c)
    for i, c in enumerate(covering):
        if i == first:
            continue
        # the covered part of c is a prefix starting at leaves[0]
        k = 0
        while k + 1 < len(c) and c[k + 1] in covered:
            k += 1
        if k + 1 < len(c):
            out.append(SubArc(c[k:], c[k]))
            covered.update(c[k:])
    if covered != set(K):
        raise DecompositionError("covering arcs miss part of the subtree")
    return out


# ---------------------------------------------------------------- chain lifting


@dataclass(frozen=True)
class ChainLift:
    chain: tuple[int, ...]
    path_index: tuple[int, ...]
    path: DecompositionPath
    certificate: tuple[int, ...]
    prunes: tuple[str, ...]
    C: Fraction
    delta: Fraction

    def check(self, T: MetricTree, decomp: PieceDecomposition, original) -> dict:
        """Conclusions (1) to (3) plus the C*delta chain bound, each as a boolean."""
        bound = self.C * self.delta
        step = all(T.d(a, b) <= bound for a, b in zip(self.chain, self.chain[1:]))
        near = all(min(T.d(w, z) for z in original) <= bound for w in self.chain)
        cert = True
        for k, n in enumerate(self.certificate, start=1):
            seg = self.chain[self.path_index[k - 1]: self.path_index[k] + 1]
            cert &= set(seg) <= decomp.pieces[n]
        pts = tuple(self.chain[j] for j in self.path_index)
        return {
            "chain_step": step,
            "neighborhood": near,
            "path_points_match": pts == self.path.points,
            "decomposition_path": is_decomposition_path(decomp, self.path.points, self.path.pieces),
            "minimal": is_minimal(decomp, self.path),
            "certificate": cert,
        }


def _hat(decomp: PieceDecomposition, acc: list, nxt: list, last: bool) -> list:
    """acc ^* nxt on lists of (point, chain position).

    The junction points (the end of ``acc`` and the start of ``nxt``, merged
    when they are the same chain position) are dropped when they are not branch points and their
    neighbours share a piece.  The first point of the whole path and, when
    ``last`` is set, the final one are never dropped.
    """
    if acc[-1] == nxt[0]:
        out, cands = acc + nxt[1:], [len(acc) - 1]
    elif acc[-1][0] == nxt[0][0]:
        # a revisit, not a shared endpoint: keep both so procedure A cuts the excursion
        return acc + nxt
    else:
        out, cands = acc + nxt, [len(acc) - 1, len(acc)]
    removed = 0
    for c in cands:
        k = c - removed
        if k == 0 or (last and k == len(out) - 1) or k >= len(out) - 1:
            continue
        if out[k][0] in decomp.branch_points:
            continue
        if decomp.piece_of(out[k - 1][0], out[k + 1][0]) is not None:
            del out[k]
            removed += 1
    return out


def _labels(decomp: PieceDecomposition, pts) -> list[int]:
    out = []
    for a, b in zip(pts, pts[1:]):
        n = decomp.piece_of(a, b)
        if n is None:
            raise DecompositionError(f"points {a} and {b} share no piece")
        out.append(n)
    return out


def chain_lift(T: MetricTree, decomp: PieceDecomposition, chain, delta, C=None) -> ChainLift:
    """Lift a delta-chain to a chain carrying a minimal decomposition path, then prune."""
    z = list(chain)
    delta = as_fraction(delta)
    if not z:
        raise ChainError("empty chain")
    for i in range(1, len(z)):
        if T.d(z[i - 1], z[i]) > delta:
            raise ChainError(f"hop {i}: d({T.label(z[i - 1])}, {T.label(z[i])}) = {T.d(z[i - 1], z[i])} > {delta}")
    if C is None:
        C = geometric_constants(T, decomp).C
    first = lambda v: decomp.membership[v][0]

    # runs of consecutive points in one piece, switching at the first exit
    cuts, m = [], first(z[0])
    for i in range(1, len(z)):
        if z[i] not in decomp.pieces[m]:
            cuts.append(i)
            m = first(z[i])
    if not cuts:
        # one piece holds the whole chain: nothing to lift
        n = decomp.piece_of(z[0], z[-1])
        path = DecompositionPath((z[0], z[-1]), (n,))
        return ChainLift(tuple(z), (0, len(z) - 1), path, (m,), (), as_fraction(C), delta)
    bounds = [0] + cuts + [len(z)]
    w: list[int] = []

    def push(seq):
        for k, v in enumerate(seq):
            if not (k == 0 and w and w[-1] == v):
                w.append(v)

    push(z[: bounds[1]])
    hat = [(z[0], 0)]
    for l, i in enumerate(cuts, start=1):
        v = induced_path(T, decomp, z[i - 1], z[i]).points
        start = len(w) - 1
        push(v)
        hat = _hat(decomp, hat, [(p, start + k) for k, p in enumerate(v)], False)
        push(z[i: bounds[l + 1]])
    hat = _hat(decomp, hat, [(z[-1], len(w) - 1)], True)
    pts = [p for p, _ in hat]
    idx = [j for _, j in hat]
    if len(pts) == 1:
        pts, idx = pts * 2, [0, len(w) - 1]

    prunes = []
    while True:
        dup = next(((k0, k1) for k0 in range(len(pts)) for k1 in range(k0 + 1, len(pts))
                    if pts[k0] == pts[k1]), None)
        if dup is not None:
            # procedure A: cut the excursion; w[idx[k0]] equals w[idx[k1]]
            k0, k1 = dup
            lo, hi = idx[k0], idx[k1]
            del w[lo + 1: hi + 1]
            shift = hi - lo
            pts = pts[: k0 + 1] + pts[k1 + 1:]
            idx = idx[: k0 + 1] + [j - shift for j in idx[k1 + 1:]]
            prunes.append("A")
            continue
        labels = _labels(decomp, pts)
        bad = minimality_violation(decomp, pts, labels)
        if bad is None:
            break
        k0, k1 = bad
        if k1 != k0 + 1 or decomp.pieces[labels[k0]] != decomp.pieces[labels[k0 - 1]]:
            raise DecompositionError(f"non-trivial loop through hops {k0}..{k1}; pieces are not tree-like")
        del pts[k0]
        del idx[k0]
        prunes.append("B")
    labels = _labels(decomp, pts)
    cert = []
    for k, n in enumerate(labels, start=1):
        seg = set(w[idx[k - 1]: idx[k] + 1])
        cands = [m for m in range(len(decomp.pieces)) if seg <= decomp.pieces[m]]
        cert.append(n if n in cands else (cands[0] if cands else n))
    path = DecompositionPath(tuple(pts), tuple(labels))
    return ChainLift(tuple(w), tuple(idx), path, tuple(cert), tuple(prunes), as_fraction(C), delta)


# ---------------------------------------------------------------- composite


@dataclass(frozen=True)
class ArcDecomposition:
    debv: DEBVDecomposition
    index: tuple[tuple[int, int, int], ...]
    arcs: tuple[SubArc, ...]
    decomposition: PieceDecomposition
    report: TreelikeReport
    measured: GeometricConstants
    c_debv: Fraction
    c_arcs: Fraction
    c1: Fraction
    sum_ratio: Fraction
    max_ratio: Fraction

    @property
    def predicted(self) -> Fraction:
        return self.c_debv * self.c_arcs

    def to_json(self) -> dict:
        return {
            "pieces": [p.label for p in self.debv.pieces],
            "arcs": [{"index": list(i), "length": len(a.vertices), "attach": a.attach}
                     for i, a in zip(self.index, self.arcs)],
            "treelike": self.report.to_json(),
            "C2": str(self.measured.c2),
            "C3": str(self.measured.c3),
            "C_measured": str(self.measured.C),
            "C_debv": str(self.c_debv),
            "C_arcs": str(self.c_arcs),
            "C_predicted": str(self.predicted),
            "C1": str(self.c1),
            "subarc_sum_ratio": str(self.sum_ratio),
            "subarc_max_ratio": str(self.max_ratio),
        }


def subarc_constant(T: MetricTree, decomp: PieceDecomposition, pairs=None) -> tuple[Fraction, Fraction]:
    """max of sum diam(gamma_i) / diam(gamma) and of diam(gamma) / max diam(gamma_i).

    Each gamma_i is an arc in a 1-bounded turning tree, so its diameter is the
    distance between its endpoints.
    """
    g = geometric_constants(T, decomp, pairs)
    return g.c3, g.c2


def full_arc_decomposition(T: MetricTree, depth: int | None = None) -> ArcDecomposition:
    depth = saturation_depth(T) if depth is None else depth
    D = debv(T, depth)
    dd = D.decomposition
    arcs, index = [], []
    c_arcs = Fraction(1)
    base = D.nets[0][0]
    for P in D.pieces:
        p = P.attach if P.attach is not None else base
        sub = subtree_arcs(T, P.vertices, p)
        for m, a in enumerate(sub, start=1):
            arcs.append(a)
            index.append((P.n, P.j, m))
        local = PieceDecomposition(tuple(frozenset(a.vertices) for a in sub))
        if len(P.vertices) > 1:
            c_arcs = max(c_arcs, geometric_constants(T, local).C)
    decomp = PieceDecomposition(
        tuple(frozenset(a.vertices) for a in arcs),
        tuple(f"gamma_{n},{m}^{j}" for n, j, m in index),
    )
    report = validate_treelike(None, decomp)
    measured = geometric_constants(T, decomp)
    c_debv = geometric_constants(T, dd)
    sum_ratio, max_ratio = subarc_constant(T, dd)
    return ArcDecomposition(D, tuple(index), tuple(arcs), decomp, report, measured,
                            c_debv.C, c_arcs, max(sum_ratio, max_ratio), sum_ratio, max_ratio)
