"""The filtration A_n, its atoms, diffuse parts and approximating metrics.

An edge e lies in A_n when Delta(e) <= 2^(n - gen e).  Writing Delta(e) = 2^-a,
this says gen(e) - a <= n, and gen(e) - a is the number of non-halving steps
on the root path to e.  So membership is monotone along descent and every
step below the resolution keeps the count fixed.

The measure H^1_n of a generation-K cell c is Delta_n(c): below K every step
of Delta_n halves, so the Delta_n-sums over descendants of c are constant in
the depth and the limit is reached at c itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .arc import QuasiArc
from .dyadic import ROOT, DiameterTree, DyadicEdge, edges_upto


def in_An(tree: DiameterTree, n: int, e: DyadicEdge) -> bool:
    return tree.exponent(e) >= e.level - n


@dataclass(frozen=True)
class FiltrationLevel:
    n: int
    resolution: int
    atoms: tuple[DyadicEdge, ...]
    diffuse_cells: frozenset[int]

    @property
    def active(self) -> bool:
        return bool(self.atoms)

    @cached_property
    def spans(self) -> tuple[tuple[int, int], ...]:
        """Atom endpoints as indices into V_K."""
        return tuple(a.vertex_span(self.resolution) for a in self.atoms)

    @cached_property
    def cell_atom(self) -> tuple[int | None, ...]:
        owner = [None] * (1 << self.resolution)
        for k, (lo, hi) in enumerate(self.spans):
            for c in range(lo, hi):
                owner[c] = k
        return tuple(owner)

    @cached_property
    def diff_points(self) -> frozenset[int]:
        pts = set()
        for c in self.diffuse_cells:
            pts.update((c, c + 1))
        for lo, hi in self.spans:
            pts.update((lo, hi))
        return frozenset(pts)

    @property
    def atom_measure(self) -> Fraction:
        return sum((a.length for a in self.atoms), Fraction(0))

    @property
    def diffuse_measure(self) -> Fraction:
        return Fraction(len(self.diffuse_cells), 1 << self.resolution)

    def atom_containing(self, e: DyadicEdge) -> DyadicEdge | None:
        for a in self.atoms:
            if a.contains(e):
                return a
        return None


def atoms(tree: DiameterTree, n: int) -> FiltrationLevel:
    if n < 0:
        raise ValueError("level must be non-negative")
    K = tree.resolution
    found, diffuse = [], set()
    stack = [ROOT]
    while stack:
        e = stack.pop()
        if e.level == K:
            # every later step halves, so e and all descendants stay in A_n
            diffuse.add(e.index - 1)
            continue
        kids = e.children()
        if in_An(tree, n, kids[0]):
            stack.extend(reversed(kids))
        else:
            found.append(e)
    found.sort(key=lambda a: a.lo)
    return FiltrationLevel(n, K, tuple(found), frozenset(diffuse))


def n_max(tree: DiameterTree) -> int:
    return max(tree.slack(e) for e in edges_upto(tree.resolution))


def approx_tree(tree: DiameterTree, n: int) -> DiameterTree:
    """Delta_n as a diameter tree of the same resolution."""

    def exp_n(e):
        return tree.exponent(e) if in_An(tree, n, e) else e.level - n

    return DiameterTree.from_exponents(tree.resolution, exp_n)


@dataclass(frozen=True)
class ApproxMetric:
    n: int
    tree: DiameterTree
    arc: QuasiArc
    cell_measure: tuple[Fraction, ...]

    def d(self, i: int, j: int) -> Fraction:
        return self.arc.d(i, j)


def approx_metric(tree: DiameterTree, n: int) -> ApproxMetric:
    if n < 0:
        raise ValueError("level must be non-negative")
    tn = approx_tree(tree, n)
    K = tree.resolution
    measure = tuple(tn.delta(DyadicEdge(K, c + 1)) for c in range(1 << K))
    return ApproxMetric(n, tn, QuasiArc(tn), measure)


class Filtration:
    """Lazily cached levels and approximating metrics of one tree."""

    def __init__(self, tree: DiameterTree):
        self.tree = tree
        self.n_max = n_max(tree)
        self._levels: dict[int, FiltrationLevel] = {}
        self._metrics: dict[int, ApproxMetric] = {}

    def level(self, n: int) -> FiltrationLevel:
        n = min(n, self.n_max)
        if n not in self._levels:
            self._levels[n] = atoms(self.tree, n)
        lv = self._levels[n]
        return lv

    def metric(self, n: int) -> ApproxMetric:
        n = min(n, self.n_max)
        if n not in self._metrics:
            self._metrics[n] = approx_metric(self.tree, n)
        return self._metrics[n]


def ru_decomposition(tree: DiameterTree, n_range=None) -> dict:
    """Per-level measures of the atomic and diffuse parts.

    The remainder at level n is the set of cells covered by atoms at every
    level m <= n; its limit is the purely unrectifiable part.
    """
    top = n_max(tree)
    levels = list(range(top + 1) if n_range is None else n_range)
    if any(n < 0 or n > top for n in levels):
        raise ValueError(f"levels must lie in [0, {top}]")
    K = tree.resolution
    rows, nested, monotone = [], True, True
    covered = set(range(1 << K))
    prev = None
    for n in range(max(levels, default=-1) + 1):
        lv = atoms(tree, n)
        cells = {c for lo, hi in lv.spans for c in range(lo, hi)}
        covered &= cells
        if prev is not None:
            nested &= all(prev.atom_containing(a) is not None for a in lv.atoms)
            monotone &= prev.diffuse_cells <= lv.diffuse_cells
        if n in levels:
            rows.append({
                "n": n,
                "atoms": len(lv.atoms),
                "atom_measure": lv.atom_measure,
                "diffuse_measure": lv.diffuse_measure,
                "remainder_measure": Fraction(len(covered), 1 << K),
            })
        prev = lv
    empty = next((r["n"] for r in rows if r["remainder_measure"] == 0), None)
    return {
        "n_max": top,
        "levels": rows,
        "nested": nested,
        "diffuse_monotone": monotone,
        "remainder_empty_from": empty,
        "remainder_measure": rows[-1]["remainder_measure"] if rows else Fraction(1),
    }


def diff_witness(tree: DiameterTree, e: DyadicEdge) -> tuple[int, DyadicEdge]:
    """(k, a) with a in At_k, e strictly inside a, and e's endpoints in Diff_{k+1}."""
    if e.level == 0:
        raise ValueError("the root edge has no witness")
    K = tree.resolution
    hits = []
    for a in e.ancestors():
        # an edge is an atom of At_s for s = its slack exactly when its step does not halve
        if a.level < K and not tree.halves(a):
            hits.append((tree.slack(a), a))
    if not hits:
        raise ValueError(f"no atom contains {e.id}; is the tree normalized?")
    k, a = max(hits)
    if a != e:
        return k, a
    if k == 0:
        raise ValueError(f"{e.id} is the only atom above itself")
    return k - 1, atoms(tree, k - 1).atom_containing(e)
