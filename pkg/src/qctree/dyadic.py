"""Dyadic edges, vertices and dyadic diameter functions.

A diameter function assigns to every dyadic interval a power of two.  The
root gets 1 and each child either keeps its parent's value or halves it, the
two siblings always agreeing.  We store one halving bit per edge of generation
below the resolution ``K``; every step below ``K`` halves.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterator


class ParseError(ValueError):
    """Malformed diameter-tree input."""


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(str(x).strip()) if isinstance(x, str) else Fraction(x)


def dyadic_parts(x) -> tuple[int, int]:
    """Return (numerator, exponent) with x = numerator / 2**exponent in lowest terms."""
    q = as_fraction(x)
    den = q.denominator
    if den & (den - 1):
        raise ValueError(f"{q} is not a dyadic rational")
    return q.numerator, den.bit_length() - 1


@dataclass(frozen=True, order=True)
class DyadicEdge:
    """The closed interval [(j-1)/2^n, j/2^n]."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or not 1 <= self.index <= 1 << self.level:
            raise ValueError(f"no dyadic edge {self.level}/{self.index}")

    @property
    def id(self) -> str:
        return f"{self.level}/{self.index}"

    @classmethod
    def from_id(cls, s: str) -> "DyadicEdge":
        try:
            n, j = s.split("/")
            return cls(int(n), int(j))
        except ValueError as exc:
            raise ParseError(f"bad edge id {s!r}") from exc

    @classmethod
    def containing(cls, lo, hi) -> "DyadicEdge":
        """The edge with endpoints lo < hi, which must be dyadic neighbours."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        width = hi - lo
        if width <= 0 or width.numerator != 1:
            raise ValueError(f"[{lo}, {hi}] is not a dyadic edge")
        n = width.denominator.bit_length() - 1
        j = hi * (1 << n)
        if j.denominator != 1 or width.denominator != 1 << n:
            raise ValueError(f"[{lo}, {hi}] is not a dyadic edge")
        return cls(n, int(j))

    @property
    def lo(self) -> Fraction:
        return Fraction(self.index - 1, 1 << self.level)

    @property
    def hi(self) -> Fraction:
        return Fraction(self.index, 1 << self.level)

    @property
    def length(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    def children(self) -> tuple["DyadicEdge", "DyadicEdge"]:
        n, j = self.level + 1, 2 * self.index
        return DyadicEdge(n, j - 1), DyadicEdge(n, j)

    def parent(self) -> "DyadicEdge | None":
        if self.level == 0:
            return None
        return DyadicEdge(self.level - 1, (self.index + 1) // 2)

    def sibling(self) -> "DyadicEdge | None":
        if self.level == 0:
            return None
        j = self.index + 1 if self.index % 2 else self.index - 1
        return DyadicEdge(self.level, j)

    def ancestor(self, level: int) -> "DyadicEdge":
        if not 0 <= level <= self.level:
            raise ValueError("ancestor level out of range")
        shift = self.level - level
        return DyadicEdge(level, ((self.index - 1) >> shift) + 1)

    def ancestors(self) -> Iterator["DyadicEdge"]:
        """Root first, ending with the edge itself."""
        for g in range(self.level + 1):
            yield self.ancestor(g)

    def contains(self, other: "DyadicEdge") -> bool:
        return other.level >= self.level and other.ancestor(self.level) == self

    def vertex_span(self, K: int) -> tuple[int, int]:
        """Endpoint indices in V_K = {i / 2^K}."""
        if self.level > K:
            raise ValueError(f"edge {self.id} is finer than resolution {K}")
        s = K - self.level
        return (self.index - 1) << s, self.index << s

    def __repr__(self):
        return f"DyadicEdge({self.id})"


ROOT = DyadicEdge(0, 1)


def edges_upto(K: int) -> Iterator[DyadicEdge]:
    for n in range(K + 1):
        for j in range(1, (1 << n) + 1):
            yield DyadicEdge(n, j)


@dataclass(frozen=True)
class DiameterTree:
    """Halving bits for the edges of generation < ``resolution``.

    ``halving[g][j-1]`` is true when the children of edge g/j have half its
    diameter.  The ``normalized`` flag asserts that the root step keeps the
    value 1, i.e. both halves of [0,1] have diameter 1.
    """

    resolution: int
    halving: tuple[tuple[bool, ...], ...]
    normalized: bool = False

    def __post_init__(self):
        K = self.resolution
        if K < 0:
            raise ValueError("resolution must be non-negative")
        if len(self.halving) != K:
            raise ValueError("need one row of halving bits per generation below K")
        for g, row in enumerate(self.halving):
            if len(row) != 1 << g:
                raise ValueError(f"generation {g} needs {1 << g} halving bits")
        if self.normalized and K > 0 and self.halving[0][0]:
            raise ValueError("normalized tree cannot halve at the root (edge 0/1)")

    @classmethod
    def from_bits(cls, K: int, bit, normalized: bool = False) -> "DiameterTree":
        rows = tuple(tuple(bool(bit(DyadicEdge(g, j))) for j in range(1, (1 << g) + 1)) for g in range(K))
        return cls(K, rows, normalized)

    @classmethod
    def from_exponents(cls, K: int, exps, normalized: bool = False) -> "DiameterTree":
        """Build from a callable edge -> a with Delta(edge) = 2^-a."""
        return cls.from_bits(K, lambda e: exps(e.children()[0]) == exps(e) + 1, normalized)

    @cached_property
    def exponents(self) -> tuple[tuple[int, ...], ...]:
        rows = [(0,)]
        for g in range(self.resolution):
            prev, bits = rows[-1], self.halving[g]
            rows.append(tuple(prev[j // 2] + bits[j // 2] for j in range(1 << (g + 1))))
        return tuple(rows)

    def halves(self, e: DyadicEdge) -> bool:
        if e.level >= self.resolution:
            return True
        return self.halving[e.level][e.index - 1]

    def exponent(self, e: DyadicEdge) -> int:
        K = self.resolution
        if e.level <= K:
            return self.exponents[e.level][e.index - 1]
        top = e.ancestor(K)
        return self.exponents[K][top.index - 1] + e.level - K

    def delta(self, e: DyadicEdge) -> Fraction:
        return Fraction(1, 1 << self.exponent(e))

    def slack(self, e: DyadicEdge) -> int:
        """Number of non-halving steps on the root path to e."""
        return e.level - self.exponent(e)

    def with_resolution(self, K: int) -> "DiameterTree":
        """Truncate, or extend with the halving continuation."""
        return DiameterTree.from_bits(K, self.halves, self.normalized)

    def to_json(self) -> dict:
        bits = {e.id: self.halves(e) for e in edges_upto(self.resolution - 1)}
        return {"resolution": self.resolution, "normalized": self.normalized, "halving": bits}


def delta_value(tree: DiameterTree, e: DyadicEdge) -> Fraction:
    return tree.delta(e)


def doubling_index(tree: DiameterTree) -> int:
    """1 + the longest run of consecutive non-halving steps on a root-to-leaf path."""
    longest = 0
    run = {ROOT: 0}
    for g in range(tree.resolution):
        nxt = {}
        for j in range(1, (1 << g) + 1):
            e = DyadicEdge(g, j)
            r = 0 if tree.halves(e) else run[e] + 1
            longest = max(longest, r)
            for c in e.children():
                nxt[c] = r
        run = nxt
    return longest + 1


def generate(kind: str, K: int, *, seed: int = 0, p_halve: float = 0.5, period: int = 2,
             normalized: bool | None = None, path=None) -> DiameterTree:
    """Deterministic diameter-tree generators.

    ``euclidean`` halves everywhere except (when normalized, the default) the
    root step; ``euclidean`` with ``normalized=False`` gives Delta(e) = 2^-gen.
    ``snowflake`` halves on the steps into generations divisible by ``period``.
    ``random`` draws each bit with probability ``p_halve``.
    """
    if kind == "from_file":
        return load_tree(path)
    if K < 1:
        raise ValueError("K must be at least 1")
    if kind == "euclidean":
        norm = True if normalized is None else normalized
        return DiameterTree.from_bits(K, lambda e: not (norm and e.level == 0), norm)
    if kind == "snowflake":
        if period < 1:
            raise ValueError("period must be positive")
        return DiameterTree.from_bits(K, lambda e: (e.level + 1) % period == 0, period > 1)
    if kind == "random":
        if not 0 <= p_halve <= 1:
            raise ValueError("p_halve must lie in [0, 1]")
        rng = random.Random(seed)
        norm = True if normalized is None else normalized
        bits = {e: rng.random() < p_halve for e in edges_upto(K - 1)}
        if norm:
            bits[ROOT] = False
        return DiameterTree.from_bits(K, bits.__getitem__, norm)
    raise ValueError(f"unknown tree kind {kind!r}")


def parse_tree(obj: dict) -> DiameterTree:
    if not isinstance(obj, dict):
        raise ParseError("diameter tree must be a JSON object")
    try:
        K = int(obj["resolution"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError("missing or invalid 'resolution'") from exc
    if K < 0:
        raise ParseError("'resolution' must be non-negative")
    normalized = obj.get("normalized", False)
    if not isinstance(normalized, bool):
        raise ParseError("'normalized' must be a boolean")
    given = {}
    for key, val in (obj.get("halving") or {}).items():
        e = DyadicEdge.from_id(key) if isinstance(key, str) else None
        if e is None:
            raise ParseError(f"bad edge id {key!r}")
        if e.level >= K:
            raise ParseError(f"edge {key} is at or below the resolution {K}")
        if not isinstance(val, bool):
            raise ParseError(f"edge {key}: halving bit must be a boolean")
        given[e] = val
    if normalized and given.get(ROOT):
        raise ParseError("edge 0/1 halves but the tree is marked normalized")
    default = lambda e: not (normalized and e == ROOT)
    return DiameterTree.from_bits(K, lambda e: given.get(e, default(e)), normalized)


def load_tree(path) -> DiameterTree:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_tree(obj)
