"""Gluing Lipschitz data along a tree-like decomposition.

Functions on a finite tree are lists indexed by vertex.  Piece families are
dicts vertex -> value, one per piece, vanishing at the piece's branch point
(the basepoint for piece 0).  Lipschitz norms are exact; lightness and the
l^p embedding are measured in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse.csgraph import connected_components

from .arc import QuasiArc, lipschitz_on_table
from .dyadic import as_fraction
from .trees import MetricTree, PieceDecomposition, geometric_constants, induced_path


class FamilyError(ValueError):
    """A piece family that does not vanish at its basepoints."""


def basepoints(decomp: PieceDecomposition, base: int | None = None) -> list[int]:
    """p_0 (default: least vertex of X_0) followed by the branch points p_n."""
    p0 = min(decomp.pieces[0]) if base is None else base
    if p0 not in decomp.pieces[0]:
        raise ValueError("basepoint must lie in the first piece")
    out = [p0]
    for n, m in enumerate(decomp.meets[1:], start=1):
        if len(m) != 1:
            raise FamilyError(f"piece {n} has no unique branch point")
        out.append(next(iter(m)))
    return out


def lip_norm(T: MetricTree, f, verts=None) -> Fraction:
    """Exact Lipschitz constant of f on ``verts`` (default: all vertices)."""
    if verts is None:
        return lipschitz_on_table(list(f), T.table, T.unit)
    vs = sorted(verts)
    if len(vs) < 2:
        return Fraction(0)
    sub = [[T.table[a][b] for b in vs] for a in vs]
    return lipschitz_on_table([f[v] for v in vs], sub, T.unit)


def phi(T: MetricTree, decomp: PieceDecomposition, f, base: int | None = None) -> list[dict]:
    ps = basepoints(decomp, base)
    if f[ps[0]] != 0:
        raise FamilyError("f must vanish at the basepoint")
    return [{v: f[v] - f[p] for v in X} for X, p in zip(decomp.pieces, ps)]


def psi(T: MetricTree, decomp: PieceDecomposition, family, base: int | None = None) -> list:
    ps = basepoints(decomp, base)
    if len(family) != len(decomp.pieces):
        raise FamilyError(f"need {len(decomp.pieces)} members, got {len(family)}")
    g: dict[int, object] = {}
    for n, (X, p, fn) in enumerate(zip(decomp.pieces, ps, family)):
        if set(fn) != set(X):
            raise FamilyError(f"member {n} is not defined on exactly its piece")
        if fn[p] != 0:
            raise FamilyError(f"member {n} is {fn[p]} at its basepoint, not 0")
        off = 0 if n == 0 else g[p]
        for v in X:
            if v not in g:
                g[v] = off + fn[v]
    if len(g) != T.size:
        raise FamilyError("pieces do not cover the tree")
    return [g[v] for v in range(T.size)]


def random_family(T: MetricTree, decomp: PieceDecomposition, rng, denom: int = 8, span: int = 8) -> list[dict]:
    ps = basepoints(decomp)
    return [
        {v: (Fraction(0) if v == p else Fraction(rng.randint(-span, span), denom)) for v in X}
        for X, p in zip(decomp.pieces, ps)
    ]


def family_norm(T: MetricTree, decomp: PieceDecomposition, family) -> Fraction:
    norms = []
    for X, fn in zip(decomp.pieces, family):
        vs = sorted(X)
        vals = [Fraction(0)] * T.size
        for v in vs:
            vals[v] = fn[v]
        norms.append(lip_norm(T, vals, vs))
    return max(norms)


# ---------------------------------------------------------------- lightness


def tree_matrix(T: MetricTree) -> np.ndarray:
    return np.array(T.table, dtype=float) / T.unit


def arc_matrix(arc: QuasiArc, scale=1) -> np.ndarray:
    return np.array(arc.table, dtype=float) / arc.cells * float(scale)


def circle_matrix(m: int, circumference=1.0) -> np.ndarray:
    """Intrinsic metric on m equally spaced points of a circle."""
    k = np.arange(m)
    gap = np.abs(k[:, None] - k[None, :])
    return np.minimum(gap, m - gap) * (float(circumference) / m)


@dataclass(frozen=True)
class LightnessRow:
    r: float
    windows: int
    max_diameter: float
    ratio: float


@dataclass(frozen=True)
class LightnessReport:
    rows: tuple[LightnessRow, ...]
    q_hat: float
    slack: float
    mesh: float

    def to_json(self) -> dict:
        return {
            "Q_hat": self.q_hat,
            "slack": self.slack,
            "mesh": self.mesh,
            "rows": [{"r": r.r, "windows": r.windows, "max_diameter": r.max_diameter, "ratio": r.ratio}
                     for r in self.rows],
        }


def lightness_estimate(dist, f, r_grid, tol: float = 1e-12) -> LightnessReport:
    """Largest r-component diameter of preimages of windows [a, a + r], over r.

    Windows slide over the range of f with stride r/2.
    """
    r_grid = [float(as_fraction(r)) for r in r_grid]
    if not r_grid:
        raise ValueError("empty radius grid")
    if any(r <= 0 for r in r_grid):
        raise ValueError("radii must be positive")
    D = np.asarray(dist, dtype=float)
    vals = np.array([float(v) for v in f])
    if D.shape != (len(vals), len(vals)):
        raise ValueError("distance matrix and function disagree in size")
    off = D + np.diag(np.full(len(vals), np.inf))
    mesh = float(off.min(axis=1).max()) if len(vals) > 1 else 0.0
    lo, hi = vals.min(), vals.max()
    rows = []
    for r in r_grid:
        step = r / 2
        a = np.floor(lo / step) * step
        worst, count = 0.0, 0
        while a <= hi + tol:
            idx = np.nonzero((vals >= a - tol) & (vals <= a + r + tol))[0]
            a += step
            if len(idx) < 2:
                count += bool(len(idx))
                continue
            count += 1
            sub = D[np.ix_(idx, idx)]
            n, lab = connected_components(sub <= r + tol, directed=False)
            for c in range(n):
                mem = lab == c
                if mem.sum() > 1:
                    worst = max(worst, float(sub[np.ix_(mem, mem)].max()))
        rows.append(LightnessRow(r, count, worst, worst / r))
    q = max(row.ratio for row in rows)
    return LightnessReport(tuple(rows), q, 2 * mesh / min(r_grid), mesh)


def basepoint_coordinate(arc: QuasiArc, scale=1) -> list[Fraction]:
    """x -> d(0, x), 1-Lipschitz; light only when d(0, .) does not stall."""
    s = as_fraction(scale)
    return [s * arc.d(0, k) for k in range(arc.cells + 1)]


def circle_wrap(arc: QuasiArc, circumference, scale=1) -> list[Fraction]:
    """d(0, x) wrapped onto a circle, then distance to the basepoint of the circle."""
    c = as_fraction(circumference)
    out = []
    for u in basepoint_coordinate(arc, scale):
        w = u - c * (u // c)
        out.append(min(w, c - w))
    return out


@dataclass(frozen=True)
class LightGlue:
    glued: list
    L: Fraction
    Q: float
    C: Fraction
    predicted: float
    measured: LightnessReport

    @property
    def ok(self) -> bool:
        return self.measured.q_hat <= self.predicted + self.measured.slack

    def to_json(self) -> dict:
        return {"L": str(self.L), "Q": self.Q, "C": str(self.C), "Q_predicted": self.predicted,
                "Q_measured": self.measured.q_hat, "slack": self.measured.slack, "ok": self.ok,
                "lightness": self.measured.to_json()}


def piece_lightness(T: MetricTree, X, fn, r_grid) -> LightnessReport:
    vs = sorted(X)
    D = tree_matrix(T)[np.ix_(vs, vs)]
    return lightness_estimate(D, [fn[v] for v in vs], r_grid)


def glue_light(T: MetricTree, decomp: PieceDecomposition, family, r_grid, L=None, Q=None, C=None) -> LightGlue:
    """Glue per-piece maps and compare measured lightness with C Q (1 + 2 L C^2).

    L and Q default to the measured per-piece values; both are clamped to at
    least 1 as the bound requires.
    """
    glued = psi(T, decomp, family)
    if L is None:
        L = family_norm(T, decomp, family)
    if Q is None:
        Q = max(piece_lightness(T, X, fn, r_grid).q_hat for X, fn in zip(decomp.pieces, family))
    if C is None:
        C = geometric_constants(T, decomp).C
    L, Q = max(as_fraction(L), Fraction(1)), max(float(Q), 1.0)
    Cf = float(C)
    predicted = Cf * Q * (1 + 2 * float(L) * Cf * Cf)
    measured = lightness_estimate(tree_matrix(T), glued, r_grid)
    return LightGlue(glued, L, Q, as_fraction(C), predicted, measured)


def oriented_family(T: MetricTree, decomp: PieceDecomposition, signs=None) -> list[dict]:
    """Per-piece distance to the branch point, optionally negated per piece."""
    ps = basepoints(decomp)
    signs = signs or [1] * len(ps)
    return [{v: s * T.d(p, v) for v in X} for X, p, s in zip(decomp.pieces, ps, signs)]


# ---------------------------------------------------------------- embedding


@dataclass(frozen=True)
class Embedding:
    p: float
    blocks: tuple[tuple[int, ...], ...]
    coords: np.ndarray
    lip: float
    colip: float
    C: Fraction
    L: float
    max_block_ok: bool
    tol: float = 1e-12
    extra: dict = field(default_factory=dict)

    @property
    def distortion(self) -> float:
        return self.lip * self.colip

    @property
    def bound(self) -> float:
        return float(self.C) * self.L

    @property
    def ok(self) -> bool:
        b = self.bound * (1 + self.tol)
        return self.lip <= b and self.colip <= b and self.distortion <= b and self.max_block_ok

    def to_json(self) -> dict:
        return {"p": self.p, "lip": self.lip, "colip": self.colip, "distortion": self.distortion,
                "C": str(self.C), "L": self.L, "bound": self.bound, "max_block_ok": self.max_block_ok,
                "ok": self.ok}


def block_norms(emb: Embedding, x: int, y: int) -> np.ndarray:
    diff = np.abs(emb.coords[x] - emb.coords[y])
    return np.array([diff[list(b)].max() for b in emb.blocks])


def l1_embedding(T: MetricTree, decomp: PieceDecomposition, p: float = 1.0, C=None, tol: float = 1e-12) -> Embedding:
    """Glue distance-profile coordinates of the pieces into an l^p-sum of l^infinity blocks."""
    p = float(p)
    if not p >= 1 or not np.isfinite(p):
        raise ValueError("p must lie in [1, infinity)")
    ps = basepoints(decomp)
    D = tree_matrix(T)
    blocks, start = [], 0
    for X in decomp.pieces:
        blocks.append(tuple(range(start, start + len(X))))
        start += len(X)
    coords = np.full((T.size, start), np.nan)
    done = np.zeros(T.size, dtype=bool)
    for n, (X, pn) in enumerate(zip(decomp.pieces, ps)):
        cols = list(blocks[n])
        ys = sorted(X)
        base = np.zeros(start) if n == 0 else coords[pn].copy()
        base[np.isnan(base)] = 0.0
        for v in ys:
            if done[v]:
                continue
            row = base.copy()
            row[cols] = D[v, ys] - D[pn, ys]
            coords[v] = row
            done[v] = True
    coords[np.isnan(coords)] = 0.0
    if not done.all():
        raise ValueError("pieces do not cover the tree")
    diff = np.abs(coords[:, None, :] - coords[None, :, :])
    norms = np.stack([diff[:, :, list(b)].max(axis=2) for b in blocks], axis=2)
    E = (norms ** p).sum(axis=2) ** (1 / p)
    iu = np.triu_indices(T.size, 1)
    d, e = D[iu], E[iu]
    lip = float((e / d).max())
    colip = float((d / e).max())
    if C is None:
        C = geometric_constants(T, decomp).C
    # lower bound along minimal paths: the largest hop block
    ok = True
    for a, b in zip(*iu):
        path = induced_path(T, decomp, int(a), int(b))
        hop = max(norms[u, v, n] for u, v, n in zip(path.points, path.points[1:], path.pieces))
        if E[a, b] * (1 + tol) < hop or hop * float(C) * (1 + tol) < D[a, b]:
            ok = False
            break
    return Embedding(p, tuple(blocks), coords, lip, colip, as_fraction(C), 1.0, ok, tol)
