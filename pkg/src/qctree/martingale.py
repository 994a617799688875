"""Affinization, derivatives, conditional expectations and the operators D, I.

Functions on the arc are sampled on V_K (``2^K + 1`` values) and continued
affinely inside generation-K cells.  Step functions carry one value per cell.
All operators below map this class to itself, so exact rationals give exact
identities.  Floats are accepted too; comparisons then take a tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .arc import QuasiArc, ResolutionError, lipschitz_on_table
from .dyadic import DyadicEdge
from .filtration import diff_witness


class MeasurabilityError(ValueError):
    """A step function is not constant on some atom."""


class MartingaleError(ValueError):
    """A sequence violates the martingale difference condition."""


class ConsistencyError(AssertionError):
    """Two computations that must agree did not."""


def _close(a, b, tol) -> bool:
    return a == b if not tol else abs(a - b) <= tol


def _zeros(m: int) -> tuple:
    return (Fraction(0),) * m


@dataclass(frozen=True)
class MartingaleSequence:
    levels: tuple[tuple, ...]

    @cached_property
    def sup_norm(self):
        return max((abs(v) for g in self.levels for v in g), default=Fraction(0))

    @property
    def n_max(self) -> int:
        return len(self.levels) - 1


def _check_length(arc: QuasiArc, values, m: int, what: str):
    if len(values) != m:
        raise ValueError(f"{what} needs {m} values on K={arc.K}, got {len(values)}")


def affinize(arc: QuasiArc, f, n: int) -> tuple:
    _check_length(arc, f, arc.cells + 1, "sampled function")
    if n < 0:
        return _zeros(arc.cells + 1)
    out = list(f)
    for lo, hi in arc.filtration.level(n).spans:
        fu, slope = f[lo], (f[hi] - f[lo]) / (hi - lo)
        for i in range(lo + 1, hi):
            out[i] = fu + slope * (i - lo)
    return tuple(out)


def derivative_n(arc: QuasiArc, f, n: int) -> tuple:
    _check_length(arc, f, arc.cells + 1, "sampled function")
    h = arc.filtration.metric(n).cell_measure
    assert all(m > 0 for m in h)
    return tuple((f[c + 1] - f[c]) / h[c] for c in range(arc.cells))


def check_measurable(arc: QuasiArc, g, n: int, tol=0):
    for a, (lo, hi) in zip(arc.filtration.level(n).atoms, arc.filtration.level(n).spans):
        if any(not _close(g[c], g[lo], tol) for c in range(lo + 1, hi)):
            raise MeasurabilityError(f"not constant on atom {a.id} of level {n}")


def cond_expect(arc: QuasiArc, g, n: int, strict: bool = True, tol=0) -> tuple:
    """E^{n-1}(g): H^1_n-averages over the atoms of At_{n-1}.

    With ``strict`` the input must be A_n-measurable; without it the Lebesgue
    conditional expectation of an arbitrary step function is returned.
    """
    _check_length(arc, g, arc.cells, "step function")
    if strict:
        check_measurable(arc, g, max(n, 0), tol)
    if n <= 0:
        return _zeros(arc.cells)
    h = arc.filtration.metric(n).cell_measure
    out = list(g)
    for lo, hi in arc.filtration.level(n - 1).spans:
        mass = sum(h[lo:hi])
        avg = sum(g[c] * h[c] for c in range(lo, hi)) / mass
        out[lo:hi] = [avg] * (hi - lo)
    return tuple(out)


def integral_In(arc: QuasiArc, g, n: int, tol=0) -> tuple:
    _check_length(arc, g, arc.cells, "step function")
    check_measurable(arc, g, max(n, 0), tol)
    h = arc.filtration.metric(n).cell_measure
    out, acc = [Fraction(0)], Fraction(0)
    for c in range(arc.cells):
        acc = acc + g[c] * h[c]
        out.append(acc)
    return tuple(out)


def martingale_D(arc: QuasiArc, f, tol=0) -> MartingaleSequence:
    """D_n(f) for 0 <= n <= n_max, computed two ways and cross-checked."""
    _check_length(arc, f, arc.cells + 1, "sampled function")
    if f[0] != 0:
        raise ValueError("Lip_0 functions must vanish at 0")
    top = arc.filtration.n_max
    aff = {n: affinize(arc, f, n) for n in range(-1, top + 1)}
    levels = []
    for n in range(top + 1):
        fn = derivative_n(arc, aff[n], n)
        by_def = tuple(a - b for a, b in zip(fn, cond_expect(arc, fn, n, tol=tol)))
        diff = tuple(a - b for a, b in zip(aff[n], aff[n - 1]))
        by_formula = derivative_n(arc, diff, n)
        if any(not _close(a, b, tol) for a, b in zip(by_def, by_formula)):
            raise ConsistencyError(f"the two routes for D_{n} disagree")
        levels.append(by_def)
    return MartingaleSequence(tuple(levels))


def check_sequence(arc: QuasiArc, seq: MartingaleSequence, tol=0):
    top = arc.filtration.n_max
    if len(seq.levels) > top + 1:
        extra = seq.levels[top + 1:]
        if any(not _close(v, 0, tol) for g in extra for v in g):
            raise MartingaleError(f"levels above n_max={top} must vanish")
    for n, g in enumerate(seq.levels[: top + 1]):
        _check_length(arc, g, arc.cells, f"level {n}")
        try:
            e = cond_expect(arc, g, n, tol=tol)
        except MeasurabilityError as exc:
            raise MartingaleError(f"level {n}: {exc}") from exc
        if any(not _close(v, 0, tol) for v in e):
            raise MartingaleError(f"level {n} has nonzero conditional expectation")


def total_integral(arc: QuasiArc, seq: MartingaleSequence, tol=0) -> tuple:
    check_sequence(arc, seq, tol)
    out = [Fraction(0)] * (arc.cells + 1)
    for n, g in enumerate(seq.levels[: arc.filtration.n_max + 1]):
        for i, v in enumerate(integral_In(arc, g, n, tol)):
            out[i] = out[i] + v
    return tuple(out)


def measurable_projection(arc: QuasiArc, values, n: int) -> tuple:
    """Spread per-atom / per-cell data into an A_n-measurable step function.

    ``values`` supplies one number per cell; the value at an atom's first cell
    is used across the whole atom.
    """
    out = list(values)
    for lo, hi in arc.filtration.level(n).spans:
        out[lo:hi] = [values[lo]] * (hi - lo)
    return tuple(out)


def random_sequence(arc: QuasiArc, rng, denom: int = 8, span: int = 8) -> MartingaleSequence:
    """A random valid sequence: measurable draws minus their conditional expectations."""
    levels = []
    for n in range(arc.filtration.n_max + 1):
        raw = [Fraction(rng.randint(-span, span), denom) for _ in range(arc.cells)]
        g = measurable_projection(arc, raw, n)
        e = cond_expect(arc, g, n)
        levels.append(tuple(a - b for a, b in zip(g, e)))
    return MartingaleSequence(tuple(levels))


def random_function(arc: QuasiArc, rng, denom: int = 8, span: int = 8) -> tuple:
    """A random sampled function with f(0) = 0 (a random walk or arbitrary values)."""
    if rng.random() < 0.5:
        vals, acc = [Fraction(0)], Fraction(0)
        for _ in range(arc.cells):
            acc += Fraction(rng.randint(-span, span), denom)
            vals.append(acc)
        return tuple(vals)
    return (Fraction(0),) + tuple(Fraction(rng.randint(-span, span), denom) for _ in range(arc.cells))


def lip_norm_dn(arc: QuasiArc, f, n: int):
    """Lipschitz norm of a sampled function with respect to d_n."""
    m = arc.filtration.metric(n).arc
    return lipschitz_on_table(list(f), m.table, m.cells)


@dataclass(frozen=True)
class WitnessCertificate:
    x: Fraction
    y: Fraction
    edge: DyadicEdge
    factor: Fraction
    k: int
    atom: DyadicEdge
    gain: Fraction
    d_uv: Fraction
    lip_dk: Fraction
    endpoints_in_diff: bool

    @property
    def passes(self) -> bool:
        return self.factor <= 4 and self.gain >= self.d_uv and self.lip_dk <= 4 and self.endpoints_in_diff


def separating_witness(arc: QuasiArc, x, y):
    """A function certifying d(x, y) from the martingale side.

    Picks a dyadic [u, v] inside [x, y] with d(x, y) <= 4 d(u, v), locates the
    atom a of At_k strictly above it, and integrates 1_{a0} - 1_{a1} (sign
    chosen so that f increases across [u, v]) at level k + 1.
    """
    i, j = arc.index(x), arc.index(y)
    if not i < j:
        raise ValueError("need x < y")
    K, dxy = arc.K, arc.d(i, j)
    best = None
    for n in range(1, K + 1):
        s = 1 << (K - n)
        for lo in range(-(-i // s) * s, j - s + 1, s):
            e = DyadicEdge(n, lo // s + 1)
            duv = arc.d(lo, lo + s)
            if best is None or duv > best[1]:
                best = (e, duv)
    if best is None or dxy > 4 * best[1]:
        raise ResolutionError(f"no dyadic edge of generation <= {K} inside [{x}, {y}] is large enough")
    e, duv = best
    k, a = diff_witness(arc.tree, e)
    a0, a1 = a.children()
    sign = 1 if a0.contains(e) else -1
    g = [Fraction(0)] * arc.cells
    for child, val in ((a0, sign), (a1, -sign)):
        lo, hi = child.vertex_span(K)
        g[lo:hi] = [Fraction(val)] * (hi - lo)
    f = integral_In(arc, g, k + 1)
    u, v = e.vertex_span(K)
    diff = arc.filtration.level(k + 1).diff_points
    cert = WitnessCertificate(
        x=arc.point(i), y=arc.point(j), edge=e, factor=dxy / duv, k=k, atom=a,
        gain=f[v] - f[u], d_uv=duv, lip_dk=lip_norm_dn(arc, f, k),
        endpoints_in_diff=u in diff and v in diff,
    )
    return f, cert
