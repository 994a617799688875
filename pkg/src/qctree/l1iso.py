"""Isomorphisms between L^1 kernels, L^1 quotients and L^1 of a subspace.

Everything lives on a finite measure space with rational weights, so vectors
are tuples of Fractions (one density value per atom) and every operator norm
is computed exactly from the extreme points of the domain's unit ball.

Two models are offered for the kernel K = {g : int g = 0}:

* ``atom``: drop one atom A, restrict g to X = Y minus A; the inverse puts
  minus the remaining integral on A.
* ``blocks``: the shift construction on a partition A_0, ..., A_N with
  mu(A_n) = mu(Y) / 2^(n+1) for n < N and the tail A_N of mass
  mu(Y) / 2^N.  The tail image has mean zero on A_N, so one atom a* of the
  tail is dropped and restored on the way back.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations


class GroupingError(ValueError):
    """Atoms that cannot be grouped into dyadic blocks."""


Vector = tuple[Fraction, ...]


@dataclass(frozen=True)
class FiniteMeasureSpace:
    labels: tuple[str, ...]
    weights: tuple[Fraction, ...]
    blocks: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if len(self.labels) != len(self.weights):
            raise ValueError("one weight per label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")
        if any(w <= 0 for w in self.weights):
            raise ValueError("weights must be positive")
        if not self.weights:
            raise ValueError("empty measure space")

    @classmethod
    def from_weights(cls, weights, blocks=None) -> "FiniteMeasureSpace":
        ws = tuple(Fraction(w) for w in weights)
        bl = None if blocks is None else tuple(tuple(b) for b in blocks)
        return cls(tuple(f"a{i}" for i in range(len(ws))), ws, bl)

    @property
    def size(self) -> int:
        return len(self.weights)

    @cached_property
    def total(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def norm(self, g) -> Fraction:
        return sum((abs(v) * w for v, w in zip(g, self.weights)), Fraction(0))

    def integral(self, g, atoms=None) -> Fraction:
        atoms = range(self.size) if atoms is None else atoms
        return sum((g[a] * self.weights[a] for a in atoms), Fraction(0))

    def mean(self, g, atoms) -> Fraction:
        return self.integral(g, atoms) / sum((self.weights[a] for a in atoms), Fraction(0))

    def indicator(self, a: int) -> Vector:
        """The unit-norm density 1_a / mu(a)."""
        return tuple(Fraction(1) / self.weights[a] if i == a else Fraction(0) for i in range(self.size))


def quotient_norm(space: FiniteMeasureSpace, g) -> Fraction:
    """min over constants c of ||g - c||_1, attained at a weighted median of g."""
    order = sorted(range(space.size), key=lambda a: g[a])
    half, acc = space.total / 2, Fraction(0)
    for a in order:
        acc += space.weights[a]
        if acc >= half:
            c = g[a]
            break
    return space.norm(tuple(v - c for v in g))


def quotient_norm_scan(space: FiniteMeasureSpace, g) -> Fraction:
    """The same minimum by trying every value of g as the constant."""
    return min(space.norm(tuple(v - c for v in g)) for c in set(g))


def group_blocks(space: FiniteMeasureSpace) -> tuple[tuple[int, ...], ...]:
    """Greedy dyadic grouping: heaviest atoms first, block n of mass total / 2^(n+1)."""
    if space.blocks is not None:
        _check_blocks(space, space.blocks)
        return space.blocks
    rest = sorted(range(space.size), key=lambda a: (-space.weights[a], a))
    blocks, n = [], 0
    while len(rest) > 1:
        target, acc, take = space.total / (1 << (n + 1)), Fraction(0), []
        for a in rest:
            if acc + space.weights[a] <= target:
                take.append(a)
                acc += space.weights[a]
            if acc == target:
                break
        if acc != target or len(take) == len(rest):
            break
        blocks.append(tuple(take))
        rest = [a for a in rest if a not in take]
        n += 1
    if not blocks:
        raise GroupingError("no set of atoms carries exactly half the mass")
    blocks.append(tuple(rest))
    return tuple(blocks)


def _check_blocks(space: FiniteMeasureSpace, blocks):
    seen = sorted(a for b in blocks for a in b)
    if seen != list(range(space.size)) or any(not b for b in blocks):
        raise GroupingError("blocks must partition the atoms")
    if len(blocks) < 2:
        raise GroupingError("need at least two blocks")
    N = len(blocks) - 1
    for n, b in enumerate(blocks):
        want = space.total / (1 << (n + 1) if n < N else 1 << N)
        got = sum((space.weights[a] for a in b), Fraction(0))
        if got != want:
            raise GroupingError(f"block {n} has mass {got}, needs {want}")


# ---------------------------------------------------------------- domains


@dataclass(frozen=True)
class Domain:
    """A subspace of L^1(space) cut out by mean-zero constraints on atom sets.

    ``quotient`` marks L^1 / R1 with the quotient norm instead.
    """

    space: FiniteMeasureSpace
    atoms: tuple[int, ...]
    constraints: tuple[tuple[int, ...], ...] = ()
    quotient: bool = False

    def norm(self, g) -> Fraction:
        if self.quotient:
            return quotient_norm(self.space, g)
        return self.space.norm(g)

    def extreme_points(self) -> list[Vector]:
        """Unit-ball extreme points (up to sign): dipoles in constrained sets, indicators elsewhere."""
        sp = self.space
        out = []
        inside = {a for c in self.constraints for a in c}
        for c in self.constraints:
            for a, b in combinations(c, 2):
                v = [Fraction(0)] * sp.size
                v[a] = Fraction(1, 2) / sp.weights[a]
                v[b] = -Fraction(1, 2) / sp.weights[b]
                out.append(tuple(v))
        for a in self.atoms:
            if a not in inside:
                out.append(sp.indicator(a))
        return out


def operator_norm(T, dom: Domain, cod: Domain) -> Fraction:
    """Exact norm of a linear map: the largest image of an extreme point."""
    best = Fraction(0)
    for v in dom.extreme_points():
        n = dom.norm(v)
        if n == 0:
            continue
        r = cod.norm(T(v)) / n
        if r > best:
            best = r
    return best


# ---------------------------------------------------------------- kernel


@dataclass(frozen=True)
class KernelIso:
    space: FiniteMeasureSpace
    mode: str
    X: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...]
    dropped: int | None

    @property
    def K(self) -> Domain:
        return Domain(self.space, tuple(range(self.space.size)), (tuple(range(self.space.size)),))

    @property
    def LX(self) -> Domain:
        return Domain(self.space, self.X)

    @property
    def K0(self) -> Domain:
        return Domain(self.space, tuple(range(self.space.size)), (self.blocks[0],))

    def _restrict(self, g) -> Vector:
        keep = set(self.X)
        return tuple(v if i in keep else Fraction(0) for i, v in enumerate(g))

    # atom model: g -> g|_X, h -> h 1_X - (int_X h) / mu(A) 1_A
    def _atom_fwd(self, g) -> Vector:
        return self._restrict(g)

    def _atom_inv(self, h) -> Vector:
        sp, A = self.space, self.dropped
        out = list(self._restrict(h))
        out[A] = -sp.integral(h, self.X) / sp.weights[A]
        return tuple(out)

    # block model, stage one: K -> K0 and back
    def stage1(self, g) -> Vector:
        sp, A0 = self.space, self.blocks[0]
        m = sp.mean(g, A0)
        inA0 = set(A0)
        return tuple(v - m if i in inA0 else v for i, v in enumerate(g))

    def stage1_inv(self, h) -> Vector:
        sp, A0 = self.space, set(self.blocks[0])
        rest = [i for i in range(sp.size) if i not in A0]
        m = sp.mean(h, rest)
        return tuple(v - m if i in A0 else v for i, v in enumerate(h))

    # block model, stage two: K0 -> L^1(X) via the block shift
    def stage2(self, g) -> Vector:
        sp, B = self.space, self.blocks
        means = [sp.mean(g, b) for b in B] + [Fraction(0)]
        out = [Fraction(0)] * sp.size
        for n, b in enumerate(B):
            for a in b:
                out[a] = g[a] - means[n] + means[n + 1]
        return self._restrict(out)

    def stage2_inv(self, h) -> Vector:
        sp, B = self.space, self.blocks
        H = list(self._restrict(h))
        tail = B[-1]
        # restore the dropped tail atom so that H has mean zero on the tail
        others = [a for a in tail if a != self.dropped]
        H[self.dropped] = -sp.integral(H, others) / sp.weights[self.dropped]
        means = [sp.mean(H, b) for b in B]
        out = [Fraction(0)] * sp.size
        for n, b in enumerate(B):
            prev = means[n - 1] if n else Fraction(0)
            for a in b:
                out[a] = H[a] - means[n] + prev
        return tuple(out)

    def forward(self, g) -> Vector:
        if self.mode == "atom":
            return self._atom_fwd(g)
        return self.stage2(self.stage1(g))

    def inverse(self, h) -> Vector:
        if self.mode == "atom":
            return self._atom_inv(h)
        return self.stage1_inv(self.stage2_inv(h))

    def norms(self) -> dict[str, Fraction]:
        """Exact operator norms of every map in the chain."""
        sp = self.space
        if sp.size == 1:
            return {"forward": Fraction(0), "inverse": Fraction(0)}
        K, LX = self.K, self.LX
        out = {"forward": operator_norm(self.forward, K, LX), "inverse": operator_norm(self.inverse, LX, K)}
        if self.mode == "blocks":
            K0 = self.K0
            out["stage1"] = operator_norm(self.stage1, K, K0)
            out["stage1_inverse"] = operator_norm(self.stage1_inv, K0, K)
            out["stage2"] = operator_norm(self.stage2, K0, LX)
            out["stage2_inverse"] = operator_norm(self.stage2_inv, LX, K0)
        return out

    def bounds(self) -> dict[str, int]:
        if self.mode == "atom":
            return {"forward": 2, "inverse": 2}
        return {"forward": 8, "inverse": 8, "stage1": 2, "stage1_inverse": 2, "stage2": 4, "stage2_inverse": 4}


def kernel_iso(space: FiniteMeasureSpace, mode: str = "atom") -> KernelIso:
    n = space.size
    if n == 1:
        return KernelIso(space, "atom", (), ((0,),), 0)
    if mode == "atom":
        # dropping the heaviest atom keeps the restore step cheap
        A = min(range(n), key=lambda a: (-space.weights[a], a))
        return KernelIso(space, mode, tuple(i for i in range(n) if i != A), (tuple(range(n)),), A)
    if mode == "blocks":
        blocks = group_blocks(space)
        tail = blocks[-1]
        a_star = min(tail, key=lambda a: (-space.weights[a], a))
        return KernelIso(space, mode, tuple(i for i in range(n) if i != a_star), blocks, a_star)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------- quotient


@dataclass(frozen=True)
class QuotientIso:
    space: FiniteMeasureSpace
    kernel: KernelIso

    @property
    def Q(self) -> Domain:
        return Domain(self.space, tuple(range(self.space.size)), quotient=True)

    def forward(self, g) -> Vector:
        """g + R1 -> g minus its mean."""
        m = self.space.integral(g) / self.space.total
        return tuple(v - m for v in g)

    def inverse(self, h) -> Vector:
        return tuple(h)

    def norm(self, g) -> Fraction:
        return quotient_norm(self.space, g)

    def end_to_end(self, g) -> Vector:
        return self.kernel.forward(self.forward(g))

    def end_to_end_inverse(self, h) -> Vector:
        return self.inverse(self.kernel.inverse(h))

    def norms(self) -> dict[str, Fraction]:
        if self.space.size == 1:
            return {"forward": Fraction(0), "inverse": Fraction(0), "end_to_end": Fraction(0),
                    "end_to_end_inverse": Fraction(0)}
        Q, K, LX = self.Q, self.kernel.K, self.kernel.LX
        return {
            "forward": operator_norm(self.forward, Q, K),
            "inverse": operator_norm(self.inverse, K, Q),
            "end_to_end": operator_norm(self.end_to_end, Q, LX),
            "end_to_end_inverse": operator_norm(self.end_to_end_inverse, LX, Q),
        }


def quotient_iso(space: FiniteMeasureSpace, mode: str = "atom") -> QuotientIso:
    return QuotientIso(space, kernel_iso(space, mode))


def distortion(fwd: Fraction, inv: Fraction) -> Fraction:
    return fwd * inv


# ---------------------------------------------------------------- generators


def random_space(rng: random.Random, size: int, dyadic: bool = True, max_blocks: int = 4) -> FiniteMeasureSpace:
    """A random space; with ``dyadic`` its atoms come pre-grouped into valid blocks."""
    if size < 1:
        raise ValueError("size must be positive")
    if not dyadic or size == 1:
        return FiniteMeasureSpace.from_weights([Fraction(rng.randint(1, 12), rng.randint(1, 6)) for _ in range(size)])
    total = Fraction(rng.randint(1, 4))
    N = min(max_blocks - 1, size - 1, rng.randint(1, max_blocks - 1))
    # atoms per block: at least one each, the rest spread at random
    counts = [1] * (N + 1)
    for _ in range(size - N - 1):
        counts[rng.randrange(N + 1)] += 1
    weights, blocks = [], []
    for n, c in enumerate(counts):
        mass = total / (1 << (n + 1) if n < N else 1 << N)
        cuts = sorted(rng.randint(1, 8) for _ in range(c))
        raw = [Fraction(x) for x in cuts]
        s = sum(raw)
        blocks.append(tuple(range(len(weights), len(weights) + c)))
        weights.extend(mass * x / s for x in raw)
    return FiniteMeasureSpace.from_weights(weights, blocks)


def random_vector(rng: random.Random, size: int, denom: int = 8, span: int = 16) -> Vector:
    return tuple(Fraction(rng.randint(-span, span), denom) for _ in range(size))


def project_kernel(space: FiniteMeasureSpace, g) -> Vector:
    m = space.integral(g) / space.total
    return tuple(v - m for v in g)


def bench(space: FiniteMeasureSpace, rng: random.Random, mode: str, trials: int = 5) -> dict:
    """Norms, bounds, distortions and exact round trips for one space."""
    qi = quotient_iso(space, mode)
    ki = qi.kernel
    kn, qn = ki.norms(), qi.norms()
    roundtrip = True
    for _ in range(trials):
        g = project_kernel(space, random_vector(rng, space.size))
        roundtrip &= ki.inverse(ki.forward(g)) == g
        h = ki._restrict(random_vector(rng, space.size))
        roundtrip &= ki.forward(ki.inverse(h)) == h
        q = random_vector(rng, space.size)
        back = qi.end_to_end_inverse(qi.end_to_end(q))
        roundtrip &= quotient_norm(space, tuple(a - b for a, b in zip(back, q))) == 0
        roundtrip &= quotient_norm(space, q) == quotient_norm_scan(space, q)
    kb = ki.bounds()
    checks = {f"kernel_{k}": kn[k] <= kb[k] for k in kb}
    checks["quotient_forward"] = qn["forward"] <= 2
    checks["quotient_inverse"] = qn["inverse"] <= 1
    kernel_dist = kn["forward"] * kn["inverse"]
    total_dist = qn["end_to_end"] * qn["end_to_end_inverse"]
    checks["kernel_distortion"] = kernel_dist <= (4 if ki.mode == "atom" else 64)
    checks["end_to_end_distortion"] = total_dist <= (8 if ki.mode == "atom" else 128)
    checks["roundtrip"] = roundtrip
    return {
        "size": space.size,
        "mode": ki.mode,
        "blocks": [list(b) for b in ki.blocks],
        "kernel_norms": {k: str(v) for k, v in kn.items()},
        "quotient_norms": {k: str(v) for k, v in qn.items()},
        "kernel_distortion": str(kernel_dist),
        "end_to_end_distortion": str(total_dist),
        "checks": checks,
        "ok": all(checks.values()),
    }
