"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import random
import time
import warnings
from fractions import Fraction

import pytest

import conftest
from oracles import all_trees, cover_distances, subset_distances
from qctree.arc import QuasiArc, bounded_turning_check, edge_distance_check, lipschitz_norm
from qctree.dyadic import DyadicEdge, doubling_index, generate
from qctree.filtration import ru_decomposition
from qctree.glue import family_norm, glue_light, l1_embedding, lip_norm, oriented_family, phi, psi, random_family
from qctree.l1iso import bench, quotient_norm, quotient_norm_scan, random_space, random_vector
from qctree.martingale import (
    affinize,
    cond_expect,
    integral_In,
    lip_norm_dn,
    martingale_D,
    measurable_projection,
    random_function,
    random_sequence,
    separating_witness,
    total_integral,
)
from qctree.trees import (
    TruncationWarning,
    arc_decomposition,
    build_glued_tree,
    chain_plan,
    decomposition_path,
    full_arc_decomposition,
    geometric_constants,
    is_decomposition_path,
    minimality_violation,
    random_plan,
    star_plan,
    validate_treelike,
)

GRID = [Fraction(1, 64), Fraction(1, 32), Fraction(1, 16), Fraction(1, 8), Fraction(1, 4)]


def verdict(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def corpus_arcs():
    """Ten arcs with K <= 6 shared by the martingale criteria."""
    arcs = [QuasiArc(generate("snowflake", 6)), QuasiArc(generate("euclidean", 6))]
    arcs += [QuasiArc(generate("random", 3 + s % 4, seed=500 + s)) for s in range(8)]
    return arcs


@pytest.fixture(scope="module")
def corpus():
    return corpus_arcs()


@pytest.fixture(scope="module")
def glued():
    return [build_glued_tree(random_plan(900 + s, 2 + s % 4, 3 + s % 2)) for s in range(10)]


def test_metric_oracle_equivalence():
    t0 = time.perf_counter()
    bad, exhaustive = 0, 0
    for K in (1, 2, 3):
        for normalized in (False, True):
            for t in all_trees(K, normalized):
                exhaustive += 1
                bad += QuasiArc(t).matrix() != subset_distances(t)
    rng = random.Random(2024)
    sampled = 0
    for s in range(100):
        t = generate("random", rng.randint(1, 6), seed=s, normalized=bool(s % 2))
        arc, ref = QuasiArc(t), cover_distances(t)
        n = arc.cells + 1
        for _ in range(100):
            i, j = rng.randrange(n), rng.randrange(n)
            sampled += 1
            bad += arc.d(i, j) != ref[i][j]
    secs = time.perf_counter() - t0
    verdict("metric oracle equivalence", bad == 0 and secs < 60,
            f"{exhaustive} exhaustive trees, {sampled} sampled pairs, {bad} mismatches, {secs:.1f}s")


def test_euclidean_reduction():
    arc = QuasiArc(generate("euclidean", 6, normalized=False))
    bad = sum(arc.d(i, j) != Fraction(abs(i - j), 64) for i in range(65) for j in range(65))
    verdict("euclidean reduction on V_6", bad == 0, f"{bad} mismatches")


def test_bounded_turning(glued):
    arcs = [bounded_turning_check(QuasiArc(generate("random", 5, seed=s))) for s in range(20)]
    trees = [T.bounded_turning() for T in glued]
    ok = all(r == 1 for r in arcs + trees)
    verdict("1-bounded turning", ok, f"max arc ratio {max(arcs)}, max tree ratio {max(trees)}")


def test_edge_identity(corpus):
    arcs = corpus + [QuasiArc(generate("random", 5, seed=s)) for s in range(20)]
    bad = sum(len(edge_distance_check(a)) for a in arcs)
    verdict("edge-distance identity", bad == 0, f"{len(arcs)} arcs, {bad} mismatches")


def test_dyadic_sandwich():
    rng = random.Random(77)
    bad = 0
    for s in range(20):
        arc = QuasiArc(generate("random", 3 + s % 4, seed=300 + s))
        n0 = doubling_index(arc.tree)
        for _ in range(50):
            f = random_function(arc, rng)
            loc, full = lipschitz_norm(arc, f, "dyadic_local"), lipschitz_norm(arc, f)
            bad += not (loc <= full <= 8 * n0 * loc)
    verdict("dyadic sandwich", bad == 0, f"1000 functions, {bad} violations")


def test_round_trips(corpus):
    t0 = time.perf_counter()
    rng = random.Random(11)
    bad = 0
    for arc in corpus:
        for _ in range(100):
            f = random_function(arc, rng)
            bad += total_integral(arc, martingale_D(arc, f)) != f
            seq = random_sequence(arc, rng)
            bad += martingale_D(arc, total_integral(arc, seq)).levels != seq.levels
    secs = time.perf_counter() - t0
    verdict("round trips I(D f) = f and D(I seq) = seq", bad == 0 and secs < 120, f"{bad} failures, {secs:.1f}s")


def test_operator_bounds(corpus):
    rng = random.Random(12)
    bad = 0
    for arc in corpus:
        n0 = doubling_index(arc.tree)
        for _ in range(20):
            f = random_function(arc, rng)
            lip = lipschitz_norm(arc, f)
            D = martingale_D(arc, f)
            bad += D.sup_norm > 2 * lip
            for n, g in enumerate(D.levels):
                if any(g):
                    bad += lip_norm_dn(arc, integral_In(arc, g, n), n) > 4 * max(abs(v) for v in g)
            seq = random_sequence(arc, rng)
            if seq.sup_norm:
                bad += lipschitz_norm(arc, total_integral(arc, seq)) > 64 * n0 * seq.sup_norm
    verdict("operator bounds", bad == 0, f"{bad} violations")


def _ddn_violations(arc):
    F, bad = arc.filtration, 0
    for n in range(1, F.n_max + 1):
        m = F.metric(n)
        for a in F.level(n - 1).atoms:
            for c in a.children():
                lo, hi = c.vertex_span(arc.K)
                bad += sum(m.d(i, j) != 2 ** n * Fraction(j - i, arc.cells)
                           for i in range(lo, hi + 1) for j in range(i, hi + 1))
        diff = sorted(F.level(n).diff_points)
        bad += sum(m.d(i, j) != arc.d(i, j) for i in diff for j in diff)
        for lo, hi in F.level(n).spans:
            for k in range(1, n + 1):
                mk = F.metric(k)
                bad += sum(m.d(i, j) != 2 ** (n - k) * mk.d(i, j)
                           for i in range(lo, hi + 1) for j in range(i, hi + 1))
    return bad


def test_filtration_structure(corpus):
    rng = random.Random(13)
    nest = mono = ddn = tower = 0
    for arc in corpus:
        F = arc.filtration
        for n in range(1, F.n_max + 2):
            prev, lv = F.level(n - 1), F.level(n)
            nest += sum(prev.atom_containing(a) is None for a in lv.atoms)
            mono += not prev.diffuse_cells <= lv.diffuse_cells
        ddn += _ddn_violations(arc)
        for _ in range(5):
            g = tuple(Fraction(rng.randint(-8, 8), 4) for _ in range(arc.cells))
            for n in range(1, F.n_max + 1):
                once = cond_expect(arc, g, n, strict=False)
                twice = cond_expect(arc, cond_expect(arc, g, n + 1, strict=False), n, strict=False)
                tower += once != twice
    verdict("filtration structure", nest + mono + ddn + tower == 0,
            f"nesting {nest}, diff monotone {mono}, d_n equalities {ddn}, tower {tower}")


def test_separating_witnesses(corpus):
    bad = total = 0
    for arc in corpus:
        for g in range(1, arc.K):
            for j in range(1, (1 << g) + 1):
                e = DyadicEdge(g, j)
                _, cert = separating_witness(arc, e.lo, e.hi)
                total += 1
                bad += not (cert.passes and cert.gain >= cert.d_uv and cert.lip_dk <= 4)
    verdict("separating witnesses", bad == 0, f"{total} pairs, {bad} failures")


def test_gluing(glued):
    rng = random.Random(14)
    bad = 0
    worst = Fraction(0)
    for T in glued:
        D = arc_decomposition(T)
        C = geometric_constants(T, D).C
        for _ in range(20):
            fam = random_family(T, D, rng)
            g = psi(T, D, fam)
            bad += phi(T, D, g) != fam
            fn = family_norm(T, D, fam)
            bad += lip_norm(T, g) > C * fn
            if fn:
                worst = max(worst, lip_norm(T, g) / (C * fn))
    verdict("gluing Psi o Phi = id with norm <= C sup", bad == 0, f"{bad} failures, worst ratio/C {float(worst):.3f}")


def test_light_gluing():
    configs = []
    for m in (2, 3, 4):
        T = build_glued_tree(star_plan(m))
        configs.append((T, arc_decomposition(T), None))
    for m in (2, 4):
        T = build_glued_tree(chain_plan(m))
        configs.append((T, arc_decomposition(T), [(-1) ** i for i in range(m)]))
    for s in range(6):
        T = build_glued_tree(random_plan(700 + s, 3 + s % 3, 4))
        D = arc_decomposition(T)
        configs.append((T, D, [(-1) ** i for i in range(len(D.pieces))] if s % 2 else None))
    bad, ratios = 0, []
    for T, D, signs in configs:
        r = glue_light(T, D, oriented_family(T, D, signs), GRID)
        bad += not r.ok
        ratios.append(r.measured.q_hat / r.predicted)
    verdict("light gluing", bad == 0 and len(configs) >= 10,
            f"{len(configs)} configurations, max measured/predicted {max(ratios):.3f}")


def test_decomposition_validity():
    bad = paths = 0
    for s in range(10):
        T = build_glued_tree(random_plan(800 + s, 2 + s % 4, 3))
        D = arc_decomposition(T)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            A = full_arc_decomposition(T)
        for decomp in (D, A.debv.decomposition, A.decomposition):
            bad += not validate_treelike(T if decomp is D else None, decomp).ok
        for x in range(T.size):
            for y in range(x + 1, T.size):
                p = decomposition_path(T, D, x, y)
                paths += 1
                bad += not is_decomposition_path(D, p.points, p.pieces)
                bad += minimality_violation(D, p.points, p.pieces) is not None
    verdict("decomposition validity", bad == 0, f"10 trees, {paths} minimal paths scanned, {bad} failures")


def test_lp_embedding(glued):
    bad, worst = 0, 0.0
    for T in glued:
        D = arc_decomposition(T)
        for p in (1, 2):
            e = l1_embedding(T, D, p, tol=1e-12)
            bad += not e.ok
            worst = max(worst, e.distortion / e.bound)
    verdict("l^p embedding distortion <= C L", bad == 0, f"{bad} failures, max distortion/bound {worst:.3f}")


def test_finite_measure_spaces():
    rng = random.Random(15)
    bad = 0
    worst_k = worst_e = Fraction(0)
    for s in range(50):
        sp = random_space(rng, rng.randint(2, 12))
        r = bench(sp, rng, "blocks")
        bad += not r["ok"]
        worst_k = max(worst_k, Fraction(r["kernel_distortion"]))
        worst_e = max(worst_e, Fraction(r["end_to_end_distortion"]))
        for _ in range(5):
            g = random_vector(rng, sp.size)
            bad += quotient_norm(sp, g) != quotient_norm_scan(sp, g)
    verdict("finite measure space isomorphisms", bad == 0 and worst_k <= 64 and worst_e <= 128,
            f"50 spaces, worst kernel distortion {worst_k}, worst end-to-end {worst_e}")


def test_euclidean_degenerate_pipeline():
    arc = QuasiArc(generate("euclidean", 6))
    F = arc.filtration
    rng = random.Random(16)
    supported = all(len(martingale_D(arc, random_function(arc, rng)).levels) == 2 for _ in range(20))
    ru = ru_decomposition(arc.tree)
    x = tuple(Fraction(i, 64) for i in range(65))
    ok = (F.level(1).atoms == () and F.n_max == 1 and supported
          and ru["remainder_empty_from"] == 1 and ru["remainder_measure"] == 0
          and affinize(arc, x, 1) == x
          and measurable_projection(arc, [Fraction(1)] * 64, 1) == (Fraction(1),) * 64)
    verdict("euclidean degenerate pipeline", ok, f"n_max {F.n_max}, remainder {ru['remainder_measure']}")
