import random
from fractions import Fraction

import pytest
from hypothesis import given

from oracles import atoms_brute
from strategies import trees
from qctree.arc import QuasiArc
from qctree.dyadic import ROOT, DyadicEdge, generate
from qctree.filtration import (
    Filtration,
    approx_metric,
    atoms,
    diff_witness,
    in_An,
    n_max,
    ru_decomposition,
)


def test_membership_examples():
    snow = generate("snowflake", 6)
    assert all(in_An(snow, n, ROOT) for n in range(4))
    assert not in_An(generate("euclidean", 3), 0, DyadicEdge(0, 1).children()[0])
    for g in (2, 4, 6):
        for n in range(4):
            assert in_An(snow, n, DyadicEdge(g, 1)) == (g <= 2 * n)


def test_atom_examples():
    snow, euc = generate("snowflake", 6), generate("euclidean", 5)
    for t in (snow, euc, generate("random", 5, seed=2)):
        lv = atoms(t, 0)
        assert lv.atoms == (ROOT,) and lv.diff_points == {0, 1 << t.resolution}
    assert atoms(euc, 1).atoms == () and atoms(euc, 1).diffuse_measure == 1
    assert [a.id for a in atoms(snow, 1).atoms] == ["2/1", "2/2", "2/3", "2/4"]
    assert len(atoms(snow, 2).atoms) == 16
    assert n_max(snow) == 3 and n_max(euc) == 1


def test_atoms_match_definition_oracle():
    for seed in range(12):
        t = generate("random", 5, seed=seed)
        for n in range(n_max(t) + 2):
            assert {a.id for a in atoms(t, n).atoms} == atoms_brute(t, n)


def test_ru_examples():
    euc = ru_decomposition(generate("euclidean", 5))
    assert euc["remainder_empty_from"] == 1
    snow = ru_decomposition(generate("snowflake", 6))
    assert [r["atom_measure"] for r in snow["levels"][:3]] == [1, 1, 1]
    assert snow["levels"][0]["diffuse_measure"] == 0
    assert snow["nested"] and snow["diffuse_monotone"]
    with pytest.raises(ValueError):
        ru_decomposition(generate("euclidean", 5), [7])


def test_diff_witness_examples():
    snow = generate("snowflake", 6)
    assert diff_witness(generate("euclidean", 4), DyadicEdge(1, 1)) == (0, ROOT)
    assert diff_witness(generate("euclidean", 4), DyadicEdge(2, 3)) == (0, ROOT)
    for j in range(1, 9):
        e = DyadicEdge(3, j)
        k, a = diff_witness(snow, e)
        assert k == 1 and a.level == 2 and a.contains(e)
    with pytest.raises(ValueError):
        diff_witness(snow, ROOT)


def test_levels_clamp_above_n_max():
    F = Filtration(generate("snowflake", 6))
    assert F.level(10).atoms == () and F.level(10).diffuse_measure == 1


@given(trees(max_K=5, normalized=True))
def test_structure_invariants(t):
    top = n_max(t)
    K = t.resolution
    prev = None
    for n in range(top + 2):
        lv = atoms(t, n)
        covered = sorted(c for lo, hi in lv.spans for c in range(lo, hi))
        assert len(covered) == len(set(covered))
        assert set(covered) | lv.diffuse_cells == set(range(1 << K))
        assert not set(covered) & lv.diffuse_cells
        for a in lv.atoms:
            assert t.delta(a) == Fraction(2) ** (n - a.level)
            assert all(t.delta(c) == t.delta(a) for c in a.children())
            if prev is not None:
                assert prev.atom_containing(a) is not None
        if prev is not None:
            assert prev.diffuse_cells <= lv.diffuse_cells
        prev = lv
    assert atoms(t, top + 1).atoms == ()


def _pairs(arc, rng, m=40):
    n = arc.cells + 1
    return [tuple(sorted(rng.sample(range(n), 2))) for _ in range(m)]


@given(trees(min_K=2, max_K=5, normalized=True))
def test_metric_sandwich(t):
    arc = QuasiArc(t)
    rng = random.Random(0)
    F = arc.filtration
    for i, j in _pairs(arc, rng):
        gap = Fraction(j - i, arc.cells)
        prev = Fraction(0)
        for n in range(F.n_max + 2):
            dn = F.metric(n).d(i, j)
            assert gap <= dn <= 2 ** n * gap
            assert prev <= dn <= arc.d(i, j)
            prev = dn
        assert F.metric(F.n_max).d(i, j) == arc.d(i, j)


def test_approx_metric_equalities():
    """d_n on children of At_{n-1} atoms, on Diff_n points and inside At_n atoms."""
    for tree in [generate("snowflake", 6)] + [generate("random", 5, seed=s) for s in range(6)]:
        arc = QuasiArc(tree)
        F = arc.filtration
        for n in range(1, F.n_max + 1):
            m = F.metric(n)
            for a in F.level(n - 1).atoms:
                for c in a.children():
                    lo, hi = c.vertex_span(arc.K)
                    for i in range(lo, hi + 1):
                        for j in range(i, hi + 1):
                            assert m.d(i, j) == 2 ** n * Fraction(j - i, arc.cells)
            diff = sorted(F.level(n).diff_points)
            for i in diff:
                for j in diff:
                    assert m.d(i, j) == arc.d(i, j)
            for lo, hi in F.level(n).spans:
                for k in range(1, n + 1):
                    mk = F.metric(k)
                    for i in range(lo, hi + 1):
                        for j in range(i, hi + 1):
                            assert m.d(i, j) == 2 ** (n - k) * mk.d(i, j)


def test_cell_measure_is_scaled_lebesgue_on_atom_children():
    tree = generate("snowflake", 6)
    for n in (1, 2, 3):
        h = approx_metric(tree, n).cell_measure
        for a in atoms(tree, n - 1).atoms:
            lo, hi = a.vertex_span(6)
            assert all(h[c] == Fraction(2 ** n, 64) for c in range(lo, hi))
