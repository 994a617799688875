import json
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qctree.dyadic import ParseError, generate
from qctree.trees import (
    ArcSpec,
    Attachment,
    ChainError,
    DecompositionError,
    GluePlan,
    LoopError,
    PieceDecomposition,
    PlanError,
    TruncationWarning,
    arc_decomposition,
    build_glued_tree,
    chain_lift,
    chain_plan,
    classify_loop,
    debv,
    decomposition_path,
    full_arc_decomposition,
    geometric_constants,
    is_decomposition_path,
    is_minimal,
    load_plan,
    minimality_violation,
    parse_plan,
    random_plan,
    saturation_depth,
    star_plan,
    subtree_arcs,
    validate_treelike,
)


def plain(K):
    return generate("euclidean", K, normalized=False)


@pytest.fixture(scope="module")
def star():
    T = build_glued_tree(star_plan(3))
    return T, arc_decomposition(T)


@pytest.fixture(scope="module")
def chain4():
    T = build_glued_tree(chain_plan(4))
    return T, arc_decomposition(T)


@pytest.fixture(scope="module")
def lopsided():
    """Unit arc with a short arm (scale 1/16) hanging off 1/8."""
    plan = GluePlan((ArcSpec(plain(4), Fraction(1)), ArcSpec(plain(2), Fraction(1, 16))),
                    (Attachment(1, 0, Fraction(1, 8)),))
    return build_glued_tree(plan)


def test_single_arc_is_the_arc():
    T = build_glued_tree(GluePlan((ArcSpec(generate("snowflake", 4), Fraction(1)),), ()))
    assert T.size == 17 and T.leaves == (0, 16)
    assert T.d(0, 16) == 1 and T.d(0, 8) == 1


def test_star_geometry(star):
    T, D = star
    assert T.size == 25 and T.leaves == (8, 16, 24)
    assert {T.d(a, b) for a in T.leaves for b in T.leaves if a != b} == {2}
    assert T.bounded_turning() == 1
    assert validate_treelike(T, D).ok
    assert D.branch_points == {0}


def test_scaled_arm_distances(lopsided):
    T = lopsided
    assert T.leaves == (0, 16, 20)
    assert T.d(20, 2) == Fraction(1, 16)
    assert T.d(20, 0) == Fraction(1, 16) + Fraction(1, 8)
    assert T.bounded_turning() == 1


def test_plan_errors():
    with pytest.raises(PlanError):
        build_glued_tree(GluePlan((ArcSpec(plain(2), Fraction(1)),), (Attachment(1, 0, Fraction(0)),)))
    two = (ArcSpec(plain(2), Fraction(1)), ArcSpec(plain(2), Fraction(1)))
    with pytest.raises(PlanError):
        build_glued_tree(GluePlan(two, (Attachment(1, 1, Fraction(0)),)))
    with pytest.raises(PlanError):
        build_glued_tree(GluePlan(two, (Attachment(1, 0, Fraction(1, 8)),)))
    with pytest.raises(PlanError):
        build_glued_tree(GluePlan((ArcSpec(plain(2), Fraction(0)),), ()))
    with pytest.raises(ParseError):
        parse_plan({"arcs": "nope"})
    with pytest.raises(ParseError):
        parse_plan({"arcs": [{"scale": 1}]})


def test_plan_files(data_dir, tmp_path):
    T = build_glued_tree(load_plan(data_dir / "star3.json"))
    assert T.leaves == (16, 32, 48)
    plan = random_plan(3, 4, 3)
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(plan.to_json()))
    assert load_plan(p) == plan


def test_validator_counterexamples():
    D = PieceDecomposition((frozenset({0, 1, 2}), frozenset({2, 3}), frozenset({1, 3, 4})))
    rep = validate_treelike(None, D)
    assert not rep.ok
    assert rep.uniqueness[0]["piece"] == 2 and rep.uniqueness[0]["meets"] == [1, 3]
    assert rep.nontrivial_loops
    dup = PieceDecomposition((frozenset({0, 1, 2}), frozenset({1, 2})))
    assert not validate_treelike(None, dup).ok


def test_loop_classification():
    D = PieceDecomposition((frozenset({0, 1}), frozenset({0, 1}), frozenset({1, 2})))
    assert classify_loop(D, (0, 1, 0), (0, 1)) == "trivial"
    tri = PieceDecomposition((frozenset({0, 1}), frozenset({1, 2}), frozenset({2, 0})))
    assert classify_loop(tri, (0, 1, 2, 0), (0, 1, 2)) == "nontrivial"
    with pytest.raises(LoopError):
        classify_loop(D, (0, 1, 2), (0, 2))
    with pytest.raises(LoopError):
        classify_loop(D, (0, 2, 0), (0, 2))


def test_paths_on_examples(star, chain4):
    T, D = star
    assert decomposition_path(T, D, 3, 5).points == (3, 5)
    p = decomposition_path(T, D, 8, 16)
    assert p.points == (8, 0, 16) and p.pieces == (0, 1) and p.length_ratio == 1
    T4, D4 = chain4
    p = decomposition_path(T4, D4, 0, 32, mode="short", C=1)
    assert p.points == (0, 8, 16, 24, 32) and p.pieces == (0, 1, 2, 3)
    assert is_minimal(D4, p)
    assert minimality_violation(D4, (0, 8, 16, 8), (0, 1, 1)) == (1, 3)
    with pytest.raises(ValueError):
        decomposition_path(T, D, 8, 16, mode="long")


def test_geometric_constants_examples(star, chain4):
    T = build_glued_tree(GluePlan((ArcSpec(plain(3), Fraction(1)),), ()))
    g = geometric_constants(T, arc_decomposition(T))
    assert (g.c2, g.c3) == (1, 1)
    g = geometric_constants(*chain4)
    assert (g.c2, g.c3) == (4, 1)
    assert geometric_constants(*chain4, pairs=[(0, 32)]).c2 == 4
    assert geometric_constants(*star).c3 == 1


def test_debv_examples(star, lopsided):
    one = build_glued_tree(GluePlan((ArcSpec(plain(3), Fraction(1)),), ()))
    d = debv(one, 1)
    assert len(d.pieces) == 1 and d.pieces[0].vertices == frozenset(range(9))
    T, _ = star
    assert [p.label for p in debv(T, 1).pieces] == ["K_1^1"]
    d = debv(lopsided, 3)
    assert d.nets == ((0, 16), (0, 16), (0, 16, 20))
    assert [p.label for p in d.pieces] == ["K_1^1", "K_3^1"]
    assert d.pieces[1].vertices == {2, 17, 18, 19, 20} and d.pieces[1].attach == 2
    assert not d.anomalies and saturation_depth(lopsided) == 3
    assert validate_treelike(lopsided, d.decomposition).ok


def test_debv_truncation_warning(star):
    with pytest.warns(TruncationWarning):
        debv(star[0], 4)
    with pytest.raises(ValueError):
        debv(star[0], 0)


def test_subtree_arcs_examples(star):
    T, _ = star
    arc = [a.vertices for a in subtree_arcs(T, range(9), 0)]
    assert arc == [tuple(range(9))[::-1]] or arc == [tuple(range(9))]
    centre = subtree_arcs(T, range(T.size), 0)
    assert len(centre) == 3 and all(0 in a.vertices for a in centre)
    leaf = subtree_arcs(T, range(T.size), 24)
    assert len(leaf) == 2
    assert {leaf[0].vertices[0], leaf[0].vertices[-1]} == {8, 24}
    assert leaf[1].vertices == (0,) + tuple(range(9, 17)) and leaf[1].attach == 0
    with pytest.raises(ValueError):
        subtree_arcs(T, range(9), 20)


def _assert_lift(T, D, chain, delta, prunes=None, C=None):
    lift = chain_lift(T, D, chain, delta, C)
    assert all(lift.check(T, D, chain).values()), lift.check(T, D, chain)
    if prunes is not None:
        assert lift.prunes == prunes
    return lift


def test_chain_lift_cases(star, lopsided):
    T, D = star
    lift = _assert_lift(T, D, [1, 2, 3, 4], Fraction(1, 8), ())
    assert lift.chain == (1, 2, 3, 4) and lift.path.points == (1, 4)
    lift = _assert_lift(T, D, [8, 7, 6, 5, 4, 3, 2, 1, 0, 9, 10, 11], Fraction(1, 8), ())
    assert lift.path.points == (8, 0, 11)
    revisit = [8, 7, 6, 5, 4, 3, 2, 1, 0, 9, 10, 0, 1, 2, 0, 17, 18]
    lift = _assert_lift(T, D, revisit, Fraction(1, 4), ("A", "A"))
    assert lift.path.points == (8, 0, 18)
    DL = arc_decomposition(lopsided)
    lift = _assert_lift(lopsided, DL, [5, 4, 3, 2, 17, 18, 17, 2, 3], Fraction(1, 16), ("A", "B"))
    assert lift.path.points == (5, 3)


def test_chain_lift_cuts_excursion_before_first_exit():
    # 6 is a branch point; the walk leaves it, comes back, then crosses into the next piece
    T = build_glued_tree(random_plan(21, 5, 3))
    D = arc_decomposition(T)
    chain = [6, 4, 6, 27, 26, 25, 27]
    lift = _assert_lift(T, D, chain, Fraction(1, 2), ("A", "A"))
    assert lift.chain == (6, 27) and lift.path.points == (6, 27)


def test_chain_lift_rejects_long_hops(star):
    T, D = star
    with pytest.raises(ChainError, match="hop 1"):
        chain_lift(T, D, [0, 8], Fraction(1, 8))
    with pytest.raises(ChainError):
        chain_lift(T, D, [], Fraction(1))


def test_full_decomposition_examples(star):
    one = build_glued_tree(GluePlan((ArcSpec(plain(3), Fraction(1)),), ()))
    A = full_arc_decomposition(one)
    assert len(A.arcs) == 1 and A.report.ok
    A = full_arc_decomposition(star[0], 1)
    assert len(A.arcs) <= 6 and A.report.ok
    T = build_glued_tree(random_plan(21))
    A = full_arc_decomposition(T)
    assert A.report.ok and A.measured.C <= A.predicted


@settings(max_examples=8)
@given(st.integers(0, 10**6), st.integers(2, 5))
def test_random_trees_decompose(seed, n_arcs):
    T = build_glued_tree(random_plan(seed, n_arcs, 3))
    assert T.bounded_turning() == 1
    D = arc_decomposition(T)
    assert validate_treelike(T, D).ok
    assert geometric_constants(T, D).c3 == 1
    vs = range(0, T.size, 3)
    for x in vs:
        for y in vs:
            p = decomposition_path(T, D, x, y)
            assert is_decomposition_path(D, p.points, p.pieces) and is_minimal(D, p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        A = full_arc_decomposition(T)
    assert A.report.ok and not A.debv.anomalies
    assert validate_treelike(T, A.debv.decomposition).ok
    assert A.measured.C <= A.predicted


@settings(max_examples=10)
@given(st.integers(0, 10**6), st.data())
def test_random_chain_lifts(seed, data):
    T = build_glued_tree(random_plan(seed, 4, 3))
    D = arc_decomposition(T)
    walk = [data.draw(st.integers(0, T.size - 1))]
    for _ in range(data.draw(st.integers(1, 25))):
        walk.append(data.draw(st.sampled_from(T.adjacency[walk[-1]])))
    delta = max([T.d(a, b) for a, b in zip(walk, walk[1:])] + [Fraction(1, 64)])
    _assert_lift(T, D, walk, delta)
