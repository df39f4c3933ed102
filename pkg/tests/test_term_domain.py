import random
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nontermclp.backend import equivalent
from nontermclp.engine import step
from nontermclp.errors import ResourceError
from nontermclp.parser import parse_program, parse_query
from nontermclp.syntax import TERM, Fn, Pred, Rel, Var, VarGen, normalize_rule, variables_of
from nontermclp.term_domain import (compact, flat_form, flatten_term_rule, ground_instances,
                                    ground_terms, match, solved_form, term_more_general, unify)

import randgen


def _terms(*texts):
    """Parse terms in one variable scope; returns the terms and a name map."""
    args = parse_query("t(" + ", ".join(texts) + ")").args
    return args, {v.name: v for v in variables_of(args)}


def test_unify_examples():
    (a, b), _ = _terms("f(X, g(Y, a))", "f(g(Z, Z), W)")
    s = unify([(a, b)])
    assert s is not None
    assert a.subst(s) == b.subst(s)
    (a, b, c), _ = _terms("f(X)", "g(X)", "X")
    assert unify([(a, b)]) is None
    assert unify([(c, a)]) is None
    assert unify([]) == {}


def test_unify_idempotent():
    (x, fy, y, g), _ = _terms("X", "f(Y)", "Y", "g(Z, a)")
    s = unify([(x, fy), (y, g)])
    for v, t in s.items():
        assert t.subst(s) == t
        assert not variables_of(t) & set(s)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_unify_is_most_general(seed):
    rng = random.Random(seed)
    gen = VarGen()
    vs = [gen.fresh("X"), gen.fresh("Y")]
    a = randgen.term(rng, vs, 2, randgen.SMALL_SYMBOLS)
    b = randgen.term(rng, vs, 2, randgen.SMALL_SYMBOLS)
    s = unify([(a, b)])
    if s is not None:
        assert a.subst(s) == b.subst(s)
    terms = ground_terms(randgen.SMALL_SYMBOLS, 2)
    for combo in product(terms, repeat=2):
        g = dict(zip(vs, combo))
        if a.subst(g) != b.subst(g):
            continue
        # every ground unifier factors through the mgu
        assert s is not None
        for v in vs:
            assert v.subst(s).subst(g) == v.subst(g)


def test_solved_form_rejects_inequalities():
    q = parse_query("p(X) | X = f(Y)")
    assert solved_form(q.constraint) is not None
    with pytest.raises(ValueError):
        solved_form((Rel("<", Var(1, "X"), Var(2, "Y")),))


def test_match_examples():
    (g, s, ab, fa, fy, z, gz), names = _terms("f(X, X)", "f(a, a)", "f(a, b)", "f(a)",
                                              "f(Y)", "Z", "g(Z, a)")
    assert match((g,), (s,)) == {names["X"]: Fn("a")}
    assert match((g,), (ab,)) is None
    assert match((fa,), (fy,)) is None
    assert match((z,), (gz,)) is not None


@pytest.mark.parametrize("gen_text,spec_text,expected", [
    ("p(X)", "p(f(a))", True),
    ("p(f(X))", "p(Y)", False),
    ("p(X, X)", "p(Y, Z)", False),
    ("p(Y, Z)", "p(X, X)", True),
    ("p(X) | X = f(Y)", "p(f(f(a)))", True),
    ("p(X) | X = f(Y), Y = a", "p(f(b))", False),
    ("p(X) | X = f(X)", "p(a)", False),
    ("p(a)", "p(X) | X = f(X)", True),
])
def test_more_general_examples(gen_text, spec_text, expected):
    assert term_more_general(parse_query(gen_text), parse_query(spec_text)) is expected


def test_more_general_rejects_different_predicates():
    with pytest.raises(ValueError):
        term_more_general(parse_query("p(X)"), parse_query("q(X)"))


def test_compact_is_equivalent():
    q = parse_query("p(X, Y) | X = f(Z), Y = g(Z, a)")
    c = compact(q)
    assert c.constraint == ()
    assert equivalent(q, c, TERM)


def test_ground_terms_counts():
    assert len(ground_terms(randgen.SMALL_SYMBOLS, 0)) == 1
    assert len(ground_terms(randgen.SMALL_SYMBOLS, 3)) == 4
    assert len(ground_terms({"a": 0, "g": 2}, 2)) == 1 + 2 * 2
    with pytest.raises(ResourceError):
        ground_terms({"a": 0, "g": 2}, 6, cap=1000)


def test_ground_instances_example():
    q = parse_query("p(X, Y) | X = f(Y)")
    got = ground_instances(q, (randgen.SMALL_SYMBOLS, 2))
    assert len(got) == 2
    assert all(a.args[0] == Fn("f", (a.args[1],)) for a in got)


def test_flat_form_recognizes_flat_rules():
    r = parse_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).").rules[0]
    fr = flat_form(normalize_rule(r))
    assert fr is not None
    assert str(fr.s[0]) == "f(A)" and str(fr.t[0]) == "f(f(A))"
    r = parse_program("p(X) :- X = f(Y), p(Y).").rules[0]
    assert flat_form(normalize_rule(r)) is None


def test_flatten_append():
    r = parse_program("append([X|Xs],Ys,[X|Zs]) :- append(Xs,Ys,Zs).").rules[0]
    n = normalize_rule(r)
    fr = flatten_term_rule(n)
    assert not variables_of(fr.s, fr.t) & (set(fr.head_vars) | set(fr.body_vars))
    # the body arguments become local variables shared with the head terms
    assert all(isinstance(t, Var) for t in fr.t)


@pytest.mark.parametrize("seed", range(4))
def test_flattening_preserves_derivation_steps(seed):
    """A rule and its flat form have the same one-step successors."""
    rng = random.Random(seed)
    p = Pred("p", 2)
    for _ in range(60):
        gen = VarGen()
        r = randgen.term_rule(rng, gen, p, p)
        q = randgen.term_query(rng, gen, p)
        n = normalize_rule(r, gen)
        fr = flatten_term_rule(n, gen).normalized(r).as_rule()
        s1 = step(q, r, TERM, gen=gen)
        s2 = step(q, fr, TERM, gen=gen)
        assert (s1 is None) == (s2 is None)
        if s1 is not None:
            assert equivalent(s1.target, s2.target, TERM)


def test_more_general_matches_ground_oracle_examples():
    universe = (randgen.SMALL_SYMBOLS, 3)
    pairs = [("p(X, Y)", "p(f(Z), Z)"), ("p(f(X), X)", "p(Y, Z)"), ("p(X, X)", "p(a, a)")]
    for g_text, s_text in pairs:
        g, s = parse_query(g_text), parse_query(s_text)
        for a, b in ((g, s), (s, g)):
            oracle = ground_instances(b, universe) <= ground_instances(a, universe)
            assert term_more_general(a, b) == oracle
