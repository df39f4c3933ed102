import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS
from nontermclp.backend import equivalent
from nontermclp.engine import derive
from nontermclp.errors import ArityError, NonLinearError, ParseError, UnsatisfiableRuleError
from nontermclp.parser import parse_program, parse_query
from nontermclp.syntax import (RLIN, TERM, Num, Pred, Program, VarGen, local_vars, normalize_rule,
                               pretty_program, rename_apart, variables_of)

import randgen


def test_parse_append_rule():
    p = parse_program("append([X|Xs],Ys,[X|Zs]) :- append(Xs,Ys,Zs).")
    assert p.domain == TERM
    assert len(p.rules) == 1
    r = p.rules[0]
    assert r.constraint == ()
    assert r.head.pred == Pred("append", 3) and r.recursive


def test_parse_rlin_rule():
    p = parse_program("p(X,Y) :- {X >= 0, Y =< 10}, p(X+1,Y+1).", RLIN)
    assert len(p.rules) == 1
    assert len(p.rules[0].constraint) == 2


def test_parse_empty():
    p = parse_program("")
    assert p.rules == () and p.facts == ()


def test_domain_directive_and_decimals():
    p = parse_program(":- domain(rlin).\np(X) :- {X >= 0.5, Y = X/2}, p(Y).")
    assert p.domain == RLIN
    c = p.rules[0].constraint
    assert c[0].rhs == Num(Fraction(1, 2))


def test_parse_query_forms():
    q = parse_query("p(X,Y) | {X >= 0, Y =< 10}", RLIN)
    assert len(q.constraint) == 2
    q = parse_query("p(X)")
    assert q.constraint == ()


def test_query_arity_error():
    p = parse_program(":- pred p/2.\np(X,Y) :- p(Y,X).")
    with pytest.raises(ArityError):
        parse_query("p(f(X,Y))", program=p)


def test_parse_error_position():
    with pytest.raises(ParseError) as e:
        parse_program("p(X) :- \n  q(X.")
    assert e.value.line == 2


def test_arity_mismatch_in_program():
    with pytest.raises(ArityError):
        parse_program("p(X) :- p(X, Y).")


def test_unsatisfiable_rule_rejected():
    with pytest.raises(UnsatisfiableRuleError) as e:
        parse_program("p(X) :- {X > 0, X < 0}, p(X).", RLIN)
    assert e.value.line == 1
    with pytest.raises(UnsatisfiableRuleError):
        parse_program("p(X) :- X = f(X), p(X).")


def test_non_binary_rejected():
    with pytest.raises(ParseError):
        parse_program("p :- q, r.")


def test_nonlinear_rejected():
    with pytest.raises(NonLinearError):
        parse_program("p(X) :- {X*X >= 0}, p(X).", RLIN)
    with pytest.raises(NonLinearError):
        parse_program("p(X) :- {Y = 1/X}, p(Y).", RLIN)


def test_variables_of():
    p = parse_query("p(f(X),Y)")
    assert {v.name for v in variables_of(p.atom)} == {"X", "Y"}
    assert variables_of(()) == set()
    q = parse_query("p(X) | X = f(A), Y = f(f(A))")
    assert {v.name for v in variables_of(q.constraint)} == {"X", "Y", "A"}


def test_rename_apart_basic():
    p = parse_program("p(X,Y) :- q(Y,X).")
    r = p.rules[0]
    x = next(v for v in r.vars() if v.name == "X")
    v = rename_apart(r, {x})
    assert not (variables_of(v) & variables_of(r))
    assert str(v.head.pred) == "p/2"


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_rename_apart_grows_avoid(seed):
    rng = random.Random(seed)
    gen = VarGen()
    avoid = set()
    for _ in range(3):
        q = randgen.term_query(rng, gen, Pred("p", 2))
        v = rename_apart(q, avoid)
        assert not (variables_of(v) & avoid)
        assert not (variables_of(v) & variables_of(q))
        avoid |= variables_of(v) | variables_of(q)


def test_local_vars_examples():
    p = parse_program(":- domain(rlin).\n"
                      "p(X1,X2) :- {X1 = A+B, A >= 0, B >= 0, X2 =< 10, Y1 = X1+1, Y2 = X2+1}, p(Y1,Y2).")
    assert {v.name for v in local_vars(normalize_rule(p.rules[0]))} == {"A", "B"}
    p = parse_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).")
    assert {v.name for v in local_vars(normalize_rule(p.rules[0]))} == {"A"}
    p = parse_program("p(X) :- p(Y).")
    assert local_vars(normalize_rule(p.rules[0])) == set()


def test_normalize_rlin_example():
    p = parse_program("p(X,Y) :- {X >= 0, Y =< 10}, p(X+1,Y+1).", RLIN)
    n = normalize_rule(p.rules[0])
    assert len(n.head_vars) == 2 and len(n.body_vars) == 2
    assert not set(n.head_vars) & set(n.body_vars)
    # head equations, body equations, then the original constraint
    assert len(n.constraint) == 6
    assert str(n.constraint[2].rhs) == "X+1"


def test_normalize_idempotent_on_normal_shape():
    p = parse_program("p(X) :- X = f(A), Y = f(f(A)), p(Y).")
    n = normalize_rule(p.rules[0])
    assert n.as_rule() == p.rules[0]
    assert normalize_rule(n.as_rule()).constraint == n.constraint


def test_normalize_append_folds_arguments():
    p = parse_program("append([X|Xs],Ys,[X|Zs]) :- append(Xs,Ys,Zs).")
    n = normalize_rule(p.rules[0])
    assert len(n.constraint) == 6
    assert all(r.op == "=" for r in n.constraint)


def test_local_vars_disjoint_from_parameters():
    rng = random.Random(3)
    for _ in range(100):
        gen = VarGen()
        r = randgen.term_rule(rng, gen, Pred("p", 2), Pred("p", 2))
        n = normalize_rule(r, gen)
        assert not local_vars(n) & (set(n.head_vars) | set(n.body_vars))


@pytest.mark.parametrize("name", sorted(p.name for p in CORPUS.iterdir() if "unfold" not in p.name))
def test_pretty_print_round_trip(name):
    p = parse_program((CORPUS / name).read_text())
    q = parse_program(pretty_program(p))
    assert pretty_program(q) == pretty_program(p)


def _run(rule, query, domain, depth):
    prog = Program(domain, (rule,), {})
    return derive(prog, query, depth, VarGen.above(rule, query))


@pytest.mark.parametrize("domain", [TERM, RLIN])
def test_normalize_preserves_derivations(domain):
    rng = random.Random(11)
    p = Pred("p", 2)
    checked = 0
    for _ in range(200 if domain == TERM else 60):
        gen = VarGen()
        if domain == TERM:
            r = randgen.term_rule(rng, gen, p, p)
            q = randgen.term_query(rng, gen, p)
        else:
            r = randgen.lin_rule(rng, gen, p, p)
            q = randgen.lin_query(rng, gen, p)
        n = normalize_rule(r, VarGen.above(r, q)).as_rule()
        d1 = _run(r, q, domain, 6)
        d2 = _run(n, q, domain, 6)
        assert len(d1) == len(d2) and d1.status == d2.status
        if len(d1):
            t1, t2 = d1.steps[-1].target, d2.steps[-1].target
            assert equivalent(t1, t2, domain)
            checked += 1
    assert checked > 20
