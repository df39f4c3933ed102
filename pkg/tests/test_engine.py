import json
import random

import pytest

from conftest import CORPUS, load
from nontermclp.backend import equivalent, more_general
from nontermclp.engine import (FAILED, RUNNING, _variant_key, binary_unfold, derive, dn_check,
                               lifting_check, search_witness, step, witness_loop)
from nontermclp.errors import ResourceError
from nontermclp.filters import parse_filter
from nontermclp.parser import parse_clauses, parse_program, parse_query
from nontermclp.syntax import RLIN, TERM, Pred, VarGen, pretty_program, variables_of

import randgen


def test_step_example_rlin():
    prog = load("shifted_bounds.clp")
    r = prog.rules[0]
    q = parse_query("p(X, Y) | {X >= 0, Y =< 10}", RLIN)
    st = step(q, r, RLIN)
    assert st is not None
    assert not variables_of(st.variant) & variables_of(q)
    # head equations, then the rule constraint, then the query constraint
    assert len(st.target.constraint) == 2 + 2 + 2
    assert st.target.constraint[-2:] == q.constraint
    assert more_general(parse_query("p(A, B) | A >= 1, B =< 11", RLIN), st.target, RLIN)


def test_step_failure_and_pred_mismatch():
    prog = load("shifted_bounds.clp")
    assert step(parse_query("p(X, Y) | {X < 0}", RLIN), prog.rules[0], RLIN) is None
    with pytest.raises(ValueError):
        step(parse_query("q(X)", RLIN), prog.rules[0], RLIN)


def test_derive_two_steps():
    prog = load("shifted_bounds.clp")
    q = parse_query("p(X, Y) | {X >= 0, Y =< 10}", RLIN)
    d = derive(prog, q, 2)
    assert len(d) == 2 and d.status == RUNNING
    lines = d.trace_lines()
    assert len(lines) == 2 and all(line.startswith("⟹ [r1] p(") for line in lines)
    # the second query accumulates both constraints
    assert set(d.steps[0].target.constraint) <= set(d.steps[1].target.constraint)
    assert json.loads(d.trace_json())["status"] == RUNNING


def test_derive_fails_after_budget_exhausted():
    prog = parse_program("p(X) :- {X >= 1}, p(X - 1).", RLIN)
    d = derive(prog, parse_query("p(X) | X = 3", RLIN), 10)
    assert d.status == FAILED and len(d) == 3
    assert d.trace_lines()[-1] == "failed at step 3"
    assert len(derive(prog, parse_query("p(X)", RLIN), 0)) == 0


def test_derive_compact_equivalent():
    prog = load("shifted_bounds.clp")
    q = parse_query("p(X, Y) | {X >= 0, Y =< 10}", RLIN)
    d1 = derive(prog, q, 3)
    d2 = derive(prog, q, 3, compact=True)
    for a, b in zip(d1.queries(), d2.queries()):
        assert equivalent(a, b, RLIN)
    assert len(d2.queries()[-1].constraint) < len(d1.queries()[-1].constraint)


def test_witness_append():
    prog = load("append.pl")
    q = parse_query("append([X|Xs], Ys, [X|Zs])")
    w = search_witness(prog, q, 100)
    assert w.found and w.depth == 100 and not w.exhausted
    assert w.rules == ("r1",) * 100


def test_witness_terminating():
    prog = parse_program("p(X) :- {X >= 1}, p(X - 1).", RLIN)
    w = search_witness(prog, parse_query("p(X) | X =< 5", RLIN), 100)
    assert not w.found and not w.exhausted and w.depth == 5
    assert not witness_loop(prog, parse_query("p(X) | X =< 5", RLIN), 100)


def test_witness_backtracks():
    prog = parse_program("p(X) :- X = a, p(X).\np(X) :- p(X).")
    assert witness_loop(prog, parse_query("p(b)"), 50)


def test_witness_budget():
    prog = parse_program("p(X) :- p(X).\np(X) :- p(X).")
    w = search_witness(prog, parse_query("p(a)"), 10**6, node_budget=50)
    assert w.exhausted and not w.found


def test_lifting_example():
    prog = load("shifted_bounds.clp")
    r = prog.rules[0]
    s = parse_query("p(X, Y) | {X >= 3, Y = 2}", RLIN)
    s_gen = parse_query("p(A, B) | {A >= 0, B =< 10}", RLIN)
    st = step(s, r, RLIN)
    assert lifting_check(st, s_gen, r, RLIN)


def test_dn_check_examples():
    prog = load("shifted_bounds.clp")
    r = prog.rules[0]
    flt = parse_filter("p: positions {1}, delta p_t(X) | {X >= 0}", {"p": 2}, RLIN)
    s = parse_query("p(X, Y) | {X >= 3, Y = 2}", RLIN)
    s_gen = parse_query("p(A, B) | {A = 0, B =< 10}", RLIN)
    assert dn_check(r, flt, s, s_gen, RLIN) is True
    # premise fails: not Delta-more general
    assert dn_check(r, flt, s, parse_query("p(A, B) | {A = -1}", RLIN), RLIN) is None
    # the open filter is not neutral: s_gen's first argument may be negative
    open_flt = parse_filter("p: positions {1}", {"p": 2}, RLIN)
    s_neg = parse_query("p(A, B) | {A = -1, B =< 10}", RLIN)
    assert dn_check(r, open_flt, s, s_neg, RLIN) is False


@pytest.mark.parametrize("domain", [TERM, RLIN])
def test_lifting_random(domain):
    rng = random.Random(17)
    p = Pred("p", 2)
    done = 0
    for _ in range(240):
        gen = VarGen()
        if domain == TERM:
            r = randgen.term_rule(rng, gen, p, p)
            s = randgen.term_query(rng, gen, p)
        else:
            r = randgen.lin_rule(rng, gen, p, p)
            s = randgen.lin_query(rng, gen, p)
        st = step(s, r, domain, gen=gen)
        if st is None:
            continue
        # a generalization: drop the constraint
        s_gen = type(s)(s.atom, ())
        assert lifting_check(st, s_gen, r, domain, gen)
        done += 1
    assert done > 30


def load_text(name):
    return (CORPUS / name).read_text()


def _unfold(text, depth, **kw):
    _, clauses, preds = parse_clauses(text)
    return binary_unfold(clauses, depth, preds=preds, **kw)


def test_unfold_chain_depth_two():
    prog = _unfold(load_text("unfold_chain.pl"), 2)
    rules = {str(r) for r in prog.rules}
    assert "p :- r." in rules
    assert "r :- r." in rules
    assert "p :- q." in rules
    with pytest.raises(ValueError):
        _unfold(load_text("unfold_chain.pl"), 0)


def test_unfold_chain_depth_one_has_no_p_to_r():
    prog = _unfold(load_text("unfold_chain.pl"), 1)
    assert "p :- r." not in {str(r) for r in prog.rules}
    assert [str(f.atom) for f in prog.facts] == ["q"]


def test_unfold_binary_program_identity():
    text = load_text("append.pl")
    prog = _unfold(text, 3)
    orig = parse_program(text)
    assert len(prog.rules) == 1
    a, b = prog.rules[0], orig.rules[0]
    assert equivalent(parse_query(str(a.head)), parse_query(str(b.head)), TERM)


def test_unfold_output_reparses():
    text = "app([], Ys, Ys).\napp([X|Xs], Ys, [X|Zs]) :- app(Xs, Ys, Zs).\n" \
           "nrev([], []).\nnrev([X|Xs], R) :- nrev(Xs, T), app(T, [X], R).\n"
    prog = _unfold(text, 3)
    again = parse_program(pretty_program(prog))
    assert len(again.rules) == len(prog.rules)
    heads = {(str(r.head.pred), str(r.body.pred)) for r in prog.rules}
    assert ("nrev/2", "nrev/2") in heads and ("nrev/2", "app/3") in heads


def test_unfold_compose_and_cap():
    text = "p(X) :- q(X).\nq(X) :- r(X).\nr(X) :- r(X)."
    plain = {_variant_key(r.head, r.body) for r in _unfold(text, 2).rules}
    composed = {_variant_key(r.head, r.body) for r in _unfold(text, 2, compose=True).rules}
    assert plain <= composed
    assert any(k[0] == "p/1" and "r/1" in k for k in composed - plain)
    with pytest.raises(ResourceError):
        _unfold("p(s(X)) :- p(X), p(X).\np(z).", 6, cap=10)


def test_witness_fails_on_ground_mismatch():
    prog = parse_program("p(f(X)) :- p(X).")
    assert not witness_loop(prog, parse_query("p(a)"), 1)
