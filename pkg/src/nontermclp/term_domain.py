"""Constraint backend for finite trees: unification, matching, containment,
flattening, and a bounded grounding oracle."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

from . import formula as F
from .errors import ResourceError, UnsatisfiableRuleError
from .syntax import (Atom, Fn, NormalizedRule, Pred, Query, Rel, Var, VarGen,
                     eqs, local_vars, rename_apart, term_depth, variables_of)

Substitution = Dict[Var, object]


def _walk(t, s):
    while isinstance(t, Var):
        nxt = s.get(t)
        if nxt is None:
            return t
        t = nxt
    return t


def _occurs(v, t, s) -> bool:
    t = _walk(t, s)
    if isinstance(t, Var):
        return t == v
    if isinstance(t, Fn):
        return any(_occurs(v, a, s) for a in t.args)
    return False


def _resolve(t, s):
    t = _walk(t, s)
    if isinstance(t, Fn) and t.args:
        return Fn(t.name, tuple(_resolve(a, s) for a in t.args))
    return t


def unify(equations: Iterable[Tuple[object, object]]) -> Optional[Substitution]:
    """Most general unifier of the equation set, or None.

    The occurs check is always performed (finite trees). The result is
    idempotent and never binds a variable to itself.
    """
    s: Substitution = {}
    stack = list(equations)
    while stack:
        a, b = stack.pop()
        a, b = _walk(a, s), _walk(b, s)
        if isinstance(a, Var):
            if a == b:
                continue
            if _occurs(a, b, s):
                return None
            s[a] = b
        elif isinstance(b, Var):
            if _occurs(b, a, s):
                return None
            s[b] = a
        elif isinstance(a, Fn) and isinstance(b, Fn):
            if a.name != b.name or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
        elif a != b:
            return None
    return {v: _resolve(t, s) for v, t in s.items()}


def solved_form(c: Sequence[Rel]) -> Optional[Substitution]:
    for r in c:
        if r.op != "=":
            raise ValueError(f"not a term-domain constraint: {r}")
    return unify((r.lhs, r.rhs) for r in c)


def is_satisfiable(c) -> bool:
    return solved_form(c) is not None


def match(general: Sequence, specific: Sequence) -> Optional[Substitution]:
    """One-sided unifier: ``general.subst(result) == specific``.

    Variables of ``specific`` behave as constants; callers rename apart.
    """
    if len(general) != len(specific):
        return None
    s: Substitution = {}
    stack = list(zip(general, specific))
    while stack:
        g, t = stack.pop()
        if isinstance(g, Var):
            bound = s.get(g)
            if bound is None:
                s[g] = t
            elif bound != t:
                return None
        elif isinstance(g, Fn):
            if not isinstance(t, Fn) or g.name != t.name or len(g.args) != len(t.args):
                return None
            stack.extend(zip(g.args, t.args))
        elif g != t:
            return None
    return {v: t for v, t in s.items() if v != t}


def _check_same_pred(a: Query, b: Query):
    if a.pred != b.pred:
        raise ValueError(f"queries over different predicates: {a.pred} vs {b.pred}")


def term_more_general(gen: Query, spec: Query) -> bool:
    """True iff Set(spec) is included in Set(gen)."""
    _check_same_pred(gen, spec)
    ts = solved_form(spec.constraint)
    if ts is None:
        return True
    tg = solved_form(gen.constraint)
    if tg is None:
        return False
    spec_args = tuple(a.subst(ts) for a in spec.args)
    gen_args = tuple(a.subst(tg) for a in gen.args)
    gen_args = rename_apart(Fn("", gen_args), spec_args).args
    return match(gen_args, spec_args) is not None


def compact(q: Query) -> Query:
    """Set-equivalent query with the constraint folded into the atom."""
    s = solved_form(q.constraint)
    if s is None:
        return q
    return Query(q.atom.subst(s), ())


# ---------------------------------------------------------------------------
# flat rules

@dataclass(frozen=True)
class FlatRule:
    """``p(X~) <- X~ = s~ & Y~ = t~ <> q(Y~)`` with Var(s~, t~) local."""
    head_pred: Pred
    body_pred: Pred
    head_vars: Tuple[Var, ...]
    body_vars: Tuple[Var, ...]
    s: Tuple
    t: Tuple
    locals: FrozenSet[Var]

    def __post_init__(self):
        params = set(self.head_vars) | set(self.body_vars)
        if not variables_of(self.s, self.t) <= self.locals or self.locals & params:
            raise ValueError("flat rule terms must range over local variables only")

    def normalized(self, source=None) -> NormalizedRule:
        c = eqs(self.head_vars, self.s) + eqs(self.body_vars, self.t)
        return NormalizedRule(self.head_pred, self.body_pred, self.head_vars,
                              self.body_vars, c, source)

    def __str__(self):
        return str(self.normalized())


def flat_form(r: NormalizedRule) -> Optional[FlatRule]:
    """Recognize a rule that is already flat as written (any domain)."""
    params = list(r.head_vars) + list(r.body_vars)
    if len(r.constraint) != len(params):
        return None
    image = {}
    for rel in r.constraint:
        if rel.op != "=" or not isinstance(rel.lhs, Var) or rel.lhs not in params:
            return None
        if rel.lhs in image:
            return None
        image[rel.lhs] = rel.rhs
    s = tuple(image[x] for x in r.head_vars)
    t = tuple(image[y] for y in r.body_vars)
    locs = local_vars(r)
    if not variables_of(s, t) <= locs:
        return None
    return FlatRule(r.head_pred, r.body_pred, r.head_vars, r.body_vars, s, t, frozenset(locs))


def flatten_term_rule(r: NormalizedRule, gen: Optional[VarGen] = None) -> FlatRule:
    """Flat form of a Term rule via its solved form.

    Raises UnsatisfiableRuleError if the constraint has no solution.
    """
    already = flat_form(r)
    if already is not None:
        return already
    theta = solved_form(r.constraint)
    if theta is None:
        raise UnsatisfiableRuleError(r.as_rule())
    s = tuple(x.subst(theta) for x in r.head_vars)
    t = tuple(y.subst(theta) for y in r.body_vars)
    gen = gen or VarGen.above(r)
    gen.reserve(r)
    ren = {v: gen.fresh(v.name) for v in sorted(variables_of(s, t), key=lambda v: v.id)}
    s = tuple(a.subst(ren) for a in s)
    t = tuple(a.subst(ren) for a in t)
    return FlatRule(r.head_pred, r.body_pred, r.head_vars, r.body_vars, s, t,
                    frozenset(ren.values()))


# ---------------------------------------------------------------------------
# bounded grounding oracle (tests only)

DEFAULT_GROUND_CAP = 200_000


def ground_terms(symbols: Dict[str, int], depth: int, cap: int = DEFAULT_GROUND_CAP):
    """All ground terms over ``symbols`` (name -> arity) of depth <= ``depth``."""
    consts = [Fn(n) for n, a in sorted(symbols.items()) if a == 0]
    funcs = [(n, a) for n, a in sorted(symbols.items()) if a > 0]
    level = list(consts)
    for _ in range(depth):
        nxt = list(consts)
        for name, ar in funcs:
            if len(level) ** ar > cap:
                raise ResourceError("ground universe exceeds cap")
            nxt.extend(Fn(name, args) for args in product(level, repeat=ar))
        level = nxt
        if len(level) > cap:
            raise ResourceError("ground universe exceeds cap")
    return level


def _ground_holds(r: Rel, v) -> bool:
    return r.lhs.subst(v) == r.rhs.subst(v)


def ground_instances(q: Query, universe: Tuple[Dict[str, int], int],
                     cap: int = DEFAULT_GROUND_CAP) -> set:
    """Ground atoms of Set(q) whose valuations range over the bounded universe,
    restricted to atoms whose arguments stay within the depth bound.

    This follows the definition literally (no unification involved).
    """
    symbols, depth = universe
    terms = ground_terms(symbols, depth, cap)
    vs = sorted(variables_of(q), key=lambda v: v.id)
    if len(terms) ** len(vs) > cap:
        raise ResourceError(f"{len(terms)}^{len(vs)} valuations exceed cap {cap}")
    out = set()
    for combo in product(terms, repeat=len(vs)):
        v = dict(zip(vs, combo))
        if not all(_ground_holds(r, v) for r in q.constraint):
            continue
        args = tuple(a.subst(v) for a in q.args)
        if all(term_depth(a) <= depth for a in args):
            out.add(Atom(q.pred, args))
    return out


def bounded_eval(f, valuation: Dict[Var, object], terms: Sequence) -> bool:
    """Evaluate a Term formula with quantifiers ranging over ``terms``.

    Refutation-oriented: a false result under a bounded universe is only
    evidence, except where the quantifier instances cover the needed values.
    """
    if isinstance(f, F.And):
        return all(bounded_eval(p, valuation, terms) for p in f.parts)
    if isinstance(f, F.Or):
        return any(bounded_eval(p, valuation, terms) for p in f.parts)
    if isinstance(f, F.Not):
        return not bounded_eval(f.body, valuation, terms)
    if isinstance(f, F.Implies):
        return (not bounded_eval(f.lhs, valuation, terms)) or bounded_eval(f.rhs, valuation, terms)
    if isinstance(f, (F.Exists, F.Forall)):
        want = any if isinstance(f, F.Exists) else all
        return want(bounded_eval(f.body, {**valuation, **dict(zip(f.vars, combo))}, terms)
                    for combo in product(terms, repeat=len(f.vars)))
    if isinstance(f, Rel):
        return _ground_holds(f, valuation)
    raise TypeError(f"cannot evaluate {f!r}")
