"""Abstract syntax of binary CLP programs over the Term and Rlin domains.

Every value here is immutable. The only mutable object is :class:`VarGen`,
the fresh-variable supply, which callers thread explicitly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Tuple

TERM = "term"
RLIN = "rlin"
DOMAINS = (TERM, RLIN)

ARITH_OPS = ("+", "-", "*", "/")
REL_OPS = ("=", "<", "=<", ">=", ">")


# ---------------------------------------------------------------------------
# terms

@dataclass(frozen=True)
class Var:
    id: int
    name: str = field(default="_", compare=False)

    def __str__(self):
        return self.name

    def __repr__(self):
        return f"Var({self.id}, {self.name!r})"

    def vars(self):
        return {self}

    def subst(self, s):
        return s.get(self, self)


@dataclass(frozen=True)
class Fn:
    """Compound term; constants are zero-arity compounds."""
    name: str
    args: Tuple["Term", ...] = ()

    def __str__(self):
        return term_str(self)

    def vars(self):
        out = set()
        for a in self.args:
            out |= a.vars()
        return out

    def subst(self, s):
        if not self.args:
            return self
        return Fn(self.name, tuple(a.subst(s) for a in self.args))


@dataclass(frozen=True)
class Num:
    """Exact rational constant (Rlin only)."""
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    def __str__(self):
        return num_str(self.value)

    def vars(self):
        return set()

    def subst(self, s):
        return self


Term = object  # Var | Fn | Num

NIL = Fn("[]")


def cons(head, tail):
    return Fn(".", (head, tail))


def mklist(items, tail=NIL):
    out = tail
    for it in reversed(list(items)):
        out = cons(it, out)
    return out


def num_str(q: Fraction) -> str:
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


_PREC = {"+": 500, "-": 500, "*": 400, "/": 400}


def term_str(t, prec=1200) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Num):
        s = num_str(t.value)
        if (t.value < 0 or t.value.denominator != 1) and prec < 500:
            return f"({s})"
        return s
    if t.name == "." and len(t.args) == 2:
        return _list_str(t)
    if t.name in _PREC and len(t.args) == 2:
        p = _PREC[t.name]
        left = term_str(t.args[0], p)
        right = term_str(t.args[1], p - 1)
        s = f"{left}{t.name}{right}"
        return f"({s})" if p > prec else s
    if t.name == "-" and len(t.args) == 1:
        s = "-" + term_str(t.args[0], 200)
        return f"({s})" if prec < 500 else s
    if not t.args:
        return t.name
    return f"{t.name}({','.join(term_str(a) for a in t.args)})"


def _list_str(t):
    items = []
    while isinstance(t, Fn) and t.name == "." and len(t.args) == 2:
        items.append(term_str(t.args[0]))
        t = t.args[1]
    body = ",".join(items)
    if t == NIL:
        return f"[{body}]"
    return f"[{body}|{term_str(t)}]"


def term_depth(t) -> int:
    if isinstance(t, Fn) and t.args:
        return 1 + max(term_depth(a) for a in t.args)
    return 0


def is_ground(t) -> bool:
    return not t.vars()


# ---------------------------------------------------------------------------
# atoms, constraints, queries, rules

@dataclass(frozen=True)
class Pred:
    name: str
    arity: int

    def __str__(self):
        return f"{self.name}/{self.arity}"


@dataclass(frozen=True)
class Atom:
    pred: Pred
    args: Tuple = ()

    def __post_init__(self):
        if len(self.args) != self.pred.arity:
            raise ValueError(f"atom {self.pred} given {len(self.args)} arguments")

    def __str__(self):
        if not self.args:
            return self.pred.name
        return f"{self.pred.name}({','.join(term_str(a) for a in self.args)})"

    def vars(self):
        out = set()
        for a in self.args:
            out |= a.vars()
        return out

    def subst(self, s):
        return Atom(self.pred, tuple(a.subst(s) for a in self.args))


def atom(name, *args):
    return Atom(Pred(name, len(args)), tuple(args))


@dataclass(frozen=True)
class Rel:
    """Primitive constraint ``lhs op rhs``."""
    op: str
    lhs: object
    rhs: object

    def __post_init__(self):
        if self.op not in REL_OPS:
            raise ValueError(f"unknown relation {self.op!r}")

    def __str__(self):
        return f"{term_str(self.lhs, 699)} {self.op} {term_str(self.rhs, 699)}"

    def vars(self):
        return self.lhs.vars() | self.rhs.vars()

    def subst(self, s):
        return Rel(self.op, self.lhs.subst(s), self.rhs.subst(s))


def eq(lhs, rhs):
    return Rel("=", lhs, rhs)


def eqs(lhs_seq, rhs_seq):
    return tuple(Rel("=", a, b) for a, b in zip(lhs_seq, rhs_seq))


Constraint = Tuple[Rel, ...]


def constraint_str(c) -> str:
    if not c:
        return "true"
    return ", ".join(str(r) for r in c)


def _braced(c):
    return "{" + ", ".join(str(r) for r in c) + "}"


@dataclass(frozen=True)
class Query:
    atom: Atom
    constraint: Constraint = ()

    @property
    def pred(self):
        return self.atom.pred

    @property
    def args(self):
        return self.atom.args

    def __str__(self):
        if not self.constraint:
            return str(self.atom)
        return f"{self.atom} | {_braced(self.constraint)}"

    def vars(self):
        out = self.atom.vars()
        for r in self.constraint:
            out |= r.vars()
        return out

    def subst(self, s):
        return Query(self.atom.subst(s), tuple(r.subst(s) for r in self.constraint))


@dataclass(frozen=True)
class Rule:
    head: Atom
    constraint: Constraint
    body: Atom
    rid: str = field(default="", compare=False)
    line: Optional[int] = field(default=None, compare=False)

    def __str__(self):
        goals = []
        if self.constraint:
            if all(r.op == "=" for r in self.constraint):
                goals.extend(str(r) for r in self.constraint)
            else:
                goals.append(_braced(self.constraint))
        goals.append(str(self.body))
        return f"{self.head} :- {', '.join(goals)}."

    @property
    def recursive(self):
        return self.head.pred == self.body.pred

    def vars(self):
        out = self.head.vars() | self.body.vars()
        for r in self.constraint:
            out |= r.vars()
        return out

    def subst(self, s):
        return Rule(self.head.subst(s), tuple(r.subst(s) for r in self.constraint),
                    self.body.subst(s), self.rid, self.line)

    def head_query(self):
        return Query(self.head, self.constraint)

    def body_query(self):
        return Query(self.body, self.constraint)


@dataclass(frozen=True)
class Clause:
    """General (possibly non-binary) Horn clause: head and a goal sequence.

    Goals are atoms or primitive constraints, in source order.
    """
    head: Atom
    body: Tuple = ()
    line: Optional[int] = field(default=None, compare=False)

    def __str__(self):
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(g) for g in self.body)}."

    def vars(self):
        out = self.head.vars()
        for g in self.body:
            out |= g.vars()
        return out

    def subst(self, s):
        return Clause(self.head.subst(s), tuple(g.subst(s) for g in self.body), self.line)

    @property
    def atoms(self):
        return tuple(g for g in self.body if isinstance(g, Atom))


@dataclass(frozen=True)
class NormalizedRule:
    """``p(X~) <- c <> q(Y~)`` with X~, Y~ distinct and mutually disjoint."""
    head_pred: Pred
    body_pred: Pred
    head_vars: Tuple[Var, ...]
    body_vars: Tuple[Var, ...]
    constraint: Constraint
    source: Optional[Rule] = field(default=None, compare=False)

    def __post_init__(self):
        hv, bv = set(self.head_vars), set(self.body_vars)
        if len(hv) != len(self.head_vars) or len(bv) != len(self.body_vars) or hv & bv:
            raise ValueError("head/body variables must be distinct and disjoint")

    @property
    def head(self):
        return Atom(self.head_pred, self.head_vars)

    @property
    def body(self):
        return Atom(self.body_pred, self.body_vars)

    @property
    def rid(self):
        return self.source.rid if self.source is not None else ""

    @property
    def recursive(self):
        return self.head_pred == self.body_pred

    def as_rule(self):
        src = self.source
        return Rule(self.head, self.constraint, self.body,
                    src.rid if src else "", src.line if src else None)

    def __str__(self):
        return str(self.as_rule())

    def vars(self):
        out = set(self.head_vars) | set(self.body_vars)
        for r in self.constraint:
            out |= r.vars()
        return out

    def subst(self, s):
        hv = tuple(s.get(v, v) for v in self.head_vars)
        bv = tuple(s.get(v, v) for v in self.body_vars)
        if not all(isinstance(v, Var) for v in hv + bv):
            raise ValueError("substitution must map rule parameters to variables")
        return NormalizedRule(self.head_pred, self.body_pred, hv, bv,
                              tuple(r.subst(s) for r in self.constraint), self.source)


@dataclass(frozen=True)
class Program:
    domain: str
    rules: Tuple[Rule, ...] = ()
    preds: Mapping[str, int] = field(default_factory=dict, compare=False)
    facts: Tuple[Query, ...] = ()

    def __str__(self):
        return pretty_program(self)

    def rule(self, rid: str) -> Rule:
        key = rid if rid.startswith("r") else f"r{rid}"
        for r in self.rules:
            if r.rid == key:
                return r
        raise KeyError(f"no rule {rid!r}")

    def vars(self):
        out = set()
        for r in self.rules:
            out |= r.vars()
        for f in self.facts:
            out |= f.vars()
        return out


def fact_str(q: Query) -> str:
    if not q.constraint:
        return f"{q.atom}."
    if all(r.op == "=" for r in q.constraint):
        return f"{q.atom} :- {constraint_str(q.constraint)}."
    return f"{q.atom} :- {_braced(q.constraint)}."


def pretty_program(prog: Program) -> str:
    lines = [f":- domain({prog.domain})."]
    for name, ar in sorted(prog.preds.items()):
        lines.append(f":- pred {name}/{ar}.")
    for f in prog.facts:
        lines.append(fact_str(f))
    for r in prog.rules:
        lines.append(str(r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# variables

_SUFFIX = re.compile(r"_\d+$")


class VarGen:
    """Monotonic fresh-variable supply; ids are never reused."""

    def __init__(self, start: int = 0):
        self._next = start

    @classmethod
    def above(cls, *objects) -> "VarGen":
        gen = cls()
        gen.reserve(*objects)
        return gen

    @property
    def next_id(self):
        return self._next

    def reserve(self, *objects):
        for v in variables_of(*objects):
            if v.id >= self._next:
                self._next = v.id + 1

    def fresh(self, hint: str = "_G") -> Var:
        base = _SUFFIX.sub("", hint) or "_G"
        v = Var(self._next, f"{base}_{self._next}")
        self._next += 1
        return v

    def named(self, name: str) -> Var:
        """A fresh variable that keeps ``name`` verbatim (parser use)."""
        v = Var(self._next, name)
        self._next += 1
        return v


def variables_of(*objects) -> set:
    out = set()
    for o in objects:
        if isinstance(o, (tuple, list, set, frozenset)):
            out |= variables_of(*o)
        elif o is not None:
            out |= o.vars()
    return out


def _sorted_vars(vs: Iterable[Var]):
    return sorted(vs, key=lambda v: v.id)


def rename_apart(obj, avoid=(), gen: Optional[VarGen] = None):
    """Return a variant of ``obj`` sharing no variable with ``avoid``.

    Every variable of ``obj`` is replaced by a fresh one; the mapping is
    injective, so the result is a variant.
    """
    if gen is None:
        gen = VarGen.above(obj, avoid)
    else:
        gen.reserve(avoid)
    mapping = {v: gen.fresh(v.name) for v in _sorted_vars(variables_of(obj))}
    return obj.subst(mapping)


def renaming(vs, gen: VarGen):
    return {v: gen.fresh(v.name) for v in _sorted_vars(vs)}


def local_vars(r: NormalizedRule) -> set:
    """Variables of the constraint that are neither head nor body parameters."""
    cv = variables_of(r.constraint)
    return cv - set(r.head_vars) - set(r.body_vars)


def _is_normal_shape(rule: Rule) -> bool:
    hv, bv = rule.head.args, rule.body.args
    if not all(isinstance(a, Var) for a in hv + bv):
        return False
    return len(set(hv)) == len(hv) and len(set(bv)) == len(bv) and not set(hv) & set(bv)


def normalize_rule(rule: Rule, gen: Optional[VarGen] = None) -> NormalizedRule:
    """Move head and body arguments into the constraint.

    Rules already of the shape ``p(X~) <- c <> q(Y~)`` are kept as they are.
    """
    if _is_normal_shape(rule):
        return NormalizedRule(rule.head.pred, rule.body.pred, tuple(rule.head.args),
                              tuple(rule.body.args), rule.constraint, rule)
    gen = gen or VarGen.above(rule)
    gen.reserve(rule)
    xs = tuple(gen.fresh("X") for _ in rule.head.args)
    ys = tuple(gen.fresh("Y") for _ in rule.body.args)
    c = eqs(xs, rule.head.args) + eqs(ys, rule.body.args) + tuple(rule.constraint)
    return NormalizedRule(rule.head.pred, rule.body.pred, xs, ys, c, rule)
