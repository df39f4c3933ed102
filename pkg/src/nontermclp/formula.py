"""First-order formulas over primitive constraints.

Leaves are :class:`~nontermclp.syntax.Rel` values or, after arithmetic
normalization, :class:`~nontermclp.lin_domain.LinAtom` values. ``TRUE`` is the
empty conjunction and ``FALSE`` the empty disjunction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .syntax import Query, VarGen, eqs, rename_apart, variables_of


@dataclass(frozen=True)
class And:
    parts: Tuple = ()

    def __str__(self):
        if not self.parts:
            return "true"
        return " & ".join(_wrap(p) for p in self.parts)


@dataclass(frozen=True)
class Or:
    parts: Tuple = ()

    def __str__(self):
        if not self.parts:
            return "false"
        return " | ".join(_wrap(p) for p in self.parts)


@dataclass(frozen=True)
class Not:
    body: object

    def __str__(self):
        return f"~{_wrap(self.body)}"


@dataclass(frozen=True)
class Implies:
    lhs: object
    rhs: object

    def __str__(self):
        return f"{_wrap(self.lhs)} -> {_wrap(self.rhs)}"


@dataclass(frozen=True)
class Exists:
    vars: Tuple
    body: object

    def __str__(self):
        if not self.vars:
            return str(self.body)
        return f"exists {','.join(v.name for v in self.vars)}. {_wrap(self.body)}"


@dataclass(frozen=True)
class Forall:
    vars: Tuple
    body: object

    def __str__(self):
        if not self.vars:
            return str(self.body)
        return f"forall {','.join(v.name for v in self.vars)}. {_wrap(self.body)}"


TRUE = And(())
FALSE = Or(())

_CONNECTIVES = (And, Or, Not, Implies, Exists, Forall)


def _wrap(f):
    if isinstance(f, (And, Or, Implies, Exists, Forall)) and f not in (TRUE, FALSE):
        if isinstance(f, (And, Or)) and len(f.parts) == 1:
            return _wrap(f.parts[0])
        return f"({f})"
    return str(f)


def conj(*parts):
    flat = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.parts)
        elif p == FALSE:
            return FALSE
        else:
            flat.append(p)
    return flat[0] if len(flat) == 1 else And(tuple(flat))


def disj(*parts):
    flat = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.parts)
        elif p == TRUE:
            return TRUE
        else:
            flat.append(p)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def exists(vs, body):
    vs = tuple(sorted(set(vs), key=lambda v: v.id))
    return Exists(vs, body) if vs else body


def forall(vs, body):
    vs = tuple(sorted(set(vs), key=lambda v: v.id))
    return Forall(vs, body) if vs else body


def free_vars(f) -> set:
    if isinstance(f, (And, Or)):
        out = set()
        for p in f.parts:
            out |= free_vars(p)
        return out
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, Implies):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - set(f.vars)
    return f.vars()


def leaves(f):
    if isinstance(f, (And, Or)):
        for p in f.parts:
            yield from leaves(p)
    elif isinstance(f, (Not, Exists, Forall)):
        yield from leaves(f.body)
    elif isinstance(f, Implies):
        yield from leaves(f.lhs)
        yield from leaves(f.rhs)
    else:
        yield f


def sat_formula(terms, query: Query, gen: Optional[VarGen] = None):
    """``exists Var(S') (terms = u' & d')`` for a variant S' of ``query``
    renamed apart from ``terms``."""
    terms = tuple(terms)
    if len(terms) != query.pred.arity:
        raise ValueError(f"sat: {len(terms)} terms for {query.pred}")
    if gen is None:
        gen = VarGen.above(terms, query)
    variant = rename_apart(query, terms, gen)
    return exists(variables_of(variant), conj(*eqs(terms, variant.args), *variant.constraint))
