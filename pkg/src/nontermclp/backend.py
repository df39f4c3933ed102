"""Dispatch of constraint operations to the backend of a domain."""
from __future__ import annotations

from typing import Optional, Sequence

from . import lin_domain, term_domain
from .syntax import RLIN, TERM, Query, Rel, VarGen


def _check(domain):
    if domain not in (TERM, RLIN):
        raise ValueError(f"unknown domain {domain!r}")


def is_satisfiable(c: Sequence[Rel], domain: str) -> bool:
    _check(domain)
    if domain == TERM:
        return term_domain.is_satisfiable(c)
    return lin_domain.is_satisfiable(c)


def more_general(gen: Query, spec: Query, domain: str,
                 cap: int = lin_domain.DEFAULT_CAP) -> bool:
    """True iff Set(spec) is included in Set(gen)."""
    _check(domain)
    if domain == TERM:
        return term_domain.term_more_general(gen, spec)
    return lin_domain.lin_more_general(gen, spec, cap)


def equivalent(a: Query, b: Query, domain: str, cap: int = lin_domain.DEFAULT_CAP) -> bool:
    return more_general(a, b, domain, cap) and more_general(b, a, domain, cap)


def compact(q: Query, domain: str, gen: Optional[VarGen] = None) -> Query:
    """A set-equivalent query with a simplified constraint."""
    _check(domain)
    if domain == TERM:
        return term_domain.compact(q)
    return lin_domain.compact(q, gen)
