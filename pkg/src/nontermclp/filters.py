"""Argument positions, filters, and derivation-neutrality checks.

A filter ``(tau, delta)`` selects argument positions ``tau(p)`` of each
predicate and constrains the selected arguments with a query ``delta(p)``
over the projected predicate ``p_t``. Three checks decide whether a filter
is derivation neutral for a rule:

* ``check_dnsyn``: four syntactic conditions on flat rules (sufficient);
* ``check_dnlog``: the logical characterization, decided by quantifier
  elimination for linear arithmetic; for finite trees it goes through the
  syntactic conditions, some of which are also necessary;
* open filters, whose ``delta`` constrains nothing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from . import formula as F
from . import lin_domain
from .backend import is_satisfiable, more_general
from .errors import ParseError
from .lin_domain import DEFAULT_CAP
from .syntax import (RLIN, TERM, Atom, NormalizedRule, Pred, Query, Var, VarGen,
                     local_vars, variables_of)
from .term_domain import FlatRule, flat_form, flatten_term_rule

CERTIFIED_SYN = "certified-syn"
CERTIFIED_LOG = "certified-log"
REFUTED_LOG = "refuted-log"
UNKNOWN = "unknown"
CERTIFIED = (CERTIFIED_SYN, CERTIFIED_LOG)


def projected_pred(p: Pred, k: int) -> Pred:
    return Pred(f"{p.name}_t", k)


@dataclass(frozen=True)
class PositionSet:
    """Selected argument positions (1-based) per predicate; absent means none."""
    positions: Tuple[Tuple[Pred, Tuple[int, ...]], ...] = ()

    @staticmethod
    def of(mapping: Mapping[Pred, Iterable[int]]) -> "PositionSet":
        items = []
        for p, pos in mapping.items():
            pos = tuple(sorted(set(pos)))
            for i in pos:
                if not 1 <= i <= p.arity:
                    raise ValueError(f"position {i} out of range for {p}")
            items.append((p, pos))
        items.sort(key=lambda it: (it[0].name, it[0].arity))
        return PositionSet(tuple(items))

    def __call__(self, p: Pred) -> Tuple[int, ...]:
        for q, pos in self.positions:
            if q == p:
                return pos
        return ()

    def preds(self) -> List[Pred]:
        return [p for p, _ in self.positions]

    def __str__(self):
        return ", ".join(f"{p}: {{{','.join(map(str, pos))}}}" for p, pos in self.positions)


def complement(tau: PositionSet, preds: Iterable[Pred] = ()) -> PositionSet:
    """Per predicate, the positions not selected by ``tau``."""
    mapping = {p: set(range(1, p.arity + 1)) - set(pos) for p, pos in tau.positions}
    for p in preds:
        mapping.setdefault(p, set(range(1, p.arity + 1)) - set(tau(p)))
    return PositionSet.of(mapping)


def _pick(seq, pos):
    return tuple(seq[i - 1] for i in pos)


def project(x, tau: PositionSet, pred: Optional[Pred] = None):
    """Projection of an atom, a query, or a term sequence (``pred`` required)."""
    if isinstance(x, Query):
        return Query(project(x.atom, tau), x.constraint)
    if isinstance(x, Atom):
        pos = tau(x.pred)
        return Atom(projected_pred(x.pred, len(pos)), _pick(x.args, pos))
    if pred is None:
        raise ValueError("projecting a term sequence needs its predicate")
    return _pick(tuple(x), tau(pred))


def _bar(tau: PositionSet, p: Pred) -> Tuple[int, ...]:
    chosen = set(tau(p))
    return tuple(i for i in range(1, p.arity + 1) if i not in chosen)


def project_bar(x, tau: PositionSet, pred: Optional[Pred] = None):
    """Projection on the complement of ``tau``."""
    p = pred or (x.pred if isinstance(x, (Query, Atom)) else None)
    return project(x, complement(tau, [p] if p else []), pred)


# ---------------------------------------------------------------------------
# filters

def _open_delta(p: Pred, k: int) -> Query:
    # negative ids never clash with program or generated variables
    zs = tuple(Var(-(i + 1), f"Z{i + 1}") for i in range(k))
    return Query(Atom(projected_pred(p, k), zs), ())


@dataclass(frozen=True)
class Filter:
    tau: PositionSet
    delta: Tuple[Tuple[Pred, Query], ...] = ()

    def __post_init__(self):
        for p, q in self.delta:
            k = len(self.tau(p))
            if q.atom.pred != projected_pred(p, k):
                raise ValueError(f"delta({p}) must be a query over {projected_pred(p, k)}")

    def delta_of(self, p: Pred) -> Query:
        for q, d in self.delta:
            if q == p:
                return d
        return _open_delta(p, len(self.tau(p)))

    def preds(self) -> List[Pred]:
        seen = self.tau.preds() + [p for p, _ in self.delta]
        out = []
        for p in seen:
            if p not in out:
                out.append(p)
        return out

    def __str__(self):
        return filter_literal(self)


def make_filter(tau: Mapping[Pred, Iterable[int]], delta: Mapping[Pred, Query],
                domain: str) -> Filter:
    """Build a filter; ``delta`` atoms are renamed to the projected predicate and
    their constraints must be satisfiable."""
    ts = PositionSet.of(tau)
    items = []
    for p, q in delta.items():
        k = len(ts(p))
        if len(q.args) != k:
            raise ValueError(f"delta({p}) has arity {len(q.args)}, expected {k}")
        if not is_satisfiable(q.constraint, domain):
            raise ValueError(f"delta({p}) has an unsatisfiable constraint")
        items.append((p, Query(Atom(projected_pred(p, k), q.args), q.constraint)))
    items.sort(key=lambda it: (it[0].name, it[0].arity))
    return Filter(ts, tuple(items))


def make_open_filter(tau: Mapping[Pred, Iterable[int]] | PositionSet,
                     gen: Optional[VarGen] = None) -> Filter:
    """The filter with ``delta(p) = <p_t(Z~) | true>`` for distinct fresh ``Z~``."""
    ts = tau if isinstance(tau, PositionSet) else PositionSet.of(tau)
    items = []
    for p, pos in ts.positions:
        if gen is None:
            items.append((p, _open_delta(p, len(pos))))
        else:
            zs = tuple(gen.fresh("Z") for _ in pos)
            items.append((p, Query(Atom(projected_pred(p, len(pos)), zs), ())))
    return Filter(ts, tuple(items))


def _is_open_query(q: Query) -> bool:
    args = q.args
    return (not q.constraint and all(isinstance(a, Var) for a in args)
            and len(set(args)) == len(args))


def is_open(flt: Filter) -> bool:
    return all(_is_open_query(q) for _, q in flt.delta)


def satisfies(s: Query, flt: Filter, domain: str, cap: int = DEFAULT_CAP) -> bool:
    """Set of the tau-projection of ``s`` is included in Set(delta(p))."""
    return more_general(flt.delta_of(s.pred), project(s, flt.tau), domain, cap)


def delta_more_general(s_gen: Query, s: Query, flt: Filter, domain: str,
                       cap: int = DEFAULT_CAP) -> bool:
    """``s_gen`` is Delta-more general than ``s``."""
    if s_gen.pred != s.pred:
        raise ValueError(f"queries over different predicates: {s_gen.pred} vs {s.pred}")
    bar = complement(flt.tau, [s.pred])
    if not more_general(project(s_gen, bar), project(s, bar), domain, cap):
        return False
    return satisfies(s_gen, flt, domain, cap)


def build_sat_formula(terms: Sequence, s: Query, gen: Optional[VarGen] = None):
    """``exists Var(S') (terms = u' & d')`` for a variant S' of ``s``."""
    return F.sat_formula(terms, s, gen)


# ---------------------------------------------------------------------------
# verdicts

@dataclass(frozen=True)
class DnVerdict:
    outcome: str
    dnsyn: Optional[Dict[int, bool]] = None
    formula: Optional[object] = None
    eliminated: Optional[object] = None
    reason: str = ""

    def __post_init__(self):
        if self.outcome == CERTIFIED_SYN:
            assert self.dnsyn is not None and all(self.dnsyn.values())

    @property
    def certified(self) -> bool:
        return self.outcome in CERTIFIED

    def to_json(self):
        return {
            "outcome": self.outcome,
            "dnsyn": None if self.dnsyn is None else {f"DNsyn{k}": v for k, v in sorted(self.dnsyn.items())},
            "formula": None if self.formula is None else str(self.formula),
            "eliminated": None if self.eliminated is None else str(self.eliminated),
            "reason": self.reason,
        }


def dnsyn_conditions(fr: FlatRule, flt: Filter, domain: str,
                     cap: int = DEFAULT_CAP) -> Dict[int, bool]:
    p, q = fr.head_pred, fr.body_pred
    tau = flt.tau
    s_tau = project(fr.s, tau, p)
    s_bar = project_bar(fr.s, tau, p)
    t_bar = project_bar(fr.t, tau, q)
    head_proj = Query(Atom(projected_pred(p, len(s_tau)), s_tau), ())
    t_tau = project(fr.t, tau, q)
    body_proj = Query(Atom(projected_pred(q, len(t_tau)), t_tau), ())
    vs = variables_of(s_tau)
    return {
        1: more_general(head_proj, flt.delta_of(p), domain, cap),
        2: more_general(flt.delta_of(q), body_proj, domain, cap),
        3: not (vs & variables_of(s_bar)),
        4: not (vs & variables_of(t_bar)),
    }


def check_dnsyn(fr: FlatRule, flt: Filter, domain: str, cap: int = DEFAULT_CAP) -> DnVerdict:
    conds = dnsyn_conditions(fr, flt, domain, cap)
    if all(conds.values()):
        return DnVerdict(CERTIFIED_SYN, conds, reason="all syntactic conditions hold")
    failed = ", ".join(f"DNsyn{k}" for k, v in sorted(conds.items()) if not v)
    return DnVerdict(UNKNOWN, conds, reason=f"failed: {failed}")


def build_dnlog_formula(r: NormalizedRule, flt: Filter, gen: Optional[VarGen] = None):
    """``c -> forall X|tau [sat(X|tau, delta(p)) -> exists Y (sat(Y|tau, delta(q)) & c)]``
    where the inner block quantifies Y|tau and the local variables."""
    gen = gen or VarGen.above(r)
    gen.reserve(r)
    c = F.conj(*r.constraint) if r.constraint else F.TRUE
    xs = project(r.head_vars, flt.tau, r.head_pred)
    ys = project(r.body_vars, flt.tau, r.body_pred)
    inner = F.exists(set(ys) | local_vars(r),
                     F.conj(build_sat_formula(ys, flt.delta_of(r.body_pred), gen), c))
    body = F.forall(xs, F.Implies(build_sat_formula(xs, flt.delta_of(r.head_pred), gen), inner))
    return F.Implies(c, body)


def build_closure_formula(r: NormalizedRule, flt: Filter, gen: Optional[VarGen] = None):
    """``c & sat(X|tau, delta(p)) -> sat(Y|tau, delta(q))``, read universally.

    The DNlog formula only asks for some body values inside ``delta(q)``; a step
    from a filtered query keeps every body value allowed by ``c``, so all of
    them must stay inside ``delta(q)`` as well.
    """
    gen = gen or VarGen.above(r)
    gen.reserve(r)
    c = F.conj(*r.constraint) if r.constraint else F.TRUE
    xs = project(r.head_vars, flt.tau, r.head_pred)
    ys = project(r.body_vars, flt.tau, r.body_pred)
    return F.Implies(F.conj(c, build_sat_formula(xs, flt.delta_of(r.head_pred), gen)),
                     build_sat_formula(ys, flt.delta_of(r.body_pred), gen))


def check_dnlog(r: NormalizedRule, flt: Filter, domain: str, cap: int = DEFAULT_CAP,
                gen: Optional[VarGen] = None) -> DnVerdict:
    """Decide (linear arithmetic) or certify/refute (finite trees) DNlog."""
    gen = gen or VarGen.above(r)
    if domain == RLIN:
        f = build_dnlog_formula(r, flt, gen)
        psi = lin_domain.qe(f, cap)
        valid = lin_domain.lin_valid(psi, cap)
        fr = flat_form(r)
        conds = dnsyn_conditions(fr, flt, domain, cap) if fr is not None else None
        if not valid:
            return DnVerdict(REFUTED_LOG, conds, f, psi, "formula is not valid")
        if not lin_domain.lin_valid(build_closure_formula(r, flt, gen), cap):
            return DnVerdict(REFUTED_LOG, conds, f, psi,
                             "formula is valid but body arguments can leave delta")
        return DnVerdict(CERTIFIED_LOG, conds, f, psi, "formula is valid")
    if domain != TERM:
        raise ValueError(f"unknown domain {domain!r}")
    fr = flatten_term_rule(r, gen)
    conds = dnsyn_conditions(fr, flt, domain, cap)
    f = build_dnlog_formula(r, flt, gen)
    if all(conds.values()):
        return DnVerdict(CERTIFIED_SYN, conds, f, reason="all syntactic conditions hold")
    necessary = [k for k in (1, 3, 4) if not conds[k]]
    if necessary:
        names = ", ".join(f"DNsyn{k}" for k in necessary)
        return DnVerdict(REFUTED_LOG, conds, f,
                         reason=f"necessary condition fails on the flat form: {names}")
    return DnVerdict(UNKNOWN, conds, f, reason="only DNsyn2 fails; undecided")


def is_certified(v: DnVerdict) -> bool:
    return v.outcome in CERTIFIED


# ---------------------------------------------------------------------------
# literal syntax: ``filter p: positions {1}, delta p_t(X) | {X >= 0}``

_ITEM = re.compile(
    r"^\s*(?:filter\s+)?(?P<pred>[a-z][A-Za-z0-9_]*)(?:/(?P<arity>\d+))?\s*:\s*"
    r"positions\s*\{(?P<pos>[^}]*)\}\s*(?:,\s*delta\s+(?P<delta>.+?))?\s*$", re.S)


def _split_items(text: str) -> List[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "({[":
            depth += 1
        elif ch in ")}]":
            depth -= 1
        if ch == ";" and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s for s in out if s.strip()]


def parse_filter(text: str, preds: Mapping[str, int], domain: str) -> Filter:
    """Parse one or more ``;``-separated filter literals.

    The predicate name inside ``delta`` is not significant; an absent ``delta``
    means the open filter for that predicate.
    """
    from .parser import parse_query

    tau: Dict[Pred, List[int]] = {}
    delta: Dict[Pred, Query] = {}
    items = _split_items(text)
    if not items:
        raise ParseError("empty filter literal")
    for item in items:
        m = _ITEM.match(item)
        if not m:
            raise ParseError(f"bad filter literal: {item.strip()!r}")
        name = m.group("pred")
        arity = int(m.group("arity")) if m.group("arity") else preds.get(name)
        if arity is None:
            raise ParseError(f"unknown predicate {name!r} in filter")
        if name in preds and preds[name] != arity:
            raise ParseError(f"predicate {name} has arity {preds[name]}, not {arity}")
        p = Pred(name, arity)
        try:
            pos = [int(x) for x in m.group("pos").replace(" ", "").split(",") if x]
        except ValueError:
            raise ParseError(f"bad position list in {item.strip()!r}") from None
        if any(not 1 <= i <= arity for i in pos):
            raise ParseError(f"position out of range for {name}/{arity}")
        tau[p] = pos
        if m.group("delta"):
            q = parse_query(m.group("delta").strip(), domain)
            if len(q.args) != len(set(pos)):
                raise ParseError(f"delta for {name} must have arity {len(set(pos))}")
            delta[p] = q
    try:
        return make_filter(tau, delta, domain)
    except ValueError as e:
        raise ParseError(str(e)) from None


def filter_literal(flt: Filter) -> str:
    parts = []
    for p in flt.preds():
        pos = ",".join(str(i) for i in flt.tau(p))
        parts.append(f"filter {p.name}: positions {{{pos}}}, delta {flt.delta_of(p)}")
    return "; ".join(parts)


def filter_to_json(flt: Filter):
    return {
        "literal": filter_literal(flt),
        "tau": {str(p): list(flt.tau(p)) for p in flt.preds()},
        "open": is_open(flt),
    }
