"""Derivation simulator for binary CLP programs and a binary unfolder for
general Horn clauses over finite trees."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from . import backend, lin_domain
from .errors import ResourceError
from .lin_domain import DEFAULT_CAP
from .syntax import (TERM, Atom, Clause, Program, Query, Rel, Rule, VarGen, eqs,
                     rename_apart)
from .term_domain import unify

RUNNING = "running"
FAILED = "failed"
EXHAUSTED = "exhausted-budget"


@dataclass(frozen=True)
class DerivationStep:
    source: Query
    rid: str
    variant: Rule
    target: Query

    def to_json(self):
        return {"rule": self.rid, "query": str(self.target)}


@dataclass
class Derivation:
    initial: Query
    steps: List[DerivationStep] = field(default_factory=list)
    status: str = RUNNING

    def __len__(self):
        return len(self.steps)

    def queries(self) -> List[Query]:
        return [self.initial] + [s.target for s in self.steps]

    def trace_lines(self) -> List[str]:
        lines = [f"⟹ [{s.rid}] {s.target}" for s in self.steps]
        if self.status == FAILED:
            lines.append(f"failed at step {len(self.steps)}")
        return lines

    def trace_json(self) -> str:
        return json.dumps({
            "initial": str(self.initial),
            "steps": [s.to_json() for s in self.steps],
            "status": self.status,
        }, indent=2)


def step(s: Query, r: Rule, domain: str, avoid: Iterable = (), gen: Optional[VarGen] = None,
         compact: bool = False) -> Optional[DerivationStep]:
    """One derivation step of ``s`` with ``r`` renamed apart from ``s`` and ``avoid``."""
    if s.pred != r.head.pred:
        raise ValueError(f"rule {r.rid} is for {r.head.pred}, query is for {s.pred}")
    if gen is None:
        gen = VarGen.above(s, r, tuple(avoid))
    else:
        gen.reserve(s, tuple(avoid))
    variant = rename_apart(r, (), gen)
    c = eqs(variant.head.args, s.args) + tuple(variant.constraint) + tuple(s.constraint)
    if compact and domain != TERM:
        target = lin_domain.compact_or_none(Query(variant.body, c), gen)
        if target is None:
            return None
        return DerivationStep(s, r.rid, variant, target)
    if not backend.is_satisfiable(c, domain):
        return None
    target = Query(variant.body, c)
    if compact:
        target = backend.compact(target, domain, gen)
    return DerivationStep(s, r.rid, variant, target)


def derive(program: Program, s: Query, max_steps: int, gen: Optional[VarGen] = None,
           compact: bool = False) -> Derivation:
    """Apply the first applicable rule (program order) at each step."""
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    gen = gen or VarGen.above(program, s)
    d = Derivation(s)
    cur = s
    for _ in range(max_steps):
        nxt = None
        for r in program.rules:
            if r.head.pred != cur.pred:
                continue
            nxt = step(cur, r, program.domain, (), gen, compact)
            if nxt is not None:
                break
        if nxt is None:
            d.status = FAILED
            return d
        d.steps.append(nxt)
        cur = nxt.target
    d.status = RUNNING
    return d


@dataclass
class WitnessResult:
    found: bool
    depth: int
    exhausted: bool
    nodes: int
    rules: Tuple[str, ...] = ()

    def __bool__(self):
        return self.found


def search_witness(program: Program, s: Query, n: int, node_budget: int = 20_000,
                   gen: Optional[VarGen] = None) -> WitnessResult:
    """Depth-first search (program order, backtracking) for a derivation of
    length ``n``; ``exhausted`` is set when the node budget ran out."""
    if n < 1:
        raise ValueError("witness depth must be >= 1")
    gen = gen or VarGen.above(program, s)
    rules = program.rules
    stack = [(s, 0)]  # (query, index of next rule to try)
    path: List[str] = []
    nodes = 0
    best = 0
    while stack:
        q, i = stack[-1]
        if len(stack) - 1 >= n:
            return WitnessResult(True, len(stack) - 1, False, nodes, tuple(path))
        while i < len(rules) and rules[i].head.pred != q.pred:
            i += 1
        if i >= len(rules):
            stack.pop()
            if path:
                path.pop()
            continue
        stack[-1] = (q, i + 1)
        nodes += 1
        if nodes > node_budget:
            return WitnessResult(False, best, True, nodes, tuple(path))
        st = step(q, rules[i], program.domain, (), gen, compact=True)
        if st is not None:
            stack.append((st.target, 0))
            path.append(rules[i].rid)
            best = max(best, len(stack) - 1)
    return WitnessResult(False, best, False, nodes, ())


def witness_loop(program: Program, s: Query, n: int = 100, node_budget: int = 20_000,
                 gen: Optional[VarGen] = None) -> bool:
    """True iff a derivation of length ``n`` from ``s`` was found."""
    return search_witness(program, s, n, node_budget, gen).found


def lifting_check(st: DerivationStep, s_gen: Query, r: Rule, domain: str,
                  gen: Optional[VarGen] = None, cap: int = DEFAULT_CAP) -> bool:
    """Step ``s_gen`` with the rule of ``st`` and check the result is more
    general than the target of ``st``."""
    gen = gen or VarGen.above(st.source, st.target, st.variant, s_gen, r)
    lifted = step(s_gen, r, domain, (st.source, st.target, st.variant), gen)
    if lifted is None:
        return False
    return backend.more_general(lifted.target, st.target, domain, cap)


def dn_check(r: Rule, flt, s: Query, s_gen: Query, domain: str,
             gen: Optional[VarGen] = None, cap: int = DEFAULT_CAP) -> Optional[bool]:
    """Operational derivation-neutrality check on one query pair.

    Returns None when the premise does not apply (``s`` has no step with ``r``
    or ``s_gen`` is not Delta-more general than ``s``); otherwise whether a
    step from ``s_gen`` exists whose target is Delta-more general than the
    target from ``s``.
    """
    from .filters import delta_more_general

    gen = gen or VarGen.above(r, s, s_gen)
    st = step(s, r, domain, (s_gen,), gen)
    if st is None or not delta_more_general(s_gen, s, flt, domain, cap):
        return None
    st2 = step(s_gen, r, domain, (st.variant, st.target), gen)
    if st2 is None:
        return False
    return delta_more_general(st2.target, st.target, flt, domain, cap)


# ---------------------------------------------------------------------------
# binary unfolding (finite trees only)

DEFAULT_UNFOLD_CAP = 5_000


def _canonical(head: Atom, body: Optional[Atom], theta) -> Tuple[Atom, Optional[Atom]]:
    h = head.subst(theta)
    b = body.subst(theta) if body is not None else None
    return h, b


def _variant_key(head: Atom, body: Optional[Atom]):
    order = {}

    def walk(t):
        from .syntax import Fn, Var
        if isinstance(t, Var):
            if t not in order:
                order[t] = len(order)
            return ("V", order[t])
        if isinstance(t, Fn):
            return (t.name,) + tuple(walk(a) for a in t.args)
        return ("N", str(t))

    key = (str(head.pred),) + tuple(walk(a) for a in head.args)
    if body is not None:
        key += ("<-", str(body.pred)) + tuple(walk(a) for a in body.args)
    return key


def binary_unfold(clauses: Sequence[Clause], depth: int, cap: int = DEFAULT_UNFOLD_CAP,
                  compose: bool = False, gen: Optional[VarGen] = None,
                  preds=None) -> Program:
    """Facts and binary clauses from ``depth`` rounds of binary unfolding.

    In each round, for every clause ``H :- B1, ..., Bm`` and every ``i``, the
    atoms ``B1..B(i-1)`` are resolved with facts of the previous round; the
    result is a fact (all atoms resolved) or the binary clause ``H <- Bi``.
    With ``compose`` the called atom ``Bi`` is also resolved with the binary
    clauses of the previous round. Explicit ``=`` goals are solved by
    unification.
    """
    if depth < 1:
        raise ValueError("unfolding depth must be >= 1")
    gen = gen or VarGen.above(tuple(clauses))
    facts: List[Atom] = []
    binaries: List[Tuple[Atom, Atom]] = []
    for _ in range(depth):
        new_facts: List[Atom] = []
        new_bins: List[Tuple[Atom, Atom]] = []
        seen = set()

        def emit(h, b):
            key = _variant_key(h, b)
            if key in seen:
                return
            seen.add(key)
            (new_facts if b is None else new_bins).append((h, b) if b is not None else h)
            if len(new_facts) + len(new_bins) > cap:
                raise ResourceError(f"binary unfolding exceeds cap {cap}")

        for cl in clauses:
            cl = rename_apart(cl, (), gen)
            eq_goals = [(g.lhs, g.rhs) for g in cl.body if isinstance(g, Rel)]
            atoms = [g for g in cl.body if isinstance(g, Atom)]
            base = unify(eq_goals)
            if base is None:
                continue
            # partial resolutions of the prefix: list of substitutions
            frontier = [base]
            for i, a in enumerate(atoms):
                for theta in frontier:
                    emit(*_canonical(cl.head, a, theta))
                    if compose:
                        for bh, bb in binaries:
                            variant = rename_apart(Clause(bh, (bb,)), (), gen)
                            vh, vb = variant.head, variant.body[0]
                            if vh.pred != a.pred:
                                continue
                            mgu = unify(list(theta.items()) + list(zip(a.args, vh.args)))
                            if mgu is not None:
                                emit(*_canonical(cl.head, vb, mgu))
                nxt = []
                for theta in frontier:
                    for f in facts:
                        if f.pred != a.pred:
                            continue
                        fv = rename_apart(f, (), gen)
                        mgu = unify(list(theta.items()) + list(zip(a.args, fv.args)))
                        if mgu is not None:
                            nxt.append(mgu)
                            if len(nxt) > cap:
                                raise ResourceError(f"binary unfolding exceeds cap {cap}")
                frontier = nxt
                if not frontier:
                    break
            else:
                for theta in frontier:
                    emit(*_canonical(cl.head, None, theta))
        facts = new_facts
        binaries = new_bins
    rules = tuple(Rule(h, (), b, f"r{i + 1}") for i, (h, b) in enumerate(binaries))
    fact_qs = tuple(Query(f, ()) for f in facts)
    if preds is None:
        preds = {}
        for cl in clauses:
            for a in cl.atoms:
                preds.setdefault(a.pred.name, a.pred.arity)
    return Program(TERM, rules, dict(preds), fact_qs)
