"""Loop inference: base cases from single recursive rules, then propagation
to the other predicates of the program."""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from . import formula as F
from . import lin_domain
from .backend import equivalent, more_general
from .errors import ResourceError, UnsatisfiableRuleError
from .filters import (DnVerdict, Filter, check_dnlog, delta_more_general,
                      filter_literal, filter_to_json, make_filter, make_open_filter,
                      projected_pred)
from .syntax import (RLIN, TERM, Atom, NormalizedRule, Program, Query, Rule, VarGen,
                     eqs, normalize_rule, pretty_program, variables_of)
from .term_domain import flatten_term_rule

SIMPLE = "unfiltered"
FILTERED = "filter"
PROPAGATED = "propagated"


@dataclass
class Options:
    witness: bool = False
    witness_depth: int = 100
    witness_budget: int = 20_000
    filter_budget: int = 64
    qe_cap: int = lin_domain.DEFAULT_CAP
    class_cap: int = 16
    max_positions: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.witness_depth < 1:
            raise ValueError("witness depth must be >= 1")
        if self.filter_budget < 1 or self.qe_cap < 1 or self.class_cap < 1:
            raise ValueError("budgets and caps must be positive")

    def to_json(self):
        return {
            "witness": self.witness,
            "witness_depth": self.witness_depth,
            "filter_budget": self.filter_budget,
            "qe_cap": self.qe_cap,
            "class_cap": self.class_cap,
            "seed": self.seed,
        }


@dataclass
class Stats:
    rules_analyzed: int = 0
    filters_tried: int = 0
    qe_calls: int = 0
    containment_checks: int = 0

    def add(self, other: "Stats"):
        self.rules_analyzed += other.rules_analyzed
        self.filters_tried += other.filters_tried
        self.qe_calls += other.qe_calls
        self.containment_checks += other.containment_checks

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class LoopCertificate:
    """Evidence that ``query`` loops: a base rule, the filter that made the
    base case work (None for the unfiltered criterion), the verdict of the
    derivation-neutrality check, and the chain of rules used to propagate."""
    base_rule: str
    method: str
    filter: Optional[Filter]
    verdict: str
    chain: Tuple[str, ...]
    links: Tuple[bool, ...]
    query: Query
    witness: Optional[bool] = None

    def __post_init__(self):
        assert self.chain and self.chain[0] == self.base_rule
        assert all(self.links)

    def to_json(self):
        return {
            "base_rule": self.base_rule,
            "method": self.method,
            "filter": None if self.filter is None else filter_to_json(self.filter),
            "verdict": self.verdict,
            "chain": list(self.chain),
            "links": list(self.links),
            "predicate": str(self.query.pred),
            "query": str(self.query),
            "witness": self.witness,
        }


@dataclass
class LoopClass:
    """Queries (Delta-)more general than ``query`` loop."""
    query: Query
    filter: Optional[Filter]
    certificate: LoopCertificate


@dataclass
class FilterAttempt:
    filter: Filter
    verdict: Optional[DnVerdict]
    loops: bool
    error: Optional[str] = None

    def to_json(self):
        return {
            "filter": filter_to_json(self.filter),
            "verdict": None if self.verdict is None else self.verdict.outcome,
            "dnsyn": None if self.verdict is None or self.verdict.dnsyn is None else
            {f"DNsyn{k}": v for k, v in sorted(self.verdict.dnsyn.items())},
            "loops": self.loops,
            "error": self.error,
        }


@dataclass
class RuleResult:
    rid: str
    rule: str
    recursive: bool
    simple: Optional[bool] = None
    attempts: List[FilterAttempt] = field(default_factory=list)
    truncated: bool = False
    certificate: Optional[LoopCertificate] = None
    error: Optional[str] = None
    resource_error: bool = False
    stats: Stats = field(default_factory=Stats)

    def to_json(self):
        return {
            "id": self.rid,
            "rule": self.rule,
            "recursive": self.recursive,
            "unfiltered": self.simple,
            "filters": [a.to_json() for a in self.attempts],
            "truncated": self.truncated,
            "certified": self.certificate is not None,
            "error": self.error,
        }


@dataclass
class Report:
    program_digest: str
    domain: str
    options: Options
    rules: List[RuleResult]
    certificates: List[LoopCertificate]
    stats: Stats
    wall_clock: float = 0.0
    propagation_truncated: bool = False

    @property
    def resource_error(self) -> bool:
        return any(r.resource_error for r in self.rules)

    def to_json(self, timing: bool = True):
        out = {
            "tool": "nontermclp",
            "program": {"digest": self.program_digest, "domain": self.domain,
                        "rules": len(self.rules)},
            "options": self.options.to_json(),
            "rules": [r.to_json() for r in self.rules],
            "certificates": [c.to_json() for c in self.certificates],
            "propagation_truncated": self.propagation_truncated,
            "stats": self.stats.to_json(),
        }
        if timing:
            out["wall_clock_seconds"] = round(self.wall_clock, 6)
        return out

    def to_text(self) -> str:
        lines = [f"program {self.program_digest[:16]} ({self.domain}, {len(self.rules)} rules)"]
        for r in self.rules:
            if not r.recursive:
                lines.append(f"[{r.rid}] {r.rule}  (not recursive)")
                continue
            lines.append(f"[{r.rid}] {r.rule}")
            if r.simple is not None:
                lines.append(f"    unfiltered criterion: {'yes' if r.simple else 'no'}")
            for a in r.attempts:
                v = a.error or (a.verdict.outcome if a.verdict else "-")
                extra = ""
                if a.verdict is not None and a.verdict.dnsyn is not None:
                    extra = " " + " ".join(
                        f"DNsyn{k}={'T' if ok else 'F'}" for k, ok in sorted(a.verdict.dnsyn.items()))
                lines.append(f"    {filter_literal(a.filter)}  => {v}{extra}"
                             f"{'  loops' if a.loops else ''}")
            if r.truncated:
                lines.append("    filter budget exhausted")
            if r.error:
                lines.append(f"    error: {r.error}")
        lines.append(f"{len(self.certificates)} looping queries:")
        for i, c in enumerate(self.certificates, 1):
            how = c.verdict if c.filter is None else f"{c.verdict} with {filter_literal(c.filter)}"
            w = "" if c.witness is None else f"  witness: {'ok' if c.witness else 'FAILED'}"
            lines.append(f"  {i}. {c.query}  [{' -> '.join(c.chain)}; {c.method}; {how}]{w}")
        s = self.stats
        lines.append(f"stats: {s.rules_analyzed} rules analyzed, {s.filters_tried} filters tried, "
                     f"{s.qe_calls} QE calls, {s.containment_checks} containment checks")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# base cases

def infer_loop_simple(r: Rule, domain: str, cap: int = lin_domain.DEFAULT_CAP,
                      stats: Optional[Stats] = None) -> Optional[LoopCertificate]:
    """Certificate for ``<H|c>`` when ``<B|c>`` is more general than it."""
    if not r.recursive:
        return None
    if stats is not None:
        stats.containment_checks += 1
    if not more_general(r.body_query(), r.head_query(), domain, cap):
        return None
    return LoopCertificate(r.rid, SIMPLE, None, SIMPLE, (r.rid,), (True,), r.head_query())


def infer_loop_base(r: Rule, flt: Filter, verdict: DnVerdict, domain: str,
                    cap: int = lin_domain.DEFAULT_CAP,
                    stats: Optional[Stats] = None) -> Optional[LoopCertificate]:
    """Certificate for ``<H|c>`` when the filter is derivation neutral for ``r``
    and ``<B|c>`` is Delta-more general than ``<H|c>``."""
    if isinstance(r, NormalizedRule):
        r = r.source if r.source is not None else r.as_rule()
    if not verdict.certified:
        raise ValueError("filter is not certified derivation neutral")
    if not r.recursive:
        return None
    if stats is not None:
        stats.containment_checks += 2
    if not delta_more_general(r.body_query(), r.head_query(), flt, domain, cap):
        return None
    return LoopCertificate(r.rid, FILTERED, flt, verdict.outcome, (r.rid,), (True,),
                           r.head_query())


def _subsets_desc(n: int):
    for k in range(n, -1, -1):
        for c in combinations(range(1, n + 1), k):
            yield c


def _is_distinct_vars(ts) -> bool:
    from .syntax import Var
    return all(isinstance(t, Var) for t in ts) and len(set(ts)) == len(ts)


def infer_filters(r: NormalizedRule, domain: str, budget: int = 64,
                  gen: Optional[VarGen] = None, cap: int = lin_domain.DEFAULT_CAP,
                  stats: Optional[Stats] = None,
                  max_positions: int = 12) -> Tuple[List[Filter], bool]:
    """Candidate filters for a recursive rule, largest position sets first.

    For each position set: the open filter, then one filter whose delta is
    derived from the rule (the projected head terms of the flat form for
    finite trees; the projection of the constraint onto the selected head
    parameters for linear arithmetic). Returns ``(filters, truncated)``.
    """
    if not r.recursive:
        raise ValueError("filters are inferred for recursive rules only")
    gen = gen or VarGen.above(r)
    gen.reserve(r)
    p = r.head_pred
    n = p.arity
    fr = flatten_term_rule(r, gen) if domain == TERM else None
    out: List[Filter] = []
    seen = set()
    subsets = _subsets_desc(n) if n <= max_positions else iter([tuple(range(1, n + 1)), ()])

    def push(f: Filter) -> bool:
        key = filter_literal(f)
        if key in seen:
            return True
        if len(out) >= budget:
            return False
        seen.add(key)
        out.append(f)
        return True

    for pos in subsets:
        if not push(make_open_filter({p: pos})):
            return out, True
        if not pos:
            continue
        delta = None
        if domain == TERM:
            s_tau = tuple(fr.s[i - 1] for i in pos)
            if not _is_distinct_vars(s_tau):
                ren = {v: gen.fresh(v.name) for v in sorted(variables_of(s_tau), key=lambda v: v.id)}
                zs = tuple(gen.fresh("Z") for _ in pos)
                delta = Query(Atom(projected_pred(p, len(pos)), zs),
                              eqs(zs, tuple(t.subst(ren) for t in s_tau)))
        else:
            xs = tuple(r.head_vars[i - 1] for i in pos)
            keep = set(xs)
            drop = variables_of(r.constraint) - keep
            if stats is not None:
                stats.qe_calls += 1
            psi = lin_domain.eliminate(drop, F.conj(*r.constraint) if r.constraint else F.TRUE, cap)
            conj = _as_conjunction(psi)
            if conj is not None and conj:
                zs = tuple(gen.fresh("Z") for _ in pos)
                ren = dict(zip(xs, zs))
                delta = Query(Atom(projected_pred(p, len(pos)), zs),
                              tuple(a.to_rel().subst(ren) for a in conj))
        if delta is not None:
            if not push(make_filter({p: pos}, {p: delta}, domain)):
                return out, True
    return out, False


def _as_conjunction(psi):
    """Atoms of a conjunctive formula (``[]`` for true), or None."""
    if psi == F.TRUE:
        return []
    if isinstance(psi, lin_domain.LinAtom):
        return [psi]
    if isinstance(psi, F.And) and all(isinstance(a, lin_domain.LinAtom) for a in psi.parts):
        return list(psi.parts)
    return None


def analyze_rule(r: Rule, domain: str, options: Options,
                 gen: Optional[VarGen] = None) -> RuleResult:
    """Base-case loop inference for one rule."""
    res = RuleResult(r.rid, str(r), r.recursive)
    if not r.recursive:
        return res
    st = res.stats
    st.rules_analyzed += 1
    gen = gen or VarGen.above(r)
    cap = options.qe_cap
    try:
        cert = infer_loop_simple(r, domain, cap, st)
        res.simple = cert is not None
        if cert is not None:
            res.certificate = cert
            return res
        nr = normalize_rule(r, gen)
        filters, res.truncated = infer_filters(nr, domain, options.filter_budget, gen, cap, st,
                                               options.max_positions)
        for flt in filters:
            st.filters_tried += 1
            try:
                if domain == RLIN:
                    st.qe_calls += 1
                verdict = check_dnlog(nr, flt, domain, cap, gen)
            except ResourceError as e:
                res.attempts.append(FilterAttempt(flt, None, False, f"resource: {e}"))
                res.resource_error = True
                continue
            loops = False
            if verdict.certified:
                cert = infer_loop_base(r, flt, verdict, domain, cap, st)
                loops = cert is not None
            res.attempts.append(FilterAttempt(flt, verdict, loops))
            if loops:
                res.certificate = cert
                break
    except ResourceError as e:
        res.error = f"resource: {e}"
        res.resource_error = True
    except UnsatisfiableRuleError as e:
        res.error = str(e)
    return res


# ---------------------------------------------------------------------------
# propagation

def propagate(program: Program, seeds: Sequence[LoopClass], cap: int = lin_domain.DEFAULT_CAP,
              class_cap: int = 16, stats: Optional[Stats] = None
              ) -> Tuple[List[LoopClass], bool]:
    """Close the seed classes under: if ``<B|c>`` of a rule ``H <- c <> B`` is
    (Delta-)more general than a looping class, then ``<H|c>`` loops.

    Filtered seeds are matched with Delta-more-general (the filter is derivation
    neutral for the base rule); classes obtained by propagation carry no
    filter. Returns ``(classes, truncated)``.
    """
    domain = program.domain
    classes: Dict[Tuple[str, int], List[LoopClass]] = {}
    order: List[LoopClass] = []
    truncated = False

    def count():
        if stats is not None:
            stats.containment_checks += 1

    def add(cls: LoopClass) -> bool:
        nonlocal truncated
        key = (cls.query.pred.name, cls.query.pred.arity)
        bucket = classes.setdefault(key, [])
        reported = False
        for other in bucket:
            count()
            if not equivalent(other.query, cls.query, domain, cap):
                continue
            if other.filter == cls.filter:
                return False
            # same query under another filter: propagate from it, report it once
            reported = True
        if len(bucket) >= class_cap:
            truncated = True
            return False
        bucket.append(cls)
        if not reported:
            order.append(cls)
        return True

    work = []
    for s in seeds:
        if add(s):
            work.append(s)
    while work:
        cls = work.pop(0)
        for r in program.rules:
            if r.body.pred != cls.query.pred:
                continue
            body = r.body_query()
            count()
            if cls.filter is None:
                ok = more_general(body, cls.query, domain, cap)
            else:
                ok = delta_more_general(body, cls.query, cls.filter, domain, cap)
            if not ok:
                continue
            c = cls.certificate
            cert = LoopCertificate(c.base_rule, PROPAGATED,
                                   c.filter, c.verdict, c.chain + (r.rid,), c.links + (True,),
                                   r.head_query())
            new = LoopClass(r.head_query(), None, cert)
            if add(new):
                work.append(new)
    return order, truncated


# ---------------------------------------------------------------------------
# pipeline

def program_digest(program: Program) -> str:
    return hashlib.sha256(pretty_program(program).encode("utf-8")).hexdigest()


def _analyze_rule_job(args):
    r, domain, options, base = args
    return analyze_rule(r, domain, options, VarGen(base))


def analyze(program: Program, options: Optional[Options] = None, jobs: int = 1) -> Report:
    """Base inference for every recursive rule, propagation, optional witnessing."""
    options = options or Options()
    t0 = time.perf_counter()
    domain = program.domain
    base = VarGen.above(program).next_id
    tasks = [(r, domain, options, base) for r in program.rules]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_analyze_rule_job, tasks))
    else:
        results = [_analyze_rule_job(t) for t in tasks]
    stats = Stats()
    seeds = []
    for res in results:
        stats.add(res.stats)
        if res.certificate is not None:
            c = res.certificate
            seeds.append(LoopClass(c.query, c.filter, c))
    prop_stats = Stats()
    try:
        classes, truncated = propagate(program, seeds, options.qe_cap, options.class_cap, prop_stats)
    except ResourceError:
        classes, truncated = [LoopClass(s.query, s.filter, s.certificate) for s in seeds], True
    stats.add(prop_stats)
    certs = [c.certificate for c in classes]
    if options.witness:
        from .engine import search_witness
        for c in certs:
            w = search_witness(program, c.query, options.witness_depth, options.witness_budget,
                               VarGen(base))
            c.witness = w.found
    return Report(program_digest(program), domain, options, results, certs, stats,
                  time.perf_counter() - t0, truncated)
