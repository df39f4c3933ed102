"""Constraint backend for linear rational arithmetic.

Satisfiability and quantifier elimination are both done with Fourier-Motzkin
elimination over exact rationals, keeping track of strict bounds: combining a
strict and a non-strict bound yields a strict bound. Formulas with quantifiers
are decided by eliminating innermost quantifiers first (``forall`` as
``~exists~``) and then checking the resulting quantifier-free formula.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import formula as F
from .errors import NonLinearError, ResourceError
from .syntax import Fn, Num, Query, Rel, Var, VarGen, variables_of

DEFAULT_CAP = 100_000

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class LinExpr:
    """``sum(c * v) + const`` with exact, non-zero coefficients."""
    coeffs: Tuple[Tuple[Var, Fraction], ...] = ()
    const: Fraction = ZERO

    def __post_init__(self):
        if __debug__:
            for v, c in self.coeffs:
                assert isinstance(c, Fraction) and c != 0, (v, c)
            assert isinstance(self.const, Fraction)

    @staticmethod
    def from_dict(d: Dict[Var, Fraction], const=ZERO) -> "LinExpr":
        items = tuple(sorted(((v, Fraction(c)) for v, c in d.items() if c != 0),
                             key=lambda vc: vc[0].id))
        return LinExpr(items, Fraction(const))

    @staticmethod
    def var(v: Var) -> "LinExpr":
        return LinExpr(((v, ONE),), ZERO)

    @staticmethod
    def constant(c) -> "LinExpr":
        return LinExpr((), Fraction(c))

    def as_dict(self) -> Dict[Var, Fraction]:
        return dict(self.coeffs)

    def vars(self):
        return {v for v, _ in self.coeffs}

    def coeff(self, v: Var) -> Fraction:
        for w, c in self.coeffs:
            if w == v:
                return c
        return ZERO

    def __add__(self, other: "LinExpr") -> "LinExpr":
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, ZERO) + c
        return LinExpr.from_dict(d, self.const + other.const)

    def __neg__(self):
        return LinExpr(tuple((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, k) -> "LinExpr":
        k = Fraction(k)
        if k == 0:
            return LinExpr()
        return LinExpr(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def replace(self, v: Var, e: "LinExpr") -> "LinExpr":
        c = self.coeff(v)
        if c == 0:
            return self
        d = self.as_dict()
        del d[v]
        return LinExpr.from_dict(d, self.const) + e.scale(c)

    def evaluate(self, valuation) -> Fraction:
        return self.const + sum((c * Fraction(valuation[v]) for v, c in self.coeffs), ZERO)

    def to_term(self):
        acc = None
        for v, c in self.coeffs:
            mag = abs(c)
            t = v if mag == 1 else Fn("*", (Num(mag), v))
            if acc is None:
                acc = t if c > 0 else Fn("-", (t,))
            else:
                acc = Fn("+" if c > 0 else "-", (acc, t))
        if acc is None:
            return Num(self.const)
        if self.const > 0:
            acc = Fn("+", (acc, Num(self.const)))
        elif self.const < 0:
            acc = Fn("-", (acc, Num(-self.const)))
        return acc

    def __str__(self):
        return str(self.to_term())


def linearize(t) -> LinExpr:
    """Evaluate an arithmetic term to a linear expression."""
    if isinstance(t, Var):
        return LinExpr.var(t)
    if isinstance(t, Num):
        return LinExpr.constant(t.value)
    if isinstance(t, Fn):
        if t.name == "-" and len(t.args) == 1:
            return -linearize(t.args[0])
        if len(t.args) == 2 and t.name in ("+", "-", "*", "/"):
            a, b = linearize(t.args[0]), linearize(t.args[1])
            if t.name == "+":
                return a + b
            if t.name == "-":
                return a - b
            if t.name == "*":
                if not a.coeffs:
                    return b.scale(a.const)
                if not b.coeffs:
                    return a.scale(b.const)
                raise NonLinearError(f"non-linear product {t}")
            if b.coeffs or b.const == 0:
                raise NonLinearError(f"division by a non-constant or zero in {t}")
            return a.scale(1 / b.const)
    raise NonLinearError(f"not an arithmetic term: {t}")


# ---------------------------------------------------------------------------
# atoms

_NEG = {"<": "<=", "<=": "<"}


@dataclass(frozen=True)
class LinAtom:
    """``expr rel 0`` with rel in {'<', '<=', '='}, in canonical scaling."""
    expr: LinExpr
    rel: str

    def vars(self):
        return self.expr.vars()

    def holds(self, valuation) -> bool:
        x = self.expr.evaluate(valuation)
        return x < 0 if self.rel == "<" else x <= 0 if self.rel == "<=" else x == 0

    def negate(self) -> List["LinAtom | bool"]:
        """Atoms whose disjunction is the negation of this atom."""
        if self.rel == "=":
            return [lin_atom(self.expr, "<"), lin_atom(-self.expr, "<")]
        return [lin_atom(-self.expr, _NEG[self.rel])]

    def to_rel(self) -> Rel:
        e, rel = self.expr, self.rel
        if e.coeffs and e.coeffs[0][1] < 0:
            e = -e
            rel = {"<": ">", "<=": ">=", "=": "="}[rel]
        else:
            rel = {"<": "<", "<=": "=<", "=": "="}[rel]
        lhs = LinExpr(e.coeffs, ZERO).to_term()
        return Rel(rel, lhs, Num(-e.const))

    def __str__(self):
        return str(self.to_rel())


def lin_atom(expr: LinExpr, rel: str):
    """Canonical atom, or a bool when ``expr`` is constant."""
    if not expr.coeffs:
        c = expr.const
        return c < 0 if rel == "<" else c <= 0 if rel == "<=" else c == 0
    lead = expr.coeffs[0][1]
    k = 1 / lead if rel == "=" else 1 / abs(lead)
    if k != 1:
        expr = expr.scale(k)
    return LinAtom(expr, rel)


def from_rel(r: Rel):
    e = linearize(r.lhs) - linearize(r.rhs)
    if r.op == "=":
        return lin_atom(e, "=")
    if r.op == "<":
        return lin_atom(e, "<")
    if r.op == "=<":
        return lin_atom(e, "<=")
    if r.op == ">=":
        return lin_atom(-e, "<=")
    return lin_atom(-e, "<")


def to_lin(leaf):
    if isinstance(leaf, (LinAtom, bool)):
        return leaf
    if isinstance(leaf, Rel):
        return from_rel(leaf)
    raise TypeError(f"not a linear constraint: {leaf!r}")


def atoms_to_constraint(atoms: Iterable[LinAtom]) -> Tuple[Rel, ...]:
    return tuple(a.to_rel() for a in atoms)


# ---------------------------------------------------------------------------
# Fourier-Motzkin

def _prune(atoms: Iterable[LinAtom]) -> Optional[List[LinAtom]]:
    """Drop duplicate and dominated bounds sharing the same linear part."""
    best: Dict[Tuple, LinAtom] = {}
    eqs: Dict[Tuple, LinAtom] = {}
    for a in atoms:
        key = a.expr.coeffs
        if a.rel == "=":
            prev = eqs.get(key)
            if prev is not None and prev.expr.const != a.expr.const:
                return None
            eqs[key] = a
            continue
        prev = best.get(key)
        if prev is None:
            best[key] = a
            continue
        # for e + c rel 0 a larger c is tighter; strict wins ties
        if a.expr.const > prev.expr.const or (a.expr.const == prev.expr.const and a.rel == "<"):
            best[key] = a
    for key, e in eqs.items():
        b = best.get(key)
        if b is not None:
            # e: L + c1 = 0, b: L + c2 rel 0  ->  c2 - c1 rel 0
            d = b.expr.const - e.expr.const
            if (b.rel == "<" and not d < 0) or (b.rel == "<=" and not d <= 0):
                return None
            del best[key]
    out = list(eqs.values()) + list(best.values())
    out.sort(key=_atom_key)
    return out


def _atom_key(a: LinAtom):
    return (tuple((v.id, c) for v, c in a.expr.coeffs), a.expr.const, a.rel)


def _add_atom(out: list, a) -> bool:
    """Append a canonical atom; False when it is a ground contradiction."""
    if a is True:
        return True
    if a is False:
        return False
    out.append(a)
    return True


def fm_eliminate(atoms: Sequence[LinAtom], elim: Iterable[Var],
                 cap: int = DEFAULT_CAP) -> Optional[List[LinAtom]]:
    """Project a conjunction onto the variables not in ``elim``.

    Returns None when a contradiction shows up while eliminating. That is
    complete for unsatisfiability only when every variable is eliminated; a
    partial projection may itself be unsatisfiable.
    """
    work = _prune(atoms)
    if work is None:
        return None
    todo = set(elim) & variables_of(work)
    while todo:
        x = _pick(work, todo)
        todo.discard(x)
        eq = next((a for a in work if a.rel == "=" and a.expr.coeff(x) != 0), None)
        nxt: List = []
        if eq is not None:
            a = eq.expr.coeff(x)
            sol = (eq.expr - LinExpr(((x, a),))).scale(-1 / a)
            for at in work:
                if at is eq:
                    continue
                if at.expr.coeff(x) == 0:
                    nxt.append(at)
                elif not _add_atom(nxt, lin_atom(at.expr.replace(x, sol), at.rel)):
                    return None
        else:
            lower, upper = [], []
            for at in work:
                c = at.expr.coeff(x)
                if c == 0:
                    nxt.append(at)
                elif c < 0:
                    lower.append(at)
                else:
                    upper.append(at)
            if len(lower) * len(upper) + len(nxt) > cap:
                raise ResourceError(f"Fourier-Motzkin step exceeds cap {cap}")
            for lo in lower:
                a = -lo.expr.coeff(x)
                for up in upper:
                    b = up.expr.coeff(x)
                    e = lo.expr.scale(b) + up.expr.scale(a)
                    rel = "<" if "<" in (lo.rel, up.rel) else "<="
                    if not _add_atom(nxt, lin_atom(e, rel)):
                        return None
        work = _prune(nxt)
        if work is None:
            return None
        todo &= variables_of(work)
    return work


def _pick(work, todo):
    """Prefer a variable with an equality, else the fewest new combinations."""
    counts = {}
    for a in work:
        for v, c in a.expr.coeffs:
            if v not in todo:
                continue
            eq, lo, up = counts.get(v, (False, 0, 0))
            if a.rel == "=":
                eq = True
            elif c < 0:
                lo += 1
            else:
                up += 1
            counts[v] = (eq, lo, up)
    best, score = None, None
    for v in sorted(counts, key=lambda v: v.id):
        eq, lo, up = counts[v]
        s = (0, 0) if eq else (1, lo * up - lo - up)
        if score is None or s < score:
            best, score = v, s
    return best


def lin_sat(atoms: Iterable) -> bool:
    """True iff some rational valuation satisfies every atom."""
    conj = []
    for a in atoms:
        if not _add_atom(conj, to_lin(a)):
            return False
    return fm_eliminate(conj, variables_of(conj)) is not None


def is_satisfiable(c: Sequence[Rel]) -> bool:
    return lin_sat(c)


# ---------------------------------------------------------------------------
# boolean structure and quantifier elimination

def _product(left, right, cap):
    if len(left) * len(right) > cap:
        raise ResourceError(f"DNF expansion exceeds cap {cap}")
    out = []
    for a in left:
        for b in right:
            out.append(a + b)
    if len(out) > 64:
        out = [c for c in out if fm_eliminate(c, (), cap) is not None]
    return out


def dnf(f, negate=False, cap=DEFAULT_CAP) -> List[List[LinAtom]]:
    """Disjunctive normal form of a formula (quantifiers are eliminated first)."""
    if isinstance(f, (F.Exists, F.Forall)):
        return dnf(qe(f, cap), negate, cap)
    if isinstance(f, F.Not):
        return dnf(f.body, not negate, cap)
    if isinstance(f, F.Implies):
        return dnf(F.Or((F.Not(f.lhs), f.rhs)), negate, cap)
    if isinstance(f, (F.And, F.Or)):
        conjunctive = isinstance(f, F.And) != negate
        if conjunctive:
            acc = [[]]
            for p in f.parts:
                acc = _product(acc, dnf(p, negate, cap), cap)
                if not acc:
                    break
            return acc
        out = []
        for p in f.parts:
            out.extend(dnf(p, negate, cap))
            if len(out) > cap:
                raise ResourceError(f"DNF expansion exceeds cap {cap}")
        return out
    leaf = to_lin(f)
    lits = leaf.negate() if negate and isinstance(leaf, LinAtom) else [
        (not leaf) if negate else leaf]
    out = []
    for lit in lits:
        if lit is True:
            out.append([])
        elif lit is not False:
            out.append([lit])
    return out


def _from_dnf(disjuncts) -> object:
    seen, parts = set(), []
    for conj in disjuncts:
        if not conj:
            return F.TRUE
        key = tuple(_atom_key(a) for a in conj)
        if key in seen:
            continue
        seen.add(key)
        parts.append(F.conj(*conj) if len(conj) > 1 else conj[0])
    return F.disj(*parts) if parts else F.FALSE


def eliminate(vars: Iterable[Var], f, cap: int = DEFAULT_CAP):
    """Quantifier-free formula equivalent to ``exists vars. f``."""
    vars = set(vars)
    out = []
    for conj in dnf(f, cap=cap):
        r = fm_eliminate(conj, vars, cap)
        if r is None:
            continue
        if not r:
            return F.TRUE
        out.append(r)
    return _from_dnf(out)


def qe(f, cap: int = DEFAULT_CAP):
    """Quantifier-free equivalent of ``f`` (innermost quantifiers first)."""
    if isinstance(f, F.Exists):
        return eliminate(f.vars, qe(f.body, cap), cap)
    if isinstance(f, F.Forall):
        inner = eliminate(f.vars, F.Not(qe(f.body, cap)), cap)
        return _from_dnf(dnf(inner, negate=True, cap=cap))
    if isinstance(f, F.And):
        return F.conj(*(qe(p, cap) for p in f.parts)) if f.parts else F.TRUE
    if isinstance(f, F.Or):
        return F.disj(*(qe(p, cap) for p in f.parts)) if f.parts else F.FALSE
    if isinstance(f, F.Not):
        return F.Not(qe(f.body, cap))
    if isinstance(f, F.Implies):
        return F.Implies(qe(f.lhs, cap), qe(f.rhs, cap))
    leaf = to_lin(f)
    if leaf is True:
        return F.TRUE
    if leaf is False:
        return F.FALSE
    return leaf


def lin_valid(f, cap: int = DEFAULT_CAP) -> bool:
    """True iff the universal closure of ``f`` holds over the rationals."""
    body = qe(f, cap)
    for conj in dnf(body, negate=True, cap=cap):
        if fm_eliminate(conj, variables_of(conj), cap) is not None:
            return False
    return True


def lin_equivalent(f, g, cap: int = DEFAULT_CAP) -> bool:
    return lin_valid(F.And((F.Implies(f, g), F.Implies(g, f))), cap)


def lin_more_general(gen: Query, spec: Query, cap: int = DEFAULT_CAP) -> bool:
    """True iff Set(spec) is included in Set(gen)."""
    if gen.pred != spec.pred:
        raise ValueError(f"queries over different predicates: {gen.pred} vs {spec.pred}")
    if not lin_sat(spec.constraint):
        return True
    sat = F.sat_formula(spec.args, gen, VarGen.above(gen, spec))
    covered = qe(sat, cap)
    # valid iff  spec.constraint & ~covered  is unsatisfiable
    base = [to_lin(r) for r in spec.constraint]
    if any(b is False for b in base):
        return True
    base = [b for b in base if b is not True]
    for conj in dnf(covered, negate=True, cap=cap):
        atoms = base + conj
        if fm_eliminate(atoms, variables_of(atoms), cap) is not None:
            return False
    return True


def compact(q: Query, gen: Optional[VarGen] = None) -> Query:
    """Set-equivalent query ``<p(Z~) | psi(Z~)>`` with psi projected by FM."""
    out = compact_or_none(q, gen)
    return q if out is None else out


def compact_or_none(q: Query, gen: Optional[VarGen] = None) -> Optional[Query]:
    """Like :func:`compact`, but None when the constraint is unsatisfiable."""
    if not q.args:
        return Query(q.atom, ()) if lin_sat(q.constraint) else None
    gen = gen or VarGen.above(q)
    gen.reserve(q)
    zs = tuple(gen.fresh("Z") for _ in q.args)
    atoms = []
    for z, a in zip(zs, q.args):
        _add_atom(atoms, lin_atom(LinExpr.var(z) - linearize(a), "="))
    for r in q.constraint:
        if not _add_atom(atoms, to_lin(r)):
            return None
    proj = fm_eliminate(atoms, variables_of(atoms) - set(zs))
    if proj is None or not lin_sat(proj):
        return None
    from .syntax import Atom
    return Query(Atom(q.pred, zs), atoms_to_constraint(proj))


# ---------------------------------------------------------------------------
# sampling oracle

def sample_check(f, points: Sequence[Dict[Var, Fraction]],
                 grid: Sequence[Fraction] = ()) -> List[bool]:
    """Truth of ``f`` at each point, quantifiers ranging over ``grid``.

    Exact integer arithmetic (values are scaled to a common denominator).
    A disagreement with :func:`eliminate` proves a bug; agreement is evidence
    only, unless the grid contains every relevant critical value.
    """
    points = list(points)
    n = len(points)
    if n == 0:
        return []
    free = sorted(F.free_vars(f), key=lambda v: v.id)
    cols = {v: [_frac(p[v]) for p in points] for v in free}
    gvals = [_frac(x) for x in grid]
    dens = {x.denominator for col in cols.values() for x in col}
    dens |= {x.denominator for x in gvals}
    scale = lcm(1, *dens)

    def scaled(xs):
        return np.array([x.numerator * (scale // x.denominator) for x in xs], dtype=object)

    env = {v: scaled(col) for v, col in cols.items()}
    grid_scaled = scaled(gvals)
    use_int = _fits_int64(f, env, grid_scaled)
    if use_int:
        env = {v: a.astype(np.int64) for v, a in env.items()}
        grid_scaled = grid_scaled.astype(np.int64)
    res = _eval(f, env, 0, grid_scaled, scale)
    res = np.asarray(res, dtype=bool)
    res = np.full(n, bool(res)) if res.ndim == 0 else np.broadcast_to(res.reshape(-1), (n,))
    return [bool(x) for x in res]


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _fits_int64(f, env, grid):
    mags = [0] + [int(abs(a).max()) for a in env.values() if len(a)]
    if len(grid):
        mags.append(int(abs(grid).max()))
    big = max(mags)
    for leaf in F.leaves(f):
        lin = to_lin(leaf)
        if isinstance(lin, bool):
            continue
        den = lcm(lin.expr.const.denominator, *(c.denominator for _, c in lin.expr.coeffs))
        total = sum(abs(c * den) for _, c in lin.expr.coeffs) * big + abs(lin.expr.const * den) * 10**6
        if total >= 2**60:
            return False
    return True


def _expand(arr, ndim):
    arr = np.asarray(arr)
    while arr.ndim < ndim:
        arr = arr[..., None]
    return arr


def _eval(f, env, depth, grid, scale):
    if isinstance(f, (F.Exists, F.Forall)):
        inner = dict(env)
        for k, v in enumerate(f.vars):
            shape = [1] * (1 + depth + len(f.vars))
            shape[1 + depth + k] = len(grid)
            inner[v] = grid.reshape(shape)
        r = _expand(_eval(f.body, inner, depth + len(f.vars), grid, scale),
                    1 + depth + len(f.vars))
        axes = tuple(range(1 + depth, 1 + depth + len(f.vars)))
        if isinstance(f, F.Exists):
            return r.any(axis=axes)
        return r.all(axis=axes)
    if isinstance(f, F.And):
        out = True
        for p in f.parts:
            out = np.logical_and(out, _eval(p, env, depth, grid, scale))
        return out
    if isinstance(f, F.Or):
        out = False
        for p in f.parts:
            out = np.logical_or(out, _eval(p, env, depth, grid, scale))
        return out
    if isinstance(f, F.Not):
        return np.logical_not(_eval(f.body, env, depth, grid, scale))
    if isinstance(f, F.Implies):
        return np.logical_or(np.logical_not(_eval(f.lhs, env, depth, grid, scale)),
                             _eval(f.rhs, env, depth, grid, scale))
    lin = to_lin(f)
    if isinstance(lin, bool):
        return lin
    e = lin.expr
    den = lcm(e.const.denominator, *(c.denominator for _, c in e.coeffs))
    total = int(e.const * den) * scale
    for v, c in e.coeffs:
        total = total + int(c * den) * _expand(env[v], 1 + depth)
    if lin.rel == "<":
        return np.less(total, 0)
    if lin.rel == "<=":
        return np.less_equal(total, 0)
    return np.equal(total, 0)
