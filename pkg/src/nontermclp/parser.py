"""Prolog-like concrete syntax for binary CLP programs and queries.

    :- domain(rlin).
    :- pred p/2.
    p(X,Y) :- {X >= 0, Y =< 10}, p(X+1,Y+1).

Term-domain constraints are ordinary ``=`` goals (braces optional); Rlin
constraints may use ``< =< <= = >= >``. Queries are written
``p(X,Y) | {X >= 0}`` with the constraint part optional.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, List, Optional

from .errors import ArityError, NonLinearError, ParseError, UnsatisfiableRuleError
from .syntax import (ARITH_OPS, NIL, RLIN, TERM, Atom, Clause, Fn, Num, Pred, Program,
                     Query, Rel, Rule, Var, VarGen, cons)

_TOKEN = re.compile(r"""
    (?P<ws>\s+|%[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*|'[^']*')
  | (?P<op>:-|=<|<=|>=|\\=|[-+*/=<>(){}\[\],|.])
""", re.VERBOSE)

_REL_ALIASES = {"<=": "=<"}
_REL_TOKENS = {"=", "<", "=<", "<=", ">=", ">"}


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.col})"


def tokenize(text: str) -> List[Token]:
    out = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            out.append(Token(kind, tok, line, pos - line_start + 1))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rfind("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class Parser:
    """Recursive-descent parser over a token list.

    Variable scope is per clause; call :meth:`new_scope` between clauses.
    """

    def __init__(self, text: str, domain: Optional[str] = None,
                 gen: Optional[VarGen] = None, preds: Optional[Dict[str, int]] = None):
        self.toks = tokenize(text)
        self.i = 0
        self.domain = domain
        self.gen = gen if gen is not None else VarGen()
        self.preds = preds if preds is not None else {}
        self.scope: Dict[str, Var] = {}

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg, tok=None, cls=ParseError):
        tok = tok or self.tok
        return cls(msg, tok.line, tok.col)

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "name")

    def accept(self, text) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def at_end_of_clause(self) -> bool:
        return self.at(".") or self.tok.kind == "eof"

    def new_scope(self):
        self.scope = {}

    @property
    def dom(self):
        return self.domain or TERM

    # -- terms
    def variable(self, name) -> Var:
        if name == "_":
            return self.gen.fresh("_")
        v = self.scope.get(name)
        if v is None:
            v = self.scope[name] = self.gen.named(name)
        return v

    def term(self):
        return self.additive()

    def additive(self):
        left = self.multiplicative()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            left = Fn(op, (left, self.multiplicative()))
        return left

    def multiplicative(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            left = Fn(op, (left, self.unary()))
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            if self.tok.kind == "num":
                return self.number(negate=True)
            return Fn("-", (self.unary(),))
        return self.primary()

    def number(self, negate=False):
        t = self.advance()
        text = ("-" if negate else "") + t.text
        if self.dom == RLIN:
            return Num(Fraction(text))
        return Fn(text)

    def primary(self):
        t = self.tok
        if t.kind == "var":
            self.advance()
            return self.variable(t.text)
        if t.kind == "num":
            return self.number()
        if t.kind == "name":
            self.advance()
            name = t.text.strip("'") if t.text.startswith("'") else t.text
            if self.at("(") :
                self.advance()
                args = [self.term()]
                while self.accept(","):
                    args.append(self.term())
                self.expect(")")
                return Fn(name, tuple(args))
            return Fn(name)
        if self.accept("("):
            inner = self.term()
            self.expect(")")
            return inner
        if self.accept("["):
            if self.accept("]"):
                return NIL
            items = [self.term()]
            while self.accept(","):
                items.append(self.term())
            tail = self.term() if self.accept("|") else NIL
            self.expect("]")
            out = tail
            for it in reversed(items):
                out = cons(it, out)
            return out
        raise self.error(f"unexpected token {t.text or 'end of input'!r}")

    # -- atoms and constraints
    def to_atom(self, t, tok) -> Atom:
        if not isinstance(t, Fn) or t.name in ARITH_OPS or t.name in ("[]", "."):
            raise self.error(f"expected an atom, found {t}", tok)
        ar = len(t.args)
        known = self.preds.get(t.name)
        if known is not None and known != ar:
            raise self.error(f"predicate {t.name} has arity {known}, used with {ar}",
                             tok, ArityError)
        self.preds.setdefault(t.name, ar)
        for a in t.args:
            self.check_term(a, tok)
        return Atom(Pred(t.name, ar), t.args)

    def check_term(self, t, tok):
        if self.dom == RLIN:
            _check_linear(t, tok)

    def relation(self, lhs, tok) -> Rel:
        op_tok = self.advance()
        op = _REL_ALIASES.get(op_tok.text, op_tok.text)
        if self.dom == TERM and op != "=":
            raise self.error(f"relation {op!r} is not available in the term domain", op_tok)
        rhs = self.term()
        self.check_term(lhs, tok)
        self.check_term(rhs, tok)
        return Rel(op, lhs, rhs)

    def at_relation(self):
        return self.tok.kind == "op" and self.tok.text in _REL_TOKENS

    def constraint_item(self) -> Rel:
        tok = self.tok
        lhs = self.term()
        if not self.at_relation():
            raise self.error("expected a relation", self.tok)
        return self.relation(lhs, tok)

    def brace_block(self) -> List[Rel]:
        self.expect("{")
        out = []
        if self.accept("}"):
            return out
        while True:
            if self.at("true"):
                self.advance()
            else:
                out.append(self.constraint_item())
            if self.accept("}"):
                return out
            self.expect(",")

    def goal(self) -> list:
        """One body goal: a list of constraints or a single-element [Atom]."""
        if self.at("{"):
            return self.brace_block()
        tok = self.tok
        if self.at("true") and self.peek().text in (",", ".", "}") :
            self.advance()
            return []
        t = self.term()
        if self.at_relation():
            return [self.relation(t, tok)]
        return [self.to_atom(t, tok)]

    def goals(self) -> list:
        out = list(self.goal())
        while self.accept(","):
            out.extend(self.goal())
        return out

    # -- clauses
    def directive(self):
        tok = self.tok
        if self.accept("domain"):
            self.expect("(")
            d = self.advance()
            self.expect(")")
            if d.text not in (TERM, RLIN):
                raise self.error(f"unknown domain {d.text!r}", d)
            if self.domain is None:
                self.domain = d.text
            return
        if self.accept("pred"):
            name = self.advance()
            if name.kind != "name":
                raise self.error("expected a predicate name", name)
            self.expect("/")
            ar = self.advance()
            if ar.kind != "num":
                raise self.error("expected an arity", ar)
            n = int(ar.text)
            if self.preds.get(name.text, n) != n:
                raise self.error(f"conflicting arity for {name.text}", name, ArityError)
            self.preds[name.text] = n
            return
        raise self.error(f"unknown directive {tok.text!r}", tok)

    def clause(self) -> Optional[Clause]:
        self.new_scope()
        start = self.tok
        if self.accept(":-"):
            self.directive()
            self.expect(".")
            return None
        head_t = self.term()
        head = self.to_atom(head_t, start)
        body = []
        if self.accept(":-"):
            body = self.goals()
        self.expect(".")
        return Clause(head, tuple(body), start.line)

    def clauses(self) -> List[Clause]:
        out = []
        while self.tok.kind != "eof":
            c = self.clause()
            if c is not None:
                out.append(c)
        return out


def _check_linear(t, tok):
    """Reject anything that is not a linear arithmetic expression."""
    def walk(t) -> bool:  # returns True iff t is variable-free
        if isinstance(t, Var):
            return False
        if isinstance(t, Num):
            return True
        if isinstance(t, Fn):
            if t.name == "-" and len(t.args) == 1:
                return walk(t.args[0])
            if t.name in ARITH_OPS and len(t.args) == 2:
                a, b = walk(t.args[0]), walk(t.args[1])
                if t.name == "*" and not (a or b):
                    raise NonLinearError(f"non-linear product {t}", tok.line, tok.col)
                if t.name == "/":
                    if not b:
                        raise NonLinearError(f"division by a non-constant in {t}",
                                             tok.line, tok.col)
                    if _const_value(t.args[1]) == 0:
                        raise ParseError(f"division by zero in {t}", tok.line, tok.col)
                return a and b
        raise ParseError(f"function symbol {t.name!r} is not allowed in rlin",
                         tok.line, tok.col)
    walk(t)


def _const_value(t) -> Fraction:
    if isinstance(t, Num):
        return t.value
    a = [_const_value(x) for x in t.args]
    if t.name == "-" and len(a) == 1:
        return -a[0]
    return {"+": lambda: a[0] + a[1], "-": lambda: a[0] - a[1],
            "*": lambda: a[0] * a[1], "/": lambda: a[0] / a[1]}[t.name]()


def _detect_domain(text: str) -> Optional[str]:
    m = re.search(r":-\s*domain\(\s*(\w+)\s*\)", text)
    return m.group(1) if m and m.group(1) in (TERM, RLIN) else None


def parse_clauses(text: str, domain: Optional[str] = None, gen: Optional[VarGen] = None):
    """Parse arbitrary Horn clauses; returns ``(domain, clauses, preds)``."""
    domain = domain or _detect_domain(text) or TERM
    p = Parser(text, domain, gen)
    cls = p.clauses()
    return p.domain, cls, dict(p.preds)


def parse_program(text: str, domain: Optional[str] = None,
                  gen: Optional[VarGen] = None, check_sat: bool = True) -> Program:
    """Parse a binary program. Rule constraints are checked for satisfiability."""
    from .backend import is_satisfiable

    domain = domain or _detect_domain(text) or TERM
    p = Parser(text, domain, gen)
    rules, facts = [], []
    while p.tok.kind != "eof":
        start = p.tok
        c = p.clause()
        if c is None:
            continue
        atoms = [g for g in c.body if isinstance(g, Atom)]
        cons_ = tuple(g for g in c.body if isinstance(g, Rel))
        if len(atoms) > 1:
            raise ParseError("clause is not binary (more than one body atom)",
                             start.line, start.col)
        if not atoms:
            facts.append(Query(c.head, cons_))
            continue
        r = Rule(c.head, cons_, atoms[0], f"r{len(rules) + 1}", c.line)
        if check_sat and not is_satisfiable(cons_, domain):
            raise UnsatisfiableRuleError(r, c.line)
        rules.append(r)
    return Program(domain, tuple(rules), dict(p.preds), tuple(facts))


def parse_query(text: str, domain: Optional[str] = None, program: Optional[Program] = None,
                gen: Optional[VarGen] = None) -> Query:
    """Parse ``atom [| constraint]``; arities are checked against ``program``."""
    if domain is None:
        domain = program.domain if program is not None else TERM
    if gen is None and program is not None:
        gen = VarGen.above(program)
    preds = dict(program.preds) if program is not None else {}
    p = Parser(text, domain, gen, preds)
    tok = p.tok
    a = p.to_atom(p.term(), tok)
    cons_ = []
    if p.accept("|"):
        if p.at("{"):
            cons_ = p.brace_block()
        elif p.at("true"):
            p.advance()
        else:
            cons_ = [p.constraint_item()]
            while p.accept(","):
                cons_.append(p.constraint_item())
    p.accept(".")
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return Query(a, tuple(cons_))


def parse_term(text: str, domain: str = TERM, gen: Optional[VarGen] = None):
    p = Parser(text, domain, gen)
    t = p.term()
    if p.tok.kind != "eof":
        raise p.error(f"trailing input {p.tok.text!r}")
    return t
