"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 resource limit reached.
"""
from __future__ import annotations

import json
import sys
from typing import Optional

import click

from . import __version__
from .engine import binary_unfold, derive
from .errors import NontermError, ParseError, ResourceError
from .filters import check_dnlog, filter_literal, parse_filter
from .inference import Options, analyze
from .parser import parse_clauses, parse_program, parse_query
from .syntax import DOMAINS, TERM, VarGen, normalize_rule, pretty_program

EXIT_INPUT = 2
EXIT_RESOURCE = 3

domain_opt = click.option("--domain", type=click.Choice(DOMAINS),
                          help="Constraint domain (overrides the file directive).")
qe_cap_opt = click.option("--qe-cap", type=click.IntRange(min=1), default=100_000,
                          show_default=True, help="Size cap for quantifier elimination.")
format_opt = click.option("--format", "fmt", type=click.Choice(["text", "json"]),
                          default="text", show_default=True)


def _fail(msg: str, code: int):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        _fail(f"cannot read {path}: {e.strerror}", EXIT_INPUT)


def _load(path: str, domain: Optional[str]):
    text = _read(path)
    try:
        return parse_program(text, domain)
    except (ParseError, NontermError) as e:
        _fail(f"{path}: {e}", EXIT_INPUT)


@click.group()
@click.version_option(__version__, prog_name="nontermclp")
def main():
    """Non-termination analysis of binary constraint logic programs."""


@main.command("analyze")
@click.argument("path")
@domain_opt
@click.option("--witness", is_flag=True, help="Validate every certificate by simulation.")
@click.option("--witness-depth", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--filter-budget", type=click.IntRange(min=1), default=64, show_default=True,
              help="Candidate filters per rule.")
@qe_cap_opt
@format_opt
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_analyze(path, domain, witness, witness_depth, filter_budget, qe_cap, fmt, jobs, seed):
    """Infer looping queries of the program in PATH."""
    program = _load(path, domain)
    opts = Options(witness=witness, witness_depth=witness_depth, filter_budget=filter_budget,
                   qe_cap=qe_cap, seed=seed)
    try:
        report = analyze(program, opts, jobs=jobs)
    except ResourceError as e:
        _fail(str(e), EXIT_RESOURCE)
    if fmt == "json":
        click.echo(json.dumps(report.to_json(), indent=2, sort_keys=True))
    else:
        click.echo(report.to_text())
    if report.resource_error:
        click.echo("warning: some rules hit a resource limit", err=True)
        sys.exit(EXIT_RESOURCE)


@main.command("check")
@click.argument("path")
@click.option("--rule", "rid", required=True, help="Rule identifier, e.g. r1.")
@click.option("--filter", "literal", required=True,
              help="e.g. 'filter p: positions {1}, delta p_t(X) | {X >= 0}'")
@domain_opt
@qe_cap_opt
@format_opt
def cmd_check(path, rid, literal, domain, qe_cap, fmt):
    """Check whether a filter is derivation neutral for one rule."""
    program = _load(path, domain)
    try:
        rule = program.rule(rid)
    except KeyError:
        _fail(f"no rule {rid!r} in {path}", EXIT_INPUT)
    try:
        flt = parse_filter(literal, program.preds, program.domain)
    except ParseError as e:
        _fail(f"bad filter: {e}", EXIT_INPUT)
    gen = VarGen.above(program)
    try:
        verdict = check_dnlog(normalize_rule(rule, gen), flt, program.domain, qe_cap, gen)
    except ResourceError as e:
        _fail(str(e), EXIT_RESOURCE)
    if fmt == "json":
        out = {"rule": rid, "filter": filter_literal(flt), **verdict.to_json()}
        click.echo(json.dumps(out, indent=2, sort_keys=True))
        return
    click.echo(f"rule {rule.rid}: {rule}")
    click.echo(f"filter: {filter_literal(flt)}")
    click.echo(f"verdict: {verdict.outcome}")
    if verdict.dnsyn is not None:
        for k, ok in sorted(verdict.dnsyn.items()):
            click.echo(f"  DNsyn{k}: {'true' if ok else 'false'}")
    else:
        click.echo("  (rule is not flat; syntactic conditions not applicable)")
    if verdict.formula is not None:
        click.echo(f"formula: {verdict.formula}")
    if verdict.eliminated is not None:
        click.echo(f"eliminated: {verdict.eliminated}")
    if verdict.reason:
        click.echo(f"reason: {verdict.reason}")


@main.command("derive")
@click.argument("path")
@click.option("--query", "qtext", required=True, help="e.g. 'p(X,Y) | {X >= 0}'")
@click.option("--steps", type=click.IntRange(min=0), default=10, show_default=True)
@click.option("--trace", "trace_fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("--compact", is_flag=True, help="Simplify constraints after each step.")
@domain_opt
def cmd_derive(path, qtext, steps, trace_fmt, compact, domain):
    """Run a derivation (first applicable rule in program order)."""
    program = _load(path, domain)
    try:
        q = parse_query(qtext, program=program)
    except ParseError as e:
        _fail(f"bad query: {e}", EXIT_INPUT)
    try:
        d = derive(program, q, steps, compact=compact)
    except ResourceError as e:
        _fail(str(e), EXIT_RESOURCE)
    if trace_fmt == "json":
        click.echo(d.trace_json())
    else:
        for line in d.trace_lines():
            click.echo(line)


@main.command("unfold")
@click.argument("path")
@click.option("--depth", type=click.IntRange(min=1), required=True)
@click.option("--compose", is_flag=True, help="Also resolve called atoms with binary clauses.")
@click.option("--cap", type=click.IntRange(min=1), default=5_000, show_default=True)
def cmd_unfold(path, depth, compose, cap):
    """Binary unfolding of a general logic program (finite trees only)."""
    text = _read(path)
    try:
        domain, clauses, preds = parse_clauses(text)
    except ParseError as e:
        _fail(f"{path}: {e}", EXIT_INPUT)
    if domain != TERM:
        _fail("binary unfolding is only available for the term domain", EXIT_INPUT)
    try:
        prog = binary_unfold(clauses, depth, cap, compose, preds=preds)
    except ResourceError as e:
        _fail(str(e), EXIT_RESOURCE)
    click.echo(pretty_program(prog), nl=False)


if __name__ == "__main__":
    main()
