"""Pretty-printer for the PDDL subset; output re-parses to an equal AST."""

from __future__ import annotations

from .ast import (
    ActionSchema,
    And,
    Arith,
    Assign,
    Atom,
    Constant,
    DomainAst,
    Exists,
    FluentRef,
    Not,
    NumericComparison,
    Or,
    Signature,
)


def format_expr(e) -> str:
    if isinstance(e, Constant):
        return str(e.value)
    if isinstance(e, FluentRef):
        return "(" + " ".join((e.fluent, *e.args)) + ")"
    if isinstance(e, Arith):
        return f"({e.op} {format_expr(e.lhs)} {format_expr(e.rhs)})"
    raise TypeError(f"not an expression: {e!r}")


def format_formula(f, indent: int = 0) -> str:
    """Render a formula; conjunctions/disjunctions with several parts go one per line."""
    pad = " " * indent
    if isinstance(f, Atom):
        return "(" + " ".join((f.predicate, *f.args)) + ")"
    if isinstance(f, (And, Or)):
        kw = "and" if isinstance(f, And) else "or"
        if not f.parts:
            return f"({kw})"
        inner = [format_formula(p, indent + len(kw) + 2) for p in f.parts]
        if len(inner) == 1 or sum(len(s) for s in inner) < 60:
            return f"({kw} " + " ".join(inner) + ")"
        sep = "\n" + pad + " " * (len(kw) + 2)
        return f"({kw} " + sep.join(inner) + ")"
    if isinstance(f, Not):
        return f"(not {format_formula(f.body, indent + 5)})"
    if isinstance(f, Exists):
        return f"(exists ({f.variable} - {f.type}) {format_formula(f.body, indent + 2)})"
    if isinstance(f, NumericComparison):
        return f"({f.op} {format_expr(f.lhs)} {format_expr(f.rhs)})"
    if isinstance(f, Assign):
        return f"(assign {format_expr(f.target)} {format_expr(f.value)})"
    raise TypeError(f"not a formula: {f!r}")


def _typed(params) -> str:
    return " ".join(f"{v} - {t}" for v, t in params)


def _signature(sig: Signature) -> str:
    return "(" + " ".join(filter(None, (sig.name, _typed(sig.parameters)))) + ")"


def format_action(a: ActionSchema, indent: int = 0) -> str:
    pad = " " * indent
    lines = [
        f"{pad}(:action {a.name}",
        f"{pad} :parameters ({_typed(a.parameters)})",
        f"{pad} :precondition {format_formula(a.precondition, indent + 15)}",
        f"{pad} :effect {format_formula(a.effect, indent + 9)}",
        f"{pad})",
    ]
    return "\n".join(lines)


def format_domain(d: DomainAst) -> str:
    out = [f"(define (domain {d.name})"]
    if d.requirements:
        out.append("  (:requirements " + " ".join(d.requirements) + ")")
    if d.type_hierarchy:
        body = " ".join(f"{t} - {parent}" for t, parent in d.type_hierarchy)
        out.append(f"  (:types {body})")
    if d.predicates:
        out.append("  (:predicates " + "\n               ".join(_signature(p) for p in d.predicates) + ")")
    if d.fluents:
        out.append("  (:functions " + "\n              ".join(_signature(f) for f in d.fluents) + ")")
    for a in d.actions:
        out.append(format_action(a, 2))
    out.append(")")
    return "\n".join(out) + "\n"
