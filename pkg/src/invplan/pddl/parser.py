"""Recursive-descent parser for the PDDL subset.

Accepts s-expression text with ``;`` comments. Keywords and names are
case-insensitive and lower-cased on the way in. The parser stops at the first
problem: :class:`PddlSyntaxError` for malformed text (with line/column),
:class:`SemanticError` for references to undeclared predicates, fluents,
types or variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .ast import (
    ActionSchema,
    And,
    Arith,
    Assign,
    Atom,
    Constant,
    DomainAst,
    Exists,
    Expr,
    FluentRef,
    Formula,
    Not,
    NumericComparison,
    Or,
    Signature,
    free_variables,
    is_variable,
    walk,
)

ROOT_TYPE = "object"


class PddlSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class SemanticError(ValueError):
    def __init__(self, message: str, name: str | None = None):
        super().__init__(message)
        self.name = name


# -- s-expressions ----------------------------------------------------------


@dataclass(frozen=True)
class Symbol:
    text: str
    line: int
    column: int


@dataclass
class SList:
    items: list
    line: int
    column: int


SExpr = Union[Symbol, SList]

_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def read_sexprs(text: str) -> list[SExpr]:
    """Tokenise ``text`` into a list of top-level s-expressions."""
    stack: list[SList] = [SList([], 1, 1)]
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group(0)
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            newlines = tok.count("\n")
            if newlines:
                line += newlines
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        if tok == "(":
            stack.append(SList([], line, col))
        elif tok == ")":
            if len(stack) == 1:
                raise PddlSyntaxError("unbalanced ')'", line, col)
            done = stack.pop()
            stack[-1].items.append(done)
        else:
            stack[-1].items.append(Symbol(tok.lower(), line, col))
    if len(stack) > 1:
        open_ = stack[-1]
        raise PddlSyntaxError("unclosed '('", open_.line, open_.column)
    return stack[0].items


def _pos(node: SExpr) -> tuple[int, int]:
    return node.line, node.column


def _expect_list(node: SExpr, what: str) -> SList:
    if not isinstance(node, SList):
        raise PddlSyntaxError(f"expected {what}, found '{node.text}'", *_pos(node))
    return node


def _expect_symbol(node: SExpr, what: str) -> str:
    if not isinstance(node, Symbol):
        raise PddlSyntaxError(f"expected {what}, found a list", *_pos(node))
    return node.text


def _head(node: SList) -> str | None:
    if node.items and isinstance(node.items[0], Symbol):
        return node.items[0].text
    return None


def _typed_list(items: list[SExpr], variables: bool) -> list[tuple[str, str]]:
    """Parse ``a b - t c`` (or ``?a ?b - t``); untyped names default to ``object``."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        name = _expect_symbol(items[i], "a name")
        if name == "-":
            if i + 1 >= len(items) or not pending:
                raise PddlSyntaxError("dangling '-' in typed list", *_pos(items[i]))
            type_name = _expect_symbol(items[i + 1], "a type name")
            out.extend((p, type_name) for p in pending)
            pending = []
            i += 2
            continue
        if variables and not is_variable(name):
            raise PddlSyntaxError(f"expected a variable, found '{name}'", *_pos(items[i]))
        pending.append(name)
        i += 1
    out.extend((p, ROOT_TYPE) for p in pending)
    return out


# -- declarations context ---------------------------------------------------


@dataclass
class _Context:
    types: dict[str, str]
    predicates: dict[str, Signature]
    fluents: dict[str, Signature]

    @classmethod
    def of(cls, domain: DomainAst) -> "_Context":
        return cls(dict(domain.type_hierarchy),
                   {p.name: p for p in domain.predicates},
                   {f.name: f for f in domain.fluents})

    def check_type(self, name: str) -> None:
        if name != ROOT_TYPE and name not in self.types:
            raise SemanticError(f"undeclared type '{name}'", name)


class _FormulaParser:
    def __init__(self, ctx: _Context, scope: set[str], strict_variables: bool = True):
        self.ctx = ctx
        self.scope = set(scope)
        self.strict = strict_variables

    def term(self, node: SExpr) -> str:
        name = _expect_symbol(node, "a term")
        if is_variable(name) and self.strict and name not in self.scope:
            raise SemanticError(f"unbound variable '{name}'", name)
        return name

    def formula(self, node: SExpr, effect: bool = False) -> Formula:
        lst = _expect_list(node, "a formula")
        head = _head(lst)
        if head is None:
            raise PddlSyntaxError("formula must start with a keyword or predicate", *_pos(lst))
        args = lst.items[1:]
        if head == "and":
            return And(tuple(self.formula(a, effect) for a in args))
        if head == "or":
            if effect:
                raise SemanticError("disjunction is not allowed in effects", "or")
            return Or(tuple(self.formula(a) for a in args))
        if head == "not":
            if len(args) != 1:
                raise PddlSyntaxError("'not' takes exactly one argument", *_pos(lst))
            body = self.formula(args[0], effect)
            if effect and not isinstance(body, Atom):
                raise SemanticError("effects may only negate atoms", "not")
            return Not(body)
        if head == "exists":
            if effect:
                raise SemanticError("existential quantifier is not allowed in effects", "exists")
            if len(args) != 2:
                raise PddlSyntaxError("'exists' takes a variable list and a body", *_pos(lst))
            typed = _typed_list(_expect_list(args[0], "a variable list").items, variables=True)
            if not typed:
                raise PddlSyntaxError("'exists' needs at least one variable", *_pos(args[0]))
            for _, t in typed:
                self.ctx.check_type(t)
            saved = set(self.scope)
            self.scope |= {v for v, _ in typed}
            body = self.formula(args[1])
            self.scope = saved
            for var, t in reversed(typed):
                body = Exists(var, t, body)
            return body
        if head == "=":
            if effect:
                raise SemanticError("comparisons are not allowed in effects", "=")
            if len(args) != 2:
                raise PddlSyntaxError("'=' takes two operands", *_pos(lst))
            return NumericComparison("=", self.expr(args[0]), self.expr(args[1]))
        if head in ("assign", "increase", "decrease"):
            if not effect:
                raise SemanticError(f"'{head}' is only allowed in effects", head)
            if len(args) != 2:
                raise PddlSyntaxError(f"'{head}' takes two operands", *_pos(lst))
            target = self.expr(args[0])
            if not isinstance(target, FluentRef):
                raise PddlSyntaxError(f"'{head}' target must be a fluent", *_pos(args[0]))
            value = self.expr(args[1])
            if head == "increase":
                value = Arith("+", target, value)
            elif head == "decrease":
                value = Arith("-", target, value)
            return Assign(target, value)
        sig = self.ctx.predicates.get(head)
        if sig is None:
            raise SemanticError(f"undeclared predicate '{head}'", head)
        terms = tuple(self.term(a) for a in args)
        if len(terms) != sig.arity:
            raise SemanticError(f"predicate '{head}' expects {sig.arity} arguments, got {len(terms)}", head)
        return Atom(head, terms)

    def expr(self, node: SExpr) -> Expr:
        if isinstance(node, Symbol):
            if re.fullmatch(r"[+-]?\d+", node.text):
                return Constant(int(node.text))
            raise PddlSyntaxError(f"expected a numeric expression, found '{node.text}'", *_pos(node))
        head = _head(node)
        if head is None:
            raise PddlSyntaxError("empty numeric expression", *_pos(node))
        args = node.items[1:]
        if head in ("+", "-"):
            if len(args) != 2:
                raise PddlSyntaxError(f"'{head}' takes two operands", *_pos(node))
            return Arith(head, self.expr(args[0]), self.expr(args[1]))
        sig = self.ctx.fluents.get(head)
        if sig is None:
            raise SemanticError(f"undeclared fluent '{head}'", head)
        terms = tuple(self.term(a) for a in args)
        if len(terms) != sig.arity:
            raise SemanticError(f"fluent '{head}' expects {sig.arity} arguments, got {len(terms)}", head)
        return FluentRef(head, terms)


# -- entry points -----------------------------------------------------------


def _signatures(items: list[SExpr], ctx: _Context, kind: str) -> list[Signature]:
    out = []
    for item in items:
        lst = _expect_list(item, f"a {kind} declaration")
        name = _head(lst)
        if name is None:
            raise PddlSyntaxError(f"{kind} declaration needs a name", *_pos(lst))
        params = _typed_list(lst.items[1:], variables=True)
        for _, t in params:
            ctx.check_type(t)
        out.append(Signature(name, tuple(params)))
    return out


def _action(node: SList, ctx: _Context) -> ActionSchema:
    items = node.items
    if len(items) < 2:
        raise PddlSyntaxError("action needs a name", *_pos(node))
    name = _expect_symbol(items[1], "an action name")
    fields: dict[str, SExpr] = {}
    i = 2
    while i < len(items):
        key = _expect_symbol(items[i], "an action keyword")
        if key not in (":parameters", ":precondition", ":effect"):
            raise PddlSyntaxError(f"unknown action keyword '{key}'", *_pos(items[i]))
        if i + 1 >= len(items):
            raise PddlSyntaxError(f"missing value for '{key}'", *_pos(items[i]))
        fields[key] = items[i + 1]
        i += 2
    params: list[tuple[str, str]] = []
    if ":parameters" in fields:
        params = _typed_list(_expect_list(fields[":parameters"], "a parameter list").items, variables=True)
    for _, t in params:
        ctx.check_type(t)
    fp = _FormulaParser(ctx, {v for v, _ in params})
    pre = fp.formula(fields[":precondition"]) if ":precondition" in fields else And(())
    eff = fp.formula(fields[":effect"], effect=True) if ":effect" in fields else And(())
    if not isinstance(eff, And):
        eff = And((eff,))
    return ActionSchema(name, tuple(params), pre, eff)


def parse_domain(text: str) -> DomainAst:
    """Parse a ``(define (domain ...))`` form into a :class:`DomainAst`."""
    forms = read_sexprs(text)
    if len(forms) != 1:
        if not forms:
            raise PddlSyntaxError("empty input", 1, 1)
        raise PddlSyntaxError("expected exactly one top-level form", *_pos(forms[1]))
    top = _expect_list(forms[0], "(define ...)")
    if _head(top) != "define":
        raise PddlSyntaxError("expected 'define'", *_pos(top))
    if len(top.items) < 2:
        raise PddlSyntaxError("missing (domain NAME)", *_pos(top))
    name_form = _expect_list(top.items[1], "(domain NAME)")
    if _head(name_form) != "domain" or len(name_form.items) != 2:
        raise PddlSyntaxError("expected (domain NAME)", *_pos(name_form))
    name = _expect_symbol(name_form.items[1], "a domain name")

    sections: dict[str, list[SList]] = {}
    for item in top.items[2:]:
        lst = _expect_list(item, "a domain section")
        head = _head(lst)
        if head not in (":requirements", ":types", ":predicates", ":functions", ":action"):
            raise PddlSyntaxError(f"unsupported section '{head}'", *_pos(lst))
        sections.setdefault(head, []).append(lst)

    requirements: list[str] = []
    for sec in sections.get(":requirements", []):
        requirements += [_expect_symbol(s, "a requirement") for s in sec.items[1:]]
    hierarchy: list[tuple[str, str]] = []
    for sec in sections.get(":types", []):
        hierarchy += _typed_list(sec.items[1:], variables=False)
    ctx = _Context(dict(hierarchy), {}, {})
    for _, parent in hierarchy:
        ctx.check_type(parent)
    preds = [s for sec in sections.get(":predicates", []) for s in _signatures(sec.items[1:], ctx, "predicate")]
    fluents = [s for sec in sections.get(":functions", []) for s in _signatures(sec.items[1:], ctx, "fluent")]
    ctx.predicates = {p.name: p for p in preds}
    ctx.fluents = {f.name: f for f in fluents}
    actions = tuple(_action(a, ctx) for a in sections.get(":action", []))
    return DomainAst(name, tuple(hierarchy), tuple(preds), tuple(fluents), actions, tuple(requirements))


def parse_action(text: str, domain: DomainAst) -> ActionSchema:
    """Parse a standalone ``(:action ...)`` form against ``domain``'s declarations."""
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise PddlSyntaxError("expected exactly one (:action ...) form", 1, 1)
    node = _expect_list(forms[0], "(:action ...)")
    if _head(node) != ":action":
        raise PddlSyntaxError("expected ':action'", *_pos(node))
    return _action(node, _Context.of(domain))


def parse_formula(text: str, domain: DomainAst, variables: set[str] | None = None) -> Formula:
    """Parse a single formula; with ``variables=None`` it must be closed."""
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise PddlSyntaxError("expected exactly one formula", 1, 1)
    return _FormulaParser(_Context.of(domain), set(variables or ())).formula(forms[0])


def check_domain(domain: DomainAst) -> None:
    """Re-check the declaration invariants of an already constructed AST."""
    ctx = _Context.of(domain)
    for t, parent in domain.type_hierarchy:
        ctx.check_type(parent)
    for sig in (*domain.predicates, *domain.fluents):
        for _, t in sig.parameters:
            ctx.check_type(t)
    for a in domain.actions:
        params = {v for v, _ in a.parameters}
        for _, t in a.parameters:
            ctx.check_type(t)
        for part in (a.precondition, a.effect):
            loose = free_variables(part) - params
            if loose:
                raise SemanticError(f"action '{a.name}' uses unbound variable {sorted(loose)[0]}", sorted(loose)[0])
            for node in walk(part):
                if isinstance(node, Atom) and node.predicate not in ctx.predicates:
                    raise SemanticError(f"undeclared predicate '{node.predicate}'", node.predicate)
                if isinstance(node, FluentRef) and node.fluent not in ctx.fluents:
                    raise SemanticError(f"undeclared fluent '{node.fluent}'", node.fluent)
                if isinstance(node, Exists):
                    ctx.check_type(node.type)
