"""Syntax tree for the PDDL subset used by the gameshow domain.

Every node is a frozen dataclass, so formulas and schemas can be used as
dictionary keys and compared structurally. Names are stored lower-cased.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

Term = str  # a variable ("?k") or an object name ("key1")


def is_variable(term: Term) -> bool:
    return term.startswith("?")


# -- numeric expressions ----------------------------------------------------


@dataclass(frozen=True)
class Constant:
    value: int


@dataclass(frozen=True)
class FluentRef:
    fluent: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Arith:
    op: str  # "+" or "-"
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[Constant, FluentRef, Arith]


# -- formulas ---------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class And:
    parts: tuple["Formula", ...] = ()


@dataclass(frozen=True)
class Or:
    parts: tuple["Formula", ...] = ()


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    variable: str
    type: str
    body: "Formula"


@dataclass(frozen=True)
class NumericComparison:
    op: str  # only "=" in this subset
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True)
class Assign:
    """Fluent assignment; legal only inside effects."""

    target: FluentRef
    value: Expr


Formula = Union[Atom, And, Or, Not, Exists, NumericComparison, Assign]

TRUE = And(())


# -- declarations -----------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    """Typed predicate or fluent signature: ``(has ?a - agent ?k - key)``."""

    name: str
    parameters: tuple[tuple[str, str], ...] = ()

    @property
    def arity(self) -> int:
        return len(self.parameters)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]
    precondition: Formula
    effect: Formula


@dataclass(frozen=True)
class DomainAst:
    name: str
    type_hierarchy: tuple[tuple[str, str], ...]  # (type, parent) pairs, in declaration order
    predicates: tuple[Signature, ...]
    fluents: tuple[Signature, ...]
    actions: tuple[ActionSchema, ...]
    requirements: tuple[str, ...] = ()

    @property
    def types(self) -> dict[str, str]:
        return dict(self.type_hierarchy)

    def predicate(self, name: str) -> Signature | None:
        return next((p for p in self.predicates if p.name == name), None)

    def fluent(self, name: str) -> Signature | None:
        return next((f for f in self.fluents if f.name == name), None)

    def action(self, name: str) -> ActionSchema | None:
        return next((a for a in self.actions if a.name == name), None)

    def with_action(self, schema: ActionSchema) -> "DomainAst":
        """Return a copy where ``schema`` replaces the action of the same name (or is appended)."""
        actions = [a for a in self.actions if a.name != schema.name]
        index = next((i for i, a in enumerate(self.actions) if a.name == schema.name), len(actions))
        actions.insert(index, schema)
        return DomainAst(self.name, self.type_hierarchy, self.predicates, self.fluents,
                         tuple(actions), self.requirements)


# -- helpers ----------------------------------------------------------------


def is_subtype(types: dict[str, str], child: str, ancestor: str) -> bool:
    seen = set()
    t: str | None = child
    while t is not None and t not in seen:
        if t == ancestor:
            return True
        seen.add(t)
        t = types.get(t)
    return False


def walk(node) -> Iterator:
    """Yield every formula and expression node below ``node`` (pre-order)."""
    yield node
    if isinstance(node, (And, Or)):
        for p in node.parts:
            yield from walk(p)
    elif isinstance(node, Not):
        yield from walk(node.body)
    elif isinstance(node, Exists):
        yield from walk(node.body)
    elif isinstance(node, (NumericComparison, Arith)):
        yield from walk(node.lhs)
        yield from walk(node.rhs)
    elif isinstance(node, Assign):
        yield from walk(node.target)
        yield from walk(node.value)


def free_variables(node, bound: frozenset[str] = frozenset()) -> set[str]:
    if isinstance(node, (Atom, FluentRef)):
        return {a for a in node.args if is_variable(a) and a not in bound}
    if isinstance(node, (And, Or)):
        out: set[str] = set()
        for p in node.parts:
            out |= free_variables(p, bound)
        return out
    if isinstance(node, Not):
        return free_variables(node.body, bound)
    if isinstance(node, Exists):
        return free_variables(node.body, bound | {node.variable})
    if isinstance(node, (NumericComparison, Arith)):
        return free_variables(node.lhs, bound) | free_variables(node.rhs, bound)
    if isinstance(node, Assign):
        return free_variables(node.target, bound) | free_variables(node.value, bound)
    return set()


def substitute(node, binding: dict[str, str]):
    """Replace variables by objects according to ``binding``; quantified variables shadow."""
    if isinstance(node, Atom):
        return Atom(node.predicate, tuple(binding.get(a, a) for a in node.args))
    if isinstance(node, FluentRef):
        return FluentRef(node.fluent, tuple(binding.get(a, a) for a in node.args))
    if isinstance(node, And):
        return And(tuple(substitute(p, binding) for p in node.parts))
    if isinstance(node, Or):
        return Or(tuple(substitute(p, binding) for p in node.parts))
    if isinstance(node, Not):
        return Not(substitute(node.body, binding))
    if isinstance(node, Exists):
        inner = {k: v for k, v in binding.items() if k != node.variable}
        return Exists(node.variable, node.type, substitute(node.body, inner))
    if isinstance(node, NumericComparison):
        return NumericComparison(node.op, substitute(node.lhs, binding), substitute(node.rhs, binding))
    if isinstance(node, Arith):
        return Arith(node.op, substitute(node.lhs, binding), substitute(node.rhs, binding))
    if isinstance(node, Assign):
        return Assign(substitute(node.target, binding), substitute(node.value, binding))
    return node
