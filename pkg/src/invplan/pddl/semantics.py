"""Satisfaction and effect semantics over ground states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .ast import (
    And,
    Arith,
    Assign,
    Atom,
    Constant,
    Exists,
    FluentRef,
    Not,
    NumericComparison,
    Or,
    is_subtype,
    is_variable,
)

GroundAtom = tuple[str, ...]  # ("has", "alice", "key1")
GroundFluent = tuple[str, ...]  # ("xloc", "alice")


class UnboundVariable(LookupError):
    pass


class UnknownFluent(LookupError):
    pass


class IllegalEffect(ValueError):
    pass


class StateView(Protocol):
    """What :func:`eval_formula` needs from a state."""

    def holds(self, atom: GroundAtom) -> bool: ...

    def value(self, fluent: GroundFluent) -> int | None: ...

    def objects_of(self, type_name: str) -> Sequence[str]: ...


@dataclass(frozen=True)
class State:
    """Closed-world ground state: true atoms, fluent values and the object universe.

    ``fluent_names`` lists every declared fluent so that a lookup of a declared
    fluent without a value yields ``None`` (undefined) while a lookup of an
    undeclared one raises :class:`UnknownFluent`.
    """

    facts: frozenset[GroundAtom]
    fluents: tuple[tuple[GroundFluent, int], ...]
    objects: tuple[tuple[str, str], ...]
    types: tuple[tuple[str, str], ...] = ()
    fluent_names: frozenset[str] = frozenset()
    _fluent_map: dict = field(default=None, compare=False, hash=False, repr=False)

    @classmethod
    def build(cls, facts, fluents: Mapping[GroundFluent, int], objects: Mapping[str, str],
              types: Mapping[str, str] = (), fluent_names=None) -> "State":
        names = frozenset(fluent_names) if fluent_names is not None else frozenset(k[0] for k in fluents)
        return cls(frozenset(tuple(f) for f in facts),
                   tuple(sorted((tuple(k), int(v)) for k, v in dict(fluents).items())),
                   tuple(sorted(dict(objects).items())),
                   tuple(sorted(dict(types).items())),
                   names)

    @property
    def fluent_map(self) -> dict[GroundFluent, int]:
        if self._fluent_map is None:
            object.__setattr__(self, "_fluent_map", dict(self.fluents))
        return self._fluent_map

    def holds(self, atom: GroundAtom) -> bool:
        return atom in self.facts

    def value(self, fluent: GroundFluent) -> int | None:
        if fluent[0] not in self.fluent_names:
            raise UnknownFluent(fluent[0])
        return self.fluent_map.get(fluent)

    def objects_of(self, type_name: str) -> list[str]:
        types = dict(self.types)
        return [o for o, t in self.objects if is_subtype(types, t, type_name)]


def _resolve(term: str, binding: Mapping[str, str]) -> str:
    if is_variable(term):
        try:
            return binding[term]
        except KeyError:
            raise UnboundVariable(term) from None
    return term


def eval_expr(state: StateView, expr, binding: Mapping[str, str] | None = None) -> int | None:
    """Integer value of ``expr``; ``None`` when any fluent involved is undefined."""
    binding = {} if binding is None else binding
    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, FluentRef):
        return state.value((expr.fluent, *(_resolve(a, binding) for a in expr.args)))
    if isinstance(expr, Arith):
        lhs = eval_expr(state, expr.lhs, binding)
        rhs = eval_expr(state, expr.rhs, binding)
        if lhs is None or rhs is None:
            return None
        return lhs + rhs if expr.op == "+" else lhs - rhs
    raise TypeError(f"not a numeric expression: {expr!r}")


def eval_formula(state: StateView, formula, binding: Mapping[str, str] | None = None) -> bool:
    binding = {} if binding is None else binding
    if isinstance(formula, Atom):
        return state.holds((formula.predicate, *(_resolve(a, binding) for a in formula.args)))
    if isinstance(formula, And):
        return all(eval_formula(state, p, binding) for p in formula.parts)
    if isinstance(formula, Or):
        return any(eval_formula(state, p, binding) for p in formula.parts)
    if isinstance(formula, Not):
        return not eval_formula(state, formula.body, binding)
    if isinstance(formula, Exists):
        inner = dict(binding)
        for obj in state.objects_of(formula.type):
            inner[formula.variable] = obj
            if eval_formula(state, formula.body, inner):
                return True
        return False
    if isinstance(formula, NumericComparison):
        lhs = eval_expr(state, formula.lhs, binding)
        rhs = eval_expr(state, formula.rhs, binding)
        return lhs is not None and rhs is not None and lhs == rhs
    raise TypeError(f"cannot evaluate {type(formula).__name__} as a condition")


def effect_literals(effect, binding: Mapping[str, str] | None = None):
    """Split a conjunctive effect into (adds, deletes, assignments); assignments are unevaluated."""
    binding = {} if binding is None else binding
    if not isinstance(effect, And):
        raise IllegalEffect(f"effect must be a conjunction, got {type(effect).__name__}")
    adds, deletes, assigns = [], [], []
    for part in effect.parts:
        if isinstance(part, Atom):
            adds.append((part.predicate, *(_resolve(a, binding) for a in part.args)))
        elif isinstance(part, Not) and isinstance(part.body, Atom):
            b = part.body
            deletes.append((b.predicate, *(_resolve(a, binding) for a in b.args)))
        elif isinstance(part, Assign):
            target = (part.target.fluent, *(_resolve(a, binding) for a in part.target.args))
            assigns.append((target, part.value))
        else:
            raise IllegalEffect(f"illegal effect component {type(part).__name__}")
    return adds, deletes, assigns


def apply_effect(state: State, effect, binding: Mapping[str, str] | None = None) -> State:
    """Return the successor state; right-hand sides are evaluated in the old state."""
    adds, deletes, assigns = effect_literals(effect, binding)
    values = {}
    for target, expr in assigns:
        v = eval_expr(state, expr, binding)
        if v is None:
            raise IllegalEffect(f"assignment to {target} reads an undefined fluent")
        values[target] = v
    facts = (state.facts - frozenset(deletes)) | frozenset(adds)
    fluents = dict(state.fluent_map)
    fluents.update(values)
    return State(facts, tuple(sorted(fluents.items())), state.objects, state.types,
                 state.fluent_names | {t[0] for t in values})
