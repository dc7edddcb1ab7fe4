"""Problem instances and schema grounding."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .ast import ActionSchema, DomainAst, Formula, is_subtype, substitute
from .semantics import GroundAtom, GroundFluent, State


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A grounded planning problem.

    ``goals`` maps each trophy to its goal formula, in the order the goals
    were declared. ``grid`` carries the spatial layer (bounds and walls) that
    movement is checked against; ``rules`` names optional behavioural rules
    such as ``"no-surplus-keys"``.
    """

    domain: DomainAst
    objects: dict[str, str]
    initial_facts: frozenset[GroundAtom]
    initial_fluents: dict[GroundFluent, int]
    goals: dict[str, Formula]
    grid: "GridSpec" = None
    rules: frozenset[str] = frozenset()
    name: str = "problem"

    @property
    def goal_candidates(self) -> list[Formula]:
        return list(self.goals.values())

    def initial_state(self) -> State:
        return State.build(self.initial_facts, self.initial_fluents, self.objects,
                           self.domain.types, {f.name for f in self.domain.fluents})

    def objects_of(self, type_name: str) -> list[str]:
        types = self.domain.types
        return sorted(o for o, t in self.objects.items() if is_subtype(types, t, type_name))


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    walls: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def inside(self, cell: tuple[int, int]) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height


@dataclass(frozen=True)
class ActionInstance:
    """A schema with every parameter bound to an object."""

    name: str
    args: tuple[str, ...]
    precondition: Formula
    effect: Formula

    def __str__(self) -> str:
        return "(" + " ".join((self.name, *self.args)) + ")"


def ground_schema(schema: ActionSchema, problem: ProblemInstance) -> list[ActionInstance]:
    pools = [problem.objects_of(t) for _, t in schema.parameters]
    out = []
    for combo in itertools.product(*pools):
        binding = dict(zip((v for v, _ in schema.parameters), combo))
        out.append(ActionInstance(schema.name, tuple(combo),
                                  substitute(schema.precondition, binding),
                                  substitute(schema.effect, binding)))
    return out


def ground_actions(domain: DomainAst, problem: ProblemInstance) -> list[ActionInstance]:
    """Every type-consistent instantiation of every schema, in lexicographic object order."""
    return [inst for schema in domain.actions for inst in ground_schema(schema, problem)]
