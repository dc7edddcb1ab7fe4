"""Optimal-cost planning over compiled gameshow problems.

:class:`GridWorld` is the transition system: walking is native grid
movement (bounds, walls and locked door cells block it), while picking up
keys, unlocking doors and taking trophies are the domain's PDDL schemas,
whose preconditions and effects decide applicability and outcome. A* with
a Manhattan heuristic gives the optimal plan cost used for the goal prior
and for Q-values; :func:`uniform_cost_search` is an independent check.
"""

from __future__ import annotations

import heapq
import itertools
import math
import threading
from dataclasses import dataclass, field

from .pddl import ProblemInstance, eval_formula
from .pddl.grounding import ground_schema
from .pddl.semantics import GroundAtom, GroundFluent, State, UnknownFluent, effect_literals, eval_expr

Cell = tuple[int, int]

DIRECTIONS: dict[str, Cell] = {"E": (1, 0), "N": (0, -1), "S": (0, 1), "W": (-1, 0)}
NO_SURPLUS_KEYS = "no-surplus-keys"


class InapplicableAction(ValueError):
    pass


@dataclass(frozen=True)
class GroundAction:
    kind: str  # "move" | "pickup" | "unlock" | "take"
    args: tuple[str, ...]
    cost: float = field(default=1.0, compare=False)

    def __str__(self) -> str:
        return " ".join((self.kind, *self.args))

    @classmethod
    def move(cls, direction: str, cost: float = 1.0) -> "GroundAction":
        return cls("move", (direction,), cost)


@dataclass(frozen=True, eq=False)
class WorldState:
    """Dynamic part of a gameshow state; static layout lives in :class:`GridWorld`.

    A key is on the map (``keys_on_map``), in the inventory, or consumed.
    ``facts`` and ``counters`` hold any other dynamic atoms and fluents.
    """

    agent: Cell
    inventory: frozenset[str] = frozenset()
    locked: frozenset[str] = frozenset()
    keys_on_map: frozenset[tuple[str, Cell]] = frozenset()
    trophy_taken: str | None = None
    facts: frozenset[GroundAtom] = frozenset()
    counters: tuple[tuple[GroundFluent, int], ...] = ()

    def _key(self):
        return (self.agent, self.inventory, self.locked, self.keys_on_map,
                self.trophy_taken, self.facts, self.counters)

    def __eq__(self, other) -> bool:
        return isinstance(other, WorldState) and self._key() == other._key()

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash(self._key())
            object.__setattr__(self, "_hash", h)
        return h

    def key_cell(self, key: str) -> Cell | None:
        for k, cell in self.keys_on_map:
            if k == key:
                return cell
        return None


@dataclass(frozen=True)
class PlanResult:
    reached: bool
    cost: float
    actions: tuple[GroundAction, ...] = ()

    @property
    def status(self) -> str:
        return "Reached" if self.reached else "Unreachable"


UNREACHABLE = PlanResult(False, math.inf)


class _View:
    """Presents a :class:`WorldState` to the PDDL evaluator."""

    __slots__ = ("w", "s")

    def __init__(self, world: "GridWorld", state: WorldState):
        self.w = world
        self.s = state

    def holds(self, atom: GroundAtom) -> bool:
        w, s = self.w, self.s
        p = atom[0]
        if p == "has":
            return atom[1] == w.agent and atom[2] in s.inventory
        if p == "locked":
            return atom[1] in s.locked
        if p == "onmap":
            return s.key_cell(atom[1]) is not None
        if p == "taken":
            return atom[1] == w.agent and s.trophy_taken == atom[2]
        return atom in w.static_facts or atom in s.facts

    def value(self, fluent: GroundFluent) -> int | None:
        w, s = self.w, self.s
        name = fluent[0]
        if name in ("xloc", "yloc"):
            i = 0 if name == "xloc" else 1
            obj = fluent[1]
            if obj == w.agent:
                return s.agent[i]
            if obj in w.key_cells:
                cell = s.key_cell(obj)
                if cell is None:
                    cell = s.agent if obj in s.inventory else None
                return None if cell is None else cell[i]
            return w.static_fluents.get(fluent)
        if name in w.counter_names:
            for k, v in s.counters:
                if k == fluent:
                    return v
            return None
        if name not in w.fluent_names:
            raise UnknownFluent(name)
        return w.static_fluents.get(fluent)

    def objects_of(self, type_name: str) -> list[str]:
        return self.w.objects_of(type_name)


class GridWorld:
    """Transition system and planning cache for one compiled problem."""

    def __init__(self, problem: ProblemInstance, action_cost: float = 1.0):
        if problem.grid is None:
            raise ValueError("problem has no grid layer")
        if action_cost <= 0:
            raise ValueError("action cost must be positive")
        self.problem = problem
        self.domain = problem.domain
        self.cost = float(action_cost)
        self.grid = problem.grid
        agents = problem.objects_of("agent")
        if len(agents) != 1:
            raise ValueError(f"expected exactly one agent, found {agents}")
        self.agent = agents[0]
        fl = problem.initial_fluents

        def loc(obj: str) -> Cell:
            return fl[("xloc", obj)], fl[("yloc", obj)]

        self.trophy_cells = {t: loc(t) for t in problem.objects_of("trophy")}
        self.key_cells = {k: loc(k) for k in problem.objects_of("key")}
        self.door_cells = {d: loc(d) for d in problem.objects_of("door")}
        self.locks_at: dict[Cell, tuple[str, ...]] = {}
        for d, cell in sorted(self.door_cells.items()):
            self.locks_at[cell] = self.locks_at.get(cell, ()) + (d,)

        dyn_preds, dyn_fluents = set(), set()
        for schema in self.domain.actions:
            adds, deletes, assigns = effect_literals(schema.effect, _Identity())
            dyn_preds |= {a[0] for a in adds + deletes}
            dyn_fluents |= {t[0] for t, _ in assigns}
        special = {"has", "locked", "onmap", "taken"}
        self.fluent_names = {f.name for f in self.domain.fluents}
        self.counter_names = dyn_fluents - {"xloc", "yloc"}
        self.static_facts = frozenset(a for a in problem.initial_facts if a[0] not in dyn_preds)
        self.static_fluents = {k: v for k, v in fl.items() if k[0] not in self.counter_names}
        self._initial = WorldState(
            agent=loc(self.agent),
            inventory=frozenset(a[2] for a in problem.initial_facts if a[0] == "has"),
            locked=frozenset(a[1] for a in problem.initial_facts if a[0] == "locked"),
            keys_on_map=frozenset((k, self.key_cells[k]) for k in self.key_cells
                                  if ("onmap", k) in problem.initial_facts),
            facts=frozenset(a for a in problem.initial_facts if a[0] in dyn_preds - special),
            counters=tuple(sorted((k, v) for k, v in fl.items() if k[0] in self.counter_names)),
        )

        self.pickups: dict[str, list] = {}
        self.unlocks: dict[tuple[str, str], list] = {}
        self.takes: dict[str, list] = {}
        for name, table, index in (("pickup", self.pickups, lambda a: a[1]),
                                   ("unlock", self.unlocks, lambda a: (a[2], a[1])),
                                   ("take", self.takes, lambda a: a[1])):
            schema = self.domain.action(name)
            if schema is None:
                continue
            for inst in ground_schema(schema, problem):
                if inst.args[0] == self.agent:
                    table.setdefault(index(inst.args), []).append(inst)

        self.goal_trophy = {formula: t for t, formula in problem.goals.items()}
        self.required_locks = {t: frozenset(a[1] for a in problem.initial_facts
                                            if a[0] == "guards" and a[2] == t)
                               for t in self.trophy_cells}
        self.no_surplus_keys = NO_SURPLUS_KEYS in problem.rules
        self._types: dict[str, list[str]] = {}
        self._compat: dict[tuple[str, str], bool] = {}
        self._memo: dict = {}
        self._lock = threading.Lock()

    # -- state helpers ------------------------------------------------------

    def initial_state(self) -> WorldState:
        return self._initial

    def objects_of(self, type_name: str) -> list[str]:
        objs = self._types.get(type_name)
        if objs is None:
            objs = self._types[type_name] = self.problem.objects_of(type_name)
        return objs

    def view(self, state: WorldState) -> _View:
        return _View(self, state)

    def holds(self, state: WorldState, formula) -> bool:
        return eval_formula(_View(self, state), formula)

    def to_pddl_state(self, state: WorldState) -> State:
        """The full PDDL state equivalent to ``state`` (used to cross-check effects)."""
        facts = set(self.static_facts) | set(state.facts)
        facts |= {("has", self.agent, k) for k in state.inventory}
        facts |= {("locked", d) for d in state.locked}
        facts |= {("onmap", k) for k, _ in state.keys_on_map}
        if state.trophy_taken:
            facts.add(("taken", self.agent, state.trophy_taken))
        view = _View(self, state)
        fluents = dict(self.static_fluents)
        for obj in (self.agent, *self.key_cells):
            for name in ("xloc", "yloc"):
                v = view.value((name, obj))
                if v is None:
                    fluents.pop((name, obj), None)
                else:
                    fluents[(name, obj)] = v
        fluents.update(dict(state.counters))
        return State.build(facts, fluents, self.problem.objects, self.domain.types, self.fluent_names)

    def passable(self, cell: Cell, state: WorldState) -> bool:
        if not self.grid.inside(cell) or cell in self.grid.walls:
            return False
        return not any(d in state.locked for d in self.locks_at.get(cell, ()))

    def is_goal(self, state: WorldState, goal) -> bool:
        trophy = self.goal_trophy.get(goal)
        if trophy is not None:
            return state.agent == self.trophy_cells[trophy]
        return eval_formula(_View(self, state), goal)

    def heuristic(self, state: WorldState, goal) -> float:
        trophy = self.goal_trophy.get(goal)
        if trophy is None:
            return 0.0
        tx, ty = self.trophy_cells[trophy]
        return self.cost * (abs(state.agent[0] - tx) + abs(state.agent[1] - ty))

    # -- key bookkeeping under the no-surplus rule ----------------------------

    def compatible(self, key: str, lock: str) -> bool:
        """Whether the unlock schema lets ``key`` open ``lock`` (ignoring position and inventory)."""
        pair = (key, lock)
        hit = self._compat.get(pair)
        if hit is None:
            insts = self.unlocks.get((lock, key), [])
            dx, dy = self.door_cells[lock]
            probe = WorldState(agent=(dx, dy + 1), inventory=frozenset({key}), locked=frozenset({lock}),
                               keys_on_map=frozenset(), facts=self._initial.facts,
                               counters=self._initial.counters)
            hit = any(eval_formula(_View(self, probe), i.precondition) for i in insts)
            self._compat[pair] = hit
        return hit

    def _assignable(self, keys, locks) -> bool:
        """Every key in ``keys`` can be used on a distinct lock in ``locks``."""
        keys = sorted(keys)
        if len(keys) > len(locks):
            return False
        locks = sorted(locks)

        def match(i: int, used: frozenset) -> bool:
            if i == len(keys):
                return True
            return any(lock not in used and self.compatible(keys[i], lock) and match(i + 1, used | {lock})
                       for lock in locks)

        return match(0, frozenset())

    def keys_could_open(self, trophy: str) -> bool:
        """Whether the keys on the initial map could open every lock guarding ``trophy``."""
        locks = sorted(self.required_locks.get(trophy, ()))
        keys = sorted(self.key_cells)

        def match(i: int, used: frozenset) -> bool:
            if i == len(locks):
                return True
            return any(k not in used and self.compatible(k, locks[i]) and match(i + 1, used | {k})
                       for k in keys)

        return match(0, frozenset())

    def _pruned(self, goal) -> str | None:
        if not self.no_surplus_keys or goal is None:
            return None
        return self.goal_trophy.get(goal)

    # -- transitions --------------------------------------------------------------

    def apply(self, state: WorldState, inst) -> WorldState:
        """Apply a ground PDDL action's effect to ``state``."""
        view = _View(self, state)
        adds, deletes, assigns = effect_literals(inst.effect)
        values = [(t, eval_expr(view, e)) for t, e in assigns]
        inventory, locked = set(state.inventory), set(state.locked)
        on_map = dict(state.keys_on_map)
        taken, facts, counters = state.trophy_taken, set(state.facts), dict(state.counters)
        agent = list(state.agent)
        for a in deletes:
            p = a[0]
            if p == "has":
                inventory.discard(a[2])
            elif p == "locked":
                locked.discard(a[1])
            elif p == "onmap":
                on_map.pop(a[1], None)
            elif p == "taken":
                taken = None if taken == a[2] else taken
            else:
                facts.discard(a)
        for a in adds:
            p = a[0]
            if p == "has":
                inventory.add(a[2])
            elif p == "locked":
                locked.add(a[1])
            elif p == "onmap":
                on_map[a[1]] = tuple(agent)
            elif p == "taken":
                taken = a[2]
            else:
                facts.add(a)
        for target, v in values:
            if target[0] in ("xloc", "yloc"):
                if target[1] != self.agent:
                    raise ValueError(f"effects may only move the agent, not '{target[1]}'")
                agent[0 if target[0] == "xloc" else 1] = v
            else:
                counters[target] = v
        return WorldState(tuple(agent), frozenset(inventory), frozenset(locked),
                          frozenset(on_map.items()), taken, frozenset(facts),
                          tuple(sorted(counters.items())))

    def successors(self, state: WorldState, goal=None) -> list[tuple[GroundAction, WorldState]]:
        """Applicable actions and their results, in lexicographic action order.

        With a trophy ``goal`` and the no-surplus-keys rule active, key
        pickups and unlocks that would leave the agent holding a key it
        cannot spend on the goal's own locks are left out.
        """
        if state.trophy_taken is not None:
            return []
        out: list[tuple[GroundAction, WorldState]] = []
        x, y = state.agent
        for d, (dx, dy) in DIRECTIONS.items():
            cell = (x + dx, y + dy)
            if self.passable(cell, state):
                out.append((GroundAction("move", (d,), self.cost),
                            WorldState(cell, state.inventory, state.locked, state.keys_on_map,
                                       state.trophy_taken, state.facts, state.counters)))
        trophy = self._pruned(goal)
        remaining = self.required_locks.get(trophy, frozenset()) & state.locked if trophy else None
        view = _View(self, state)
        for key, cell in sorted(state.keys_on_map):
            if cell != state.agent:
                continue
            if trophy and not self._assignable(state.inventory | {key}, remaining):
                continue
            for inst in self.pickups.get(key, ()):
                if eval_formula(view, inst.precondition):
                    out.append((GroundAction("pickup", (key,), self.cost), self.apply(state, inst)))
        for dx, dy in DIRECTIONS.values():
            for lock in self.locks_at.get((x + dx, y + dy), ()):
                if lock not in state.locked:
                    continue
                if trophy and lock not in remaining:
                    continue
                for key in sorted(state.inventory):
                    if trophy and not self._assignable(state.inventory - {key}, remaining - {lock}):
                        continue
                    for inst in self.unlocks.get((lock, key), ()):
                        if eval_formula(view, inst.precondition):
                            out.append((GroundAction("unlock", (lock, key), self.cost), self.apply(state, inst)))
        for t, cell in self.trophy_cells.items():
            if cell != state.agent:
                continue
            for inst in self.takes.get(t, ()):
                if eval_formula(view, inst.precondition):
                    out.append((GroundAction("take", (t,), self.cost), self.apply(state, inst)))
        out.sort(key=lambda pair: (pair[0].kind, pair[0].args))
        return out

    def result(self, state: WorldState, action: GroundAction, goal=None) -> WorldState:
        for a, nxt in self.successors(state, goal):
            if a == action:
                return nxt
        raise InapplicableAction(f"'{action}' is not applicable at {state.agent}")

    # -- search -----------------------------------------------------------------

    def plan(self, start: WorldState, goal) -> PlanResult:
        """A* from ``start`` to a state satisfying ``goal``; results are memoised per goal."""
        memo = self._memo.setdefault(goal, {})
        hit = memo.get(start)
        if hit is not None:
            return hit
        if self.is_goal(start, goal):
            self._store(memo, {start: PlanResult(True, 0.0)})
            return memo[start]

        tie = itertools.count()
        frontier = [(self.heuristic(start, goal), 0.0, next(tie), start, None)]
        best = {start: 0.0}
        parent: dict[WorldState, tuple[WorldState, GroundAction] | None] = {start: None}
        closed: set[WorldState] = set()
        while frontier:
            _, g, _, state, tail = heapq.heappop(frontier)
            if g > best.get(state, math.inf) or state in closed:
                continue
            if tail is not None:
                return self._finish(memo, state, parent, best, tail)
            if self.is_goal(state, goal):
                return self._finish(memo, state, parent, best, PlanResult(True, 0.0))
            closed.add(state)
            for action, nxt in self.successors(state, goal):
                if nxt in closed:
                    continue
                known = memo.get(nxt)
                if known is not None and not known.reached:
                    continue
                ng = g + action.cost
                if ng < best.get(nxt, math.inf):
                    best[nxt] = ng
                    parent[nxt] = (state, action)
                    if known is not None:
                        heapq.heappush(frontier, (ng + known.cost, ng, next(tie), nxt, known))
                    else:
                        heapq.heappush(frontier, (ng + self.heuristic(nxt, goal), ng, next(tie), nxt, None))
        self._store(memo, dict.fromkeys(closed | {start}, UNREACHABLE))
        return UNREACHABLE

    def _finish(self, memo, end, parent, best, tail: PlanResult) -> PlanResult:
        states, actions = [end], []
        link = parent[end]
        while link is not None:
            prev, action = link
            states.append(prev)
            actions.append(action)
            link = parent[prev]
        states.reverse()
        actions.reverse()
        full = tuple(actions) + tail.actions
        total = best[end] + tail.cost
        entries = {s: PlanResult(True, total - best[s], full[i:]) for i, s in enumerate(states)}
        self._store(memo, entries)
        return entries[states[0]]

    def _store(self, memo: dict, entries: dict) -> None:
        with self._lock:
            for s, r in entries.items():
                memo.setdefault(s, r)


class _Identity(dict):
    """Binding that maps every variable to itself (for reading effect shapes)."""

    def __missing__(self, key):
        return key


def successors(state: WorldState, world: GridWorld, goal=None) -> list[tuple[GroundAction, WorldState]]:
    return world.successors(state, goal)


def optimal_cost(state: WorldState, goal, world: GridWorld) -> PlanResult:
    return world.plan(state, goal)


def q_value(state: WorldState, action: GroundAction, goal, world: GridWorld) -> float:
    """Negative cost of reaching ``goal`` by taking ``action`` first; ``-inf`` when impossible."""
    for a, nxt in world.successors(state, goal):
        if a == action:
            rest = world.plan(nxt, goal)
            return -(a.cost + rest.cost) if rest.reached else -math.inf
    if any(a == action for a, _ in world.successors(state)):
        return -math.inf  # applicable, but ruled out for this goal
    raise InapplicableAction(f"'{action}' is not applicable at {state.agent}")


def uniform_cost_search(state: WorldState, goal, world: GridWorld) -> PlanResult:
    """Dijkstra over the same transitions, without heuristic or memo (an independent check on A*)."""
    tie = itertools.count()
    frontier = [(0.0, next(tie), state)]
    best = {state: 0.0}
    parent: dict = {state: None}
    done: set = set()
    while frontier:
        g, _, s = heapq.heappop(frontier)
        if s in done:
            continue
        if world.is_goal(s, goal):
            actions = []
            while parent[s] is not None:
                s, a = parent[s]
                actions.append(a)
            return PlanResult(True, g, tuple(reversed(actions)))
        done.add(s)
        for a, nxt in world.successors(s, goal):
            ng = g + a.cost
            if ng < best.get(nxt, math.inf):
                best[nxt] = ng
                parent[nxt] = (s, a)
                heapq.heappush(frontier, (ng, next(tie), nxt))
    return UNREACHABLE


def replay(world: GridWorld, state: WorldState, actions, goal=None) -> WorldState:
    for a in actions:
        state = world.result(state, a, goal)
    return state


def format_plan(result: PlanResult) -> str:
    if not result.reached:
        return "UNREACHABLE"
    return "\n".join(str(a) for a in result.actions)
