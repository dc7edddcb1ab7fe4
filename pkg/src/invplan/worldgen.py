"""Scenario records, the restricted map generator, and compilation to PDDL problems.

A :class:`ScenarioIr` is the structured record a translation step produces
from stimulus text. :func:`sample_map` draws concrete grid layouts that
satisfy it by rejection sampling, and :func:`compile_to_problem` turns an
accepted layout into a :class:`~invplan.pddl.ProblemInstance`.

Coordinates are ``(x, y)`` with x growing East and y growing South.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Mapping

import jsonschema
import numpy as np

from .pddl import (
    And,
    DomainAst,
    FluentRef,
    GridSpec,
    NumericComparison,
    PddlSyntaxError,
    ProblemInstance,
    SemanticError,
    parse_formula,
)
from .resources import VARIANTS, base_domain, domain_for_variant, read_text

Cell = tuple[int, int]

DIRECTIONS: dict[str, Cell] = {"N": (0, -1), "S": (0, 1), "E": (1, 0), "W": (-1, 0)}
COLOR_CODES = {"r": "red", "y": "yellow", "g": "green", "b": "blue",
               "o": "orange", "p": "purple", "w": "white", "k": "black"}
ANY_COLOR = "*"
NO_SURPLUS_KEYS = "no-surplus-keys"

GRID_SIZE = (10, 10)
KEY_DISTANCES = (2, 4)
MAX_ATTEMPTS = 1000


class SchemaError(ValueError):
    """A record field is missing or has the wrong type."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ConsistencyError(ValueError):
    pass


class SamplingExhausted(RuntimeError):
    pass


class CompileError(ValueError):
    pass


# -- scenario record --------------------------------------------------------


@dataclass(frozen=True)
class SpatialConstraint:
    target: str
    anchor: str
    direction: str
    steps: int


@dataclass(frozen=True)
class DirectionWalk:
    direction: str
    steps: int


@dataclass(frozen=True)
class ScenarioIr:
    agents: tuple[str, ...]
    goals: tuple[str, ...]
    locations: dict[str, str]
    obstacles: dict[str, tuple[str, ...]]
    keys: tuple[str, ...]
    max_obstacle: int
    keys_per_door: int
    len_key: int
    goal_count: int
    observation_type: str
    observation: str | tuple[DirectionWalk, ...]
    spatial_constraints: tuple[SpatialConstraint, ...] = ()
    dynamics_variant: str = "generic"
    penalize_extra_keys: bool = False

    @property
    def agent(self) -> str:
        return self.agents[0].lower()

    def rooms(self) -> list[str]:
        """Room labels in first-mention order (obstacles first, then locations)."""
        seen = dict.fromkeys(self.obstacles)
        for goal in self.goals:
            room = self.locations.get(goal)
            if room is not None:
                seen.setdefault(room)
        return list(seen)

    def trophies_in(self, room: str) -> list[str]:
        return [g for g in self.goals if self.locations.get(g) == room]

    def locks_for(self, trophy: str) -> tuple[str, ...]:
        room = self.locations.get(trophy)
        return self.obstacles.get(room, ()) if room is not None else ()

    def to_json(self) -> dict[str, Any]:
        if self.observation_type == "action_sequence":
            obs: Any = [{"direction": w.direction, "steps": w.steps} for w in self.observation]
        else:
            obs = self.observation
        record = {
            "agent": list(self.agents),
            "goals": list(self.goals),
            "locations": dict(self.locations),
            "obstacles": {r: list(c) for r, c in self.obstacles.items()},
            "keys": list(self.keys),
            "max_obstacle": self.max_obstacle,
            "keys_per_door": self.keys_per_door,
            "len_key": self.len_key,
            "goal_count": self.goal_count,
            "observation_type": self.observation_type,
            "observation": obs,
            "dynamics_variant": self.dynamics_variant,
            "penalize_extra_keys": self.penalize_extra_keys,
        }
        if self.spatial_constraints:
            record["spatial_constraints"] = [
                {"target": c.target, "anchor": c.anchor, "direction": c.direction, "steps": c.steps}
                for c in self.spatial_constraints]
        return record


def normalize_color(token: str) -> str:
    """Map ``"R"``/``"r"``/``"red"`` to ``"red"``; ``"*"`` stays as the colourless marker."""
    t = token.strip().lower()
    if t == ANY_COLOR:
        return ANY_COLOR
    if t in COLOR_CODES:
        return COLOR_CODES[t]
    if t in COLOR_CODES.values():
        return t
    raise ConsistencyError(f"unknown colour '{token}'")


_SCHEMA = None


def _schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = json.loads(read_text("scenario_ir.schema.json"))
    return _SCHEMA


def _schema_error(err: jsonschema.ValidationError) -> SchemaError:
    if err.validator == "required":
        missing = err.message.split("'")[1]
        return SchemaError(f"missing field '{missing}'", missing)
    if err.validator == "additionalProperties" and not err.path:
        return SchemaError(err.message, None)
    name = str(err.path[0]) if err.path else None
    return SchemaError(f"field '{name}': {err.message}", name)


def parse_scenario_ir(text: str | Mapping[str, Any]) -> ScenarioIr:
    """Parse and check a scenario record (JSON text or an already decoded mapping)."""
    if isinstance(text, str):
        try:
            record = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not a JSON record: {exc}") from None
    else:
        record = dict(text)
    if not isinstance(record, dict):
        raise SchemaError("record must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(_schema()).iter_errors(record),
                    key=lambda e: (list(e.path), e.validator))
    if errors:
        raise _schema_error(errors[0])

    goals = tuple(g.lower() for g in record["goals"])
    obstacles = {room: tuple(normalize_color(c) for c in colors)
                 for room, colors in record["obstacles"].items()}
    keys = tuple(normalize_color(c) for c in record["keys"])
    locations = {t.lower(): room for t, room in record.get("locations", {}).items()}
    constraints = tuple(SpatialConstraint(c["target"].lower(), c["anchor"].lower(), c["direction"], c["steps"])
                        for c in record.get("spatial_constraints", []))
    colored = any(c != ANY_COLOR for c in itertools.chain(keys, *obstacles.values()))
    variant = record.get("dynamics_variant")
    if variant is None:
        variant = "spatial" if constraints else ("color_same" if colored else "generic")

    obs_type = record["observation_type"]
    raw_obs = record["observation"]
    if obs_type == "has_objects":
        if not isinstance(raw_obs, str):
            raise ConsistencyError("observation_type 'has_objects' needs a formula string")
        observation: Any = raw_obs
    else:
        if not isinstance(raw_obs, list):
            raise ConsistencyError("observation_type 'action_sequence' needs a list of walks")
        observation = tuple(DirectionWalk(w["direction"], w["steps"]) for w in raw_obs)

    ir = ScenarioIr(
        agents=tuple(record["agent"]),
        goals=goals,
        locations=locations,
        obstacles=obstacles,
        keys=keys,
        max_obstacle=record["max_obstacle"],
        keys_per_door=record["keys_per_door"],
        len_key=record["len_key"],
        goal_count=record["goal_count"],
        observation_type=obs_type,
        observation=observation,
        spatial_constraints=constraints,
        dynamics_variant=variant,
        penalize_extra_keys=bool(record.get("penalize_extra_keys", False)),
    )
    check_consistency(ir)
    return ir


def check_consistency(ir: ScenarioIr) -> None:
    if ir.goal_count != len(ir.goals):
        raise ConsistencyError(f"goal_count is {ir.goal_count} but {len(ir.goals)} goals are listed")
    if len(set(ir.goals)) != len(ir.goals):
        raise ConsistencyError("duplicate goal labels")
    if ir.len_key != len(ir.keys):
        raise ConsistencyError(f"len_key is {ir.len_key} but {len(ir.keys)} keys are listed")
    if ir.dynamics_variant not in VARIANTS:
        raise ConsistencyError(f"unknown dynamics variant '{ir.dynamics_variant}'")
    unknown = set(ir.locations) - set(ir.goals)
    if unknown:
        raise ConsistencyError(f"locations mention unknown trophy '{sorted(unknown)[0]}'")
    if ir.keys and ir.keys_per_door != 1:
        raise ConsistencyError("only one key per lock is supported (keys_per_door must be 1)")
    colors = list(itertools.chain(ir.keys, *ir.obstacles.values()))
    if ir.dynamics_variant == "generic":
        if any(c != ANY_COLOR for c in colors):
            raise ConsistencyError("generic scenarios cannot name lock or key colours")
    elif ir.dynamics_variant in ("color_same", "color_different"):
        if any(c == ANY_COLOR for c in colors):
            raise ConsistencyError(f"{ir.dynamics_variant} scenarios need a colour on every lock and key")
    if ir.dynamics_variant == "spatial":
        if ir.obstacles or ir.keys:
            raise ConsistencyError("spatial scenarios have no doors or keys")
        _resolve_offsets(ir)
    elif ir.spatial_constraints:
        raise ConsistencyError("spatial constraints are only allowed in the spatial variant")
    if ir.observation_type == "has_objects":
        try:
            parse_formula(ir.observation, base_domain())
        except (PddlSyntaxError, SemanticError) as exc:
            raise ConsistencyError(f"observation formula: {exc}") from None
    elif ir.observation_type == "action_sequence":
        if not all(isinstance(w, DirectionWalk) for w in ir.observation):
            raise ConsistencyError("action_sequence observation must be a list of walks")


def _resolve_offsets(ir: ScenarioIr) -> dict[str, Cell]:
    """Offsets of every goal relative to the agent, from the anchored constraint graph."""
    agent = ir.agent
    offsets: dict[str, Cell] = {agent: (0, 0)}
    pending = list(ir.spatial_constraints)
    for c in pending:
        if c.steps < 1:
            raise ConsistencyError(f"constraint on '{c.target}' must have at least one step")
        if c.target == agent:
            raise ConsistencyError("the agent cannot be the target of a spatial constraint")
        if c.anchor != agent and c.anchor not in ir.goals:
            raise ConsistencyError(f"unknown anchor '{c.anchor}'")
        if c.target not in ir.goals:
            raise ConsistencyError(f"unknown constraint target '{c.target}'")
    while pending:
        progressed = False
        for c in list(pending):
            if c.anchor not in offsets:
                continue
            dx, dy = DIRECTIONS[c.direction]
            ax, ay = offsets[c.anchor]
            pos = (ax + dx * c.steps, ay + dy * c.steps)
            if c.target in offsets and offsets[c.target] != pos:
                raise ConsistencyError(f"conflicting constraints on '{c.target}'")
            offsets[c.target] = pos
            pending.remove(c)
            progressed = True
        if not progressed:
            raise ConsistencyError("spatial constraints are cyclic or not anchored at the agent")
    missing = [g for g in ir.goals if g not in offsets]
    if missing:
        raise ConsistencyError(f"no spatial constraint places '{missing[0]}'")
    return offsets


# -- maps -------------------------------------------------------------------


@dataclass(frozen=True)
class Door:
    cell: Cell
    locks: tuple[str, ...]
    room: str
    locked: bool = True


@dataclass(frozen=True)
class MapSample:
    width: int
    height: int
    agent_start: Cell
    trophy_cells: dict[str, Cell]
    door_cells: dict[str, Door]
    key_cells: dict[str, tuple[Cell, str]]
    room_membership: dict[Cell, str]
    walls: frozenset[Cell] = field(default_factory=frozenset)

    def to_json(self) -> dict[str, Any]:
        return {
            "width": self.width,
            "height": self.height,
            "agent_start": list(self.agent_start),
            "trophies": {t: list(c) for t, c in sorted(self.trophy_cells.items())},
            "doors": {d: {"cell": list(door.cell), "locks": list(door.locks), "room": door.room,
                          "locked": door.locked} for d, door in sorted(self.door_cells.items())},
            "keys": {k: {"cell": list(c), "color": color} for k, (c, color) in sorted(self.key_cells.items())},
            "rooms": sorted([x, y, room] for (x, y), room in self.room_membership.items()),
            "walls": sorted(list(c) for c in self.walls),
        }

    @classmethod
    def from_json(cls, record: Mapping[str, Any]) -> "MapSample":
        """Rebuild a map written by :meth:`to_json`."""
        doors = {d: Door(tuple(v["cell"]), tuple(v["locks"]), v["room"], v.get("locked", True))
                 for d, v in record.get("doors", {}).items()}
        trophies = {t: tuple(c) for t, c in record["trophies"].items()}
        return cls(
            width=record["width"],
            height=record["height"],
            agent_start=tuple(record["agent_start"]),
            trophy_cells=trophies,
            door_cells=doors,
            key_cells={k: (tuple(v["cell"]), v["color"]) for k, v in record.get("keys", {}).items()},
            room_membership={(x, y): room for x, y, room in record.get("rooms", [])},
            walls=frozenset(tuple(c) for c in record.get("walls", [])),
        )

    def render(self) -> str:
        """ASCII picture: ``A`` agent, trophy initials, ``D`` door, ``k`` key, ``#`` wall."""
        grid = [["." for _ in range(self.width)] for _ in range(self.height)]
        for x, y in self.walls:
            grid[y][x] = "#"
        for door in self.door_cells.values():
            grid[door.cell[1]][door.cell[0]] = "D"
        for cell, _ in self.key_cells.values():
            grid[cell[1]][cell[0]] = "k"
        for name, (x, y) in self.trophy_cells.items():
            grid[y][x] = name[0].upper()
        ax, ay = self.agent_start
        grid[ay][ax] = "A"
        return "\n".join("".join(row) for row in grid)


def _neighbors(cell: Cell):
    x, y = cell
    return ((x, y - 1), (x, y + 1), (x + 1, y), (x - 1, y))


def _reachable(m: MapSample, open_doors: set[str] = frozenset()) -> set[Cell]:
    """Cells reachable from the agent when only ``open_doors`` are passable."""
    blocked = set(m.walls) | {d.cell for name, d in m.door_cells.items() if name not in open_doors}
    seen = {m.agent_start}
    queue = deque([m.agent_start])
    while queue:
        cell = queue.popleft()
        for n in _neighbors(cell):
            if n not in seen and 0 <= n[0] < m.width and 0 <= n[1] < m.height and n not in blocked:
                seen.add(n)
                queue.append(n)
    return seen


def _sample_spatial(ir: ScenarioIr, rng: np.random.Generator) -> MapSample:
    offsets = _resolve_offsets(ir)
    xs = [o[0] for o in offsets.values()]
    ys = [o[1] for o in offsets.values()]
    width = max(GRID_SIZE[0], max(xs) - min(xs) + 3)
    height = max(GRID_SIZE[1], max(ys) - min(ys) + 3)
    # one free cell of margin keeps every constrained cell fully connected
    x0 = int(rng.integers(1 - min(xs), width - 1 - max(xs)))
    y0 = int(rng.integers(1 - min(ys), height - 1 - max(ys)))
    trophies = {g: (x0 + offsets[g][0], y0 + offsets[g][1]) for g in ir.goals}
    return MapSample(width, height, (x0, y0), trophies, {}, {}, {})


def _floor_cells_at_distance(agent: Cell, width: int, height: int, first_floor_row: int) -> list[Cell]:
    lo, hi = KEY_DISTANCES
    return [(x, y) for x in range(width) for y in range(first_floor_row, height)
            if lo <= abs(x - agent[0]) + abs(y - agent[1]) <= hi]


def _sample_keys_layout(ir: ScenarioIr, rng: np.random.Generator) -> MapSample | None:
    width, height = GRID_SIZE
    agent = (width // 2, 5)
    rooms = [r for r in ir.rooms() if ir.obstacles.get(r)]
    widths = [max(1, len(ir.trophies_in(r))) for r in rooms]
    slack = width - sum(widths) - max(0, len(rooms) - 1)
    if slack < 0:
        return None
    order = list(rng.permutation(len(rooms))) if rooms else []
    gaps = rng.multinomial(slack, [1.0 / (len(rooms) + 1)] * (len(rooms) + 1)) if rooms else [slack]

    walls: set[Cell] = {(x, y) for x in range(width) for y in (0, 1)}
    trophies: dict[str, Cell] = {}
    doors: dict[str, Door] = {}
    membership: dict[Cell, str] = {}
    x = int(gaps[0])
    for slot, idx in enumerate(order):
        room, w = rooms[idx], widths[idx]
        span = [(x + i, 0) for i in range(w)]
        for cell in span:
            walls.discard(cell)
            membership[cell] = room
        for trophy, cell in zip(ir.trophies_in(room), span):
            trophies[trophy] = cell
        door_cell = (x + int(rng.integers(w)), 1)
        walls.discard(door_cell)
        locks = ir.obstacles[room][: max(ir.max_obstacle, 0)]
        doors[f"door-{_slug(room)}"] = Door(door_cell, tuple(locks), room)
        x += w + 1 + int(gaps[slot + 1])

    candidates = _floor_cells_at_distance(agent, width, height, 2)
    taken = {agent}
    floor_trophies = [g for g in ir.goals if g not in trophies]
    key_colors = list(ir.keys)
    if ir.dynamics_variant != "generic":
        mentioned = dict.fromkeys(c for r in rooms for c in ir.obstacles[r])
        key_colors += [c for c in mentioned if c not in key_colors]
    needed = len(floor_trophies) + len(key_colors)
    free = [c for c in candidates if c not in taken]
    if needed > len(free):
        return None
    picks = rng.choice(len(free), size=needed, replace=False)
    cells = [free[int(i)] for i in picks]
    for trophy, cell in zip(floor_trophies, cells):
        trophies[trophy] = cell
        room = ir.locations.get(trophy)
        if room is not None:
            membership[cell] = room
    keys = {f"key{i + 1}": (cell, color)
            for i, (cell, color) in enumerate(zip(cells[len(floor_trophies):], key_colors))}
    return MapSample(width, height, agent, trophies, doors, keys, membership, frozenset(walls))


def _slug(room: str) -> str:
    label = room.lower().replace("room", "").strip() or room.lower()
    return "-".join(label.split())


def sample_map(ir: ScenarioIr, seed: int, domain: DomainAst | None = None,
               max_attempts: int = MAX_ATTEMPTS) -> MapSample:
    """Draw a layout satisfying every condition in ``ir`` (deterministic per seed).

    Candidate layouts come from a restricted generator and are kept only if
    :func:`validate_map` reports no violation; reachability of each goal is
    checked against ``domain`` (the reference domain of the IR's dynamics
    variant when omitted).
    """
    rng = np.random.default_rng(seed)
    domain = domain or domain_for_variant(ir.dynamics_variant)
    last: list[str] = []
    for _ in range(max_attempts):
        if ir.dynamics_variant == "spatial":
            candidate = _sample_spatial(ir, rng)
        else:
            candidate = _sample_keys_layout(ir, rng)
        if candidate is None:
            last = ["layout does not fit the grid"]
            continue
        last = validate_map(ir, candidate, domain)
        if not last:
            return candidate
    raise SamplingExhausted(f"no valid map after {max_attempts} attempts; last violations: {last}")


def validate_map(ir: ScenarioIr, m: MapSample, domain: DomainAst | None = None) -> list[str]:
    """Every condition of ``ir`` that ``m`` violates, as readable messages (empty when valid)."""
    out: list[str] = []
    inside = lambda c: 0 <= c[0] < m.width and 0 <= c[1] < m.height  # noqa: E731
    placed: list[tuple[str, Cell]] = [("agent", m.agent_start)]
    placed += [(f"trophy {t}", c) for t, c in m.trophy_cells.items()]
    placed += [(f"key {k}", c) for k, (c, _) in m.key_cells.items()]
    placed += [(f"door {d}", door.cell) for d, door in m.door_cells.items()]
    for label, cell in placed:
        if not inside(cell):
            out.append(f"{label} at {cell} is outside the {m.width}x{m.height} grid")
        if cell in m.walls:
            out.append(f"{label} at {cell} is inside a wall")
    for cell, labels in _group(placed).items():
        if len(labels) > 1:
            out.append(f"{' and '.join(labels)} share cell {cell}")

    missing_goals = [g for g in ir.goals if g not in m.trophy_cells]
    out += [f"trophy {g} is not placed" for g in missing_goals]

    for room, locks in ir.obstacles.items():
        if not locks:
            continue
        doors = [d for d in m.door_cells.values() if d.room == room]
        if not doors:
            out.append(f"{room} has no door")
        elif sorted(doors[0].locks) != sorted(locks):
            out.append(f"{room} door has locks {list(doors[0].locks)}, expected {list(locks)}")

    open_reach = _reachable(m)
    for trophy in ir.goals:
        cell = m.trophy_cells.get(trophy)
        if cell is None:
            continue
        locks = ir.locks_for(trophy)
        if not locks:
            if cell not in open_reach:
                out.append(f"trophy {trophy} is behind a door but should not be")
            continue
        room = ir.locations[trophy]
        if cell in open_reach:
            out.append(f"trophy {trophy} is reachable without passing the {room} door")
        room_doors = {d for d, door in m.door_cells.items() if door.room == room}
        if cell not in _reachable(m, room_doors):
            out.append(f"trophy {trophy} is not reachable through the {room} door")

    want = Counter(ir.keys)
    have = Counter(color for _, color in m.key_cells.values())
    for color, n in want.items():
        if have[color] < n:
            label = "colourless" if color == ANY_COLOR else color
            out.append(f"missing {n - have[color]} {label} key(s)")
    for k, (cell, _) in m.key_cells.items():
        if cell not in open_reach:
            out.append(f"key {k} cannot be reached without opening a door")

    if ir.spatial_constraints:
        positions = dict(m.trophy_cells)
        positions[ir.agent] = m.agent_start
        for c in ir.spatial_constraints:
            if c.target not in positions or c.anchor not in positions:
                continue
            dx, dy = DIRECTIONS[c.direction]
            ax, ay = positions[c.anchor]
            expected = (ax + dx * c.steps, ay + dy * c.steps)
            if positions[c.target] != expected:
                out.append(f"{c.target} should be {c.steps} {c.direction} of {c.anchor} at {expected}, "
                           f"found {positions[c.target]}")

    if not out:
        out += _reachability_violations(ir, m, domain or domain_for_variant(ir.dynamics_variant))
    return out


def _group(placed):
    groups: dict[Cell, list[str]] = {}
    for label, cell in placed:
        groups.setdefault(cell, []).append(label)
    return groups


def _reachability_violations(ir: ScenarioIr, m: MapSample, domain: DomainAst) -> list[str]:
    from .planner import GridWorld, optimal_cost  # planner builds on compiled problems

    problem = compile_to_problem(ir, m, domain)
    world = GridWorld(problem)
    start = world.initial_state()
    out = []
    for trophy, goal in problem.goals.items():
        if optimal_cost(start, goal, world).reached:
            continue
        if world.keys_could_open(trophy):
            out.append(f"trophy {trophy} is unreachable although its locks have usable keys")
    return out


# -- compilation ------------------------------------------------------------


def goal_formula(agent: str, trophy: str) -> And:
    """The agent stands on the trophy's cell."""
    return And((
        NumericComparison("=", FluentRef("xloc", (agent,)), FluentRef("xloc", (trophy,))),
        NumericComparison("=", FluentRef("yloc", (agent,)), FluentRef("yloc", (trophy,))),
    ))


def lock_objects(door_id: str, door: Door) -> list[tuple[str, str]]:
    """PDDL door objects for each lock on a physical door: ``[(object, colour), ...]``."""
    if len(door.locks) == 1:
        return [(door_id, door.locks[0])]
    return [(f"{door_id}-{i + 1}", color) for i, color in enumerate(door.locks)]


def compile_to_problem(ir: ScenarioIr, m: MapSample, domain: DomainAst) -> ProblemInstance:
    types = domain.types
    agent = ir.agent
    objects: dict[str, str] = {agent: "agent"}
    facts: set[tuple[str, ...]] = set()
    fluents: dict[tuple[str, ...], int] = {}

    def place(obj: str, cell: Cell) -> None:
        fluents[("xloc", obj)] = cell[0]
        fluents[("yloc", obj)] = cell[1]

    place(agent, m.agent_start)
    fluents[("picked", agent)] = 0
    for trophy in ir.goals:
        objects[trophy] = "trophy"
        place(trophy, m.trophy_cells[trophy])
    colors: set[str] = set()
    for key, (cell, color) in m.key_cells.items():
        objects[key] = "key"
        place(key, cell)
        facts.add(("onmap", key))
        if color != ANY_COLOR:
            colors.add(color)
            facts.add(("iscolor", key, color))
    for door_id, door in m.door_cells.items():
        guarded = [t for t in ir.goals if ir.locations.get(t) == door.room]
        for obj, color in lock_objects(door_id, door):
            objects[obj] = "door"
            place(obj, door.cell)
            if door.locked:
                facts.add(("locked", obj))
            if color != ANY_COLOR:
                colors.add(color)
                facts.add(("iscolor", obj, color))
            facts.update(("guards", obj, t) for t in guarded)
    for color in colors:
        objects[color] = "color"

    for obj, t in objects.items():
        if t not in types:
            raise CompileError(f"object '{obj}' needs type '{t}', which the domain does not declare")
    predicates = {p.name for p in domain.predicates}
    for atom in facts:
        if atom[0] not in predicates:
            raise CompileError(f"domain lacks predicate '{atom[0]}'")
    fluent_names = {f.name for f in domain.fluents}
    for key in fluents:
        if key[0] not in fluent_names:
            raise CompileError(f"domain lacks fluent '{key[0]}'")

    rules = frozenset({NO_SURPLUS_KEYS}) if ir.penalize_extra_keys else frozenset()
    return ProblemInstance(
        domain=domain,
        objects=objects,
        initial_facts=frozenset(facts),
        initial_fluents=fluents,
        goals={t: goal_formula(agent, t) for t in ir.goals},
        grid=GridSpec(m.width, m.height, m.walls),
        rules=rules,
    )
