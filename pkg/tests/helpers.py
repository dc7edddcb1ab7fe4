"""Shared builders for the test suite."""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

from invplan.infer import (
    GoalDistribution,
    InferenceConfig,
    goal_prior,
    lowlevel_condition_likelihood,
    subgoal_condition_likelihood,
    world_for,
)
from invplan.planner import GroundAction
from invplan.resources import domain_for_variant
from invplan.worldgen import MapSample, compile_to_problem, parse_scenario_ir

DATA = Path(__file__).parent / "data"


@lru_cache(maxsize=None)
def small_fixtures() -> dict:
    return json.loads((DATA / "small_fixtures.json").read_text(encoding="utf-8"))


def small_problem(name: str):
    """(ir, map, problem) for a pinned hand-placed fixture."""
    record = small_fixtures()[name]
    ir = parse_scenario_ir(record["scenario"])
    m = MapSample.from_json(record["map"])
    return ir, m, compile_to_problem(ir, m, domain_for_variant(ir.dynamics_variant))


def small_actions(name: str) -> tuple[GroundAction, ...]:
    return tuple(GroundAction.move(rest[0]) if kind == "move" else GroundAction(kind, tuple(rest))
                 for kind, *rest in small_fixtures()[name]["actions"])


def route_posteriors(problem, condition, config: InferenceConfig) -> tuple[GoalDistribution, GoalDistribution]:
    """Posterior under the macro-level and the low-level condition likelihoods."""
    world = world_for(problem, config)
    s0 = world.initial_state()
    prior = goal_prior(problem, config)
    macro = {t: prior[t] * subgoal_condition_likelihood(world, s0, condition, g, config)
             for t, g in problem.goals.items()}
    low = {t: prior[t] * lowlevel_condition_likelihood(world, s0, condition, g, config)
           for t, g in problem.goals.items()}
    return GoalDistribution.normalized(macro), GoalDistribution.normalized(low)


def open_problem(width: int, height: int, agent, trophies: dict, walls=(), penalize: bool = False):
    """A door-free, key-free problem on a hand-placed grid."""
    ir = parse_scenario_ir({
        "agent": ["Alice"], "goals": list(trophies), "obstacles": {}, "keys": [], "max_obstacle": 0,
        "keys_per_door": 1, "len_key": 0, "goal_count": len(trophies), "observation_type": "has_objects",
        "observation": "(and)", "dynamics_variant": "generic", "penalize_extra_keys": penalize})
    m = MapSample.from_json({"width": width, "height": height, "agent_start": list(agent),
                             "trophies": {t: list(c) for t, c in trophies.items()},
                             "walls": [list(c) for c in walls]})
    return compile_to_problem(ir, m, domain_for_variant("generic"))


def with_domain(name: str, variant: str):
    """A pinned fixture compiled against another variant's reference domain."""
    record = small_fixtures()[name]
    ir = parse_scenario_ir(record["scenario"])
    return compile_to_problem(ir, MapSample.from_json(record["map"]), domain_for_variant(variant))
