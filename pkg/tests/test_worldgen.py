from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invplan.planner import GridWorld, optimal_cost
from invplan.resources import domain_for_variant
from invplan.worldgen import (
    ConsistencyError,
    Door,
    MapSample,
    SamplingExhausted,
    SchemaError,
    compile_to_problem,
    parse_scenario_ir,
    sample_map,
    validate_map,
)


def record(fixtures, sid: str) -> dict:
    return json.loads(fixtures.get(sid).scenario)


# -- parsing ----------------------------------------------------------------------


def test_appendix_world_config_record(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_different_03").scenario)
    assert ir.agents == ("Alice",) and ir.agent == "alice"
    assert ir.goals == ("gold", "silver", "bronze")
    assert ir.obstacles == {"Room A": ("green",), "Room B": ("yellow", "red"), "Room C": ("red",)}
    assert ir.keys == ("green", "yellow", "red")
    assert ir.max_obstacle == 2 and ir.len_key == 3 and ir.goal_count == 3
    assert ir.observation_type == "has_objects"
    assert ir.locks_for("silver") == ("yellow", "red")


def test_goal_count_mismatch(fixtures):
    rec = record(fixtures, "color_different_03")
    rec["goal_count"] = 2
    with pytest.raises(ConsistencyError):
        parse_scenario_ir(rec)


def test_missing_field_is_schema_error(fixtures):
    rec = record(fixtures, "generic_01")
    del rec["observation_type"]
    with pytest.raises(SchemaError) as info:
        parse_scenario_ir(rec)
    assert info.value.field == "observation_type"


def test_not_json():
    with pytest.raises(SchemaError):
        parse_scenario_ir("{not json")


def test_generic_rejects_colours(fixtures):
    rec = record(fixtures, "generic_01")
    rec["keys"] = ["r"] + rec["keys"][1:]
    with pytest.raises(ConsistencyError):
        parse_scenario_ir(rec)


def test_spatial_constraints_parse(fixtures):
    ir = parse_scenario_ir(fixtures.get("spatial_04").scenario)
    assert ir.dynamics_variant == "spatial"
    assert [(c.target, c.direction, c.steps) for c in ir.spatial_constraints] == [
        ("gold", "E", 2), ("silver", "S", 3), ("bronze", "S", 5)]
    assert [(w.direction, w.steps) for w in ir.observation] == [("S", 4)]


def test_conflicting_spatial_constraints(fixtures):
    rec = record(fixtures, "spatial_04")
    rec["spatial_constraints"].append({"target": "gold", "anchor": "alice", "direction": "W", "steps": 2})
    with pytest.raises(ConsistencyError):
        parse_scenario_ir(rec)


def test_ir_json_round_trip(fixtures, corpus):
    for s in corpus:
        ir = parse_scenario_ir(fixtures.get(s.fixture).scenario)
        assert parse_scenario_ir(ir.to_json()) == ir


# -- sampling ----------------------------------------------------------------------


def test_spatial_offsets_are_exact(fixtures):
    ir = parse_scenario_ir(fixtures.get("spatial_04").scenario)
    m = sample_map(ir, 3)
    ax, ay = m.agent_start
    assert m.trophy_cells == {"gold": (ax + 2, ay), "silver": (ax, ay + 3), "bronze": (ax, ay + 5)}


def test_sampling_is_deterministic_per_seed(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_same_01").scenario)
    assert sample_map(ir, 42) == sample_map(ir, 42)
    assert len({sample_map(ir, s).render() for s in range(6)}) > 1


def test_color_same_hundred_seeds_validate(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_same_02").scenario)
    domain = domain_for_variant(ir.dynamics_variant)
    for seed in range(100):
        assert validate_map(ir, sample_map(ir, seed, domain), domain) == []


def test_too_many_locks_for_obstacle_cap(fixtures):
    rec = record(fixtures, "generic_03")
    rec["obstacles"] = {"Room A": ["*", "*", "*", "*"]}
    rec["locations"] = {"gold": "Room A"}
    rec["max_obstacle"] = 2
    rec["keys"] = ["*"] * 4
    rec["len_key"] = 4
    ir = parse_scenario_ir(rec)
    with pytest.raises(SamplingExhausted):
        sample_map(ir, 0, max_attempts=50)


def _moved(m: MapSample, **changes) -> MapSample:
    fields = dict(m.__dict__)
    fields.update(changes)
    return MapSample(**fields)


def test_violation_trophy_outside_its_room(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_different_01").scenario)
    m = sample_map(ir, 0)
    trophies = dict(m.trophy_cells)
    free = next((x, y) for y in range(m.height - 1, -1, -1) for x in range(m.width)
                if (x, y) not in m.walls and (x, y) not in m.trophy_cells.values()
                and (x, y) not in [c for c, _ in m.key_cells.values()] and (x, y) != m.agent_start
                and (x, y) not in m.room_membership and (x, y) not in [d.cell for d in m.door_cells.values()])
    trophies["bronze"] = free
    violations = validate_map(ir, _moved(m, trophy_cells=trophies))
    assert any("bronze" in v for v in violations)


def test_violation_missing_key_colour(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_different_01").scenario)
    m = sample_map(ir, 0)
    keys = {k: v for k, v in m.key_cells.items() if v[1] != "red"}
    violations = validate_map(ir, _moved(m, key_cells=keys))
    assert any("red" in v for v in violations)


def test_violation_wrong_lock_count(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_different_03").scenario)
    m = sample_map(ir, 0)
    doors = {d: Door(door.cell, door.locks[:1], door.room) for d, door in m.door_cells.items()}
    assert any("Room B" in v for v in validate_map(ir, _moved(m, door_cells=doors)))


def test_map_json_round_trip(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_same_01").scenario)
    m = sample_map(ir, 5)
    assert MapSample.from_json(json.loads(json.dumps(m.to_json()))) == m


def test_render_marks_objects(fixtures):
    ir = parse_scenario_ir(fixtures.get("spatial_01").scenario)
    picture = sample_map(ir, 0).render().splitlines()
    joined = "".join(picture)
    assert joined.count("A") == 1 and {"G", "S", "B"} <= set(joined)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), sid=st.sampled_from(
    ["generic_01", "generic_03", "color_same_01", "color_same_04", "color_different_02", "spatial_05"]))
def test_sampled_maps_always_validate(fixtures, seed, sid):
    ir = parse_scenario_ir(fixtures.get(sid).scenario)
    domain = domain_for_variant(ir.dynamics_variant)
    assert validate_map(ir, sample_map(ir, seed, domain), domain) == []


# -- compilation -------------------------------------------------------------------


def test_compile_spatial_has_no_doors_or_keys(fixtures):
    ir = parse_scenario_ir(fixtures.get("spatial_02").scenario)
    problem = compile_to_problem(ir, sample_map(ir, 0), domain_for_variant("spatial"))
    assert problem.objects_of("door") == [] and problem.objects_of("key") == []
    assert set(problem.goals) == {"gold", "silver", "bronze"}


def test_compile_color_different_has_locks_and_colours(fixtures):
    ir = parse_scenario_ir(fixtures.get("color_different_03").scenario)
    domain = domain_for_variant("color_different")
    problem = compile_to_problem(ir, sample_map(ir, 0, domain), domain)
    doors = problem.objects_of("door")
    assert len(doors) == 4  # one lock object per lock
    assert all(("locked", d) in problem.initial_facts for d in doors)
    colours = {a[2] for a in problem.initial_facts if a[0] == "iscolor" and a[1] in doors}
    assert colours == {"green", "yellow", "red"}
    assert sorted(problem.objects_of("color")) == ["green", "red", "yellow"]


def test_compile_generic_keys_are_colourless(fixtures):
    ir = parse_scenario_ir(fixtures.get("generic_01").scenario)
    problem = compile_to_problem(ir, sample_map(ir, 0), domain_for_variant("generic"))
    assert len(problem.objects_of("key")) == 3
    assert not any(a[0] == "iscolor" for a in problem.initial_facts)
    assert problem.objects_of("color") == []


def test_each_trophy_has_one_goal(fixtures, corpus):
    for s in corpus:
        ir = parse_scenario_ir(fixtures.get(s.fixture).scenario)
        domain = domain_for_variant(ir.dynamics_variant)
        problem = compile_to_problem(ir, sample_map(ir, 0, domain), domain)
        assert list(problem.goals) == list(ir.goals)


def test_compiled_goals_reachable_when_keys_fit(fixtures):
    ir = parse_scenario_ir(fixtures.get("generic_02").scenario)
    domain = domain_for_variant("generic")
    problem = compile_to_problem(ir, sample_map(ir, 1, domain), domain)
    world = GridWorld(problem)
    assert all(optimal_cost(world.initial_state(), g, world).reached for g in problem.goals.values())
