from __future__ import annotations

import math

import pytest
from helpers import DATA, open_problem, route_posteriors, small_fixtures, small_problem
from hypothesis import given, settings
from hypothesis import strategies as st

from invplan.infer import (
    AllGoalsUnreachable,
    GoalDistribution,
    GoalUnreachableFromState,
    HorizonExceeded,
    InapplicableSequence,
    InferenceConfig,
    LowLevelActions,
    StateSpaceTooLarge,
    SubgoalCondition,
    ZeroEvidence,
    action_sequence_likelihood,
    brute_force_posterior,
    goal_prior,
    policy,
    posterior,
    softmax,
    subgoal_condition_likelihood,
    world_for,
)
from invplan.pddl import TRUE, parse_formula
from invplan.planner import GroundAction, optimal_cost, q_value, replay
from invplan.resources import domain_for_variant
from invplan.worldgen import MapSample, compile_to_problem, parse_scenario_ir, sample_map

MOVE = GroundAction.move


def _with_rule(name: str, penalize: bool = True):
    record = small_fixtures()[name]
    ir = parse_scenario_ir(dict(record["scenario"], penalize_extra_keys=penalize))
    return compile_to_problem(ir, MapSample.from_json(record["map"]), domain_for_variant(ir.dynamics_variant))


# -- configuration and distributions ---------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        InferenceConfig(beta=0)
    with pytest.raises(ValueError):
        InferenceConfig(epsilon_floor=1.0)
    with pytest.raises(ValueError):
        InferenceConfig(action_cost=-1)


def test_floor_must_stay_below_uniform():
    problem = open_problem(5, 1, (0, 0), {"gold": (2, 0), "silver": (4, 0)})
    with pytest.raises(ValueError):
        posterior(problem, LowLevelActions(), InferenceConfig(epsilon_floor=0.5))


def test_goal_distribution_must_sum_to_one():
    with pytest.raises(ValueError):
        GoalDistribution({"gold": 0.5, "silver": 0.4})
    d = GoalDistribution.normalized({"gold": 1.0, "silver": 3.0})
    assert d.argmax() == "silver" and d.total_variation(GoalDistribution({"gold": 0.25, "silver": 0.75})) == 0


# -- prior -------------------------------------------------------------------------------


def test_single_goal_prior():
    assert goal_prior(open_problem(4, 1, (0, 0), {"gold": (3, 0)})).mass == {"gold": 1.0}


def test_prior_costs_two_and_four():
    prior = goal_prior(open_problem(7, 1, (2, 0), {"gold": (4, 0), "silver": (6, 0)}))
    assert prior["gold"] == pytest.approx(2 / 3, abs=1e-15) and prior["silver"] == pytest.approx(1 / 3, abs=1e-15)


def test_unreachable_goal_gets_zero_and_equal_costs_split():
    problem = open_problem(5, 3, (2, 2), {"gold": (0, 0), "silver": (0, 2), "bronze": (4, 2)},
                           walls=[(1, 0), (0, 1), (1, 1)])
    assert goal_prior(problem).mass == {"gold": 0.0, "silver": 0.5, "bronze": 0.5}


def test_unreachable_trophy_on_colour_different_fixture():
    ir = parse_scenario_ir((DATA / "unreachable_scenario.json").read_text(encoding="utf-8"))
    domain = domain_for_variant(ir.dynamics_variant)
    problem = compile_to_problem(ir, sample_map(ir, 0, domain), domain)
    world = world_for(problem)
    costs = {t: optimal_cost(world.initial_state(), g, world).cost for t, g in problem.goals.items()}
    prior = goal_prior(problem)
    assert prior["gold"] == 0.0 and math.isinf(costs["gold"])
    total = 1 / costs["silver"] + 1 / costs["bronze"]
    assert prior["silver"] == pytest.approx((1 / costs["silver"]) / total, abs=1e-12)


def test_all_goals_unreachable():
    problem = open_problem(5, 1, (0, 0), {"gold": (4, 0)}, walls=[(2, 0)])
    with pytest.raises(AllGoalsUnreachable):
        goal_prior(problem)


def test_agent_already_on_a_goal():
    problem = open_problem(5, 1, (2, 0), {"gold": (2, 0), "silver": (4, 0)})
    assert goal_prior(problem).mass == {"gold": 1.0, "silver": 0.0}


# -- policy ----------------------------------------------------------------------------


def test_softmax_two_actions():
    p = softmax([-1.0, -3.0], 1.0)
    assert p[0] == pytest.approx(math.e ** 2 / (math.e ** 2 + 1), abs=1e-15)
    assert p[0] == pytest.approx(0.8808, abs=1e-4) and p[1] == pytest.approx(0.1192, abs=1e-4)
    assert softmax([-math.inf, -2.0], 3.0) == [0.0, 1.0]


def _corridor():
    return open_problem(7, 1, (3, 0), {"gold": (6, 0)})


def test_policy_corridor_examples():
    problem = _corridor()
    world = world_for(problem)
    s0 = world.initial_state()
    goal = problem.goals["gold"]
    tiny = policy(world, s0, goal, InferenceConfig(beta=1e-9))
    assert all(p == pytest.approx(0.5, abs=1e-8) for p in tiny.mass.values())
    assert policy(world, s0, goal, InferenceConfig(beta=1))[MOVE("E")] == pytest.approx(0.8808, abs=1e-4)
    assert policy(world, s0, goal, InferenceConfig(beta=10))[MOVE("E")] >= 0.9999
    assert math.fsum(policy(world, s0, goal, InferenceConfig()).mass.values()) == pytest.approx(1, abs=1e-12)


def test_policy_from_hopeless_state():
    problem = open_problem(5, 1, (0, 0), {"gold": (4, 0), "silver": (1, 0)}, walls=[(2, 0)])
    world = world_for(problem)
    with pytest.raises(GoalUnreachableFromState):
        policy(world, world.initial_state(), problem.goals["gold"], InferenceConfig())


# -- low-level likelihood -----------------------------------------------------------------


def test_sequence_likelihood_examples():
    problem = _corridor()
    world = world_for(problem)
    s0 = world.initial_state()
    goal = problem.goals["gold"]
    assert action_sequence_likelihood(world, s0, (), goal, InferenceConfig()) == 1.0
    assert action_sequence_likelihood(world, s0, (MOVE("E"),), goal, InferenceConfig(beta=1)) == \
        pytest.approx(1 / (1 + math.exp(-2)), abs=1e-15)


def test_inapplicable_sequence_reports_step():
    problem = _corridor()
    world = world_for(problem)
    with pytest.raises(InapplicableSequence) as info:
        action_sequence_likelihood(world, world.initial_state(), (MOVE("E"), MOVE("N")),
                                   problem.goals["gold"], InferenceConfig())
    assert info.value.step == 2


def test_spatial_walk_past_silver(prepared):
    stimulus = prepared["spatial_04"]
    world = world_for(stimulus.problem)
    s0 = world.initial_state()
    lik = {t: action_sequence_likelihood(world, s0, stimulus.observation.actions, g, InferenceConfig())
           for t, g in stimulus.problem.goals.items()}
    assert lik["bronze"] > lik["silver"] and lik["bronze"] > lik["gold"]


@settings(max_examples=30, deadline=None)
@given(picks=st.lists(st.integers(0, 20), min_size=2, max_size=6), cut=st.integers(1, 5),
       beta=st.sampled_from([0.5, 1.0, 2.0]))
def test_likelihood_factorizes(picks, cut, beta):
    problem = small_problem("generic_5x5_pickup")[2]
    world = world_for(problem)
    config = InferenceConfig(beta=beta, epsilon_floor=0.0)
    state, actions = world.initial_state(), []
    for p in picks:
        options = world.successors(state)
        action, state = options[p % len(options)]
        actions.append(action)
    cut = min(cut, len(actions) - 1)
    s0 = world.initial_state()
    middle = replay(world, s0, actions[:cut])
    for goal in problem.goals.values():
        whole = action_sequence_likelihood(world, s0, actions, goal, config)
        parts = (action_sequence_likelihood(world, s0, actions[:cut], goal, config)
                 * action_sequence_likelihood(world, middle, actions[cut:], goal, config))
        assert whole == pytest.approx(parts, rel=1e-12, abs=1e-300)


# -- subgoal conditions -------------------------------------------------------------------


def test_trivial_condition_is_certain():
    problem = small_problem("color_same_5x5")[2]
    world = world_for(problem)
    for goal in problem.goals.values():
        assert subgoal_condition_likelihood(world, world.initial_state(), TRUE, goal, InferenceConfig()) == 1.0


def test_yellow_key_is_irrelevant_for_the_red_room():
    problem = _with_rule("color_same_5x5")
    world = world_for(problem)
    yellow = parse_formula("(exists (?k - key) (and (has alice ?k) (iscolor ?k yellow)))", problem.domain)
    config = InferenceConfig()
    assert subgoal_condition_likelihood(world, world.initial_state(), yellow, problem.goals["bronze"], config) \
        <= config.epsilon_floor
    assert subgoal_condition_likelihood(world, world.initial_state(), yellow, problem.goals["gold"], config) \
        == pytest.approx(1.0)


def test_generic_key_pickup_rules_out_doorless_goal():
    problem = _with_rule("generic_5x5_offroute")
    world = world_for(problem)
    one_key = parse_formula("(= (picked alice) 1)", problem.domain)
    config = InferenceConfig()
    assert subgoal_condition_likelihood(world, world.initial_state(), one_key, problem.goals["bronze"], config) \
        <= config.epsilon_floor


def test_horizon_exceeded():
    problem = small_problem("generic_5x5_offroute")[2]
    world = world_for(problem)
    never = parse_formula("(= (picked alice) 3)", problem.domain)
    with pytest.raises(HorizonExceeded):
        subgoal_condition_likelihood(world, world.initial_state(), never, problem.goals["gold"],
                                     InferenceConfig(subgoal_horizon=1))


@pytest.mark.parametrize("name", ["generic_5x5_offroute", "color_same_5x5"])
@pytest.mark.parametrize("beta", [2.0, 4.0])
def test_macro_route_tracks_low_level_route(name, beta):
    ir, _, problem = small_problem(name)
    condition = parse_formula(ir.observation, problem.domain)
    macro, low = route_posteriors(problem, condition, InferenceConfig(beta=beta))
    assert macro.total_variation(low) <= 0.02


def test_rule_makes_both_routes_agree_exactly():
    problem = _with_rule("generic_5x5_onroute")
    condition = parse_formula("(= (picked alice) 1)", problem.domain)
    macro, low = route_posteriors(problem, condition, InferenceConfig())
    assert macro.total_variation(low) <= 1e-9


# -- posterior ------------------------------------------------------------------------------


def test_empty_observation_is_exactly_the_prior(prepared):
    for stimulus in prepared.values():
        assert posterior(stimulus.problem, LowLevelActions()).mass == goal_prior(stimulus.problem).mass


def test_posterior_paper_examples(prepared):
    assert posterior(prepared["spatial_04"].problem, prepared["spatial_04"].observation).argmax() == "bronze"
    post = posterior(prepared["color_different_01"].problem, prepared["color_different_01"].observation)
    assert post["bronze"] > post["gold"] and post["bronze"] > post["silver"]
    assert abs(post["gold"] - post["silver"]) <= 0.05


def test_corpus_posteriors_normalised(prepared):
    for stimulus in prepared.values():
        post = posterior(stimulus.problem, stimulus.observation)
        assert math.fsum(post.mass.values()) == pytest.approx(1.0, abs=1e-9)
        assert set(post.mass) == set(stimulus.problem.goals)
        assert all(p >= 0 for p in post.mass.values())


def test_zero_evidence_without_floor():
    problem = open_problem(4, 1, (0, 0), {"gold": (1, 0)})
    with pytest.raises(ZeroEvidence):
        posterior(problem, LowLevelActions((MOVE("E"), MOVE("E"))), InferenceConfig(epsilon_floor=0.0))


@settings(max_examples=20, deadline=None)
@given(k=st.sampled_from([0.5, 2.0, 3.0]), beta=st.sampled_from([0.5, 1.0, 2.0]),
       sid=st.sampled_from(["spatial_02", "generic_02", "color_same_01", "color_different_01"]))
def test_cost_scaling_invariance(prepared, k, beta, sid):
    stimulus = prepared[sid]
    base = InferenceConfig(beta=beta)
    scaled = InferenceConfig(beta=beta / k, action_cost=k)
    assert goal_prior(stimulus.problem, scaled).total_variation(goal_prior(stimulus.problem, base)) <= 1e-12
    obs = stimulus.observation
    if isinstance(obs, LowLevelActions):
        obs = LowLevelActions(tuple(GroundAction(a.kind, a.args, k) for a in obs.actions))
    a = posterior(stimulus.problem, stimulus.observation, base)
    b = posterior(stimulus.problem, obs, scaled)
    assert a.total_variation(b) <= 1e-9


# -- brute-force oracle -----------------------------------------------------------------


def test_brute_force_single_goal():
    problem = open_problem(4, 1, (0, 0), {"gold": (3, 0)})
    obs = LowLevelActions((MOVE("E"),))
    assert brute_force_posterior(problem, obs).mass == {"gold": 1.0}


def test_brute_force_inconsistent_observation_returns_prior():
    problem = open_problem(6, 1, (0, 0), {"gold": (1, 0), "silver": (2, 0)})
    obs = LowLevelActions((MOVE("E"), MOVE("E"), MOVE("E")))
    prior = goal_prior(problem)
    assert brute_force_posterior(problem, obs).total_variation(prior) <= 1e-12
    assert posterior(problem, obs).total_variation(prior) <= 1e-12


def test_brute_force_budget():
    problem = small_problem("generic_5x5_pickup")[2]
    with pytest.raises(StateSpaceTooLarge):
        brute_force_posterior(problem, LowLevelActions((MOVE("W"), MOVE("W"), MOVE("E"))), max_nodes=10)


@pytest.mark.parametrize("beta", [0.5, 1.0, 4.0])
def test_brute_force_matches_across_beta(beta):
    config = InferenceConfig(beta=beta)
    for name in ("spatial_7x7", "color_same_5x5"):
        ir, _, problem = small_problem(name)
        obs = (LowLevelActions((MOVE("E"), MOVE("S"))) if name == "spatial_7x7"
               else SubgoalCondition(parse_formula(ir.observation, problem.domain)))
        assert posterior(problem, obs, config).total_variation(brute_force_posterior(problem, obs, config)) <= 1e-6


def _optimal_only_for(world, s0, actions, goals):
    """Goals for which every step of ``actions`` is optimal."""
    out = []
    for t, goal in goals.items():
        state, ok = s0, True
        for action in actions:
            best = -optimal_cost(state, goal, world).cost
            if world.is_goal(state, goal) or q_value(state, action, goal, world) < best:
                ok = False
                break
            state = world.result(state, action, goal)
        if ok:
            out.append(t)
    return out


PLACEMENTS = st.tuples(st.sampled_from("NSEW"), st.integers(1, 4))


@settings(max_examples=25, deadline=None)
@given(placements=st.lists(PLACEMENTS, min_size=3, max_size=3, unique_by=lambda p: p), seed=st.integers(0, 99))
def test_beta_monotonicity_on_random_spatial_layouts(placements, seed):
    goals = ["gold", "silver", "bronze"]
    ir = parse_scenario_ir({
        "agent": ["Alice"], "goals": goals, "obstacles": {}, "keys": [], "max_obstacle": 0, "keys_per_door": 1,
        "len_key": 0, "goal_count": 3, "observation_type": "action_sequence", "observation": [],
        "spatial_constraints": [{"target": g, "anchor": "alice", "direction": d, "steps": n}
                                for g, (d, n) in zip(goals, placements)],
        "dynamics_variant": "spatial"})
    domain = domain_for_variant("spatial")
    problem = compile_to_problem(ir, sample_map(ir, seed, domain), domain)
    world = world_for(problem)
    s0 = world.initial_state()
    for goal in problem.goals.values():
        plan = optimal_cost(s0, goal, world).actions
        for k in range(1, len(plan) + 1):
            prefix = tuple(plan[:k])
            targets = _optimal_only_for(world, s0, prefix, problem.goals)
            if len(targets) != 1:
                continue
            masses = [posterior(problem, LowLevelActions(prefix), InferenceConfig(beta=b))[targets[0]]
                      for b in (0.5, 1.0, 2.0, 4.0)]
            assert all(hi >= lo - 1e-12 for lo, hi in zip(masses, masses[1:]))
