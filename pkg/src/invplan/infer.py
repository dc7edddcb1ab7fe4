"""Exact Bayesian goal inference for a Boltzmann-rational agent.

The prior over trophies is proportional to the inverse optimal plan cost.
Observed low-level actions are scored step by step under a softmax policy
over Q-values. State conditions such as "holds a red key" are scored as
the probability that the agent passes through a satisfying state. That
probability is computed on a macro graph whose steps are "walk to a key
and pick it up", "walk next to a door and unlock it" and "walk to the
goal".
"""

from __future__ import annotations

import math
import weakref
from collections import deque
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .pddl import ProblemInstance, eval_formula
from .pddl.ast import TRUE
from .planner import DIRECTIONS, GridWorld, GroundAction, WorldState, uniform_cost_search

MAX_BRUTE_FORCE_NODES = 100_000


class AllGoalsUnreachable(ValueError):
    pass


class GoalUnreachableFromState(ValueError):
    pass


class InapplicableSequence(ValueError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class HorizonExceeded(RuntimeError):
    pass


class ZeroEvidence(ValueError):
    pass


class StateSpaceTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class InferenceConfig:
    beta: float = 2.0
    epsilon_floor: float = 1e-6
    subgoal_horizon: int = 16
    action_cost: float = 1.0
    horizon_tolerance: float = 1e-12

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0 <= self.epsilon_floor < 1:
            raise ValueError("epsilon_floor must lie in [0, 1)")
        if self.subgoal_horizon < 1:
            raise ValueError("subgoal_horizon must be at least 1")
        if not self.action_cost > 0:
            raise ValueError("action_cost must be positive")

    def as_dict(self) -> dict:
        return {"beta": self.beta, "epsilon_floor": self.epsilon_floor,
                "subgoal_horizon": self.subgoal_horizon, "action_cost": self.action_cost}


@dataclass(frozen=True)
class GoalDistribution:
    mass: dict[str, float]

    def __post_init__(self):
        if any(p < 0 for p in self.mass.values()):
            raise ValueError("negative probability")
        total = sum(self.mass.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")

    def __getitem__(self, goal: str) -> float:
        return self.mass[goal]

    def argmax(self) -> str:
        return max(self.mass, key=lambda g: (self.mass[g], g))

    def total_variation(self, other: "GoalDistribution") -> float:
        goals = set(self.mass) | set(other.mass)
        return 0.5 * sum(abs(self.mass.get(g, 0.0) - other.mass.get(g, 0.0)) for g in goals)

    @classmethod
    def normalized(cls, weights: dict[str, float]) -> "GoalDistribution":
        total = math.fsum(weights.values())
        return cls({g: w / total for g, w in weights.items()})


@dataclass(frozen=True)
class LowLevelActions:
    actions: tuple[GroundAction, ...] = ()


@dataclass(frozen=True)
class SubgoalCondition:
    formula: object = TRUE


ObservationTrace = Union[LowLevelActions, SubgoalCondition]


@dataclass(frozen=True)
class PolicyDistribution:
    mass: dict[GroundAction, float]

    def __getitem__(self, action: GroundAction) -> float:
        return self.mass.get(action, 0.0)


# -- shared world per problem --------------------------------------------------

_WORLDS: "weakref.WeakKeyDictionary[ProblemInstance, dict[float, GridWorld]]" = weakref.WeakKeyDictionary()


def world_for(problem: ProblemInstance, config: InferenceConfig | None = None) -> GridWorld:
    """The (cached) transition system of ``problem`` at the configured action cost."""
    cost = (config or InferenceConfig()).action_cost
    per_cost = _WORLDS.setdefault(problem, {})
    world = per_cost.get(cost)
    if world is None:
        world = per_cost[cost] = GridWorld(problem, cost)
    return world


def softmax(values: list[float], beta: float) -> list[float]:
    """Boltzmann weights of ``values``; ``-inf`` entries get exactly zero."""
    finite = [v for v in values if v != -math.inf]
    if not finite:
        raise ValueError("no finite value")
    top = max(finite)
    weights = [0.0 if v == -math.inf else math.exp(beta * (v - top)) for v in values]
    total = math.fsum(weights)
    return [w / total for w in weights]


# -- prior and policy ------------------------------------------------------------


def goal_costs(problem: ProblemInstance, config: InferenceConfig | None = None) -> dict[str, float]:
    world = world_for(problem, config)
    start = world.initial_state()
    return {t: world.plan(start, goal).cost for t, goal in problem.goals.items()}


def goal_prior(problem: ProblemInstance, config: InferenceConfig | None = None) -> GoalDistribution:
    """P(g | s0) proportional to 1 / C(g, s0); unreachable goals get zero mass."""
    costs = goal_costs(problem, config)
    return _prior_from_costs(costs)


def _prior_from_costs(costs: dict[str, float]) -> GoalDistribution:
    weights = {}
    for g, c in costs.items():
        if c == math.inf:
            weights[g] = 0.0
        elif c == 0:
            weights[g] = math.inf
        else:
            weights[g] = 1.0 / c
    if all(w == 0 for w in weights.values()):
        raise AllGoalsUnreachable("no goal is reachable from the initial state")
    if any(w == math.inf for w in weights.values()):
        # the agent already stands on a goal: that goal takes all the mass
        zero = [g for g, w in weights.items() if w == math.inf]
        return GoalDistribution({g: (1.0 / len(zero) if g in zero else 0.0) for g in weights})
    return GoalDistribution.normalized(weights)


def q_values(world: GridWorld, state: WorldState, goal) -> list[tuple[GroundAction, WorldState, float]]:
    out = []
    for action, nxt in world.successors(state, goal):
        rest = world.plan(nxt, goal)
        out.append((action, nxt, -(action.cost + rest.cost) if rest.reached else -math.inf))
    return out


def policy(world: GridWorld, state: WorldState, goal, config: InferenceConfig) -> PolicyDistribution:
    """Boltzmann policy over the actions applicable in ``state`` when pursuing ``goal``."""
    qs = q_values(world, state, goal)
    if not any(q != -math.inf for _, _, q in qs):
        raise GoalUnreachableFromState(f"goal cannot be reached from {state.agent}")
    probs = softmax([q for _, _, q in qs], config.beta)
    return PolicyDistribution({a: p for (a, _, _), p in zip(qs, probs)})


# -- likelihoods ---------------------------------------------------------------------


def _step_probability(world: GridWorld, state: WorldState, action: GroundAction, goal,
                      config: InferenceConfig) -> tuple[float, WorldState | None]:
    """Policy probability of ``action`` and the resulting state (``None`` when it gets no mass)."""
    if world.is_goal(state, goal):
        return 0.0, None  # the agent stops once its goal is reached
    qs = q_values(world, state, goal)
    if not any(q != -math.inf for _, _, q in qs):
        return 0.0, None
    probs = softmax([q for _, _, q in qs], config.beta)
    for (a, nxt, _), p in zip(qs, probs):
        if a == action:
            return p, nxt
    return 0.0, None


def action_sequence_likelihood(world: GridWorld, s0: WorldState, actions, goal,
                               config: InferenceConfig) -> float:
    """Product of per-step policy probabilities along the replayed trajectory.

    If any step gets zero policy mass the result is ``epsilon_floor ** t``
    (``t`` the sequence length), or 0 when the floor is 0.
    """
    state = s0
    likelihood = 1.0
    blocked = False
    for i, action in enumerate(actions):
        unpruned = dict(world.successors(state))
        if action not in unpruned:
            raise InapplicableSequence(f"step {i + 1} '{action}' is not applicable", i + 1)
        if not blocked:
            p, _ = _step_probability(world, state, action, goal, config)
            blocked = p == 0.0
            likelihood *= p
        state = unpruned[action]
    if blocked:
        return config.epsilon_floor ** len(actions) if config.epsilon_floor > 0 else 0.0
    return likelihood


@dataclass(frozen=True)
class Macro:
    """A walk along a shortest path followed by one pickup, unlock, or nothing (walk to the goal)."""

    kind: str  # "pickup" | "unlock" | "goal"
    action: GroundAction | None
    cost: float
    result: WorldState


def walking_distances(world: GridWorld, state: WorldState) -> dict[tuple[int, int], int]:
    """Shortest walking distance (in steps) from the agent to every cell, doors as they are."""
    dist = {state.agent: 0}
    queue = deque([state.agent])
    while queue:
        x, y = cell = queue.popleft()
        for dx, dy in DIRECTIONS.values():
            n = (x + dx, y + dy)
            if n not in dist and world.passable(n, state):
                dist[n] = dist[cell] + 1
                queue.append(n)
    return dist


def _at(state: WorldState, cell) -> WorldState:
    return WorldState(cell, state.inventory, state.locked, state.keys_on_map,
                      state.trophy_taken, state.facts, state.counters)


def macro_actions(world: GridWorld, state: WorldState, goal) -> list[Macro]:
    """Macro steps available in ``state`` when pursuing a trophy ``goal``."""
    trophy = world.goal_trophy.get(goal)
    if trophy is None:
        raise ValueError("macro steps need a reach-trophy goal")
    dist = walking_distances(world, state)
    step = world.cost
    out: list[Macro] = []
    goal_cell = world.trophy_cells[trophy]
    if goal_cell in dist:
        out.append(Macro("goal", None, dist[goal_cell] * step, _at(state, goal_cell)))
    for key, cell in sorted(state.keys_on_map):
        if cell not in dist:
            continue
        for action, nxt in world.successors(_at(state, cell), goal):
            if action.kind == "pickup" and action.args == (key,):
                out.append(Macro("pickup", action, dist[cell] * step + action.cost, nxt))
    seen: set[GroundAction] = set()
    for (dx, dy), locks in sorted(world.locks_at.items()):
        if not any(lock in state.locked for lock in locks):
            continue
        stands = sorted((dist[c], c) for c in ((dx + ex, dy + ey) for ex, ey in DIRECTIONS.values())
                        if c in dist)
        for d, cell in stands:
            for action, nxt in world.successors(_at(state, cell), goal):
                if action.kind == "unlock" and action.args[0] in locks and action not in seen:
                    seen.add(action)
                    out.append(Macro("unlock", action, d * step + action.cost, nxt))
    return out


def macro_policy(world: GridWorld, state: WorldState, goal, config: InferenceConfig) -> list[tuple[Macro, float]]:
    macros = macro_actions(world, state, goal)
    qs = []
    for m in macros:
        rest = world.plan(m.result, goal)
        qs.append(-(m.cost + rest.cost) if rest.reached else -math.inf)
    if not any(q != -math.inf for q in qs):
        raise GoalUnreachableFromState(f"goal cannot be reached from {state.agent}")
    return [(m, p) for m, p in zip(macros, softmax(qs, config.beta)) if p > 0]


def subgoal_condition_likelihood(world: GridWorld, s0: WorldState, condition, goal,
                                 config: InferenceConfig) -> float:
    """Probability that an agent heading for ``goal`` passes through a state satisfying ``condition``.

    Forward dynamic programming over macro steps; mass on identical states is
    merged. Returns ``epsilon_floor`` in place of an exact zero.
    """
    frontier: dict[WorldState, float] = {s0: 1.0}
    satisfied = 0.0
    for _ in range(config.subgoal_horizon + 1):
        nxt: dict[WorldState, float] = {}
        for state, mass in frontier.items():
            if eval_formula(world.view(state), condition):
                satisfied += mass
            elif not world.is_goal(state, goal):
                for macro, p in macro_policy(world, state, goal, config):
                    nxt[macro.result] = nxt.get(macro.result, 0.0) + mass * p
        frontier = nxt
        if not frontier:
            break
    leftover = math.fsum(frontier.values())
    if leftover > config.horizon_tolerance:
        raise HorizonExceeded(f"{leftover:.3g} probability mass still undecided after "
                              f"{config.subgoal_horizon} macro steps")
    satisfied = min(satisfied, 1.0)
    return satisfied if satisfied > 0 else config.epsilon_floor


def lowlevel_condition_likelihood(world: GridWorld, s0: WorldState, condition, goal,
                                  config: InferenceConfig, max_states: int = 50_000) -> float:
    """The same probability as :func:`subgoal_condition_likelihood`, under the step-level policy.

    The agent's walk is an absorbing Markov chain (absorbed when the
    condition holds or the goal is reached); the hitting probability is
    the solution of a linear system. Used to cross-check the macro graph.
    """
    if eval_formula(world.view(s0), condition):
        return 1.0
    index: dict[WorldState, int] = {}
    rows: list[list[tuple[WorldState, float]]] = []
    queue = deque([s0])
    index[s0] = 0
    while queue:
        state = queue.popleft()
        qs = q_values(world, state, goal)
        probs = softmax([q for _, _, q in qs], config.beta)
        row = []
        for (_, nxt, _), p in zip(qs, probs):
            if p == 0:
                continue
            row.append((nxt, p))
            if nxt in index:
                continue
            if eval_formula(world.view(nxt), condition) or world.is_goal(nxt, goal):
                index[nxt] = -1
                continue
            index[nxt] = len(rows) + len(queue) + 1
            if index[nxt] > max_states:
                raise StateSpaceTooLarge(f"more than {max_states} transient states")
            queue.append(nxt)
        rows.append(row)
    transient = {s: i for s, i in index.items() if i >= 0}
    n = len(rows)
    a = np.eye(n)
    b = np.zeros(n)
    order = sorted(transient.items(), key=lambda kv: kv[1])
    for (state, i) in order:
        for nxt, p in rows[i]:
            j = transient.get(nxt)
            if j is not None:
                a[i, j] -= p
            elif eval_formula(world.view(nxt), condition):
                b[i] += p
    x = np.linalg.solve(a, b)
    value = float(min(max(x[0], 0.0), 1.0))
    return value if value > 0 else config.epsilon_floor


# -- posterior --------------------------------------------------------------------


def likelihood(world: GridWorld, obs: ObservationTrace, goal, config: InferenceConfig) -> float:
    s0 = world.initial_state()
    if isinstance(obs, LowLevelActions):
        return action_sequence_likelihood(world, s0, obs.actions, goal, config)
    if isinstance(obs, SubgoalCondition):
        return subgoal_condition_likelihood(world, s0, obs.formula, goal, config)
    raise TypeError(f"unknown observation {type(obs).__name__}")


def _combine(prior: GoalDistribution, likelihoods: dict[str, float], config: InferenceConfig) -> GoalDistribution:
    joint = {g: prior[g] * likelihoods.get(g, 0.0) for g in prior.mass}
    if math.fsum(joint.values()) == 0:
        raise ZeroEvidence("the observation has zero probability under every goal")
    return GoalDistribution.normalized(joint)


def _check_floor(problem: ProblemInstance, config: InferenceConfig) -> None:
    if config.epsilon_floor >= 1.0 / max(1, len(problem.goals)):
        raise ValueError("epsilon_floor must be below 1 / number of goals")


def posterior(problem: ProblemInstance, obs: ObservationTrace,
              config: InferenceConfig | None = None) -> GoalDistribution:
    """Exact P(g | s0, obs) proportional to prior times likelihood."""
    config = config or InferenceConfig()
    _check_floor(problem, config)
    world = world_for(problem, config)
    prior = goal_prior(problem, config)
    if isinstance(obs, LowLevelActions) and not obs.actions:
        return prior
    likelihoods = {t: likelihood(world, obs, problem.goals[t], config)
                   for t, p in prior.mass.items() if p > 0}
    return _combine(prior, likelihoods, config)


# -- brute-force oracle ----------------------------------------------------------------


@dataclass
class _Budget:
    limit: int
    used: int = field(default=0)

    def spend(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise StateSpaceTooLarge(f"enumeration visited more than {self.limit} nodes")


def brute_force_posterior(problem: ProblemInstance, obs: ObservationTrace, config: InferenceConfig | None = None,
                          horizon: int | None = None, max_nodes: int = MAX_BRUTE_FORCE_NODES) -> GoalDistribution:
    """Posterior by exhaustive enumeration of policy rollouts (a test oracle).

    Costs come from uniform-cost search instead of A*, and no state merging
    or memoisation is used: every rollout of length ``horizon`` (low-level
    steps, or macro steps for conditions) is expanded and the probability
    of the rollouts consistent with ``obs`` is summed per goal.
    """
    config = config or InferenceConfig()
    _check_floor(problem, config)
    world = GridWorld(problem, config.action_cost)
    s0 = world.initial_state()
    costs = {t: uniform_cost_search(s0, goal, world).cost for t, goal in problem.goals.items()}
    prior = _prior_from_costs(costs)
    budget = _Budget(max_nodes)

    def ucs_q(state, goal):
        out = []
        for action, nxt in world.successors(state, goal):
            budget.spend()
            rest = uniform_cost_search(nxt, goal, world)
            out.append((action, nxt, -(action.cost + rest.cost) if rest.reached else -math.inf))
        return out

    def rollouts_low(state, goal, depth):
        """Yield (action prefix, probability) for every rollout of ``depth`` steps."""
        if depth == 0:
            yield (), 1.0
            return
        if world.is_goal(state, goal):
            yield (), 1.0  # absorbed: the rollout ends here
            return
        qs = ucs_q(state, goal)
        if not any(q != -math.inf for _, _, q in qs):
            yield (), 1.0
            return
        for (a, nxt, _), p in zip(qs, softmax([q for _, _, q in qs], config.beta)):
            if p == 0:
                continue
            for rest, pr in rollouts_low(nxt, goal, depth - 1):
                yield (a, *rest), p * pr

    def macro_q(state, goal):
        out = []
        for m in macro_actions(world, state, goal):
            budget.spend()
            rest = uniform_cost_search(m.result, goal, world)
            out.append((m, -(m.cost + rest.cost) if rest.reached else -math.inf))
        return out

    def condition_mass(state, goal, depth, condition):
        if eval_formula(world.view(state), condition):
            return 1.0
        if world.is_goal(state, goal) or depth == 0:
            return 0.0
        qs = macro_q(state, goal)
        total = 0.0
        for (m, _), p in zip(qs, softmax([q for _, q in qs], config.beta)):
            if p > 0:
                total += p * condition_mass(m.result, goal, depth - 1, condition)
        return total

    likelihoods = {}
    for t, goal in problem.goals.items():
        if prior[t] == 0:
            continue
        if isinstance(obs, LowLevelActions):
            target = tuple(obs.actions)
            mass = sum(p for seq, p in rollouts_low(s0, goal, horizon or len(target))
                       if seq[: len(target)] == target and len(seq) >= len(target))
            if mass == 0:
                mass = config.epsilon_floor ** len(target) if config.epsilon_floor > 0 else 0.0
        else:
            mass = condition_mass(s0, goal, horizon or config.subgoal_horizon, obs.formula)
            if mass == 0:
                mass = config.epsilon_floor
        likelihoods[t] = mass
    return _combine(prior, likelihoods, config)
