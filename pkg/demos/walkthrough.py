"""Walk through three stimuli: map, observation, prior and posterior.

Run with ``python demos/walkthrough.py``. Everything comes from the shipped
translation fixtures, so no network access or API key is needed.
"""

from __future__ import annotations

from invplan.evaluation import LowLevelActions, load_corpus, prepare_stimulus
from invplan.infer import InferenceConfig, goal_costs, goal_prior, posterior
from invplan.translate import FixtureStore

STIMULI = ("spatial_04", "color_same_01", "color_different_01")


def show(stimulus, fixtures, config: InferenceConfig) -> None:
    prepared = prepare_stimulus(stimulus, fixtures, seed=0)
    print(f"== {stimulus.id} ({stimulus.variant})")
    print(stimulus.text.strip())
    print()
    print(prepared.map.render())
    obs = prepared.observation
    if isinstance(obs, LowLevelActions):
        print("observed:", " ".join(a.args[0] for a in obs.actions))
    else:
        print("observed condition:", prepared.ir.observation)
    costs = goal_costs(prepared.problem, config)
    prior = goal_prior(prepared.problem, config)
    post = posterior(prepared.problem, obs, config)
    print(f"{'trophy':8} {'cost':>6} {'prior':>8} {'posterior':>10}")
    for g in stimulus.goals:
        print(f"{g:8} {costs[g]:6.0f} {prior[g]:8.3f} {post[g]:10.3g}")
    print(f"most likely: {post.argmax()}\n")


def main() -> None:
    corpus = {s.id: s for s in load_corpus()}
    fixtures = FixtureStore.load()
    config = InferenceConfig()
    for sid in STIMULI:
        show(corpus[sid], fixtures, config)


if __name__ == "__main__":
    main()
