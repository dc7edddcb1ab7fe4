"""How the posterior sharpens as the rationality parameter beta grows.

Small beta makes every step nearly uninformative, so the posterior stays
close to the cost-based prior. Large beta treats each step as strong
evidence of optimal planning.
"""

from __future__ import annotations

from invplan.evaluation import load_corpus, prepare_stimulus
from invplan.infer import InferenceConfig, posterior
from invplan.translate import FixtureStore

BETAS = (0.1, 0.5, 1.0, 2.0, 4.0, 8.0)


def main(stimulus_ids=("spatial_01", "spatial_04", "generic_02")) -> None:
    corpus = {s.id: s for s in load_corpus()}
    fixtures = FixtureStore.load()
    for sid in stimulus_ids:
        stimulus = corpus[sid]
        prepared = prepare_stimulus(stimulus, fixtures, seed=0)
        print(f"== {sid}")
        print("beta   " + " ".join(f"{g:>8}" for g in stimulus.goals))
        for beta in BETAS:
            post = posterior(prepared.problem, prepared.observation, InferenceConfig(beta=beta))
            print(f"{beta:<6} " + " ".join(f"{post[g]:8.4f}" for g in stimulus.goals))
        print()


if __name__ == "__main__":
    main()
