"""Run the evaluation harness end to end on synthetic ratings.

The shipped ratings file is generated from model posteriors plus noise, so
the correlations printed here check the plumbing, not the model's fit to
people.
"""

from __future__ import annotations

from invplan.evaluation import (
    all_reports,
    exclude_participants,
    load_corpus,
    model_judgments,
    synthesize_human_judgments,
)


def main(seed: int = 0) -> None:
    corpus = load_corpus()
    model = model_judgments(corpus, seed=seed)
    for noise in (0.5, 1.5, 3.0):
        human = synthesize_human_judgments(model, corpus, noise=noise, seed=seed)
        kept, dropped = exclude_participants(human)
        reports = all_reports(model, kept, corpus, bootstrap_samples=500, seed=seed)
        print(f"== rating noise {noise}: {len(dropped)} participants excluded")
        for scope, rep in reports.items():
            print(f"{scope:16} R={rep.pearson_r:+.3f}  95% CI [{rep.ci_low:+.3f}, {rep.ci_high:+.3f}]"
                  f"  n={rep.n_pairs}")
        print()


if __name__ == "__main__":
    main()
