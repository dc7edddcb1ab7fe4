"""Regenerate the shipped synthetic human-judgment file.

The ratings are drawn around the model's own posteriors (1 + 6p plus
Gaussian noise), so they only exercise the evaluation harness; they are
not data from people. Run from the repository root:
``python tools/build_synthetic_human.py``.
"""

from __future__ import annotations

from pathlib import Path

from invplan.evaluation import load_corpus, model_judgments, synthesize_human_judgments

OUT = Path(__file__).resolve().parents[1] / "src" / "invplan" / "data" / "synthetic_human_judgments.csv"


def main() -> None:
    corpus = load_corpus()
    values = model_judgments(corpus)
    human = synthesize_human_judgments(values, corpus, participants_per_variant=15, noise=1.0, seed=2024)
    OUT.write_text(human.to_csv(), encoding="utf-8")
    print(f"wrote {len(human.rows)} rows to {OUT}")


if __name__ == "__main__":
    main()
