"""Stimulus corpus, human judgments, model and LLM-baseline runs, and correlation statistics."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .infer import InferenceConfig, LowLevelActions, ObservationTrace, SubgoalCondition, posterior
from .pddl import DomainAst, ProblemInstance, parse_formula
from .planner import GroundAction
from .resources import VARIANTS, data_path, domain_with_operator, read_text
from .translate import (
    OPERATOR,
    SCENARIO_IR,
    FixtureStore,
    TranslationRequest,
    Transport,
    ValidationContext,
    load_few_shot_pool,
    sample_few_shot,
    translate_with_rejection,
)
from .worldgen import MapSample, ScenarioIr, SchemaError, compile_to_problem, parse_scenario_ir, sample_map

Pair = tuple[str, str]

HUMAN_HEADER = ("participant_id", "stimulus_id", "trophy", "rating")
PLOT_HEADER = ("stimulus_id", "trophy", "variant", "model_value", "human_mean")
DEFAULT_BOOTSTRAP = 1000
DEFAULT_BASELINE_SAMPLES = 30


class RangeError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


class InsufficientPairs(ValueError):
    pass


class SampleBudgetExhausted(RuntimeError):
    pass


class StimulusError(RuntimeError):
    """A module error raised while processing one stimulus."""

    def __init__(self, stimulus_id: str, cause: Exception):
        super().__init__(f"{stimulus_id}: {type(cause).__name__}: {cause}")
        self.stimulus_id = stimulus_id
        self.cause = cause


# -- corpus -------------------------------------------------------------------------


@dataclass(frozen=True)
class StimulusRecord:
    id: str
    variant: str
    text: str
    goals: tuple[str, ...]
    fixture: str


def load_corpus(path: Path | str | None = None) -> list[StimulusRecord]:
    """Read a corpus file (a JSON array of stimulus records); the shipped corpus by default."""
    raw = Path(path).read_text(encoding="utf-8") if path is not None else read_text("corpus.json")
    if not raw.strip():
        raise SchemaError("corpus file is empty")
    try:
        items = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"corpus is not JSON: {exc}") from None
    if not isinstance(items, list) or not items:
        raise SchemaError("corpus must be a non-empty JSON array")
    out, seen = [], set()
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise SchemaError(f"corpus entry {i} is not an object")
        for name in ("id", "variant", "text", "goals"):
            if name not in item:
                raise SchemaError(f"corpus entry {i} lacks '{name}'", name)
        if item["variant"] not in VARIANTS:
            raise SchemaError(f"unknown variant '{item['variant']}' in entry {i}", "variant")
        goals = item["goals"]
        if not isinstance(goals, list) or not goals or not all(isinstance(g, str) for g in goals):
            raise SchemaError(f"entry {i} needs a non-empty list of goal labels", "goals")
        if item["id"] in seen:
            raise SchemaError(f"duplicate stimulus id '{item['id']}'", "id")
        seen.add(item["id"])
        out.append(StimulusRecord(item["id"], item["variant"], item["text"],
                                  tuple(g.lower() for g in goals), item.get("fixture", item["id"])))
    return out


def pairs_of(corpus: Iterable[StimulusRecord]) -> list[Pair]:
    return [(s.id, g) for s in corpus for g in s.goals]


# -- human judgments -------------------------------------------------------------------


@dataclass(frozen=True)
class HumanJudgments:
    rows: tuple[tuple[str, str, str, int], ...]

    def participants(self) -> list[str]:
        return sorted({r[0] for r in self.rows})

    def means(self) -> dict[Pair, float]:
        acc: dict[Pair, list[int]] = defaultdict(list)
        for _, sid, trophy, rating in self.rows:
            acc[(sid, trophy)].append(rating)
        return {k: math.fsum(v) / len(v) for k, v in acc.items()}

    def without(self, participants: Iterable[str]) -> "HumanJudgments":
        drop = set(participants)
        return HumanJudgments(tuple(r for r in self.rows if r[0] not in drop))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HUMAN_HEADER)
        w.writerows(self.rows)
        return buf.getvalue()


def load_human_csv(path: Path | str, corpus: Sequence[StimulusRecord] | None = None) -> HumanJudgments:
    """Read ``participant_id,stimulus_id,trophy,rating`` rows (ratings 1-7).

    Every participant who rated a stimulus must rate each of its trophies;
    the trophy set comes from ``corpus`` when given, otherwise from all
    rows for that stimulus.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HUMAN_HEADER:
            raise SchemaError(f"header must be {','.join(HUMAN_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SchemaError(f"row {lineno} has {len(row)} fields, expected 4")
            pid, sid, trophy, rating = (c.strip() for c in row)
            try:
                value = int(rating)
            except ValueError:
                raise SchemaError(f"row {lineno}: rating '{rating}' is not an integer", "rating") from None
            if not 1 <= value <= 7:
                raise RangeError(f"row {lineno}: rating {value} is outside 1-7", lineno)
            rows.append((pid, sid, trophy.lower(), value))
    expected: dict[str, set[str]] = defaultdict(set)
    if corpus is not None:
        for s in corpus:
            expected[s.id] = set(s.goals)
    else:
        for _, sid, trophy, _ in rows:
            expected[sid].add(trophy)
    rated: dict[tuple[str, str], set[str]] = defaultdict(set)
    for pid, sid, trophy, _ in rows:
        rated[(pid, sid)].add(trophy)
    for (pid, sid), trophies in sorted(rated.items()):
        missing = expected.get(sid, set()) - trophies
        if missing:
            raise SchemaError(f"participant {pid} did not rate {sorted(missing)} for stimulus {sid}")
    return HumanJudgments(tuple(rows))


def map_agreement(judgments: HumanJudgments) -> dict[str, float]:
    """Share of each participant's stimuli where their top-rated trophy matches the consensus top."""
    means = judgments.means()
    consensus: dict[str, str] = {}
    by_stim: dict[str, dict[str, float]] = defaultdict(dict)
    for (sid, trophy), m in means.items():
        by_stim[sid][trophy] = m
    for sid, vals in by_stim.items():
        consensus[sid] = max(sorted(vals), key=lambda t: vals[t])
    own: dict[tuple[str, str], dict[str, int]] = defaultdict(dict)
    for pid, sid, trophy, rating in judgments.rows:
        own[(pid, sid)][trophy] = rating
    hits: dict[str, list[bool]] = defaultdict(list)
    for (pid, sid), vals in own.items():
        top = max(vals.values())
        hits[pid].append(vals.get(consensus[sid]) == top)
    return {pid: sum(h) / len(h) for pid, h in sorted(hits.items())}


def exclude_participants(judgments: HumanJudgments, threshold: float = 0.3) -> tuple[HumanJudgments, list[str]]:
    """Drop participants whose MAP answers agree with the consensus less than ``threshold`` of the time."""
    dropped = [pid for pid, share in map_agreement(judgments).items() if share < threshold]
    return judgments.without(dropped), dropped


def synthesize_human_judgments(model_values: Mapping[Pair, float], corpus: Sequence[StimulusRecord],
                               participants_per_variant: int = 15, noise: float = 1.0,
                               seed: int = 0) -> HumanJudgments:
    """Synthetic Likert ratings: ``1 + 6 p`` plus Gaussian noise, rounded and clipped to 1-7.

    Used only to exercise the harness; it is not human data.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for variant in VARIANTS:
        stimuli = [s for s in corpus if s.variant == variant]
        for i in range(participants_per_variant):
            pid = f"synthetic-{variant}-{i + 1:02d}"
            for s in stimuli:
                for g in s.goals:
                    score = 1 + 6 * model_values[(s.id, g)] + rng.normal(0.0, noise)
                    rows.append((pid, s.id, g, int(np.clip(np.rint(score), 1, 7))))
    return HumanJudgments(tuple(rows))


# -- model runs ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PreparedStimulus:
    stimulus_id: str
    ir: ScenarioIr
    domain: DomainAst
    map: MapSample
    problem: ProblemInstance
    observation: ObservationTrace
    operator: str | None = None


def observation_trace(ir: ScenarioIr, domain: DomainAst, action_cost: float = 1.0) -> ObservationTrace:
    if ir.observation_type == "action_sequence":
        return LowLevelActions(tuple(GroundAction("move", (w.direction,), action_cost)
                                     for w in ir.observation for _ in range(w.steps)))
    return SubgoalCondition(parse_formula(ir.observation, domain))


@dataclass
class LiveTranslator:
    """Translates stimulus text through an LLM transport with few-shot prompts."""

    transport: Transport
    temperature: float = 1.2
    max_rejections: int = 10
    seed: int = 0
    n_examples: int = 3
    log_dir: Path | None = None
    pools: dict[str, list] = field(default_factory=dict)

    def _pool(self, kind: str):
        if kind not in self.pools:
            self.pools[kind] = load_few_shot_pool(kind)
        return self.pools[kind]

    def request(self, stimulus: StimulusRecord, kind: str) -> TranslationRequest:
        examples = sample_few_shot(self._pool(kind), self.n_examples, self.seed, stimulus.variant,
                                   exclude=[stimulus.text])
        return TranslationRequest(stimulus.text, examples, self.temperature, self.max_rejections, kind,
                                  stimulus.id)

    def translate(self, stimulus: StimulusRecord) -> tuple[str, str | None]:
        operator = None
        if stimulus.variant in ("color_same", "color_different"):
            operator = translate_with_rejection(
                self.request(stimulus, OPERATOR), self.transport,
                ValidationContext(variant=stimulus.variant, seed=self.seed), self.log_dir).code
        scenario = translate_with_rejection(
            self.request(stimulus, SCENARIO_IR), self.transport,
            ValidationContext(variant=stimulus.variant, operator=operator, seed=self.seed), self.log_dir).code
        return scenario, operator


def prepare_from_text(stimulus_id: str, scenario: str, operator: str | None, seed: int = 0,
                      action_cost: float = 1.0) -> PreparedStimulus:
    ir = parse_scenario_ir(scenario)
    domain = domain_with_operator(operator, ir.dynamics_variant)
    sample = sample_map(ir, seed, domain)
    problem = compile_to_problem(ir, sample, domain)
    return PreparedStimulus(stimulus_id, ir, domain, sample, problem,
                            observation_trace(ir, domain, action_cost), operator)


def prepare_stimulus(stimulus: StimulusRecord, fixtures: FixtureStore | None, seed: int = 0,
                     translator: LiveTranslator | None = None, action_cost: float = 1.0) -> PreparedStimulus:
    """Translate (fixture or live), sample one valid map, compile, and build the observation."""
    try:
        if translator is not None:
            scenario, operator = translator.translate(stimulus)
        else:
            fx = (fixtures or FixtureStore.load()).get(stimulus.fixture)
            scenario, operator = fx.scenario, fx.operator
        return prepare_from_text(stimulus.id, scenario, operator, seed, action_cost)
    except Exception as exc:  # tag whatever went wrong with the stimulus id
        raise StimulusError(stimulus.id, exc) from exc


def model_judgments(corpus: Sequence[StimulusRecord], fixtures: FixtureStore | None = None,
                    config: InferenceConfig | None = None, seed: int = 0,
                    translator: LiveTranslator | None = None) -> dict[Pair, float]:
    """Posterior probability of every (stimulus, trophy) pair."""
    config = config or InferenceConfig()
    fixtures = fixtures if fixtures is not None or translator is not None else FixtureStore.load()
    out: dict[Pair, float] = {}
    for stimulus in corpus:
        prepared = prepare_stimulus(stimulus, fixtures, seed, translator, config.action_cost)
        try:
            post = posterior(prepared.problem, prepared.observation, config)
        except Exception as exc:
            raise StimulusError(stimulus.id, exc) from exc
        for g in stimulus.goals:
            out[(stimulus.id, g)] = post.mass.get(g, 0.0)
    return out


# -- LLM baseline ---------------------------------------------------------------------------

_RATING = re.compile(r"^\W*([A-Za-z]+)\s+trophy\W*\s*:\s*\**\s*([1-7])\b", re.IGNORECASE | re.MULTILINE)


def baseline_prompt(stimulus: StimulusRecord, template: str | None = None) -> str:
    template = template if template is not None else read_text("baseline_prompt.txt")
    answer_format = "\n".join(f"{g.capitalize()} Trophy: <rating>" for g in stimulus.goals)
    return template.format(stimulus=stimulus.text.strip(), answer_format=answer_format)


def parse_ratings(text: str, goals: Sequence[str]) -> dict[str, int] | None:
    """Ratings in the ``Gold Trophy: 6`` format, or ``None`` unless every goal gets exactly one."""
    found: dict[str, list[int]] = defaultdict(list)
    for name, value in _RATING.findall(text):
        found[name.lower()].append(int(value))
    if any(len(found.get(g, [])) != 1 for g in goals):
        return None
    return {g: found[g][0] for g in goals}


@dataclass(frozen=True)
class BaselineResult:
    means: dict[Pair, float]
    samples: dict[str, tuple[dict[str, int], ...]]
    rejected: dict[str, int]
    raw: dict[str, tuple[str, ...]] = field(default_factory=dict)


def llm_baseline_judgments(corpus: Sequence[StimulusRecord], transport: Transport,
                           samples_per_stimulus: int = DEFAULT_BASELINE_SAMPLES, temperature: float = 1.0,
                           max_attempts: int | None = None, template: str | None = None) -> BaselineResult:
    """Mean Likert rating per trophy over well-formed zero-shot answers; malformed ones are resampled."""
    if samples_per_stimulus < 1:
        raise ValueError("need at least one sample per stimulus")
    cap = max_attempts if max_attempts is not None else 3 * samples_per_stimulus
    means: dict[Pair, float] = {}
    samples, rejected, raw = {}, {}, {}
    for stimulus in corpus:
        prompt = baseline_prompt(stimulus, template)
        good: list[dict[str, int]] = []
        texts: list[str] = []
        attempts = 0
        while len(good) < samples_per_stimulus:
            if attempts >= cap:
                raise SampleBudgetExhausted(
                    f"{stimulus.id}: only {len(good)} well-formed answers in {cap} attempts")
            attempts += 1
            text = transport.complete(prompt, temperature=temperature, request_id=stimulus.id)
            texts.append(text)
            ratings = parse_ratings(text, stimulus.goals)
            if ratings is not None:
                good.append(ratings)
        for g in stimulus.goals:
            means[(stimulus.id, g)] = math.fsum(r[g] for r in good) / len(good)
        samples[stimulus.id] = tuple(good)
        rejected[stimulus.id] = attempts - len(good)
        raw[stimulus.id] = tuple(texts)
    return BaselineResult(means, samples, rejected, raw)


def load_baseline_transcripts(path: Path | str | None = None) -> dict[str, list[str]]:
    """Canned baseline answers keyed by stimulus id (the shipped example by default)."""
    p = Path(path) if path is not None else data_path("baseline", "transcripts.json")
    return {k: [v] if isinstance(v, str) else list(v) for k, v in json.loads(p.read_text(encoding="utf-8")).items()}


# -- statistics -----------------------------------------------------------------------------


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx, dy = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        return math.nan
    return float(dx @ dy) / denom


def bootstrap_ci(x: Sequence[float], y: Sequence[float], samples: int = DEFAULT_BOOTSTRAP, seed: int = 0,
                 level: float = 0.95) -> tuple[float, float]:
    """Percentile CI of Pearson R from resampling pairs with replacement (degenerate resamples skipped)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(x), size=(samples, len(x)))
    bx, by = x[idx], y[idx]
    bx = bx - bx.mean(axis=1, keepdims=True)
    by = by - by.mean(axis=1, keepdims=True)
    denom = np.sqrt((bx * bx).sum(axis=1) * (by * by).sum(axis=1))
    with np.errstate(invalid="ignore", divide="ignore"):
        rs = (bx * by).sum(axis=1) / denom
    rs = rs[np.isfinite(rs)]
    if rs.size == 0:
        return math.nan, math.nan
    tail = (1 - level) / 2 * 100
    lo, hi = np.percentile(rs, [tail, 100 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class CorrelationReport:
    scope: str
    pearson_r: float
    ci_low: float
    ci_high: float
    n_pairs: int
    paired_values: tuple[tuple[str, str, float, float], ...]
    bootstrap_samples: int = DEFAULT_BOOTSTRAP
    seed: int = 0

    def as_dict(self) -> dict:
        return {"scope": self.scope, "pearson_r": self.pearson_r, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "n_pairs": self.n_pairs, "bootstrap_samples": self.bootstrap_samples,
                "seed": self.seed,
                "pairs": [{"stimulus_id": s, "trophy": t, "model_value": m, "human_mean": h}
                          for s, t, m, h in self.paired_values]}


def correlation_report(model_values: Mapping[Pair, float], human: HumanJudgments | Mapping[Pair, float],
                       corpus: Sequence[StimulusRecord], scope: str = "overall",
                       bootstrap_samples: int = DEFAULT_BOOTSTRAP, seed: int = 0) -> CorrelationReport:
    """Pearson R between model values and mean human ratings over the scoped pairs, with a bootstrap CI."""
    if scope != "overall" and scope not in VARIANTS:
        raise ValueError(f"unknown scope '{scope}'")
    means = human.means() if isinstance(human, HumanJudgments) else dict(human)
    scoped = [s for s in corpus if scope == "overall" or s.variant == scope]
    pairs = [(sid, g) for sid, g in pairs_of(scoped) if (sid, g) in model_values and (sid, g) in means]
    if len(pairs) < 3:
        raise InsufficientPairs(f"{scope}: only {len(pairs)} paired values")
    x = [model_values[p] for p in pairs]
    y = [means[p] for p in pairs]
    r = pearson_r(x, y)
    lo, hi = bootstrap_ci(x, y, bootstrap_samples, seed)
    return CorrelationReport(scope, r, lo, hi, len(pairs),
                             tuple((s, g, model_values[(s, g)], means[(s, g)]) for s, g in pairs),
                             bootstrap_samples, seed)


def emit_plot_data(report: CorrelationReport, corpus: Sequence[StimulusRecord], path: Path | str | None = None) -> str:
    """Scatter rows ``stimulus_id,trophy,variant,model_value,human_mean`` sorted by stimulus and trophy."""
    variant = {s.id: s.variant for s in corpus}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for sid, trophy, m, h in sorted(report.paired_values, key=lambda r: (r[0], r[1])):
        w.writerow((sid, trophy, variant.get(sid, ""), repr(float(m)), repr(float(h))))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def all_reports(model_values: Mapping[Pair, float], human, corpus: Sequence[StimulusRecord],
                bootstrap_samples: int = DEFAULT_BOOTSTRAP, seed: int = 0,
                on_missing: Callable[[str, Exception], None] | None = None) -> dict[str, CorrelationReport]:
    """The overall report and one per variant; scopes without enough pairs are reported via ``on_missing``."""
    out = {}
    for scope in ("overall", *VARIANTS):
        try:
            out[scope] = correlation_report(model_values, human, corpus, scope, bootstrap_samples, seed)
        except InsufficientPairs as exc:
            if on_missing is None:
                raise
            on_missing(scope, exc)
    return out
