"""Language-to-code translation with few-shot prompts and rejection sampling.

A :class:`TranslationRequest` asks for either a scenario record (JSON) or
an ``unlock`` operator (PDDL). Completions come from a transport: the
:class:`ChatCompletionTransport` talks to an OpenAI-style HTTP endpoint,
and :class:`FixtureTransport` replays canned text so the whole pipeline
runs offline. Every completion is checked by :func:`validate_translation`
and resampled until one passes or the budget runs out.
"""

from __future__ import annotations

import json
import logging
import os
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import httpx

from .pddl import (
    ActionSchema,
    GridSpec,
    PddlSyntaxError,
    ProblemInstance,
    SemanticError,
    eval_formula,
    ground_schema,
    parse_action,
)
from .pddl.semantics import State
from .resources import VARIANTS, base_domain, data_path, domain_with_operator, read_text

log = logging.getLogger(__name__)

SCENARIO_IR = "scenario_ir"
OPERATOR = "operator"
TARGET_KINDS = (SCENARIO_IR, OPERATOR)

DEFAULT_TEMPERATURE = 1.2
DEFAULT_MAX_REJECTIONS = 10
API_KEY_ENV = "OPENAI_API_KEY"
DEFAULT_BASE_URL = "https://api.openai.com/v1"
PROBE_COLORS = ("red", "yellow", "green")

_HEADERS = {
    SCENARIO_IR: "Translate each description of an obstacle course into a JSON world configuration.",
    OPERATOR: ("Translate each description of an obstacle course into a PDDL definition of the unlock "
               "action. Only the unlock action may change; reply with a single (:action unlock ...) form."),
}


class InvalidRequest(ValueError):
    pass


class TransportError(RuntimeError):
    pass


class AuthError(TransportError):
    pass


class RateLimited(TransportError):
    pass


class FixtureMissing(LookupError):
    pass


@dataclass(frozen=True)
class FewShotExample:
    text: str
    code: str
    variant: str = ""


@dataclass(frozen=True)
class TranslationRequest:
    stimulus_text: str
    few_shot_examples: tuple[FewShotExample, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_rejections: int = DEFAULT_MAX_REJECTIONS
    target_kind: str = SCENARIO_IR
    stimulus_id: str | None = None

    def __post_init__(self):
        if len(self.few_shot_examples) not in (2, 3):
            raise InvalidRequest(f"need 2 or 3 few-shot examples, got {len(self.few_shot_examples)}")
        if not self.temperature > 0:
            raise InvalidRequest("temperature must be positive")
        if self.max_rejections < 1:
            raise InvalidRequest("max_rejections must be at least 1")
        if self.target_kind not in TARGET_KINDS:
            raise InvalidRequest(f"unknown target kind '{self.target_kind}'")


@dataclass(frozen=True)
class ValidationReport:
    syntactic_pass: bool
    semantic_pass: bool
    executable_pass: bool
    failures: tuple[str, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.syntactic_pass and self.semantic_pass and self.executable_pass

    def as_dict(self) -> dict:
        return {"syntactic": self.syntactic_pass, "semantic": self.semantic_pass,
                "executable": self.executable_pass, "failures": list(self.failures)}


class RejectionBudgetExhausted(RuntimeError):
    def __init__(self, reports: Sequence[ValidationReport]):
        super().__init__(f"no valid translation in {len(reports)} attempts")
        self.reports = list(reports)


@dataclass(frozen=True)
class TranslationResult:
    code: str
    attempts: int
    reports: tuple[ValidationReport, ...]


@dataclass(frozen=True)
class ValidationContext:
    """What a translation is checked against.

    ``variant`` decides which key/lock pairs the operator probe expects to
    open; ``operator`` (PDDL text) is the dynamics used when a scenario
    record is sampled and compiled.
    """

    variant: str = "generic"
    colors: tuple[str, ...] = PROBE_COLORS
    operator: str | None = None
    seed: int = 0


# -- prompts -----------------------------------------------------------------


def build_prompt(request: TranslationRequest) -> str:
    """Few-shot prompt: the task line, one Input/output block per example, then the query."""
    blocks = [_HEADERS[request.target_kind]]
    for ex in request.few_shot_examples:
        blocks.append(f"Input:\n{ex.text.strip()}\n\noutput:\n{ex.code.strip()}")
    blocks.append(f"Input:\n{request.stimulus_text.strip()}\n\noutput:\n")
    return "\n\n".join(blocks)


def load_few_shot_pool(kind: str, path: Path | None = None) -> list[FewShotExample]:
    """Held-out (text, code) pairs shipped for ``kind``."""
    if kind not in TARGET_KINDS:
        raise InvalidRequest(f"unknown target kind '{kind}'")
    text = path.read_text(encoding="utf-8") if path else read_text("fewshot", f"{kind}.json")
    return [FewShotExample(r["text"], r["code"] if isinstance(r["code"], str) else json.dumps(r["code"]),
                           r.get("variant", "")) for r in json.loads(text)]


def sample_few_shot(pool: Sequence[FewShotExample], k: int, seed: int, variant: str | None = None,
                    exclude: Iterable[str] = ()) -> tuple[FewShotExample, ...]:
    """Draw ``k`` examples (seeded), preferring the requested variant when it has enough."""
    excluded = {e.strip() for e in exclude}
    candidates = [ex for ex in pool if ex.text.strip() not in excluded]
    if variant:
        same = [ex for ex in candidates if ex.variant == variant]
        if len(same) >= k:
            candidates = same
    if len(candidates) < k:
        raise InvalidRequest(f"few-shot pool has only {len(candidates)} usable examples")
    return tuple(random.Random(seed).sample(candidates, k))


# -- transports ----------------------------------------------------------------


class Transport(Protocol):
    def complete(self, prompt: str, *, temperature: float, request_id: str | None = None) -> str: ...


class FixtureTransport:
    """Replays canned completions keyed by request id.

    A key may map to one text (returned every time) or to a list, which is
    served in order and then repeats its last entry.
    """

    def __init__(self, responses: Mapping[str, str | Sequence[str]], default: str | Sequence[str] | None = None):
        self._responses = {k: [v] if isinstance(v, str) else list(v) for k, v in responses.items()}
        self._default = None if default is None else ([default] if isinstance(default, str) else list(default))
        self._served: dict[str | None, int] = {}
        self.calls: list[tuple[str | None, str]] = []

    def complete(self, prompt: str, *, temperature: float, request_id: str | None = None) -> str:
        seq = self._responses.get(request_id, self._default)
        if seq is None:
            raise FixtureMissing(f"no canned completion for '{request_id}'")
        i = self._served.get(request_id, 0)
        self._served[request_id] = i + 1
        self.calls.append((request_id, prompt))
        return seq[min(i, len(seq) - 1)]


class ChatCompletionTransport:
    """OpenAI-compatible chat-completion client with exponential backoff."""

    def __init__(self, model: str, *, base_url: str | None = None, api_key: str | None = None,
                 api_key_env: str = API_KEY_ENV, max_retries: int = 5, backoff: float = 1.0,
                 max_backoff: float = 30.0, timeout: float = 60.0, client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.model = model
        self.base_url = (base_url or os.environ.get("OPENAI_BASE_URL") or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(api_key_env, "")
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep

    def complete(self, prompt: str, *, temperature: float, request_id: str | None = None) -> str:
        if not self.api_key:
            raise AuthError(f"no API key: set {self.api_key_env}")
        body = {"model": self.model, "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}]}
        headers = {"Authorization": f"Bearer {self.api_key}"}
        last = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(min(self.max_backoff, self.backoff * 2 ** (attempt - 1)))
            try:
                resp = self.client.post(f"{self.base_url}/chat/completions", json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = f"network error: {exc}"
                log.warning("request %s attempt %d failed: %s", request_id, attempt + 1, last)
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("request %s attempt %d failed: %s", request_id, attempt + 1, last)
                if resp.status_code == 429 and attempt == self.max_retries:
                    raise RateLimited(f"still rate limited after {self.max_retries} retries")
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from None
        raise TransportError(f"giving up after {self.max_retries} retries ({last})")


def request_translation(request: TranslationRequest, transport: Transport) -> str:
    return transport.complete(build_prompt(request), temperature=request.temperature,
                              request_id=request.stimulus_id)


# -- validation ---------------------------------------------------------------------


def validate_translation(raw: str, target_kind: str, context: ValidationContext | None = None) -> ValidationReport:
    """Check a completion at three levels: it parses, it is well formed, and it runs."""
    context = context or ValidationContext()
    if target_kind == SCENARIO_IR:
        return _validate_scenario(raw, context)
    if target_kind == OPERATOR:
        return _validate_operator(raw, context)
    raise InvalidRequest(f"unknown target kind '{target_kind}'")


def _strip_fences(raw: str) -> str:
    text = raw.strip()
    if text.startswith("```"):
        lines = text.splitlines()[1:]
        if lines and lines[-1].strip().startswith("```"):
            lines = lines[:-1]
        text = "\n".join(lines)
    return text.strip()


def _validate_scenario(raw: str, context: ValidationContext) -> ValidationReport:
    from .worldgen import (
        ConsistencyError,
        SamplingExhausted,
        SchemaError,
        compile_to_problem,
        parse_scenario_ir,
        sample_map,
    )

    text = _strip_fences(raw)
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        return ValidationReport(False, False, False, (f"not JSON: {exc}",))
    if not isinstance(record, dict):
        return ValidationReport(False, False, False, ("not a JSON object",))
    try:
        ir = parse_scenario_ir(record)
    except (SchemaError, ConsistencyError) as exc:
        return ValidationReport(True, False, False, (str(exc),))
    try:
        domain = domain_with_operator(context.operator, ir.dynamics_variant)
        sample = sample_map(ir, context.seed, domain)
        compile_to_problem(ir, sample, domain)
    except (SamplingExhausted, PddlSyntaxError, SemanticError, ValueError) as exc:
        return ValidationReport(True, True, False, (f"{type(exc).__name__}: {exc}",))
    return ValidationReport(True, True, True)


def _validate_operator(raw: str, context: ValidationContext) -> ValidationReport:
    text = _strip_fences(raw)
    base = base_domain()
    try:
        schema = parse_action(text, base)
    except PddlSyntaxError as exc:
        return ValidationReport(False, False, False, (str(exc),))
    except SemanticError as exc:
        return ValidationReport(True, False, False, (str(exc),))
    failures = []
    if schema.name != "unlock":
        failures.append(f"expected the unlock action, got '{schema.name}'")
    types = [t for _, t in schema.parameters]
    for needed in ("agent", "key", "door"):
        if needed not in types:
            failures.append(f"unlock needs a parameter of type {needed}")
    if failures:
        return ValidationReport(True, False, False, tuple(failures))
    failures = operator_probe(schema, context.variant, context.colors)
    return ValidationReport(True, True, not failures, tuple(failures))


def expected_to_open(variant: str, key_color: str, lock_color: str) -> bool:
    if variant == "color_same":
        return key_color == lock_color
    if variant == "color_different":
        return key_color != lock_color
    return True


def probe_problem(schema: ActionSchema, key_color: str, lock_color: str) -> tuple[ProblemInstance, State]:
    """3x3 probe: the agent in the centre holds one key, a locked door is directly North."""
    domain = base_domain().with_action(schema)
    objects = {"agent": "agent", "probe-key": "key", "probe-door": "door"}
    objects.update({c: "color" for c in dict.fromkeys((key_color, lock_color))})
    facts = {("has", "agent", "probe-key"), ("locked", "probe-door"),
             ("iscolor", "probe-key", key_color), ("iscolor", "probe-door", lock_color)}
    fluents = {("xloc", "agent"): 1, ("yloc", "agent"): 1, ("xloc", "probe-key"): 1, ("yloc", "probe-key"): 1,
               ("xloc", "probe-door"): 1, ("yloc", "probe-door"): 0, ("picked", "agent"): 1}
    problem = ProblemInstance(domain, objects, frozenset(facts), fluents, {}, GridSpec(3, 3, frozenset()))
    return problem, problem.initial_state()


def operator_probe(schema: ActionSchema, variant: str, colors: Sequence[str] = PROBE_COLORS) -> list[str]:
    """Disagreements between ``schema`` and the variant's rule on every (key, lock) colour pair."""
    if variant not in VARIANTS:
        return [f"unknown dynamics variant '{variant}'"]
    failures, any_open = [], False
    for key_color in colors:
        for lock_color in colors:
            problem, state = probe_problem(schema, key_color, lock_color)
            opened = any(eval_formula(state, inst.precondition) for inst in ground_schema(schema, problem))
            any_open |= opened
            want = expected_to_open(variant, key_color, lock_color)
            if opened != want:
                verb = "opens" if opened else "does not open"
                failures.append(f"a {key_color} key {verb} a {lock_color} lock under the {variant} rule")
    if not any_open:
        failures.append("no unlock instance is applicable on any probe state")
    return failures


# -- rejection sampling ----------------------------------------------------------------


def translate_with_rejection(request: TranslationRequest, transport: Transport,
                             context: ValidationContext | None = None,
                             log_dir: Path | None = None) -> TranslationResult:
    """Sample completions until one validates or ``max_rejections`` attempts are used."""
    reports: list[ValidationReport] = []
    prompt = build_prompt(request)
    for attempt in range(1, request.max_rejections + 1):
        raw = transport.complete(prompt, temperature=request.temperature, request_id=request.stimulus_id)
        report = validate_translation(raw, request.target_kind, context)
        reports.append(report)
        if log_dir is not None:
            _log_attempt(log_dir, request, prompt, raw, attempt, report)
        if report.accepted:
            return TranslationResult(_strip_fences(raw), attempt, tuple(reports))
    raise RejectionBudgetExhausted(reports)


def _log_attempt(log_dir: Path, request: TranslationRequest, prompt: str, raw: str, attempt: int,
                 report: ValidationReport) -> None:
    log_dir.mkdir(parents=True, exist_ok=True)
    entry = {"stimulus_id": request.stimulus_id, "target": request.target_kind, "attempt": attempt,
             "temperature": request.temperature, "prompt": prompt, "completion": raw,
             "report": report.as_dict()}
    with open(log_dir / "translations.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


# -- fixtures ----------------------------------------------------------------------


@dataclass(frozen=True)
class Fixture:
    stimulus_id: str
    scenario: str
    operator: str | None = None


@dataclass
class FixtureStore:
    """Pre-validated translations, laid out as ``<root>/<stimulus_id>/scenario.json`` (+ ``operator.pddl``)."""

    root: Path
    fixtures: dict[str, Fixture] = field(default_factory=dict)

    @classmethod
    def load(cls, root: Path | str | None = None) -> "FixtureStore":
        root = Path(root) if root is not None else data_path("fixtures")
        if not root.is_dir():
            raise FixtureMissing(f"fixtures directory '{root}' does not exist")
        store = cls(root)
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            scenario = sub / "scenario.json"
            if not scenario.exists():
                continue
            operator = sub / "operator.pddl"
            store.fixtures[sub.name] = Fixture(
                sub.name, scenario.read_text(encoding="utf-8"),
                operator.read_text(encoding="utf-8") if operator.exists() else None)
        return store

    def __contains__(self, stimulus_id: str) -> bool:
        return stimulus_id in self.fixtures

    def get(self, stimulus_id: str) -> Fixture:
        try:
            return self.fixtures[stimulus_id]
        except KeyError:
            raise FixtureMissing(f"no fixture for stimulus '{stimulus_id}' under {self.root}") from None

    def transport(self, kind: str = SCENARIO_IR) -> FixtureTransport:
        if kind == SCENARIO_IR:
            return FixtureTransport({k: f.scenario for k, f in self.fixtures.items()})
        return FixtureTransport({k: f.operator for k, f in self.fixtures.items() if f.operator})
