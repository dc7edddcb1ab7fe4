"""Command-line interface: ``invplan {infer,eval,baseline,plan,sample-map}``.

Exit codes: 0 success, 1 usage, 2 schema or parse errors (including a
missing fixture), 3 sampling, planning or inference failures, 4 transport
failures, 5 anything else.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .evaluation import (
    DEFAULT_BASELINE_SAMPLES,
    DEFAULT_BOOTSTRAP,
    LiveTranslator,
    SampleBudgetExhausted,
    StimulusError,
    StimulusRecord,
    all_reports,
    emit_plot_data,
    exclude_participants,
    llm_baseline_judgments,
    load_baseline_transcripts,
    load_corpus,
    load_human_csv,
    model_judgments,
    prepare_from_text,
    prepare_stimulus,
)
from .infer import (
    AllGoalsUnreachable,
    GoalUnreachableFromState,
    HorizonExceeded,
    InapplicableSequence,
    InferenceConfig,
    StateSpaceTooLarge,
    ZeroEvidence,
    posterior,
    world_for,
)
from .pddl import IllegalEffect, PddlSyntaxError, SemanticError, UnboundVariable, UnknownFluent
from .planner import format_plan
from .translate import (
    API_KEY_ENV,
    DEFAULT_MAX_REJECTIONS,
    DEFAULT_TEMPERATURE,
    AuthError,
    ChatCompletionTransport,
    FixtureMissing,
    FixtureStore,
    FixtureTransport,
    RejectionBudgetExhausted,
    TransportError,
)
from .worldgen import CompileError, ConsistencyError, SamplingExhausted, SchemaError

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_SAMPLING, EXIT_TRANSPORT, EXIT_INTERNAL = 0, 1, 2, 3, 4, 5
MODEL_ENV = "INVPLAN_LLM_MODEL"

_FAMILIES: tuple[tuple[tuple[type, ...], int], ...] = (
    ((TransportError, SampleBudgetExhausted), EXIT_TRANSPORT),
    ((SchemaError, ConsistencyError, PddlSyntaxError, SemanticError, FixtureMissing, CompileError,
      RejectionBudgetExhausted, UnboundVariable, UnknownFluent, IllegalEffect), EXIT_SCHEMA),
    ((SamplingExhausted, AllGoalsUnreachable, GoalUnreachableFromState, HorizonExceeded, InapplicableSequence,
      ZeroEvidence, StateSpaceTooLarge), EXIT_SAMPLING),
)

log = logging.getLogger("invplan")


class UsageError(Exception):
    pass


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StimulusError):
        exc = exc.cause
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    for types, code in _FAMILIES:
        if isinstance(exc, types):
            return code
    return EXIT_INTERNAL


# -- manifest ---------------------------------------------------------------------


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Record of one command run, written when it starts and rewritten when it ends."""

    command: str
    config: dict[str, Any]
    seed: int
    out_dir: Path
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    started: str = field(default_factory=_now)
    finished: str | None = None
    status: str = "running"
    exit_code: int | None = None

    @property
    def path(self) -> Path:
        return self.out_dir / "manifest.json"

    def add_input(self, label: str, path: Path) -> None:
        path = Path(path)
        if path.is_dir():
            h = hashlib.sha256()
            for f in sorted(p for p in path.rglob("*") if p.is_file()):
                h.update(str(f.relative_to(path)).encode())
                h.update(f.read_bytes())
            self.inputs[label] = h.hexdigest()
        elif path.exists():
            self.inputs[label] = sha256_file(path)

    def write_output(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        atomic_write(path, text)
        if name not in self.outputs:
            self.outputs.append(name)
        return path

    def as_dict(self) -> dict:
        return {"tool": "invplan", "version": __version__, "command": self.command, "config": self.config,
                "seed": self.seed, "started": self.started, "finished": self.finished,
                "status": self.status, "exit_code": self.exit_code, "inputs": self.inputs,
                "outputs": sorted(self.outputs)}

    def save(self) -> None:
        atomic_write(self.path, json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n")

    def finish(self, exit_code: int) -> None:
        self.exit_code = exit_code
        self.status = "ok" if exit_code == 0 else "failed"
        self.finished = _now()
        self.save()


# -- argument parsing ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *, inference: bool = True, llm: bool = True) -> None:
    g = p.add_argument_group("run options")
    g.add_argument("--seed", type=int, default=0, help="seed for every random choice (default: 0)")
    g.add_argument("--out", type=Path, default=None,
                   help="output directory (default: ./invplan-runs/<command>)")
    g.add_argument("--fixtures", type=Path, default=None,
                   help="fixtures directory with <stimulus_id>/scenario.json (default: the shipped fixtures)")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    if inference:
        g.add_argument("--beta", type=float, default=InferenceConfig.beta,
                       help=f"Boltzmann rationality (inverse temperature), > 0 (default: {InferenceConfig.beta})")
        g.add_argument("--epsilon-floor", type=float, default=InferenceConfig.epsilon_floor,
                       help="probability given to observations impossible under a goal "
                            f"(default: {InferenceConfig.epsilon_floor})")
        g.add_argument("--subgoal-horizon", type=int, default=InferenceConfig.subgoal_horizon,
                       help=f"macro steps explored for state conditions (default: {InferenceConfig.subgoal_horizon})")
    if llm:
        g.add_argument("--live", action="store_true",
                       help=f"call a chat-completion endpoint instead of fixtures (API key from ${API_KEY_ENV})")
        g.add_argument("--llm-model", default=None,
                       help=f"model name for --live (default: ${MODEL_ENV}); required with --live")
        g.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE,
                       help=f"sampling temperature for translation (default: {DEFAULT_TEMPERATURE})")
        g.add_argument("--max-rejections", type=int, default=DEFAULT_MAX_REJECTIONS,
                       help=f"translation attempts before giving up (default: {DEFAULT_MAX_REJECTIONS})")
        g.add_argument("--samples", type=int, default=DEFAULT_BASELINE_SAMPLES,
                       help=f"well-formed baseline answers per stimulus (default: {DEFAULT_BASELINE_SAMPLES})")
        g.add_argument("--bootstrap-samples", type=int, default=DEFAULT_BOOTSTRAP,
                       help=f"bootstrap resamples for confidence intervals (default: {DEFAULT_BOOTSTRAP})")


def _target(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--stimulus", help="stimulus id from the corpus (e.g. spatial_04)")
    g.add_argument("--scenario", type=Path, help="path to a scenario record (JSON)")
    p.add_argument("--operator", type=Path, default=None, help="unlock operator (PDDL) to use with --scenario")
    p.add_argument("--corpus", type=Path, default=None, help="corpus file (default: the shipped corpus)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invplan", description="Goal inference for gameshow scenarios by inverse planning.")
    parser.add_argument("--version", action="version", version=f"invplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("infer", help="posterior over trophies for one stimulus or scenario")
    _target(p)
    _common(p)

    p = sub.add_parser("eval", help="model judgments correlated with human ratings")
    p.add_argument("--corpus", type=Path, default=None, help="corpus file (default: the shipped corpus)")
    p.add_argument("--human", type=Path, required=True,
                   help="CSV with participant_id,stimulus_id,trophy,rating")
    p.add_argument("--exclude-participants", type=float, nargs="?", const=0.3, default=None, metavar="SHARE",
                   help="drop participants whose MAP answers match the consensus less than SHARE of the time "
                        "(default share when given: 0.3)")
    _common(p)

    p = sub.add_parser("baseline", help="zero-shot LLM ratings for each stimulus")
    p.add_argument("--corpus", type=Path, default=None, help="corpus file (default: the shipped corpus)")
    p.add_argument("--transcripts", type=Path, default=None,
                   help="canned answers keyed by stimulus id, used without --live (default: shipped example)")
    p.add_argument("--template", type=Path, default=None, help="prompt template with {stimulus} and {answer_format}")
    _common(p, inference=False)

    p = sub.add_parser("plan", help="optimal plan to one trophy (one action per line)")
    _target(p)
    p.add_argument("--goal", required=True, help="trophy label")
    _common(p, llm=False)

    p = sub.add_parser("sample-map", help="ASCII rendering of the sampled map")
    _target(p)
    _common(p, inference=False, llm=False)
    return parser


def _config(args) -> InferenceConfig:
    try:
        return InferenceConfig(beta=args.beta, epsilon_floor=args.epsilon_floor,
                               subgoal_horizon=args.subgoal_horizon)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _effective(args) -> dict[str, Any]:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k not in ("func", "verbose")}


def _fixtures(args) -> FixtureStore:
    return FixtureStore.load(args.fixtures)


def _translator(args) -> LiveTranslator | None:
    if not getattr(args, "live", False):
        return None
    return LiveTranslator(_live_transport(args), args.temperature, args.max_rejections, args.seed,
                          log_dir=_out(args) / "translations")


def _live_transport(args) -> ChatCompletionTransport:
    model = args.llm_model or os.environ.get(MODEL_ENV)
    if not model:
        raise UsageError(f"--live needs --llm-model or ${MODEL_ENV}")
    if not os.environ.get(API_KEY_ENV):
        raise AuthError(f"no API key: set {API_KEY_ENV}")
    return ChatCompletionTransport(model)


def _out(args) -> Path:
    return args.out if args.out is not None else Path("invplan-runs") / args.command


def _find_stimulus(corpus: Sequence[StimulusRecord], sid: str) -> StimulusRecord:
    for s in corpus:
        if s.id == sid:
            return s
    raise FixtureMissing(f"stimulus '{sid}' is not in the corpus")


def _prepare(args, manifest: RunManifest, config: InferenceConfig | None = None):
    cost = config.action_cost if config else 1.0
    if args.scenario is not None:
        manifest.add_input("scenario", args.scenario)
        operator = None
        if args.operator is not None:
            manifest.add_input("operator", args.operator)
            operator = args.operator.read_text(encoding="utf-8")
        return prepare_from_text(args.scenario.stem, args.scenario.read_text(encoding="utf-8"), operator,
                                 args.seed, cost)
    corpus = load_corpus(args.corpus)
    stimulus = _find_stimulus(corpus, args.stimulus)
    translator = _translator(args) if hasattr(args, "live") else None
    store = None
    if translator is None:
        store = _fixtures(args)
        manifest.add_input("fixture", store.root / stimulus.fixture)
    return prepare_stimulus(stimulus, store, args.seed, translator, cost)


# -- commands -----------------------------------------------------------------------------


def cmd_infer(args, manifest: RunManifest, out) -> int:
    config = _config(args)
    prepared = _prepare(args, manifest, config)
    post = posterior(prepared.problem, prepared.observation, config)
    record = {"stimulus_id": prepared.stimulus_id, "posterior": post.mass, "config": config.as_dict(),
              "seed": args.seed}
    manifest.write_output("posterior.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("stimulus_id", "trophy", "probability", "beta", "epsilon_floor"))
    for g, p in post.mass.items():
        w.writerow((prepared.stimulus_id, g, repr(p), config.beta, config.epsilon_floor))
    manifest.write_output("posterior.csv", buf.getvalue())
    for g, p in post.mass.items():
        print(f"{g}\t{p:.6f}", file=out)
    return EXIT_OK


def cmd_eval(args, manifest: RunManifest, out) -> int:
    config = _config(args)
    corpus = load_corpus(args.corpus)
    manifest.add_input("human", args.human)
    if args.corpus:
        manifest.add_input("corpus", args.corpus)
    human = load_human_csv(args.human, corpus)
    if args.exclude_participants is not None:
        human, dropped = exclude_participants(human, args.exclude_participants)
        print(f"excluded {len(dropped)} participant(s)", file=out)
    translator = _translator(args)
    store = None if translator else _fixtures(args)
    if store is not None:
        manifest.add_input("fixtures", store.root)
    values = model_judgments(corpus, store, config, args.seed, translator)
    rows = [("stimulus_id", "trophy", "probability")] + [(s, g, repr(p)) for (s, g), p in values.items()]
    manifest.write_output("model_judgments.csv", "".join(",".join(map(str, r)) + "\n" for r in rows))
    missing: dict[str, str] = {}
    reports = all_reports(values, human, corpus, args.bootstrap_samples, args.seed,
                          on_missing=lambda scope, exc: missing.__setitem__(scope, str(exc)))
    for scope, report in reports.items():
        manifest.write_output(f"report_{scope}.json", json.dumps(report.as_dict(), indent=2) + "\n")
        manifest.write_output(f"scatter_{scope}.csv", emit_plot_data(report, corpus))
        print(f"{scope}\tR={report.pearson_r:.3f}\t95% CI=({report.ci_low:.3f}, {report.ci_high:.3f})"
              f"\tn={report.n_pairs}", file=out)
    for scope, message in missing.items():
        print(f"{scope}\tInsufficientPairs: {message}", file=out)
    summary = {"reports": {s: {"pearson_r": r.pearson_r, "ci_low": r.ci_low, "ci_high": r.ci_high,
                               "n_pairs": r.n_pairs} for s, r in reports.items()},
               "insufficient_pairs": missing}
    manifest.write_output("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_baseline(args, manifest: RunManifest, out) -> int:
    corpus = load_corpus(args.corpus)
    template = args.template.read_text(encoding="utf-8") if args.template else None
    if args.live:
        transport = _live_transport(args)
    else:
        transcripts = load_baseline_transcripts(args.transcripts)
        if args.transcripts:
            manifest.add_input("transcripts", args.transcripts)
        corpus = [s for s in corpus if s.id in transcripts]
        if not corpus:
            raise FixtureMissing("no transcripts for any corpus stimulus")
        transport = FixtureTransport(transcripts)
    result = llm_baseline_judgments(corpus, transport, args.samples, template=template)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("stimulus_id", "trophy", "mean_rating", "n_samples", "n_rejected"))
    for (sid, g), m in result.means.items():
        w.writerow((sid, g, repr(m), len(result.samples[sid]), result.rejected[sid]))
    manifest.write_output("baseline_means.csv", buf.getvalue())
    raw = "".join(json.dumps({"stimulus_id": sid, "sample": i + 1, "text": t}) + "\n"
                  for sid, texts in result.raw.items() for i, t in enumerate(texts))
    manifest.write_output("baseline_samples.jsonl", raw)
    for (sid, g), m in result.means.items():
        print(f"{sid}\t{g}\t{m:g}", file=out)
    return EXIT_OK


def cmd_plan(args, manifest: RunManifest, out) -> int:
    config = _config(args)
    prepared = _prepare(args, manifest, config)
    goal = args.goal.lower()
    if goal not in prepared.problem.goals:
        raise UsageError(f"unknown goal '{args.goal}'; choose from {', '.join(prepared.problem.goals)}")
    world = world_for(prepared.problem, config)
    result = world.plan(world.initial_state(), prepared.problem.goals[goal])
    text = format_plan(result) + "\n"
    manifest.write_output(f"plan_{goal}.txt", text)
    out.write(text)
    return EXIT_OK


def cmd_sample_map(args, manifest: RunManifest, out) -> int:
    prepared = _prepare(args, manifest)
    text = prepared.map.render() + "\n"
    manifest.write_output("map.txt", text)
    manifest.write_output("map.json", json.dumps(prepared.map.to_json(), indent=2) + "\n")
    out.write(text)
    return EXIT_OK


COMMANDS = {"infer": cmd_infer, "eval": cmd_eval, "baseline": cmd_baseline, "plan": cmd_plan,
            "sample-map": cmd_sample_map}


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    manifest = RunManifest(args.command, _effective(args), args.seed, _out(args))
    try:
        manifest.save()
    except OSError as exc:
        print(f"invplan: cannot write to {manifest.out_dir}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code = COMMANDS[args.command](args, manifest, out)
    except Exception as exc:  # map every failure onto its exit-code family
        code = exit_code_for(exc)
        name = type(exc.cause if isinstance(exc, StimulusError) else exc).__name__
        print(f"invplan: {name}: {exc}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            log.exception("internal error")
    manifest.finish(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
