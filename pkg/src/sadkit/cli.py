"""``sadkit`` command line: synthesize, run, report, validate.

Output layout under ``output_dir``::

    subset.json                    ids kept after budget downsampling
    audio/<source>/manifest.jsonl  synthesized audio per engine source
    runs/<mode>__<engine>__<unit>/ one directory per run
    report.json, report.md         written by ``report``

Failures print one JSON line to stderr and exit with a code from :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from .corpus import (
    CorpusError,
    downsample_to_budget,
    load_corpus,
    make_split_plan,
    read_interchange,
    select_target_text,
    validate_corpus,
)
from .corpus.types import CorpusDescriptor, Sample
from .modeling.encoders import BackendUnavailable, EncoderError
from .modeling.fusion import FusionConfig, Mode
from .runs import collect_runs, is_complete, run_name
from .spec import ExperimentSpec, SpecError, load_spec
from .stats import ReportError, aggregate_all, build_report, render_markdown, report_json, significance_tests
from .synthesis import BudgetExceeded, CredentialsError, ManifestStore, estimate_cost, make_engine, synthesize_corpus
from .training import (
    AudioSource,
    ConfigError,
    ManifestGap,
    TrainConfig,
    TrainingError,
    experiment_grid,
    run_experiment,
)

log = logging.getLogger("sadkit")

EXIT_CODES = {
    "internal": 1,
    "spec_invalid": 2,
    "synthesis_aborted": 3,
    "credentials_missing": 4,
    "manifest_gap": 5,
    "backend_unavailable": 6,
    "corpus_invalid": 7,
    "empty_results": 8,
    "baseline_missing": 9,
    "training_failed": 10,
    "usage": 64,
}


class CliError(Exception):
    def __init__(self, kind: str, message: str, **details) -> None:
        super().__init__(message)
        self.kind = kind
        self.details = details

    @property
    def code(self) -> int:
        return EXIT_CODES[self.kind]


def _fail(err: CliError) -> int:
    payload = {"error": err.kind, "exit_code": err.code, "message": " ".join(str(err).split()), **err.details}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return err.code


# --- spec and corpus helpers ----------------------------------------------------

def _spec(args: argparse.Namespace) -> ExperimentSpec:
    try:
        spec = load_spec(args.spec)
    except SpecError as exc:
        raise CliError("spec_invalid", str(exc)) from None
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "output_dir", None) is not None:
        overrides["output_dir"] = args.output_dir
    if overrides:
        spec = ExperimentSpec.model_validate({**spec.model_dump(), **overrides})
    return spec


def _check_writable(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=directory, prefix=".probe-"):
            pass
    except OSError as exc:
        raise CliError("spec_invalid", f"output_dir {directory} is not writable ({exc.strerror})") from None


def _load(spec: ExperimentSpec) -> tuple[CorpusDescriptor, list[Sample]]:
    try:
        if spec.corpus.format == "interchange":
            return read_interchange(spec.corpus.name, spec.corpus.path)
        return load_corpus(spec.corpus.name, spec.corpus.path)
    except (CorpusError, OSError) as exc:
        raise CliError("corpus_invalid", str(exc)) from None


def _subset(spec: ExperimentSpec, descriptor: CorpusDescriptor, samples: list[Sample]) -> list[Sample]:
    """Budget downsampling; deterministic in (spec, seed) so ``run`` rebuilds what ``synthesize`` chose."""
    try:
        return downsample_to_budget(
            samples, spec.budget, spec.cost_rate, spec.seed,
            text_of=lambda s: select_target_text(s, descriptor), stratify=spec.stratify,
        )
    except CorpusError as exc:
        raise CliError("corpus_invalid", str(exc)) from None


def _manifest_path(spec: ExperimentSpec, source: str) -> Path:
    return Path(spec.output_dir) / "audio" / source / "manifest.jsonl"


# --- subcommands ------------------------------------------------------------------

def cmd_synthesize(args: argparse.Namespace) -> int:
    spec = _spec(args)
    descriptor, samples = _load(spec)
    subset = _subset(spec, descriptor, samples)
    items = [(s.id, select_target_text(s, descriptor)) for s in subset]
    planned = estimate_cost([t for _, t in items], spec.cost_rate)
    print(f"{descriptor.title}: {len(subset)}/{len(samples)} samples selected, "
          f"{sum(len(t) for _, t in items)} characters, estimated cost {planned:.4f} per engine")
    if args.dry_run:
        for cfg in spec.engines:
            print(f"would synthesize with {cfg.source} engine {cfg.model_name}/{cfg.voice}")
        return 0
    if not spec.engines:
        raise CliError("spec_invalid", "synthesize needs at least one engine in the spec")

    out = Path(spec.output_dir)
    _check_writable(out)
    # fail on credentials before any request goes out
    engines = {}
    for cfg in spec.engines:
        try:
            engines[cfg.source] = make_engine(cfg)
        except CredentialsError as exc:
            raise CliError("credentials_missing", str(exc), engine=cfg.engine_id) from None
    (out / "subset.json").write_text(json.dumps(sorted(s.id for s in subset), indent=1) + "\n", encoding="utf-8")

    problems = []
    for cfg in spec.engines:
        store = ManifestStore(_manifest_path(spec, cfg.source))
        try:
            result = synthesize_corpus(items, cfg, store, rate=spec.cost_rate, budget=spec.budget,
                                       parallelism=spec.parallelism, engine=engines[cfg.source])
        except BudgetExceeded as exc:
            result = exc.result
            problems.append(f"{cfg.source}: {exc}")
        print(f"{cfg.source} ({cfg.model_name}/{cfg.voice}): {result.summary()}")
        if result.failures:
            problems.append(f"{cfg.source}: {result.failures} samples failed")
    if problems:
        raise CliError("synthesis_aborted", "; ".join(problems) + " (partial manifest kept; rerun to resume)")
    return 0


def _sources(spec: ExperimentSpec, descriptor: CorpusDescriptor, subset: list[Sample], needed: set[str]) -> dict:
    sources = {}
    for name in sorted(needed):
        if name == "gold":
            sources[name] = AudioSource.gold(subset)
            continue
        path = _manifest_path(spec, name)
        if not path.exists():
            raise CliError("manifest_gap", f"no {name} manifest at {path}; run `sadkit synthesize` first",
                           source=name, missing=[s.id for s in subset][:20])
        sources[name] = AudioSource.from_manifest(name, ManifestStore(path))
    for name, src in sources.items():
        missing = sorted(s.id for s in subset if s.id not in src.paths)
        if missing:
            raise CliError("manifest_gap", f"{name} audio missing for {len(missing)} samples", source=name,
                           missing=missing[:20])
    return sources


def cmd_run(args: argparse.Namespace) -> int:
    spec = _spec(args)
    descriptor, samples = _load(spec)
    subset = _subset(spec, descriptor, samples)
    try:
        plan = make_split_plan(descriptor, subset, spec.seed)
    except CorpusError as exc:
        raise CliError("corpus_invalid", str(exc)) from None
    grid = experiment_grid(spec.modes, spec.sources)
    names = [run_name(m.value, src, u) for m, src in grid for u in plan.units()]
    if len(set(names)) != len(names):
        raise CliError("spec_invalid", "run directory names collide; check modes and audio_sources")
    runs_dir = Path(spec.output_dir) / "runs"
    pending = [n for n in names if not is_complete(runs_dir / n)]
    if args.dry_run:
        print(f"{descriptor.title}: {len(subset)} samples, {plan.strategy.value} plan ({', '.join(plan.units())})")
        for n in names:
            print(f"{'run ' if n in pending else 'done'} {n}")
        print(f"{len(pending)} runs to execute, {len(names) - len(pending)} already complete")
        return 0

    _check_writable(runs_dir)
    sources = _sources(spec, descriptor, subset, {src for m, src in grid if m.uses_audio})
    train = spec.train
    for mode, src in grid:
        fusion = FusionConfig.for_labels(mode, descriptor.label_spec)
        cfg = TrainConfig.for_labels(descriptor.label_spec.kind, epochs=train.epochs,
                                     learning_rate=train.learning_rate, batch_size=train.batch_size,
                                     seed=spec.seed, freeze_encoders=train.freeze_encoders)
        try:
            run_experiment(descriptor, subset, sources.get(src), fusion, plan, cfg, backend=spec.backend,
                           text_model=spec.text_model, audio_model=spec.audio_model, out_dir=runs_dir,
                           window=spec.window_seconds, keep_checkpoints=spec.keep_checkpoints)
        except BackendUnavailable as exc:
            raise CliError("backend_unavailable", str(exc)) from None
        except ManifestGap as exc:
            raise CliError("manifest_gap", str(exc), missing=exc.missing[:20]) from None
        except ConfigError as exc:
            raise CliError("spec_invalid", str(exc)) from None
        except (TrainingError, EncoderError) as exc:
            raise CliError("training_failed", str(exc)) from None
    print(f"{len(pending)} new runs executed, {len(names) - len(pending)} skipped (already complete)")
    return 0


def _labels(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key or not value:
            raise CliError("usage", f"--label expects SOURCE=NAME, got {pair!r}")
        out[key] = value
    return out


def cmd_report(args: argparse.Namespace) -> int:
    results = Path(args.results)
    runs = collect_runs(results) if results.is_dir() else []
    if not runs:
        raise CliError("empty_results", f"no completed runs under {results}")
    try:
        report = build_report(aggregate_all(runs), significance_tests(runs), engine_labels=_labels(args.label))
    except ReportError as exc:
        raise CliError("baseline_missing", str(exc)) from None
    out = Path(args.output_dir) if args.output_dir else results
    if args.dry_run:
        print(render_markdown(report), end="")
        return 0
    _check_writable(out)
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    (out / "report.md").write_text(render_markdown(report), encoding="utf-8")
    print(f"{len(runs)} runs, {len(report['rows'])} corpora -> {out / 'report.json'}, {out / 'report.md'}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    spec = _spec(args)
    descriptor, samples = _load(spec)
    violations = validate_corpus(descriptor, samples)
    for v in violations:
        print(v)
    if violations:
        raise CliError("corpus_invalid", f"{len(violations)} violations in {descriptor.title}",
                       count=len(violations))
    print(f"{descriptor.title}: {len(samples)} samples OK")
    return 0


# --- argument parsing -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise CliError("usage", f"{self.prog}: {message}")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default, help="override the spec seed")
    p.add_argument("--output-dir", default=default, help="override the spec output directory")
    p.add_argument("--dry-run", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="print the planned grid and cost without side effects")
    p.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="print the effective spec as YAML and exit")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sadkit", description="Synthetic audio data experiments.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn, help_ in (
        ("synthesize", cmd_synthesize, "synthesize audio for the budgeted subset"),
        ("run", cmd_run, "run the experiment grid (resumable)"),
        ("validate", cmd_validate, "check the spec and the corpus"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("spec", help="experiment spec (YAML)")
        _global_flags(p, suppress=True)
        p.set_defaults(func=fn)
    p = sub.add_parser("report", help="aggregate runs into report.json and report.md")
    p.add_argument("results", help="directory containing run directories")
    p.add_argument("--label", action="append", default=[], metavar="SOURCE=NAME",
                   help="column label for an audio source, e.g. local=Matcha")
    _global_flags(p, suppress=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.print_config:
            if not hasattr(args, "spec"):
                raise CliError("usage", "--print-config needs a spec file")
            print(_spec(args).to_yaml(), end="")
            return 0
        return args.func(args)
    except CliError as err:
        return _fail(err)
    except KeyboardInterrupt:
        return _fail(CliError("internal", "interrupted"))
    except Exception as exc:  # noqa: BLE001 - last-resort summary line
        log.debug("unexpected failure", exc_info=True)
        return _fail(CliError("internal", f"{type(exc).__name__}: {exc}"))


if __name__ == "__main__":
    sys.exit(main())
