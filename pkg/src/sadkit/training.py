"""Fixed fine-tuning recipe and the per-seed / per-fold experiment runner.

No early stopping, no search: every run trains for exactly ``epochs`` passes
(shuffled with the run seed) and is scored at the last epoch.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import torch
from torch import nn

from .audio import DEFAULT_RATE, DEFAULT_WINDOW, featurize_file
from .corpus.ops import select_target_text
from .corpus.types import CorpusDescriptor, LabelKind, LabelSpec, Sample, SplitPlan, SplitStrategy
from .modeling.fusion import FusionConfig, HeadKind, Mode, SADModel, build_model, predict_label, save_checkpoint
from .runs import RunResult, is_complete, read_run, run_name, write_run
from .stats.metrics import compute_metric

log = logging.getLogger(__name__)


class TrainingError(Exception):
    pass


class ConfigError(TrainingError):
    pass


class ManifestGap(TrainingError):
    def __init__(self, source: str, missing: Sequence[str]) -> None:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        super().__init__(f"{source} audio missing for {len(missing)} samples: {shown}")
        self.missing = list(missing)


class TrainingDiverged(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 2e-5
    batch_size: int = 1
    loss: str = "mse"  # mse | cross_entropy
    seed: int = 0
    freeze_encoders: bool = False

    def __post_init__(self) -> None:
        if self.loss not in ("mse", "cross_entropy"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate < 0:
            raise ConfigError("epochs and batch_size must be positive, learning_rate non-negative")

    @classmethod
    def for_labels(cls, kind: LabelKind, **overrides) -> "TrainConfig":
        loss = "mse" if kind is LabelKind.CONTINUOUS else "cross_entropy"
        return cls(loss=loss, **overrides)


@dataclass(frozen=True)
class Example:
    id: str
    text: Optional[str]
    audio_path: Optional[str]
    target: float  # regression value or class id


@lru_cache(maxsize=256)
def _cached_features(path: str, window: float, rate: int) -> torch.Tensor:
    return torch.from_numpy(featurize_file(path, window, rate).frames)


def _features(ex: Example, window: float = DEFAULT_WINDOW) -> Optional[torch.Tensor]:
    return _cached_features(ex.audio_path, window, DEFAULT_RATE) if ex.audio_path else None


def _loss(out: torch.Tensor, target: float, config: TrainConfig) -> torch.Tensor:
    if config.loss == "mse":
        return nn.functional.mse_loss(out.reshape(()), torch.tensor(float(target), dtype=out.dtype))
    return nn.functional.cross_entropy(out[None], torch.tensor([int(target)]))


def _check_inputs(model: SADModel, examples: Sequence[Example]) -> None:
    mode = model.config.mode
    for ex in examples:
        if mode.uses_text and ex.text is None:
            raise TrainingError(f"{ex.id}: {mode.value} needs text input")
        if mode.uses_audio and ex.audio_path is None:
            raise TrainingError(f"{ex.id}: {mode.value} needs audio input")


def train_model(
    model: SADModel, examples: Sequence[Example], config: TrainConfig, *, window: float = DEFAULT_WINDOW
) -> tuple[SADModel, list[float]]:
    """Train in place for ``config.epochs`` passes; returns the model and mean loss per epoch."""
    if not examples:
        raise TrainingError("no training examples")
    _check_inputs(model, examples)
    expect = "mse" if model.config.head_kind is HeadKind.REGRESSION else "cross_entropy"
    if config.loss != expect:
        raise ConfigError(f"{config.loss} loss does not fit a {model.config.head_kind.value} head")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.AdamW(params, lr=config.learning_rate)
    model.train()
    curve: list[float] = []
    for epoch in range(config.epochs):
        total = 0.0
        order = rng.permutation(len(examples))
        for start in range(0, len(order), config.batch_size):
            batch = [examples[int(i)] for i in order[start : start + config.batch_size]]
            opt.zero_grad()
            losses = [
                _loss(model(ex.text if model.config.mode.uses_text else None,
                            _features(ex, window) if model.config.mode.uses_audio else None), ex.target, config)
                for ex in batch
            ]
            loss = torch.stack(losses).mean()
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1} (batch starting {batch[0].id})")
            loss.backward()
            opt.step()
            total += loss.item() * len(batch)
        curve.append(total / len(examples))
        log.debug("epoch %d loss %.6f", epoch + 1, curve[-1])
    return model, curve


def predict(model: SADModel, examples: Sequence[Example], *, window: float = DEFAULT_WINDOW) -> list:
    """Predicted class ids (classification) or values (regression)."""
    _check_inputs(model, examples)
    out = []
    spec = (
        LabelSpec.continuous(-math.inf, math.inf)
        if model.config.head_kind is HeadKind.REGRESSION
        else LabelSpec.categorical([str(i) for i in range(model.config.num_classes)])
    )
    for ex in examples:
        p = model.predict(ex.text if model.config.mode.uses_text else None,
                          _features(ex, window) if model.config.mode.uses_audio else None)
        label = predict_label(p, spec)
        out.append(label.value if label.value is not None else label.class_id)
    return out


@dataclass(frozen=True)
class AudioSource:
    """Where a run's audio comes from: ``gold`` or a synthetic engine (``local``/``remote``)."""

    name: str
    paths: Mapping[str, str]

    @classmethod
    def gold(cls, samples: Iterable[Sample]) -> "AudioSource":
        return cls("gold", {s.id: s.gold_audio for s in samples if s.gold_audio})

    @classmethod
    def from_manifest(cls, name: str, store) -> "AudioSource":
        return cls(name, {sid: str(p) for sid, p in store.audio_paths().items()})


def experiment_grid(modes: Sequence[Union[Mode, str]], sources: Sequence[str]) -> list[tuple[Mode, str]]:
    """(mode, audio source) pairs: text-only once, every audio-bearing mode per source."""
    grid = []
    for m in map(Mode, modes):
        if m is Mode.TEXT_ONLY:
            grid.append((m, "none"))
        else:
            grid.extend((m, s) for s in sources)
    return grid


def _units(descriptor: CorpusDescriptor, samples: Sequence[Sample], plan: SplitPlan):
    """Yield (unit name, seed, train samples, test samples)."""
    if plan.strategy is SplitStrategy.CANONICAL_SEEDS:
        train = [s for s in samples if s.split == "train"]
        test = [s for s in samples if s.split == "test"]
        if not train or not test:
            raise ConfigError(f"{descriptor.name}: canonical plan needs train and test splits")
        for seed, unit in zip(plan.seeds, plan.units()):
            yield unit, seed, train, test
        return
    ids = {s.id for s in samples}
    if set(plan.assignment) != ids:
        raise ConfigError(f"{descriptor.name}: split plan does not cover exactly the loaded samples")
    for k, unit in enumerate(plan.units()):
        test = [s for s in samples if plan.assignment[s.id] == k]
        train = [s for s in samples if plan.assignment[s.id] != k]
        yield unit, None, train, test


def _examples(samples, descriptor, source: Optional[AudioSource], text_of) -> list[Example]:
    out = []
    for s in samples:
        target = s.label.value if s.label.value is not None else s.label.class_id
        path = source.paths.get(s.id) if source is not None else None
        out.append(Example(s.id, text_of(s), path, target))
    return out


def run_experiment(
    descriptor: CorpusDescriptor,
    samples: Sequence[Sample],
    source: Optional[AudioSource],
    fusion: FusionConfig,
    plan: SplitPlan,
    config: TrainConfig,
    *,
    backend: str = "tiny",
    text_model: Optional[str] = None,
    audio_model: Optional[str] = None,
    out_dir: Optional[Union[str, Path]] = None,
    window: float = DEFAULT_WINDOW,
    keep_checkpoints: bool = False,
) -> list[RunResult]:
    """Train and score one (mode, audio source) over every unit of ``plan``.

    With ``out_dir`` each unit gets its own run directory; completed ones are
    read back instead of retrained.
    """
    mode = fusion.mode
    engine = "none"
    if mode.uses_audio:
        if source is None:
            raise ConfigError(f"{mode.value} needs an audio source")
        if source.name == "gold" and not descriptor.has_gold_audio:
            raise ConfigError(f"{descriptor.title} has no gold audio, so gold-audio runs are impossible")
        engine = source.name
        missing = sorted(s.id for s in samples if s.id not in source.paths)
        if missing:
            raise ManifestGap(source.name, missing)

    def text_of(s: Sample) -> str:
        return select_target_text(s, descriptor)

    results = []
    for unit, unit_seed, train, test in _units(descriptor, samples, plan):
        seed = config.seed if unit_seed is None else unit_seed
        name = run_name(mode.value, engine, unit)
        run_dir = Path(out_dir) / name if out_dir is not None else None
        if run_dir is not None and is_complete(run_dir):
            log.info("skipping completed run %s", name)
            results.append(read_run(run_dir))
            continue

        cfg = TrainConfig(**{**asdict(config), "seed": seed})
        model = build_model(fusion, backend, seed=seed, text_model=text_model, audio_model=audio_model,
                            freeze_encoders=cfg.freeze_encoders)
        model, curve = train_model(model, _examples(train, descriptor, source, text_of), cfg, window=window)
        test_ex = _examples(test, descriptor, source, text_of)
        preds = predict(model, test_ex, window=window)
        golds = [ex.target for ex in test_ex]
        metric = compute_metric(descriptor.metric, preds, golds)
        result = RunResult(descriptor.name, mode.value, engine, unit, metric.name.value, metric.value, tuple(curve))
        if run_dir is not None:
            run_config = {
                "corpus": descriptor.name,
                "mode": mode.value,
                "engine": engine,
                "unit": unit,
                "backend": backend,
                "text_model": text_model,
                "audio_model": audio_model,
                "train": asdict(cfg),
                "n_train": len(train),
                "n_test": len(test),
            }
            if keep_checkpoints:
                save_checkpoint(model, run_dir / "checkpoint", backend=backend, seed=seed,
                                text_model=text_model, audio_model=audio_model)
            write_run(run_dir, result, run_config,
                      ({"id": ex.id, "prediction": p, "gold": ex.target} for ex, p in zip(test_ex, preds)))
        results.append(result)
    return results
