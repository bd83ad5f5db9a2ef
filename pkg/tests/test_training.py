from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import pytest
import torch

from sadkit.corpus import Label, Sample, get_descriptor, make_split_plan
from sadkit.modeling import FusionConfig, Mode, build_model
from sadkit.runs import collect_runs, read_predictions
from sadkit.training import (
    AudioSource,
    ConfigError,
    Example,
    ManifestGap,
    TrainConfig,
    TrainingDiverged,
    experiment_grid,
    run_experiment,
    train_model,
)

from conftest import write_tone

WINDOW = 1.0


def corpus(tmp_path: Path, n: int, *, split: bool = False, regression: bool = False) -> list[Sample]:
    out = []
    for i in range(n):
        cls = i % 2
        path = write_tone(tmp_path / f"a{i}.wav", 0.3, amplitude=0.5 if cls else 0.05)
        label = Label.continuous(float(cls)) if regression else Label.categorical(cls)
        sp = ("train" if i < n * 2 // 3 else "test") if split else None
        out.append(Sample(f"s{i}", f"word{cls} item {i}", label, gold_audio=path, split=sp))
    return out


def params(model) -> list[torch.Tensor]:
    return [p.detach().clone() for p in model.parameters()]


def test_zero_learning_rate_leaves_parameters_unchanged():
    model = build_model(FusionConfig.for_labels(Mode.TEXT_ONLY, get_descriptor("boolq").label_spec), seed=0)
    before = params(model)
    ex = [Example(f"e{i}", f"text {i}", None, i % 2) for i in range(6)]
    _, curve = train_model(model, ex, TrainConfig(epochs=2, learning_rate=0.0, loss="cross_entropy"))
    assert len(curve) == 2
    assert all(torch.equal(a, b) for a, b in zip(before, params(model)))


def test_same_seed_same_curve(tmp_path):
    samples = corpus(tmp_path, 8)
    ex = [Example(s.id, s.text, s.gold_audio, s.label.class_id) for s in samples]
    cfg = TrainConfig(epochs=2, learning_rate=1e-3, loss="cross_entropy", seed=3)
    spec = get_descriptor("boolq").label_spec
    curves = [train_model(build_model(FusionConfig.for_labels(Mode.EARLY, spec), seed=3), ex, cfg, window=WINDOW)[1]
              for _ in range(2)]
    assert curves[0] == curves[1]


def test_loss_mismatch_and_divergence():
    spec = get_descriptor("cb").label_spec
    model = build_model(FusionConfig.for_labels(Mode.TEXT_ONLY, spec))
    with pytest.raises(ConfigError):
        train_model(model, [Example("a", "x", None, 0.0)], TrainConfig(loss="cross_entropy"))
    with pytest.raises(TrainingDiverged):
        train_model(model, [Example("a", "x", None, float("nan"))], TrainConfig(epochs=1))


def test_canonical_plan_gives_three_results(tmp_path):
    d = get_descriptor("boolq")
    samples = corpus(tmp_path, 9, split=True)
    plan = make_split_plan(d, samples, seed=0)
    cfg = TrainConfig.for_labels(d.label_spec.kind, epochs=1)
    res = run_experiment(d, samples, None, FusionConfig.for_labels("text_only", d.label_spec), plan, cfg,
                         out_dir=tmp_path / "runs")
    assert [r.unit for r in res] == ["seed42", "seed0", "seed1"]
    assert len(collect_runs(tmp_path / "runs")) == 3


def test_kfold_gives_five_disjoint_results(tmp_path):
    d = get_descriptor("swbd-s")
    samples = corpus(tmp_path, 10, regression=True)
    plan = make_split_plan(d, samples, seed=1)
    cfg = TrainConfig.for_labels(d.label_spec.kind, epochs=1)
    res = run_experiment(d, samples, AudioSource.gold(samples), FusionConfig.for_labels("audio_only", d.label_spec),
                         plan, cfg, out_dir=tmp_path / "runs", window=WINDOW)
    assert len(res) == 5
    tested = []
    for r in res:
        run_dir = tmp_path / "runs" / r.run_name
        ids = [p["id"] for p in read_predictions(run_dir)]
        n_train = json.loads((run_dir / "config.json").read_text())["n_train"]
        assert n_train + len(ids) == 10
        tested += ids
    assert sorted(tested) == sorted(s.id for s in samples)


def test_gold_audio_on_corpus_without_gold_fails_before_training(tmp_path):
    d = get_descriptor("boolq")
    samples = corpus(tmp_path, 6, split=True)
    plan = make_split_plan(d, samples, seed=0)
    with pytest.raises(ConfigError, match="no gold audio"):
        run_experiment(d, samples, AudioSource.gold(samples), FusionConfig.for_labels("early", d.label_spec), plan,
                       TrainConfig.for_labels(d.label_spec.kind), out_dir=tmp_path / "runs")
    assert not (tmp_path / "runs").exists()


def test_manifest_gap_names_missing_ids(tmp_path):
    d = get_descriptor("boolq")
    samples = corpus(tmp_path, 6, split=True)
    partial = AudioSource("local", {s.id: s.gold_audio for s in samples[1:]})
    with pytest.raises(ManifestGap) as info:
        run_experiment(d, samples, partial, FusionConfig.for_labels("late", d.label_spec),
                       make_split_plan(d, samples, 0), TrainConfig.for_labels(d.label_spec.kind))
    assert info.value.missing == ["s0"]


def test_test_labels_do_not_influence_training(tmp_path):
    d = get_descriptor("swbd-s")
    samples = corpus(tmp_path, 10, regression=True)
    plan = make_split_plan(d, samples, seed=2)
    fold0 = set(plan.fold_members(0))
    poisoned = [replace(s, label=Label.continuous(-3.0)) if s.id in fold0 else s for s in samples]
    cfg = TrainConfig.for_labels(d.label_spec.kind, epochs=2, learning_rate=1e-3)
    fusion = FusionConfig.for_labels("early", d.label_spec)
    runs = {}
    for name, data in (("clean", samples), ("poisoned", poisoned)):
        run_experiment(d, data, AudioSource.gold(data), fusion, plan, cfg, out_dir=tmp_path / name,
                       window=WINDOW, keep_checkpoints=True)
        runs[name] = tmp_path / name / "early__gold__fold0"
    a = torch.load(runs["clean"] / "checkpoint" / "params.pt")
    b = torch.load(runs["poisoned"] / "checkpoint" / "params.pt")
    assert all(torch.equal(a[k], b[k]) for k in a)
    preds = [[p["prediction"] for p in read_predictions(runs[k])] for k in runs]
    assert preds[0] == preds[1]


def test_completed_runs_are_skipped(tmp_path, monkeypatch):
    d = get_descriptor("boolq")
    samples = corpus(tmp_path, 6, split=True)
    plan = make_split_plan(d, samples, seed=0)
    args = (d, samples, None, FusionConfig.for_labels("text_only", d.label_spec), plan,
            TrainConfig.for_labels(d.label_spec.kind, epochs=1))
    first = run_experiment(*args, out_dir=tmp_path / "runs")

    def boom(*a, **k):
        raise AssertionError("retrained a completed run")

    monkeypatch.setattr("sadkit.training.train_model", boom)
    assert run_experiment(*args, out_dir=tmp_path / "runs") == first


def test_experiment_grid():
    grid = experiment_grid(["text_only", "early", "late"], ["gold", "local"])
    assert [(m.value, s) for m, s in grid] == [("text_only", "none"), ("early", "gold"), ("early", "local"),
                                              ("late", "gold"), ("late", "local")]
