"""Per-run results and their on-disk layout.

One directory per run::

    <run>/config.json        run configuration
    <run>/loss_curve.json    mean training loss per epoch
    <run>/predictions.jsonl  {id, prediction, gold} per evaluated sample
    <run>/result.json        the RunResult
    <run>/COMPLETE           written last; marks the run as finished
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Union

COMPLETE = "COMPLETE"


@dataclass(frozen=True)
class RunResult:
    corpus: str
    mode: str  # text_only | audio_only | early | late
    engine: str  # none | gold | local | remote
    unit: str  # seed42, fold3, ...
    metric_name: str
    metric_value: float
    loss_curve: tuple[float, ...] = field(default_factory=tuple)

    @property
    def run_name(self) -> str:
        return run_name(self.mode, self.engine, self.unit)

    def to_json(self) -> dict:
        d = asdict(self)
        d["loss_curve"] = list(self.loss_curve)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "RunResult":
        return cls(**{**d, "loss_curve": tuple(d.get("loss_curve", ()))})


def run_name(mode: str, engine: str, unit: str) -> str:
    return f"{mode}__{engine}__{unit}"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_run(
    directory: Union[str, Path],
    result: RunResult,
    config: dict,
    predictions: Iterable[dict],
) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / COMPLETE).unlink(missing_ok=True)
    _write_json(d / "config.json", config)
    _write_json(d / "loss_curve.json", list(result.loss_curve))
    with open(d / "predictions.jsonl", "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p, sort_keys=True) + "\n")
    _write_json(d / "result.json", result.to_json())
    with open(d / COMPLETE, "w") as fh:
        fh.flush()
        os.fsync(fh.fileno())
    return d


def is_complete(directory: Union[str, Path]) -> bool:
    return (Path(directory) / COMPLETE).is_file()


def read_run(directory: Union[str, Path]) -> RunResult:
    return RunResult.from_json(json.loads((Path(directory) / "result.json").read_text(encoding="utf-8")))


def read_predictions(directory: Union[str, Path]) -> list[dict]:
    with open(Path(directory) / "predictions.jsonl", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def collect_runs(root: Union[str, Path]) -> list[RunResult]:
    """Completed runs anywhere under ``root``, in a stable order."""
    root = Path(root)
    found = sorted(p.parent for p in root.glob(f"**/{COMPLETE}"))
    return [read_run(d) for d in found]
