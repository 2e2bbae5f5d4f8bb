"""Stratified splitting, accuracy bookkeeping, confusion matrices and ratio sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np

from .classifier import (DEFECTIVE, QUALIFIED, LabeledSample, LinearModel, MulticlassModel,
                         TrainConfig, predict_site, train_binary)
from .errors import DegenerateSplit, EmptyTestSet, SchemeMismatch
from .seeding import derive_seed


def default_ratios() -> list[float]:
    """0.05, 0.10, ..., 0.95 as exact two-decimal floats."""
    return [k / 100 for k in range(5, 100, 5)]


def parse_ratios(text: str) -> list[float]:
    """Parse ``start:stop:step`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (Decimal(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("ratio step must be positive")
        out, r = [], start
        while r <= stop:
            out.append(float(r))
            r += step
        return out
    return [float(t) for t in text.split(",") if t.strip()]


def train_count(ratio: float, class_size: int) -> int:
    """round(ratio * class_size), halves rounded up, on the decimal form of ``ratio``."""
    exact = Decimal(repr(float(ratio))) * class_size
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class DatasetSplit:
    train: list
    test: list
    ratio: float
    seed: int


def stratified_split(samples, ratio: float, seed: int) -> DatasetSplit:
    if not 0 < ratio < 1:
        raise DegenerateSplit(f"ratio {ratio} is outside (0, 1)")
    by_label: dict[str, list[int]] = {}
    for k, s in enumerate(samples):
        by_label.setdefault(s.label, []).append(k)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in sorted(by_label):
        idx = by_label[label]
        n_train = train_count(ratio, len(idx))
        if n_train < 1 or n_train >= len(idx):
            raise DegenerateSplit(
                f"ratio {ratio} gives class {label!r} ({len(idx)} samples) "
                f"{n_train} training and {len(idx) - n_train} test samples")
        order = rng.permutation(len(idx))
        train_idx += [idx[o] for o in order[:n_train]]
        test_idx += [idx[o] for o in order[n_train:]]
    train_idx.sort()
    test_idx.sort()
    return DatasetSplit([samples[k] for k in train_idx], [samples[k] for k in test_idx],
                        ratio, seed)


@dataclass(frozen=True)
class EvaluationReport:
    pq: int
    pd: int
    test_total: int

    @property
    def correct(self) -> int:
        return self.pq + self.pd

    @property
    def accuracy(self) -> float:
        return self.correct / self.test_total

    @property
    def accuracy_fraction(self) -> Fraction:
        return Fraction(self.correct, self.test_total)


def format_percent(accuracy: float) -> str:
    return f"{100 * accuracy:.2f}%"


def evaluate_binary(model: LinearModel, test) -> EvaluationReport:
    if not test:
        raise EmptyTestSet("test set is empty")
    X = np.stack([s.features.values for s in test])
    if any(s.features.scheme != model.scheme for s in test):
        raise SchemeMismatch(f"test features do not match model scheme {model.scheme}")
    z = model.decision_values(X)
    neg, pos = model.label_map
    pq = sum(1 for s, zi in zip(test, z) if s.label == neg and zi < 0)
    pd = sum(1 for s, zi in zip(test, z) if s.label == pos and zi >= 0)
    return EvaluationReport(pq, pd, len(test))


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # counts[i, j]: true class i predicted as class j

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k) or (counts < 0).any():
            raise ValueError("confusion counts must be a non-negative square grid")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "classes", tuple(self.classes))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return int(np.trace(self.counts)) / self.total


def confusion_matrix(model: MulticlassModel, test) -> ConfusionMatrix:
    if not test:
        raise EmptyTestSet("test set is empty")
    index = {c: k for k, c in enumerate(model.classes)}
    counts = np.zeros((len(index), len(index)), dtype=np.int64)
    for s in test:
        counts[index[s.label], index[predict_site(model, s.features)]] += 1
    return ConfusionMatrix(model.classes, counts)


@dataclass(frozen=True)
class SweepRun:
    ratio: float
    repeat: int
    seed: int
    train_size: int
    test_size: int
    report: EvaluationReport


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    accuracy: float  # mean over repeats
    train_size: int
    test_size: int
    seed: int  # seed of the first repeat


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    runs: list[SweepRun]

    @property
    def spread(self) -> float:
        accs = [r.accuracy for r in self.rows]
        return max(accs) - min(accs)


def run_once(samples, ratio: float, seed: int, cfg: TrainConfig,
             label_map=(QUALIFIED, DEFECTIVE)) -> tuple[DatasetSplit, EvaluationReport]:
    split = stratified_split(samples, ratio, seed)
    model = train_binary(split.train, TrainConfig(cfg.c, cfg.tolerance, cfg.max_epochs, seed),
                         label_map)
    return split, evaluate_binary(model, split.test)


def ratio_sweep(samples, ratios=None, cfg: TrainConfig = TrainConfig(), repeats: int = 1,
                label_map=(QUALIFIED, DEFECTIVE)) -> SweepResult:
    ratios = default_ratios() if ratios is None else list(ratios)
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if any(b <= a for a, b in zip(ratios, ratios[1:])):
        raise ValueError("ratios must be strictly increasing")
    rows, runs = [], []
    for ri, ratio in enumerate(ratios):
        accs = []
        for rep in range(repeats):
            seed = derive_seed(cfg.seed, ri, rep)
            try:
                split, report = run_once(samples, ratio, seed, cfg, label_map)
            except DegenerateSplit as exc:
                raise DegenerateSplit(f"ratio {ratio}: {exc}") from None
            runs.append(SweepRun(ratio, rep, seed, len(split.train), len(split.test), report))
            accs.append(report.accuracy)
        first = runs[-repeats]
        rows.append(SweepRow(ratio, float(np.mean(accs)), first.train_size, first.test_size,
                             first.seed))
    return SweepResult(rows, runs)
