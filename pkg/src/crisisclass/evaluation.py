"""Dataset loading, confusion matrices, and precision/recall/F1 reporting."""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .text_pipeline import PipelineError, RawTweet, read_tsv

# The 7 informative classes, fixed order (class numbers 1-7 -> indices 0-6).
CLASS_KEYS = [
    "injured_or_dead_people",
    "missing_trapped_or_found_people",
    "infrastructure_and_utilities_damages",
    "sympathy_and_emotional_support",
    "donation_needs_or_offers_or_volunteering_services",
    "other_useful_information",
    "irrelevant",
]

CLASS_INDEX = {key: i for i, key in enumerate(CLASS_KEYS)}

NUM_CLASSES = len(CLASS_KEYS)


class DatasetError(ValueError):
    """Raised on malformed dataset rows or unknown labels."""


class MetricsError(ValueError):
    """Raised on invalid metric inputs (empty matrix, bad prediction range)."""


def load_dataset(
    path: str, scheme: Sequence[str] = CLASS_KEYS
) -> Tuple[List[RawTweet], List[int]]:
    """Load a labelled TSV; returns (tweets, per-class counts).

    Rows whose label is outside the scheme are rejected with their line
    number.
    """
    index = {key: i for i, key in enumerate(scheme)}
    try:
        tweets = read_tsv(path)
    except PipelineError as exc:
        raise DatasetError(str(exc)) from exc
    counts = [0] * len(scheme)
    for row_number, tweet in enumerate(tweets, start=2):
        if tweet.label is None or tweet.label not in index:
            raise DatasetError(
                f"{path}:{row_number}: unknown label {tweet.label!r}"
            )
        counts[index[tweet.label]] += 1
    return tweets, counts


@dataclass
class ConfusionMatrix:
    """counts[g][p] = number of examples with gold class g predicted as p."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, c: int) -> int:
        return int(self.counts[c, c])

    def fp(self, c: int) -> int:
        return int(self.counts[:, c].sum() - self.counts[c, c])

    def fn(self, c: int) -> int:
        return int(self.counts[c, :].sum() - self.counts[c, c])

    def support(self, c: int) -> int:
        return int(self.counts[c, :].sum())


def confusion(golds, preds, num_classes: int = NUM_CLASSES) -> ConfusionMatrix:
    golds = np.asarray(golds, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if golds.shape != preds.shape:
        raise MetricsError(
            f"gold/prediction length mismatch: {golds.shape} vs {preds.shape}"
        )
    if golds.size and not (
        0 <= golds.min() and golds.max() < num_classes
        and 0 <= preds.min() and preds.max() < num_classes
    ):
        raise MetricsError(f"class indices must lie in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (golds, preds), 1)
    return ConfusionMatrix(counts=counts)


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    """F1 = 2 TP / (2 TP + FP + FN); 0 by convention when all three are 0."""
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0
    return 2.0 * tp / denom


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    per_class: List[ClassMetrics]
    macro_f1: float
    weighted_f1: float
    accuracy: float
    zero_division_warnings: int = 0
    class_keys: List[str] = field(default_factory=lambda: list(CLASS_KEYS))

    def to_dict(self) -> dict:
        return {
            "per_class": [
                {
                    "class": self.class_keys[i] if i < len(self.class_keys) else str(i),
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for i, m in enumerate(self.per_class)
            ],
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "accuracy": self.accuracy,
            "zero_division_warnings": self.zero_division_warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"{'class':<52}{'prec':>8}{'rec':>8}{'f1':>8}{'support':>9}"]
        for i, m in enumerate(self.per_class):
            key = self.class_keys[i] if i < len(self.class_keys) else str(i)
            lines.append(
                f"{key:<52}{m.precision:>8.4f}{m.recall:>8.4f}{m.f1:>8.4f}{m.support:>9d}"
            )
        lines.append("")
        lines.append(f"macro_f1    {self.macro_f1:.6f}")
        lines.append(f"weighted_f1 {self.weighted_f1:.6f}")
        lines.append(f"accuracy    {self.accuracy:.6f}")
        if self.zero_division_warnings:
            lines.append(f"zero_division_warnings {self.zero_division_warnings}")
        return "\n".join(lines)


def metrics_report(
    cm: ConfusionMatrix,
    class_keys: Sequence[str] = CLASS_KEYS,
    exclude: Sequence[int] = (),
) -> MetricsReport:
    """Per-class precision/recall/F1 plus macro-F1, support-weighted F1 and
    accuracy. `exclude` drops class indices from the macro/weighted means
    (e.g. the negative class) while still listing them per class."""
    total = cm.total
    if total == 0:
        raise MetricsError("cannot score an empty confusion matrix")
    C = cm.counts.shape[0]
    per_class = []
    warnings = 0
    for c in range(C):
        tp, fp, fn = cm.tp(c), cm.fp(c), cm.fn(c)
        if tp + fp == 0:
            precision = 0.0
            warnings += 1
        else:
            precision = tp / (tp + fp)
        if tp + fn == 0:
            recall = 0.0
            warnings += 1
        else:
            recall = tp / (tp + fn)
        per_class.append(
            ClassMetrics(precision=precision, recall=recall,
                         f1=f1_from_counts(tp, fp, fn), support=cm.support(c))
        )
    included = [c for c in range(C) if c not in set(exclude)]
    macro = sum(per_class[c].f1 for c in included) / len(included)
    support_total = sum(per_class[c].support for c in included)
    if support_total > 0:
        weighted = sum(per_class[c].f1 * per_class[c].support for c in included) / support_total
    else:
        weighted = 0.0
    accuracy = float(np.trace(cm.counts)) / total
    return MetricsReport(
        per_class=per_class,
        macro_f1=macro,
        weighted_f1=weighted,
        accuracy=accuracy,
        zero_division_warnings=warnings,
        class_keys=list(class_keys),
    )
