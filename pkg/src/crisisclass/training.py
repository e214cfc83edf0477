"""Deterministic mini-batch training loop with SGD and Adam."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import evaluation, models
from .models import Model, batch_arrays
from .text_pipeline import EncodedExample, PAD_INDEX


class TrainingError(RuntimeError):
    """Raised on non-finite losses or gradients during training."""


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 25
    optimizer: str = "adam"
    learning_rate: float = 0.001
    keep_prob: float = 0.5
    seed: int = 0
    shuffle: bool = True
    keep_best: bool = True
    clip_norm: Optional[float] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_acc: float
    dev_macro_f1: float


@dataclass
class TrainHistory:
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_model: Optional[Model] = None

    def to_csv(self) -> str:
        lines = ["epoch,loss,train_acc,dev_macro_f1"]
        for r in self.records:
            lines.append(f"{r.epoch},{r.loss!r},{r.train_acc!r},{r.dev_macro_f1!r}")
        return "\n".join(lines) + "\n"


def minibatches(
    dataset: List[EncodedExample],
    batch_size: int,
    seed: int,
    epoch: int,
    shuffle: bool = True,
) -> List[List[EncodedExample]]:
    """Deterministically permute the dataset (generator seeded by
    seed XOR epoch) and chunk it; the final batch may be short."""
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot batch an empty dataset")
    if shuffle:
        order = np.random.default_rng(seed ^ epoch).permutation(n)
    else:
        order = np.arange(n)
    return [
        [dataset[j] for j in order[i:i + batch_size]]
        for i in range(0, n, batch_size)
    ]


@dataclass
class OptimizerState:
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: OptimizerState,
    cfg: TrainConfig,
) -> None:
    """Apply one SGD or Adam update in place.

    Adam uses beta1=0.9, beta2=0.999, eps=1e-8 with bias correction.
    Parameters without a gradient entry (e.g. a frozen embedding) are
    skipped; the PAD embedding row never moves.
    """
    state.t += 1
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    if cfg.clip_norm is not None:
        norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
        if norm > cfg.clip_norm:
            grads = {name: g * (cfg.clip_norm / norm) for name, g in grads.items()}
    for name in sorted(grads):
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        if name == "embedding":
            g = g.copy()
            g[PAD_INDEX] = 0.0
        p = params[name]
        if cfg.optimizer == "sgd":
            p -= cfg.learning_rate * g
        else:
            if name not in state.m:
                state.m[name] = np.zeros_like(p)
                state.v[name] = np.zeros_like(p)
            m, v = state.m[name], state.v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            m_hat = m / (1.0 - beta1 ** state.t)
            v_hat = v / (1.0 - beta2 ** state.t)
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        if name == "embedding":
            p[PAD_INDEX] = 0.0


def evaluate_macro_f1(model: Model, dataset: List[EncodedExample],
                      batch_size: int = 256) -> float:
    """Infer-mode macro-F1 over a dataset."""
    cm = evaluate_confusion(model, dataset, batch_size)
    return evaluation.metrics_report(cm).macro_f1


def evaluate_confusion(model: Model, dataset: List[EncodedExample],
                       batch_size: int = 256) -> evaluation.ConfusionMatrix:
    golds, preds = [], []
    for i in range(0, len(dataset), batch_size):
        batch = dataset[i:i + batch_size]
        indices, lengths, labels = batch_arrays(batch)
        logits, _ = models.forward(model, indices, np.maximum(lengths, 1), mode="infer")
        golds.extend(labels.tolist())
        preds.extend(np.argmax(logits, axis=1).tolist())
    return evaluation.confusion(golds, preds, num_classes=model.config.num_classes)


def train(
    model: Model,
    train_split: List[EncodedExample],
    dev_split: List[EncodedExample],
    cfg: TrainConfig,
) -> Tuple[Model, TrainHistory]:
    """Run the full training loop; returns the final-epoch model and the
    per-epoch history. When cfg.keep_best, the snapshot of the best
    dev-macro-F1 epoch is kept on history as `best_model`."""
    if not train_split or not dev_split:
        raise ValueError("train and dev splits must be non-empty")
    model.config.keep_prob = cfg.keep_prob
    dropout_rng = np.random.default_rng(cfg.seed + 0x5EED)
    state = OptimizerState()
    history = TrainHistory()
    best_f1 = -1.0
    best_model = None
    for epoch in range(1, cfg.epochs + 1):
        total_loss = 0.0
        for batch in minibatches(train_split, cfg.batch_size, cfg.seed, epoch, cfg.shuffle):
            indices, lengths, labels = batch_arrays(batch)
            loss, probs, grads = models.loss_and_grads(
                model, indices, np.maximum(lengths, 1), labels,
                mode="train", rng=dropout_rng)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            total_loss += loss * len(batch)
            optimizer_step(model.params, grads, state, cfg)
        # train accuracy from a clean infer-mode pass (no dropout noise)
        train_cm = evaluate_confusion(model, train_split)
        dev_f1 = evaluate_macro_f1(model, dev_split)
        record = EpochRecord(
            epoch=epoch,
            loss=total_loss / len(train_split),
            train_acc=float(np.trace(train_cm.counts)) / len(train_split),
            dev_macro_f1=dev_f1,
        )
        history.records.append(record)
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            history.best_epoch = epoch
            if cfg.keep_best:
                best_model = model.copy()
    history.best_model = best_model
    return model, history
