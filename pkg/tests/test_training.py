import numpy as np
import pytest

from crisisclass import models
from crisisclass.models import ModelConfig, build_model
from crisisclass.selfcheck import tiny_model
from crisisclass.text_pipeline import EncodedExample
from crisisclass.training import (
    OptimizerState,
    TrainConfig,
    TrainingError,
    minibatches,
    optimizer_step,
    train,
)


def toy_examples(n, seq_len=6, vocab=9, classes=7, seed=0):
    """Separable toy set: label determines which index fills the sequence."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = i % classes
        idx = 1 + label % (vocab - 1)
        length = int(rng.integers(2, seq_len + 1))
        indices = np.zeros(seq_len, dtype=np.int64)
        indices[:length] = idx
        out.append(EncodedExample(indices=indices, true_length=length, label=label))
    return out


class TestMinibatches:
    def test_chunk_sizes(self):
        data = toy_examples(100)
        sizes = [len(b) for b in minibatches(data, 32, seed=0, epoch=1)]
        assert sizes == [32, 32, 32, 4]

    def test_deterministic(self):
        data = toy_examples(20)
        a = minibatches(data, 8, seed=5, epoch=3)
        b = minibatches(data, 8, seed=5, epoch=3)
        assert [[id(e) for e in batch] for batch in a] == [[id(e) for e in batch] for batch in b]

    def test_partition(self):
        data = toy_examples(25)
        batched = [e for batch in minibatches(data, 4, seed=1, epoch=2) for e in batch]
        assert sorted(id(e) for e in batched) == sorted(id(e) for e in data)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            minibatches([], 4, seed=0, epoch=0)


class TestOptimizerStep:
    def test_sgd(self):
        params = {"w": np.array([1.0])}
        cfg = TrainConfig(optimizer="sgd", learning_rate=0.1)
        optimizer_step(params, {"w": np.array([0.5])}, OptimizerState(), cfg)
        assert params["w"][0] == pytest.approx(0.95, abs=1e-15)

    def test_adam_first_step(self):
        # t=1: m_hat = v_hat = 1, update = lr / (1 + eps)
        params = {"w": np.array([0.0])}
        cfg = TrainConfig(optimizer="adam", learning_rate=0.001)
        optimizer_step(params, {"w": np.array([1.0])}, OptimizerState(), cfg)
        assert params["w"][0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-15)

    def test_zero_gradient_no_drift(self):
        for opt in ("sgd", "adam"):
            params = {"w": np.array([2.5])}
            cfg = TrainConfig(optimizer=opt)
            optimizer_step(params, {"w": np.array([0.0])}, OptimizerState(), cfg)
            assert abs(params["w"][0] - 2.5) <= cfg.learning_rate * 1e-8

    def test_non_finite_gradient_names_param(self):
        cfg = TrainConfig()
        with pytest.raises(TrainingError, match="conv.bias"):
            optimizer_step({"conv.bias": np.zeros(2)}, {"conv.bias": np.array([1.0, np.nan])},
                           OptimizerState(), cfg)

    def test_frozen_param_skipped(self):
        params = {"w": np.array([1.0]), "frozen": np.array([3.0])}
        optimizer_step(params, {"w": np.array([1.0])}, OptimizerState(),
                       TrainConfig(optimizer="sgd", learning_rate=0.5))
        assert params["frozen"][0] == 3.0


class TestTrain:
    def test_deterministic_history(self):
        data = toy_examples(20)
        cfg = TrainConfig(epochs=3, seed=42, keep_best=False)
        _, h1 = train(tiny_model("cnn", seed=9), data, data, cfg)
        _, h2 = train(tiny_model("cnn", seed=9), data, data, cfg)
        assert h1.to_csv() == h2.to_csv()

    def test_history_length_and_csv_header(self):
        data = toy_examples(10)
        _, hist = train(tiny_model("bilstm", seed=9), data, data, TrainConfig(epochs=4, seed=0))
        assert len(hist.records) == 4
        assert hist.to_csv().splitlines()[0] == "epoch,loss,train_acc,dev_macro_f1"

    def test_loss_non_increasing_first_epochs_sgd(self):
        # single batch, small lr: loss must go down over the first 3 epochs
        data = toy_examples(8, classes=2)
        model = tiny_model("cnn", seed=13)
        model.config.keep_prob = 1.0
        cfg = TrainConfig(optimizer="sgd", learning_rate=1e-2, batch_size=8,
                          epochs=3, seed=0, keep_prob=1.0, shuffle=False)
        _, hist = train(model, data, data, cfg)
        losses = [r.loss for r in hist.records]
        assert losses[1] <= losses[0] and losses[2] <= losses[1]

    def test_single_step_loss_decrease(self):
        data = toy_examples(8, classes=2)
        indices, lengths, labels = models.batch_arrays(data)
        lr = 1e-3
        for _ in range(4):  # halve on failure, up to 3 retries
            model = tiny_model("cnn", seed=21)
            model.config.keep_prob = 1.0
            before, _, grads = models.loss_and_grads(model, indices, lengths, labels)
            optimizer_step(model.params, grads, OptimizerState(),
                           TrainConfig(optimizer="sgd", learning_rate=lr))
            after, _, _ = models.loss_and_grads(model, indices, lengths, labels)
            if after < before:
                return
            lr /= 2
        pytest.fail("loss did not decrease after one sgd step")

    def test_frozen_embedding_unchanged(self):
        data = toy_examples(12)
        model = tiny_model("cnn", seed=3)
        model.embedding.trainable = False
        model.config.fine_tune_embeddings = False
        before = model.embedding.matrix.tobytes()
        train(model, data, data, TrainConfig(epochs=2, seed=1))
        assert model.embedding.matrix.tobytes() == before

    def test_fine_tuned_embedding_moves(self):
        data = toy_examples(12)
        model = tiny_model("cnn", seed=3)
        before = model.embedding.matrix.copy()
        train(model, data, data, TrainConfig(epochs=1, seed=1))
        after = model.embedding.matrix
        assert np.array_equal(after[0], before[0])  # PAD pinned
        assert not np.array_equal(after[1:], before[1:])

    def test_best_epoch_recorded(self):
        data = toy_examples(14)
        _, hist = train(tiny_model("bilstm", seed=5), data, data,
                        TrainConfig(epochs=3, seed=2, keep_best=True))
        assert 1 <= hist.best_epoch <= 3
        assert hist.best_model is not None
        best_f1 = max(r.dev_macro_f1 for r in hist.records)
        assert hist.records[hist.best_epoch - 1].dev_macro_f1 == best_f1

    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            train(tiny_model("cnn", seed=0), [], toy_examples(2), TrainConfig(epochs=1))
