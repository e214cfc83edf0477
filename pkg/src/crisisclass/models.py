"""The two classifier architectures assembled from the layer primitives."""

import copy
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import layers
from .embeddings import EmbeddingMatrix, lookup, lookup_backward
from .text_pipeline import EncodedExample


@dataclass
class ModelConfig:
    """Architecture choice plus hyperparameters (defaults per the toolkit's
    standard experiment setup: kernel 3, pool 2, 250 filters, CNN hidden 128,
    LSTM hidden 100, 7 classes)."""

    arch: str = "cnn"
    seq_len: int = 30
    embedding_dim: int = 100
    kernel_size: int = 3
    pool_size: int = 2
    num_filters: int = 250
    cnn_hidden: int = 128
    lstm_hidden: int = 100
    num_classes: int = 7
    keep_prob: float = 0.5
    fine_tune_embeddings: bool = True
    global_pool: bool = False

    def __post_init__(self):
        if self.arch not in ("cnn", "bilstm"):
            raise ValueError(f"arch must be 'cnn' or 'bilstm', got {self.arch!r}")
        for name in ("seq_len", "embedding_dim", "kernel_size", "pool_size",
                     "num_filters", "cnn_hidden", "lstm_hidden", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def flatten_width(self) -> int:
        conv_len = self.seq_len - self.kernel_size + 1
        if self.global_pool:
            return self.num_filters
        return (conv_len // self.pool_size) * self.num_filters


@dataclass
class Model:
    config: ModelConfig
    embedding: EmbeddingMatrix
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "Model":
        clone = Model(
            config=copy.deepcopy(self.config),
            embedding=EmbeddingMatrix(
                matrix=self.embedding.matrix.copy(),
                dim=self.embedding.dim,
                trainable=self.embedding.trainable,
                n_pretrained=self.embedding.n_pretrained,
                n_oov=self.embedding.n_oov,
            ),
        )
        clone.params = {name: p.copy() for name, p in self.params.items()}
        clone.params["embedding"] = clone.embedding.matrix
        return clone


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def build_model(config: ModelConfig, emb: EmbeddingMatrix, seed: int) -> Model:
    """Initialize a model: Glorot-uniform weights, zero biases, LSTM
    forget-gate bias 1.0. Same config + seed gives bit-identical params."""
    if emb.dim != config.embedding_dim:
        raise ValueError(
            f"embedding dim {emb.dim} does not match config {config.embedding_dim}"
        )
    if emb.matrix.shape[0] < 2:
        raise ValueError("embedding must cover at least PAD and UNK")
    emb.trainable = config.fine_tune_embeddings
    rng = np.random.default_rng(seed)
    params: Dict[str, np.ndarray] = {}
    D, C = config.embedding_dim, config.num_classes
    if config.arch == "cnn":
        F, K = config.num_filters, config.kernel_size
        params["conv.filters"] = _glorot(rng, (F, K, D), fan_in=K * D, fan_out=F)
        params["conv.bias"] = np.zeros(F)
        flat = config.flatten_width()
        params["dense1.W"] = _glorot(rng, (flat, config.cnn_hidden), flat, config.cnn_hidden)
        params["dense1.b"] = np.zeros(config.cnn_hidden)
        params["out.W"] = _glorot(rng, (config.cnn_hidden, C), config.cnn_hidden, C)
        params["out.b"] = np.zeros(C)
    else:
        H = config.lstm_hidden
        for direction in ("fw", "bw"):
            for g in layers.GATES:
                params[f"lstm_{direction}.W_{g}"] = _glorot(rng, (D, H), D, H)
                params[f"lstm_{direction}.U_{g}"] = _glorot(rng, (H, H), H, H)
                bias = np.zeros(H)
                if g == "f":
                    bias += 1.0
                params[f"lstm_{direction}.b_{g}"] = bias
        params["out.W"] = _glorot(rng, (2 * H, C), 2 * H, C)
        params["out.b"] = np.zeros(C)
    params["embedding"] = emb.matrix
    return Model(config=config, embedding=emb, params=params)


def _lstm_param_view(params: Dict[str, np.ndarray], direction: str) -> Dict[str, np.ndarray]:
    prefix = f"lstm_{direction}."
    return {name[len(prefix):]: p for name, p in params.items() if name.startswith(prefix)}


def batch_arrays(batch: List[EncodedExample]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack a list of EncodedExamples into (indices, lengths, labels)."""
    indices = np.stack([ex.indices for ex in batch])
    lengths = np.array([ex.true_length for ex in batch], dtype=np.int64)
    labels = np.array([ex.label for ex in batch], dtype=np.int64)
    return indices, lengths, labels


def forward(
    model: Model,
    indices: np.ndarray,
    lengths: np.ndarray,
    mode: str = "infer",
    rng: Optional[np.random.Generator] = None,
):
    """Run the full architecture on a padded index batch; returns
    (logits (N, C), cache).

    CNN: lookup -> dropout -> conv+relu -> maxpool -> flatten ->
    dense+relu -> dropout -> dense. Bi-LSTM: lookup -> dropout ->
    masked bidirectional final-state concat -> dropout -> dense.
    """
    cfg = model.config
    p = model.params
    indices = np.asarray(indices)
    lengths = np.asarray(lengths, dtype=np.int64)
    emb_out = lookup(model.embedding, indices)
    x, drop1 = layers.dropout_apply(emb_out, cfg.keep_prob, mode, rng)
    if cfg.arch == "cnn":
        conv_out, conv_cache = layers.conv1d_forward(
            x, p["conv.filters"], p["conv.bias"], activation="relu")
        if cfg.global_pool:
            pooled, pool_cache = layers.maxpool1d(conv_out, conv_out.shape[1])
        else:
            pooled, pool_cache = layers.maxpool1d(conv_out, cfg.pool_size)
        flat = pooled.reshape(pooled.shape[0], -1)
        hidden, dense1_cache = layers.dense_forward(
            flat, p["dense1.W"], p["dense1.b"], activation="relu")
        dropped, drop2 = layers.dropout_apply(hidden, cfg.keep_prob, mode, rng)
        logits, out_cache = layers.dense_forward(dropped, p["out.W"], p["out.b"])
        cache = ("cnn", indices, drop1, conv_cache, pool_cache, pooled.shape,
                 dense1_cache, drop2, out_cache)
    else:
        fw = _lstm_param_view(p, "fw")
        bw = _lstm_param_view(p, "bw")
        states, bilstm_cache = layers.bilstm_batch(x, lengths, fw, bw)
        dropped, drop2 = layers.dropout_apply(states, cfg.keep_prob, mode, rng)
        logits, out_cache = layers.dense_forward(dropped, p["out.W"], p["out.b"])
        cache = ("bilstm", indices, drop1, bilstm_cache, drop2, out_cache)
    return logits, cache


def backward(model: Model, cache, grad_logits: np.ndarray) -> Dict[str, np.ndarray]:
    """Backward through the composition; returns named gradients.

    The 'embedding' entry is present only when the embedding is trainable,
    and its PAD row is always zero.
    """
    grads: Dict[str, np.ndarray] = {}
    if cache[0] == "cnn":
        _, indices, drop1, conv_cache, pool_cache, pooled_shape, dense1_cache, drop2, out_cache = cache
        ddropped, grads["out.W"], grads["out.b"] = layers.dense_backward(out_cache, grad_logits)
        dhidden = layers.dropout_backward(drop2, ddropped)
        dflat, grads["dense1.W"], grads["dense1.b"] = layers.dense_backward(dense1_cache, dhidden)
        dpooled = dflat.reshape(pooled_shape)
        dconv = layers.maxpool1d_backward(pool_cache, dpooled)
        dx, grads["conv.filters"], grads["conv.bias"] = layers.conv1d_backward(conv_cache, dconv)
    else:
        _, indices, drop1, bilstm_cache, drop2, out_cache = cache
        ddropped, grads["out.W"], grads["out.b"] = layers.dense_backward(out_cache, grad_logits)
        dstates = layers.dropout_backward(drop2, ddropped)
        dx, dfw, dbw = layers.bilstm_batch_backward(bilstm_cache, dstates)
        for name, g in dfw.items():
            grads[f"lstm_fw.{name}"] = g
        for name, g in dbw.items():
            grads[f"lstm_bw.{name}"] = g
    demb = layers.dropout_backward(drop1, dx)
    grad_matrix = lookup_backward(model.embedding, indices, demb)
    if grad_matrix is not None:
        grads["embedding"] = grad_matrix
    return grads


def loss_and_grads(
    model: Model,
    indices: np.ndarray,
    lengths: np.ndarray,
    labels: np.ndarray,
    mode: str = "train",
    rng: Optional[np.random.Generator] = None,
):
    """forward + softmax cross-entropy + backward in one call.

    Returns (loss, probs, grads).
    """
    logits, cache = forward(model, indices, lengths, mode=mode, rng=rng)
    loss, probs, grad_logits = layers.softmax_cross_entropy(logits, labels)
    grads = backward(model, cache, grad_logits)
    return loss, probs, grads


def predict(model: Model, example: EncodedExample) -> Tuple[np.ndarray, int]:
    """Class distribution and argmax class (lowest index wins ties)."""
    logits, _ = forward(
        model, example.indices[None], np.array([max(example.true_length, 1)]))
    dist = layers.softmax(logits[0])
    return dist, int(np.argmax(dist))
