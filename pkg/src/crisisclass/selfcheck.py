"""Verification battery: finite-difference gradient checks for every layer
and tiny end-to-end models, plus slow reference oracles for the convolution
and the confusion-matrix counters."""

from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from . import layers, models
from .embeddings import EmbeddingMatrix
from .gradcheck import grad_check
from .models import Model, ModelConfig

GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value < self.threshold


# ---------------------------------------------------------------------------
# reference oracles (deliberately naive scalar loops)


def naive_conv1d(x, filters, bias, activation: str = "relu") -> np.ndarray:
    """Scalar-loop valid convolution, accumulating k outer, d inner."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    N, L, D = x.shape
    F, K, _ = filters.shape
    Lout = L - K + 1
    out = np.zeros((N, Lout, F), dtype=np.float64)
    for n in range(N):
        for t in range(Lout):
            for f in range(F):
                acc = bias[f]
                for k in range(K):
                    for d in range(D):
                        acc += x[n, t + k, d] * filters[f, k, d]
                if activation == "relu" and acc < 0.0:
                    acc = 0.0
                out[n, t, f] = acc
    return out[0] if single else out


def brute_force_counts(golds, preds, num_classes: int) -> List[Tuple[int, int, int]]:
    """Per-class (TP, FP, FN) by direct pairwise counting."""
    result = []
    for c in range(num_classes):
        tp = fp = fn = 0
        for g, p in zip(golds, preds):
            if g == c and p == c:
                tp += 1
            elif g != c and p == c:
                fp += 1
            elif g == c and p != c:
                fn += 1
        result.append((tp, fp, fn))
    return result


# ---------------------------------------------------------------------------
# gradient-check setups


def _weighted_loss(out: np.ndarray, coeff: np.ndarray) -> float:
    return float((out * coeff).sum())


def check_dense(seed: int) -> float:
    rng = np.random.default_rng(seed)
    params = {
        "x": rng.normal(size=(3, 4)),
        "W": rng.normal(size=(4, 5)),
        "b": rng.normal(size=5),
    }
    coeff = rng.normal(size=(3, 5))

    def loss(p):
        out, _ = layers.dense_forward(p["x"], p["W"], p["b"], activation="relu")
        return _weighted_loss(out, coeff)

    out, cache = layers.dense_forward(params["x"], params["W"], params["b"], activation="relu")
    dx, dW, db = layers.dense_backward(cache, coeff)
    return grad_check(loss, params, {"x": dx, "W": dW, "b": db})


def check_conv1d(seed: int) -> float:
    rng = np.random.default_rng(seed)
    params = {
        "x": rng.normal(size=(6, 3)),
        "filters": rng.normal(size=(4, 3, 3)),
        "bias": rng.normal(size=4),
    }
    coeff = rng.normal(size=(4, 4))

    def loss(p):
        out, _ = layers.conv1d_forward(p["x"], p["filters"], p["bias"])
        return _weighted_loss(out, coeff)

    out, cache = layers.conv1d_forward(params["x"], params["filters"], params["bias"])
    dx, dfilters, dbias = layers.conv1d_backward(cache, coeff)
    return grad_check(loss, params, {"x": dx, "filters": dfilters, "bias": dbias})


def check_maxpool_composed(seed: int) -> float:
    """conv -> maxpool -> weighted sum, gradients w.r.t. conv inputs."""
    rng = np.random.default_rng(seed)
    params = {
        "x": rng.normal(size=(7, 3)),
        "filters": rng.normal(size=(4, 3, 3)),
        "bias": rng.normal(size=4),
    }
    coeff = rng.normal(size=(2, 4))

    def run(p):
        conv, conv_cache = layers.conv1d_forward(p["x"], p["filters"], p["bias"])
        pooled, pool_cache = layers.maxpool1d(conv, 2)
        return pooled, (conv_cache, pool_cache)

    def loss(p):
        pooled, _ = run(p)
        return _weighted_loss(pooled, coeff)

    pooled, (conv_cache, pool_cache) = run(params)
    dconv = layers.maxpool1d_backward(pool_cache, coeff)
    dx, dfilters, dbias = layers.conv1d_backward(conv_cache, dconv)
    return grad_check(loss, params, {"x": dx, "filters": dfilters, "bias": dbias})


def _random_lstm_params(rng: np.random.Generator, D: int, H: int) -> Dict[str, np.ndarray]:
    return {
        f"{kind}_{g}": rng.normal(
            scale=0.5,
            size=(D, H) if kind == "W" else (H, H) if kind == "U" else H,
        )
        for g in layers.GATES
        for kind in ("W", "U", "b")
    }


def check_lstm_step(seed: int) -> float:
    rng = np.random.default_rng(seed)
    D, H = 4, 3
    params = _random_lstm_params(rng, D, H)
    params["x"] = rng.normal(size=D)
    params["h"] = rng.normal(size=H)
    params["c"] = rng.normal(size=H)
    coeff_h = rng.normal(size=H)
    coeff_c = rng.normal(size=H)

    def split(p):
        cell = {k: v for k, v in p.items() if k not in ("x", "h", "c")}
        return p["x"], p["h"], p["c"], cell

    def loss(p):
        x, h, c, cell = split(p)
        h2, c2, _ = layers.lstm_step(x, h, c, cell)
        return float(h2 @ coeff_h + c2 @ coeff_c)

    x, h, c, cell = split(params)
    _, _, cache = layers.lstm_step(x, h, c, cell)
    dx, dh, dc, dcell = layers.lstm_step_backward(cache, coeff_h, coeff_c)
    analytic = dict(dcell)
    analytic.update({"x": dx, "h": dh, "c": dc})
    return grad_check(loss, params, analytic)


def check_bilstm(seed: int) -> float:
    rng = np.random.default_rng(seed)
    L, D, H, true_len = 4, 3, 3, 3
    fw = _random_lstm_params(rng, D, H)
    bw = _random_lstm_params(rng, D, H)
    params = {f"fw.{k}": v for k, v in fw.items()}
    params.update({f"bw.{k}": v for k, v in bw.items()})
    params["seq"] = rng.normal(size=(L, D))
    coeff = rng.normal(size=2 * H)

    def split(p):
        return (
            p["seq"],
            {k[3:]: v for k, v in p.items() if k.startswith("fw.")},
            {k[3:]: v for k, v in p.items() if k.startswith("bw.")},
        )

    def loss(p):
        seq, fwp, bwp = split(p)
        out, _ = layers.bilstm_forward(seq, true_len, fwp, bwp)
        return float(out @ coeff)

    seq, fwp, bwp = split(params)
    _, cache = layers.bilstm_forward(seq, true_len, fwp, bwp)
    dseq, dfw, dbw = layers.bilstm_backward(cache, coeff)
    analytic = {"seq": dseq}
    analytic.update({f"fw.{k}": v for k, v in dfw.items()})
    analytic.update({f"bw.{k}": v for k, v in dbw.items()})
    return grad_check(loss, params, analytic)


def check_softmax_ce(seed: int) -> float:
    rng = np.random.default_rng(seed)
    params = {"logits": rng.normal(size=(4, 7))}
    labels = rng.integers(0, 7, size=4)

    def loss(p):
        l, _, _ = layers.softmax_cross_entropy(p["logits"], labels)
        return float(l)

    _, _, grad = layers.softmax_cross_entropy(params["logits"], labels)
    return grad_check(loss, params, {"logits": grad}, epsilon=1e-6)


def tiny_model(arch: str, seed: int, vocab_size: int = 9) -> Model:
    config = ModelConfig(
        arch=arch, seq_len=6, embedding_dim=4, kernel_size=3, pool_size=2,
        num_filters=3, cnn_hidden=5, lstm_hidden=3, num_classes=7,
        keep_prob=1.0, fine_tune_embeddings=True,
    )
    rng = np.random.default_rng(seed + 17)
    emb = EmbeddingMatrix(
        matrix=np.vstack([np.zeros(4), rng.normal(size=(vocab_size - 1, 4))]),
        dim=4, trainable=True,
    )
    return models.build_model(config, emb, seed)


def check_full_model(arch: str, seed: int) -> float:
    """Finite-difference check of the whole composition, cross-entropy loss."""
    model = tiny_model(arch, seed)
    rng = np.random.default_rng(seed + 31)
    # Indices avoid PAD so the pinned PAD row stays out of the check.
    indices = rng.integers(1, model.embedding.matrix.shape[0], size=(2, 6))
    lengths = np.array([6, 4])
    labels = rng.integers(0, 7, size=2)

    def loss(p):
        work = Model(config=model.config,
                     embedding=EmbeddingMatrix(matrix=p["embedding"], dim=4, trainable=True),
                     params=dict(p))
        logits, _ = models.forward(work, indices, lengths, mode="train")
        l, _, _ = layers.softmax_cross_entropy(logits, labels)
        return float(l)

    _, _, grads = models.loss_and_grads(model, indices, lengths, labels, mode="train")
    return grad_check(loss, model.params, grads)


# ---------------------------------------------------------------------------
# battery


LAYER_CHECKS: Dict[str, Callable[[int], float]] = {
    "dense": check_dense,
    "conv1d": check_conv1d,
    "maxpool_composed": check_maxpool_composed,
    "lstm_step": check_lstm_step,
    "bilstm": check_bilstm,
    "softmax_cross_entropy": check_softmax_ce,
    "full_cnn": lambda seed: check_full_model("cnn", seed),
    "full_bilstm": lambda seed: check_full_model("bilstm", seed),
}


def run_gradient_battery(seeds: Sequence[int] = range(3)) -> List[CheckResult]:
    results = []
    for name, fn in LAYER_CHECKS.items():
        worst = max(fn(seed) for seed in seeds)
        results.append(CheckResult(f"grad/{name}", worst, GRAD_TOL))
    return results


def run_conv_oracle(n_cases: int = 20, seed: int = 0) -> CheckResult:
    """Bitwise comparison of conv1d_forward against the scalar-loop oracle."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        K = int(rng.integers(1, 4))
        L = int(rng.integers(K, K + 6))
        D = int(rng.integers(1, 5))
        F = int(rng.integers(1, 5))
        x = rng.normal(size=(L, D))
        filters = rng.normal(size=(F, K, D))
        bias = rng.normal(size=F)
        fast, _ = layers.conv1d_forward(x, filters, bias)
        slow = naive_conv1d(x, filters, bias)
        if not np.array_equal(fast, slow):
            worst = max(worst, float(np.abs(fast - slow).max()) or 1.0)
    return CheckResult("oracle/conv1d_bitwise", worst, threshold=np.nextafter(0, 1))


def run_confusion_oracle(n_cases: int = 20, seed: int = 0) -> CheckResult:
    from . import evaluation

    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(n_cases):
        n = int(rng.integers(1, 200))
        golds = rng.integers(0, 7, size=n)
        preds = rng.integers(0, 7, size=n)
        cm = evaluation.confusion(golds, preds)
        expected = brute_force_counts(golds.tolist(), preds.tolist(), 7)
        for c, (tp, fp, fn) in enumerate(expected):
            if (cm.tp(c), cm.fp(c), cm.fn(c)) != (tp, fp, fn):
                mismatches += 1
    return CheckResult("oracle/confusion_counts", float(mismatches), threshold=0.5)


def run_all(seeds: Sequence[int] = range(3)) -> List[CheckResult]:
    results = run_gradient_battery(seeds)
    results.append(run_conv_oracle())
    results.append(run_confusion_oracle())
    return results
