"""Neural layers with explicit forward and backward passes (float64, numpy).

Every forward returns (output, cache); the matching *_backward consumes the
cache plus the upstream gradient. Reductions that must be bit-reproducible
(the conv window sum) use a documented sequential accumulation order.
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

GATES = ("i", "f", "o", "g")


class ShapeError(ValueError):
    """Raised on non-conforming operand shapes."""


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# dense


def dense_forward(x, W, b, activation: str = "identity"):
    """out = act(x @ W + b), rowwise. activation in {identity, relu}."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.shape[0] or W.shape[1] != b.shape[0]:
        raise ShapeError(f"dense shapes do not conform: x{x.shape} W{W.shape} b{b.shape}")
    if activation not in ("identity", "relu"):
        raise ValueError(f"unknown activation {activation!r}")
    z = x @ W + b
    out = np.maximum(z, 0.0) if activation == "relu" else z
    return out, (x, W, z, activation)


def dense_backward(cache, grad_out):
    x, W, z, activation = cache
    dz = grad_out * (z > 0) if activation == "relu" else grad_out
    dx = dz @ W.T
    dW = x.T @ dz
    db = dz.sum(axis=0)
    return dx, dW, db


# ---------------------------------------------------------------------------
# 1-D convolution (valid, no padding)


def conv1d_forward(x, filters, bias, activation: str = "relu"):
    """Valid 1-D convolution over a (L, D) or batched (N, L, D) input.

    out[t, f] = act(bias[f] + sum_k sum_d x[t+k, d] * filters[f, k, d]),
    accumulated sequentially with k outer, d inner, so results are
    bit-identical to a scalar loop in that order.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    N, L, D = x.shape
    F, K, Df = filters.shape
    if Df != D or bias.shape != (F,):
        raise ShapeError(f"conv shapes do not conform: x{x.shape} filters{filters.shape}")
    if L < K:
        raise ShapeError(f"input length {L} shorter than kernel {K}")
    if activation not in ("identity", "relu"):
        raise ValueError(f"unknown activation {activation!r}")
    Lout = L - K + 1
    z = np.empty((N, Lout, F), dtype=np.float64)
    z[...] = bias
    for k in range(K):
        for d in range(D):
            z += x[:, k:k + Lout, d, None] * filters[:, k, d]
    out = np.maximum(z, 0.0) if activation == "relu" else z
    if single:
        out = out[0]
    return out, (x, filters, z, activation, single)


def conv1d_backward(cache, grad_out):
    x, filters, z, activation, single = cache
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if single:
        grad_out = grad_out[None]
    dz = grad_out * (z > 0) if activation == "relu" else grad_out
    N, Lout, F = dz.shape
    _, K, D = filters.shape
    dx = np.zeros_like(x)
    dfilters = np.zeros_like(filters)
    for k in range(K):
        for d in range(D):
            dfilters[:, k, d] = np.einsum("nt,ntf->f", x[:, k:k + Lout, d], dz)
            dx[:, k:k + Lout, d] += dz @ filters[:, k, d]
    dbias = dz.sum(axis=(0, 1))
    if single:
        dx = dx[0]
    return dx, dfilters, dbias


# ---------------------------------------------------------------------------
# max pooling (non-overlapping windows, trailing remainder dropped)


def maxpool1d(x, window: int):
    """Max over consecutive windows of size `window` (stride = window).

    Backward routes gradient to the first-occurring max of each window.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    N, T, F = x.shape
    if window < 1 or T < window:
        raise ShapeError(f"cannot pool length {T} with window {window}")
    P = T // window
    view = x[:, :P * window, :].reshape(N, P, window, F)
    out = view.max(axis=2)
    argmax = view.argmax(axis=2)
    if single:
        out = out[0]
    return out, (x.shape, window, argmax, single)


def maxpool1d_backward(cache, grad_out):
    shape, window, argmax, single = cache
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if single:
        grad_out = grad_out[None]
    N, T, F = shape
    P = argmax.shape[1]
    dview = np.zeros((N, P, window, F), dtype=np.float64)
    np.put_along_axis(dview, argmax[:, :, None, :], grad_out[:, :, None, :], axis=2)
    dx = np.zeros(shape, dtype=np.float64)
    dx[:, :P * window, :] = dview.reshape(N, P * window, F)
    if single:
        dx = dx[0]
    return dx


# ---------------------------------------------------------------------------
# LSTM cell


def init_lstm_params(input_dim: int, hidden: int) -> Dict[str, np.ndarray]:
    """Zero-initialized per-gate parameter dict (W_g, U_g, b_g for i,f,o,g)."""
    params = {}
    for g in GATES:
        params[f"W_{g}"] = np.zeros((input_dim, hidden), dtype=np.float64)
        params[f"U_{g}"] = np.zeros((hidden, hidden), dtype=np.float64)
        params[f"b_{g}"] = np.zeros(hidden, dtype=np.float64)
    return params


def lstm_step(x, h, c, params):
    """One LSTM cell update.

    i, f, o = sigmoid(x W + h U + b) per gate, g = tanh(x W_g + h U_g + b_g);
    c' = f * c + i * g; h' = o * tanh(c'). Accepts single vectors or
    (N, dim) batches.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x, h, c = x[None], h[None], c[None]
    if x.shape[1] != params["W_i"].shape[0] or h.shape[1] != params["U_i"].shape[0]:
        raise ShapeError(
            f"lstm shapes do not conform: x{x.shape} h{h.shape} W_i{params['W_i'].shape}"
        )
    gates = {}
    for g in GATES:
        pre = x @ params[f"W_{g}"] + h @ params[f"U_{g}"] + params[f"b_{g}"]
        gates[g] = np.tanh(pre) if g == "g" else sigmoid(pre)
    c_new = gates["f"] * c + gates["i"] * gates["g"]
    tanh_c = np.tanh(c_new)
    h_new = gates["o"] * tanh_c
    cache = (x, h, c, gates, tanh_c, params, single)
    if single:
        return h_new[0], c_new[0], cache
    return h_new, c_new, cache


def lstm_step_backward(cache, grad_h, grad_c):
    """Backward through one LSTM step.

    Returns (dx, dh_prev, dc_prev, dparams) for upstream gradients w.r.t.
    the step's outputs h' and c'.
    """
    x, h, c, gates, tanh_c, params, single = cache
    grad_h = np.asarray(grad_h, dtype=np.float64)
    grad_c = np.asarray(grad_c, dtype=np.float64)
    if single:
        grad_h, grad_c = grad_h[None], grad_c[None]
    i, f, o, g = gates["i"], gates["f"], gates["o"], gates["g"]
    do = grad_h * tanh_c
    dc_total = grad_h * o * (1.0 - tanh_c ** 2) + grad_c
    dpre = {
        "i": dc_total * g * i * (1.0 - i),
        "f": dc_total * c * f * (1.0 - f),
        "o": do * o * (1.0 - o),
        "g": dc_total * i * (1.0 - g ** 2),
    }
    dc_prev = dc_total * f
    dx = np.zeros_like(x)
    dh_prev = np.zeros_like(h)
    dparams = {}
    for gate in GATES:
        dz = dpre[gate]
        dparams[f"W_{gate}"] = x.T @ dz
        dparams[f"U_{gate}"] = h.T @ dz
        dparams[f"b_{gate}"] = dz.sum(axis=0)
        dx += dz @ params[f"W_{gate}"].T
        dh_prev += dz @ params[f"U_{gate}"].T
    if single:
        dx, dh_prev, dc_prev = dx[0], dh_prev[0], dc_prev[0]
    return dx, dh_prev, dc_prev, dparams


# ---------------------------------------------------------------------------
# bidirectional LSTM over padded batches


def _masked_scan(x, lengths, params):
    """Run lstm_step over time with per-example masking.

    x: (N, L, D); positions t >= lengths[n] never influence example n's
    state (the computed update is discarded exactly, so outputs are
    bit-identical under arbitrary PAD-suffix content).
    Returns (final h (N, H), list of per-step (cache, mask)).
    """
    N, L, _ = x.shape
    H = params["U_i"].shape[0]
    h = np.zeros((N, H), dtype=np.float64)
    c = np.zeros((N, H), dtype=np.float64)
    steps = []
    t_max = int(lengths.max())
    for t in range(t_max):
        mask = (t < lengths)[:, None]
        h_new, c_new, cache = lstm_step(x[:, t], h, c, params)
        h = np.where(mask, h_new, h)
        c = np.where(mask, c_new, c)
        steps.append((cache, mask))
    return h, steps


def _masked_scan_backward(steps, grad_h, dparams):
    """BPTT through a masked scan; returns per-step input gradients (list)."""
    H = grad_h.shape[1]
    dc = np.zeros_like(grad_h)
    dh = grad_h
    dx_steps = []
    for cache, mask in reversed(steps):
        dx_t, dh_prev, dc_prev, dp = lstm_step_backward(cache, dh * mask, dc * mask)
        for name, g in dp.items():
            dparams[name] += g
        dh = dh_prev + dh * ~mask
        dc = dc_prev + dc * ~mask
        dx_steps.append(dx_t)
    dx_steps.reverse()
    return dx_steps


def bilstm_batch(x, lengths, fw_params, bw_params):
    """Bidirectional LSTM readout for a padded batch.

    x: (N, L, D); lengths: (N,) with 1 <= lengths[n] <= L. The forward
    direction scans positions 0..len-1; the backward direction scans the
    reversed prefix. Output is concat(h_fw, h_bw), shape (N, 2H).
    """
    x = np.asarray(x, dtype=np.float64)
    N, L, D = x.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.min() < 1 or lengths.max() > L:
        raise ShapeError(f"lengths must lie in [1, {L}]")
    h_fw, steps_fw = _masked_scan(x, lengths, fw_params)
    # Reversed prefixes, PAD tail replaced by zeros so reversed-scan input
    # carries no PAD content at all.
    x_rev = np.zeros_like(x)
    for n in range(N):
        ln = lengths[n]
        x_rev[n, :ln] = x[n, :ln][::-1]
    h_bw, steps_bw = _masked_scan(x_rev, lengths, bw_params)
    out = np.concatenate([h_fw, h_bw], axis=1)
    cache = (x.shape, lengths, steps_fw, steps_bw, fw_params, bw_params)
    return out, cache


def bilstm_batch_backward(cache, grad_out):
    """Backward for bilstm_batch; returns (dx, dfw_params, dbw_params)."""
    shape, lengths, steps_fw, steps_bw, fw_params, bw_params = cache
    N, L, D = shape
    H = grad_out.shape[1] // 2
    dfw = {name: np.zeros_like(p) for name, p in fw_params.items()}
    dbw = {name: np.zeros_like(p) for name, p in bw_params.items()}
    dx = np.zeros(shape, dtype=np.float64)
    dx_fw_steps = _masked_scan_backward(steps_fw, np.ascontiguousarray(grad_out[:, :H]), dfw)
    for t, dx_t in enumerate(dx_fw_steps):
        dx[:, t] += dx_t
    dx_bw_steps = _masked_scan_backward(steps_bw, np.ascontiguousarray(grad_out[:, H:]), dbw)
    for t, dx_t in enumerate(dx_bw_steps):
        for n in range(N):
            if t < lengths[n]:
                dx[n, lengths[n] - 1 - t] += dx_t[n]
    return dx, dfw, dbw


def bilstm_forward(seq, true_length: int, fw_params, bw_params):
    """Single-sequence bidirectional readout: concat of final states, (2H,)."""
    seq = np.asarray(seq, dtype=np.float64)
    if true_length < 1 or true_length > seq.shape[0]:
        raise ShapeError(f"true_length {true_length} outside [1, {seq.shape[0]}]")
    out, cache = bilstm_batch(seq[None], np.array([true_length]), fw_params, bw_params)
    return out[0], cache


def bilstm_backward(cache, grad_out):
    """Backward for bilstm_forward; returns (dseq, dfw_params, dbw_params)."""
    dx, dfw, dbw = bilstm_batch_backward(cache, np.asarray(grad_out)[None])
    return dx[0], dfw, dbw


# ---------------------------------------------------------------------------
# dropout (inverted: survivors scaled by 1/p at train time)


def dropout_apply(x, keep_prob: float, mode: str, rng: Optional[np.random.Generator] = None):
    """Inverted dropout. Train mode zeroes elements with probability
    1 - keep_prob and scales survivors by 1/keep_prob; infer mode is the
    identity."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    if mode not in ("train", "infer"):
        raise ValueError(f"unknown dropout mode {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if mode == "infer" or keep_prob == 1.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout requires a seeded generator")
    mask = rng.random(x.shape) < keep_prob
    return x * mask / keep_prob, (mask, keep_prob)


def dropout_backward(cache, grad_out):
    if cache is None:
        return np.asarray(grad_out, dtype=np.float64)
    mask, keep_prob = cache
    return grad_out * mask / keep_prob


# ---------------------------------------------------------------------------
# softmax cross-entropy


def softmax(logits: np.ndarray) -> np.ndarray:
    """Rowwise softmax with max-subtraction for numerical stability."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns (loss, probs, grad_logits) with grad_logits = (probs - onehot)/N.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    N, C = logits.shape
    if labels.shape != (N,):
        raise ShapeError(f"labels shape {labels.shape} does not match batch {N}")
    if labels.size and (labels.min() < 0 or labels.max() >= C):
        raise ValueError("label out of range")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(log_probs)
    loss = -log_probs[np.arange(N), labels].mean()
    grad = probs.copy()
    grad[np.arange(N), labels] -= 1.0
    grad /= N
    return loss, probs, grad
