"""Pretrained word-embedding loading and vocabulary alignment."""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .text_pipeline import PAD_INDEX, Vocabulary


class EmbeddingParseError(ValueError):
    """Raised when an embedding text file violates its declared format."""


@dataclass
class KeyedVectors:
    """Token -> vector map with a fixed dimension."""

    dim: int
    entries: Dict[str, np.ndarray] = field(default_factory=dict)
    n_duplicates: int = 0


@dataclass
class EmbeddingMatrix:
    """V x D matrix aligned with a Vocabulary; row 0 (PAD) is pinned to zero."""

    matrix: np.ndarray
    dim: int
    trainable: bool
    n_pretrained: int = 0
    n_oov: int = 0


def load_embeddings(path: str, format: str = "headerless") -> KeyedVectors:
    """Parse a text embedding file.

    headerless: every line is ``token v1 ... vD``, D fixed by the first line.
    headered: the first line is ``V D``; exactly V vector lines follow.
    On duplicate tokens the last occurrence wins (counted in n_duplicates).
    """
    if format not in ("headerless", "headered"):
        raise EmbeddingParseError(f"unknown embedding format {format!r}")
    kv = None
    expected_rows = None
    n_rows = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if format == "headered" and lineno == 1:
                if len(parts) != 2:
                    raise EmbeddingParseError(f"{path}:1: expected 'V D' header")
                try:
                    expected_rows, dim = int(parts[0]), int(parts[1])
                except ValueError:
                    raise EmbeddingParseError(f"{path}:1: non-integer header fields") from None
                kv = KeyedVectors(dim=dim)
                continue
            token, comps = parts[0], parts[1:]
            if kv is None:
                if not comps:
                    raise EmbeddingParseError(f"{path}:{lineno}: no vector components")
                kv = KeyedVectors(dim=len(comps))
            if len(comps) != kv.dim:
                raise EmbeddingParseError(
                    f"{path}:{lineno}: expected {kv.dim} components, got {len(comps)}"
                )
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float64)
            except ValueError:
                raise EmbeddingParseError(f"{path}:{lineno}: non-numeric vector component") from None
            if token in kv.entries:
                kv.n_duplicates += 1
            kv.entries[token] = vec
            n_rows += 1
    if kv is None:
        raise EmbeddingParseError(f"{path}: empty embedding file")
    if expected_rows is not None and n_rows != expected_rows:
        raise EmbeddingParseError(
            f"{path}: header declares {expected_rows} rows, found {n_rows}"
        )
    return kv


def build_matrix(
    kv: KeyedVectors,
    vocab: Vocabulary,
    seed: int,
    trainable: bool,
    oov_low: float = -0.25,
    oov_high: float = 0.25,
) -> EmbeddingMatrix:
    """Align pretrained vectors with a vocabulary.

    In-vocabulary tokens copy their pretrained row; OOV tokens (including
    UNK) draw i.i.d. uniform [oov_low, oov_high) rows from a generator
    seeded by ``seed``. PAD stays all-zero.
    """
    if kv.dim < 1:
        raise ValueError("embedding dimension must be >= 1")
    rng = np.random.default_rng(seed)
    V = len(vocab)
    matrix = np.zeros((V, kv.dim), dtype=np.float64)
    n_pretrained = 0
    n_oov = 0
    for idx in range(1, V):
        token = vocab.index_to_token[idx]
        vec = kv.entries.get(token)
        if vec is not None:
            matrix[idx] = vec
            n_pretrained += 1
        else:
            matrix[idx] = rng.uniform(oov_low, oov_high, kv.dim)
            n_oov += 1
    return EmbeddingMatrix(
        matrix=matrix, dim=kv.dim, trainable=trainable,
        n_pretrained=n_pretrained, n_oov=n_oov,
    )


def lookup(emb: EmbeddingMatrix, indices: np.ndarray) -> np.ndarray:
    """Gather embedding rows; output position t is row indices[t]."""
    indices = np.asarray(indices)
    if indices.size and (indices.min() < 0 or indices.max() >= emb.matrix.shape[0]):
        raise IndexError("embedding index out of range")
    return emb.matrix[indices]


def lookup_backward(
    emb: EmbeddingMatrix,
    indices: np.ndarray,
    grad_out: np.ndarray,
    grad_matrix: Optional[np.ndarray] = None,
) -> Optional[np.ndarray]:
    """Accumulate upstream row gradients into an embedding-matrix gradient.

    Returns None for a frozen matrix. The PAD row never receives gradient.
    """
    if not emb.trainable:
        return None
    if grad_matrix is None:
        grad_matrix = np.zeros_like(emb.matrix)
    flat_idx = np.asarray(indices).reshape(-1)
    flat_grad = grad_out.reshape(-1, emb.matrix.shape[1])
    np.add.at(grad_matrix, flat_idx, flat_grad)
    grad_matrix[PAD_INDEX] = 0.0
    return grad_matrix
