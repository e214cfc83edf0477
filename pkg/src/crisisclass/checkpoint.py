"""Binary model checkpoints: JSON header, named float64 tensors, checksum."""

import dataclasses
import hashlib
import json
import struct
from typing import Dict, Tuple

import numpy as np

from .embeddings import EmbeddingMatrix
from .models import Model, ModelConfig

MAGIC = b"CRISCKPT"
FORMAT_VERSION = 1


class IntegrityError(RuntimeError):
    """Raised when a checkpoint fails its checksum or structural checks."""


def _checksum(payload: bytes) -> int:
    # 64-bit payload checksum: leading 8 bytes of SHA-256, little-endian.
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


def save_checkpoint(
    path: str,
    model: Model,
    vocab_hash: str = "",
    stopwords_hash: str = "",
) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "arch": model.config.arch,
        "config": dataclasses.asdict(model.config),
        "vocab_size": int(model.embedding.matrix.shape[0]),
        "embedding_dim": int(model.embedding.dim),
        "vocab_hash": vocab_hash,
        "stopwords_hash": stopwords_hash,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [struct.pack("<I", len(header_bytes)), header_bytes]
    names = sorted(model.params)
    chunks.append(struct.pack("<I", len(names)))
    for name in names:
        arr = np.ascontiguousarray(model.params[name], dtype=np.float64)
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    payload = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(payload)
        f.write(struct.pack("<Q", _checksum(payload)))


def load_checkpoint(path: str) -> Tuple[Model, dict]:
    """Load and verify a checkpoint; returns (model, header dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 8 or blob[:len(MAGIC)] != MAGIC:
        raise IntegrityError(f"{path}: not a crisisclass checkpoint")
    payload, (stored,) = blob[len(MAGIC):-8], struct.unpack("<Q", blob[-8:])
    if _checksum(payload) != stored:
        raise IntegrityError(f"{path}: checksum mismatch, file is corrupt")
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(payload):
            raise IntegrityError(f"{path}: truncated checkpoint")
        chunk = payload[off:off + n]
        off += n
        return chunk

    header_len, = struct.unpack("<I", take(4))
    header = json.loads(take(header_len).decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise IntegrityError(
            f"{path}: unsupported format version {header.get('format_version')}"
        )
    n_records, = struct.unpack("<I", take(4))
    params: Dict[str, np.ndarray] = {}
    for _ in range(n_records):
        name_len, = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        rank, = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        count = int(np.prod(shape)) if rank else 1
        data = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape)
        params[name] = np.array(data, dtype=np.float64)
    config = ModelConfig(**header["config"])
    emb = EmbeddingMatrix(
        matrix=params["embedding"],
        dim=header["embedding_dim"],
        trainable=config.fine_tune_embeddings,
    )
    model = Model(config=config, embedding=emb, params=params)
    return model, header
