"""Binary model checkpoints.

Layout::

    MAGIC (16 bytes) | version: u32 LE | header length: u64 LE
    | header: UTF-8 JSON | tensor data: f8 LE, concatenated in header order

The header holds the model config, the vocabulary and the name and shape of
every tensor, so a checkpoint is all ``eval`` and ``predict`` need.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .embeddings import EmbeddingTable
from .errors import CorruptCheckpoint, VersionMismatch
from .model import CarryoverModel, ModelConfig
from . import tensor as T

MAGIC = b"CARRYOVER-CKPT\x00\x01"
VERSION = 1
_PREFIX = struct.Struct("<IQ")
_F8 = np.dtype("<f8")


def checkpoint_bytes(model: CarryoverModel) -> bytes:
    named = model.named_parameters()
    header = {
        "config": model.config.to_dict(),
        "vocab": model.embeddings.tokens,
        "embedding_trainable": model.embeddings.trainable,
        "tensors": [{"name": k, "shape": list(p.shape)} for k, p in named.items()],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(p.value.data, dtype=_F8).tobytes() for p in named.values())
    return MAGIC + _PREFIX.pack(VERSION, len(head)) + head + body


def save_checkpoint(model: CarryoverModel, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))


def model_from_bytes(blob: bytes, expected_version: int = VERSION) -> CarryoverModel:
    if len(blob) < len(MAGIC) + _PREFIX.size or not blob.startswith(MAGIC):
        raise CorruptCheckpoint("not a carryover checkpoint")
    version, head_len = _PREFIX.unpack_from(blob, len(MAGIC))
    if version != expected_version:
        raise VersionMismatch(f"checkpoint version {version}, reader expects {expected_version}")
    start = len(MAGIC) + _PREFIX.size
    if len(blob) < start + head_len:
        raise CorruptCheckpoint("truncated header")
    try:
        header = json.loads(blob[start : start + head_len].decode("utf-8"))
        config = ModelConfig.from_dict(header["config"])
        specs = [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
        vocab = header["vocab"]
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptCheckpoint(f"bad header: {e}") from None

    data = blob[start + head_len :]
    need = sum(int(np.prod(s)) for _, s in specs) * _F8.itemsize
    if len(data) != need:
        raise CorruptCheckpoint(f"tensor data is {len(data)} bytes, header describes {need}")
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in specs:
        n = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, _F8, n, offset).reshape(shape).astype(np.float64)
        offset += n * _F8.itemsize

    emb = arrays.pop("embedding", None)
    if emb is None or emb.shape[0] != len(vocab) + 1:
        raise CorruptCheckpoint("embedding tensor missing or inconsistent with vocabulary")
    table = EmbeddingTable(vocab, emb[:-1], emb[-1], trainable=bool(header.get("embedding_trainable", True)))
    params = {k: T.Parameter.create(k, v) for k, v in arrays.items()}
    return CarryoverModel(config, table, params)


def load_checkpoint(path: str | os.PathLike, expected_version: int = VERSION) -> CarryoverModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read(), expected_version)
