"""Token vocabulary and embedding tables.

A table keeps one row per known token plus a final row for unknown tokens.
The rows live in a :class:`~carryover.tensor.Parameter`, so lookups are
differentiable and the table can be fine-tuned with the rest of the model.
"""

from __future__ import annotations

import io
import logging
import os
from typing import Iterable, Sequence, TextIO

import numpy as np

from . import tensor as T
from .errors import EmptyFile, EmptyTokenList, InconsistentDim, UnparsableLine

log = logging.getLogger(__name__)

UNK = "<unk>"


class EmbeddingTable:
    def __init__(
        self,
        tokens: Sequence[str],
        vectors: np.ndarray,
        unk_vector: np.ndarray | None = None,
        trainable: bool = True,
        duplicates: int = 0,
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise InconsistentDim(f"{len(tokens)} tokens but vectors of shape {vectors.shape}")
        self.dim = vectors.shape[1]
        self.vocab: dict[str, int] = {t: k for k, t in enumerate(tokens)}
        if len(self.vocab) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        if unk_vector is None:
            unk_vector = np.zeros(self.dim)
        unk_vector = np.asarray(unk_vector, dtype=np.float64)
        if unk_vector.shape != (self.dim,):
            raise InconsistentDim(f"unk vector has shape {unk_vector.shape}")
        self.unk_index = len(tokens)
        self.trainable = trainable
        self.duplicates = duplicates
        self.param = T.Parameter.create("embedding", np.vstack([vectors, unk_vector[None]]), trainable)

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.vocab

    @property
    def tokens(self) -> list[str]:
        return list(self.vocab)

    @property
    def matrix(self) -> np.ndarray:
        return self.param.value.data

    @property
    def unk_vector(self) -> np.ndarray:
        return self.matrix[self.unk_index]

    @property
    def entries(self) -> dict[str, np.ndarray]:
        m = self.matrix
        return {t: m[k] for t, k in self.vocab.items()}

    def index_of(self, token: str) -> int:
        return self.vocab.get(token.lower(), self.unk_index)

    def indices(self, tokens: Iterable[str]) -> list[int]:
        return [self.index_of(t) for t in tokens]

    def oov_rate(self, tokens: Iterable[str]) -> float:
        toks = list(tokens)
        if not toks:
            return 0.0
        return sum(t.lower() not in self.vocab for t in toks) / len(toks)

    def frozen_copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.tokens, self.matrix[:-1].copy(), self.unk_vector.copy(), trainable=False)

    @classmethod
    def random(
        cls,
        tokens: Iterable[str],
        dim: int,
        rng: np.random.Generator,
        pretrained: "EmbeddingTable | None" = None,
        trainable: bool = True,
    ) -> "EmbeddingTable":
        """Table over ``tokens``; rows come from ``pretrained`` when it has them.

        Other rows are drawn uniformly from ``[-a, a]``, ``a = sqrt(6 / (1 + dim))``.
        The unknown-token row is the pretrained unk vector, or zeros.
        """
        toks = list(dict.fromkeys(t.lower() for t in tokens))
        if pretrained is not None and pretrained.dim != dim:
            raise InconsistentDim(f"pretrained dim {pretrained.dim} != requested {dim}")
        a = np.sqrt(6.0 / (1 + dim))
        vecs = rng.uniform(-a, a, size=(len(toks), dim))
        unk = np.zeros(dim)
        if pretrained is not None:
            for k, t in enumerate(toks):
                if t in pretrained.vocab:
                    vecs[k] = pretrained.matrix[pretrained.vocab[t]]
            unk = pretrained.unk_vector.copy()
        return cls(toks, vecs, unk, trainable=trainable)


def load_vectors(source: "TextIO | str | os.PathLike") -> EmbeddingTable:
    """Parse whitespace-separated text vectors (``token v1 ... vD`` per line).

    An optional ``count dim`` header line is honoured. Tokens are case-folded;
    repeated tokens keep the last vector and are counted in ``duplicates``.
    The unknown-token vector is the mean of all loaded vectors.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            return load_vectors(fh)
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))

    rows: dict[str, list[float]] = {}
    duplicates = 0
    dim: int | None = None
    header_dim: int | None = None
    first = True
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n").strip()
        if not line:
            continue
        parts = line.split()
        if first:
            first = False
            if len(parts) == 2 and all(p.isdigit() for p in parts):
                header_dim = int(parts[1])
                continue
        if len(parts) < 2:
            raise UnparsableLine(lineno, "expected a token followed by numbers")
        try:
            vec = [float(v) for v in parts[1:]]
        except ValueError:
            raise UnparsableLine(lineno, "non-numeric vector component") from None
        if dim is None:
            dim = len(vec)
            if header_dim is not None and header_dim != dim:
                raise InconsistentDim(f"line {lineno}: header says {header_dim}, found {dim}")
        elif len(vec) != dim:
            raise InconsistentDim(f"line {lineno}: expected {dim} values, found {len(vec)}")
        tok = parts[0].lower()
        if tok in rows:
            duplicates += 1
        rows[tok] = vec
    if not rows:
        raise EmptyFile("no vectors found")
    if duplicates:
        log.warning("%d duplicate tokens in vector file; last occurrence kept", duplicates)
    mat = np.array(list(rows.values()), dtype=np.float64)
    return EmbeddingTable(list(rows), mat, mat.mean(axis=0), trainable=True, duplicates=duplicates)


def lookup(table: EmbeddingTable, token: str) -> T.Tensor:
    return T.index(table.param.value, table.index_of(token))


def average_tokens(table: EmbeddingTable, tokens: Sequence[str]) -> T.Tensor:
    if not tokens:
        raise EmptyTokenList("cannot average an empty token list")
    rows = T.take_rows(table.param.value, table.indices(tokens))
    return T.mean(rows, axis=0)
