"""Slot, dialogue and intent encoders.

A candidate slot is encoded as ``[key ; value ; distance]``: the mean
embedding of its key's word tokens, a value vector (mean raw embedding of
the span, or mean BiLSTM state over the span), and a learned 4-d distance
code. The dialogue context vector is the pair of final BiLSTM states over
the serialised dialogue.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .dialogue import CandidateSlot, Dialogue, Intent, Slot, Speaker, split_identifier
from .embeddings import EmbeddingTable, average_tokens
from .errors import EmptyIntent, EmptyKey, NegativeDistance, ShapeMismatch, SpanOutOfRange

DIST_DIM = 4
SEPARATORS = {Speaker.USER: "<sep_user>", Speaker.AGENT: "<sep_agent>"}


def key_tokens(key: str) -> list[str]:
    toks = split_identifier(key)
    if not toks:
        raise EmptyKey(f"slot key {key!r} has no word tokens")
    return toks


@dataclass
class SerializedDialogue:
    """Flat token stream with a separator before every turn but the first."""

    tokens: list[str]
    offsets: list[int]  # stream position of token 0 of each utterance, oldest first
    n_utterances: int

    @classmethod
    def of(cls, dialogue: Dialogue) -> "SerializedDialogue":
        tokens: list[str] = []
        offsets: list[int] = []
        for k, utt in enumerate(dialogue.utterances):
            if k > 0:
                tokens.append(SEPARATORS[utt.speaker])
            offsets.append(len(tokens))
            tokens.extend(utt.tokens)
        return cls(tokens, offsets, len(dialogue.utterances))

    def position(self, distance: int, i: int) -> int:
        return self.offsets[self.n_utterances - 1 - distance] + i


@dataclass
class BiLSTMWeights:
    fwd: tuple[T.Tensor, T.Tensor, T.Tensor]
    bwd: tuple[T.Tensor, T.Tensor, T.Tensor]

    @property
    def hidden(self) -> int:
        return self.fwd[1].shape[0]


@dataclass
class DialogueEncoding:
    context: T.Tensor  # [2H]
    states: T.Tensor  # [T_stream, 2H], separators included
    layout: SerializedDialogue
    embedded: T.Tensor | None = None  # [T_stream, D_emb] raw embeddings

    def token_states(self, distance: int) -> T.Tensor:
        """Contextual states of one utterance (separators excluded)."""
        k = self.layout.n_utterances - 1 - distance
        start = self.layout.offsets[k]
        end = self.layout.offsets[k + 1] - 1 if k + 1 < self.layout.n_utterances else len(self.layout.tokens)
        return T.index(self.states, slice(start, end))

    @property
    def all_token_states(self) -> list[T.Tensor]:
        return [self.token_states(d) for d in range(self.layout.n_utterances - 1, -1, -1)]


@dataclass
class DistanceEmbedding:
    table: T.Tensor  # [(d_max + 1), 4]

    def __post_init__(self):
        if self.table.ndim != 2 or self.table.shape[1] != DIST_DIM:
            raise ShapeMismatch(f"distance table must have {DIST_DIM} columns, got {self.table.shape}")

    @property
    def d_max(self) -> int:
        return self.table.shape[0] - 1

    def rows(self, distances: Sequence[int]) -> np.ndarray:
        d = np.asarray(distances, dtype=np.int64)
        if np.any(d < 0):
            raise NegativeDistance(f"negative distance in {list(distances)}")
        return np.minimum(d, self.d_max)


@dataclass
class SlotEncoding:
    x_key: T.Tensor
    x_val: T.Tensor
    x_dist: T.Tensor
    full: T.Tensor


def encode_slot_key(table: EmbeddingTable, key: str) -> T.Tensor:
    if not key:
        raise EmptyKey("empty slot key")
    return average_tokens(table, key_tokens(key))


def encode_intent(table: EmbeddingTable, intent: Intent | Sequence[str]) -> T.Tensor:
    toks = list(intent.tokens) if isinstance(intent, Intent) else list(intent)
    if not toks:
        raise EmptyIntent("empty intent")
    words = [w for t in toks for w in split_identifier(t)] or toks
    return average_tokens(table, words)


def encode_distance(dist_emb: DistanceEmbedding, d: int) -> T.Tensor:
    if d < 0:
        raise NegativeDistance(f"distance {d}")
    return T.index(dist_emb.table, min(d, dist_emb.d_max))


def assemble_slot_encoding(
    x_key: T.Tensor, x_val: T.Tensor, x_dist: T.Tensor, dims: tuple[int, int] | None = None
) -> SlotEncoding:
    if x_dist.shape != (DIST_DIM,):
        raise ShapeMismatch(f"distance code must have {DIST_DIM} entries, got {x_dist.shape}")
    if x_key.ndim != 1 or x_val.ndim != 1:
        raise ShapeMismatch("slot encoding parts must be vectors")
    if dims is not None and (x_key.shape[0], x_val.shape[0]) != tuple(dims):
        raise ShapeMismatch(f"key/value dims {(x_key.shape[0], x_val.shape[0])}, expected {dims}")
    return SlotEncoding(x_key, x_val, x_dist, T.concat([x_key, x_val, x_dist]))


def _check_span(dialogue: Dialogue, slot: Slot) -> None:
    try:
        slot.check(dialogue)
    except IndexError as e:
        raise SpanOutOfRange(str(e)) from None


def encode_slot_value_avg(table: EmbeddingTable, dialogue: Dialogue, slot: Slot) -> T.Tensor:
    _check_span(dialogue, slot)
    toks = dialogue.utterance(slot.distance).tokens[slot.span_left : slot.span_right + 1]
    return average_tokens(table, toks)


def encode_slot_value_ctx(enc: DialogueEncoding, slot: Slot) -> T.Tensor:
    k = enc.layout.n_utterances - 1 - slot.distance
    if not 0 <= k < enc.layout.n_utterances:
        raise SpanOutOfRange(f"distance {slot.distance} outside dialogue")
    states = enc.token_states(slot.distance)
    if slot.span_right >= states.shape[0]:
        raise SpanOutOfRange(f"span [{slot.span_left}:{slot.span_right}] beyond utterance")
    return T.mean(T.index(states, slice(slot.span_left, slot.span_right + 1)), axis=0)


def run_bilstm(
    table: EmbeddingTable,
    streams: Sequence[SerializedDialogue],
    weights: BiLSTMWeights,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[T.Tensor, T.Tensor, np.ndarray]:
    """Batched BiLSTM over serialised dialogues.

    Returns ``(embedded [B, T, D], states [B, T, 2H], lengths)``.
    """
    lengths = np.array([len(s.tokens) for s in streams], dtype=np.int64)
    T_max = int(lengths.max())
    ids = np.full((len(streams), T_max), table.unk_index, dtype=np.int64)
    for b, s in enumerate(streams):
        ids[b, : lengths[b]] = table.indices(s.tokens)
    emb = T.take_rows(table.param.value, ids)
    x = T.dropout(emb, dropout, train, rng)
    fwd = T.lstm_sequence(x, *weights.fwd, lengths=lengths)
    bwd = T.lstm_sequence(x, *weights.bwd, lengths=lengths, reverse=True)
    return emb, T.concat([fwd, bwd], axis=-1), lengths


def encode_dialogue(
    table: EmbeddingTable,
    dialogue: Dialogue,
    weights: BiLSTMWeights,
) -> DialogueEncoding:
    """Single-dialogue convenience wrapper around :func:`run_bilstm`."""
    layout = SerializedDialogue.of(dialogue)
    emb, states, lengths = run_bilstm(table, [layout], weights)
    H = weights.hidden
    seq = T.index(states, 0)
    L = int(lengths[0])
    context = T.concat(
        [T.index(seq, (L - 1, slice(0, H))), T.index(seq, (0, slice(H, 2 * H)))]
    )
    return DialogueEncoding(context, seq, layout, T.index(emb, 0))


def span_average_matrix(
    layout: SerializedDialogue, candidates: Sequence[CandidateSlot], width: int
) -> np.ndarray:
    """Row j averages stream positions covered by candidate j's span."""
    A = np.zeros((len(candidates), width))
    for j, cand in enumerate(candidates):
        s = cand.source
        lo = layout.position(s.distance, s.span_left)
        A[j, lo : lo + s.width] = 1.0 / s.width
    return A


def key_average(table: EmbeddingTable, keys: Sequence[str]) -> T.Tensor:
    """Stacked key encodings ``[N, D_emb]`` in a single gather."""
    ids: list[int] = []
    A_rows: list[tuple[int, int]] = []
    for k in keys:
        toks = key_tokens(k)
        A_rows.append((len(ids), len(toks)))
        ids.extend(table.indices(toks))
    A = np.zeros((len(keys), len(ids)))
    for j, (start, n) in enumerate(A_rows):
        A[j, start : start + n] = 1.0 / n
    return T.matmul(T.Tensor(A), T.take_rows(table.param.value, ids))
