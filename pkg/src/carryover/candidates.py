"""Candidate slot generation: map context slots into the current schema."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dialogue import CandidateSlot, Dialogue, Slot, slot_value_tokens
from .embeddings import EmbeddingTable
from .encoders import encode_slot_key
from .errors import EmptySchema, ZeroVector


@dataclass(frozen=True)
class Schema:
    domain: str
    keys: frozenset[str]

    def __post_init__(self):
        if not self.keys:
            raise EmptySchema(f"schema for {self.domain!r} has no keys")

    @classmethod
    def of(cls, domain: str, keys: Iterable[str]) -> "Schema":
        return cls(domain, frozenset(keys))


def cosine_similarity(a, b) -> float:
    a = np.asarray(getattr(a, "data", a), dtype=np.float64)
    b = np.asarray(getattr(b, "data", b), dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def generate_candidates(
    dialogue: Dialogue,
    context_slots: Sequence[Slot],
    schema: Schema,
    key_table: EmbeddingTable,
    tau: float = 0.6,
) -> list[CandidateSlot]:
    """Map each slot onto its most similar schema key.

    Context slots (distance >= 1) whose best similarity is below ``tau`` are
    dropped. Current-turn slots pass through with their own key. Duplicate
    (key, value) candidates keep the smallest distance. Output is in
    dialogue order: distance descending, then span start.
    """
    if not schema.keys:
        raise EmptySchema(schema.domain)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau {tau} outside [0, 1]")
    schema_keys = sorted(schema.keys)
    schema_vecs = {k: encode_slot_key(key_table, k).data for k in schema_keys}

    mapped: list[CandidateSlot] = []
    for slot in context_slots:
        slot.check(dialogue)
        if slot.distance == 0:
            mapped.append(CandidateSlot(slot, slot.key, schema.domain))
            continue
        v = encode_slot_key(key_table, slot.key).data
        best_key, best_sim = None, -np.inf
        for k in schema_keys:  # sorted, so ties resolve lexicographically
            try:
                sim = cosine_similarity(v, schema_vecs[k])
            except ZeroVector:
                continue
            if sim > best_sim:
                best_key, best_sim = k, sim
        if best_key is not None and best_sim >= tau:
            mapped.append(CandidateSlot(slot, best_key, schema.domain))

    best: dict[tuple[str, tuple[str, ...]], CandidateSlot] = {}
    for cand in mapped:
        ident = (cand.mapped_key, slot_value_tokens(dialogue, cand.source))
        if ident not in best or cand.distance < best[ident].distance:
            best[ident] = cand
    kept = set(map(id, best.values()))
    out = [c for c in mapped if id(c) in kept]
    out.sort(key=lambda c: (-c.distance, c.source.span_left))
    return out


def filter_nbest(slu_slots: Iterable[tuple[Slot, float]], threshold: float = 0.1) -> list[Slot]:
    """Keep SLU n-best slots scoring strictly above ``threshold``."""
    return [s for s, score in slu_slots if score > threshold]
