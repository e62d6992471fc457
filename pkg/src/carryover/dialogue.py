"""Dialogue, slot and carryover-instance types.

Utterances are indexed by *distance*: the offset from the most recent user
utterance, so the current turn has distance 0, the agent turn before it
distance 1, and so on. Slot spans are inclusive on both ends.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (
    AlternationViolation,
    DistanceOutOfRange,
    EmptyDialogue,
    EmptyIntent,
    InvariantViolation,
    LastTurnNotUser,
    SpanOutOfRange,
)


class Speaker(str, enum.Enum):
    USER = "user"
    AGENT = "agent"

    @classmethod
    def parse(cls, value: "str | Speaker") -> "Speaker":
        if isinstance(value, Speaker):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise ValueError(f"unknown speaker {value!r}") from None


def tokenize(text: str) -> tuple[str, ...]:
    """Default ingestion tokenizer: lowercase, split on whitespace."""
    return tuple(text.lower().split())


_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")


def split_identifier(name: str) -> list[str]:
    """Split a slot key or intent name into lowercase word tokens.

    Splits on underscores, hyphens, whitespace and camelCase boundaries:
    ``"WeatherCity"`` -> ``["weather", "city"]``, ``"area_name"`` ->
    ``["area", "name"]``. Digits stay attached to a preceding word
    (``"city17"`` stays one token) so synthetic pattern tokens survive.
    """
    out: list[str] = []
    for chunk in re.split(r"[_\-\s]+", name):
        if not chunk:
            continue
        if chunk.islower() or chunk.isupper() or chunk.isdigit():
            out.append(chunk.lower())
            continue
        parts = _CAMEL.findall(chunk)
        merged: list[str] = []
        for p in parts:
            if p.isdigit() and merged:
                merged[-1] += p
            else:
                merged.append(p.lower())
        out.extend(merged)
    return out


@dataclass(frozen=True)
class Utterance:
    speaker: Speaker
    tokens: tuple[str, ...]
    distance: int

    def __post_init__(self):
        if self.distance < 0:
            raise DistanceOutOfRange(f"negative distance {self.distance}")
        expected = Speaker.USER if self.distance % 2 == 0 else Speaker.AGENT
        if self.speaker is not expected:
            raise AlternationViolation(
                f"{self.speaker.value} utterance at distance {self.distance}"
            )

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Intent:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.tokens:
            raise EmptyIntent("intent has no tokens")

    @classmethod
    def from_name(cls, name: str) -> "Intent":
        return cls(tuple(split_identifier(name)))


@dataclass(frozen=True)
class Dialogue:
    utterances: tuple[Utterance, ...]  # oldest first
    current_intent: Intent

    def __post_init__(self):
        if not self.utterances:
            raise EmptyDialogue("dialogue has no utterances")
        n = len(self.utterances)
        for i, u in enumerate(self.utterances):
            if u.distance != n - 1 - i:
                raise InvariantViolation(
                    f"utterance {i} has distance {u.distance}, expected {n - 1 - i}"
                )

    def __len__(self) -> int:
        return len(self.utterances)

    def utterance(self, distance: int) -> Utterance:
        if not 0 <= distance < len(self.utterances):
            raise DistanceOutOfRange(
                f"distance {distance} outside dialogue of {len(self.utterances)} turns"
            )
        return self.utterances[len(self.utterances) - 1 - distance]

    @property
    def distances(self) -> list[int]:
        return [u.distance for u in self.utterances]


def build_dialogue(
    turns: Sequence[tuple["Speaker | str", Sequence[str]]], intent: Intent
) -> Dialogue:
    """Assign distances to ``turns`` (oldest first) and validate alternation."""
    if not turns:
        raise EmptyDialogue("no turns")
    speakers = [Speaker.parse(s) for s, _ in turns]
    if speakers[-1] is not Speaker.USER:
        raise LastTurnNotUser("final turn must be spoken by the user")
    for i in range(1, len(speakers)):
        if speakers[i] is speakers[i - 1]:
            raise AlternationViolation(
                f"turns {i - 1} and {i} are both {speakers[i].value}"
            )
    n = len(turns)
    utts = tuple(
        Utterance(sp, tuple(toks), n - 1 - i)
        for i, (sp, (_, toks)) in enumerate(zip(speakers, turns))
    )
    return Dialogue(utts, intent)


@dataclass(frozen=True)
class Slot:
    distance: int
    key: str
    span_left: int
    span_right: int  # inclusive

    def __post_init__(self):
        if not self.key:
            raise InvariantViolation("slot key is empty")
        if self.distance < 0:
            raise DistanceOutOfRange(f"negative slot distance {self.distance}")
        if not 0 <= self.span_left <= self.span_right:
            raise SpanOutOfRange(f"bad span [{self.span_left}:{self.span_right}]")

    @property
    def width(self) -> int:
        return self.span_right - self.span_left + 1

    def check(self, dialogue: Dialogue) -> None:
        utt = dialogue.utterance(self.distance)
        if self.span_right >= len(utt):
            raise SpanOutOfRange(
                f"span [{self.span_left}:{self.span_right}] exceeds utterance "
                f"of {len(utt)} tokens at distance {self.distance}"
            )


def slot_value_tokens(dialogue: Dialogue, slot: Slot) -> tuple[str, ...]:
    slot.check(dialogue)
    utt = dialogue.utterance(slot.distance)
    return utt.tokens[slot.span_left : slot.span_right + 1]


@dataclass(frozen=True)
class CandidateSlot:
    source: Slot
    mapped_key: str
    domain: str

    @property
    def distance(self) -> int:
        return self.source.distance


@dataclass(frozen=True)
class CarryoverInstance:
    dialogue: Dialogue
    candidates: tuple[CandidateSlot, ...]
    labels: frozenset[int]
    domain: str = ""
    uid: str = ""
    # DSTC2-style data scores current-turn candidates too, so anchors are not
    # guaranteed positive there.
    anchors_positive: bool = field(default=True, compare=False)

    def __post_init__(self):
        n = len(self.candidates)
        bad = [j for j in self.labels if not 0 <= j < n]
        if bad:
            raise InvariantViolation(f"label indices {sorted(bad)} outside 0..{n - 1}")
        for cand in self.candidates:
            cand.source.check(self.dialogue)
        if self.anchors_positive:
            missing = [
                j for j, c in enumerate(self.candidates)
                if c.distance == 0 and j not in self.labels
            ]
            if missing:
                raise InvariantViolation(
                    f"anchor candidates {missing} (distance 0) are not labeled positive"
                )

    def value_tokens(self, j: int) -> tuple[str, ...]:
        return slot_value_tokens(self.dialogue, self.candidates[j].source)

    def label_vector(self) -> list[int]:
        return [int(j in self.labels) for j in range(len(self.candidates))]


def make_instance(
    dialogue: Dialogue,
    candidates: Iterable[CandidateSlot],
    labels: Iterable[int],
    **kwargs,
) -> CarryoverInstance:
    return CarryoverInstance(dialogue, tuple(candidates), frozenset(labels), **kwargs)
