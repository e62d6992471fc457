"""Line-delimited JSON corpus files.

A corpus file starts with a header line ``{"format": "carryover-corpus",
"version": 1}`` followed by one JSON object per dialogue::

    {"id": "d17", "domain": "weather", "intent": ["get", "weather"],
     "turns": [{"speaker": "user", "text": "weather in arlington"},
               {"speaker": "agent", "text": "it is sunny"},
               {"speaker": "user", "text": "how about tomorrow"}],
     "candidates": [{"key": "WeatherCity", "distance": 2, "span": [2, 2]},
                    {"key": "WeatherDate", "distance": 0, "span": [2, 2]}],
     "labels": [0, 1]}

Spans are inclusive token indices into the utterance at ``distance``.
Candidates may carry ``source_key`` (the key before schema mapping) and
``slu_score``. ``anchors_positive: false`` lifts the rule that every
distance-0 candidate is labelled positive (DSTC2-style data).

DSTC2-like input (:func:`ingest_dstc2_like`) uses the same header with
format ``carryover-dstc2`` and records of the form::

    {"id": "...", "domain": "restaurant", "intent": "inform",
     "turns": [{"speaker": "agent", "text": "how may i help you"},
               {"speaker": "user",
                "asr": [{"hyp": "cheap chinese food", "score": 0.8}],
                "slu": [{"key": "food", "span": [1, 1], "score": 0.7}]}],
     "goal": [{"key": "food", "value": "chinese"}]}
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .candidates import filter_nbest
from .dialogue import (
    CandidateSlot,
    CarryoverInstance,
    Intent,
    Slot,
    Speaker,
    build_dialogue,
    split_identifier,
    tokenize,
)
from .embeddings import EmbeddingTable
from .errors import CarryoverError, InvariantViolation, MissingScore, ParseError, VersionMismatch

CORPUS_FORMAT = "carryover-corpus"
DSTC2_FORMAT = "carryover-dstc2"
VERSION = 1
STAT_BUCKETS = ("0", "1", "2", "≥3")


@dataclass
class CorpusStats:
    n_instances: int = 0
    total: Counter = field(default_factory=Counter)  # candidates per distance bucket
    positive: Counter = field(default_factory=Counter)
    n_tokens: int = 0
    oov_rate: float | None = None

    @property
    def n_candidates(self) -> int:
        return sum(self.total.values())

    def add(self, inst: CarryoverInstance) -> None:
        self.n_instances += 1
        self.n_tokens += sum(len(u) for u in inst.dialogue.utterances)
        for j, c in enumerate(inst.candidates):
            b = str(c.distance) if c.distance < 3 else "≥3"
            self.total[b] += 1
            self.positive[b] += j in inst.labels

    def table(self) -> str:
        rows = ["".ljust(10) + "".join(b.rjust(8) for b in STAT_BUCKETS)]
        for name, counts in (("positive", self.positive), ("total", self.total)):
            rows.append(name.ljust(10) + "".join(str(counts[b]).rjust(8) for b in STAT_BUCKETS))
        return "\n".join(rows)


def corpus_stats(instances: Iterable[CarryoverInstance], vocab: EmbeddingTable | None = None) -> CorpusStats:
    stats = CorpusStats()
    tokens: list[str] = []
    for inst in instances:
        stats.add(inst)
        if vocab is not None:
            tokens.extend(t for u in inst.dialogue.utterances for t in u.tokens)
    if vocab is not None:
        stats.oov_rate = vocab.oov_rate(tokens)
    return stats


# ----------------------------------------------------------------- writing


def instance_to_record(inst: CarryoverInstance) -> dict:
    rec = {
        "id": inst.uid,
        "domain": inst.domain,
        "intent": list(inst.dialogue.current_intent.tokens),
        "turns": [
            {"speaker": u.speaker.value, "text": " ".join(u.tokens)} for u in inst.dialogue.utterances
        ],
        "candidates": [],
        "labels": sorted(inst.labels),
    }
    for c in inst.candidates:
        entry = {"key": c.mapped_key, "distance": c.distance, "span": [c.source.span_left, c.source.span_right]}
        if c.source.key != c.mapped_key:
            entry["source_key"] = c.source.key
        if c.domain and c.domain != inst.domain:
            entry["domain"] = c.domain
        rec["candidates"].append(entry)
    if not inst.anchors_positive:
        rec["anchors_positive"] = False
    return rec


def serialize_corpus(instances: Iterable[CarryoverInstance], out: IO[str]) -> None:
    out.write(json.dumps({"format": CORPUS_FORMAT, "version": VERSION}) + "\n")
    for inst in instances:
        out.write(json.dumps(instance_to_record(inst), ensure_ascii=False, sort_keys=True) + "\n")


def write_corpus(instances: Iterable[CarryoverInstance], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        serialize_corpus(instances, fh)


# ----------------------------------------------------------------- reading


def _records(stream: IO[str], fmt: str) -> Iterator[tuple[int, dict]]:
    header_seen = False
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(lineno, f"invalid JSON: {e.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(lineno, "record is not a JSON object")
        if not header_seen:
            header_seen = True
            if obj.get("format") != fmt:
                raise ParseError(lineno, f"missing {fmt!r} header")
            if obj.get("version") != VERSION:
                raise VersionMismatch(f"{fmt} version {obj.get('version')!r}, reader supports {VERSION}")
            continue
        yield lineno, obj


def _require(obj: dict, key: str, lineno: int):
    if key not in obj:
        raise ParseError(lineno, f"missing field {key!r}")
    return obj[key]


def _intent(raw, lineno: int) -> Intent:
    if isinstance(raw, str):
        toks = split_identifier(raw)
    elif isinstance(raw, list) and all(isinstance(t, str) for t in raw):
        toks = list(raw)
    else:
        raise ParseError(lineno, "intent must be a string or a list of strings")
    try:
        return Intent(tuple(toks))
    except CarryoverError as e:
        raise InvariantViolation(str(e), lineno) from None


def _span(raw, lineno: int) -> tuple[int, int]:
    if not (isinstance(raw, list) and len(raw) == 2 and all(isinstance(v, int) for v in raw)):
        raise ParseError(lineno, "span must be [left, right]")
    return raw[0], raw[1]


def record_to_instance(obj: dict, lineno: int = 0) -> CarryoverInstance:
    turns_raw = _require(obj, "turns", lineno)
    if not isinstance(turns_raw, list):
        raise ParseError(lineno, "turns must be a list")
    try:
        turns = [(t["speaker"], tokenize(t["text"])) for t in turns_raw]
    except (KeyError, TypeError, AttributeError):
        raise ParseError(lineno, "each turn needs 'speaker' and 'text'") from None
    intent = _intent(_require(obj, "intent", lineno), lineno)
    domain = obj.get("domain", "")
    labels = _require(obj, "labels", lineno)
    if not isinstance(labels, list) or not all(isinstance(v, int) for v in labels):
        raise ParseError(lineno, "labels must be a list of integers")
    try:
        dialogue = build_dialogue(turns, intent)
        cands = []
        for c in _require(obj, "candidates", lineno):
            l, r = _span(_require(c, "span", lineno), lineno)
            key = _require(c, "key", lineno)
            slot = Slot(int(_require(c, "distance", lineno)), c.get("source_key", key), l, r)
            cands.append(CandidateSlot(slot, key, c.get("domain", domain)))
        return CarryoverInstance(
            dialogue,
            tuple(cands),
            frozenset(labels),
            domain=domain,
            uid=str(obj.get("id", "")),
            anchors_positive=bool(obj.get("anchors_positive", True)),
        )
    except ParseError:
        raise
    except InvariantViolation as e:
        raise InvariantViolation(e.which, lineno) from None
    except (CarryoverError, ValueError) as e:
        raise InvariantViolation(str(e), lineno) from None


def parse_corpus(stream: IO[str]) -> list[CarryoverInstance]:
    return [record_to_instance(obj, lineno) for lineno, obj in _records(stream, CORPUS_FORMAT)]


def read_corpus(path: str | os.PathLike) -> list[CarryoverInstance]:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh)


# ---------------------------------------------------------------- DSTC2-like


def _top_hypothesis(turn: dict, lineno: int) -> str:
    asr = turn.get("asr")
    if asr:
        try:
            best = max(asr, key=lambda h: h.get("score", 0.0))
            return best["hyp"]
        except (KeyError, TypeError, AttributeError):
            raise ParseError(lineno, "asr entries need 'hyp'") from None
    if "text" in turn:
        return turn["text"]
    raise ParseError(lineno, "user turn has neither 'asr' nor 'text'")


def dstc2_record_to_instance(obj: dict, lineno: int = 0, threshold: float = 0.1) -> CarryoverInstance:
    turns_raw = _require(obj, "turns", lineno)
    turns: list[tuple[str, tuple[str, ...]]] = []
    for t in turns_raw:
        speaker = Speaker.parse(_require(t, "speaker", lineno))
        text = _top_hypothesis(t, lineno) if speaker is Speaker.USER else _require(t, "text", lineno)
        turns.append((speaker, tokenize(text)))
    intent = _intent(obj.get("intent", "inform"), lineno)
    domain = obj.get("domain", "restaurant")
    try:
        dialogue = build_dialogue(turns, intent)
    except CarryoverError as e:
        raise InvariantViolation(str(e), lineno) from None

    n = len(turns_raw)
    scored: list[tuple[Slot, float]] = []
    for k, t in enumerate(turns_raw):
        if Speaker.parse(t["speaker"]) is not Speaker.USER:
            continue  # only user-mentioned slots contribute to the goal
        for s in t.get("slu", []) or []:
            if "score" not in s:
                raise MissingScore(f"line {lineno}: SLU slot {s.get('key')!r} has no score")
            l, r = _span(_require(s, "span", lineno), lineno)
            scored.append((Slot(n - 1 - k, _require(s, "key", lineno), l, r), float(s["score"])))
    kept = filter_nbest(scored, threshold)
    goal = {(g["key"], tuple(tokenize(g["value"]))) for g in obj.get("goal", [])}
    cands, labels = [], []
    try:
        for slot in kept:
            slot.check(dialogue)
            value = dialogue.utterance(slot.distance).tokens[slot.span_left : slot.span_right + 1]
            if (slot.key, tuple(value)) in goal:
                labels.append(len(cands))
            cands.append(CandidateSlot(slot, slot.key, domain))
        return CarryoverInstance(
            dialogue, tuple(cands), frozenset(labels), domain=domain,
            uid=str(obj.get("id", "")), anchors_positive=False,
        )
    except CarryoverError as e:
        raise InvariantViolation(str(e), lineno) from None


def ingest_dstc2_like(stream: IO[str], threshold: float = 0.1) -> list[CarryoverInstance]:
    """Build instances from DSTC2-style n-best records.

    The top ASR hypothesis becomes the user text and SLU slots scoring
    strictly above ``threshold`` become candidates. A candidate is positive
    when its (key, value) is in the turn's goal.
    """
    return [dstc2_record_to_instance(obj, lineno, threshold) for lineno, obj in _records(stream, DSTC2_FORMAT)]


def read_any(path: str | os.PathLike, threshold: float = 0.1) -> list[CarryoverInstance]:
    """Read a corpus file in either format, chosen by its header line."""
    with open(path, encoding="utf-8") as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line
                break
        fh.seek(0)
        try:
            fmt = json.loads(first).get("format") if first else None
        except (json.JSONDecodeError, AttributeError):
            fmt = None
        if fmt == DSTC2_FORMAT:
            return ingest_dstc2_like(fh, threshold)
        return parse_corpus(fh)
