import io
import json

import pytest

from carryover.corpus import (
    corpus_stats,
    ingest_dstc2_like,
    parse_corpus,
    read_any,
    serialize_corpus,
    write_corpus,
)
from carryover.errors import InvariantViolation, MissingScore, ParseError, VersionMismatch
from carryover.synth import SynthConfig, synth_generate

from conftest import toy_instance

HEADER = json.dumps({"format": "carryover-corpus", "version": 1})
DSTC2_HEADER = json.dumps({"format": "carryover-dstc2", "version": 1})

RECORD = {
    "id": "d1",
    "domain": "weather",
    "intent": "GetWeather",
    "turns": [
        {"speaker": "user", "text": "weather in arlington"},
        {"speaker": "agent", "text": "it is sunny"},
        {"speaker": "user", "text": "how about tomorrow"},
    ],
    "candidates": [
        {"key": "WeatherCity", "distance": 2, "span": [2, 2]},
        {"key": "WeatherDate", "distance": 0, "span": [2, 2]},
    ],
    "labels": [0, 1],
}


def _stream(*records, header=HEADER):
    return io.StringIO("\n".join([header] + [json.dumps(r) for r in records]) + "\n")


def test_one_record():
    (inst,) = parse_corpus(_stream(RECORD))
    assert inst.uid == "d1"
    assert inst.dialogue.current_intent.tokens == ("get", "weather")
    assert inst.value_tokens(0) == ("arlington",)
    assert inst.labels == {0, 1}


def test_anchor_rule_enforced_with_line():
    bad = dict(RECORD, labels=[0])
    with pytest.raises(InvariantViolation) as e:
        parse_corpus(_stream(RECORD, bad))
    assert e.value.line == 3


def test_parse_errors_carry_line():
    with pytest.raises(ParseError) as e:
        parse_corpus(io.StringIO(HEADER + "\n{not json\n"))
    assert e.value.line == 2
    with pytest.raises(ParseError):
        parse_corpus(_stream({k: v for k, v in RECORD.items() if k != "turns"}))
    with pytest.raises(ParseError) as e:
        parse_corpus(io.StringIO(json.dumps(RECORD) + "\n"))
    assert e.value.line == 1


def test_version_checked():
    with pytest.raises(VersionMismatch):
        parse_corpus(_stream(RECORD, header=json.dumps({"format": "carryover-corpus", "version": 2})))


def test_span_outside_utterance():
    bad = dict(RECORD, candidates=[{"key": "WeatherCity", "distance": 2, "span": [2, 9]}], labels=[])
    with pytest.raises(InvariantViolation):
        parse_corpus(_stream(bad))


def test_round_trip_is_exact(tmp_path):
    data = synth_generate(SynthConfig(n_dialogues=40, seed=2))["train"] + [toy_instance()]
    buf = io.StringIO()
    serialize_corpus(data, buf)
    text = buf.getvalue()
    back = parse_corpus(io.StringIO(text))
    assert back == data
    again = io.StringIO()
    serialize_corpus(back, again)
    assert again.getvalue() == text
    write_corpus(data, tmp_path / "c.jsonl")
    assert (tmp_path / "c.jsonl").read_text() == text


def test_stats_buckets_sum_to_total():
    data = synth_generate(SynthConfig(n_dialogues=50, seed=1))["train"]
    stats = corpus_stats(data)
    assert sum(stats.total.values()) == sum(len(i.candidates) for i in data)
    assert set(stats.total) <= {"0", "1", "2", "≥3"}
    assert stats.positive["0"] == stats.total["0"]
    assert "≥3" in stats.table()


def _dstc2_record(user_slu, context_slu, goal):
    return {
        "id": "r1",
        "turns": [
            {"speaker": "user", "asr": [{"hyp": "cheap food", "score": 0.3}, {"hyp": "cheap chinese food", "score": 0.6}],
             "slu": context_slu},
            {"speaker": "agent", "text": "what area"},
            {"speaker": "user", "asr": [{"hyp": "in the north", "score": 0.9}], "slu": user_slu},
        ],
        "goal": goal,
    }


def test_dstc2_ingestion_filters_and_labels():
    rec = _dstc2_record(
        user_slu=[{"key": "area", "span": [2, 2], "score": 0.8}],
        context_slu=[
            {"key": "food", "span": [1, 1], "score": 0.5},
            {"key": "pricerange", "span": [0, 0], "score": 0.05},
            {"key": "food", "span": [2, 2], "score": 0.1},
        ],
        goal=[{"key": "food", "value": "chinese"}, {"key": "area", "value": "north"}],
    )
    (inst,) = ingest_dstc2_like(_stream(rec, header=DSTC2_HEADER))
    assert inst.dialogue.utterance(2).tokens == ("cheap", "chinese", "food")
    assert [(c.mapped_key, c.distance) for c in inst.candidates] == [("food", 2), ("area", 0)]
    assert inst.labels == {0, 1}
    assert all(c.distance % 2 == 0 for c in inst.candidates)


def test_dstc2_anchor_may_be_negative():
    rec = _dstc2_record([{"key": "area", "span": [2, 2], "score": 0.8}], [], goal=[])
    (inst,) = ingest_dstc2_like(_stream(rec, header=DSTC2_HEADER))
    assert inst.labels == frozenset()


def test_dstc2_empty_context_nbest():
    rec = _dstc2_record([{"key": "area", "span": [2, 2], "score": 0.8}], [], goal=[{"key": "area", "value": "north"}])
    (inst,) = ingest_dstc2_like(_stream(rec, header=DSTC2_HEADER))
    assert [c.distance for c in inst.candidates] == [0]


def test_dstc2_missing_score():
    rec = _dstc2_record([{"key": "area", "span": [2, 2]}], [], goal=[])
    with pytest.raises(MissingScore):
        ingest_dstc2_like(_stream(rec, header=DSTC2_HEADER))


def test_read_any_dispatches(tmp_path):
    p = tmp_path / "d.jsonl"
    rec = _dstc2_record([{"key": "area", "span": [2, 2], "score": 0.8}], [], goal=[])
    p.write_text(DSTC2_HEADER + "\n" + json.dumps(rec) + "\n")
    assert len(read_any(p)) == 1
    q = tmp_path / "c.jsonl"
    q.write_text(HEADER + "\n" + json.dumps(RECORD) + "\n")
    assert read_any(q)[0].uid == "d1"
