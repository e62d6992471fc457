import pytest
from hypothesis import given, strategies as st

from carryover.dialogue import (
    CarryoverInstance,
    Intent,
    Slot,
    Speaker,
    build_dialogue,
    make_instance,
    slot_value_tokens,
    split_identifier,
    tokenize,
)
from carryover.errors import (
    AlternationViolation,
    DistanceOutOfRange,
    EmptyDialogue,
    InvariantViolation,
    LastTurnNotUser,
    SpanOutOfRange,
)

from conftest import cand, weather_dialogue


def test_single_turn_has_distance_zero():
    d = build_dialogue([("user", ["weather", "in", "arlington"])], Intent(("get", "weather")))
    assert len(d) == 1
    assert d.distances == [0]


def test_three_turns_count_back_from_latest():
    assert weather_dialogue().distances == [2, 1, 0]


def test_consecutive_user_turns_rejected():
    with pytest.raises(AlternationViolation):
        build_dialogue([("user", ["a"]), ("user", ["b"])], Intent(("x",)))


def test_empty_and_agent_final_rejected():
    with pytest.raises(EmptyDialogue):
        build_dialogue([], Intent(("x",)))
    with pytest.raises(LastTurnNotUser):
        build_dialogue([("user", ["a"]), ("agent", ["b"])], Intent(("x",)))


def test_speaker_parity_follows_distance():
    d = weather_dialogue()
    for u in d.utterances:
        assert (u.speaker is Speaker.USER) == (u.distance % 2 == 0)


def test_slot_value_tokens():
    d = build_dialogue([("user", ["weather", "in", "arlington"])], Intent(("x",)))
    assert slot_value_tokens(d, Slot(0, "City", 2, 2)) == ("arlington",)
    d2 = build_dialogue([("agent", ["san", "francisco", "weather"]), ("user", ["ok"])], Intent(("x",)))
    assert slot_value_tokens(d2, Slot(1, "City", 0, 1)) == ("san", "francisco")


def test_slot_distance_beyond_dialogue():
    d = build_dialogue([("agent", ["hi"]), ("user", ["a", "b"])], Intent(("x",)))
    with pytest.raises(DistanceOutOfRange):
        slot_value_tokens(d, Slot(5, "City", 0, 0))


def test_slot_span_checks():
    d = weather_dialogue()
    with pytest.raises(SpanOutOfRange):
        Slot(0, "City", 2, 1)
    with pytest.raises(SpanOutOfRange):
        slot_value_tokens(d, Slot(0, "City", 0, 5))


def test_anchor_must_be_positive():
    d = weather_dialogue()
    with pytest.raises(InvariantViolation):
        make_instance(d, [cand(2, "WeatherCity", 2), cand(0, "WeatherDate", 1)], {0})
    inst = make_instance(d, [cand(2, "WeatherCity", 2), cand(0, "WeatherDate", 1)], {0}, anchors_positive=False)
    assert inst.labels == {0}


def test_label_index_range():
    with pytest.raises(InvariantViolation):
        make_instance(weather_dialogue(), [cand(2, "WeatherCity", 2)], {3})


def test_tokenize_and_split():
    assert tokenize("Weather in  Arlington") == ("weather", "in", "arlington")
    assert split_identifier("GetWeather") == ["get", "weather"]
    assert split_identifier("weather_city-name") == ["weather", "city", "name"]
    assert Intent.from_name("GetWeather").tokens == ("get", "weather")


@given(st.lists(st.lists(st.sampled_from(["a", "b", "c"]), min_size=1, max_size=4), min_size=1, max_size=9))
def test_alternating_dialogues_valid(turn_tokens):
    n = len(turn_tokens)
    # the last turn is the user's, so speakers alternate back from there
    turns = [("user" if (n - 1 - k) % 2 == 0 else "agent", t) for k, t in enumerate(turn_tokens)]
    d = build_dialogue(turns, Intent(("x",)))
    assert d.distances == list(range(n - 1, -1, -1))
    for dist in range(n):
        assert d.utterance(dist).distance == dist


def test_instance_is_hashable_value():
    inst = make_instance(weather_dialogue(), [cand(0, "WeatherDate", 0)], {0})
    assert isinstance(inst, CarryoverInstance)
    assert inst == make_instance(weather_dialogue(), [cand(0, "WeatherDate", 0)], {0})
