import numpy as np
import pytest

from carryover import tensor as T
from carryover.dialogue import Intent, Slot, build_dialogue
from carryover.embeddings import EmbeddingTable
from carryover.encoders import (
    BiLSTMWeights,
    DistanceEmbedding,
    SerializedDialogue,
    assemble_slot_encoding,
    encode_dialogue,
    encode_distance,
    encode_intent,
    encode_slot_key,
    encode_slot_value_avg,
    encode_slot_value_ctx,
)
from carryover.errors import EmptyIntent, EmptyKey, NegativeDistance, ShapeMismatch, SpanOutOfRange

from conftest import table_of, weather_dialogue


def _weights(rng, d_in, h, zero=False):
    def one():
        w = T.lstm_init(rng, d_in, h)
        return tuple(T.Tensor(np.zeros_like(w[k]) if zero else w[k]) for k in "WUb")

    return BiLSTMWeights(one(), one())


def _random_table(rng, dialogue, dim=5):
    toks = [t for u in dialogue.utterances for t in u.tokens] + ["<sep_user>", "<sep_agent>"]
    return EmbeddingTable.random(toks, dim, rng)


def test_slot_key_encoding():
    np.testing.assert_array_equal(encode_slot_key(table_of({"city": [1, 0]}), "City").data, [1, 0])
    t = table_of({"weather": [1, 0], "city": [0, 1]})
    np.testing.assert_array_equal(encode_slot_key(t, "WeatherCity").data, [0.5, 0.5])
    with pytest.raises(EmptyKey):
        encode_slot_key(t, "")


def test_intent_encoding():
    t = table_of({"get": [1, 0], "weather": [0, 1]})
    np.testing.assert_array_equal(encode_intent(t, ["GetWeather"]).data, [0.5, 0.5])
    np.testing.assert_array_equal(encode_intent(t, Intent(("weather",))).data, [0, 1])
    with pytest.raises(EmptyIntent):
        encode_intent(t, [])


def test_distance_encoding():
    table = T.Tensor(np.arange(28, dtype=float).reshape(7, 4))
    dist = DistanceEmbedding(table)
    np.testing.assert_array_equal(encode_distance(dist, 0).data, table.data[0])
    np.testing.assert_array_equal(encode_distance(dist, 9).data, table.data[6])
    with pytest.raises(NegativeDistance):
        encode_distance(dist, -1)


def test_assemble_slot_encoding():
    enc = assemble_slot_encoding(T.Tensor(np.zeros(4)), T.Tensor(np.zeros(6)), T.Tensor(np.zeros(4)))
    assert enc.full.shape == (14,)
    enc = assemble_slot_encoding(T.Tensor([1.0]), T.Tensor([2.0]), T.Tensor([3.0, 4, 5, 6]))
    np.testing.assert_array_equal(enc.full.data, [1, 2, 3, 4, 5, 6])
    with pytest.raises(ShapeMismatch):
        assemble_slot_encoding(T.Tensor([1.0]), T.Tensor([2.0]), T.Tensor([3.0, 4, 5]))


def test_value_avg():
    d = build_dialogue([("user", ["weather", "in", "san", "francisco"])], Intent(("x",)))
    t = table_of({"san": [1, 0], "francisco": [0, 1], "in": [3, 3]})
    np.testing.assert_array_equal(encode_slot_value_avg(t, d, Slot(0, "City", 2, 3)).data, [0.5, 0.5])
    np.testing.assert_array_equal(encode_slot_value_avg(t, d, Slot(0, "City", 1, 1)).data, [3, 3])
    with pytest.raises(SpanOutOfRange):
        encode_slot_value_avg(t, d, Slot(0, "City", 3, 4))


def test_single_token_dialogue_shape(rng):
    d = build_dialogue([("user", ["hi"])], Intent(("x",)))
    enc = encode_dialogue(_random_table(rng, d), d, _weights(rng, 5, 3))
    assert [s.shape for s in enc.all_token_states] == [(1, 6)]
    assert enc.context.shape == (6,)


def test_zero_weights_give_zero_context(rng):
    d = weather_dialogue()
    enc = encode_dialogue(_random_table(rng, d), d, _weights(rng, 5, 3, zero=True))
    np.testing.assert_array_equal(enc.context.data, np.zeros(6))
    np.testing.assert_array_equal(encode_slot_value_ctx(enc, Slot(2, "City", 2, 2)).data, np.zeros(6))


def test_token_states_cover_every_token(rng):
    d = weather_dialogue()
    layout = SerializedDialogue.of(d)
    assert len(layout.tokens) == 7 + 2  # one separator before each later turn
    enc = encode_dialogue(_random_table(rng, d), d, _weights(rng, 5, 3))
    assert sum(s.shape[0] for s in enc.all_token_states) == 7
    for dist in range(3):
        utt = d.utterance(dist)
        states = enc.token_states(dist).data
        for i in range(len(utt)):
            np.testing.assert_array_equal(states[i], enc.states.data[layout.position(dist, i)])


def test_value_ctx_is_span_mean(rng):
    d = weather_dialogue()
    enc = encode_dialogue(_random_table(rng, d), d, _weights(rng, 5, 3))
    states = enc.token_states(2).data
    np.testing.assert_array_equal(encode_slot_value_ctx(enc, Slot(2, "City", 2, 2)).data, states[2])
    np.testing.assert_allclose(
        encode_slot_value_ctx(enc, Slot(2, "City", 1, 2)).data, (states[1] + states[2]) / 2, atol=1e-15
    )
    with pytest.raises(SpanOutOfRange):
        encode_slot_value_ctx(enc, Slot(1, "City", 0, 4))


def test_context_is_final_fwd_and_first_bwd(rng):
    d = weather_dialogue()
    enc = encode_dialogue(_random_table(rng, d), d, _weights(rng, 5, 3))
    s = enc.states.data
    np.testing.assert_array_equal(enc.context.data, np.concatenate([s[-1, :3], s[0, 3:]]))
