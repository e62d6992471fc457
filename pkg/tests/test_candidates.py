import math

import numpy as np
import pytest

from carryover.candidates import Schema, cosine_similarity, filter_nbest, generate_candidates
from carryover.dialogue import Intent, Slot, build_dialogue
from carryover.errors import EmptySchema, ZeroVector

from conftest import table_of


def test_cosine_values(rng):
    v = rng.normal(size=4)
    assert cosine_similarity(v, v) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(0.707107, abs=1e-6)
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 0])


def _dialogue():
    return build_dialogue(
        [("user", ["near", "springfield", "town"]), ("agent", ["ok"]), ("user", ["cheap", "food"])],
        Intent.from_name("FindPlace"),
    )


def test_similar_key_maps_across():
    # unit vectors with cos(town, place) = 0.9
    keys = table_of({"town": [1.0, 0.0], "place": [0.9, math.sqrt(1 - 0.81)], "price": [0.0, -1.0]})
    schema = Schema.of("local", ["Place", "Price"])
    out = generate_candidates(_dialogue(), [Slot(2, "Town", 1, 1)], schema, keys, tau=0.6)
    assert [c.mapped_key for c in out] == ["Place"]
    assert out[0].source.key == "Town"


def test_orthogonal_key_dropped():
    keys = table_of({"town": [1.0, 0.0], "price": [0.0, 1.0]})
    out = generate_candidates(_dialogue(), [Slot(2, "Town", 1, 1)], Schema.of("local", ["Price"]), keys, 0.6)
    assert out == []


def test_identical_key_maps_to_itself():
    keys = table_of({"town": [1.0, 0.2], "price": [0.0, 1.0]})
    out = generate_candidates(_dialogue(), [Slot(2, "Town", 1, 1)], Schema.of("local", ["Town", "Price"]), keys)
    assert out[0].mapped_key == "Town"


def test_anchor_passes_through_and_order():
    keys = table_of({"town": [1.0, 0.0], "price": [0.0, 1.0]})
    slots = [Slot(0, "Price", 0, 0), Slot(2, "Town", 1, 1)]
    out = generate_candidates(_dialogue(), slots, Schema.of("local", ["Town"]), keys)
    assert [(c.distance, c.mapped_key) for c in out] == [(2, "Town"), (0, "Price")]


def test_duplicate_value_keeps_nearest():
    d = build_dialogue(
        [("user", ["springfield"]), ("agent", ["in", "springfield"]), ("user", ["go"])], Intent(("x",))
    )
    keys = table_of({"town": [1.0, 0.0]})
    out = generate_candidates(d, [Slot(2, "Town", 0, 0), Slot(1, "Town", 1, 1)], Schema.of("l", ["Town"]), keys)
    assert [c.distance for c in out] == [1]


def test_empty_schema():
    with pytest.raises(EmptySchema):
        Schema.of("x", [])


def test_filter_nbest():
    s1, s2 = Slot(0, "food", 0, 0), Slot(2, "area", 1, 1)
    assert filter_nbest([(s1, 0.5), (s2, 0.05)]) == [s1]
    assert filter_nbest([(s1, 0.1)]) == []
    assert filter_nbest([]) == []
    assert filter_nbest([(s1, np.nextafter(0.1, 1))]) == [s1]
