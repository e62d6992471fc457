from __future__ import annotations

import numpy as np
import pytest

from carryover.dialogue import CandidateSlot, Intent, Slot, build_dialogue, make_instance
from carryover.embeddings import EmbeddingTable


def weather_dialogue():
    """user / agent / user, seven tokens in total."""
    return build_dialogue(
        [
            ("user", ["weather", "in", "arlington"]),
            ("agent", ["it", "is"]),
            ("user", ["how", "about"]),
        ],
        Intent.from_name("GetWeather"),
    )


def cand(d: int, key: str, left: int, right: int | None = None, domain: str = "weather") -> CandidateSlot:
    return CandidateSlot(Slot(d, key, left, left if right is None else right), key, domain)


def toy_instance(uid: str = "toy"):
    dialogue = build_dialogue(
        [
            ("user", ["weather", "in", "san", "francisco"]),
            ("agent", ["sunny", "in", "san", "francisco"]),
            ("user", ["what", "about", "tomorrow"]),
        ],
        Intent.from_name("GetWeather"),
    )
    cands = [cand(2, "WeatherCity", 2, 3), cand(1, "WeatherCondition", 0), cand(0, "WeatherDate", 2)]
    return make_instance(dialogue, cands, {0, 2}, domain="weather", uid=uid)


def table_of(vectors: dict[str, list[float]]) -> EmbeddingTable:
    return EmbeddingTable(list(vectors), np.array(list(vectors.values()), dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report one line each; printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
