"""Seeded synthetic carryover corpora.

Dialogues are built from templates over pattern tokens (``city_17``,
``artist_3``), so randomly initialised embeddings are enough to learn from
them. Labels follow from construction:

* a context slot carried on its own is *marked*: its value is followed by
  the cue token ``again`` in its utterance; unmarked singletons are
  distractors;
* for a correlated pair ``(A, B, rho)``, A is marked iff it is carried, and
  B is carried with probability ``rho`` when A is (never otherwise). B is
  never marked, so its label can only be read off its partner;
* current-turn slots (distance 0) are always carried;
* with ``restate_rate`` a carried singleton is mentioned twice with
  different values and neither mention is marked; only the more recent one
  is carried, so its label depends on the relative order of the two.

Positive context slots sit at distance >= 3 with probability
``long_distance_rate``, otherwise at distance 1 or 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .candidates import Schema, generate_candidates
from .dialogue import CarryoverInstance, Intent, Slot, Speaker, build_dialogue
from .embeddings import EmbeddingTable
from .encoders import key_tokens

DOMAINS = {
    "weather": ["City", "State", "Date", "Time", "Condition", "Unit", "Zone", "Region", "Season", "Hour", "Place", "Town", "Metric"],
    "music": ["Artist", "Album", "Song", "Genre", "Playlist", "Station", "Device", "Room", "Mood", "Year", "Label", "Band", "Track"],
    "video": ["Actor", "Movie", "Channel", "Show", "Episode", "Season", "Genre", "Director", "Network", "Rating", "Language", "Studio", "Series"],
    "local": ["Business", "Cuisine", "Street", "City", "Area", "Price", "Rating", "Hours", "Place", "Service", "Brand", "Landmark", "Distance"],
    "home": ["Device", "Room", "Setting", "Level", "Color", "Mode", "Scene", "Time", "Group", "Sensor", "Floor", "Schedule", "Appliance"],
    "qa": ["Topic", "Person", "Place", "Event", "Date", "Quantity", "Unit", "Entity", "Category", "Language", "Country", "Organization", "Work"],
    "shopping": ["Item", "Brand", "Size", "Color", "Store", "Price", "Quantity", "Category", "Material", "Style", "Model", "Seller", "Deal"],
}
MARKER = "again"
USER_FILLER = ["find", "show", "what", "about", "the", "for", "me", "please", "how", "and", "is", "it", "in", "with"]
AGENT_FILLER = ["i", "found", "here", "is", "ok", "sure", "the", "for", "you", "that", "has", "now", "one"]


@dataclass
class SynthConfig:
    n_dialogues: int = 500
    max_turns: int = 9
    vocab_size: int = 30  # distinct values per slot key
    n_domains: int = 2
    keys_per_domain: int = 13
    # None -> first two keys of every domain, rho 1.0
    correlated_pairs: Sequence[tuple[str, str, float]] | None = None
    long_distance_rate: float = 0.3
    pair_rate: float = 0.7  # dialogues holding each domain pair
    distractors: tuple[int, int] = (1, 3)  # singleton context slots per dialogue
    anchors: tuple[int, int] = (0, 2)
    restate_rate: float = 0.0  # carried singletons whose key was said earlier too
    seed: int = 0

    def __post_init__(self):
        if self.keys_per_domain < 2:
            raise ValueError("keys_per_domain must be >= 2")
        if not 1 <= self.n_domains <= len(DOMAINS):
            raise ValueError(f"n_domains must be in 1..{len(DOMAINS)}")
        if self.keys_per_domain > 13:
            raise ValueError("at most 13 keys per domain")
        if self.max_turns < 2:
            raise ValueError("max_turns must be >= 2")
        if not 0.0 <= self.restate_rate <= 1.0:
            raise ValueError("restate_rate must lie in [0, 1]")
        for a, b, rho in self.pairs:
            if not 0.0 <= rho <= 1.0:
                raise ValueError(f"rho for ({a}, {b}) must lie in [0, 1]")

    @property
    def domains(self) -> dict[str, list[str]]:
        out = {}
        for name in list(DOMAINS)[: self.n_domains]:
            out[name] = [name.capitalize() + w for w in DOMAINS[name][: self.keys_per_domain]]
        return out

    @property
    def pairs(self) -> list[tuple[str, str, float]]:
        if self.correlated_pairs is None:
            return [(keys[0], keys[1], 1.0) for keys in self.domains.values()]
        return [tuple(p) for p in self.correlated_pairs]


@dataclass
class _Mention:
    key: str
    positive: bool
    marked: bool
    distance: int
    tokens: list[str] = field(default_factory=list)


def _value(key: str, rng: np.random.Generator, vocab_size: int) -> list[str]:
    word = key_tokens(key)[-1]
    toks = [f"{word}_{int(rng.integers(vocab_size))}"]
    if rng.random() < 0.25:
        toks.append(f"{word}_{int(rng.integers(vocab_size))}x")
    return toks


def _distance(rng, positive: bool, cfg: SynthConfig) -> int:
    far = cfg.max_turns - 1
    if positive:
        if far >= 3 and rng.random() < cfg.long_distance_rate:
            return int(rng.integers(3, far + 1))
        return int(rng.integers(1, min(2, far) + 1))
    return int(rng.integers(1, far + 1))


def _one_dialogue(rng: np.random.Generator, cfg: SynthConfig, key_table: EmbeddingTable, uid: str):
    domains = cfg.domains
    domain = list(domains)[int(rng.integers(len(domains)))]
    keys = domains[domain]
    pairs = [(a, b, rho) for a, b, rho in cfg.pairs if a in keys and b in keys]
    paired = {k for a, b, _ in pairs for k in (a, b)}

    mentions: list[_Mention] = []
    for a, b, rho in pairs:
        if rng.random() >= cfg.pair_rate:
            continue
        a_pos = bool(rng.random() < 0.5)
        b_pos = a_pos and bool(rng.random() < rho)
        da = _distance(rng, a_pos, cfg)
        db = _distance(rng, b_pos, cfg)
        for _ in range(20):  # keep members in different turns
            if db != da:
                break
            db = _distance(rng, b_pos, cfg)
        mentions.append(_Mention(a, a_pos, a_pos, da))
        mentions.append(_Mention(b, b_pos, False, db))
    singles = [k for k in keys if k not in paired]
    n_single = int(rng.integers(cfg.distractors[0], cfg.distractors[1] + 1))
    for k in rng.permutation(singles)[:n_single]:
        pos = bool(rng.random() < 0.4)
        m = _Mention(str(k), pos, pos, _distance(rng, pos, cfg))
        mentions.append(m)
        if cfg.restate_rate > 0 and pos and m.distance < cfg.max_turns - 1 and rng.random() < cfg.restate_rate:
            # an older, superseded value of the same key; recency decides
            m.marked = False
            old = int(rng.integers(m.distance + 1, cfg.max_turns))
            mentions.append(_Mention(str(k), False, False, old))
    if not mentions:
        k = singles[0] if singles else keys[0]
        mentions.append(_Mention(k, False, False, _distance(rng, False, cfg)))

    used = {m.key for m in mentions}
    free = [k for k in keys if k not in used]
    n_anchor = min(len(free), int(rng.integers(cfg.anchors[0], cfg.anchors[1] + 1)))
    for k in rng.permutation(free)[:n_anchor] if free else []:
        mentions.append(_Mention(str(k), True, False, 0))

    max_d = max(m.distance for m in mentions)
    n_turns = max_d + 1
    if n_turns < cfg.max_turns and rng.random() < 0.3:
        n_turns += 1
    # turns come oldest first; distance d sits at index n_turns - 1 - d
    turn_tokens: list[list[str]] = []
    slots: list[tuple[Slot, _Mention]] = []
    said: dict[str, set[tuple[str, ...]]] = {}
    for d in range(n_turns - 1, -1, -1):
        speaker = Speaker.USER if d % 2 == 0 else Speaker.AGENT
        filler = USER_FILLER if speaker is Speaker.USER else AGENT_FILLER
        toks = [str(w) for w in rng.choice(filler, size=int(rng.integers(1, 4)))]
        here = [m for m in mentions if m.distance == d]
        for m in here:
            value = _value(m.key, rng, cfg.vocab_size)
            while tuple(value) in said.get(m.key, ()):  # restated keys change value
                value = _value(m.key, rng, cfg.vocab_size)
            said.setdefault(m.key, set()).add(tuple(value))
            left = len(toks)
            toks.extend(value)
            slots.append((Slot(d, m.key, left, left + len(value) - 1), m))
            if m.marked:
                toks.append(MARKER)
            toks.extend(str(w) for w in rng.choice(filler, size=int(rng.integers(0, 3))))
        turn_tokens.append(toks)
    speakers = [Speaker.USER if d % 2 == 0 else Speaker.AGENT for d in range(n_turns - 1, -1, -1)]
    intent = Intent.from_name(f"Get{domain.capitalize()}")
    dialogue = build_dialogue(list(zip(speakers, turn_tokens)), intent)

    schema = Schema.of(domain, keys)
    cands = generate_candidates(dialogue, [s for s, _ in slots], schema, key_table, tau=0.6)
    positive = {s for s, m in slots if m.positive}
    labels = [j for j, c in enumerate(cands) if c.source in positive]
    return CarryoverInstance(dialogue, tuple(cands), frozenset(labels), domain=domain, uid=uid)


def key_table_for(cfg: SynthConfig) -> EmbeddingTable:
    """Fixed key-embedding table used for candidate mapping."""
    words = sorted({w for keys in cfg.domains.values() for k in keys for w in key_tokens(k)})
    return EmbeddingTable.random(words, 16, np.random.default_rng([cfg.seed, 99]), trainable=False)


def synth_generate(cfg: SynthConfig) -> dict[str, list[CarryoverInstance]]:
    """Generate a corpus and split it 80/10/10 into train/dev/test."""
    rng = np.random.default_rng(cfg.seed)
    key_table = key_table_for(cfg)
    data = [_one_dialogue(rng, cfg, key_table, f"synth-{cfg.seed}-{k}") for k in range(cfg.n_dialogues)]
    n_train = int(round(0.8 * len(data)))
    n_dev = int(round(0.1 * len(data)))
    return {
        "train": data[:n_train],
        "dev": data[n_train : n_train + n_dev],
        "test": data[n_train + n_dev :],
    }
