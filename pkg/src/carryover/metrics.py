"""Precision/recall/F1, distance-bucketed corpus scores and the S_Final x S_Carry grid.

All scores are micro-averaged: every candidate decision in scope is pooled
into one true-positive / false-positive / false-negative tally.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .decoders import Prediction
from .dialogue import CarryoverInstance


def prf1(hyp: Iterable, ref: Iterable) -> tuple[float, float, float]:
    hyp, ref = set(hyp), set(ref)
    tp = len(hyp & ref)
    return _scores(tp, len(hyp) - tp, len(ref) - tp)


def _scores(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    n_hyp, n_ref = tp + fp, tp + fn
    if n_hyp == 0 and n_ref == 0:
        return 1.0, 1.0, 1.0
    p = tp / n_hyp if n_hyp else 0.0
    r = tp / n_ref if n_ref else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


@dataclass(frozen=True)
class Bucket:
    label: str
    lo: int
    hi: float = math.inf  # inclusive

    def __contains__(self, d: int) -> bool:
        return self.lo <= d <= self.hi


@dataclass(frozen=True)
class BucketPreset:
    name: str
    buckets: tuple[Bucket, ...]
    aggregate: Bucket

    @property
    def labels(self) -> list[str]:
        return [b.label for b in self.buckets]


INTERNAL = BucketPreset(
    "internal",
    (Bucket("1", 1, 1), Bucket("2", 2, 2), Bucket("≥3", 3)),
    Bucket("≥1", 1),
)
DSTC2 = BucketPreset(
    "dstc2",
    (Bucket("0", 0, 0), Bucket("2", 2, 2), Bucket("4", 4, 4), Bucket("≥6", 6)),
    Bucket("all", 0),
)
PRESETS = {p.name: p for p in (INTERNAL, DSTC2)}


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    n: int = 0  # candidates in scope

    def add(self, predicted: bool, gold: bool) -> None:
        self.n += 1
        if predicted and gold:
            self.tp += 1
        elif predicted:
            self.fp += 1
        elif gold:
            self.fn += 1

    @property
    def prf(self) -> tuple[float, float, float]:
        return _scores(self.tp, self.fp, self.fn)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    count: int
    preset: str
    by_distance: dict[str, tuple[float, float, float, int]] = field(default_factory=dict)
    grid: dict[tuple[int, int], tuple[float, int]] = field(default_factory=dict)
    aggregate_label: str = ""

    def to_dict(self) -> dict:
        return {
            "preset": self.preset,
            "aggregate": self.aggregate_label,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "count": self.count,
            "by_distance": {k: dict(zip(("precision", "recall", "f1", "count"), v)) for k, v in self.by_distance.items()},
            "grid": [
                {"s_final": sf, "s_carry": sc, "f1": f, "count": n}
                for (sf, sc), (f, n) in sorted(self.grid.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            d["precision"], d["recall"], d["f1"], d["count"], d["preset"],
            {k: (v["precision"], v["recall"], v["f1"], v["count"]) for k, v in d["by_distance"].items()},
            {(g["s_final"], g["s_carry"]): (g["f1"], g["count"]) for g in d["grid"]},
            d.get("aggregate", ""),
        )

    def format_table(self) -> str:
        labels = list(self.by_distance) + [self.aggregate_label]
        width = max(8, *(len(l) + 2 for l in labels))
        head = "metric".ljust(10) + "".join(l.rjust(width) for l in labels)
        rows = [head, "-" * len(head)]
        cols = [self.by_distance[l] for l in self.by_distance] + [
            (self.precision, self.recall, self.f1, self.count)
        ]
        for k, name in enumerate(("P", "R", "F1")):
            rows.append(name.ljust(10) + "".join(f"{c[k]:.4f}".rjust(width) for c in cols))
        rows.append("count".ljust(10) + "".join(str(c[3]).rjust(width) for c in cols))
        return "\n".join(rows)


def score_predictions(
    dataset: Sequence[CarryoverInstance],
    predictions: Sequence[Prediction | Iterable[int]],
    preset: BucketPreset = INTERNAL,
) -> EvalReport:
    """Bucketed report from already-computed predictions."""
    if len(dataset) != len(predictions):
        raise ValueError(f"{len(dataset)} instances but {len(predictions)} predictions")
    buckets = {b.label: Counts() for b in preset.buckets}
    total = Counts()
    selections = [set(p.selected if isinstance(p, Prediction) else p) for p in predictions]
    for inst, sel in zip(dataset, selections):
        for j, cand in enumerate(inst.candidates):
            d = cand.distance
            pred, gold = j in sel, j in inst.labels
            if d in preset.aggregate:
                total.add(pred, gold)
            for b in preset.buckets:
                if d in b:
                    buckets[b.label].add(pred, gold)
    p, r, f = total.prf
    report = EvalReport(
        p, r, f, total.n, preset.name,
        {k: (*c.prf, c.n) for k, c in buckets.items()},
        aggregate_label=preset.aggregate.label,
    )
    report.grid = grid_scores(dataset, selections, preset)
    return report


def grid_cell(inst: CarryoverInstance) -> tuple[int, int]:
    """``(S_Final, S_Carry)``: gold slots after resolution, and those from context."""
    s_final = len(inst.labels)
    s_carry = sum(1 for j in inst.labels if inst.candidates[j].distance >= 1)
    return s_final, s_carry


def grid_scores(
    dataset: Sequence[CarryoverInstance],
    selections: Sequence[set[int]],
    preset: BucketPreset = INTERNAL,
) -> dict[tuple[int, int], tuple[float, int]]:
    cells: dict[tuple[int, int], Counts] = {}
    n_inst: dict[tuple[int, int], int] = {}
    for inst, sel in zip(dataset, selections):
        key = grid_cell(inst)
        counts = cells.setdefault(key, Counts())
        n_inst[key] = n_inst.get(key, 0) + 1
        for j, cand in enumerate(inst.candidates):
            if cand.distance in preset.aggregate:
                counts.add(j in sel, j in inst.labels)
    return {k: (c.prf[2], n_inst[k]) for k, c in sorted(cells.items())}


def corpus_eval(model, dataset: Sequence[CarryoverInstance], preset: BucketPreset | str = INTERNAL) -> EvalReport:
    if isinstance(preset, str):
        preset = PRESETS[preset]
    return score_predictions(dataset, model.predict_many(list(dataset)), preset)


def grid_eval(model, dataset: Sequence[CarryoverInstance], preset: BucketPreset | str = INTERNAL):
    if isinstance(preset, str):
        preset = PRESETS[preset]
    preds = model.predict_many(list(dataset))
    return grid_scores(dataset, [set(p.selected) for p in preds], preset)


def pair_consistency(
    dataset: Sequence[CarryoverInstance],
    predictions: Sequence[Prediction],
    pairs: Sequence[tuple[str, str]],
) -> tuple[float, int]:
    """Fraction of (A, B) candidate pairs predicted both-or-neither.

    Only instances holding exactly one context candidate of each key count.
    Returns ``(rate, number of pairs)``.
    """
    agree = total = 0
    for inst, pred in zip(dataset, predictions):
        for a, b in pairs:
            ja = [j for j, c in enumerate(inst.candidates) if c.mapped_key == a and c.distance >= 1]
            jb = [j for j, c in enumerate(inst.candidates) if c.mapped_key == b and c.distance >= 1]
            if len(ja) == 1 and len(jb) == 1:
                total += 1
                agree += (ja[0] in pred.selected) == (jb[0] in pred.selected)
    return (agree / total if total else float("nan")), total
