"""The full carryover model: embeddings, encoders and one decoder."""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import decoders as dec
from . import tensor as T
from .decoders import DecoderConfig, DecoderKind, OrderingPolicy, Prediction, PointerSteps
from .dialogue import CarryoverInstance
from .embeddings import EmbeddingTable
from .encoders import (
    DIST_DIM,
    SEPARATORS,
    BiLSTMWeights,
    DistanceEmbedding,
    SerializedDialogue,
    encode_intent,
    key_average,
    key_tokens,
    run_bilstm,
    span_average_matrix,
)

CLAMP = 1e-12


@dataclass
class EncoderConfig:
    emb_dim: int = 32
    hidden: int = 32  # per direction
    slot_value: str = "lstm"  # "lstm" (contextual states) or "avg" (raw embeddings)
    d_max: int = 6
    share_bilstm: bool = True

    def __post_init__(self):
        if self.slot_value not in ("lstm", "avg"):
            raise ValueError(f"slot_value must be 'lstm' or 'avg', not {self.slot_value!r}")


@dataclass
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    ordering: OrderingPolicy = field(default_factory=OrderingPolicy)
    dropout: float = 0.3  # on embedded tokens

    @property
    def d_val(self) -> int:
        e = self.encoder
        return e.emb_dim if e.slot_value == "avg" else 2 * e.hidden

    @property
    def d_slot(self) -> int:
        return self.encoder.emb_dim + self.d_val + DIST_DIM

    @property
    def d_ctx(self) -> int:
        return 2 * self.encoder.hidden

    def to_dict(self) -> dict:
        return {
            "encoder": asdict(self.encoder),
            "decoder": self.decoder.to_dict(),
            "ordering": {"mode": self.ordering.mode.value, "seed": self.ordering.seed},
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            EncoderConfig(**d.get("encoder", {})),
            DecoderConfig(**d.get("decoder", {})),
            OrderingPolicy(**d.get("ordering", {})),
            d.get("dropout", 0.3),
        )


def instance_rng(policy: OrderingPolicy, inst: CarryoverInstance) -> np.random.Generator:
    """Deterministic per-instance generator for evaluation-time orderings."""
    ident = inst.uid or repr([(c.mapped_key, c.source) for c in inst.candidates])
    return np.random.default_rng([policy.seed, zlib.crc32(ident.encode())])


def binary_nll(probs: T.Tensor, labels: Sequence[int]) -> T.Tensor:
    """``-sum_j [y log p + (1 - y) log(1 - p)]`` with p clamped away from 0/1."""
    if probs.size == 0:
        return T.Tensor(0.0)
    y = np.asarray(labels, dtype=np.float64)
    p = T.clamp(probs, CLAMP, 1.0 - CLAMP)
    ll = T.mul(T.log(p), y) + T.mul(T.log(1.0 - p), 1.0 - y)
    return -T.sum(ll)


def pointer_nll(steps: PointerSteps) -> T.Tensor:
    """``-sum_t log p_t(target_t)`` over every step, END included."""
    terms = [T.index(lp, t) for lp, t in zip(steps.log_probs, steps.targets)]
    return -T.sum(T.stack(terms))


def carryover_loss(output, labels: Sequence[int] | None = None) -> T.Tensor:
    """Negative log-likelihood of a decoder output.

    ``output`` is either per-slot probabilities (with 0/1 ``labels``) or the
    :class:`PointerSteps` of a teacher-forced pointer pass.
    """
    if isinstance(output, PointerSteps):
        return pointer_nll(output)
    if labels is None:
        raise ValueError("binary loss needs labels")
    return binary_nll(output, labels)


class CarryoverModel:
    def __init__(self, config: ModelConfig, embeddings: EmbeddingTable, params: dict[str, T.Parameter]):
        self.config = config
        self.embeddings = embeddings
        self.params = params

    # ------------------------------------------------------------ creation

    @classmethod
    def create(
        cls,
        config: ModelConfig,
        vocab: Sequence[str],
        rng: np.random.Generator,
        pretrained: EmbeddingTable | None = None,
        freeze_embeddings: bool = False,
    ) -> "CarryoverModel":
        e = config.encoder
        tokens = list(vocab) + list(SEPARATORS.values())
        table = EmbeddingTable.random(tokens, e.emb_dim, rng, pretrained, trainable=not freeze_embeddings)
        arrays: dict[str, np.ndarray] = {}
        names = ["bilstm"]
        if e.slot_value == "lstm" and not e.share_bilstm:
            names.append("slotlstm")
        for name in names:
            for direction in ("fwd", "bwd"):
                for k, v in T.lstm_init(rng, e.emb_dim, e.hidden).items():
                    arrays[f"{name}.{direction}.{k}"] = v
        arrays["dist.table"] = T.glorot_uniform(rng, (e.d_max + 1, DIST_DIM))
        arrays.update(dec.init_params(config.decoder, config.d_slot, config.d_ctx, e.emb_dim, rng))
        params = {k: T.Parameter.create(k, v) for k, v in arrays.items()}
        return cls(config, table, params)

    def parameters(self) -> list[T.Parameter]:
        out = list(self.params.values())
        if self.embeddings.trainable:
            out.insert(0, self.embeddings.param)
        return out

    def named_parameters(self) -> dict[str, T.Parameter]:
        return {"embedding": self.embeddings.param, **self.params}

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.zero_grad()

    def _values(self) -> dict[str, T.Tensor]:
        return {k: p.value for k, p in self.params.items()}

    def _bilstm(self, name: str) -> BiLSTMWeights:
        v = self.params
        return BiLSTMWeights(
            tuple(v[f"{name}.fwd.{k}"].value for k in "WUb"),
            tuple(v[f"{name}.bwd.{k}"].value for k in "WUb"),
        )

    # ------------------------------------------------------------- encoding

    def encode(
        self,
        instances: Sequence[CarryoverInstance],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> list[tuple[T.Tensor, T.Tensor, T.Tensor]]:
        """Slot encodings, context and intent vectors for a batch of instances."""
        cfg = self.config
        e = cfg.encoder
        table = self.embeddings
        layouts = [SerializedDialogue.of(inst.dialogue) for inst in instances]
        emb, states, lengths = run_bilstm(table, layouts, self._bilstm("bilstm"), cfg.dropout, train, rng)
        slot_states = states
        if e.slot_value == "lstm" and not e.share_bilstm:
            _, slot_states, _ = run_bilstm(table, layouts, self._bilstm("slotlstm"), cfg.dropout, train, rng)
        dist = DistanceEmbedding(self.params["dist.table"].value)
        H = e.hidden
        width = states.shape[1]
        out = []
        for b, inst in enumerate(instances):
            L = int(lengths[b])
            seq = T.index(states, b)
            c = T.concat([T.index(seq, (L - 1, slice(0, H))), T.index(seq, (0, slice(H, 2 * H)))])
            i = encode_intent(table, inst.dialogue.current_intent)
            cands = inst.candidates
            if cands:
                A = T.Tensor(span_average_matrix(layouts[b], cands, width))
                source = T.index(emb, b) if e.slot_value == "avg" else T.index(slot_states, b)
                x_val = T.matmul(A, source)
                x_key = key_average(table, [cd.mapped_key for cd in cands])
                x_dist = T.take_rows(dist.table, dist.rows([cd.distance for cd in cands]))
                X = T.concat([x_key, x_val, x_dist], axis=1)
            else:
                X = T.Tensor(np.zeros((0, cfg.d_slot)))
            out.append((X, c, i))
        return out

    # ------------------------------------------------------------- decoding

    def _order(self, inst: CarryoverInstance, rng: np.random.Generator | None) -> list[int]:
        policy = self.config.ordering
        return dec.order_slots(inst.candidates, policy, rng if rng is not None else instance_rng(policy, inst))

    def instance_loss(
        self,
        inst: CarryoverInstance,
        encoded: tuple[T.Tensor, T.Tensor, T.Tensor],
        train: bool = False,
        rng: np.random.Generator | None = None,
        order_rng: np.random.Generator | None = None,
    ) -> T.Tensor:
        X, c, i = encoded
        perm = self._order(inst, order_rng)
        Xo = T.take_rows(X, perm) if perm else X
        y = [int(j in inst.labels) for j in perm]
        d = self.config.decoder
        values = self._values()
        if d.kind is DecoderKind.POINTER:
            gold = [k for k, v in enumerate(y) if v]
            _, steps = dec.pointer_decode(Xo, c, i, values, d, labels=gold, train=train, rng=rng)
            return carryover_loss(steps)
        if d.kind is DecoderKind.INDEPENDENT:
            probs = dec.independent_probs(Xo, c, i, values, d, train, rng)
        else:
            probs = dec.transformer_probs(Xo, c, i, values, d, train, rng)
        return carryover_loss(probs, y)

    def batch_loss(
        self,
        instances: Sequence[CarryoverInstance],
        train: bool = False,
        rng: np.random.Generator | None = None,
        order_rng: np.random.Generator | None = None,
    ) -> T.Tensor:
        """Mean per-instance loss over a minibatch."""
        encoded = self.encode(instances, train, rng)
        losses = [self.instance_loss(inst, enc, train, rng, order_rng) for inst, enc in zip(instances, encoded)]
        return T.mean(T.stack(losses))

    def _decode(self, inst: CarryoverInstance, encoded) -> Prediction:
        X, c, i = encoded
        perm = self._order(inst, None)
        Xo = T.take_rows(X, perm) if perm else X
        d = self.config.decoder
        values = self._values()
        if d.kind is DecoderKind.POINTER:
            pred, _ = dec.pointer_decode(Xo, c, i, values, d)
            trace = tuple(perm[t] if t != dec.END else dec.END for t in pred.decode_trace)
            return Prediction(frozenset(perm[k] for k in pred.selected), None, trace)
        fn = dec.independent_probs if d.kind is DecoderKind.INDEPENDENT else dec.transformer_probs
        p_ordered = fn(Xo, c, i, values, d).data
        probs = np.zeros(len(perm))
        probs[perm] = p_ordered
        return Prediction(
            frozenset(int(j) for j in np.flatnonzero(probs > d.threshold)),
            tuple(float(p) for p in probs),
        )

    def predict(self, inst: CarryoverInstance) -> Prediction:
        return self.predict_many([inst])[0]

    def predict_many(self, instances: Sequence[CarryoverInstance], batch_size: int = 32) -> list[Prediction]:
        preds: list[Prediction] = []
        for s in range(0, len(instances), batch_size):
            chunk = instances[s : s + batch_size]
            preds.extend(self._decode(inst, enc) for inst, enc in zip(chunk, self.encode(chunk)))
        return preds

    def forward_signature(self, inst: CarryoverInstance) -> np.ndarray:
        """Raw forward outputs for one instance (used for bit-exact comparisons)."""
        X, c, i = self.encode([inst])[0]
        loss = self.instance_loss(inst, (X, c, i))
        return np.concatenate([X.data.reshape(-1), c.data, i.data, loss.data.reshape(-1)])


def corpus_vocabulary(instances: Sequence[CarryoverInstance]) -> list[str]:
    """Every token a model over ``instances`` may look up, in first-seen order."""
    seen: dict[str, None] = {}
    for inst in instances:
        for utt in inst.dialogue.utterances:
            for t in utt.tokens:
                seen.setdefault(t.lower())
        for t in inst.dialogue.current_intent.tokens:
            for w in key_tokens(t):
                seen.setdefault(w)
        for cand in inst.candidates:
            for w in key_tokens(cand.mapped_key):
                seen.setdefault(w)
    return list(seen)
