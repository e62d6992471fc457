"""Minibatch Adam training with dev-set model selection."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tensor as T
from .decoders import DecoderConfig, DecoderKind, OrderingPolicy
from .dialogue import CarryoverInstance
from .embeddings import EmbeddingTable
from .errors import EmptyDataset, NonFiniteLoss
from .metrics import PRESETS, corpus_eval
from .model import CarryoverModel, EncoderConfig, ModelConfig, corpus_vocabulary

log = logging.getLogger(__name__)

DEFAULT_EPOCHS = {
    DecoderKind.INDEPENDENT: 40,
    DecoderKind.POINTER: 40,
    DecoderKind.TRANSFORMER: 200,
}


@dataclass
class TrainConfig:
    lr: float = 0.001
    dropout: float = 0.3
    epochs: int | None = None  # None -> per-decoder default
    batch_size: int = 16
    seed: int = 0
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    ordering: OrderingPolicy = field(default_factory=OrderingPolicy)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    bucket_preset: str = "internal"
    freeze_embeddings: bool = False

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.bucket_preset not in PRESETS:
            raise ValueError(f"unknown bucket preset {self.bucket_preset!r}")

    @property
    def n_epochs(self) -> int:
        return self.epochs if self.epochs is not None else DEFAULT_EPOCHS[self.decoder.kind]

    def model_config(self) -> ModelConfig:
        decoder = replace(self.decoder, dropout=self.dropout)
        return ModelConfig(self.encoder, decoder, self.ordering, self.dropout)

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("decoder", "ordering", "encoder")}
        d["decoder"] = self.decoder.to_dict()
        d["ordering"] = {"mode": self.ordering.mode.value, "seed": self.ordering.seed}
        d["encoder"] = asdict(self.encoder)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        dec = DecoderConfig(**d.pop("decoder", {}))
        ordering = OrderingPolicy(**d.pop("ordering", {}))
        enc = EncoderConfig(**d.pop("encoder", {}))
        return cls(decoder=dec, ordering=ordering, encoder=enc, **d)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    dev_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1

    def record(self, loss: float, f1: float) -> None:
        self.train_loss.append(loss)
        self.dev_f1.append(f1)
        # strict > keeps the earliest epoch on ties
        if self.best_epoch < 0 or f1 > self.dev_f1[self.best_epoch]:
            self.best_epoch = len(self.dev_f1) - 1

    def to_dict(self) -> dict:
        return {"train_loss": self.train_loss, "dev_f1": self.dev_f1, "best_epoch": self.best_epoch}


def train(
    config: TrainConfig,
    train_set: Sequence[CarryoverInstance],
    dev_set: Sequence[CarryoverInstance] = (),
    pretrained: EmbeddingTable | None = None,
) -> tuple[CarryoverModel, TrainHistory]:
    """Train a model and return it with parameters from the best dev epoch.

    Without a dev set, selection falls back to train-set F1.
    """
    train_set = list(train_set)
    if not train_set:
        raise EmptyDataset("training set is empty")
    dev_set = list(dev_set) or train_set
    preset = PRESETS[config.bucket_preset]

    init_rng = np.random.default_rng([config.seed, 0])
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    order_rng = np.random.default_rng([config.seed, 3])

    model = CarryoverModel.create(
        config.model_config(), corpus_vocabulary(train_set), init_rng, pretrained, config.freeze_embeddings
    )
    params = model.parameters()
    history = TrainHistory()
    best: dict[str, np.ndarray] | None = None

    for epoch in range(config.n_epochs):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [train_set[k] for k in order[start : start + config.batch_size]]
            for p in params:
                p.zero_grad()
            loss = model.batch_loss(batch, train=True, rng=dropout_rng, order_rng=order_rng)
            value = float(loss.data)
            if not math.isfinite(value):
                raise NonFiniteLoss(epoch, b)
            grads = T.backward(loss)
            for p in params:
                p.accumulate(grads)
                T.adam_update(p, config.lr)
            losses.append(value)
        dev_f1 = corpus_eval(model, dev_set, preset).f1
        history.record(float(np.mean(losses)), dev_f1)
        if history.best_epoch == epoch:
            best = {k: p.value.data.copy() for k, p in model.named_parameters().items()}
        log.info("epoch %d loss %.4f dev F1 %.4f", epoch, history.train_loss[-1], dev_f1)

    assert best is not None
    for k, p in model.named_parameters().items():
        p.assign(best[k])
    return model, history
