"""Finite-difference checks over every differentiable op and decoder loss.

Each case draws small random inputs from a seeded generator, reduces the
op's output to a scalar with fixed random weights and compares
:func:`carryover.tensor.backward` against central differences.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import decoders as dec
from . import tensor as T
from .decoders import DecoderConfig, DecoderKind
from .model import binary_nll, pointer_nll

TOLERANCE = 1e-4
Builder = Callable[[np.random.Generator], tuple[Callable[..., T.Tensor], list[T.Tensor]]]


def _t(a) -> T.Tensor:
    return T.Tensor(np.asarray(a, dtype=np.float64), requires_grad=True)


def _weighted(out: T.Tensor, R: np.ndarray) -> T.Tensor:
    return T.sum(T.mul(out, R))


def _unary(fn, low=-2.0, high=2.0, away_from=None):
    def build(rng):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        x = rng.uniform(low, high, shape)
        if away_from is not None:  # keep clear of kinks
            x = np.where(np.abs(x - away_from) < 0.05, x + 0.1, x)
        R = rng.normal(size=shape)
        return (lambda a: _weighted(fn(a), R)), [_t(x)]

    return build


def _binary(fn, positive_b=False, broadcast=True):
    def build(rng):
        shape = (int(rng.integers(1, 4)), int(rng.integers(1, 5)))
        a = rng.normal(size=shape)
        b_shape = (shape[1],) if broadcast and rng.random() < 0.5 else shape
        b = rng.uniform(0.5, 2.0, b_shape) * rng.choice([-1, 1], b_shape) if positive_b else rng.normal(size=b_shape)
        R = rng.normal(size=shape)
        return (lambda x, y: _weighted(fn(x, y), R)), [_t(a), _t(b)]

    return build


def _matmul(rng):
    n, k, m = (int(v) for v in rng.integers(1, 5, 3))
    if rng.random() < 0.3:  # batched
        z = int(rng.integers(1, 3))
        a, b, R = rng.normal(size=(z, n, k)), rng.normal(size=(z, k, m)), rng.normal(size=(z, n, m))
    elif rng.random() < 0.3:  # matrix-vector
        a, b, R = rng.normal(size=(n, k)), rng.normal(size=k), rng.normal(size=n)
    else:
        a, b, R = rng.normal(size=(n, k)), rng.normal(size=(k, m)), rng.normal(size=(n, m))
    return (lambda x, y: _weighted(T.matmul(x, y), R)), [_t(a), _t(b)]


def _linear(rng):
    n, k, m = (int(v) for v in rng.integers(1, 5, 3))
    R = rng.normal(size=(n, m))
    return (lambda x, w, b: _weighted(T.linear(x, w, b), R)), [
        _t(rng.normal(size=(n, k))), _t(rng.normal(size=(k, m))), _t(rng.normal(size=m))
    ]


def _reshape(rng):
    a = rng.normal(size=(2, 6))
    R = rng.normal(size=(3, 4))
    return (lambda x: _weighted(T.reshape(x, (3, 4)), R)), [_t(a)]


def _transpose(rng):
    a = rng.normal(size=(2, 3, 4))
    axes = tuple(int(v) for v in rng.permutation(3))
    R = rng.normal(size=tuple(a.shape[k] for k in axes))
    return (lambda x: _weighted(T.transpose(x, axes), R)), [_t(a)]


def _concat(rng):
    a, b = rng.normal(size=(3, 2)), rng.normal(size=(3, 4))
    R = rng.normal(size=(3, 6))
    return (lambda x, y: _weighted(T.concat([x, y], axis=1), R)), [_t(a), _t(b)]


def _stack(rng):
    a, b = rng.normal(size=4), rng.normal(size=4)
    R = rng.normal(size=(2, 4))
    return (lambda x, y: _weighted(T.stack([x, y]), R)), [_t(a), _t(b)]


def _index(rng):
    a = rng.normal(size=(5, 3))
    rows = rng.integers(0, 5, 4)  # repeats exercise gradient accumulation
    R = rng.normal(size=(4, 3))
    return (lambda x: _weighted(T.take_rows(x, rows), R)), [_t(a)]


def _slice(rng):
    a = rng.normal(size=(4, 5))
    R = rng.normal(size=(2,))
    return (lambda x: _weighted(T.index(x, (slice(1, 3), 2)), R)), [_t(a)]


def _reduce(fn):
    def build(rng):
        a = rng.normal(size=(3, 4))
        axis = [None, 0, 1][int(rng.integers(3))]
        R = rng.normal(size=np.asarray(a.sum(axis=axis)).shape)
        return (lambda x: _weighted(fn(x, axis=axis), R)), [_t(a)]

    return build


def _masked_fill(rng):
    a = rng.normal(size=(3, 4))
    mask = rng.random((3, 4)) < 0.3
    R = rng.normal(size=(3, 4))
    return (lambda x: _weighted(T.softmax(T.masked_fill(x, mask, -1e30)), R)), [_t(a)]


def _layer_norm(rng):
    n, d = int(rng.integers(1, 4)), int(rng.integers(2, 7))
    R = rng.normal(size=(n, d))
    return (lambda x, g, b: _weighted(T.layer_norm(x, g, b), R)), [
        _t(rng.normal(size=(n, d))), _t(rng.normal(size=d)), _t(rng.normal(size=d))
    ]


def _dropout(rng):
    a = rng.normal(size=(3, 4))
    R = rng.normal(size=(3, 4))
    seed = int(rng.integers(1 << 30))
    return (lambda x: _weighted(T.dropout(x, 0.3, True, np.random.default_rng(seed)), R)), [_t(a)]


def _lstm_cell(rng):
    d, h = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    Rh, Rc = rng.normal(size=h), rng.normal(size=h)

    def f(x, hp, cp, W, U, b):
        hn, cn = T.lstm_cell_step(x, hp, cp, W, U, b)
        return _weighted(hn, Rh) + _weighted(cn, Rc)

    w = T.lstm_init(rng, d, h)
    return f, [_t(rng.normal(size=d)), _t(rng.normal(size=h)), _t(rng.normal(size=h)),
               _t(w["W"] + 0.1 * rng.normal(size=w["W"].shape)), _t(w["U"]), _t(rng.normal(size=4 * h))]


def _lstm_seq(rng):
    B, L, d, h = 2, int(rng.integers(1, 5)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
    lengths = [L, int(rng.integers(1, L + 1))]
    reverse = bool(rng.random() < 0.5)
    R = rng.normal(size=(B, L, h))
    w = T.lstm_init(rng, d, h)

    def f(x, W, U, b, h0):
        return _weighted(T.lstm_sequence(x, W, U, b, lengths, reverse, h0), R)

    return f, [_t(rng.normal(size=(B, L, d))), _t(w["W"]), _t(w["U"]),
               _t(rng.normal(size=4 * h) * 0.5), _t(rng.normal(size=(B, h)))]


def _attention(rng):
    n, D, Z, dk = int(rng.integers(1, 5)), 6, 2, 3
    names = ["Wq", "Wk", "Wv", "Wo"]
    shapes = [(D, Z * dk)] * 3 + [(Z * dk, D)]
    R = rng.normal(size=(n, D))

    def f(X, *Ws):
        return _weighted(dec.multihead_self_attention(X, dict(zip(names, Ws)), Z, dk, dk), R)

    return f, [_t(rng.normal(size=(n, D)))] + [_t(rng.normal(size=s) * 0.5) for s in shapes]


# decoder losses: N <= 4 slots, slot width <= 16
D_SLOT, D_CTX, D_INT = 8, 4, 3


def _decoder_loss(kind: DecoderKind):
    def build(rng):
        cfg = DecoderConfig(kind=kind, d_model=8, heads=2, d_k=4, d_v=4, pointer_hidden=6, attn_dim=5, dropout=0.0)
        params = dec.init_params(cfg, D_SLOT, D_CTX, D_INT, rng)
        names = list(params)
        n = int(rng.integers(1, 5))
        labels = [int(v) for v in rng.random(n) < 0.5]

        def f(X, c, i, *ps):
            values = dict(zip(names, ps))
            if kind is DecoderKind.POINTER:
                gold = [k for k, y in enumerate(labels) if y]
                _, steps = dec.pointer_decode(X, c, i, values, cfg, labels=gold)
                return pointer_nll(steps)
            fn = dec.independent_probs if kind is DecoderKind.INDEPENDENT else dec.transformer_probs
            return binary_nll(fn(X, c, i, values, cfg), labels)

        inputs = [_t(rng.normal(size=(n, D_SLOT))), _t(rng.normal(size=D_CTX)), _t(rng.normal(size=D_INT))]
        # perturb zero-initialised biases so every path carries gradient
        inputs += [_t(params[k] + 0.1 * rng.normal(size=params[k].shape)) for k in names]
        return f, inputs

    return build


CASES: dict[str, tuple[Builder, int | None]] = {
    "add": (_binary(T.add), None),
    "sub": (_binary(T.sub), None),
    "mul": (_binary(T.mul), None),
    "div": (_binary(T.div, positive_b=True), None),
    "matmul": (_matmul, None),
    "linear": (_linear, None),
    "reshape": (_reshape, None),
    "transpose": (_transpose, None),
    "concat": (_concat, None),
    "stack": (_stack, None),
    "take_rows": (_index, None),
    "index": (_slice, None),
    "sum": (_reduce(T.sum), None),
    "mean": (_reduce(T.mean), None),
    "sigmoid": (_unary(T.sigmoid), None),
    "tanh": (_unary(T.tanh), None),
    "relu": (_unary(T.relu, away_from=0.0), None),
    "exp": (_unary(T.exp), None),
    "log": (_unary(T.log, 0.2, 3.0), None),
    "clamp": (_unary(lambda x: T.clamp(x, -0.5, 0.5), away_from=0.5), None),
    "softmax": (_unary(T.softmax), None),
    "log_softmax": (_unary(T.log_softmax), None),
    "masked_fill": (_masked_fill, None),
    "layer_norm": (_layer_norm, None),
    "dropout": (_dropout, None),
    "lstm_cell_step": (_lstm_cell, None),
    "lstm_sequence": (_lstm_seq, None),
    "self_attention": (_attention, None),
    "loss.independent": (_decoder_loss(DecoderKind.INDEPENDENT), 6),
    "loss.pointer": (_decoder_loss(DecoderKind.POINTER), 6),
    "loss.transformer": (_decoder_loss(DecoderKind.TRANSFORMER), 6),
}


@dataclass
class CaseResult:
    name: str
    max_error: float
    cases: int
    seconds: float

    @property
    def ok(self) -> bool:
        return self.max_error <= TOLERANCE


def run_case(name: str, n_cases: int = 20, seed: int = 0) -> CaseResult:
    build, max_coords = CASES[name]
    start = time.perf_counter()
    worst = 0.0
    for k in range(n_cases):
        rng = np.random.default_rng([seed, k, sum(name.encode())])
        f, inputs = build(rng)
        err = T.finite_diff_check(f, inputs, max_coords=max_coords, rng=rng)
        worst = max(worst, err)
    return CaseResult(name, worst, n_cases, time.perf_counter() - start)


def run_suite(n_cases: int = 20, seed: int = 0, names=None) -> list[CaseResult]:
    return [run_case(n, n_cases, seed) for n in (names or CASES)]
