"""Carryover decoders over encoded candidate slots.

Three decoders share one calling convention: slot encodings ``X[N, D_x]``,
context vector ``c`` and intent vector ``i`` in, a :class:`Prediction` out.

* independent: a per-slot MLP, each slot scored in isolation;
* pointer: an LSTM reads the ordered slots, a second LSTM points at the
  slots to carry (or at an END sentinel) one step at a time;
* transformer: one or more self-attention layers over the slot set with no
  positional encoding, followed by a per-slot sigmoid.

Parameters are passed as plain ``{name: Tensor}`` mappings.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import tensor as T
from .dialogue import CandidateSlot
from .errors import ShapeMismatch

Params = Mapping[str, T.Tensor]
NEG_INF = -1e30


class DecoderKind(str, enum.Enum):
    INDEPENDENT = "independent"
    POINTER = "pointer"
    TRANSFORMER = "transformer"


class Ordering(str, enum.Enum):
    NONE = "none"
    TURN = "turn"
    TEMPORAL = "temporal"


@dataclass(frozen=True)
class OrderingPolicy:
    mode: Ordering = Ordering.TEMPORAL
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Ordering(self.mode))


@dataclass
class DecoderConfig:
    kind: DecoderKind = DecoderKind.TRANSFORMER
    d_model: int = 64
    heads: int = 4
    d_k: int = 16
    d_v: int = 16
    layers: int = 1
    ff_dim: int | None = None  # defaults to 4 * d_model
    dropout: float = 0.3
    threshold: float = 0.5
    pointer_hidden: int = 64
    attn_dim: int | None = None  # pointer attention width, defaults to pointer_hidden
    context_mode: str = "concat"  # or "tokens": c and i as extra attention positions

    def __post_init__(self):
        self.kind = DecoderKind(self.kind)
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold {self.threshold} not in (0, 1)")
        if self.context_mode not in ("concat", "tokens"):
            raise ValueError(f"unknown context_mode {self.context_mode!r}")

    @property
    def ff_width(self) -> int:
        return self.ff_dim or 4 * self.d_model

    @property
    def attn_width(self) -> int:
        return self.attn_dim or self.pointer_hidden

    @classmethod
    def paper_scale(cls, kind: DecoderKind | str = DecoderKind.TRANSFORMER) -> "DecoderConfig":
        return cls(kind=kind, d_model=300, heads=80, d_k=64, d_v=64, pointer_hidden=300)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d


@dataclass(frozen=True)
class Prediction:
    selected: frozenset[int]
    per_slot_prob: tuple[float, ...] | None = None
    decode_trace: tuple[int, ...] = ()  # pointer only; END is reported as -1


END = -1


@dataclass
class PointerSteps:
    """Per-step log-distributions of a teacher-forced pointer pass."""

    log_probs: list[T.Tensor] = field(default_factory=list)  # each [N + 1]
    targets: list[int] = field(default_factory=list)  # END encoded as N


# ------------------------------------------------------------------ ordering


def order_slots(
    candidates: Sequence[CandidateSlot],
    policy: OrderingPolicy,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Permutation of candidate indices under ``policy``.

    Random tie-breaking draws from ``rng`` when given, otherwise from a
    generator seeded with ``policy.seed``.
    """
    n = len(candidates)
    if n <= 1:
        return list(range(n))
    rng = rng if rng is not None else np.random.default_rng(policy.seed)
    if policy.mode is Ordering.NONE:
        return [int(k) for k in rng.permutation(n)]
    if policy.mode is Ordering.TURN:
        jitter = rng.permutation(n)
        return sorted(range(n), key=lambda j: (-candidates[j].distance, jitter[j]))
    return sorted(
        range(n), key=lambda j: (-candidates[j].distance, candidates[j].source.span_left, j)
    )


# ---------------------------------------------------------------- parameters


def init_params(
    cfg: DecoderConfig, d_slot: int, d_ctx: int, d_int: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Initial decoder parameters (Glorot matrices, zero biases)."""
    g = lambda *shape: T.glorot_uniform(rng, shape)
    d_in = d_slot + d_ctx + d_int
    p: dict[str, np.ndarray] = {}
    if cfg.kind is DecoderKind.INDEPENDENT:
        p["ind.W1"] = g(d_in, cfg.d_model)
        p["ind.b1"] = np.zeros(cfg.d_model)
        p["ind.w2"] = g(cfg.d_model, 1)[:, 0]
        p["ind.b2"] = np.zeros(1)
    elif cfg.kind is DecoderKind.POINTER:
        H, A = cfg.pointer_hidden, cfg.attn_width
        for name, d in (("enc", d_slot), ("dec", H)):
            for k, v in T.lstm_init(rng, d, H).items():
                p[f"ptr.{name}.{k}"] = v
        p["ptr.init.W"] = g(H + d_ctx + d_int, H)
        p["ptr.init.b"] = np.zeros(H)
        p["ptr.go"] = rng.uniform(-0.1, 0.1, H)
        p["ptr.end"] = rng.uniform(-0.1, 0.1, H)
        p["ptr.att.W1"] = g(H, A)
        p["ptr.att.W2"] = g(H, A)
        p["ptr.att.v"] = g(A, 1)[:, 0]
    else:
        D = cfg.d_model
        if cfg.context_mode == "concat":
            p["trf.in.W"] = g(d_in, D)
        else:
            p["trf.in.W"] = g(d_slot, D)
            p["trf.ctx.W"] = g(d_ctx, D)
            p["trf.int.W"] = g(d_int, D)
            p["trf.type"] = rng.uniform(-0.1, 0.1, (3, D))
        p["trf.in.b"] = np.zeros(D)
        for l in range(cfg.layers):
            pre = f"trf.{l}."
            p[pre + "Wq"] = g(D, cfg.heads * cfg.d_k)
            p[pre + "Wk"] = g(D, cfg.heads * cfg.d_k)
            p[pre + "Wv"] = g(D, cfg.heads * cfg.d_v)
            p[pre + "Wo"] = g(cfg.heads * cfg.d_v, D)
            p[pre + "ln1.g"] = np.ones(D)
            p[pre + "ln1.b"] = np.zeros(D)
            p[pre + "ff.W1"] = g(D, cfg.ff_width)
            p[pre + "ff.b1"] = np.zeros(cfg.ff_width)
            p[pre + "ff.W2"] = g(cfg.ff_width, D)
            p[pre + "ff.b2"] = np.zeros(D)
            p[pre + "ln2.g"] = np.ones(D)
            p[pre + "ln2.b"] = np.zeros(D)
        p["trf.out.w"] = g(D, 1)[:, 0]
        p["trf.out.b"] = np.zeros(1)
    return p


def _check_inputs(X: T.Tensor, c: T.Tensor, i: T.Tensor, d_slot: int | None = None) -> int:
    if X.ndim != 2 or c.ndim != 1 or i.ndim != 1:
        raise ShapeMismatch(f"expected X[N, D], c[D_C], i[D_I]; got {X.shape}, {c.shape}, {i.shape}")
    if d_slot is not None and X.shape[0] and X.shape[1] != d_slot:
        raise ShapeMismatch(f"slot encodings have {X.shape[1]} features, expected {d_slot}")
    return X.shape[0]


def _with_context(X: T.Tensor, c: T.Tensor, i: T.Tensor) -> T.Tensor:
    """``[x_j ; c ; i]`` for every row j."""
    n = X.shape[0]
    ci = T.reshape(T.concat([c, i]), (1, -1))
    return T.concat([X, T.take_rows(ci, np.zeros(n, dtype=np.int64))], axis=1)


def _threshold(probs: np.ndarray, threshold: float) -> frozenset[int]:
    return frozenset(int(j) for j in np.flatnonzero(probs > threshold))


# --------------------------------------------------------------- independent


def independent_probs(
    X: T.Tensor, c: T.Tensor, i: T.Tensor, params: Params, cfg: DecoderConfig,
    train: bool = False, rng: np.random.Generator | None = None,
) -> T.Tensor:
    n = _check_inputs(X, c, i)
    if n == 0:
        return T.Tensor(np.zeros(0))
    W1 = params["ind.W1"]
    Z = _with_context(X, c, i)
    if Z.shape[1] != W1.shape[0]:
        raise ShapeMismatch(f"input width {Z.shape[1]} but W1 expects {W1.shape[0]}")
    hidden = T.tanh(T.linear(Z, W1, params["ind.b1"]))
    hidden = T.dropout(hidden, cfg.dropout, train, rng)
    return T.sigmoid(T.linear(hidden, params["ind.w2"], params["ind.b2"]))


def decode_independent(X, c, i, params: Params, cfg: DecoderConfig) -> Prediction:
    p = independent_probs(X, c, i, params, cfg).data
    return Prediction(_threshold(p, cfg.threshold), tuple(map(float, p)))


# ------------------------------------------------------------------- pointer


def _pointer_setup(X, c, i, params: Params, cfg: DecoderConfig, train, rng):
    n = X.shape[0]
    H = params["ptr.go"].shape[0]
    if n:
        enc = T.lstm_sequence(
            T.reshape(X, (1, n, X.shape[1])),
            params["ptr.enc.W"], params["ptr.enc.U"], params["ptr.enc.b"],
        )
        E = T.index(enc, 0)  # [N, H]
        final = T.index(E, n - 1)
        E = T.dropout(E, cfg.dropout, train, rng)
        memory = T.concat([E, T.reshape(params["ptr.end"], (1, H))], axis=0)
    else:
        final = T.Tensor(np.zeros(H))
        memory = T.reshape(params["ptr.end"], (1, H))
    h = T.tanh(T.linear(T.concat([final, c, i]), params["ptr.init.W"], params["ptr.init.b"]))
    cell = T.Tensor(np.zeros(H))
    mem_proj = T.matmul(memory, params["ptr.att.W1"])  # [N + 1, A]
    return memory, mem_proj, h, cell


def _pointer_step(inp, h, cell, memory, mem_proj, emitted: np.ndarray, params: Params):
    h, cell = T.lstm_cell_step(
        inp, h, cell, params["ptr.dec.W"], params["ptr.dec.U"], params["ptr.dec.b"]
    )
    scores = T.matmul(T.tanh(mem_proj + T.matmul(h, params["ptr.att.W2"])), params["ptr.att.v"])
    return h, cell, T.log_softmax(T.masked_fill(scores, emitted, NEG_INF))


def pointer_decode(
    X: T.Tensor,
    c: T.Tensor,
    i: T.Tensor,
    params: Params,
    cfg: DecoderConfig,
    labels: Sequence[int] | None = None,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Prediction, PointerSteps | None]:
    """Greedy pointer decoding, or a teacher-forced pass when ``labels`` is set.

    ``X`` must already be in the order chosen by an :class:`OrderingPolicy`.
    Teacher forcing feeds the positive positions in ascending (sequence)
    order followed by END. Emitted positions are masked, so no index repeats
    and decoding always stops within ``N + 1`` steps.
    """
    n = _check_inputs(X, c, i, params["ptr.enc.W"].shape[0])
    memory, mem_proj, h, cell = _pointer_setup(X, c, i, params, cfg, train, rng)
    emitted = np.zeros(n + 1, dtype=bool)
    inp = params["ptr.go"]

    if labels is not None:
        targets = sorted(set(int(j) for j in labels)) + [n]
        steps = PointerSteps()
        for tgt in targets:
            h, cell, logp = _pointer_step(inp, h, cell, memory, mem_proj, emitted, params)
            steps.log_probs.append(logp)
            steps.targets.append(tgt)
            if tgt < n:
                emitted = emitted.copy()
                emitted[tgt] = True
                inp = T.index(memory, tgt)
        trace = tuple(t if t < n else END for t in targets)
        return Prediction(frozenset(targets[:-1]), None, trace), steps

    trace: list[int] = []
    for _ in range(n + 1):
        h, cell, logp = _pointer_step(inp, h, cell, memory, mem_proj, emitted, params)
        choice = int(np.argmax(logp.data))
        if choice == n:
            trace.append(END)
            break
        trace.append(choice)
        emitted = emitted.copy()
        emitted[choice] = True
        inp = T.index(memory, choice)
    else:  # pragma: no cover - END is the only unmasked entry at step N + 1
        trace.append(END)
    return Prediction(frozenset(t for t in trace if t != END), None, tuple(trace)), None


# --------------------------------------------------------------- transformer


def multihead_self_attention(
    X: T.Tensor, params: Params, heads: int, d_k: int, d_v: int,
    prefix: str = "", return_weights: bool = False,
):
    """Scaled dot-product self-attention with ``heads`` heads, no positions."""
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeMismatch(f"self-attention expects X[N >= 1, D], got {X.shape}")
    n, D = X.shape
    Wq, Wk, Wv, Wo = (params[prefix + k] for k in ("Wq", "Wk", "Wv", "Wo"))
    if Wq.shape != (D, heads * d_k) or Wk.shape != (D, heads * d_k):
        raise ShapeMismatch(f"query/key projections {Wq.shape}/{Wk.shape} vs D={D}, {heads}x{d_k}")
    if Wv.shape != (D, heads * d_v) or Wo.shape != (heads * d_v, D):
        raise ShapeMismatch(f"value/output projections {Wv.shape}/{Wo.shape} vs D={D}, {heads}x{d_v}")

    def split(M, d):
        return T.transpose(T.reshape(M, (n, heads, d)), (1, 0, 2))  # [Z, N, d]

    Q = split(T.matmul(X, Wq), d_k)
    K = split(T.matmul(X, Wk), d_k)
    V = split(T.matmul(X, Wv), d_v)
    scores = T.mul(T.matmul(Q, T.transpose(K)), 1.0 / np.sqrt(d_k))
    A = T.softmax(scores)  # [Z, N, N]
    O = T.reshape(T.transpose(T.matmul(A, V), (1, 0, 2)), (n, heads * d_v))
    out = T.matmul(O, Wo)
    return (out, A) if return_weights else out


def transformer_probs(
    X: T.Tensor, c: T.Tensor, i: T.Tensor, params: Params, cfg: DecoderConfig,
    train: bool = False, rng: np.random.Generator | None = None,
) -> T.Tensor:
    n = _check_inputs(X, c, i)
    if n == 0:
        return T.Tensor(np.zeros(0))
    if cfg.context_mode == "concat":
        Z = _with_context(X, c, i)
        if Z.shape[1] != params["trf.in.W"].shape[0]:
            raise ShapeMismatch(f"input width {Z.shape[1]} but projection expects {params['trf.in.W'].shape[0]}")
        H = T.linear(Z, params["trf.in.W"], params["trf.in.b"])
    else:
        slots = T.linear(X, params["trf.in.W"], params["trf.in.b"])
        ctx = T.reshape(T.matmul(c, params["trf.ctx.W"]), (1, -1))
        itn = T.reshape(T.matmul(i, params["trf.int.W"]), (1, -1))
        types = params["trf.type"]
        H = T.concat(
            [slots + T.index(types, slice(0, 1)), ctx + T.index(types, slice(1, 2)),
             itn + T.index(types, slice(2, 3))],
            axis=0,
        )
    for l in range(cfg.layers):
        pre = f"trf.{l}."
        att = multihead_self_attention(H, params, cfg.heads, cfg.d_k, cfg.d_v, prefix=pre)
        H = T.layer_norm(H + T.dropout(att, cfg.dropout, train, rng), params[pre + "ln1.g"], params[pre + "ln1.b"])
        ff = T.linear(T.relu(T.linear(H, params[pre + "ff.W1"], params[pre + "ff.b1"])),
                      params[pre + "ff.W2"], params[pre + "ff.b2"])
        H = T.layer_norm(H + T.dropout(ff, cfg.dropout, train, rng), params[pre + "ln2.g"], params[pre + "ln2.b"])
    if cfg.context_mode == "tokens":
        H = T.index(H, slice(0, n))
    return T.sigmoid(T.linear(H, params["trf.out.w"], params["trf.out.b"]))


def transformer_decode(X, c, i, params: Params, cfg: DecoderConfig) -> Prediction:
    p = transformer_probs(X, c, i, params, cfg).data
    return Prediction(_threshold(p, cfg.threshold), tuple(map(float, p)))
