"""Dense float64 tensors and a reverse-mode gradient engine.

Every op returns a new :class:`Tensor`. When any input requires a gradient the
result records its inputs and a backward rule; :func:`backward` walks that
graph in reverse topological order. Graphs are never mutated after the
forward pass, so running :func:`backward` twice gives identical gradients.

The LSTM recurrences are fused into single graph nodes with hand-written
backward passes; everything else is composed from small ops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, InvalidRate, NonScalarLoss, ShapeMismatch

DTYPE = np.float64
BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "op")
    __array_priority__ = 100.0

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward_fn: BackwardFn | None = None,
        op: str = "leaf",
    ):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.shape[0]

    # operator sugar
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, idx):
        return index(self, idx)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents: Iterable[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward_fn, op)
    return Tensor(data, op=op)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------- arithmetic


def _check_broadcast(a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b)
    return _node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b)
    return _node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b)
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast(a, b)
    out = a.data / b.data
    return _node(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * out / b.data, b.shape),
        ),
        "div",
    )


def matmul(a, b) -> Tensor:
    """Matrix product with numpy ``@`` semantics (1-D operands and batching)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeMismatch("matmul needs at least 1-D operands")
    k_a = a.shape[-1]
    k_b = b.shape[0] if b.ndim == 1 else b.shape[-2]
    if k_a != k_b:
        raise ShapeMismatch(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        out = a.data @ b.data
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None

    def backward(g):
        A = a.data[None, :] if a.ndim == 1 else a.data
        B = b.data[:, None] if b.ndim == 1 else b.data
        G = g
        if a.ndim == 1:
            G = np.expand_dims(G, -2)
        if b.ndim == 1:
            G = np.expand_dims(G, -1)
        ga = G @ np.swapaxes(B, -1, -2)
        gb = np.swapaxes(A, -1, -2) @ G
        if a.ndim == 1:
            ga = ga.reshape(ga.shape[:-2] + ga.shape[-1:])
        if b.ndim == 1:
            gb = gb[..., 0]
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out, (a, b), backward, "matmul")


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    y = matmul(x, w)
    return y if b is None else add(y, b)


# ------------------------------------------------------------------- shaping


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None
    return _node(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    x = _as_tensor(x)
    if axes is None:
        axes = list(range(x.ndim))
        if x.ndim >= 2:
            axes[-1], axes[-2] = axes[-2], axes[-1]
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _node(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),), "transpose")


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise ShapeMismatch("concat of nothing")
    try:
        out = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None
    ax = axis % out.ndim
    bounds = np.cumsum([x.shape[ax] for x in xs])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _node(out, xs, backward, "concat")


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise ShapeMismatch("stack of nothing")
    try:
        out = np.stack([x.data for x in xs], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(str(e)) from None
    ax = axis % out.ndim

    def backward(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(xs)))

    return _node(out, xs, backward, "stack")


def index(x: Tensor, idx) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate gradient."""
    x = _as_tensor(x)
    if isinstance(idx, Tensor):
        idx = idx.data.astype(np.int64)
    out = x.data[idx]

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _node(np.array(out, dtype=DTYPE), (x,), backward, "index")


def take_rows(table: Tensor, rows) -> Tensor:
    """Gather rows of a 2-D table (embedding lookup)."""
    rows = np.asarray(rows, dtype=np.int64)
    return index(table, rows)


# --------------------------------------------------------------- reductions


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = _as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(out, (x,), backward, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _as_tensor(x)
    n = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(n))


# -------------------------------------------------------------- elementwise


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def elementwise(op: str, x: Tensor) -> Tensor:
    """Apply one of ``sigmoid``, ``tanh``, ``relu``, ``exp``, ``log``."""
    x = _as_tensor(x)
    d = x.data
    if op == "sigmoid":
        out = _sigmoid(d)
        bw = lambda g: (g * out * (1.0 - out),)
    elif op == "tanh":
        out = np.tanh(d)
        bw = lambda g: (g * (1.0 - out * out),)
    elif op == "relu":
        out = np.maximum(d, 0.0)
        bw = lambda g: (g * (d > 0),)
    elif op == "exp":
        out = np.exp(d)
        bw = lambda g: (g * out,)
    elif op == "log":
        if np.any(d <= 0):
            raise DomainError("log of non-positive value")
        out = np.log(d)
        bw = lambda g: (g / d,)
    else:
        raise ValueError(f"unknown elementwise op {op!r}")
    return _node(out, (x,), bw, op)


def sigmoid(x: Tensor) -> Tensor:
    return elementwise("sigmoid", x)


def tanh(x: Tensor) -> Tensor:
    return elementwise("tanh", x)


def relu(x: Tensor) -> Tensor:
    return elementwise("relu", x)


def exp(x: Tensor) -> Tensor:
    return elementwise("exp", x)


def log(x: Tensor) -> Tensor:
    return elementwise("log", x)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    x = _as_tensor(x)
    inside = (x.data > lo) & (x.data < hi)
    return _node(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,), "clamp")


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is true by a constant (no gradient there)."""
    x = _as_tensor(x)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    out = np.where(mask, value, x.data)
    return _node(out, (x,), lambda g: (np.where(mask, 0.0, g),), "masked_fill")


# ------------------------------------------------------------ normalisation


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _node(out, (x,), backward, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=-1, keepdims=True),)

    return _node(out, (x,), backward, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise each row of the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    d = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        gxhat = g * gain.data
        gx = inv / d * (
            d * gxhat
            - gxhat.sum(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
        )
        return gx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return _node(out, (x, gain, bias), backward, "layer_norm")


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; identity (the very same object) when not training."""
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"dropout rate {rate} not in [0, 1)")
    x = _as_tensor(x)
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs an explicit rng")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _node(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


dropout_apply = dropout


# ---------------------------------------------------------------------- LSTM
# Gate layout along the 4H axis: input, forget, candidate, output.


def _lstm_forward_step(xw, h, c, U, H):
    z = xw + h @ U
    i = _sigmoid(z[..., :H])
    f = _sigmoid(z[..., H : 2 * H])
    gg = np.tanh(z[..., 2 * H : 3 * H])
    o = _sigmoid(z[..., 3 * H :])
    c_new = f * c + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (i, f, gg, o, tc)


def _lstm_backward_step(dh, dc, c_prev, cache):
    i, f, gg, o, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    di = dc * gg
    df = dc * c_prev
    dg = dc * i
    dz = np.concatenate(
        [di * i * (1 - i), df * f * (1 - f), dg * (1 - gg * gg), do * o * (1 - o)], axis=-1
    )
    return dz, dc * f


def _check_lstm(d_in: int, W: Tensor, U: Tensor, b: Tensor) -> int:
    if W.ndim != 2 or U.ndim != 2 or b.ndim != 1:
        raise ShapeMismatch("LSTM weights must be W[D_in,4H], U[H,4H], b[4H]")
    H4 = U.shape[1]
    if H4 % 4 or U.shape[0] * 4 != H4 or W.shape[1] != H4 or b.shape[0] != H4:
        raise ShapeMismatch(f"inconsistent LSTM weights W{W.shape} U{U.shape} b{b.shape}")
    if W.shape[0] != d_in:
        raise ShapeMismatch(f"LSTM input dim {d_in} but W expects {W.shape[0]}")
    return H4 // 4


def lstm_cell_step(x, h_prev, c_prev, W, U, b) -> tuple[Tensor, Tensor]:
    """One LSTM step. Returns ``(h, c)``; both are differentiable."""
    x, h_prev, c_prev, W, U, b = map(_as_tensor, (x, h_prev, c_prev, W, U, b))
    H = _check_lstm(x.shape[-1], W, U, b)
    if h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise ShapeMismatch(f"state size {h_prev.shape[-1]}/{c_prev.shape[-1]}, expected {H}")
    packed = _lstm_cell_packed(x, h_prev, c_prev, W, U, b, H)
    h = index(packed, (Ellipsis, slice(0, H)))
    c = index(packed, (Ellipsis, slice(H, 2 * H)))
    return h, c


def _lstm_cell_packed(x, h_prev, c_prev, W, U, b, H) -> Tensor:
    xw = x.data @ W.data + b.data
    h, c, cache = _lstm_forward_step(xw, h_prev.data, c_prev.data, U.data, H)

    def backward(g):
        dh, dc = g[..., :H], g[..., H:]
        dz, dc_prev = _lstm_backward_step(dh, dc, c_prev.data, cache)
        dx = dz @ W.data.T
        dh_prev = dz @ U.data.T
        X2 = np.atleast_2d(x.data)
        DZ = np.atleast_2d(dz)
        dW = X2.reshape(-1, X2.shape[-1]).T @ DZ.reshape(-1, DZ.shape[-1])
        dU = np.atleast_2d(h_prev.data).reshape(-1, H).T @ DZ.reshape(-1, DZ.shape[-1])
        db = DZ.reshape(-1, DZ.shape[-1]).sum(axis=0)
        return (
            _unbroadcast(dx, x.shape),
            _unbroadcast(dh_prev, h_prev.shape),
            _unbroadcast(dc_prev, c_prev.shape),
            dW,
            dU,
            db,
        )

    return _node(np.concatenate([h, c], axis=-1), (x, h_prev, c_prev, W, U, b), backward, "lstm_cell")


def lstm_sequence(
    x: Tensor,
    W: Tensor,
    U: Tensor,
    b: Tensor,
    lengths: Sequence[int] | None = None,
    reverse: bool = False,
    h0: Tensor | None = None,
) -> Tensor:
    """Run an LSTM over a padded batch ``x[B, T, D]`` in one fused node.

    Returns hidden states ``[B, T, H]``; positions at or beyond a sequence's
    length are zero. With ``reverse`` each sequence is read from its last
    valid token back to position 0, and outputs stay aligned to input
    positions. ``h0`` (``[B, H]``) seeds the hidden state; the cell starts at 0.
    """
    x, W, U, b = map(_as_tensor, (x, W, U, b))
    if x.ndim != 3:
        raise ShapeMismatch(f"lstm_sequence expects [B, T, D], got {x.shape}")
    B, T, D = x.shape
    H = _check_lstm(D, W, U, b)
    lengths = np.full(B, T) if lengths is None else np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (B,) or np.any(lengths < 1) or np.any(lengths > T):
        raise ShapeMismatch(f"bad lengths {lengths.tolist()} for T={T}")
    if h0 is not None:
        h0 = _as_tensor(h0)
        if h0.shape != (B, H):
            raise ShapeMismatch(f"h0 shape {h0.shape}, expected {(B, H)}")

    # time-major gather so that step t reads the t-th token in reading order
    t_idx = np.arange(T)
    if reverse:
        src = lengths[:, None] - 1 - t_idx[None, :]
    else:
        src = np.broadcast_to(t_idx, (B, T)).copy()
    valid = src >= 0
    valid &= t_idx[None, :] < lengths[:, None]
    src = np.where(valid, src, 0)
    rows = np.arange(B)[:, None]
    xs = x.data[rows, src]  # [B, T, D] in reading order
    XW = xs @ W.data + b.data
    h = np.zeros((B, H)) if h0 is None else h0.data.copy()
    c = np.zeros((B, H))
    hs = np.zeros((B, T, H))
    caches = []
    prev = []
    m = valid[..., None].astype(DTYPE)
    for t in range(T):
        prev.append((h, c))
        hn, cn, cache = _lstm_forward_step(XW[:, t], h, c, U.data, H)
        caches.append(cache)
        # freeze state past the end so gradients stay clean
        h = m[:, t] * hn + (1 - m[:, t]) * h
        c = m[:, t] * cn + (1 - m[:, t]) * c
        hs[:, t] = m[:, t, :] * hn
    out = np.zeros((B, T, H))
    for bi in range(B):
        L = lengths[bi]
        out[bi, :L] = hs[bi, :L][::-1] if reverse else hs[bi, :L]

    def backward(g):
        gs = np.zeros((B, T, H))
        for bi in range(B):
            L = lengths[bi]
            gs[bi, :L] = g[bi, :L][::-1] if reverse else g[bi, :L]
        dXW = np.zeros((B, T, 4 * H))
        dU = np.zeros_like(U.data)
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            mt = m[:, t]
            h_prev, c_prev = prev[t]
            dh_step = mt * (dh + gs[:, t])
            dc_step = mt * dc
            dz, dc_prev = _lstm_backward_step(dh_step, dc_step, c_prev, caches[t])
            dXW[:, t] = dz
            dU += h_prev.T @ dz
            dh = dz @ U.data.T + (1 - mt) * dh
            dc = dc_prev + (1 - mt) * dc
        flatXW = dXW.reshape(-1, 4 * H)
        dW = xs.reshape(-1, D).T @ flatXW
        db = flatXW.sum(axis=0)
        dxs = (dXW @ W.data.T) * m
        dx = np.zeros_like(x.data)
        np.add.at(dx, (np.broadcast_to(rows, (B, T)), src), dxs)
        grads = [dx, dW, dU, db]
        if h0 is not None:
            grads.append(dh)
        return tuple(grads)

    parents = (x, W, U, b) + ((h0,) if h0 is not None else ())
    return _node(out, parents, backward, "lstm_sequence")


# ------------------------------------------------------------------- backward


class Tape:
    """The recorded graph behind a scalar, in topological order."""

    def __init__(self, output: Tensor):
        self.output = output
        order: list[Tensor] = []
        seen: set[int] = set()
        stack_: list[tuple[Tensor, bool]] = [(output, False)]
        while stack_:
            node, expanded = stack_.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack_.append((node, True))
            for p in node.parents:
                if p.requires_grad and id(p) not in seen:
                    stack_.append((p, False))
        self.nodes: tuple[Tensor, ...] = tuple(order)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def leaves(self) -> list[Tensor]:
        return [n for n in self.nodes if not n.parents and n.requires_grad]

    def entries(self) -> list[tuple[str, tuple[int, ...], int]]:
        """``(op, input ids, output id)`` triples, inputs always earlier."""
        pos = {id(n): k for k, n in enumerate(self.nodes)}
        return [
            (n.op, tuple(pos[id(p)] for p in n.parents if id(p) in pos), k)
            for k, n in enumerate(self.nodes)
        ]


class Gradients(dict):
    """Mapping leaf tensor -> gradient array; missing leaves read as zero."""

    def of(self, t: Tensor) -> np.ndarray:
        g = self.get(t)
        return np.zeros_like(t.data) if g is None else g


def backward(loss: Tensor, tape: Tape | None = None) -> Gradients:
    """Reverse sweep from a scalar ``loss``; returns gradients of every leaf."""
    if loss.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.shape}")
    out = Gradients()
    if not loss.requires_grad:
        return out
    tape = tape or Tape(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            out[node] = g
            continue
        for p, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            k = id(p)
            if k in grads:
                grads[k] = grads[k] + pg
            else:
                grads[k] = np.array(pg, dtype=DTYPE)
    return out


# --------------------------------------------------------------- parameters


@dataclass
class Parameter:
    name: str
    value: Tensor
    grad: np.ndarray = field(repr=False)
    adam_m: np.ndarray = field(repr=False)
    adam_v: np.ndarray = field(repr=False)
    step_count: int = 0
    trainable: bool = True

    @classmethod
    def create(cls, name: str, data, trainable: bool = True) -> "Parameter":
        arr = np.array(data, dtype=DTYPE)
        return cls(
            name,
            Tensor(arr, requires_grad=trainable),
            np.zeros_like(arr),
            np.zeros_like(arr),
            np.zeros_like(arr),
            0,
            trainable,
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value.data)

    def accumulate(self, grads: Gradients) -> None:
        g = grads.get(self.value)
        if g is not None:
            self.grad = self.grad + g

    def assign(self, data) -> None:
        data = np.asarray(data, dtype=DTYPE)
        if data.shape != self.shape:
            raise ShapeMismatch(f"{self.name}: shape {data.shape}, expected {self.shape}")
        self.value = Tensor(data.copy(), requires_grad=self.trainable)


def adam_update(
    p: Parameter, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
) -> Parameter:
    """Bias-corrected Adam step. The gradient is left for the caller to zero."""
    g = p.grad
    p.step_count += 1
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * g
    p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * g * g
    m_hat = p.adam_m / (1.0 - beta1**p.step_count)
    v_hat = p.adam_v / (1.0 - beta2**p.step_count)
    p.value = Tensor(p.value.data - lr * m_hat / (np.sqrt(v_hat) + eps), requires_grad=p.trainable)
    return p


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=shape)


def lstm_init(rng: np.random.Generator, d_in: int, hidden: int) -> dict[str, np.ndarray]:
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget gate
    return {
        "W": glorot_uniform(rng, (d_in, 4 * hidden)),
        "U": glorot_uniform(rng, (hidden, 4 * hidden)),
        "b": b,
    }


# --------------------------------------------------------- gradient checking


def finite_diff_check(
    f: Callable[..., Tensor],
    x: "Tensor | Sequence[Tensor]",
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare :func:`backward` against central differences.

    ``f`` receives the tensors in ``x`` (positionally) and must return a
    scalar. The relative error of each input is
    ``|a - b| / max(|a|, |b|, 1e-8)`` with ``|.|`` the Euclidean norm over
    the checked coordinates; the maximum over inputs is returned.
    ``max_coords`` limits the check to a random subset of coordinates per
    input.
    """
    xs = [x] if isinstance(x, Tensor) else list(x)
    base = [np.array(t.data, dtype=DTYPE) for t in xs]

    def fresh(arrays):
        return [Tensor(a, requires_grad=True) for a in arrays]

    inputs = fresh(base)
    loss = f(*inputs)
    grads = backward(loss)
    worst = 0.0
    for k, arr in enumerate(base):
        analytic = grads.of(inputs[k]).reshape(-1)
        coords = np.arange(arr.size)
        if max_coords is not None and arr.size > max_coords:
            rng = rng or np.random.default_rng(0)
            coords = np.sort(rng.choice(arr.size, size=max_coords, replace=False))
        numeric = np.empty(len(coords))
        for n, ci in enumerate(coords):
            vals = []
            for sign in (1.0, -1.0):
                arrays = [a.copy() for a in base]
                arrays[k].reshape(-1)[ci] += sign * h
                vals.append(float(f(*fresh(arrays)).data.reshape(-1)[0]))
            numeric[n] = (vals[0] - vals[1]) / (2.0 * h)
        a = analytic[coords]
        denom = max(np.linalg.norm(a), np.linalg.norm(numeric), 1e-8)
        worst = max(worst, float(np.linalg.norm(a - numeric) / denom))
    return worst
