"""Reverse-mode automatic differentiation over dense float64 tensors.

A :class:`Tape` records every op whose inputs require gradients, in execution
order; :func:`backward` replays it in exact reverse order. Ops run eagerly on
numpy buffers, so with no active tape the same functions serve as a plain
inference path. All arithmetic is double precision; checkpoints downcast to
float32 on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    def __init__(self, op: str, got, expected):
        super().__init__(f"{op}: got shape {got}, expected {expected}")
        self.op = op
        self.got = got
        self.expected = expected


class NonScalarLoss(ValueError):
    pass


class Tensor:
    """A dense float64 array plus a gradient-tracking flag."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def tensor(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


@dataclass
class _Record:
    output: Tensor
    inputs: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tape:
    """Ordered op log; confined to a single thread for its lifetime."""

    def __init__(self):
        self.records: list[_Record] = []

    def __enter__(self) -> "Tape":
        global _ACTIVE
        self._prev = _ACTIVE
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = self._prev
        return False


_ACTIVE: Tape | None = None


def _emit(out_data: np.ndarray, inputs: tuple[Tensor, ...], backward) -> Tensor:
    tracked = any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=tracked)
    if tracked and _ACTIVE is not None:
        _ACTIVE.records.append(_Record(out, inputs, backward))
    return out


class GradientMap:
    """Gradients keyed by tensor identity; untouched leaves read as zeros."""

    def __init__(self, grads: dict[int, np.ndarray]):
        self._grads = grads

    def of(self, t: Tensor) -> np.ndarray:
        g = self._grads.get(id(t))
        return g if g is not None else np.zeros_like(t.data)

    def has(self, t: Tensor) -> bool:
        return id(t) in self._grads


def backward(tape: Tape, loss: Tensor) -> GradientMap:
    """Accumulate d(loss)/d(input) for every requires_grad tensor on the tape."""
    if loss.data.size != 1:
        raise NonScalarLoss(f"loss has shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for rec in reversed(tape.records):
        g_out = grads.get(id(rec.output))
        if g_out is None:
            continue
        for t, g in zip(rec.inputs, rec.backward(g_out)):
            if g is None or not t.requires_grad:
                continue
            acc = grads.get(id(t))
            grads[id(t)] = g if acc is None else acc + g
    return GradientMap(grads)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb:
        return
    if len(sa) > len(sb) and sa[len(sa) - len(sb):] == sb:
        return
    if len(sb) > len(sa) and sb[len(sb) - len(sa):] == sa:
        return
    raise ShapeMismatch(op, sb, f"{sa} or a suffix of it")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = len(g.shape) - len(shape)
    return g.sum(axis=tuple(range(extra)))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    return _emit(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("mul", a, b)
    ad, bd = a.data, b.data
    return _emit(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def scale(a: Tensor, c: float) -> Tensor:
    return _emit(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch("matmul", (a.shape, b.shape), "(m,k) @ (k,n)")
    ad, bd = a.data, b.data
    return _emit(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch("transpose", a.shape, "rank 2")
    return _emit(a.data.T.copy(), (a,), lambda g: (g.T,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def softmax(a: Tensor) -> Tensor:
    """Softmax along the last dimension (numerically stabilized)."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)
    return _emit(
        y, (a,), lambda g: (y * (g - (g * y).sum(axis=-1, keepdims=True)),)
    )


def layer_norm(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize the last dimension to zero mean, unit variance."""
    if a.shape[-1] < 1:
        raise ShapeMismatch("layer_norm", a.shape, "last dim >= 1")
    mu = a.data.mean(axis=-1, keepdims=True)
    d = a.data - mu
    sigma = np.sqrt((d * d).mean(axis=-1, keepdims=True) + eps)
    y = d / sigma

    def bwd(g):
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        return ((g - gm - y * gym) / sigma,)

    return _emit(y, (a,), bwd)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows ``table[ids]``; backward scatter-adds into the table."""
    idx = np.asarray(ids, dtype=np.intp)
    if table.data.ndim != 2:
        raise ShapeMismatch("embedding_lookup", table.shape, "rank 2 table")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeMismatch("embedding_lookup", (int(idx.min()), int(idx.max())),
                            f"ids within [0, {table.shape[0]})")

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _emit(table.data[idx], (table,), bwd)


def take_cells(a: Tensor, rows, cols) -> Tensor:
    """Pick ``a[rows[i], cols[i]]`` into a 1-D tensor."""
    r = np.asarray(rows, dtype=np.intp)
    c = np.asarray(cols, dtype=np.intp)
    if a.data.ndim != 2 or r.shape != c.shape:
        raise ShapeMismatch("take_cells", (a.shape, r.shape, c.shape),
                            "rank-2 input with aligned index vectors")

    def bwd(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (r, c), g)
        return (ga,)

    return _emit(a.data[r, c], (a,), bwd)


def concat(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate along the last dimension."""
    parts = tuple(parts)
    lead = parts[0].shape[:-1]
    for p in parts[1:]:
        if p.shape[:-1] != lead:
            raise ShapeMismatch("concat", p.shape, f"{lead} + (*,)")
    widths = [p.shape[-1] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=-1))

    return _emit(np.concatenate([p.data for p in parts], axis=-1), parts, bwd)


def vstack(parts: Iterable[Tensor]) -> Tensor:
    """Concatenate rank-2 tensors along the first dimension."""
    parts = tuple(parts)
    width = parts[0].shape[-1]
    for p in parts:
        if p.data.ndim != 2 or p.shape[-1] != width:
            raise ShapeMismatch("vstack", p.shape, f"(*, {width})")
    rows = [p.shape[0] for p in parts]
    splits = np.cumsum(rows)[:-1]

    def bwd(g):
        return tuple(np.split(g, splits, axis=0))

    return _emit(np.concatenate([p.data for p in parts], axis=0), parts, bwd)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    """Slice the last dimension to ``[start, stop)``."""
    if not (0 <= start < stop <= a.shape[-1]):
        raise ShapeMismatch("slice_last", (start, stop), f"within [0, {a.shape[-1]}]")

    def bwd(g):
        ga = np.zeros_like(a.data)
        ga[..., start:stop] = g
        return (ga,)

    return _emit(a.data[..., start:stop].copy(), (a,), bwd)


def dropout(a: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a caller-supplied mask (zeros and 1/(1-p) keep weights)."""
    if mask.shape != a.shape:
        raise ShapeMismatch("dropout", mask.shape, a.shape)
    return _emit(a.data * mask, (a,), lambda g: (g * mask,))


def make_dropout_mask(rng: np.random.Generator, shape, p: float) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 with probability p, else 1/(1-p)."""
    if p <= 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


def tsum(a: Tensor) -> Tensor:
    """Sum all elements into a scalar tensor."""
    return _emit(np.asarray(a.data.sum()), (a,), lambda g: (np.full_like(a.data, float(g)),))


@dataclass
class AdamState:
    """Adam optimizer state; moment buffers are keyed by parameter name."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    moments: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray],
              state: AdamState) -> None:
    """One bias-corrected Adam update, in place.

    Only parameters named in ``grads`` are touched, so parameters that did
    not participate in a step stay bit-identical.
    """
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name in sorted(grads):
        p = params[name]
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch("adam_step", g.shape, p.shape)
        m, v = state.moments.get(name, (np.zeros_like(p.data), np.zeros_like(p.data)))
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.moments[name] = (m, v)
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if total > max_norm and total > 0.0:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total
