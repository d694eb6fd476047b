"""Minimal dense-tensor reverse-mode automatic differentiation.

A ``DiffGraph`` records every primitive operation applied to its tensors
(a tape in topological order). ``DiffGraph.backward`` replays the tape in
reverse, accumulating vector-Jacobian products, and returns the gradient
of a scalar loss with respect to every leaf marked ``requires_grad``
(parameters, and inputs when input gradients are needed).

Graphs are ephemeral: one forward pass, one backward pass. Tensors are
confined to the thread that owns their graph. Computation is float64 by
default; float32 is accepted for training runs where finite-difference
fidelity is not being checked.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    GraphConsumedError,
    NumericError,
    ShapeMismatchError,
)

Array = np.ndarray


class Tensor:
    """A dense array bound to one DiffGraph.

    ``data`` is row-major; ``shape`` mirrors ``data.shape``. Leaves may be
    marked differentiable; interior tensors are produced by the primitive
    ops below and carry backward closures on the graph's tape.
    """

    __slots__ = ("data", "graph", "requires_grad", "name")

    def __init__(self, data: Array, graph: "DiffGraph", requires_grad: bool = False,
                 name: str | None = None):
        self.data = data
        self.graph = graph
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        tag = f" '{self.name}'" if self.name else ""
        return f"Tensor{tag}(shape={self.shape})"


class _Node:
    """One recorded primitive: output plus (parent, vjp) pairs."""

    __slots__ = ("op", "out", "parents", "vjps")

    def __init__(self, op: str, out: Tensor, parents: tuple[Tensor, ...],
                 vjps: tuple[Callable[[Array], Array], ...]):
        self.op = op
        self.out = out
        self.parents = parents
        self.vjps = vjps


class DiffGraph:
    """Tape of primitive operations for a single forward/backward pass."""

    def __init__(self, dtype=np.float64, check_finite: bool = True):
        self.dtype = np.dtype(dtype)
        self.check_finite = check_finite
        self._tape: list[_Node] = []
        self._leaves: list[Tensor] = []
        self._consumed = False

    def leaf(self, data, requires_grad: bool = False, name: str | None = None) -> Tensor:
        """Register a leaf (parameter or input) on this graph."""
        self._ensure_live("leaf")
        arr = np.ascontiguousarray(data, dtype=self.dtype)
        t = Tensor(arr, self, requires_grad=requires_grad, name=name)
        self._leaves.append(t)
        return t

    def _ensure_live(self, op: str) -> None:
        if self._consumed:
            raise GraphConsumedError(
                f"cannot run '{op}': this graph was already consumed by backward()")

    def _record(self, op: str, out_data: Array, parents: Sequence[Tensor],
                vjps: Sequence[Callable[[Array], Array]]) -> Tensor:
        self._ensure_live(op)
        if self.check_finite and not np.all(np.isfinite(out_data)):
            raise NumericError(f"non-finite values produced by op '{op}'")
        out = Tensor(np.asarray(out_data, dtype=self.dtype), self)
        self._tape.append(_Node(op, out, tuple(parents), tuple(vjps)))
        return out

    def backward(self, loss: Tensor) -> dict[Tensor, Array]:
        """Gradient of a scalar ``loss`` w.r.t. every differentiable leaf.

        Consumes the graph: a second call raises GraphConsumedError.
        Leaves not reachable from the loss get zero gradients.
        """
        self._ensure_live("backward")
        if loss.graph is not self:
            raise ShapeMismatchError("loss tensor does not belong to this graph")
        if loss.shape not in ((), (1,)):
            raise ShapeMismatchError(
                f"backward requires a scalar loss, got shape {loss.shape}")
        self._consumed = True

        grads: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        tensors: dict[int, Tensor] = {id(loss): loss}
        for node in reversed(self._tape):
            g_out = grads.pop(id(node.out), None)
            tensors.pop(id(node.out), None)
            if g_out is None:
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                g = vjp(g_out)
                if g.shape != parent.shape:
                    raise ShapeMismatchError(
                        f"vjp of '{node.op}' produced shape {g.shape} for parent "
                        f"of shape {parent.shape}")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                    tensors[key] = parent

        out: dict[Tensor, Array] = {}
        for leaf in self._leaves:
            if not leaf.requires_grad:
                continue
            g = grads.get(id(leaf))
            if g is None:
                g = np.zeros_like(leaf.data)
            elif self.check_finite and not np.all(np.isfinite(g)):
                raise NumericError(
                    f"non-finite gradient for leaf '{leaf.name or '?'}'")
            out[leaf] = g
        return out


def _same_graph(op: str, tensors: Iterable[Tensor]) -> DiffGraph:
    graphs = {t.graph for t in tensors}
    if len(graphs) != 1:
        raise ShapeMismatchError(f"'{op}' received tensors from different graphs")
    return next(iter(graphs))


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    g = _same_graph("matmul", (a, b))
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"matmul on incompatible shapes {a.shape} and {b.shape}")
    out = a.data @ b.data
    return g._record(
        "matmul", out, (a, b),
        (lambda go, bd=b.data: go @ bd.T,
         lambda go, ad=a.data: ad.T @ go))


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; ``b`` may be a vector broadcast over the rows of 2-D ``a``."""
    g = _same_graph("add", (a, b))
    if a.shape == b.shape:
        return g._record("add", a.data + b.data, (a, b),
                         (lambda go: go, lambda go: go))
    if a.data.ndim == 2 and b.shape == (a.shape[1],):
        return g._record("add", a.data + b.data, (a, b),
                         (lambda go: go, lambda go: go.sum(axis=0)))
    raise ShapeMismatchError(f"add on incompatible shapes {a.shape} and {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    g = _same_graph("sub", (a, b))
    if a.shape != b.shape:
        raise ShapeMismatchError(f"sub on incompatible shapes {a.shape} and {b.shape}")
    return g._record("sub", a.data - b.data, (a, b),
                     (lambda go: go, lambda go: -go))


def mul(a: Tensor, b: Tensor) -> Tensor:
    g = _same_graph("mul", (a, b))
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mul on incompatible shapes {a.shape} and {b.shape}")
    return g._record("mul", a.data * b.data, (a, b),
                     (lambda go, bd=b.data: go * bd,
                      lambda go, ad=a.data: go * ad))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return a.graph._record("scale", a.data * c, (a,), (lambda go: go * c,))


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return a.graph._record("relu", np.where(mask, a.data, 0.0), (a,),
                           (lambda go, m=mask: go * m,))


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatchError(f"transpose expects a matrix, got shape {a.shape}")
    return a.graph._record("transpose", a.data.T.copy(), (a,),
                           (lambda go: go.T.copy(),))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(parts)
    g = _same_graph("concat", parts)
    ndim = parts[0].data.ndim
    for p in parts:
        if p.data.ndim != ndim:
            raise ShapeMismatchError(
                f"concat on mixed ranks {[q.shape for q in parts]}")
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i: int):
        lo, hi = offsets[i], offsets[i + 1]
        def vjp(go: Array) -> Array:
            sl = [slice(None)] * ndim
            sl[axis] = slice(lo, hi)
            return np.ascontiguousarray(go[tuple(sl)])
        return vjp

    return g._record("concat", out, tuple(parts),
                     tuple(make_vjp(i) for i in range(len(parts))))


def masked_sum(v: Tensor, mask) -> Tensor:
    """Sum of the entries of 1-D ``v`` selected by a binary ``mask``."""
    m = np.asarray(mask, dtype=v.graph.dtype)
    if v.data.ndim != 1 or m.shape != v.shape:
        raise ShapeMismatchError(
            f"masked_sum on shapes {v.shape} and {m.shape}")
    out = np.asarray((v.data * m).sum())
    return v.graph._record("masked_sum", out, (v,), (lambda go: go * m,))


def l2_normalize(v: Tensor, eps: float = 0.0) -> Tensor:
    """Scale ``v`` (or each row of a matrix) to unit Euclidean norm.

    With ``eps == 0`` a zero-norm input raises DegenerateInputError; with
    ``eps > 0`` the norm is floored at ``eps`` instead.
    """
    g = v.graph
    if v.data.ndim == 1:
        raw = float(np.linalg.norm(v.data))
        if eps <= 0.0 and raw == 0.0:
            raise DegenerateInputError("l2_normalize of a zero-norm vector")
        n = max(raw, eps)
        z = v.data / n
        floored = raw < n

        def vjp(go: Array) -> Array:
            if floored:
                return go / n
            return (go - z * float(z @ go)) / n

        return g._record("l2_normalize", z, (v,), (vjp,))
    if v.data.ndim == 2:
        raw = np.linalg.norm(v.data, axis=1, keepdims=True)
        if eps <= 0.0:
            if np.any(raw == 0.0):
                rows = np.flatnonzero(raw[:, 0] == 0.0)
                raise DegenerateInputError(
                    f"l2_normalize of zero-norm rows {rows.tolist()}")
            n = raw
        else:
            n = np.maximum(raw, eps)
        z = v.data / n
        floored = n > raw  # rows where the eps floor is active

        def vjp(go: Array) -> Array:
            proj = go - z * np.sum(z * go, axis=1, keepdims=True)
            return np.where(floored, go, proj) / n

        return g._record("l2_normalize", z, (v,), (vjp,))
    raise ShapeMismatchError(f"l2_normalize expects 1-D or 2-D, got {v.shape}")


def log_softmax(v: Tensor) -> Tensor:
    """Row-wise log-softmax (whole vector for 1-D input), max-shifted for stability."""
    if v.data.ndim not in (1, 2):
        raise ShapeMismatchError(f"log_softmax expects 1-D or 2-D, got {v.shape}")
    axis = v.data.ndim - 1
    shifted = v.data - v.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    sm = np.exp(out)

    def vjp(go: Array) -> Array:
        return go - sm * go.sum(axis=axis, keepdims=True)

    return v.graph._record("log_softmax", out, (v,), (vjp,))


def pick(t: Tensor, indices) -> Tensor:
    """Gather one entry per row: ``out[n] = t[n, indices[n]]``."""
    idx = np.asarray(indices, dtype=np.int64)
    if t.data.ndim != 2 or idx.shape != (t.shape[0],):
        raise ShapeMismatchError(
            f"pick on shapes {t.shape} and {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= t.shape[1]):
        raise ShapeMismatchError(
            f"pick index out of range for {t.shape[1]} columns")
    rows = np.arange(t.shape[0])
    out = t.data[rows, idx]

    def vjp(go: Array) -> Array:
        g = np.zeros_like(t.data)
        g[rows, idx] = go
        return g

    return t.graph._record("pick", out, (t,), (vjp,))


def sum_all(t: Tensor) -> Tensor:
    return t.graph._record("sum_all", np.asarray(t.data.sum()), (t,),
                           (lambda go: np.broadcast_to(go, t.shape).astype(
                               t.graph.dtype, copy=True),))


def mean_all(t: Tensor) -> Tensor:
    n = t.data.size
    return t.graph._record("mean_all", np.asarray(t.data.mean()), (t,),
                           (lambda go: np.broadcast_to(go / n, t.shape).astype(
                               t.graph.dtype, copy=True),))
