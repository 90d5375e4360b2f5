"""Reverse-mode automatic differentiation over dense float64 arrays.

A `Tensor` wraps a numpy array and remembers how it was produced; calling
`backward()` on a scalar result walks the recorded graph in reverse
topological order and accumulates vector-Jacobian products into every
reachable leaf. Leaves that require gradients (notably `Param`) keep the
accumulated gradient in `.grad`; repeated backward calls without zeroing
add up.

The op set is deliberately small: exactly the matrix, elementwise,
gather/scatter and gamma-function primitives the model needs, with
broadcasting restricted to the rank-2 / rank-1 combinations numpy allows.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from . import special
from .errors import ContractError, ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Optional[Callable[[np.ndarray], tuple]] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return tensor_sum(self, axis=axis, keepdims=keepdims) * (1.0 / count)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable gradient leaf."""
        if self.data.size != 1:
            raise ContractError(
                f"backward requires a scalar, got shape {self.data.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited or not node.requires_grad:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))

        adjoint: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = adjoint.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad = node.grad + g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = adjoint.get(id(parent))
                adjoint[id(parent)] = pg if acc is None else acc + pg

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, float(exponent))

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Param(Tensor):
    """Trainable leaf: gradient buffer always allocated, zeroed on demand."""

    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)
        if not np.all(np.isfinite(self.data)):
            raise ContractError("parameter initialized with non-finite values")
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ----------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data
    return _make(
        data,
        (a, b),
        lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)),
    )


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data
    return _make(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    data = a.data / b.data
    return _make(
        data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        ),
    )


def power(a: Tensor, exponent: float) -> Tensor:
    data = a.data**exponent
    return _make(
        data, (a,), lambda g: (g * exponent * a.data ** (exponent - 1.0),)
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if b.ndim != 2 or a.ndim not in (1, 2):
        raise ShapeError(
            f"matmul supports (n,k)@(k,m) or (k,)@(k,m), got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}"
        )
    data = a.data @ b.data

    def vjp(g: np.ndarray):
        if a.ndim == 1:
            return g @ b.data.T, np.outer(a.data, g)
        return g @ b.data.T, a.data.T @ g

    return _make(data, (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.data.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g: np.ndarray):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(data, (a,), vjp)


# -- elementwise nonlinearities -------------------------------------------


def relu(a: Tensor) -> Tensor:
    data = np.maximum(a.data, 0.0)
    return _make(data, (a,), lambda g: (g * (a.data > 0.0),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(a: Tensor) -> Tensor:
    data = np.logaddexp(0.0, a.data)
    return _make(data, (a,), lambda g: (g * _sigmoid(a.data),))


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    return _make(data, (a,), lambda g: (g * data,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    data = np.sqrt(a.data)
    return _make(data, (a,), lambda g: (g * 0.5 / data,))


def clamp_min(a: Tensor, floor: float) -> Tensor:
    data = np.maximum(a.data, floor)
    return _make(data, (a,), lambda g: (g * (a.data > floor),))


def mask_fill(a: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where `mask` is true with a constant (no gradient there)."""
    mask = np.asarray(mask, dtype=bool)
    data = np.where(mask, value, a.data)
    return _make(data, (a,), lambda g: (g * ~mask,))


def digamma(a: Tensor) -> Tensor:
    data = special.digamma(a.data)
    return _make(
        np.asarray(data), (a,), lambda g: (g * special.trigamma(a.data),)
    )


def lgamma(a: Tensor) -> Tensor:
    data = special.lgamma(a.data)
    return _make(
        np.asarray(data), (a,), lambda g: (g * special.digamma(a.data),)
    )


# -- row gather / scatter ---------------------------------------------------


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """Select rows `a[index]`; backward scatter-adds into the source rows."""
    index = np.asarray(index, dtype=np.int64)
    data = a.data[index]

    def vjp(g: np.ndarray):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return (out,)

    return _make(data, (a,), vjp)


def segment_sum(a: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of `a` into `num_segments` buckets given per-row bucket ids."""
    segment_ids = np.asarray(segment_ids, dtype=np.int64)
    if segment_ids.shape[0] != a.data.shape[0]:
        raise ShapeError(
            f"segment ids length {segment_ids.shape[0]} != rows {a.data.shape[0]}"
        )
    data = np.zeros((num_segments,) + a.data.shape[1:], dtype=np.float64)
    np.add.at(data, segment_ids, a.data)
    return _make(data, (a,), lambda g: (g[segment_ids],))


# -- composites -------------------------------------------------------------


def row_l2_normalize(a: Tensor, eps: float = 1e-12) -> Tensor:
    """Divide each row by max(||row||_2, eps); zero rows pass through."""
    if a.ndim != 2:
        raise ShapeError(f"row_l2_normalize expects a matrix, got {a.data.shape}")
    # max(||r||, eps) == sqrt(max(||r||^2, eps^2)), which keeps sqrt away from 0
    sq = tensor_sum(mul(a, a), axis=1, keepdims=True)
    return div(a, sqrt(clamp_min(sq, eps * eps)))


# -- gradient checking -------------------------------------------------------


def finite_difference_gradient(
    f: Callable[[], Tensor], leaf: Tensor, step: float = 1e-5
) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. one leaf, in place."""
    fd = np.zeros_like(leaf.data)
    flat_value = leaf.data.reshape(-1)
    flat_fd = fd.reshape(-1)
    for i in range(flat_value.size):
        orig = flat_value[i]
        flat_value[i] = orig + step
        f_plus = float(f().data)
        flat_value[i] = orig - step
        f_minus = float(f().data)
        flat_value[i] = orig
        flat_fd[i] = (f_plus - f_minus) / (2.0 * step)
    return fd


def gradcheck(
    f: Callable[[], Tensor],
    leaves: Iterable[Tensor],
    step: float = 1e-5,
    floor: float = 1e-3,
) -> float:
    """Max relative error between analytic and finite-difference gradients.

    The error denominator is max(|analytic|, |numeric|, floor) so that
    near-zero coordinates are judged on an absolute scale instead of
    amplifying finite-difference noise.
    """
    leaves = list(leaves)
    for leaf in leaves:
        leaf.grad = np.zeros_like(leaf.data)
    f().backward()
    worst = 0.0
    for leaf in leaves:
        analytic = leaf.grad.copy()
        numeric = finite_difference_gradient(f, leaf, step=step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst
