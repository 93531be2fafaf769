"""Reverse-mode automatic differentiation over dense numpy arrays.

A Tensor is a node in an implicit computation tape: it holds its value, the
parent nodes it was computed from, and a vector-Jacobian-product closure that
maps the gradient at this node to gradients at the parents. Calling
``backward()`` on a scalar node walks the tape in reverse topological order
and accumulates gradients into every reachable trainable Parameter.

Frozen parameters (``trainable=False``) are invisible to the tape: ops that
consume only frozen/constant inputs record nothing, so a frozen network runs
at plain-numpy speed and its gradient slots are never touched.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from ..errors import ShapeError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (e.g. teacher forward passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Dense n-dimensional array node (row-major), optionally on the tape."""

    __slots__ = ("values", "requires_grad", "_parents", "_vjp", "grad")

    def __init__(self, values, parents=(), vjp=None, requires_grad=False):
        self.values = np.asarray(values)
        self._parents = parents
        self._vjp = vjp
        self.requires_grad = requires_grad
        self.grad = None

    # -- metadata ---------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- backward pass ------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(param) into every reachable trainable Parameter.

        ``self`` must be a scalar (size 1). Gradients add onto whatever is
        already in each parameter's ``grad`` slot; the optimizer zeroes them.
        """
        if self.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = self._toposort()
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.values)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if isinstance(node, Parameter):
                if node.trainable:
                    node.grad += g
                continue
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] += pg
                else:
                    grads[key] = pg

    def _toposort(self) -> list:
        """Reverse topological order of the tape reachable from self."""
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        order.reverse()
        return order

    # -- operator sugar (full op set lives in ops.py) -----------------------

    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __rtruediv__(self, other):
        from . import ops

        return ops.div(other, self)

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __getitem__(self, index):
        from . import ops

        return ops.take(self, index)


class Parameter(Tensor):
    """Leaf tensor with a persistent gradient slot and a velocity buffer.

    ``grad`` and ``velocity`` always share the parameter's shape and dtype.
    A non-trainable (frozen) parameter never receives gradients and is
    skipped by the optimizer.
    """

    __slots__ = ("velocity", "trainable", "name")

    def __init__(self, values: np.ndarray, name: str = "", trainable: bool = True):
        values = np.asarray(values)
        super().__init__(values, requires_grad=trainable)
        self.grad = np.zeros_like(values)
        self.velocity = np.zeros_like(values)
        self.trainable = trainable
        self.name = name

    def set_trainable(self, flag: bool) -> None:
        self.trainable = flag
        self.requires_grad = flag

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, trainable={self.trainable})"


def as_tensor(x) -> Tensor:
    """Wrap plain arrays/scalars as constant Tensors; pass Tensors through."""
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))
