"""Reverse-mode autodiff over numpy arrays.

Each op returns a :class:`Tensor` that remembers its parents and a closure
that pushes the output gradient back to them. ``Tensor.backward`` walks the
recorded graph in reverse topological order and then releases it, so a second
call without a fresh forward pass raises.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class GraphError(RuntimeError):
    """Raised when backward is requested on a tensor with no recorded forward pass."""


class Tensor:
    """Dense array with an optional gradient slot.

    Parameters
    ----------
    data : array_like
        Values. Stored as a numpy array; float inputs keep their dtype.
    requires_grad : bool
        Whether ``grad`` should be populated during ``backward``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.asarray(data)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, dtype={self.dtype})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Populate ``grad`` on every tensor that requires it and feeds this scalar."""
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        if self._backward is None:
            raise GraphError("backward without forward: no recorded computation")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad and not node._parents:
                node._accumulate(g)
            if node._backward is not None:
                for parent, pg in zip(node._parents, node._backward(g)):
                    if pg is None:
                        continue
                    if id(parent) in grads:
                        grads[id(parent)] = grads[id(parent)] + pg
                    else:
                        grads[id(parent)] = pg

        # free the tape
        for node in order:
            node._parents = ()
            node._backward = None


def needs_grad(tensors: Iterable[Tensor]) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


def make_op(
    out: np.ndarray,
    parents: Sequence[Tensor],
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
) -> Tensor:
    """Wrap ``out`` as a graph node when any parent participates in autodiff."""
    t = Tensor(out)
    if needs_grad(parents):
        t._parents = tuple(parents)
        t._backward = backward
    return t


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)
