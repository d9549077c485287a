"""Minimal automatic differentiation: forward jets in t, reverse mode in parameters.

Two layers live here.

``Node`` is a reverse-mode tape entry.  Each node holds a float64 value (a
scalar or an ndarray; elementwise ops require matching shapes, there is no
broadcasting) plus links to its parents and the local vector-Jacobian rule
for each of them.  ``backward`` walks the graph once in reverse creation
order, which is a valid topological order and makes accumulation order (and
therefore every gradient bit) deterministic.

``Jet2`` carries ``(value, d/dt, d^2/dt^2)`` of an expression with respect
to a single scalar input.  Its components may be plain floats/arrays or
``Node`` objects, so the same network code runs both as a cheap numeric
forward pass and as a recorded graph whose scalar loss can be differentiated
in the parameters.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Node",
    "Jet2",
    "NonFiniteError",
    "NonFiniteGradient",
    "param",
    "const",
    "sin",
    "cos",
    "square",
    "affine",
    "total",
    "backward",
    "jet_eval",
    "jet_affine",
    "jet_sin",
    "jet_variable",
    "value_of",
]

_counter = itertools.count()


class NonFiniteError(FloatingPointError):
    """Raised when a forward value is NaN or infinite."""


class NonFiniteGradient(FloatingPointError):
    """Raised when a parameter gradient contains NaN or infinity."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"non-finite gradient for parameter {index}")


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Node:
    """A recorded value in the reverse-mode graph."""

    __slots__ = ("value", "parents", "vjps", "order", "is_param")
    __array_ufunc__ = None  # make ndarray (op) Node defer to the reflected method

    def __init__(self, value, parents: Sequence["Node"] = (), vjps: Sequence[Callable] = (),
                 is_param: bool = False):
        self.value = _as_array(value)
        self.parents = tuple(parents)
        self.vjps = tuple(vjps)
        self.order = next(_counter)
        self.is_param = is_param

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self) -> str:
        kind = "param" if self.is_param else "node"
        return f"Node<{kind} #{self.order} shape={self.value.shape}>"

    # arithmetic -----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return Node(-self.value, (self,), (lambda g: -g,))


def param(value) -> Node:
    """Create a parameter leaf."""
    return Node(np.array(value, dtype=np.float64), is_param=True)


def const(value) -> Node:
    return Node(value)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape and a.ndim and b.ndim:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape} (no broadcasting)")


def add(a, b):
    if not isinstance(a, Node) and not isinstance(b, Node):
        return a + b
    if not isinstance(a, Node):
        return Node(_as_array(a) + b.value, (b,), (lambda g: g,))
    if not isinstance(b, Node):
        return Node(a.value + _as_array(b), (a,), (lambda g: g,))
    _check_shapes(a.value, b.value)
    return Node(a.value + b.value, (a, b), (lambda g: g, lambda g: g))


def sub(a, b):
    if not isinstance(a, Node) and not isinstance(b, Node):
        return a - b
    if not isinstance(a, Node):
        return Node(_as_array(a) - b.value, (b,), (lambda g: -g,))
    if not isinstance(b, Node):
        return Node(a.value - _as_array(b), (a,), (lambda g: g,))
    _check_shapes(a.value, b.value)
    return Node(a.value - b.value, (a, b), (lambda g: g, lambda g: -g))


def mul(a, b):
    if not isinstance(a, Node) and not isinstance(b, Node):
        return a * b
    if not isinstance(a, Node):
        c = _as_array(a)
        if c.ndim and c.shape != b.value.shape:
            raise ValueError("constant factor must be scalar or match shape")
        return Node(c * b.value, (b,), (lambda g: g * c,))
    if not isinstance(b, Node):
        return mul(b, a)
    _check_shapes(a.value, b.value)
    av, bv = a.value, b.value
    return Node(av * bv, (a, b), (lambda g: g * bv, lambda g: g * av))


def sin(a):
    if not isinstance(a, Node):
        return np.sin(a)
    av = a.value
    return Node(np.sin(av), (a,), (lambda g: g * np.cos(av),))


def cos(a):
    if not isinstance(a, Node):
        return np.cos(a)
    av = a.value
    return Node(np.cos(av), (a,), (lambda g: -g * np.sin(av),))


def square(a):
    if not isinstance(a, Node):
        return a * a
    av = a.value
    return Node(av * av, (a,), (lambda g: 2.0 * g * av,))


def total(a):
    """Sum of all entries, as a scalar."""
    if not isinstance(a, Node):
        return float(np.sum(a))
    shape = a.value.shape
    return Node(np.sum(a.value), (a,), (lambda g: np.full(shape, g),))


def affine(z, W, b=None):
    """Batched affine map ``z @ W.T + b``.

    ``z`` is (batch, fan_in), ``W`` is (fan_out, fan_in), ``b`` is (fan_out,).
    The bias is added to every row; this is the only broadcast the tape
    supports.
    """
    zv = z.value if isinstance(z, Node) else _as_array(z)
    Wv = W.value if isinstance(W, Node) else _as_array(W)
    out = zv @ Wv.T
    if b is not None:
        out = out + (b.value if isinstance(b, Node) else _as_array(b))
    if not any(isinstance(x, Node) for x in (z, W, b)):
        return out
    parents, vjps = [], []
    if isinstance(z, Node):
        parents.append(z)
        vjps.append(lambda g: g @ Wv)
    if isinstance(W, Node):
        parents.append(W)
        vjps.append(lambda g: g.T @ zv)
    if isinstance(b, Node):
        parents.append(b)
        vjps.append(lambda g: g.sum(axis=0))
    return Node(out, parents, vjps)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else _as_array(x)


def backward(loss: Node, params: Sequence[Node]) -> list[np.ndarray]:
    """Gradient of scalar ``loss`` with respect to each of ``params``.

    Parameters that do not influence ``loss`` get a zero gradient.
    """
    if not isinstance(loss, Node):
        return [np.zeros_like(p.value) for p in params]
    if loss.value.size != 1:
        raise ValueError("backward needs a scalar loss")
    if not np.isfinite(loss.value).all():
        raise NonFiniteError(f"loss is not finite: {loss.value}")

    # collect reachable nodes
    seen: dict[int, Node] = {}
    stack = [loss]
    while stack:
        node = stack.pop()
        if node.order in seen:
            continue
        seen[node.order] = node
        stack.extend(node.parents)

    grads: dict[int, np.ndarray] = {loss.order: np.ones_like(loss.value)}
    for order in sorted(seen, reverse=True):
        node = seen[order]
        g = grads.get(order)
        if g is None or not node.parents:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contrib = vjp(g)
            if parent.order in grads:
                grads[parent.order] = grads[parent.order] + contrib
            else:
                grads[parent.order] = contrib
        if not node.is_param:
            del grads[order]

    out = []
    for i, p in enumerate(params):
        g = grads.get(p.order)
        g = np.zeros_like(p.value) if g is None else np.reshape(g, p.value.shape)
        if not np.isfinite(g).all():
            raise NonFiniteGradient(i)
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# second-order jets in a scalar input


@dataclass(frozen=True)
class Jet2:
    """Truncated Taylor triple ``(v, d1, d2)`` with respect to a scalar input."""

    v: object
    d1: object
    d2: object

    @staticmethod
    def _lift(x) -> "Jet2":
        if isinstance(x, Jet2):
            return x
        zero = 0.0 if np.ndim(value_of(x)) == 0 else np.zeros_like(value_of(x))
        return Jet2(x, zero, zero)

    def __add__(self, other):
        o = Jet2._lift(other)
        return Jet2(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, other):
        o = Jet2._lift(other)
        return Jet2(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        return Jet2._lift(other) - self

    def __neg__(self):
        return Jet2(-self.v, -self.d1, -self.d2)

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(mul(other, self.v), mul(other, self.d1), mul(other, self.d2))
        a, b = self, other
        return Jet2(
            mul(a.v, b.v),
            mul(a.v, b.d1) + mul(a.d1, b.v),
            mul(a.v, b.d2) + 2.0 * mul(a.d1, b.d1) + mul(a.d2, b.v),
        )

    __rmul__ = __mul__

    def values(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return value_of(self.v), value_of(self.d1), value_of(self.d2)


def jet_variable(t) -> Jet2:
    """The identity jet ``t -> (t, 1, 0)``."""
    t = _as_array(t)
    return Jet2(t, np.ones_like(t), np.zeros_like(t))


def jet_sin(a: Jet2) -> Jet2:
    s, c = sin(a.v), cos(a.v)
    return Jet2(s, mul(c, a.d1), mul(c, a.d2) - mul(s, square(a.d1)))


def jet_affine(a: Jet2, W, b=None) -> Jet2:
    """Affine map applied to a batched jet; the bias only shifts the value."""
    return Jet2(affine(a.v, W, b), affine(a.d1, W), affine(a.d2, W))


def jet_eval(fn: Callable[[Jet2], Jet2], t) -> Jet2:
    """Evaluate ``fn`` on the identity jet at ``t`` and check finiteness."""
    out = fn(jet_variable(t))
    for comp in out.values():
        if not np.isfinite(comp).all():
            raise NonFiniteError(f"non-finite jet component at t={t}")
    return out
