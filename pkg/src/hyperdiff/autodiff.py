"""Reverse-mode automatic differentiation on a dynamic tape.

Ops evaluate eagerly in float64 numpy and record a `Node` per result. The
supported op set is the minimal closure needed for functional MLPs, the
diffusion loss, and weight-vector plumbing: matmul, add, mul, relu, concat,
sum, mean, square, scale, gather_rows, reshape, slice.

`backward(root)` walks the tape once in reverse topological order and returns
gradients for every trainable leaf reachable from `root`.
"""

import numpy as np

__all__ = [
    "Node", "leaf", "constant", "matmul", "add", "mul", "relu", "concat",
    "sum_", "mean_", "square", "scale", "gather_rows", "reshape", "slice_",
    "forward", "backward",
]


class ShapeMismatch(ValueError):
    pass


class NonFiniteValue(FloatingPointError):
    pass


class Node:
    """One tape entry: cached value plus the local backward rule."""

    __slots__ = ("value", "parents", "grad_fn", "requires_grad", "op")

    def __init__(self, value, parents=(), grad_fn=None, requires_grad=False, op="leaf"):
        self.value = value
        self.parents = parents
        self.grad_fn = grad_fn
        self.requires_grad = requires_grad
        self.op = op

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape}, grad={self.requires_grad})"


def leaf(value, trainable=False, op="leaf"):
    value = np.asarray(value, dtype=np.float64)
    return Node(value, requires_grad=trainable, op=op)


def constant(value):
    return leaf(value, trainable=False, op="const")


def _node(value, parents, grad_fn, op):
    needs = any(p.requires_grad for p in parents)
    return Node(np.asarray(value), parents, grad_fn if needs else None, needs, op)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


def matmul(a: Node, b: Node) -> Node:
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeMismatch(f"matmul: {a.value.shape} @ {b.value.shape}")
    out = a.value @ b.value

    def grad_fn(g):
        return (g @ b.value.T if a.requires_grad else None,
                a.value.T @ g if b.requires_grad else None)

    return _node(out, (a, b), grad_fn, "matmul")


def add(a: Node, b: Node) -> Node:
    try:
        out = a.value + b.value
    except ValueError as exc:
        raise ShapeMismatch(f"add: {a.value.shape} + {b.value.shape}") from exc

    def grad_fn(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return _node(out, (a, b), grad_fn, "add")


def mul(a: Node, b: Node) -> Node:
    try:
        out = a.value * b.value
    except ValueError as exc:
        raise ShapeMismatch(f"mul: {a.value.shape} * {b.value.shape}") from exc

    def grad_fn(g):
        return (_unbroadcast(g * b.value, a.value.shape),
                _unbroadcast(g * a.value, b.value.shape))

    return _node(out, (a, b), grad_fn, "mul")


def relu(a: Node) -> Node:
    out = np.maximum(a.value, 0.0)

    def grad_fn(g):
        # subgradient at 0 is 0
        return (g * (a.value > 0.0),)

    return _node(out, (a,), grad_fn, "relu")


def concat(nodes, axis=-1) -> Node:
    values = [n.value for n in nodes]
    out = np.concatenate(values, axis=axis)
    sizes = [v.shape[axis] for v in values]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _node(out, tuple(nodes), grad_fn, "concat")


def sum_(a: Node) -> Node:
    out = np.asarray(a.value.sum())

    def grad_fn(g):
        return (np.broadcast_to(g, a.value.shape),)

    return _node(out, (a,), grad_fn, "sum")


def mean_(a: Node) -> Node:
    out = np.asarray(a.value.mean())
    inv = 1.0 / a.value.size

    def grad_fn(g):
        return (np.broadcast_to(g * inv, a.value.shape),)

    return _node(out, (a,), grad_fn, "mean")


def square(a: Node) -> Node:
    out = a.value * a.value

    def grad_fn(g):
        return (2.0 * a.value * g,)

    return _node(out, (a,), grad_fn, "square")


def scale(a: Node, c: float) -> Node:
    c = float(c)
    out = a.value * c

    def grad_fn(g):
        return (g * c,)

    return _node(out, (a,), grad_fn, "scale")


def gather_rows(a: Node, indices) -> Node:
    idx = np.asarray(indices, dtype=np.intp)
    out = a.value[idx]

    def grad_fn(g):
        full = np.zeros_like(a.value)
        np.add.at(full, idx, g)
        return (full,)

    return _node(out, (a,), grad_fn, "gather_rows")


def reshape(a: Node, shape) -> Node:
    out = a.value.reshape(shape)

    def grad_fn(g):
        return (g.reshape(a.value.shape),)

    return _node(out, (a,), grad_fn, "reshape")


def slice_(a: Node, start: int, stop: int) -> Node:
    """Contiguous slice along the first axis."""
    out = a.value[start:stop]

    def grad_fn(g):
        full = np.zeros_like(a.value)
        full[start:stop] = g
        return (full,)

    return _node(out, (a,), grad_fn, "slice")


def _toposort(root: Node):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def forward(root: Node) -> np.ndarray:
    """Value at the root; verifies every cached intermediate is finite."""
    for node in _toposort(root):
        if not np.all(np.isfinite(node.value)):
            raise NonFiniteValue(f"non-finite value in op '{node.op}'")
    return root.value


def backward(root: Node) -> dict:
    """Gradients of the scalar `root` w.r.t. every trainable leaf.

    Returns a dict keyed by leaf Node. Non-trainable leaves get no entry.
    """
    if np.asarray(root.value).size != 1:
        raise ShapeMismatch(f"backward: root must be scalar, got shape {root.value.shape}")
    order = _toposort(root)
    grads = {id(root): np.ones_like(np.asarray(root.value))}
    out = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None or not node.requires_grad:
            continue
        if node.grad_fn is None:
            out[node] = g  # trainable leaf
            continue
        for parent, pg in zip(node.parents, node.grad_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = grads.get(id(parent))
            grads[id(parent)] = pg if acc is None else acc + pg
    return out
