"""Small reverse-mode autodiff kernel over dense float64 matrices, plus Adam.

Every value is 2-D. Operations build a DAG of ``Tensor`` nodes; ``backward``
walks it once in reverse topological order and accumulates into ``.grad``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

EPS_LOG = 1e-12
EPS_NORM = 1e-12


class Tensor:
    """A differentiable dense matrix (the DiffValue of the design)."""

    __slots__ = ("data", "_grad", "requires_grad", "_parents", "_backward", "_done")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 0:
            data = data.reshape(1, 1)
        elif data.ndim == 1:
            data = data.reshape(1, -1)
        elif data.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self._grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self._done = False

    @property
    def grad(self):
        # allocated on first use; constants never pay for a buffer
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        self._grad = value

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.size != 1:
            raise ValueError("item() needs a 1x1 tensor")
        return float(self.data[0, 0])

    def zero_grad(self):
        self._grad = None
        self._done = False

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar, kept minimal
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __mul__(self, c):
        return scale(self, c)

    __rmul__ = __mul__


def constant(data):
    return Tensor(data, requires_grad=False)


def make_op(data, parents, backward_fn):
    """Create an op node. ``backward_fn(grad_out)`` accumulates into parents."""
    parents = tuple(parents)
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=parents if req else (),
                  _backward=backward_fn if req else None)


def _topo_order(root):
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
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Populate ``.grad`` on every ancestor of a scalar ``loss``."""
    if loss.data.shape != (1, 1):
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._done:
        raise RuntimeError("backward already ran on this graph; call zero_grad() first")
    order = _topo_order(loss)
    for node in order:
        if node._parents:
            node._grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
    loss._done = True


# ---------------------------------------------------------------- core ops

def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            a.grad += g @ b.data.T
        if b.requires_grad:
            b.grad += a.data.T @ g

    return make_op(a.data @ b.data, (a, b), bw)


def transpose(a):
    def bw(g):
        a.grad += g.T

    return make_op(a.data.T.copy(), (a,), bw)


def spmm(adj, x):
    """Sparse (CSR, symmetric) times dense. Backward reuses ``adj`` as its own transpose."""
    if adj.num_nodes != x.shape[0]:
        raise ValueError(f"spmm dimension mismatch: {adj.num_nodes} vs {x.shape[0]} rows")

    def bw(g):
        if x.requires_grad:
            x.grad += adj.dot(g)

    return make_op(adj.dot(x.data), (x,), bw)


def add(a, b):
    """Elementwise sum; ``b`` may be a 1 x d bias row broadcast over ``a``'s rows."""
    if a.shape == b.shape:
        row = False
    elif b.shape[0] == 1 and b.shape[1] == a.shape[1]:
        row = True
    else:
        raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")

    def bw(g):
        if a.requires_grad:
            a.grad += g
        if b.requires_grad:
            b.grad += g.sum(axis=0, keepdims=True) if row else g

    return make_op(a.data + b.data, (a, b), bw)


def scale(a, c):
    c = float(c)

    def bw(g):
        a.grad += c * g

    return make_op(c * a.data, (a,), bw)


def mul(a, b):
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")

    def bw(g):
        if a.requires_grad:
            a.grad += g * b.data
        if b.requires_grad:
            b.grad += g * a.data

    return make_op(a.data * b.data, (a, b), bw)


def total(a):
    """Sum of all entries as a 1x1 tensor."""
    def bw(g):
        a.grad += g[0, 0]

    return make_op(a.data.sum(), (a,), bw)


def relu(a):
    mask = a.data > 0

    def bw(g):
        a.grad += g * mask

    return make_op(np.where(mask, a.data, 0.0), (a,), bw)


def dropout(a, rate, rng=None, training=True):
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    keep = rng.random(a.shape) >= rate
    keep = keep * (1.0 / (1.0 - rate))

    def bw(g):
        a.grad += g * keep

    return make_op(a.data * keep, (a,), bw)


def take_rows(a, idx):
    idx = np.asarray(idx, dtype=np.int64)

    def bw(g):
        np.add.at(a.grad, idx, g)

    return make_op(a.data[idx], (a,), bw)


def grad_scale(a, factor):
    """Identity forward, gradient multiplied by ``factor`` on the way back."""
    factor = float(factor)

    def bw(g):
        a.grad += factor * g

    return make_op(a.data.copy(), (a,), bw)


def row_l2_normalize(a, eps=EPS_NORM):
    norms = np.sqrt((a.data ** 2).sum(axis=1, keepdims=True))
    denom = np.maximum(norms, eps)
    out = a.data / denom
    clipped = norms <= eps

    def bw(g):
        # d(x/|x|) = (g - y <y, g>) / |x|; below eps the denominator is constant
        proj = (g * out).sum(axis=1, keepdims=True)
        ga = np.where(clipped, g / denom, (g - out * proj) / denom)
        a.grad += ga

    return make_op(out, (a,), bw)


def softmax_rows(a):
    z = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        a.grad += p * (g - (g * p).sum(axis=1, keepdims=True))

    return make_op(p, (a,), bw)


def cross_entropy(pred, target, eps=EPS_LOG):
    """Mean over rows of -sum_c target * log(pred + eps). Soft targets allowed."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"cross_entropy shape mismatch: {pred.shape} vs {target.shape}")
    n = pred.shape[0]
    shifted = pred.data + eps
    value = -(target * np.log(shifted)).sum() / n

    def bw(g):
        pred.grad += g[0, 0] * (-target / shifted / n)

    return make_op(value, (pred,), bw)


# ---------------------------------------------------------- params & Adam

@dataclass
class Parameter:
    name: str
    value: Tensor
    trainable: bool = True


def parameter(name, data, trainable=True):
    return Parameter(name, Tensor(np.array(data, dtype=np.float64), requires_grad=trainable),
                     trainable)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state, lr, weight_decay=0.0):
    """One Adam update with L2 decay folded into the gradient; zeroes grads."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p in params:
        if not p.trainable:
            continue
        w = p.value
        g = w.grad + weight_decay * w.data if weight_decay else w.grad
        if p.name not in state.m:
            state.m[p.name] = np.zeros_like(w.data)
            state.v[p.name] = np.zeros_like(w.data)
        m = state.m[p.name]
        v = state.v[p.name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        w.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
        w.zero_grad()


def zero_grads(params):
    for p in params:
        p.value.zero_grad()


# ------------------------------------------------------ gradient checking

def finite_diff_check(loss_fn, params, eps=1e-4):
    """Max relative error between backprop and central differences.

    ``loss_fn()`` must rebuild the graph from the current parameter values and
    return a scalar tensor; it has to be deterministic (no dropout).
    """
    params = [p for p in params if p.trainable]
    zero_grads(params)
    loss = loss_fn()
    backward(loss)
    analytic = [p.value.grad.copy() for p in params]
    zero_grads(params)

    worst = 0.0
    for p, ga in zip(params, analytic):
        data = p.value.data
        for idx in np.ndindex(data.shape):
            orig = data[idx]
            data[idx] = orig + eps
            f_plus = loss_fn().item()
            data[idx] = orig - eps
            f_minus = loss_fn().item()
            data[idx] = orig
            num = (f_plus - f_minus) / (2.0 * eps)
            ana = ga[idx]
            denom = max(abs(ana), abs(num), 1e-8)
            worst = max(worst, float(abs(ana - num) / denom))
    return worst


# ----------------------------------------------------------- checkpoints

def save_checkpoint(params, path):
    payload = {p.name: {"shape": list(p.value.shape),
                        "values": p.value.data.ravel().tolist()} for p in params}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Return ``{name: ndarray}``; floats round-trip exactly through json's repr."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return {name: np.array(rec["values"], dtype=np.float64).reshape(rec["shape"])
            for name, rec in payload.items()}
