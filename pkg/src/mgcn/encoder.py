"""Node encoders (GPR propagation over an MLP, or a 2-layer GCN) and the softmax head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndiff as nd

PARAM_NAMES = ("enc.W1", "enc.b1", "enc.W2", "enc.b2", "enc.gamma", "head.Wc", "head.bc")


@dataclass(frozen=True)
class EncoderConfig:
    hidden_dim: int = 64
    K: int = 10
    ppr_alpha: float = 0.1
    dropout: float = 0.5
    backbone: str = "gpr"
    embed_dim: int | None = None  # width of H; None means the number of classes

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.embed_dim is not None and self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if not 0.0 < self.ppr_alpha < 1.0:
            raise ValueError("ppr_alpha must be in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.backbone not in ("gpr", "gcn2"):
            raise ValueError(f"unknown backbone {self.backbone!r}")

    def embedding_width(self, num_classes):
        return num_classes if self.embed_dim is None else self.embed_dim


class EncoderParams:
    """Named parameters of encoder + head, addressable as attributes."""

    def __init__(self, params):
        self._params = {p.name: p for p in params}

    def __getitem__(self, name):
        return self._params[name].value

    def __iter__(self):
        return iter(self._params.values())

    def parameters(self):
        return list(self._params.values())

    @property
    def W1(self):
        return self["enc.W1"]

    @property
    def b1(self):
        return self["enc.b1"]

    @property
    def W2(self):
        return self["enc.W2"]

    @property
    def b2(self):
        return self["enc.b2"]

    @property
    def gamma(self):
        return self["enc.gamma"]

    @property
    def Wc(self):
        return self["head.Wc"]

    @property
    def bc(self):
        return self["head.bc"]

    def snapshot(self):
        return {name: p.value.data.copy() for name, p in self._params.items()}

    def load(self, arrays):
        for name, arr in arrays.items():
            p = self._params[name]
            if p.value.data.shape != arr.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.value.data.shape}")
            p.value.data[...] = arr

    @classmethod
    def from_arrays(cls, arrays, backbone="gpr"):
        return cls([nd.parameter(name, arrays[name],
                                 trainable=not (name == "enc.gamma" and backbone == "gcn2"))
                    for name in PARAM_NAMES])


def ppr_gamma(K, alpha):
    g = alpha * (1.0 - alpha) ** np.arange(K + 1)
    g[-1] = (1.0 - alpha) ** K
    return g


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(D, d, C, K=10, ppr_alpha=0.1, seed=0, backbone="gpr", embed_dim=None):
    """Glorot-uniform weights, zero biases, PPR-shaped GPR weights.

    ``embed_dim`` is the width of H (defaults to ``d``).
    """
    e = d if embed_dim is None else embed_dim
    if min(D, d, C, e) < 1:
        raise ValueError(f"dimensions must be positive, got D={D}, d={d}, C={C}, e={e}")
    rng = np.random.default_rng(seed)
    arrays = {
        "enc.W1": _glorot(rng, D, d),
        "enc.b1": np.zeros((1, d)),
        "enc.W2": _glorot(rng, d, e),
        "enc.b2": np.zeros((1, e)),
        "enc.gamma": ppr_gamma(K, ppr_alpha).reshape(1, -1),
        "head.Wc": _glorot(rng, e, C),
        "head.bc": np.zeros((1, C)),
    }
    return EncoderParams.from_arrays(arrays, backbone)


def gpr_combine(gamma, props):
    """sum_k gamma[k] * props[k], differentiable in gamma and every prop."""
    g = gamma.data[0]
    if len(props) != len(g):
        raise ValueError(f"{len(props)} propagation steps but {len(g)} weights")
    out = g[0] * props[0].data
    for k in range(1, len(props)):
        out = out + g[k] * props[k].data

    def bw(grad):
        if gamma.requires_grad:
            gamma.grad += np.array([[(grad * p.data).sum() for p in props]])
        for k, p in enumerate(props):
            if p.requires_grad:
                p.grad += g[k] * grad

    return nd.make_op(out, (gamma, *props), bw)


def _as_tensor(x):
    return x if isinstance(x, nd.Tensor) else nd.constant(x)


def mlp(x, params, dropout=0.0, rng=None, training=False):
    x = nd.dropout(_as_tensor(x), dropout, rng, training)
    h = nd.relu(nd.add(nd.matmul(x, params.W1), params.b1))
    h = nd.dropout(h, dropout, rng, training)
    return nd.add(nd.matmul(h, params.W2), params.b2)


def encode(features, adj, params, dropout=0.0, rng=None, training=False):
    """GPR encoder: H = sum_k gamma_k * A^k * MLP(X), propagated iteratively."""
    x = _as_tensor(features)
    if x.shape[0] != adj.num_nodes:
        raise ValueError(f"{x.shape[0]} feature rows for {adj.num_nodes} nodes")
    if x.shape[1] != params.W1.shape[0]:
        raise ValueError(f"feature dim {x.shape[1]} != W1 rows {params.W1.shape[0]}")
    p = mlp(x, params, dropout, rng, training)
    props = [p]
    for _ in range(params.gamma.shape[1] - 1):
        p = nd.spmm(adj, p)
        props.append(p)
    return gpr_combine(params.gamma, props)


def gcn2_encode(features, adj, params, dropout=0.0, rng=None, training=False):
    """Two graph-convolution layers: A relu(A X W1 + b1) W2 + b2."""
    x = _as_tensor(features)
    if x.shape[0] != adj.num_nodes:
        raise ValueError(f"{x.shape[0]} feature rows for {adj.num_nodes} nodes")
    if x.shape[1] != params.W1.shape[0]:
        raise ValueError(f"feature dim {x.shape[1]} != W1 rows {params.W1.shape[0]}")
    x = nd.dropout(x, dropout, rng, training)
    h = nd.relu(nd.add(nd.spmm(adj, nd.matmul(x, params.W1)), params.b1))
    h = nd.dropout(h, dropout, rng, training)
    return nd.add(nd.spmm(adj, nd.matmul(h, params.W2)), params.b2)


def build_params(config, D, C, seed=0):
    return init_params(D, config.hidden_dim, C, config.K, config.ppr_alpha, seed,
                       config.backbone, config.embedding_width(C))


def run_encoder(config, features, adj, params, rng=None, training=False):
    fn = gcn2_encode if config.backbone == "gcn2" else encode
    return fn(features, adj, params, config.dropout, rng, training)


def classify(H, params):
    if H.shape[1] != params.Wc.shape[0]:
        raise ValueError(f"embedding dim {H.shape[1]} != Wc rows {params.Wc.shape[0]}")
    return nd.softmax_rows(nd.add(nd.matmul(H, params.Wc), params.bc))
