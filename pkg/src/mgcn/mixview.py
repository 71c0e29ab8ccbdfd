"""Interpolation-perturbed views of node embeddings and their labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndiff as nd


@dataclass(frozen=True)
class MixedView:
    view_id: int
    permutation: np.ndarray
    h_mixed: nd.Tensor
    y_mixed: np.ndarray | None
    rate: float


def sample_block_permutation(splits, rng):
    """Shuffle train nodes among themselves and all other nodes among themselves."""
    n = splits.num_nodes
    train = np.asarray(splits.train, dtype=np.int64)
    rest = np.setdiff1d(np.arange(n), train)
    perm = np.empty(n, dtype=np.int64)
    perm[train] = train[rng.permutation(len(train))]
    perm[rest] = rest[rng.permutation(len(rest))]
    return perm


def _check_rate(lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"interpolation rate must be in [0, 1], got {lam}")


def mix_embeddings(H, perm, lam):
    """Row i of the result is ``lam * H[i] + (1 - lam) * H[perm[i]]``."""
    _check_rate(lam)
    perm = np.asarray(perm, dtype=np.int64)
    if len(perm) != H.shape[0]:
        raise ValueError(f"permutation has length {len(perm)}, H has {H.shape[0]} rows")
    if lam == 1.0:
        out = H.data.copy()
    else:
        out = lam * H.data + (1.0 - lam) * H.data[perm]

    def bw(g):
        H.grad += lam * g
        if lam != 1.0:
            # perm is a bijection, so fancy-index accumulation has no collisions
            H.grad[perm] += (1.0 - lam) * g

    return nd.make_op(out, (H,), bw)


def mix_labels(y_train, perm, lam, splits):
    """Mix one-hot train labels (rows ordered like ``splits.train``) along ``perm``."""
    _check_rate(lam)
    train = np.asarray(splits.train, dtype=np.int64)
    y_train = np.asarray(y_train, dtype=np.float64)
    partners = np.asarray(perm, dtype=np.int64)[train]
    pos = np.searchsorted(train, partners)
    pos = np.minimum(pos, len(train) - 1)
    if not np.array_equal(train[pos], partners):
        raise ValueError("permutation sends a train node outside the train set")
    if lam == 1.0:
        return y_train.copy()
    return lam * y_train + (1.0 - lam) * y_train[pos]


def make_view(view_id, H, y_train, splits, lam, rng, with_labels=True):
    perm = sample_block_permutation(splits, rng)
    y = mix_labels(y_train, perm, lam, splits) if with_labels else None
    return MixedView(view_id, perm, mix_embeddings(H, perm, lam), y, lam)


def classification_loss(pred_train, y_mixed):
    """Cross-entropy of view predictions on train rows against mixed labels."""
    return nd.cross_entropy(pred_train, y_mixed)
