"""Cross-view cosine correlation and the loss pulling it toward the identity."""

from __future__ import annotations

import numpy as np

from . import ndiff as nd

FORMS = ("decomposed", "mean_square")


def correlation_matrix(h1, h2):
    """Z[i, j] = cos(h1[i], h2[j])."""
    if h1.shape != h2.shape:
        raise ValueError(f"view shapes differ: {h1.shape} vs {h2.shape}")
    if h1.shape[0] < 1:
        raise ValueError("need at least one row")
    return nd.matmul(nd.row_l2_normalize(h1), nd.transpose(nd.row_l2_normalize(h2)))


def correlation_reduction_loss(Z, form="decomposed"):
    """Distance of Z from the identity.

    ``decomposed``: mean squared diagonal error plus the mean of squared
    off-diagonal entries, each with its own normalizer.
    ``mean_square``: plain mean of (Z - I)^2 over all B^2 entries.
    """
    B = Z.shape[0]
    if Z.shape != (B, B):
        raise ValueError(f"Z must be square, got {Z.shape}")
    w_diag, w_off = _weights(B, form)
    diff = Z.data.copy()
    diag = np.einsum("ii->i", diff)  # writable view of the diagonal
    diag -= 1.0
    diag_sum = float(diag @ diag)
    off_sum = float(np.vdot(diff, diff)) - diag_sum
    value = w_diag * diag_sum + w_off * off_sum

    def bw(g):
        grad = (2.0 * w_off * g[0, 0]) * diff
        np.einsum("ii->i", grad)[...] = (2.0 * w_diag * g[0, 0]) * diag
        Z.grad += grad

    return nd.make_op(value, (Z,), bw)


def correlation_batch(splits, batch_size, rng):
    """Node ids entering Z: all nodes, or a fresh uniform subset of ``batch_size``."""
    n = splits.num_nodes
    if batch_size is None or batch_size == "all" or batch_size == n:
        return np.arange(n)
    batch_size = int(batch_size)
    if batch_size > n or batch_size < 1:
        raise ValueError(f"correlation batch {batch_size} not in [1, {n}]")
    return np.sort(rng.choice(n, size=batch_size, replace=False))


def _weights(B, form):
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    if form == "mean_square":
        return 1.0 / (B * B), 1.0 / (B * B)
    return 1.0 / B, (1.0 / (B * B - B) if B > 1 else 0.0)


def view_correlation_loss(h1, h2, form="decomposed"):
    """Same value and gradient as ``correlation_reduction_loss(correlation_matrix(h1, h2))``
    without building the B x B matrix.

    Uses sum_ij Z_ij^2 = <A^T A, B^T B> for the row-normalized views A, B,
    so memory and time are O(B d^2) instead of O(B^2 d).
    """
    if h1.shape != h2.shape:
        raise ValueError(f"view shapes differ: {h1.shape} vs {h2.shape}")
    a = nd.row_l2_normalize(h1)
    b = nd.row_l2_normalize(h2)
    B = h1.shape[0]
    w_diag, w_off = _weights(B, form)
    A, Bm = a.data, b.data
    gram_a, gram_b = A.T @ A, Bm.T @ Bm
    zdiag = np.einsum("ij,ij->i", A, Bm)
    total = float(np.vdot(gram_a, gram_b))
    diag_err = zdiag - 1.0
    value = w_diag * float(diag_err @ diag_err) + w_off * (total - float(zdiag @ zdiag))

    def bw(g):
        g = g[0, 0]
        coef = (2.0 * g) * (w_diag * diag_err - w_off * zdiag)
        if a.requires_grad:
            a.grad += (2.0 * g * w_off) * (A @ gram_b) + coef[:, None] * Bm
        if b.requires_grad:
            b.grad += (2.0 * g * w_off) * (Bm @ gram_a) + coef[:, None] * A

    return nd.make_op(value, (a, b), bw)
