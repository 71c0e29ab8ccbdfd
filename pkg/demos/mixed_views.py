"""What a mixed view looks like on a toy graph."""

import numpy as np

from mgcn import ndiff as nd
from mgcn.graphdata import SplitMasks
from mgcn.mixview import make_view

# six nodes, the first three labeled
splits = SplitMasks(train=np.array([0, 1, 2]), val=np.array([3]), test=np.array([4, 5]))
H = nd.constant(np.arange(12, dtype=float).reshape(6, 2))
y = np.eye(2)[[0, 1, 1]]

rng = np.random.default_rng(0)
view = make_view(2, H, y, splits, lam=0.9, rng=rng)

# labeled nodes only swap with labeled nodes, so every mixed label is defined
print("permutation:", view.permutation)
print("mixed embeddings:\n", view.h_mixed.data)
print("mixed labels:\n", view.y_mixed)
print("label rows sum to", view.y_mixed.sum(axis=1))

# lam = 1 leaves everything untouched
same = make_view(2, H, y, splits, lam=1.0, rng=rng)
print("identity at lam=1:", np.array_equal(same.h_mixed.data, H.data))
