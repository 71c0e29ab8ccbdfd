"""Check backprop through the whole joint loss against central differences.

The loss involves GPR propagation, two mixed views, the softmax head and the
cosine correlation term. Dropout is off and the view permutations are
replayed, so the loss is a plain function of the parameters.
"""

import numpy as np

from mgcn import ndiff as nd
from mgcn.trainer import gradient_check

for backbone in ("gpr", "gcn2"):
    err = gradient_check(seed=0, backbone=backbone)
    print(f"{backbone:5s} max relative error {err:.2e}")

# the detector should notice a gradient that is off by a factor of two
print("doubled gradient:", round(gradient_check(corrupt=2.0), 6))

# the same harness works on any scalar built from Tensors
w = nd.parameter("w", np.random.default_rng(0).standard_normal((3, 2)))
x = nd.constant(np.random.default_rng(1).standard_normal((4, 3)))


def loss():
    probs = nd.softmax_rows(nd.matmul(x, w.value))
    return nd.cross_entropy(probs, np.eye(2)[[0, 1, 1, 0]])


print("softmax + cross-entropy:", f"{nd.finite_diff_check(loss, [w]):.2e}")
