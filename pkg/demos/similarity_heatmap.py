"""Export the node similarity matrix of a trained model and summarize its blocks.

Writes sim.csv (label-sorted cosine similarity), sim.csv.order and emb.csv
to the current directory. Plotting is left to whatever tool you like, e.g.
``plt.imshow(np.loadtxt("sim.csv", delimiter=","))``.
"""

import numpy as np

from mgcn import TrainConfig, generate_sbm, train
from mgcn.encoder import build_params
from mgcn.trainer import block_similarity, export_embeddings, export_similarity

ds = generate_sbm([100, 100, 100], 0.1, 0.01, seed=0)

# an untrained encoder for reference
config = TrainConfig(epochs=300)
raw = build_params(config.encoder, ds.num_features, ds.num_classes)
S0, order = export_similarity(raw, ds, "sim_init.csv")
print("init    within/between: %.3f / %.3f" % block_similarity(S0, ds.labels[order]))

for ablation in ("B", "full"):
    res = train(ds, TrainConfig(epochs=300, ablation=ablation))
    S, order = export_similarity(res.params, ds, "sim.csv")
    w, b = block_similarity(S, ds.labels[order])
    print(f"{ablation:7s} within/between: {w:.3f} / {b:.3f}   test acc {res.test_acc:.4f}")

H = export_embeddings(res.params, ds, "emb.csv")
print("embedding width", H.shape[1], "- rows", H.shape[0])
print("first L_R %.3f, last L_R %.3f" % (res.history[0].loss_r, res.history[-1].loss_r))
