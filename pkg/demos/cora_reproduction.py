"""Ablation on Cora with the original hyperparameters.

Usage: python demos/cora_reproduction.py PATH [RUNS]

PATH holds either edges.txt / features.csv / labels.txt or the LINQS
cora.content / cora.cites pair. A 10-run ablation takes the better part of
an hour on one core.
"""

import os
import sys
import tempfile

from mgcn import TrainConfig, load_dataset, run_ablation
from mgcn.graphdata import convert_linqs
from mgcn.trainer import default_lr

path = sys.argv[1]
runs = int(sys.argv[2]) if len(sys.argv) > 2 else 10
if os.path.isfile(os.path.join(path, "cora.content")):
    out = tempfile.mkdtemp()
    convert_linqs(os.path.join(path, "cora.content"), os.path.join(path, "cora.cites"), out)
    path = out

ds = load_dataset(path, name="cora")
print(ds.num_nodes, "nodes", ds.num_features, "features", ds.graph.num_edges, "edges")

config = TrainConfig(lr=default_lr("cora"), epochs=1000, runs=runs)
for label, mean, std, n, _ in run_ablation(ds, config):
    print(f"{label:5s} {100 * mean:.2f} ± {100 * std:.2f}  ({n} runs)")
