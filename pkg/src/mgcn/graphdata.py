"""Graph datasets: CSR storage, normalization, text I/O, splits, SBM generator."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

EDGES_FILE = "edges.txt"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.txt"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph in CSR form without stored self-loops."""

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray

    @classmethod
    def from_edges(cls, num_nodes, edges):
        """Symmetrize, drop self-loops and deduplicate an ``(E, 2)`` edge array."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise DatasetError(f"edge endpoint outside [0, {num_nodes})")
        both = np.concatenate([edges, edges[:, ::-1]])
        both = both[both[:, 0] != both[:, 1]]
        both = np.unique(both, axis=0)  # sorted by row then column
        counts = np.bincount(both[:, 0], minlength=num_nodes)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return cls(num_nodes, indptr, both[:, 1].copy())

    @property
    def num_edges(self):
        """Undirected edge count."""
        return len(self.indices) // 2

    def degrees(self):
        return np.diff(self.indptr)

    def edge_list(self):
        """Each undirected edge once, as ``(i, j)`` with ``i < j``."""
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def to_dense(self):
        a = np.zeros((self.num_nodes, self.num_nodes))
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        a[rows, self.indices] = 1.0
        return a


@dataclass(frozen=True)
class NormAdj:
    """Symmetric normalized adjacency with self-loops, in CSR form."""

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.num_nodes
        object.__setattr__(self, "_csr", sp.csr_matrix(
            (self.values, self.indices, self.indptr), shape=(n, n)))

    def dot(self, x):
        return np.asarray(self._csr @ np.asarray(x, dtype=np.float64))

    def to_dense(self):
        a = np.zeros((self.num_nodes, self.num_nodes))
        rows = np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))
        a[rows, self.indices] = self.values
        return a


def normalize_adjacency(g):
    """D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I."""
    n = g.num_nodes
    rows = np.repeat(np.arange(n), g.degrees())
    rows = np.concatenate([rows, np.arange(n)])
    cols = np.concatenate([g.indices, np.arange(n)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    deg = (g.degrees() + 1).astype(np.float64)
    values = 1.0 / np.sqrt(deg[rows] * deg[cols])
    indptr = np.concatenate([[0], np.cumsum(g.degrees() + 1)]).astype(np.int64)
    return NormAdj(n, indptr, cols.astype(np.int64), values)


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    @property
    def num_nodes(self):
        return len(self.train) + len(self.val) + len(self.test)

    def mask(self, name):
        m = np.zeros(self.num_nodes, dtype=bool)
        m[getattr(self, name)] = True
        return m


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    splits: SplitMasks
    name: str = "dataset"

    @property
    def num_nodes(self):
        return self.graph.num_nodes

    @property
    def num_features(self):
        return self.features.shape[1]

    def onehot(self, idx=None):
        y = np.eye(self.num_classes)[self.labels]
        return y if idx is None else y[idx]

    def with_splits(self, splits):
        return Dataset(self.graph, self.features, self.labels, self.num_classes,
                       splits, self.name)


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def make_splits(labels, fractions=(0.025, 0.025), seed=0):
    """Per-class split: a share of every class goes to train, then val, rest to test.

    Each class contributes ``max(1, round(frac * size))`` train nodes and the
    same rule (capped by what is left) for val.
    """
    labels = np.asarray(labels, dtype=np.int64)
    f_train, f_val = fractions
    if f_train <= 0 or f_val <= 0 or f_train + f_val >= 1:
        raise ValueError(f"split fractions must be positive with sum < 1, got {fractions}")
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for c in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == c)
        if len(members) == 0:
            raise DatasetError(f"class {c} has no nodes; cannot place it in train")
        members = rng.permutation(members)
        n_train = max(1, _round_half_up(f_train * len(members)))
        n_val = min(max(1, _round_half_up(f_val * len(members))), len(members) - n_train)
        train.append(members[:n_train])
        val.append(members[n_train:n_train + n_val])
        test.append(members[n_train + n_val:])
    return SplitMasks(*(np.sort(np.concatenate(part)) for part in (train, val, test)))


def validate(ds):
    n = ds.graph.num_nodes
    if ds.features.shape[0] != n:
        raise DatasetError(f"features have {ds.features.shape[0]} rows, graph has {n} nodes")
    if len(ds.labels) != n:
        raise DatasetError(f"labels have {len(ds.labels)} entries, graph has {n} nodes")
    if ds.labels.min() < 0 or ds.labels.max() >= ds.num_classes:
        raise DatasetError(f"label id outside [0, {ds.num_classes})")
    missing = set(range(ds.num_classes)) - set(np.unique(ds.labels).tolist())
    if missing:
        raise DatasetError(f"classes without nodes: {sorted(missing)}")
    s = ds.splits
    allnodes = np.concatenate([s.train, s.val, s.test])
    if len(allnodes) != n or not np.array_equal(np.sort(allnodes), np.arange(n)):
        raise DatasetError("splits must partition the node set")
    if len(np.unique(ds.labels[s.train])) != ds.num_classes:
        raise DatasetError("train split misses a class")
    return ds


# ------------------------------------------------------------------ I/O

def load_dataset(dir_path, num_classes=None, fractions=(0.025, 0.025), split_seed=0,
                 name=None):
    """Read ``edges.txt``, ``features.csv`` and ``labels.txt`` from a directory.

    The node count is taken from the label file; every edge endpoint must be
    below it. Splits are drawn with :func:`make_splits`.
    """
    paths = {f: os.path.join(dir_path, f) for f in (EDGES_FILE, FEATURES_FILE, LABELS_FILE)}
    for f, p in paths.items():
        if not os.path.isfile(p):
            raise DatasetError(f"missing {f} in {dir_path}")

    with open(paths[LABELS_FILE], encoding="utf-8") as fh:
        try:
            labels = np.array([int(tok) for tok in fh.read().split()], dtype=np.int64)
        except ValueError as exc:
            raise DatasetError(f"bad label entry: {exc}") from None

    with open(paths[EDGES_FILE], encoding="utf-8") as fh:
        toks = fh.read().split()
    if len(toks) % 2:
        raise DatasetError("edges file has an odd number of node ids")
    try:
        edges = np.array([int(t) for t in toks], dtype=np.int64).reshape(-1, 2)
    except ValueError as exc:
        raise DatasetError(f"bad edge entry: {exc}") from None

    rows = []
    with open(paths[FEATURES_FILE], encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise DatasetError(f"non-numeric feature entry on line {lineno}") from None
    if len({len(r) for r in rows}) > 1:
        raise DatasetError("feature rows have differing lengths")
    features = np.array(rows, dtype=np.float64)

    n = len(labels)
    implied = int(edges.max()) + 1 if edges.size else 0
    if implied > n:
        raise DatasetError(f"edges reference node {implied - 1} but only {n} labels given")
    if features.shape[0] != n:
        raise DatasetError(f"features have {features.shape[0]} rows, expected {n}")
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    elif labels.max() >= num_classes:
        raise DatasetError(f"label id {labels.max()} >= declared class count {num_classes}")

    graph = Graph.from_edges(n, edges)
    splits = make_splits(labels, fractions, split_seed)
    ds = Dataset(graph, features, labels, num_classes, splits,
                 name or os.path.basename(os.path.normpath(dir_path)))
    return validate(ds)


def save_dataset(ds, dir_path):
    os.makedirs(dir_path, exist_ok=True)
    with open(os.path.join(dir_path, EDGES_FILE), "w", encoding="utf-8") as fh:
        for i, j in ds.graph.edge_list():
            fh.write(f"{i} {j}\n")
    with open(os.path.join(dir_path, FEATURES_FILE), "w", encoding="utf-8") as fh:
        for row in ds.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(os.path.join(dir_path, LABELS_FILE), "w", encoding="utf-8") as fh:
        for y in ds.labels:
            fh.write(f"{int(y)}\n")


def convert_linqs(content_path, cites_path, out_dir):
    """Convert the LINQS ``.content`` / ``.cites`` layout (e.g. Cora) to our text format.

    Document ids are renumbered in file order; class names are sorted alphabetically.
    Citations to ids missing from the content file are dropped.
    """
    ids, feats, names = [], [], []
    with open(content_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            feats.append(parts[1:-1])
            names.append(parts[-1])
    index = {pid: k for k, pid in enumerate(ids)}
    classes = sorted(set(names))
    labels = [classes.index(c) for c in names]
    os.makedirs(out_dir, exist_ok=True)
    with open(cites_path, encoding="utf-8") as src, \
            open(os.path.join(out_dir, EDGES_FILE), "w", encoding="utf-8") as dst:
        for line in src:
            parts = line.split()
            if len(parts) == 2 and parts[0] in index and parts[1] in index:
                dst.write(f"{index[parts[0]]} {index[parts[1]]}\n")
    with open(os.path.join(out_dir, FEATURES_FILE), "w", encoding="utf-8") as fh:
        for row in feats:
            fh.write(",".join(row) + "\n")
    with open(os.path.join(out_dir, LABELS_FILE), "w", encoding="utf-8") as fh:
        fh.writelines(f"{y}\n" for y in labels)
    return classes


# ------------------------------------------------------------------ SBM

def generate_sbm(block_sizes, p_in, p_out, feature_dim=16, feature_shift=2.0, seed=0,
                 fractions=(0.025, 0.025), split_seed=None):
    """Stochastic block model with Gaussian class-shifted features.

    Class ``c`` has features ``N(feature_shift * e_{c mod D}, I)``, so two class
    means sit ``feature_shift * sqrt(2)`` apart whenever ``D`` >= number of blocks.
    """
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or min(block_sizes) <= 0:
        raise DatasetError(f"every block needs at least one node, got {block_sizes}")
    if not 0.0 <= p_out < p_in <= 1.0:
        raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={p_in}, p_out={p_out}")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    n = len(labels)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    hit = rng.random(len(iu)) < prob
    graph = Graph.from_edges(n, np.stack([iu[hit], ju[hit]], axis=1))

    features = rng.standard_normal((n, feature_dim))
    features[np.arange(n), labels % feature_dim] += feature_shift

    splits = make_splits(labels, fractions, seed if split_seed is None else split_seed)
    ds = Dataset(graph, features, labels, len(block_sizes), splits, "sbm")
    return validate(ds)
