"""Training loop for the mixed-view contrastive objective, evaluation and exports."""

from __future__ import annotations

import copy
import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import ndiff as nd
from .corered import FORMS, correlation_batch, view_correlation_loss
from .encoder import EncoderConfig, EncoderParams, build_params, classify, run_encoder
from .graphdata import Dataset, Graph, make_splits, normalize_adjacency, validate
from .mixview import classification_loss, make_view

# per-dataset learning rates used in the original experiments
DATASET_LR = {"citeseer": 1e-3, "dblp": 5e-2, "cora": 2e-2, "amac": 2e-2,
              "acm": 1e-2, "amap": 1e-2}
DEFAULT_LR = 2e-2

# variant -> (mix the classification path, add the correlation term)
ABLATIONS = {"B": (False, False), "B+I": (True, False), "B+C": (False, True),
             "full": (True, True)}
ABLATION_LABELS = {"B": "B", "B+I": "B+I", "B+C": "B+C", "full": "Ours"}

METRIC_FIELDS = ("run", "epoch", "loss_c", "loss_r", "loss", "acc_train", "acc_val", "acc_test")


def default_lr(name):
    return DATASET_LR.get(str(name).lower(), DEFAULT_LR)


class NonFiniteLossError(FloatingPointError):
    def __init__(self, epoch, value):
        super().__init__(f"non-finite loss {value} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.9
    alpha: float = 0.5
    lr: float = DEFAULT_LR
    epochs: int = 1000
    weight_decay: float = 5e-4
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    seed: int = 0
    runs: int = 10
    correlation_batch: int | str = "all"
    ablation: str = "full"
    eq7_form: str = "decomposed"
    split_fractions: tuple = (0.025, 0.025)
    resplit: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1 or self.runs < 1:
            raise ValueError("epochs and runs must be >= 1")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {list(ABLATIONS)}, got {self.ablation!r}")
        if self.eq7_form not in FORMS:
            raise ValueError(f"eq7_form must be one of {FORMS}, got {self.eq7_form!r}")
        if self.correlation_batch != "all" and int(self.correlation_batch) < 1:
            raise ValueError("correlation_batch must be 'all' or a positive count")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss_c: float
    loss_r: float
    loss: float
    acc_train: float
    acc_val: float
    acc_test: float

    def as_record(self, run):
        return {"run": run, "epoch": self.epoch, "loss_c": self.loss_c,
                "loss_r": self.loss_r, "loss": self.loss, "acc_train": self.acc_train,
                "acc_val": self.acc_val, "acc_test": self.acc_test}


@dataclass
class RunResult:
    run: int
    seed: int
    test_acc: float
    best_epoch: int
    best_val: float
    history: list
    params: EncoderParams
    best_params: dict


@dataclass
class MultiResult:
    mean: float
    std: float
    accs: list
    results: list


@dataclass(frozen=True)
class EpochLosses:
    loss_c: nd.Tensor
    loss_r: nd.Tensor | None
    loss: nd.Tensor


def epoch_losses(ds, adj, params, config, rng, training=True):
    """Forward pass for one step of the joint objective.

    Draws dropout masks and view permutations from ``rng`` in a fixed order,
    so a copied generator reproduces the same losses.
    """
    mix_cls, use_corr = ABLATIONS[config.ablation]
    train = ds.splits.train
    y_train = ds.onehot(train)
    H = run_encoder(config.encoder, ds.features, adj, params, rng, training)

    h1 = h2 = None
    if use_corr:
        h1 = make_view(1, H, y_train, ds.splits, config.lam, rng, with_labels=False).h_mixed
    if mix_cls:
        v2 = make_view(2, H, y_train, ds.splits, config.lam, rng)
        cls_in, y_target = nd.take_rows(v2.h_mixed, train), v2.y_mixed
        h2 = v2.h_mixed
    else:
        cls_in, y_target = nd.take_rows(H, train), y_train
        if use_corr:
            h2 = make_view(2, H, y_train, ds.splits, config.lam, rng, with_labels=False).h_mixed

    loss_c = classification_loss(classify(cls_in, params), y_target)
    if not use_corr:
        return EpochLosses(loss_c, None, loss_c)
    idx = correlation_batch(ds.splits, config.correlation_batch, rng)
    if len(idx) != ds.num_nodes:
        h1, h2 = nd.take_rows(h1, idx), nd.take_rows(h2, idx)
    loss_r = view_correlation_loss(h1, h2, config.eq7_form)
    return EpochLosses(loss_c, loss_r, nd.add(loss_c, nd.scale(loss_r, config.alpha)))


def predict(params, ds, encoder_config, adj=None):
    adj = normalize_adjacency(ds.graph) if adj is None else adj
    H = run_encoder(encoder_config, ds.features, adj, params, training=False)
    return classify(H, params).data


def _accuracy(pred, labels, idx):
    if len(idx) == 0:
        raise ValueError("cannot evaluate on an empty node set")
    return float(np.mean(pred[idx].argmax(axis=1) == labels[idx]))


def _val_loss(pred, y_val, idx):
    return float(-(y_val * np.log(pred[idx] + nd.EPS_LOG)).sum() / len(idx))


def evaluate(params, ds, mask, encoder_config=None, adj=None):
    """Accuracy of argmax predictions over ``mask`` (boolean mask or node ids)."""
    mask = np.asarray(mask)
    idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.int64)
    pred = predict(params, ds, encoder_config or EncoderConfig(), adj)
    return _accuracy(pred, ds.labels, idx)


def train(ds, config, run=0, on_epoch=None):
    """Train one model; report test accuracy at the best-validation epoch."""
    enc = config.encoder
    if ds.features.ndim != 2 or ds.features.shape[0] != ds.num_nodes:
        raise ValueError("feature matrix does not match the graph")
    adj = normalize_adjacency(ds.graph)
    params = build_params(enc, ds.num_features, ds.num_classes, seed=config.seed)
    rng = np.random.default_rng(config.seed)
    state = nd.AdamState()
    plist = params.parameters()
    s = ds.splits

    history = []
    y_val = ds.onehot(s.val)
    best_key, best_epoch, best_val, best_test, best_params = None, 0, 0.0, 0.0, None
    for epoch in range(1, config.epochs + 1):
        losses = epoch_losses(ds, adj, params, config, rng, training=True)
        total = losses.loss.item()
        if not np.isfinite(total):
            raise NonFiniteLossError(epoch, total)
        nd.backward(losses.loss)
        nd.adam_step(plist, state, config.lr, config.weight_decay)

        pred = predict(params, ds, enc, adj)
        m = EpochMetrics(epoch, losses.loss_c.item(),
                         0.0 if losses.loss_r is None else losses.loss_r.item(), total,
                         _accuracy(pred, ds.labels, s.train),
                         _accuracy(pred, ds.labels, s.val),
                         _accuracy(pred, ds.labels, s.test))
        history.append(m)
        if on_epoch is not None:
            on_epoch(run, m)
        # max val accuracy; ties go to lower val cross-entropy, then to the earlier epoch
        key = (m.acc_val, -_val_loss(pred, y_val, s.val))
        if best_key is None or key > best_key:
            best_key, best_epoch, best_val, best_test = key, epoch, m.acc_val, m.acc_test
            best_params = params.snapshot()
    return RunResult(run, config.seed, best_test, best_epoch, best_val, history, params,
                     best_params)


def _one_run(ds, config, r):
    seed = config.seed + r
    if config.resplit:
        ds = ds.with_splits(make_splits(ds.labels, config.split_fractions, seed))
    return train(ds, replace(config, seed=seed), run=r)


def run_multi(ds, config, workers=1):
    """``config.runs`` independent runs with seeds ``seed + run``; mean and std of test accuracy."""
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda r: _one_run(ds, config, r), range(config.runs)))
    else:
        results = [_one_run(ds, config, r) for r in range(config.runs)]
    return summarize(results)


def summarize(results):
    accs = [r.test_acc for r in results]
    return MultiResult(float(np.mean(accs)), float(np.std(accs)), accs, results)


def run_ablation(ds, config, variants=("B", "B+I", "B+C", "full"), workers=1):
    """Rows ``(variant_label, mean, std, runs, MultiResult)`` with shared seeds."""
    rows = []
    for v in variants:
        res = run_multi(ds, replace(config, ablation=v), workers)
        rows.append((ABLATION_LABELS[v], res.mean, res.std, config.runs, res))
    return rows


# ------------------------------------------------------------- writing

def write_metrics(results, fh):
    """Newline-delimited JSON, one record per epoch per run."""
    for res in results:
        for m in res.history:
            fh.write(json.dumps(m.as_record(res.run)) + "\n")


def write_ablation_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "mean", "std", "runs"])
        for label, mean, std, runs, *_ in rows:
            w.writerow([label, repr(mean), repr(std), runs])


def embeddings(params, ds, encoder_config=None, adj=None):
    adj = normalize_adjacency(ds.graph) if adj is None else adj
    return run_encoder(encoder_config or EncoderConfig(), ds.features, adj, params).data


def cosine_similarity(H):
    Hn = nd.row_l2_normalize(nd.constant(H)).data
    return Hn @ Hn.T


def export_similarity(params, ds, path, encoder_config=None):
    """Write the label-sorted cosine similarity of H; node order goes to ``path + '.order'``."""
    S = cosine_similarity(embeddings(params, ds, encoder_config))
    order = np.argsort(ds.labels, kind="stable")
    S = S[np.ix_(order, order)]
    with open(path, "w", encoding="utf-8") as fh:
        for row in S:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with open(path + ".order", "w", encoding="utf-8") as fh:
        fh.write("node,label\n")
        for i in order:
            fh.write(f"{int(i)},{int(ds.labels[i])}\n")
    return S, order


def export_embeddings(params, ds, path, encoder_config=None):
    """Write H with the node label appended as the last column."""
    H = embeddings(params, ds, encoder_config)
    with open(path, "w", encoding="utf-8") as fh:
        for row, y in zip(H, ds.labels):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(y)}\n")
    return H


def block_similarity(S, sorted_labels):
    """Mean within-class and between-class entries of a similarity matrix.

    The diagonal is excluded from the within-class mean.
    """
    sorted_labels = np.asarray(sorted_labels)
    same = sorted_labels[:, None] == sorted_labels[None, :]
    np.fill_diagonal(same, False)
    diff = sorted_labels[:, None] != sorted_labels[None, :]
    return float(S[same].mean()), float(S[diff].mean())


# ------------------------------------------------------- gradient check

def gradient_check(seed=0, eps=1e-4, corrupt=1.0, num_nodes=12, D=5, d=8, C=3, K=3,
                   lam=0.9, alpha=0.5, backbone="gpr"):
    """Finite-difference check of the full joint loss on a small random graph.

    Dropout is off and the view permutations are frozen by replaying a copied
    generator, so the loss is a deterministic function of the parameters.
    ``corrupt`` scales the analytic gradient (a detector sanity knob).
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(num_nodes) % C
    iu, ju = np.triu_indices(num_nodes, k=1)
    hit = rng.random(len(iu)) < 0.3
    graph = Graph.from_edges(num_nodes, np.stack([iu[hit], ju[hit]], axis=1))
    ds = validate(Dataset(graph, rng.standard_normal((num_nodes, D)), labels, C,
                          make_splits(labels, (0.25, 0.25), seed), "gradcheck"))
    config = TrainConfig(lam=lam, alpha=alpha, encoder=EncoderConfig(
        hidden_dim=d, K=K, dropout=0.0, backbone=backbone))
    adj = normalize_adjacency(graph)
    params = build_params(config.encoder, D, C, seed=seed)
    view_rng = np.random.default_rng(seed + 1)

    def loss_fn():
        loss = epoch_losses(ds, adj, params, config, copy.deepcopy(view_rng)).loss
        return nd.grad_scale(loss, corrupt) if corrupt != 1.0 else loss

    return nd.finite_diff_check(loss_fn, params.parameters(), eps)
