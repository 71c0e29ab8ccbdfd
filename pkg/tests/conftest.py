import os

import numpy as np
import pytest

from mgcn.graphdata import Dataset, Graph, generate_sbm, make_splits, validate


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(len(iu)) < p
    return Graph.from_edges(n, np.stack([iu[hit], ju[hit]], axis=1))


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n):
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def small_corpus():
    """Every graph here has at most 16 nodes."""
    graphs = {
        "isolated1": Graph.from_edges(1, np.zeros((0, 2))),
        "edge2": Graph.from_edges(2, [(0, 1)]),
        "path3": path_graph(3),
        "triangle": Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)]),
        "star6": star_graph(6),
        "path9": path_graph(9),
        "two_components": Graph.from_edges(7, [(0, 1), (1, 2), (4, 5), (5, 6)]),
        "complete8": Graph.from_edges(8, np.stack(np.triu_indices(8, k=1), axis=1)),
        "empty5": Graph.from_edges(5, np.zeros((0, 2))),
    }
    for k, (n, p) in enumerate([(10, 0.3), (12, 0.2), (16, 0.15), (16, 0.5)]):
        graphs[f"random{n}_{k}"] = random_graph(n, p, seed=100 + k)
    return graphs


CORPUS = small_corpus()


def tiny_dataset(n=12, D=5, C=3, p=0.3, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % C
    ds = Dataset(random_graph(n, p, seed), rng.standard_normal((n, D)), labels, C,
                 make_splits(labels, (0.25, 0.25), seed), "tiny")
    return validate(ds)


@pytest.fixture
def tiny():
    return tiny_dataset()


@pytest.fixture(scope="session")
def sbm_small():
    return generate_sbm([20, 20, 20], 0.3, 0.02, feature_dim=8, seed=3, fractions=(0.1, 0.1))


@pytest.fixture(scope="session")
def cora_dir(tmp_path_factory):
    """Cora in our text format, from ``MGCN_CORA_DIR``.

    That directory may hold edges.txt / features.csv / labels.txt, or the
    original cora.content / cora.cites pair, which is converted on the fly.
    """
    from mgcn.graphdata import convert_linqs

    root = os.environ.get("MGCN_CORA_DIR")
    if not root or not os.path.isdir(root):
        pytest.fail("Cora data not available: set MGCN_CORA_DIR to a directory with "
                    "edges.txt/features.csv/labels.txt or cora.content/cora.cites")
    if os.path.isfile(os.path.join(root, "edges.txt")):
        return root
    content, cites = os.path.join(root, "cora.content"), os.path.join(root, "cora.cites")
    if not (os.path.isfile(content) and os.path.isfile(cites)):
        pytest.fail(f"MGCN_CORA_DIR={root} holds neither format")
    out = tmp_path_factory.mktemp("cora")
    convert_linqs(content, cites, str(out))
    return str(out)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
