"""Mixed graph contrastive network for semi-supervised node classification.

Numpy-only: a small reverse-mode autodiff kernel (:mod:`mgcn.ndiff`), GPR and
GCN encoders, interpolation-perturbed views, cross-view correlation reduction,
and the training / ablation / export tooling around them.
"""

from .corered import (
    correlation_batch,
    correlation_matrix,
    correlation_reduction_loss,
    view_correlation_loss,
)
from .encoder import EncoderConfig, EncoderParams, classify, encode, gcn2_encode, init_params
from .graphdata import (
    Dataset,
    Graph,
    NormAdj,
    SplitMasks,
    generate_sbm,
    load_dataset,
    make_splits,
    normalize_adjacency,
    save_dataset,
)
from .mixview import (
    MixedView,
    classification_loss,
    mix_embeddings,
    mix_labels,
    sample_block_permutation,
)
from .trainer import (
    TrainConfig,
    evaluate,
    export_embeddings,
    export_similarity,
    run_ablation,
    run_multi,
    train,
)

__version__ = "0.1.0"
