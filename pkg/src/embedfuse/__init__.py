"""Image-to-text transformation in embedding space.

The toolkit operates on precomputed or synthetic image/text embedding pairs:
near-duplicate filtering, a trainable projection head, a distance-weighted
KNN regressor, their ensemble, and average-cosine-similarity evaluation.
"""

from embedfuse.data import (
    PairRecord,
    PairedDataset,
    SynthConfig,
    generate_synthetic,
    read_pairs,
    split_dataset,
    write_pairs,
)
from embedfuse.dedup import FilterConfig, FilterReport, filter_by_similarity
from embedfuse.ensemble import EnsembleConfig, blend, sweep_alpha
from embedfuse.errors import ConfigError, DataError, EmbedFuseError, FormatError
from embedfuse.head import (
    ForwardTrace,
    HeadGrads,
    HeadParams,
    TrainConfig,
    cosine_loss,
    head_backward,
    head_forward,
    head_predict,
    init_head_params,
    layer_norm,
    load_head_params,
    save_head_params,
    train,
)
from embedfuse.knn import (
    KnnConfig,
    KnnIndex,
    NeighborSet,
    knn_fit,
    knn_predict,
    knn_predict_batch,
    load_index,
    neighbor_weight,
    save_index,
)
from embedfuse.metrics import EvalReport, avg_cos_sim
from embedfuse.vectors import (
    cosine_similarity,
    l2_normalize,
    normalize_rows,
    pairwise_cosine,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "EmbedFuseError",
    "EnsembleConfig",
    "EvalReport",
    "FilterConfig",
    "FilterReport",
    "FormatError",
    "ForwardTrace",
    "HeadGrads",
    "HeadParams",
    "KnnConfig",
    "KnnIndex",
    "NeighborSet",
    "PairRecord",
    "PairedDataset",
    "SynthConfig",
    "TrainConfig",
    "avg_cos_sim",
    "blend",
    "cosine_loss",
    "cosine_similarity",
    "filter_by_similarity",
    "generate_synthetic",
    "head_backward",
    "head_forward",
    "head_predict",
    "init_head_params",
    "knn_fit",
    "knn_predict",
    "knn_predict_batch",
    "l2_normalize",
    "layer_norm",
    "load_head_params",
    "load_index",
    "neighbor_weight",
    "normalize_rows",
    "pairwise_cosine",
    "read_pairs",
    "save_head_params",
    "save_index",
    "split_dataset",
    "sweep_alpha",
    "train",
    "write_pairs",
]
