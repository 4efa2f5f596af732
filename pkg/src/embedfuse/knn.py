"""Distance-weighted K-nearest-neighbor text-embedding regression.

The index stores a fixed corpus (no training); a prediction for a query
image embedding is the inverse-power-distance weighted sum of the K nearest
stored text embeddings, scaled by 1/K:

    weight(d) = coef / (d**distance_dim + delta)
    prediction = coef * (1/K) * sum_i (1 / (d_i**distance_dim + delta)) * text_i

The two lines are the same formula; the prediction factors ``coef`` out of
the sum so that scaling the coefficient scales every prediction exactly
(bit for bit), rather than to within rounding error.

By default neighbors are searched in text-embedding space (queries are image
embeddings, so that mode requires a shared image/text dimension); image-space
search is available via ``index_space="image"``.

Determinism contract: distances are Euclidean, computed per query as
``sqrt(sum((keys - q)**2))`` in float64; ties break by ascending id; the
weighted sum accumulates neighbors nearest-first, left to right, then is
scaled by 1/K and by coef. Any batched or parallel execution reproduces
this serial result bit for bit.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from embedfuse.data import PairedDataset, read_pairs, write_pairs
from embedfuse.errors import ConfigError, DataError, FormatError
from embedfuse.vectors import as_matrix, as_vector

__all__ = [
    "KnnConfig",
    "KnnIndex",
    "NeighborSet",
    "knn_fit",
    "knn_predict",
    "knn_predict_batch",
    "neighbor_weight",
    "save_index",
    "load_index",
]

_SPACES = ("text", "image")


@dataclass(frozen=True)
class KnnConfig:
    """Neighbor count, weighting law parameters, and search space.

    ``delta`` guards the division; it may be zero for exact-arithmetic
    checks, in which case a zero distance raises DataError instead of
    producing an unbounded weight.
    """

    k: int = 5
    distance_dim: float = 2.0
    delta: float = 1e-6
    coef: float = 1.0
    index_space: str = "text"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.delta < 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.coef <= 0:
            raise ConfigError(f"coef must be > 0, got {self.coef}")
        if self.index_space not in _SPACES:
            raise ConfigError(f"index_space must be one of {_SPACES}")


@dataclass
class KnnIndex:
    """Immutable stored corpus: search keys, returned text values, ids."""

    corpus_keys: np.ndarray
    corpus_text: np.ndarray
    ids: np.ndarray
    config: KnnConfig

    def __post_init__(self):
        keys = np.ascontiguousarray(self.corpus_keys, dtype="<f4")
        text = np.ascontiguousarray(self.corpus_text, dtype="<f4")
        ids = np.ascontiguousarray(self.ids, dtype="<u8")
        if keys.ndim != 2 or text.ndim != 2 or ids.ndim != 1:
            raise DataError("index arrays must be (n, dk), (n, dt), (n,)")
        if not (keys.shape[0] == text.shape[0] == ids.shape[0]):
            raise DataError("index arrays must share their row count")
        if keys.shape[0] < self.config.k:
            raise ConfigError(
                f"index holds {keys.shape[0]} records but k={self.config.k}"
            )
        for arr in (keys, text, ids):
            arr.setflags(write=False)
        self.corpus_keys = keys
        self.corpus_text = text
        self.ids = ids
        # float64 working copies so queries avoid a per-call upcast
        self._keys64 = keys.astype(np.float64)
        self._text64 = text.astype(np.float64)

    @property
    def count(self) -> int:
        return int(self.ids.shape[0])

    @property
    def key_dim(self) -> int:
        return int(self.corpus_keys.shape[1])

    @property
    def text_dim(self) -> int:
        return int(self.corpus_text.shape[1])


@dataclass(frozen=True)
class NeighborSet:
    """Per-query retrieval detail: nearest-first distances, weights, values."""

    distances: np.ndarray
    weights: np.ndarray
    neighbor_text_embs: np.ndarray
    neighbor_ids: np.ndarray


def knn_fit(train_set: PairedDataset, config: KnnConfig) -> KnnIndex:
    """Store the corpus; no training happens.

    Text mode keeps text embeddings as search keys and requires
    dim_img == dim_txt because queries are image embeddings.
    """
    if train_set.count < config.k:
        raise ConfigError(
            f"k={config.k} exceeds the {train_set.count} available records"
        )
    if config.index_space == "text":
        if train_set.dim_img != train_set.dim_txt:
            raise ConfigError(
                "text-space search compares image queries against text keys, "
                f"which requires a shared embedding dimension; got dim_img="
                f"{train_set.dim_img}, dim_txt={train_set.dim_txt}"
            )
        keys = train_set.texts
    else:
        keys = train_set.images
    return KnnIndex(keys, train_set.texts, train_set.ids, config)


def neighbor_weight(distance: float, config: KnnConfig) -> float:
    """Inverse-power distance weight: coef / (distance**distance_dim + delta)."""
    d = float(distance)
    if d < 0:
        raise DataError(f"distance must be >= 0, got {d}")
    denom = d**config.distance_dim + config.delta
    if denom == 0.0:
        raise DataError("zero distance with delta=0 gives an unbounded weight")
    return config.coef / denom


def _predict_one(index: KnnIndex, q: np.ndarray) -> tuple[np.ndarray, NeighborSet]:
    # coef is applied once, after the accumulation: mathematically identical
    # to weighting each term, and it makes predictions exactly covariant in
    # coef (pred(c*coef) == c*pred(coef) bit for bit).
    cfg = index.config
    distances = np.sqrt(np.sum((index._keys64 - q) ** 2, axis=1))
    order = np.lexsort((index.ids, distances))[: cfg.k]
    d = distances[order]
    denom = d**cfg.distance_dim + cfg.delta
    if np.any(denom == 0.0):
        raise DataError("zero distance with delta=0 gives an unbounded weight")
    inverse = 1.0 / denom
    pred = np.zeros(index.text_dim)
    for j in range(cfg.k):
        pred += inverse[j] * index._text64[order[j]]
    pred *= 1.0 / cfg.k
    pred *= cfg.coef
    neighbors = NeighborSet(
        distances=d,
        weights=cfg.coef / denom,
        neighbor_text_embs=index._text64[order].copy(),
        neighbor_ids=index.ids[order].copy(),
    )
    return pred, neighbors


def knn_predict(index: KnnIndex, query_image_emb) -> tuple[np.ndarray, NeighborSet]:
    """Predict one text embedding; also returns the retrieved neighbor set."""
    q = as_vector(query_image_emb, "query")
    if q.shape[0] != index.key_dim:
        raise DataError(
            f"query dim {q.shape[0]} does not match key dim {index.key_dim}"
        )
    return _predict_one(index, q)


def knn_predict_batch(index: KnnIndex, queries, threads: int = 1) -> np.ndarray:
    """Row-wise knn_predict over a query matrix; order preserved.

    Parallelism (``threads`` > 1) fans out across queries only, so the result
    is bit-identical to the serial path.
    """
    qm = as_matrix(queries, name="queries")
    if qm.shape[1] != index.key_dim and qm.shape[0] > 0:
        raise DataError(
            f"query dim {qm.shape[1]} does not match key dim {index.key_dim}"
        )
    if qm.shape[0] == 0:
        return np.zeros((0, index.text_dim))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda q: _predict_one(index, q)[0], qm))
    else:
        rows = [_predict_one(index, q)[0] for q in qm]
    return np.vstack(rows)


def save_index(index: KnnIndex, embp_path, sidecar_path) -> None:
    """Persist keys/values as EMBP (image slot = keys) plus a JSON sidecar."""
    container = PairedDataset(index.ids, index.corpus_keys, index.corpus_text)
    write_pairs(container, embp_path)
    cfg = index.config
    sidecar = {
        "k": cfg.k,
        "distance_dim": cfg.distance_dim,
        "delta": cfg.delta,
        "coef": cfg.coef,
        "index_space": cfg.index_space,
    }
    Path(sidecar_path).write_text(json.dumps(sidecar, sort_keys=True) + "\n")


def load_index(embp_path, sidecar_path) -> KnnIndex:
    """Rebuild an index saved by save_index."""
    container = read_pairs(embp_path)
    try:
        sidecar = json.loads(Path(sidecar_path).read_text())
        config = KnnConfig(
            k=int(sidecar["k"]),
            distance_dim=float(sidecar["distance_dim"]),
            delta=float(sidecar["delta"]),
            coef=float(sidecar["coef"]),
            index_space=str(sidecar["index_space"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid index sidecar {sidecar_path}: {exc}") from exc
    return KnnIndex(container.images, container.texts, container.ids, config)
