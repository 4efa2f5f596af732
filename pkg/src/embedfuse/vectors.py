"""Dimension-checked dense vector math shared by every other module.

All public functions accept array-likes, validate shape and finiteness, and
compute in float64 regardless of the caller's dtype. Cosine outputs are
clamped into [-1, 1] because dot/norm rounding can drift past 1 by a few ulp
and break downstream range assertions. Zero-norm vectors are rejected
everywhere: they indicate corrupt embeddings, not a similarity of zero.
"""

from __future__ import annotations

import numpy as np

from embedfuse.errors import DataError

__all__ = [
    "as_vector",
    "as_matrix",
    "cosine_similarity",
    "l2_normalize",
    "normalize_rows",
    "pairwise_cosine",
]


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Validate and convert to a finite 1-D float64 array with dim >= 1."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DataError(f"{name} must be 1-D with at least one element, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains NaN or Inf")
    return arr


def as_matrix(values, dim: int | None = None, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a finite 2-D float64 array of row vectors.

    Zero rows are allowed; `dim`, when given, pins the required column count.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DataError(f"{name} must have dim {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains NaN or Inf")
    return arr


def cosine_similarity(a, b) -> float:
    """Cosine similarity (a.b)/(|a||b|), clamped into [-1, 1].

    Raises DataError on dimension mismatch or a zero-norm input.
    """
    va = as_vector(a, "a")
    vb = as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise DataError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0:
        raise DataError("zero-norm input: a")
    if norm_b == 0.0:
        raise DataError("zero-norm input: b")
    cos = float(np.dot(va, vb)) / (norm_a * norm_b)
    return min(1.0, max(-1.0, cos))


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit Euclidean norm. Zero-norm input raises DataError."""
    vec = as_vector(v)
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DataError("cannot normalize a zero-norm vector")
    return vec / norm


def normalize_rows(m, name: str = "matrix") -> np.ndarray:
    """Row-wise L2 normalization; raises DataError naming the first zero-norm row."""
    mat = as_matrix(m, name=name)
    norms = np.linalg.norm(mat, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(f"zero-norm row {int(zero[0])} in {name}")
    return mat / norms[:, None]


def pairwise_cosine(q, c) -> np.ndarray:
    """All-pairs cosine similarity between row vectors of q and c.

    Entry (i, j) equals cosine_similarity(q[i], c[j]); empty inputs yield an
    empty matrix. Raises DataError on dimension mismatch or zero-norm rows.
    """
    qm = as_matrix(q, name="q")
    cm = as_matrix(c, name="c")
    if qm.shape[1] != cm.shape[1]:
        raise DataError(f"dimension mismatch: {qm.shape[1]} vs {cm.shape[1]}")
    if qm.shape[0] == 0 or cm.shape[0] == 0:
        return np.zeros((qm.shape[0], cm.shape[0]))
    qn = normalize_rows(qm, "q")
    cn = normalize_rows(cm, "c")
    return np.clip(qn @ cn.T, -1.0, 1.0)
