"""Average-cosine-similarity evaluation with stable, order-robust summation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from embedfuse.errors import DataError
from embedfuse.vectors import as_matrix

__all__ = ["EvalReport", "avg_cos_sim", "config_digest"]


@dataclass(frozen=True)
class EvalReport:
    """Evaluation outcome: pair count, mean cosine, optional per-pair detail."""

    n_pairs: int
    avg_cossim: float
    per_pair: list[tuple[int, float]] | None
    config_digest: str

    def as_dict(self) -> dict:
        out: dict = {
            "n": self.n_pairs,
            "avg_cossim": self.avg_cossim,
            "config_digest": self.config_digest,
        }
        if self.per_pair is not None:
            out["per_pair"] = [[i, c] for i, c in self.per_pair]
        return out


def config_digest(context) -> str:
    """Short hex digest of a JSON-serializable context mapping (or None)."""
    canonical = json.dumps(context, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _kahan_mean(values: np.ndarray) -> float:
    # Compensated summation keeps the mean stable to ~1e-12 under any
    # row permutation, which plain accumulation does not guarantee.
    total = 0.0
    comp = 0.0
    for v in values:
        y = float(v) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total / values.shape[0]


def avg_cos_sim(
    preds,
    targets,
    *,
    ids=None,
    include_per_pair: bool = False,
    context=None,
) -> EvalReport:
    """Mean cosine similarity between aligned prediction and target rows.

    Summation runs in fixed row order with compensated accumulation. A
    zero-norm row raises DataError naming the row id (row index when no ids
    are supplied).
    """
    p = as_matrix(preds, name="preds")
    t = as_matrix(targets, name="targets")
    if p.shape != t.shape:
        raise DataError(f"shape mismatch: preds {p.shape} vs targets {t.shape}")
    n = p.shape[0]
    if n == 0:
        raise DataError("cannot evaluate zero pairs")
    if ids is None:
        row_ids = np.arange(n, dtype=np.int64)
    else:
        row_ids = np.asarray(ids, dtype=np.int64)
        if row_ids.shape != (n,):
            raise DataError(f"ids must have shape ({n},), got {row_ids.shape}")

    p_norms = np.linalg.norm(p, axis=1)
    t_norms = np.linalg.norm(t, axis=1)
    for name, norms in (("preds", p_norms), ("targets", t_norms)):
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise DataError(f"zero-norm row id {int(row_ids[zero[0]])} in {name}")

    cosines = np.clip(
        np.einsum("ij,ij->i", p, t) / (p_norms * t_norms), -1.0, 1.0
    )
    report = EvalReport(
        n_pairs=n,
        avg_cossim=_kahan_mean(cosines),
        per_pair=(
            [(int(i), float(c)) for i, c in zip(row_ids, cosines)]
            if include_per_pair
            else None
        ),
        config_digest=config_digest(context),
    )
    return report
