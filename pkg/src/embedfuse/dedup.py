"""Near-duplicate removal by thresholded cosine similarity.

A record survives the greedy scan iff its selected embedding's cosine
similarity to every previously *kept* record stays at or below the
threshold. Keep-first in dataset order makes the result deterministic and
auditable; comparing only against kept records avoids over-deleting chains
of borderline duplicates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from embedfuse.data import PairedDataset
from embedfuse.errors import ConfigError, DataError

__all__ = ["FilterConfig", "FilterReport", "filter_by_similarity"]

_FIELDS = ("text", "image")


@dataclass(frozen=True)
class FilterConfig:
    """Similarity threshold in (0, 1] plus the embedding side to compare."""

    threshold: float = 0.85
    field_selector: str = "text"

    def __post_init__(self):
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.field_selector not in _FIELDS:
            raise ConfigError(f"field_selector must be one of {_FIELDS}")


@dataclass(frozen=True)
class FilterReport:
    """Outcome of one filter pass; kept + removed always equals the input count."""

    kept_count: int
    removed_count: int
    removed_ids: list[int] = field(default_factory=list)
    threshold: float = 0.85

    def as_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "kept": self.kept_count,
            "removed": self.removed_count,
            "removed_ids": list(self.removed_ids),
        }


def filter_by_similarity(
    dataset: PairedDataset, config: FilterConfig
) -> tuple[PairedDataset, FilterReport]:
    """Greedy keep-first dedup scan over the selected embedding side.

    Output preserves the input order of kept records; the report lists
    removed ids in scan order. A zero-norm selected embedding raises
    DataError naming the offending id.
    """
    sel = dataset.texts if config.field_selector == "text" else dataset.images
    sel = sel.astype(np.float64)
    norms = np.linalg.norm(sel, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DataError(
            f"zero-norm {config.field_selector} embedding for id {int(dataset.ids[zero[0]])}"
        )
    unit = sel / norms[:, None]

    kept_rows = np.empty_like(unit)
    kept_idx: list[int] = []
    removed_ids: list[int] = []
    n_kept = 0
    for i in range(dataset.count):
        if n_kept:
            sims = np.clip(kept_rows[:n_kept] @ unit[i], -1.0, 1.0)
            if float(np.max(sims)) > config.threshold:
                removed_ids.append(int(dataset.ids[i]))
                continue
        kept_rows[n_kept] = unit[i]
        n_kept += 1
        kept_idx.append(i)

    report = FilterReport(
        kept_count=len(kept_idx),
        removed_count=len(removed_ids),
        removed_ids=removed_ids,
        threshold=config.threshold,
    )
    return dataset.subset(kept_idx), report
