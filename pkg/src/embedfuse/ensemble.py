"""Convex blending of two prediction sets and the alpha grid sweep.

The blend is ``alpha * a + (1 - alpha) * b`` per row. By default both
inputs are L2-normalized first so the mixing weight trades off direction
rather than magnitude; raw mode is available for pre-scaled inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from embedfuse.errors import ConfigError, DataError
from embedfuse.metrics import avg_cos_sim
from embedfuse.vectors import as_matrix, normalize_rows

__all__ = ["EnsembleConfig", "blend", "sweep_alpha"]


@dataclass(frozen=True)
class EnsembleConfig:
    """Mixing weight for the first prediction set, and normalization mode."""

    alpha_ens: float = 0.5
    normalize_inputs: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha_ens <= 1.0:
            raise ConfigError(
                f"alpha_ens must lie in [0, 1], got {self.alpha_ens}"
            )


def blend(a_preds, b_preds, config: EnsembleConfig) -> np.ndarray:
    """Convex combination of two aligned predictions.

    Accepts a single vector from each side, or two row-aligned matrices
    blended row-wise; the output matches the input rank.
    """
    a = np.asarray(a_preds, dtype=np.float64)
    b = np.asarray(b_preds, dtype=np.float64)
    single = a.ndim == 1 and b.ndim == 1
    a = a[np.newaxis, :] if a.ndim == 1 else as_matrix(a, name="a_preds")
    b = b[np.newaxis, :] if b.ndim == 1 else as_matrix(b, name="b_preds")
    if a.shape != b.shape:
        raise DataError(
            "prediction sets must have identical shapes, got "
            f"{np.asarray(a_preds).shape} and {np.asarray(b_preds).shape}"
        )
    if config.normalize_inputs:
        a = normalize_rows(a, name="a_preds")
        b = normalize_rows(b, name="b_preds")
    mixed = config.alpha_ens * a + (1.0 - config.alpha_ens) * b
    return mixed[0] if single else mixed


def sweep_alpha(
    a_preds,
    b_preds,
    targets,
    grid,
    *,
    normalize_inputs: bool = True,
) -> tuple[float, list[tuple[float, float]]]:
    """Score every alpha on the grid, return (best_alpha, scored grid).

    The grid must include both endpoints 0 and 1 so the sweep can never do
    worse than either input on its own. Ties resolve to the smallest alpha.
    """
    grid_values = [float(g) for g in np.atleast_1d(np.asarray(grid, dtype=np.float64))]
    if len(grid_values) == 0:
        raise ConfigError("alpha grid is empty")
    for g in grid_values:
        if not 0.0 <= g <= 1.0:
            raise ConfigError(f"alpha grid values must lie in [0, 1], got {g}")
    if 0.0 not in grid_values or 1.0 not in grid_values:
        raise ConfigError("alpha grid must contain both 0 and 1")
    t = as_matrix(targets, name="targets")
    scored: list[tuple[float, float]] = []
    best_alpha = None
    best_score = -np.inf
    for alpha in grid_values:
        mixed = blend(a_preds, b_preds, EnsembleConfig(alpha, normalize_inputs))
        score = avg_cos_sim(mixed, t).avg_cossim
        scored.append((alpha, score))
        if score > best_score:
            best_score = score
            best_alpha = alpha
    return float(best_alpha), scored
