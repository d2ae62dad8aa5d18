"""Numeric kernels shared by the indexer and query engine.

All statistics are accumulated in float64 regardless of storage precision.
Sums over many vectors use a fixed-shape pairwise (tree) reduction so results
are both accurate for long sums and bit-identical across runs and worker
counts.
"""
from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionMismatchError

# Leaves of the pairwise reduction tree; small enough that naive in-order
# summation at the leaf contributes negligible rounding.
_PAIRWISE_BLOCK = 32


def pairwise_sum(rows: np.ndarray) -> np.ndarray:
    """Sum `rows` along axis 0 with a deterministic pairwise reduction.

    Accepts shape (n,) or (n, d); returns a scalar array or (d,) vector in
    float64.
    """
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if n == 0:
        raise DataError("cannot sum zero rows")
    if n <= _PAIRWISE_BLOCK:
        return np.add.reduce(rows, axis=0)
    mid = n // 2
    return pairwise_sum(rows[:mid]) + pairwise_sum(rows[mid:])


def row_mean(rows: np.ndarray) -> np.ndarray:
    """Arithmetic mean along axis 0 via `pairwise_sum`."""
    rows = np.asarray(rows, dtype=np.float64)
    return pairwise_sum(rows) / rows.shape[0]


def validate_vector(vector: np.ndarray, dim: int, context: str = "vector") -> np.ndarray:
    """Check length and finiteness; returns the array unchanged."""
    vector = np.asarray(vector)
    if vector.ndim != 1 or vector.shape[0] != dim:
        raise DimensionMismatchError(
            f"{context}: expected dimension {dim}, got shape {vector.shape}"
        )
    if not np.all(np.isfinite(vector)):
        raise DataError(f"{context}: non-finite component")
    return vector


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors in float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DataError("cosine undefined for zero-norm vector")
    return float(np.dot(a, b) / (na * nb))
