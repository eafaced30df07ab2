"""Vector and batch-statistics primitives shared across the package."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZERO_VARIANCE_EPS = 1e-12


class DegenerateInputError(ValueError):
    """Raised when an input has no direction (zero norm) or is otherwise unusable."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def cosine_sim(a, b) -> float:
    """Cosine similarity of two equal-length vectors.

    Raises DegenerateInputError if either vector has zero norm.
    """
    a = as_vector(a, "a")
    b = as_vector(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity undefined for a zero-norm vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def row_normalize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (unit rows, row norms); zero rows raise DegenerateInputError."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt(np.einsum("...i,...i->...", X, X))
    if np.any(norms == 0.0):
        raise DegenerateInputError("zero-norm row in cosine computation")
    return X / norms[..., None], norms


def cosine_matrix(A, B) -> np.ndarray:
    """Pairwise cosine similarities between the rows of A (n, d) and B (m, d)."""
    A_hat, _ = row_normalize(np.atleast_2d(A))
    B_hat, _ = row_normalize(np.atleast_2d(B))
    if A_hat.shape[1] != B_hat.shape[1]:
        raise ValueError(f"dimension mismatch: {A_hat.shape[1]} vs {B_hat.shape[1]}")
    return np.clip(A_hat @ B_hat.T, -1.0, 1.0)


def z_normalize(values) -> np.ndarray:
    """Standardize to zero mean and unit population standard deviation.

    Inputs whose standard deviation is at most 1e-12 map to all zeros so that
    degenerate batches still flow through the sampler.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("z_normalize needs at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("z_normalize input contains non-finite values")
    centered = v - v.mean()
    std = np.sqrt(np.mean(centered**2))
    if std <= ZERO_VARIANCE_EPS:
        return np.zeros_like(v)
    return centered / std


@dataclass(frozen=True)
class TierPartition:
    """Quantile buckets of a score vector.

    ``assignment[i]`` is the 1-based tier of element ``i``; tier 1 holds the
    highest scores (hardest) and tier K the lowest (easiest).
    """

    edges: np.ndarray
    assignment: np.ndarray

    @property
    def K(self) -> int:
        return len(self.edges) - 1

    def members(self, tier: int) -> np.ndarray:
        if not 1 <= tier <= self.K:
            raise ValueError(f"tier must be in 1..{self.K}, got {tier}")
        return np.flatnonzero(self.assignment == tier)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.assignment == t)) for t in range(1, self.K + 1)]


def partition_tiers(scores, K: int) -> TierPartition:
    """Split scores into K tiers at the linearly interpolated (0, 1/K, ..., 1) quantiles.

    Intervals are half-open ``[e_j, e_{j+1})`` with the top interval closed, so a
    score sitting exactly on an inner edge goes to the harder tier.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if s.size < K:
        raise ValueError(f"need at least K={K} scores, got {s.size}")
    edges = np.quantile(s, np.linspace(0.0, 1.0, K + 1), method="linear")
    # ascending interval index 0..K-1; interval K-1 is the hardest tier
    interval = np.searchsorted(edges[1:-1], s, side="right")
    return TierPartition(edges=edges, assignment=(K - interval).astype(np.int64))
