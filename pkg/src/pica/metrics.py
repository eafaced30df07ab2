"""Evaluation metrics: hierarchical domain averaging, alignment invariance, gradient
consistency, ambiguity stability, and top-1 prototype retrieval."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pica.core import DegenerateInputError, cosine_sim, row_normalize
from pica.proxies import ProxyScores


def domain_mean(scores: Sequence[float]) -> float:
    """Mean over the severity levels of one domain."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("domain has no severity scores")
    return float(s.mean())


def overall_mean(domain_means: Sequence[float]) -> float:
    """Mean over domains of their per-domain means."""
    s = np.asarray(domain_means, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no domains to average")
    return float(s.mean())


def ai_gap(logits_clean, logits_shifted) -> float:
    """One minus the cosine between a region's clean and shifted category-logit vectors."""
    a = np.asarray(logits_clean, dtype=np.float64)
    b = np.asarray(logits_shifted, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("logit vectors must share a length C >= 2")
    return float(ai_gaps(a[None, :], b[None, :])[0])


def ai_gaps(logits_clean: np.ndarray, logits_shifted: np.ndarray) -> np.ndarray:
    """Row-wise :func:`ai_gap` for (n, C) logit matrices.

    Uses 1 - cos(a, b) = |a_hat - b_hat|^2 / 2, which avoids cancellation for
    nearly identical rows and is exactly 0 for identical ones.
    """
    a_hat, _ = row_normalize(logits_clean)
    b_hat, _ = row_normalize(logits_shifted)
    return np.clip(0.5 * np.sum((a_hat - b_hat) ** 2, axis=1), 0.0, 2.0)


def gcs(g_t, g_prev) -> float | None:
    """Cosine between consecutive flattened gradients; None if either is zero."""
    try:
        return cosine_sim(g_t, g_prev)
    except DegenerateInputError:
        return None


@dataclass(frozen=True)
class StabilityRecord:
    region_id: int
    q_clean: float
    h_clean: float
    h_corrupted: float
    delta_h: float


def delta_h(
    ids_clean: Sequence[int],
    clean: ProxyScores,
    ids_corrupted: Sequence[int],
    corrupted: ProxyScores,
) -> list[StabilityRecord]:
    """Per-region ambiguity increase from the clean to the corrupted view, matched by id."""
    ids_clean = [int(i) for i in ids_clean]
    pos = {rid: k for k, rid in enumerate(int(i) for i in ids_corrupted)}
    if len(pos) != len(ids_clean) or set(pos) != set(ids_clean):
        raise ValueError("clean and corrupted region ids do not match")
    h_c, h_x, q_c = clean.h, corrupted.h, clean.q
    out = []
    for k, rid in enumerate(ids_clean):
        hc, hx = float(h_c[k]), float(h_x[pos[rid]])
        out.append(StabilityRecord(rid, float(q_c[k]), hc, hx, hx - hc))
    return out


def category_logits(embeddings: np.ndarray, text_protos: np.ndarray) -> np.ndarray:
    """Cosine similarity of every embedding to every category prototype, shape (n, C)."""
    e_hat, _ = row_normalize(np.atleast_2d(embeddings))
    p_hat, _ = row_normalize(np.atleast_2d(text_protos))
    return e_hat @ p_hat.T


def novel_retrieval_score(
    embeddings: np.ndarray,
    labels: np.ndarray,
    text_protos: np.ndarray,
    novel_mask: np.ndarray | None = None,
    split_filter: str = "novel",
) -> float:
    """Top-1 prototype retrieval accuracy in percent.

    ``embeddings`` are region embeddings in text space, ``labels`` index rows of
    ``text_protos``. Ties in the argmax go to the lowest category id.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if split_filter == "all":
        keep = np.ones(len(labels), dtype=bool)
    elif split_filter in ("base", "novel"):
        if novel_mask is None:
            raise ValueError("split filtering needs a novel mask")
        keep = np.asarray(novel_mask, dtype=bool)
        keep = keep if split_filter == "novel" else ~keep
    else:
        raise ValueError(f"unknown split filter {split_filter!r}")
    if not keep.any():
        raise ValueError("no regions left after split filtering")
    logits = category_logits(np.atleast_2d(embeddings)[keep], text_protos)
    pred = np.argmax(logits, axis=1)  # first maximum = lowest id
    return float(100.0 * np.mean(pred == labels[keep]))
