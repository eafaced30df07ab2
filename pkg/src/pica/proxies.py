"""Signal-strength and ambiguity proxies against in-batch and queued negatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pica.core import as_vector, cosine_matrix, cosine_sim, row_normalize

DEFAULT_QUEUE_CAPACITY = 4096


@dataclass(frozen=True)
class NegativePool:
    """Negative candidates: the current batch's pseudo-words plus a FIFO memory.

    ``memory`` rows are ordered oldest first.
    """

    in_batch: np.ndarray
    memory: np.ndarray
    capacity: int = DEFAULT_QUEUE_CAPACITY

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("queue capacity must be non-negative")
        if len(self.memory) > self.capacity:
            raise ValueError("memory exceeds capacity")

    @classmethod
    def empty(cls, d_t: int, capacity: int = DEFAULT_QUEUE_CAPACITY) -> "NegativePool":
        return cls(np.zeros((0, d_t)), np.zeros((0, d_t)), capacity)

    @property
    def d_t(self) -> int:
        return self.memory.shape[1]

    def with_batch(self, in_batch) -> "NegativePool":
        in_batch = np.atleast_2d(np.asarray(in_batch, dtype=np.float64))
        if in_batch.size and in_batch.shape[1] != self.d_t:
            raise ValueError("in-batch dimension does not match the memory")
        return NegativePool(in_batch, self.memory, self.capacity)


@dataclass(frozen=True)
class ProxyScores:
    """Per-region proxies, stored as parallel arrays in input order."""

    s_pos: np.ndarray
    s_neg: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return self.s_pos

    @property
    def h(self) -> np.ndarray:
        return self.s_neg - self.s_pos

    def __len__(self) -> int:
        return len(self.s_pos)


def queue_push(pool: NegativePool, items) -> NegativePool:
    """Append items in order, evicting the oldest entries beyond capacity."""
    items = np.asarray(items, dtype=np.float64)
    if items.size == 0:
        return pool
    items = np.atleast_2d(items)
    if items.shape[1] != pool.d_t:
        raise ValueError(f"item dimension {items.shape[1]} does not match queue d_t={pool.d_t}")
    if pool.capacity == 0:
        return pool
    memory = np.concatenate([pool.memory, items])[-pool.capacity :]
    return NegativePool(pool.in_batch, memory, pool.capacity)


def positive_score(f, w) -> float:
    """Cosine between a region's text-space feature and its own pseudo-word."""
    return cosine_sim(f, w)


def hardest_negative(anchor, pool: NegativePool, exclude_id: int | None = None) -> float:
    """Max cosine between ``anchor`` and any pool entry, skipping ``in_batch[exclude_id]``."""
    anchor = as_vector(anchor, "anchor")
    keep = np.ones(len(pool.in_batch), dtype=bool)
    if exclude_id is not None and 0 <= exclude_id < len(keep):
        keep[exclude_id] = False
    cands = [c for c in (pool.in_batch[keep], pool.memory) if len(c)]
    if not cands:
        raise ValueError("negative pool is empty after exclusion; seed the memory queue")
    return float(cosine_matrix(anchor, np.concatenate(cands)).max())


def hardest_negatives(anchors: np.ndarray, pool: NegativePool) -> np.ndarray:
    """Vectorized hardest negative for a batch whose own pseudo-words are ``pool.in_batch``."""
    n = len(anchors)
    if len(pool.in_batch) != n:
        raise ValueError("in-batch pseudo-words must align one-to-one with anchors")
    if n < 2 and len(pool.memory) == 0:
        raise ValueError("negative pool is empty after exclusion; seed the memory queue")
    a_hat, _ = row_normalize(anchors)
    cands = np.concatenate([pool.in_batch, pool.memory]) if len(pool.memory) else pool.in_batch
    c_hat, _ = row_normalize(cands)
    S = a_hat @ c_hat.T
    S[np.arange(n), np.arange(n)] = -np.inf
    return np.clip(S.max(axis=1), -1.0, 1.0)


def compute_proxies(anchors, w, pool: NegativePool) -> ProxyScores:
    """Signal strength q = s+ and ambiguity h = s- - s+ for every region.

    ``anchors`` are the regions' text-space features; ``w`` their pseudo-words.
    The pool's in-batch set is replaced by ``w`` so each region excludes only
    its own prototype.
    """
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    if anchors.shape != w.shape:
        raise ValueError(f"anchors {anchors.shape} and pseudo-words {w.shape} differ in shape")
    a_hat, _ = row_normalize(anchors)
    w_hat, _ = row_normalize(w)
    s_pos = np.einsum("ij,ij->i", a_hat, w_hat)
    s_neg = hardest_negatives(anchors, pool.with_batch(w))
    return ProxyScores(np.clip(s_pos, -1.0, 1.0), s_neg)
