"""Progressive curriculum sampler.

Regions are bucketed into ambiguity tiers by quantiles of the z-scored
ambiguity proxy; signal-collapsed regions (bottom ``p_q`` of the z-scored
signal proxy inside their tier) are penalized and demoted to last priority.
The per-tier sampling budget shifts mass from the easy tier to the hard tier
as training progresses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from pica.core import partition_tiers, z_normalize

RATIO_SUM_TOL = 0.011  # admits the two-decimal (0.33, 0.33, 0.33) default


def schedule_alpha(rho: float) -> float:
    """Default schedule: alpha = (2/3) * rho."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"progress rho must lie in [0, 1], got {rho}")
    return 2.0 * rho / 3.0


def target_ratios(base, alpha: float) -> tuple[float, float, float]:
    """Shift ``alpha`` of the sampling mass from the easy to the hard tier and renormalize.

    ``base`` and the result are ordered (easy, medium, hard).
    """
    r_e, r_m, r_h = (float(x) for x in base)
    if min(r_e, r_m, r_h) < 0:
        raise ValueError("base ratios must be non-negative")
    raw = np.array([max(0.0, r_e - alpha), r_m, r_h + alpha])
    total = raw.sum()
    if total <= 0:
        raise ValueError("all target ratios are zero")
    e, m, h = raw / total
    return float(e), float(m), float(h)


@dataclass
class CurriculumConfig:
    K: int = 3
    p_q: float = 0.05
    delta: float = 2.0
    base_ratios: tuple[float, float, float] = (0.33, 0.33, 0.33)
    M_s: int = 128
    schedule: Callable[[float], float] = schedule_alpha
    within_tier: str = "random"

    def __post_init__(self):
        self.base_ratios = tuple(float(x) for x in self.base_ratios)
        if len(self.base_ratios) != 3:
            raise ValueError("base_ratios must be an (easy, medium, hard) triple")
        if min(self.base_ratios) < 0 or abs(sum(self.base_ratios) - 1.0) > RATIO_SUM_TOL:
            raise ValueError(f"base_ratios must be non-negative and sum to 1, got {self.base_ratios}")
        if not 0.0 <= self.p_q < 1.0:
            raise ValueError(f"p_q must lie in [0, 1), got {self.p_q}")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.M_s < 1:
            raise ValueError("M_s must be >= 1")
        if self.within_tier not in ("random", "q_ranked"):
            raise ValueError(f"within_tier must be 'random' or 'q_ranked', got {self.within_tier!r}")


@dataclass
class SamplerOutput:
    """Selected region indices plus bookkeeping.

    Tier-indexed fields are ordered (easy, medium, hard).
    """

    selected: np.ndarray
    per_tier_counts: tuple[int, int, int]
    ratios_used: tuple[float, float, float]
    target_counts: tuple[int, int, int] = (0, 0, 0)
    alpha: float = 0.0
    penalized: np.ndarray | None = None
    tiers: np.ndarray | None = None
    h_hat: np.ndarray | None = None

    @property
    def penalized_selected(self) -> int:
        if self.penalized is None:
            return 0
        return int(self.penalized[self.selected].sum())


def quality_gate(q_hat: np.ndarray, tiers: np.ndarray, K: int, p_q: float) -> np.ndarray:
    """Flag members strictly below their tier's ``p_q`` quantile of q_hat."""
    penalized = np.zeros(len(q_hat), dtype=bool)
    if p_q <= 0:
        return penalized
    for t in range(1, K + 1):
        idx = np.flatnonzero(tiers == t)
        if len(idx):
            cut = np.quantile(q_hat[idx], p_q, method="linear")
            penalized[idx] = q_hat[idx] < cut
    return penalized


def allocate_counts(M_s: int, ratios, pool_sizes) -> list[int]:
    """Floor ``M_s * r`` per tier, then hand the remainder to the hardest tiers with spare members.

    Both inputs and output are ordered (easy, medium, hard).
    """
    counts = [int(np.floor(M_s * r + 1e-12)) for r in ratios]
    remainder = M_s - sum(counts)
    for t in reversed(range(len(counts))):
        if remainder <= 0:
            break
        spare = pool_sizes[t] - counts[t]
        if spare > 0:
            give = min(spare, remainder)
            counts[t] += give
            remainder -= give
    return counts


def _pick(members: np.ndarray, n: int, penalized: np.ndarray, q_hat, mode: str, rng) -> np.ndarray:
    if n >= len(members):
        return members
    clean = members[~penalized[members]]
    flagged = members[penalized[members]]
    if mode == "q_ranked":
        order = lambda m: m[np.argsort(-q_hat[m], kind="stable")]
        return np.concatenate([order(clean), order(flagged)])[:n]
    if n <= len(clean):
        return rng.choice(clean, size=n, replace=False)
    return np.concatenate([clean, rng.choice(flagged, size=n - len(clean), replace=False)])


def sample_curriculum(
    h,
    q,
    rho: float,
    cfg: CurriculumConfig,
    seed: int | np.random.Generator,
    *,
    use_h: bool = True,
    use_q: bool = True,
) -> SamplerOutput:
    """Select up to ``cfg.M_s`` region indices.

    With ``use_h=False`` the tiers come from the signal proxy alone (low q is
    hard) and the quality gate is off; with ``use_q=False`` the gate is off.
    """
    h = np.asarray(h, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if h.shape != q.shape:
        raise ValueError(f"h and q lengths differ: {h.size} vs {q.size}")
    if cfg.K != 3:
        raise ValueError("the three-ratio schedule supports K = 3 only")
    if cfg.M_s < 1:
        raise ValueError("M_s must be >= 1")
    if not (use_h or use_q):
        raise ValueError("at least one of use_h / use_q is required")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    q_hat = z_normalize(q)
    h_hat = z_normalize(h) if use_h else -q_hat
    part = partition_tiers(h_hat, cfg.K)
    tiers = part.assignment
    penalized = quality_gate(q_hat, tiers, cfg.K, cfg.p_q) if (use_h and use_q) else np.zeros(len(h), dtype=bool)
    h_hat = h_hat + cfg.delta * penalized

    alpha = float(cfg.schedule(rho))
    ratios = target_ratios(cfg.base_ratios, alpha)
    # tier K is easy, tier 1 hard
    pools = [np.flatnonzero(tiers == t) for t in (cfg.K, 2, 1)]
    target = [int(np.floor(cfg.M_s * r + 1e-12)) for r in ratios]
    counts = allocate_counts(cfg.M_s, ratios, [len(p) for p in pools])
    picked = [_pick(pool, n, penalized, q_hat, cfg.within_tier, rng) for pool, n in zip(pools, counts)]
    selected = np.concatenate(picked).astype(np.int64)
    return SamplerOutput(
        selected=selected,
        per_tier_counts=tuple(len(p) for p in picked),
        ratios_used=ratios,
        target_counts=tuple(target),
        alpha=alpha,
        penalized=penalized,
        tiers=tiers,
        h_hat=h_hat,
    )


def sample_uniform(n: int, M_s: int, seed: int | np.random.Generator) -> np.ndarray:
    """Baseline selection: a uniform random subset of size ``min(M_s, n)``."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.choice(n, size=min(M_s, n), replace=False).astype(np.int64)
