"""Linear image-to-text projection head producing pseudo-word prototypes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

TAU_INIT = 0.07
TAU_MIN = 0.01
TAU_MAX = 1.0


@dataclass
class ProjectionHead:
    W: np.ndarray  # (d_t, d_v)
    b: np.ndarray  # (d_t,)
    tau: float = TAU_INIT

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError(f"shape mismatch: W {self.W.shape}, b {self.b.shape}")
        self.tau = float(np.clip(self.tau, TAU_MIN, TAU_MAX))

    @property
    def d_v(self) -> int:
        return self.W.shape[1]

    @property
    def d_t(self) -> int:
        return self.W.shape[0]

    @property
    def log_tau(self) -> float:
        return float(np.log(self.tau))

    def set_log_tau(self, value: float) -> None:
        self.tau = float(np.clip(np.exp(value), TAU_MIN, TAU_MAX))

    def copy(self) -> "ProjectionHead":
        return ProjectionHead(self.W.copy(), self.b.copy(), self.tau)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b, [self.log_tau]])

    def __eq__(self, other):
        if not isinstance(other, ProjectionHead):
            return NotImplemented
        return np.array_equal(self.W, other.W) and np.array_equal(self.b, other.b) and self.tau == other.tau


def init_head(d_v: int, d_t: int, seed: int) -> ProjectionHead:
    """Gaussian W with std 1/sqrt(d_v), zero bias, tau = 0.07."""
    if d_v < 1 or d_t < 1:
        raise ValueError("dimensions must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    W = rng.standard_normal((d_t, d_v)) / np.sqrt(d_v)
    return ProjectionHead(W, np.zeros(d_t), TAU_INIT)


def project(head: ProjectionHead, f) -> np.ndarray:
    """Pseudo-word(s) ``W f + b``; accepts a single vector or a (n, d_v) batch."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != head.d_v:
        raise ValueError(f"feature dimension {f.shape[-1]} does not match head d_v={head.d_v}")
    return f @ head.W.T + head.b


def project_pair(head: ProjectionHead, f_clean, f_aug) -> tuple[np.ndarray, np.ndarray]:
    return project(head, f_clean), project(head, f_aug)


def save_head(head: ProjectionHead, path) -> None:
    lines = [
        "# pica-head v1",
        f"d_v {head.d_v}",
        f"d_t {head.d_t}",
        f"tau {head.tau!r}",
        "b " + " ".join(repr(float(v)) for v in head.b),
        "W",
    ]
    lines += [" ".join(repr(float(v)) for v in row) for row in head.W]
    Path(path).write_text("\n".join(lines) + "\n")


def load_head(path) -> ProjectionHead:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "# pica-head v1":
        raise ValueError(f"{path}: not a pica head file")
    fields = dict(line.split(" ", 1) for line in lines[1:4])
    d_v, d_t = int(fields["d_v"]), int(fields["d_t"])
    if not lines[4].startswith("b ") or lines[5] != "W":
        raise ValueError(f"{path}: malformed head file")
    b = np.array([float(t) for t in lines[4].split()[1:]])
    W = np.array([[float(t) for t in line.split()] for line in lines[6 : 6 + d_t]])
    if W.shape != (d_t, d_v) or b.shape != (d_t,):
        raise ValueError(f"{path}: parameter shapes disagree with header")
    head = ProjectionHead(W, b, float(fields["tau"]))
    return head
