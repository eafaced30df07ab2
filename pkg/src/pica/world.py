"""Synthetic embedding-space analog of open-vocabulary detection under domain shift.

Categories carry a unit text prototype and a visual anchor; a fixed linear map
(``gt_map``) carries visual anchors onto their prototypes and plays the role of
a frozen joint vision-language encoder. Regions are noisy draws around the
anchors. Target domains are parametric feature-space corruptions, each with
five severity levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from pica.core import as_vector

BASE, NOVEL = "base", "novel"
SPLITS = (BASE, NOVEL)

CORRUPTION_KINDS = (
    "additive_noise",
    "subspace_rotation",
    "contrast_scale",
    "coordinate_dropout",
)
MAX_SEVERITY = 5

DEFAULT_CLUSTER_NOISE = 0.1
DEFAULT_JITTER = 0.05

# Per-kind severity ladders, one value per level 1..5.
#   additive_noise: noise norm relative to a unit anchor
#   subspace_rotation: rotation angle in units of pi/2 inside the rotated subspace
#   contrast_scale: interpolation weight toward the domain's flat feature
#   coordinate_dropout: probability of zeroing each coordinate
DEFAULT_SEVERITY_SCALES = {
    "additive_noise": (0.15, 0.3, 0.45, 0.6, 0.75),
    "subspace_rotation": (0.15, 0.3, 0.45, 0.6, 0.75),
    "contrast_scale": (0.15, 0.3, 0.45, 0.6, 0.75),
    "coordinate_dropout": (0.1, 0.2, 0.3, 0.4, 0.5),
}


def derive_rng(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for one concern of a seeded computation."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, tags)]))


@dataclass(frozen=True)
class CategorySpec:
    id: int
    split: str
    text_proto: np.ndarray
    visual_anchor: np.ndarray


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity_scale: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        scale = tuple(float(s) for s in self.severity_scale)
        if len(scale) != MAX_SEVERITY:
            raise ValueError(f"severity_scale needs {MAX_SEVERITY} levels, got {len(scale)}")
        if any(b <= a for a, b in zip(scale, scale[1:])):
            raise ValueError("severity_scale must be strictly increasing")
        object.__setattr__(self, "severity_scale", scale)

    @classmethod
    def default(cls, kind: str) -> "CorruptionSpec":
        return cls(kind, DEFAULT_SEVERITY_SCALES[kind])

    @property
    def domain_id(self) -> int:
        return CORRUPTION_KINDS.index(self.kind) + 1


def default_corruptions() -> list[CorruptionSpec]:
    return [CorruptionSpec.default(k) for k in CORRUPTION_KINDS]


@dataclass
class WorldSpec:
    categories: list[CategorySpec]
    gt_map: np.ndarray  # (d_t, d_v)
    d_v: int
    d_t: int
    cluster_noise: float = DEFAULT_CLUSTER_NOISE
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def ids(self, split: str | None = None) -> np.ndarray:
        return np.array([c.id for c in self.categories if split is None or c.split == split], dtype=np.int64)

    @property
    def text_protos(self) -> np.ndarray:
        if "protos" not in self._cache:
            self._cache["protos"] = np.stack([c.text_proto for c in self.categories])
        return self._cache["protos"]

    @property
    def anchors(self) -> np.ndarray:
        if "anchors" not in self._cache:
            self._cache["anchors"] = np.stack([c.visual_anchor for c in self.categories])
        return self._cache["anchors"]

    @property
    def is_novel(self) -> np.ndarray:
        if "novel" not in self._cache:
            self._cache["novel"] = np.array([c.split == NOVEL for c in self.categories])
        return self._cache["novel"]

    def to_text(self, F) -> np.ndarray:
        """Joint-space (text-space) view of visual features under the frozen map."""
        return np.asarray(F, dtype=np.float64) @ self.gt_map.T

    def __eq__(self, other):
        if not isinstance(other, WorldSpec):
            return NotImplemented
        return (
            self.d_v == other.d_v
            and self.d_t == other.d_t
            and self.cluster_noise == other.cluster_noise
            and self.seed == other.seed
            and np.array_equal(self.gt_map, other.gt_map)
            and len(self.categories) == len(other.categories)
            and all(
                a.id == b.id
                and a.split == b.split
                and np.array_equal(a.text_proto, b.text_proto)
                and np.array_equal(a.visual_anchor, b.visual_anchor)
                for a, b in zip(self.categories, other.categories)
            )
        )


def _orthonormal_rows(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """A (rows, cols) matrix with orthonormal rows (or columns when rows > cols)."""
    M = rng.standard_normal((max(rows, cols), min(rows, cols)))
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    return Q.T if rows <= cols else Q


def generate_world(
    n_base: int,
    n_novel: int,
    d_v: int,
    d_t: int,
    seed: int,
    cluster_noise: float = DEFAULT_CLUSTER_NOISE,
) -> WorldSpec:
    """Build a world with ``n_base + n_novel`` categories.

    Visual anchors are the pullbacks ``gt_map.T @ t_c`` of unit text prototypes,
    so ``gt_map`` carries every anchor exactly onto its prototype when
    ``d_t <= d_v``.
    """
    if n_base < 1 or n_novel < 1:
        raise ValueError("need at least one base and one novel category")
    if d_v < 2 or d_t < 2:
        raise ValueError(f"dimensions must be >= 2, got d_v={d_v}, d_t={d_t}")
    if cluster_noise < 0:
        raise ValueError("cluster_noise must be non-negative")
    rng = derive_rng(seed, 0)
    n = n_base + n_novel
    protos = rng.standard_normal((n, d_t))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)
    gt_map = _orthonormal_rows(rng, d_t, d_v)
    anchors = protos @ gt_map
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
    splits = [BASE] * n_base + [NOVEL] * n_novel
    categories = [
        CategorySpec(id=i, split=splits[i], text_proto=protos[i], visual_anchor=anchors[i]) for i in range(n)
    ]
    return WorldSpec(categories, gt_map, d_v, d_t, float(cluster_noise), int(seed))


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class RegionSample:
    """One region.

    ``f_clean`` is the un-augmented feature as observed in the region's domain
    (for a corrupted domain it already carries the corruption); ``f_aug`` is
    its augmented view.
    """

    id: int
    split: str
    f_clean: np.ndarray
    f_aug: np.ndarray
    category: int | None
    domain_id: int = 0
    severity: int = 0


@dataclass
class RegionBatch:
    """Array form of a region set; ``labels`` holds -1 where the label is hidden."""

    ids: np.ndarray
    categories: np.ndarray  # true category, always present
    labels: np.ndarray
    novel: np.ndarray
    f: np.ndarray
    f_aug: np.ndarray
    domain_id: int = 0
    severity: int = 0

    def __len__(self) -> int:
        return len(self.ids)

    def to_samples(self) -> list[RegionSample]:
        return [
            RegionSample(
                id=int(self.ids[i]),
                split=NOVEL if self.novel[i] else BASE,
                f_clean=self.f[i],
                f_aug=self.f_aug[i],
                category=int(self.labels[i]) if self.labels[i] >= 0 else None,
                domain_id=self.domain_id,
                severity=self.severity,
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_samples(cls, samples: Sequence[RegionSample]) -> "RegionBatch":
        if not samples:
            raise ValueError("empty region set")
        domains = {s.domain_id for s in samples}
        sevs = {s.severity for s in samples}
        if len(domains) != 1 or len(sevs) != 1:
            raise ValueError("a RegionBatch holds a single (domain, severity) cell")
        labels = np.array([-1 if s.category is None else s.category for s in samples], dtype=np.int64)
        return cls(
            ids=np.array([s.id for s in samples], dtype=np.int64),
            categories=labels.copy(),
            labels=labels,
            novel=np.array([s.split == NOVEL for s in samples]),
            f=np.stack([s.f_clean for s in samples]),
            f_aug=np.stack([s.f_aug for s in samples]),
            domain_id=domains.pop(),
            severity=sevs.pop(),
        )


def augment(f, seed: int, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """Augmented view: a random gain in [0.9, 1.1] plus isotropic jitter.

    ``jitter`` is the expected jitter norm relative to a unit feature.
    """
    f = as_vector(f, "f")
    return augment_batch(f[None, :], derive_rng(seed, 2), jitter)[0]


def augment_batch(F: np.ndarray, rng: np.random.Generator, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    n, d = F.shape
    gain = rng.uniform(0.9, 1.1, size=(n, 1))
    return gain * F + rng.standard_normal((n, d)) * (jitter / np.sqrt(d))


def _domain_params(world: WorldSpec, kind: str) -> dict:
    key = ("corruption", kind)
    if key in world._cache:
        return world._cache[key]
    rng = derive_rng(world.seed, 100 + CORRUPTION_KINDS.index(kind))
    d = world.d_v
    params: dict = {}
    if kind == "subspace_rotation":
        k = max(1, d // 4)
        params["basis"] = _orthonormal_rows(rng, 2 * k, d).reshape(k, 2, d) if 2 * k <= d else None
    elif kind == "contrast_scale":
        flat = rng.standard_normal(d)
        params["flat"] = flat / np.linalg.norm(flat)
    world._cache[key] = params
    return params


def apply_corruption(
    world: WorldSpec, F: np.ndarray, corruption: CorruptionSpec, severity: int, rng: np.random.Generator
) -> np.ndarray:
    """Apply one corruption at ``severity`` (1..5) to the rows of F."""
    if not 1 <= severity <= MAX_SEVERITY:
        raise ValueError(f"severity must be in 1..{MAX_SEVERITY}, got {severity}")
    s = corruption.severity_scale[severity - 1]
    n, d = F.shape
    kind = corruption.kind
    if kind == "additive_noise":
        return F + rng.standard_normal((n, d)) * (s / np.sqrt(d))
    if kind == "subspace_rotation":
        basis = _domain_params(world, kind)["basis"]
        theta = s * np.pi / 2
        out = F.copy()
        for u, v in basis:
            a, b = F @ u, F @ v
            out += np.outer(a * (np.cos(theta) - 1) - b * np.sin(theta), u)
            out += np.outer(a * np.sin(theta) + b * (np.cos(theta) - 1), v)
        return out
    if kind == "contrast_scale":
        flat = _domain_params(world, kind)["flat"]
        norms = np.linalg.norm(F, axis=1, keepdims=True)
        return (1.0 - s) * F + s * norms * flat
    if kind == "coordinate_dropout":
        return F * (rng.random((n, d)) >= s)
    raise ValueError(f"unknown corruption kind {kind!r}")


def sample_batch(
    world: WorldSpec,
    n: int,
    corruption: CorruptionSpec | None = None,
    severity: int = 0,
    seed: int = 0,
    mode: str = "train",
    jitter: float = DEFAULT_JITTER,
    categories: np.ndarray | None = None,
) -> RegionBatch:
    """Array-valued core of :func:`sample_regions`.

    The underlying clean draws depend only on ``seed``, so the same seed under
    different corruptions yields paired views of the same regions.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 regions, got {n}")
    if not 0 <= severity <= MAX_SEVERITY:
        raise ValueError(f"severity must be in 0..{MAX_SEVERITY}, got {severity}")
    if (severity == 0) != (corruption is None):
        raise ValueError("severity 0 iff no corruption")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    rng = derive_rng(seed, 1)
    if categories is None:
        cats = rng.integers(0, world.n_categories, size=n)
    else:
        cats = np.asarray(categories, dtype=np.int64)
        if cats.shape != (n,):
            raise ValueError("categories must have length n")
    noise = rng.standard_normal((n, world.d_v)) * (world.cluster_noise / np.sqrt(world.d_v))
    F = world.anchors[cats] + noise
    if corruption is not None:
        F = apply_corruption(world, F, corruption, severity, derive_rng(seed, 3, corruption.domain_id, severity))
    F_aug = augment_batch(F, derive_rng(seed, 2, 0 if corruption is None else corruption.domain_id, severity), jitter)
    novel = world.is_novel[cats]
    labels = cats.copy()
    if mode == "train":
        labels[novel] = -1
    return RegionBatch(
        ids=np.arange(n, dtype=np.int64),
        categories=cats,
        labels=labels,
        novel=novel,
        f=F,
        f_aug=F_aug,
        domain_id=0 if corruption is None else corruption.domain_id,
        severity=severity,
    )


def sample_regions(
    world: WorldSpec,
    n: int,
    corruption: CorruptionSpec | None = None,
    severity: int = 0,
    seed: int = 0,
    mode: str = "train",
) -> list[RegionSample]:
    """Draw ``n`` regions, optionally corrupted. Labels of novel regions are hidden in train mode."""
    return sample_batch(world, n, corruption, severity, seed, mode).to_samples()


# ---------------------------------------------------------------------------
# text serialization


def _fmt(values: Iterable[float]) -> str:
    return " ".join(repr(float(v)) for v in values)


def _floats(tokens: Sequence[str]) -> np.ndarray:
    return np.array([float(t) for t in tokens], dtype=np.float64)


def save_world(world: WorldSpec, path) -> None:
    lines = [
        "# pica-world v1",
        f"d_v {world.d_v}",
        f"d_t {world.d_t}",
        f"n_categories {world.n_categories}",
        f"cluster_noise {world.cluster_noise!r}",
        f"seed {world.seed}",
        "gt_map",
    ]
    lines += [_fmt(row) for row in world.gt_map]
    lines.append("categories")
    for c in world.categories:
        lines.append(f"{c.id} {c.split} {_fmt(c.text_proto)} {_fmt(c.visual_anchor)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _read_header(lines: list[str], keys: Sequence[str]) -> dict[str, str]:
    out = {}
    for key, line in zip(keys, lines):
        name, _, value = line.partition(" ")
        if name != key:
            raise ValueError(f"expected header field {key!r}, found {line!r}")
        out[key] = value
    return out


def load_world(path) -> WorldSpec:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "# pica-world v1":
        raise ValueError(f"{path}: not a pica world file")
    head = _read_header(lines[1:6], ["d_v", "d_t", "n_categories", "cluster_noise", "seed"])
    d_v, d_t, n = int(head["d_v"]), int(head["d_t"]), int(head["n_categories"])
    if lines[6] != "gt_map":
        raise ValueError(f"{path}: missing gt_map section")
    gt_map = np.stack([_floats(lines[7 + i].split()) for i in range(d_t)])
    pos = 7 + d_t
    if lines[pos] != "categories":
        raise ValueError(f"{path}: missing categories section")
    cats = []
    for line in lines[pos + 1 : pos + 1 + n]:
        tok = line.split()
        if len(tok) != 2 + d_t + d_v:
            raise ValueError(f"{path}: malformed category record")
        cats.append(CategorySpec(int(tok[0]), tok[1], _floats(tok[2 : 2 + d_t]), _floats(tok[2 + d_t :])))
    return WorldSpec(cats, gt_map, d_v, d_t, float(head["cluster_noise"]), int(head["seed"]))


def save_regions(regions: Sequence[RegionSample], path) -> None:
    """One record per line: id split domain severity label|- f_clean... f_aug..."""
    if not regions:
        raise ValueError("no regions to save")
    d_v = len(regions[0].f_clean)
    lines = ["# pica-regions v1", f"d_v {d_v}", f"count {len(regions)}"]
    for r in regions:
        label = "-" if r.category is None else str(r.category)
        lines.append(f"{r.id} {r.split} {r.domain_id} {r.severity} {label} {_fmt(r.f_clean)} {_fmt(r.f_aug)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_regions(path) -> list[RegionSample]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "# pica-regions v1":
        raise ValueError(f"{path}: not a pica regions file")
    head = _read_header(lines[1:3], ["d_v", "count"])
    d_v, count = int(head["d_v"]), int(head["count"])
    out = []
    for line in lines[3 : 3 + count]:
        tok = line.split()
        if len(tok) != 5 + 2 * d_v:
            raise ValueError(f"{path}: malformed region record")
        out.append(
            RegionSample(
                id=int(tok[0]),
                split=tok[1],
                domain_id=int(tok[2]),
                severity=int(tok[3]),
                category=None if tok[4] == "-" else int(tok[4]),
                f_clean=_floats(tok[5 : 5 + d_v]),
                f_aug=_floats(tok[5 + d_v :]),
            )
        )
    if len(out) != count:
        raise ValueError(f"{path}: expected {count} records, found {len(out)}")
    return out
