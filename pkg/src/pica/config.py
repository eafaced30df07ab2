"""Experiment configuration and its ``key = value`` file format.

Files use INI sections (``[world]``, ``[training]``, ``[sampler]``,
``[eval]``, ``[run]``). Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from pica.losses import PSEUDO_WORD_MODES
from pica.sampler import CurriculumConfig
from pica.world import CORRUPTION_KINDS

# arm -> (sas, use_h, use_q)
ARMS = {
    "pica": (True, True, True),
    "uniform": (False, False, False),
    "no_sas": (False, False, False),
    "h_only": (True, True, False),
    "q_only": (True, False, True),
}


class ConfigError(ValueError):
    pass


def resolve_arm(arm: str) -> tuple[bool, bool, bool]:
    """Flags for an arm name; ``+``-joined names must agree (``h_only+no_sas`` does not)."""
    parts = [p.strip() for p in arm.split("+")]
    for p in parts:
        if p not in ARMS:
            raise ConfigError(f"unknown arm {p!r}; expected one of {sorted(ARMS)}")
    flags = {ARMS[p] for p in parts}
    if len(flags) > 1:
        raise ConfigError(f"invalid arm combination {arm!r}")
    return flags.pop()


@dataclass
class WorldConfig:
    n_base: int = 48
    n_novel: int = 17
    d_v: int = 64
    d_t: int = 32
    cluster_noise: float = 0.1
    jitter: float = 0.05


@dataclass
class TrainingConfig:
    iterations: int = 2000
    batch_size: int = 256
    lr: float = 0.1
    momentum: float = 0.9
    lambda_curr: float = 1.0
    queue_capacity: int = 4096
    queue_in_second_term: bool = False


@dataclass
class SamplerConfig:
    arm: str = "pica"
    K: int = 3
    p_q: float = 0.05
    delta: float = 2.0
    base_ratios: tuple[float, float, float] = (0.33, 0.33, 0.33)
    M_s: int = 128
    within_tier: str = "random"
    mixup: bool = False
    pseudo_word_mode: str = "both"

    @property
    def flags(self) -> tuple[bool, bool, bool]:
        return resolve_arm(self.arm)

    def curriculum(self) -> CurriculumConfig:
        return CurriculumConfig(
            K=self.K,
            p_q=self.p_q,
            delta=self.delta,
            base_ratios=self.base_ratios,
            M_s=self.M_s,
            within_tier=self.within_tier,
        )


@dataclass
class EvalConfig:
    n_regions: int = 1000
    domains: tuple[str, ...] = CORRUPTION_KINDS
    severities: tuple[int, ...] = (1, 2, 3, 4, 5)
    split: str = "novel"
    delta_h_domain: str = "additive_noise"
    delta_h_severity: int = 3


@dataclass
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        s, t, w, e = self.sampler, self.training, self.world, self.eval
        resolve_arm(s.arm)
        if s.pseudo_word_mode not in PSEUDO_WORD_MODES:
            raise ConfigError(f"pseudo_word_mode must be one of {PSEUDO_WORD_MODES}")
        if t.iterations < 0 or t.batch_size < 2:
            raise ConfigError("need iterations >= 0 and batch_size >= 2")
        if s.M_s < 2:
            raise ConfigError("M_s must be >= 2 for a contrastive loss")
        if s.flags[0] and t.batch_size < s.K:
            raise ConfigError("batch_size must be at least K")
        if t.queue_capacity < 0 or t.lr <= 0 or not 0 <= t.momentum < 1:
            raise ConfigError("invalid optimizer or queue settings")
        if w.n_base < 2:
            raise ConfigError("grounding needs at least two base categories")
        for d in e.domains:
            if d not in CORRUPTION_KINDS:
                raise ConfigError(f"unknown evaluation domain {d!r}")
        if any(not 1 <= v <= 5 for v in e.severities) or not e.severities:
            raise ConfigError("severities must be a non-empty subset of 1..5")
        if e.split not in ("base", "novel", "all"):
            raise ConfigError(f"unknown split {e.split!r}")
        if e.delta_h_domain not in CORRUPTION_KINDS or not 1 <= e.delta_h_severity <= 5:
            raise ConfigError("invalid delta_h domain or severity")
        try:
            s.curriculum()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with per-section overrides, e.g. ``replace(sampler={"arm": "uniform"})``."""
        kw = {}
        for name, changes in sections.items():
            if name == "seed":
                kw["seed"] = changes
            else:
                kw[name] = dataclasses.replace(getattr(self, name), **changes)
        return dataclasses.replace(self, **kw)


SECTIONS = {"world": WorldConfig, "training": TrainingConfig, "sampler": SamplerConfig, "eval": EvalConfig}


def _parse_value(raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        items = [x.strip() for x in raw.replace("(", "").replace(")", "").split(",") if x.strip()]
        if current and isinstance(current[0], str):
            return tuple(items)
        if current and isinstance(current[0], int):
            return tuple(int(x) for x in items)
        return tuple(float(x) for x in items)
    return raw


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, empty_lines_in_values=False)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section == "run":
            for key, raw in parser.items(section):
                if key != "seed":
                    raise ConfigError(f"unknown key [run] {key}")
                cfg.seed = int(raw)
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        obj = getattr(cfg, section)
        names = {f.name for f in dataclasses.fields(obj)}
        for key, raw in parser.items(section):
            if key not in names:
                raise ConfigError(f"unknown key [{section}] {key}")
            try:
                setattr(obj, key, _parse_value(raw, getattr(obj, key)))
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_format_value(getattr(obj, f.name))}")
        lines.append("")
    lines += ["[run]", f"seed = {cfg.seed}", ""]
    return "\n".join(lines)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(format_config(cfg))
