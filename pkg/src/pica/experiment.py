"""End-to-end runs: training with a chosen sampler arm, evaluation across
corrupted domains, and multi-seed comparison suites."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from pica.config import ExperimentConfig, format_config, load_config, save_config
from pica.head import ProjectionHead, init_head, load_head, save_head
from pica.losses import LossInputs, objective
from pica.metrics import (
    ai_gaps,
    category_logits,
    delta_h,
    domain_mean,
    gcs,
    novel_retrieval_score,
    overall_mean,
    StabilityRecord,
)
from pica.proxies import NegativePool, compute_proxies, queue_push
from pica.sampler import sample_curriculum, sample_uniform
from pica.world import CORRUPTION_KINDS, CorruptionSpec, WorldSpec, derive_rng, generate_world, sample_batch

log = logging.getLogger(__name__)

# RNG stream tags, one per concern
WORLD, BATCHES, SAMPLER, MIXUP, HEAD, EVAL = range(6)

LOG_COLUMNS = (
    "iteration",
    "rho",
    "alpha",
    "r_easy",
    "r_medium",
    "r_hard",
    "n_easy",
    "n_medium",
    "n_hard",
    "n_selected",
    "penalized_selected",
    "l_ground",
    "l_curr",
    "l_total",
    "tau",
    "grad_norm",
    "gcs",
    "mean_q",
    "mean_h",
)


@dataclass
class MetricReport:
    seed: int
    arm: str
    clean_retrieval: float
    retrieval: dict[str, dict[int, float]]
    ai_gap: dict[str, dict[int, float]]
    retrieval_domain_means: dict[str, float]
    ai_gap_domain_means: dict[str, float]
    retrieval_overall: float
    ai_gap_overall: float
    stability: list[StabilityRecord] = field(default_factory=list)
    stable_fraction: float = float("nan")
    mean_gcs_first_half: float = float("nan")

    def cells(self):
        for d in self.retrieval:
            for s in self.retrieval[d]:
                yield d, s, self.retrieval[d][s], self.ai_gap[d][s]


@dataclass
class RunArtifact:
    config: ExperimentConfig
    head: ProjectionHead
    log: list[dict]
    report: MetricReport | None = None
    duration_s: float = 0.0


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


def build_world(cfg: ExperimentConfig) -> WorldSpec:
    w = cfg.world
    return generate_world(w.n_base, w.n_novel, w.d_v, w.d_t, seed=cfg.seed, cluster_noise=w.cluster_noise)


def _seed_stream(seed: int, tag: int) -> np.random.Generator:
    return derive_rng(seed, 1000 + tag)


def _mixup(F: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(F)
    beta = rng.uniform(0.6, 1.0, size=(n, 1))
    partner = rng.permutation(n)
    return beta * F + (1.0 - beta) * F[partner]


def run_training(cfg: ExperimentConfig, world: WorldSpec | None = None) -> RunArtifact:
    """Train a projection head for ``cfg.training.iterations`` steps."""
    cfg.validate()
    t0 = time.perf_counter()
    tr, sc = cfg.training, cfg.sampler
    sas, use_h, use_q = sc.flags
    curr_cfg = sc.curriculum()
    world = world or build_world(cfg)
    head = init_head(world.d_v, world.d_t, seed=int(derive_rng(cfg.seed, 1000 + HEAD).integers(2**31)))

    base_ids = world.ids("base")
    label_index = np.full(world.n_categories, -1, dtype=np.int64)
    label_index[base_ids] = np.arange(len(base_ids))
    ground_protos = world.text_protos[base_ids]

    batch_rng = _seed_stream(cfg.seed, BATCHES)
    sampler_rng = _seed_stream(cfg.seed, SAMPLER)
    mixup_rng = _seed_stream(cfg.seed, MIXUP)

    pool = NegativePool.empty(world.d_t, tr.queue_capacity)
    vel = np.zeros(head.W.size + head.b.size + 1)
    prev_grad = None
    rows: list[dict] = []
    T = tr.iterations
    for t in range(T):
        rho = t / T
        batch = sample_batch(world, tr.batch_size, seed=int(batch_rng.integers(2**31)), jitter=cfg.world.jitter)
        sampler_seed = int(sampler_rng.integers(2**31))
        mix_seed = int(mixup_rng.integers(2**31))
        f_aug = _mixup(batch.f_aug, np.random.default_rng(mix_seed)) if sc.mixup else batch.f_aug
        labels = np.where(batch.labels >= 0, label_index[np.maximum(batch.labels, 0)], -1)
        inputs = LossInputs(
            f=batch.f,
            f_aug=f_aug,
            x_aug=world.to_text(f_aug),
            labels=labels,
            ground_protos=ground_protos,
            queue=pool.memory,
            pseudo_word_mode=sc.pseudo_word_mode,
            queue_in_second_term=tr.queue_in_second_term,
        )
        w = (f_aug if sc.pseudo_word_mode == "aug_only" else batch.f) @ head.W.T + head.b
        proxies = compute_proxies(world.to_text(batch.f), w, pool)

        if sas:
            out = sample_curriculum(proxies.h, proxies.q, rho, curr_cfg, sampler_seed, use_h=use_h, use_q=use_q)
            selected = out.selected
            ratios, counts, alpha, pen = out.ratios_used, out.per_tier_counts, out.alpha, out.penalized_selected
        else:
            selected = sample_uniform(len(batch), sc.M_s, sampler_seed)
            ratios, counts, alpha, pen = (np.nan,) * 3, (0, 0, 0), np.nan, 0

        loss, grad = objective(head, inputs, selected, tr.lambda_curr)
        g = grad.flat()
        step_gcs = gcs(g, prev_grad) if prev_grad is not None else None
        prev_grad = g

        lr = tr.lr * 0.5 * (1.0 + np.cos(np.pi * t / T))
        vel = tr.momentum * vel + g
        theta = head.flat() - lr * vel
        nW = head.W.size
        head.W = theta[:nW].reshape(head.W.shape)
        head.b = theta[nW : nW + head.b.size]
        head.set_log_tau(theta[-1])

        pool = queue_push(pool, w)
        rows.append(
            {
                "iteration": t,
                "rho": rho,
                "alpha": alpha,
                "r_easy": ratios[0],
                "r_medium": ratios[1],
                "r_hard": ratios[2],
                "n_easy": counts[0],
                "n_medium": counts[1],
                "n_hard": counts[2],
                "n_selected": len(selected),
                "penalized_selected": pen,
                "l_ground": loss.l_ground,
                "l_curr": loss.l_curr,
                "l_total": loss.l_total,
                "tau": head.tau,
                "grad_norm": float(np.linalg.norm(g)),
                "gcs": step_gcs,
                "mean_q": float(proxies.q.mean()),
                "mean_h": float(proxies.h.mean()),
            }
        )
    return RunArtifact(cfg, head, rows, duration_s=time.perf_counter() - t0)


def _eval_proxies(world: WorldSpec, head: ProjectionHead, F: np.ndarray):
    w = F @ head.W.T + head.b
    pool = NegativePool.empty(world.d_t, 0)
    return compute_proxies(world.to_text(F), w, pool)


def run_evaluation(
    artifact: RunArtifact,
    domains: Sequence[str] | None = None,
    severities: Sequence[int] | None = None,
    world: WorldSpec | None = None,
) -> MetricReport:
    """Retrieval and AI-gap on every (domain, severity) cell plus the ambiguity-stability records."""
    cfg = artifact.config
    ev = cfg.eval
    domains = tuple(ev.domains if domains is None else domains)
    severities = tuple(ev.severities if severities is None else severities)
    for d in domains:
        if d not in CORRUPTION_KINDS:
            raise ValueError(f"unknown domain {d!r}")
    world = world or build_world(cfg)
    head = artifact.head
    protos = world.text_protos
    eval_seed = int(_seed_stream(cfg.seed, EVAL).integers(2**31))
    clean = sample_batch(world, ev.n_regions, seed=eval_seed, mode="eval", jitter=cfg.world.jitter)
    keep = {"all": np.ones(len(clean), bool), "novel": clean.novel, "base": ~clean.novel}[ev.split]
    if not keep.any():
        raise ValueError(f"evaluation set has no {ev.split} regions")

    emb_clean = clean.f @ head.W.T + head.b
    logits_clean = category_logits(emb_clean, protos)
    clean_score = novel_retrieval_score(emb_clean, clean.categories, protos, clean.novel, ev.split)

    retrieval: dict[str, dict[int, float]] = {}
    gaps: dict[str, dict[int, float]] = {}
    for d in domains:
        spec = CorruptionSpec.default(d)
        retrieval[d], gaps[d] = {}, {}
        for s in severities:
            shifted = sample_batch(world, ev.n_regions, spec, s, seed=eval_seed, mode="eval", jitter=cfg.world.jitter)
            emb = shifted.f @ head.W.T + head.b
            retrieval[d][s] = novel_retrieval_score(emb, shifted.categories, protos, shifted.novel, ev.split)
            gaps[d][s] = float(np.mean(ai_gaps(logits_clean[keep], category_logits(emb[keep], protos))))

    r_means = {d: domain_mean(list(retrieval[d].values())) for d in domains}
    g_means = {d: domain_mean(list(gaps[d].values())) for d in domains}

    dh_spec = CorruptionSpec.default(ev.delta_h_domain)
    noisy = sample_batch(world, ev.n_regions, dh_spec, ev.delta_h_severity, seed=eval_seed, mode="eval", jitter=cfg.world.jitter)
    p_clean = _eval_proxies(world, head, clean.f)
    p_noisy = _eval_proxies(world, head, noisy.f)
    records = delta_h(clean.ids, p_clean, noisy.ids, p_noisy)
    records = [r for r, k in zip(records, keep) if k]

    return MetricReport(
        seed=cfg.seed,
        arm=cfg.sampler.arm,
        clean_retrieval=clean_score,
        retrieval=retrieval,
        ai_gap=gaps,
        retrieval_domain_means=r_means,
        ai_gap_domain_means=g_means,
        retrieval_overall=overall_mean(list(r_means.values())),
        ai_gap_overall=overall_mean(list(g_means.values())),
        stability=records,
        stable_fraction=stable_fraction(records),
        mean_gcs_first_half=mean_gcs_first_half(artifact.log),
    )


def stable_fraction(records: Sequence[StabilityRecord], threshold: float = 0.05) -> float:
    """Among regions in the top half of clean signal q, the fraction with |delta h| < threshold."""
    if not records:
        return float("nan")
    q = np.array([r.q_clean for r in records])
    dh = np.array([r.delta_h for r in records])
    top = q >= np.median(q)
    return float(np.mean(np.abs(dh[top]) < threshold))


def mean_gcs_first_half(rows: Sequence[dict]) -> float:
    half = rows[: len(rows) // 2]
    vals = [r["gcs"] for r in half if r["gcs"] is not None]
    return float(np.mean(vals)) if vals else float("nan")


# ---------------------------------------------------------------------------
# serialization


def log_to_csv(artifact: RunArtifact) -> str:
    lines = [f"# seed={artifact.config.seed} arm={artifact.config.sampler.arm}", ",".join(LOG_COLUMNS)]
    for row in artifact.log:
        lines.append(",".join(_num(row[c]) for c in LOG_COLUMNS))
    return "\n".join(lines) + "\n"


def report_to_csv(report: MetricReport) -> str:
    lines = [f"# seed={report.seed} arm={report.arm}", "domain,severity,metric,value"]
    lines.append(f"clean,0,retrieval,{_num(report.clean_retrieval)}")
    for d, s, r, g in report.cells():
        lines.append(f"{d},{s},retrieval,{_num(r)}")
        lines.append(f"{d},{s},ai_gap,{_num(g)}")
    for d in report.retrieval_domain_means:
        lines.append(f"{d},mean,retrieval,{_num(report.retrieval_domain_means[d])}")
        lines.append(f"{d},mean,ai_gap,{_num(report.ai_gap_domain_means[d])}")
    lines.append(f"all,mean,retrieval,{_num(report.retrieval_overall)}")
    lines.append(f"all,mean,ai_gap,{_num(report.ai_gap_overall)}")
    lines.append(f"all,mean,stable_fraction,{_num(report.stable_fraction)}")
    lines.append(f"all,mean,gcs_first_half,{_num(report.mean_gcs_first_half)}")
    return "\n".join(lines) + "\n"


def delta_h_to_csv(report: MetricReport) -> str:
    lines = [f"# seed={report.seed} arm={report.arm}", "region_id,q_clean,h_clean,h_corrupted,delta_h"]
    for r in report.stability:
        lines.append(f"{r.region_id},{_num(r.q_clean)},{_num(r.h_clean)},{_num(r.h_corrupted)},{_num(r.delta_h)}")
    return "\n".join(lines) + "\n"


def report_to_text(report: MetricReport) -> str:
    sev = sorted({s for d in report.retrieval for s in report.retrieval[d]})
    out = [f"# seed={report.seed} arm={report.arm}", ""]
    for title, table, means, overall in (
        ("Top-1 retrieval (%)", report.retrieval, report.retrieval_domain_means, report.retrieval_overall),
        ("AI-gap", report.ai_gap, report.ai_gap_domain_means, report.ai_gap_overall),
    ):
        out.append(title)
        out.append("domain".ljust(20) + "".join(f"{'s' + str(s):>10}" for s in sev) + f"{'mean':>10}")
        for d in table:
            cells = "".join(f"{table[d][s]:>10.4f}" if s in table[d] else " " * 10 for s in sev)
            out.append(d.ljust(20) + cells + f"{means[d]:>10.4f}")
        out.append("overall".ljust(20 + 10 * len(sev)) + f"{overall:>10.4f}")
        out.append("")
    out.append(f"clean retrieval (%): {report.clean_retrieval:.4f}")
    out.append(f"stable fraction (|dh| < 0.05, top-half q): {report.stable_fraction:.4f}")
    out.append(f"mean GCS, first half of training: {report.mean_gcs_first_half:.4f}")
    return "\n".join(out) + "\n"


def save_artifact(artifact: RunArtifact, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_config(artifact.config, outdir / "config.ini")
    save_head(artifact.head, outdir / "head.txt")
    (outdir / "log.csv").write_text(log_to_csv(artifact))
    (outdir / "timing.txt").write_text(
        f"# seed={artifact.config.seed} arm={artifact.config.sampler.arm}\nduration_s {artifact.duration_s:.3f}\n"
    )
    if artifact.report is not None:
        save_report(artifact.report, outdir)
    return outdir


def save_report(report: MetricReport, outdir) -> None:
    outdir = Path(outdir)
    (outdir / "report.txt").write_text(report_to_text(report))
    (outdir / "metrics.csv").write_text(report_to_csv(report))
    (outdir / "delta_h.csv").write_text(delta_h_to_csv(report))


def load_artifact(outdir) -> RunArtifact:
    """Reload config, head and log; the report is recomputed by ``run_evaluation``."""
    outdir = Path(outdir)
    cfg = load_config(outdir / "config.ini")
    head = load_head(outdir / "head.txt")
    rows = []
    lines = (outdir / "log.csv").read_text().splitlines()
    cols = lines[1].split(",")
    for line in lines[2:]:
        vals = line.split(",")
        row = {}
        for c, v in zip(cols, vals):
            if v == "":
                row[c] = None
            elif c in ("iteration", "n_easy", "n_medium", "n_hard", "n_selected", "penalized_selected"):
                row[c] = int(v)
            else:
                row[c] = float(v)
        rows.append(row)
    return RunArtifact(cfg, head, rows)


# ---------------------------------------------------------------------------
# suites


@dataclass
class SuiteResult:
    labels: list[str]
    seeds: list[int]
    reports: dict[str, list[MetricReport]]

    METRICS = (
        ("retrieval_overall", True),
        ("ai_gap_overall", False),
        ("clean_retrieval", True),
        ("stable_fraction", True),
        ("mean_gcs_first_half", True),
    )

    def values(self, label: str, metric: str) -> np.ndarray:
        return np.array([getattr(r, metric) for r in self.reports[label]])

    def wins(self, a: str, b: str, metric: str, higher_is_better: bool = True) -> int:
        """Number of paired seeds where ``a`` beats or ties ``b``."""
        va, vb = self.values(a, metric), self.values(b, metric)
        return int(np.sum(va >= vb if higher_is_better else va <= vb))

    def to_text(self) -> str:
        out = [f"# seeds={','.join(map(str, self.seeds))}", ""]
        out.append("arm".ljust(28) + "".join(f"{m:>26}" for m, _ in self.METRICS))
        for label in self.labels:
            cells = ""
            for m, _ in self.METRICS:
                v = self.values(label, m)
                cells += f"{v.mean():>16.4f} ± {v.std():<7.4f}"
            out.append(label.ljust(28) + cells)
        if len(self.labels) > 1:
            ref = self.labels[0]
            out += ["", f"paired wins vs {ref} (ties count as wins)"]
            for label in self.labels[1:]:
                wins = "".join(f"{self.wins(label, ref, m, hib):>26}" for m, hib in self.METRICS)
                out.append(label.ljust(28) + wins)
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        lines = [f"# seeds={','.join(map(str, self.seeds))}", "arm,seed," + ",".join(m for m, _ in self.METRICS)]
        for label in self.labels:
            for r in self.reports[label]:
                lines.append(f"{label},{r.seed}," + ",".join(_num(getattr(r, m)) for m, _ in self.METRICS))
        return "\n".join(lines) + "\n"


def run_one(cfg: ExperimentConfig) -> RunArtifact:
    world = build_world(cfg)
    artifact = run_training(cfg, world)
    artifact.report = run_evaluation(artifact, world=world)
    return artifact


def run_suite(
    grid: Sequence[ExperimentConfig] | dict[str, ExperimentConfig],
    seeds: Sequence[int],
) -> SuiteResult:
    """Run every config over the same seeds; seeds pair the world, batches and eval regions across arms."""
    if not grid:
        raise ValueError("empty grid")
    if not isinstance(grid, dict):
        grid = {f"{i}:{c.sampler.arm}": c for i, c in enumerate(grid)}
    reports: dict[str, list[MetricReport]] = {}
    for label, cfg in grid.items():
        reports[label] = []
        for seed in seeds:
            art = run_one(cfg.replace(seed=seed))
            log.info("%s seed=%d retrieval=%.2f ai_gap=%.4f", label, seed, art.report.retrieval_overall, art.report.ai_gap_overall)
            reports[label].append(art.report)
    return SuiteResult(list(grid), list(seeds), reports)
