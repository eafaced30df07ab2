"""Command-line entry point: ``pica {generate,train,evaluate,suite,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from pica.config import ConfigError, ExperimentConfig, load_config, parse_config, format_config
from pica.experiment import (
    delta_h_to_csv,
    load_artifact,
    log_to_csv,
    report_to_csv,
    report_to_text,
    run_evaluation,
    run_suite,
    run_training,
    build_world,
    save_artifact,
    save_report,
)
from pica.world import CORRUPTION_KINDS, CorruptionSpec, generate_world, sample_regions, save_regions, save_world


def _parse_seeds(text: str) -> list[int]:
    """``"0-9"``, ``"1,3,5"`` or a mix such as ``"0-2,7"``."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def _apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply ``section.key=value`` overrides through the config parser, so types and validation match files."""
    if not overrides:
        return cfg
    extra: dict[str, list[str]] = {}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.split(".", 1)
        extra.setdefault(section.strip(), []).append(f"{key.strip()} = {value.strip()}")
    text = format_config(cfg)
    for section, lines in extra.items():
        text += f"\n[{section}]\n" + "\n".join(lines) + "\n"
    return parse_config(_merge_duplicate_sections(text))


def _merge_duplicate_sections(text: str) -> str:
    """configparser rejects repeated sections; fold later ones into the first (later keys win)."""
    order: list[str] = []
    body: dict[str, dict[str, str]] = {}
    current = None
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1]
            if current not in body:
                order.append(current)
                body[current] = {}
        elif "=" in s and current is not None:
            k, v = s.split("=", 1)
            body[current][k.strip()] = v.strip()
    return "\n".join(f"[{sec}]\n" + "\n".join(f"{k} = {v}" for k, v in body[sec].items()) + "\n" for sec in order)


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    cfg = _apply_overrides(cfg, args.set or [])
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg.validate()


def cmd_generate(args) -> int:
    world = generate_world(args.n_base, args.n_novel, args.d_v, args.d_t, args.seed, args.cluster_noise)
    save_world(world, args.output)
    print(f"# seed={args.seed}")
    print(f"wrote world with {len(world.categories)} categories to {args.output}")
    if args.regions:
        corruption = CorruptionSpec.default(args.domain) if args.domain else None
        severity = args.severity if corruption else 0
        regions = sample_regions(world, args.regions, corruption, severity, args.seed, mode=args.mode)
        save_regions(regions, args.regions_output)
        print(f"wrote {len(regions)} regions to {args.regions_output}")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    world = build_world(cfg)
    artifact = run_training(cfg, world)
    if args.evaluate:
        artifact.report = run_evaluation(artifact, world=world)
    out = save_artifact(artifact, args.output)
    last = artifact.log[-1] if artifact.log else {}
    print(f"# seed={cfg.seed} arm={cfg.sampler.arm}")
    print(f"trained {cfg.training.iterations} iterations in {artifact.duration_s:.1f}s; final loss {last.get('l_total', float('nan')):.4f}")
    print(f"artifact written to {out}")
    if artifact.report is not None:
        print(report_to_text(artifact.report), end="")
    return 0


def cmd_evaluate(args) -> int:
    artifact = load_artifact(args.artifact)
    domains = args.domains.split(",") if args.domains else None
    severities = [int(s) for s in args.severities.split(",")] if args.severities else None
    report = run_evaluation(artifact, domains, severities)
    save_report(report, args.output or args.artifact)
    print(report_to_text(report), end="")
    return 0


def cmd_suite(args) -> int:
    base = _load(args)
    grid: dict[str, ExperimentConfig] = {}
    for spec in args.arm:
        # an arm is a label optionally followed by ":section.key=value;section.key=value"
        label, _, rest = spec.partition(":")
        overrides = [o for o in rest.split(";") if o] if rest else []
        if not rest and label:
            overrides = [f"sampler.arm={label}"]
        grid[label] = _apply_overrides(base, overrides)
    result = run_suite(grid, args.seeds)
    text = result.to_text()
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "suite.txt").write_text(text)
        (out / "suite.csv").write_text(result.to_csv())
    print(text, end="")
    return 0


def cmd_report(args) -> int:
    artifact = load_artifact(args.artifact)
    if args.what == "log":
        text = log_to_csv(artifact)
    else:
        report = run_evaluation(artifact)
        text = {"metrics": report_to_csv, "delta_h": delta_h_to_csv, "text": report_to_text}[args.what](report)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pica", description="Curriculum alignment experiments on a synthetic shift world.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic world (and optionally regions) to text files")
    g.add_argument("-o", "--output", required=True)
    g.add_argument("--n-base", type=int, default=48)
    g.add_argument("--n-novel", type=int, default=17)
    g.add_argument("--d-v", type=int, default=64)
    g.add_argument("--d-t", type=int, default=32)
    g.add_argument("--cluster-noise", type=float, default=0.1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--regions", type=int, default=0, help="also sample this many regions")
    g.add_argument("--regions-output", default="regions.txt")
    g.add_argument("--domain", choices=CORRUPTION_KINDS)
    g.add_argument("--severity", type=int, default=1)
    g.add_argument("--mode", choices=("train", "eval"), default="train")
    g.set_defaults(func=cmd_generate)

    def config_args(sp):
        sp.add_argument("-c", "--config", help="INI config file (defaults are used when omitted)")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        sp.add_argument("--seed", type=int)

    t = sub.add_parser("train", help="train a head and save the artifact directory")
    config_args(t)
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--evaluate", action="store_true", help="also evaluate and save the report")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="evaluate a saved artifact")
    e.add_argument("artifact")
    e.add_argument("--domains", help="comma-separated corruption kinds")
    e.add_argument("--severities", help="comma-separated levels 1..5")
    e.add_argument("-o", "--output", help="report directory (default: the artifact directory)")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("suite", help="run several arms over paired seeds and compare")
    config_args(s)
    s.add_argument("--arm", action="append", required=True,
                   help="arm name, or label:section.key=value;... for arbitrary grid points")
    s.add_argument("--seeds", type=_parse_seeds, default=list(range(3)))
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_suite)

    r = sub.add_parser("report", help="emit CSV or text from a saved artifact")
    r.add_argument("artifact")
    r.add_argument("--what", choices=("log", "metrics", "delta_h", "text"), default="metrics")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
