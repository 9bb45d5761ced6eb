"""Command line: generate suites, run strategy sweeps, ablate tools."""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from .cards import ToolRegistry, load_cards
from .errors import (
    BackendError,
    ConfigurationError,
    HandshakeError,
    StarError,
    ToolNotFound,
    ToolServerError,
    ToolTimeout,
)
from .metrics import build_report, save_report, write_traces
from .model import GenerationProfile, generate_suite, load_suite, save_suite, validate_profile
from .runner import run_ablation, run_suite, run_sweep
from .scheduler import Strategy, StrategyConfig
from .simtools import NoiseModel

STRATEGY_CHOICES = ("no-constraints", "prompting", "icl", "disentangled", "star", "all")

_NOISE_PARSERS = {
    "seed": int,
    "p_miss": float,
    "jitter_frames": int,
    "p_general_correct": float,
    "p_roi_correct": float,
}
_STRATEGY_PARSERS = {
    "max_iterations": int,
    "sufficiency_check": str,
    "shortcut_min_steps": int,
    "disentangled_temporal_steps": int,
    "render_budget_chars": int,
}


def _parse_strategy(name: str) -> Strategy:
    return Strategy(name.replace("-", "_"))


def load_profile(path: str) -> GenerationProfile:
    """Profile JSON -> GenerationProfile; unknown keys are hard errors."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"profile {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"profile {path}: expected a JSON object")
    known = {f.name for f in fields(GenerationProfile)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"profile {path}: unknown keys {unknown}")
    kwargs = {
        key: tuple(value) if isinstance(value, list) else value
        for key, value in data.items()
    }
    try:
        profile = GenerationProfile(**kwargs)
        validate_profile(profile)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"profile {path}: {exc}") from exc
    return profile


def load_config(path: str | None) -> tuple[dict, dict]:
    """INI with [noise] and [strategy] sections -> two override dicts."""
    if path is None:
        return {}, {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config {path}: unreadable file")
    extra = set(parser.sections()) - {"noise", "strategy"}
    if extra:
        raise ConfigurationError(f"config {path}: unknown sections {sorted(extra)}")
    out = []
    for section, parsers in (("noise", _NOISE_PARSERS), ("strategy", _STRATEGY_PARSERS)):
        overrides = {}
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in parsers:
                    raise ConfigurationError(f"config {path}: unknown key [{section}] {key}")
                try:
                    overrides[key] = parsers[key](raw)
                except ValueError as exc:
                    raise ConfigurationError(f"config {path}: [{section}] {key}: {exc}") from exc
        out.append(overrides)
    return out[0], out[1]


def _registry(disabled: list[str]) -> ToolRegistry:
    registry = load_cards()
    for name in disabled:
        registry.get(name)  # unknown names fail before any episode runs
    if disabled:
        registry = registry.without(disabled)
    registry.freeze()
    return registry


def _strategy_config(args, overrides: dict) -> StrategyConfig:
    merged = dict(overrides)
    if args.max_iterations is not None:
        merged["max_iterations"] = args.max_iterations
    return StrategyConfig(**merged)


def cmd_generate(args) -> int:
    profile = load_profile(args.profile) if args.profile else None
    suite = generate_suite(seed=args.seed, n=args.n, profile=profile)
    save_suite(suite, args.out)
    print(f"wrote {len(suite.items)} instances to {args.out}")
    return 0


def cmd_run(args) -> int:
    noise_over, strat_over = load_config(args.config)
    noise = NoiseModel(**dict(noise_over, seed=noise_over.get("seed", args.seed)))
    config = _strategy_config(args, strat_over)
    suite = load_suite(args.suite)
    registry = _registry(args.disable_tool)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.strategy == "all":
        results = run_sweep(
            suite,
            registry,
            base_config=config,
            noise=noise,
            planner_spec=args.planner,
            seed=args.seed,
            workers=args.workers,
        )
    else:
        strategy = _parse_strategy(args.strategy)
        traces = run_suite(
            suite,
            registry,
            replace(config, strategy=strategy),
            noise=noise,
            planner_spec=args.planner,
            seed=args.seed,
            workers=args.workers,
        )
        results = {strategy.value: (traces, build_report(traces, registry))}

    for name, (traces, report) in results.items():
        write_traces(traces, out_dir / f"traces_{name}.jsonl")
        save_report(report, out_dir / f"report_{name}.json")
        print(
            f"{name}: accuracy {report.accuracy_pct:.1f}% | "
            f"frames {report.mean_frames:.1f} | "
            f"chain {report.mean_toolchain_length:.1f} | "
            f"aborted {report.aborted_episodes}"
        )
    return 0


def cmd_ablate(args) -> int:
    noise_over, strat_over = load_config(args.config)
    noise = NoiseModel(**dict(noise_over, seed=noise_over.get("seed", args.seed)))
    config = _strategy_config(args, strat_over)
    suite = load_suite(args.suite)
    registry = _registry([])
    result = run_ablation(
        suite,
        registry,
        args.disable_tool,
        base_config=config,
        noise=noise,
        seed=args.seed,
        workers=args.workers,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"ablation_{args.disable_tool}.json"
    out_path.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(
        f"without {args.disable_tool}: accuracy drop "
        f"{result['accuracy_drop_pct']:+.1f} pts | frames "
        f"{result['frames_increase']:+.1f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starqa")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic suite JSON")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n", type=int, default=100)
    gen.add_argument("--profile", help="generation profile JSON")
    gen.add_argument("--out", default="suite.json")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="run one strategy or the full sweep")
    run.add_argument("--suite", required=True)
    run.add_argument("--strategy", choices=STRATEGY_CHOICES, default="star")
    run.add_argument("--planner", default="heuristic", help="heuristic, scripted:<file>, remote")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--disable-tool", action="append", default=[], metavar="NAME")
    run.add_argument("--max-iterations", type=int, default=None)
    run.add_argument("--config", help="INI overriding [noise] and [strategy] fields")
    run.add_argument("--out-dir", default=".")
    run.set_defaults(func=cmd_run)

    abl = sub.add_parser("ablate", help="STAR with one tool removed vs baseline")
    abl.add_argument("--suite", required=True)
    abl.add_argument("--disable-tool", required=True, metavar="NAME")
    abl.add_argument("--seed", type=int, default=0)
    abl.add_argument("--workers", type=int, default=1)
    abl.add_argument("--max-iterations", type=int, default=None)
    abl.add_argument("--config", help="INI overriding [noise] and [strategy] fields")
    abl.add_argument("--out-dir", default=".")
    abl.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BackendError, ToolServerError, ToolTimeout, HandshakeError) as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, ToolNotFound, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
