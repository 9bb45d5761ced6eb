"""Suite execution: per-episode planners, worker pools, sweeps, and ablation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from .cards import ToolRegistry
from .errors import ConfigurationError, EpisodeAborted
from .metrics import RunReport, ToolchainTrace, build_report
from .model import Suite
from .planner import HeuristicPlanner, RemoteChatPlanner, ScriptedPlanner, load_script
from .scheduler import Strategy, StrategyConfig, run_episode
from .simtools import NoiseModel, SimToolbox

# How strongly an unconstrained prompt tempts the planner into whole-video
# shortcuts; the three free-form strategies differ only in this pressure.
STRATEGY_SHORTCUT_BIAS = {
    Strategy.NO_CONSTRAINTS: 0.8,
    Strategy.PROMPTING: 0.65,
    Strategy.ICL: 0.35,
    Strategy.DISENTANGLED: 0.0,
    Strategy.STAR: 0.0,
}


def make_planner_factory(spec: str, strategy: Strategy, seed: int):
    """Per-episode backend constructor for a planner spec string.

    Specs: "heuristic", "scripted:<path>", "remote". Fresh instances per
    episode keep backends safe under concurrent workers.
    """
    if spec == "heuristic":
        bias = STRATEGY_SHORTCUT_BIAS[strategy]
        return lambda: HeuristicPlanner(shortcut_bias=bias, seed=seed)
    if spec.startswith("scripted:"):
        kwargs = load_script(spec.split(":", 1)[1])
        return lambda: ScriptedPlanner(
            list(kwargs["decisions"]), kwargs["answer"], kwargs["sufficiency"]
        )
    if spec == "remote":
        return lambda: RemoteChatPlanner()
    raise ConfigurationError(f"unknown planner spec {spec!r}")


def run_suite(
    suite: Suite,
    registry: ToolRegistry,
    config: StrategyConfig,
    noise: NoiseModel | None = None,
    planner_spec: str = "heuristic",
    seed: int = 0,
    workers: int = 1,
    on_backend_error: str = "fallback",
    toolbox=None,
) -> list[ToolchainTrace]:
    """One trace per suite item; aborted episodes yield their partial trace."""
    toolbox = toolbox or SimToolbox.from_suite(suite, noise or NoiseModel())
    factory = make_planner_factory(planner_spec, config.strategy, seed)

    def one(item) -> ToolchainTrace:
        planner = factory()
        try:
            _, trace = run_episode(
                item.video,
                item.qa,
                registry,
                planner,
                toolbox,
                config,
                on_backend_error=on_backend_error,
            )
            return trace
        except EpisodeAborted as exc:
            return exc.partial_trace

    if workers <= 1:
        traces = [one(item) for item in suite.items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, suite.items))
    # Stable output order regardless of completion order.
    return sorted(traces, key=lambda t: t.episode_id)


def run_sweep(
    suite: Suite,
    registry: ToolRegistry,
    strategies: list[Strategy] | None = None,
    base_config: StrategyConfig | None = None,
    noise: NoiseModel | None = None,
    planner_spec: str = "heuristic",
    seed: int = 0,
    workers: int = 1,
) -> dict[str, tuple[list[ToolchainTrace], RunReport]]:
    base = base_config or StrategyConfig()
    out = {}
    for strategy in strategies or list(Strategy):
        config = replace(base, strategy=strategy)
        traces = run_suite(
            suite, registry, config, noise, planner_spec, seed=seed, workers=workers
        )
        out[strategy.value] = (traces, build_report(traces, registry))
    return out


def run_ablation(
    suite: Suite,
    registry: ToolRegistry,
    tool_name: str,
    base_config: StrategyConfig | None = None,
    noise: NoiseModel | None = None,
    seed: int = 0,
    workers: int = 1,
) -> dict:
    """STAR with and without one card; reports the accuracy and frame deltas."""
    registry.get(tool_name)  # unknown names fail before any episode runs
    config = replace(base_config or StrategyConfig(), strategy=Strategy.STAR)
    baseline = run_suite(suite, registry, config, noise, seed=seed, workers=workers)
    reduced = registry.without([tool_name])
    reduced.freeze()
    ablated = run_suite(suite, reduced, config, noise, seed=seed, workers=workers)
    base_report = build_report(baseline, registry)
    ablated_report = build_report(ablated, reduced)
    return {
        "tool": tool_name,
        "baseline": base_report.to_json(),
        "ablated": ablated_report.to_json(),
        "accuracy_drop_pct": base_report.accuracy_pct - ablated_report.accuracy_pct,
        "frames_increase": ablated_report.mean_frames - base_report.mean_frames,
    }


def replay_trace(
    trace: ToolchainTrace,
    suite: Suite,
    registry: ToolRegistry,
    base_config: StrategyConfig | None = None,
    noise: NoiseModel | None = None,
    toolbox=None,
) -> ToolchainTrace:
    """Re-run an episode from its logged decisions; must reproduce the trace."""
    video = suite.video_by_id(trace.video_id)
    qa = suite.qa_by_id(trace.qa_id)
    planner = ScriptedPlanner.from_trace(trace, qa)
    config = replace(base_config or StrategyConfig(), strategy=Strategy(trace.strategy))
    toolbox = toolbox or SimToolbox.from_suite(suite, noise or NoiseModel(seed=trace.noise_seed))
    _, new_trace = run_episode(
        video,
        qa,
        registry,
        planner,
        toolbox,
        config,
        episode_id=trace.episode_id,
        on_backend_error="abort",
        planner_label=trace.planner,
    )
    return new_trace
