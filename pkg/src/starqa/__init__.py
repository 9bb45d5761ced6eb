"""Tool-orchestrated video question answering over synthetic ground truth."""

from .cards import ToolCard, ToolCategory, ToolRegistry, load_cards
from .metrics import RunReport, ToolchainTrace, build_report, read_traces, write_traces
from .model import GenerationProfile, Suite, generate_suite, load_suite, save_suite
from .runner import run_ablation, run_suite, run_sweep
from .scheduler import Strategy, StrategyConfig, run_episode
from .simtools import NoiseModel, SimToolbox, ToolResult

__version__ = "0.1.0"

__all__ = [
    "GenerationProfile",
    "NoiseModel",
    "RunReport",
    "SimToolbox",
    "Strategy",
    "StrategyConfig",
    "Suite",
    "ToolCard",
    "ToolCategory",
    "ToolRegistry",
    "ToolResult",
    "ToolchainTrace",
    "build_report",
    "generate_suite",
    "load_cards",
    "load_suite",
    "read_traces",
    "run_ablation",
    "run_episode",
    "run_suite",
    "run_sweep",
    "save_suite",
    "write_traces",
    "__version__",
]
