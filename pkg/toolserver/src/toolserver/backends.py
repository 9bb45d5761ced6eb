"""Toolbox construction for the two serve modes.

Mock mode answers from a synthetic suite through the in-process sim tools and
is the tested contract surface. Real mode dispatches to per-card inference
backends registered at runtime; cards without weights or without a registered
backend are disabled at startup with a warning each, and startup fails if
nothing is left to serve.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable

from starqa import load_suite
from starqa.errors import ConfigurationError
from starqa.simtools import NoiseModel, SimToolbox, ToolResult

log = logging.getLogger("toolserver")

# Weight files each real binding expects under --weights. Only cards listed
# here can leave mock mode; the rest exist solely as simulations.
REAL_WEIGHT_FILES = {
    "object_detector": ("yolov8x.pt", "groundingdino_swint_ogc.pth"),
    "text_detector": ("craft_mlt_25k.pth",),
    "image_captioner": ("blip2_flan_t5_xl.bin",),
    "temporal_grounding": ("grounded_videollm.ckpt",),
}

# card name -> factory(weights_dir) -> object with
# invoke(tool, args, frames) -> ToolResult. Empty by default: wiring an
# inference stack is deployment-specific, so deployments register their own.
_BACKEND_FACTORIES: dict[str, Callable[[Path], object]] = {}


def register_backend(name: str, factory: Callable[[Path], object] | None) -> None:
    """Install a backend factory for a card; None removes it."""
    if factory is None:
        _BACKEND_FACTORIES.pop(name, None)
    else:
        _BACKEND_FACTORIES[name] = factory


def mock_toolbox(suite_path: str | Path, noise_seed: int = 0) -> SimToolbox:
    """Sim tools over the ground truth of a generated suite file."""
    suite = load_suite(suite_path)
    return SimToolbox.from_suite(suite, noise=NoiseModel(seed=noise_seed))


class RealToolbox:
    """Dispatches each call to the backend constructed for that card."""

    def __init__(self, backends: dict[str, object]):
        self._backends = dict(backends)

    def invoke(self, tool: str, args: dict, frames: list[int]) -> ToolResult:
        return self._backends[tool].invoke(tool, args, frames)


def real_toolbox(
    names: list[str], weights_dir: str | Path
) -> tuple[RealToolbox, list[str], list[tuple[str, str]]]:
    """Build real backends for `names`; returns (toolbox, served, disabled).

    `disabled` holds (card, reason) pairs, each also logged as a warning.
    """
    root = Path(weights_dir)
    if not root.is_dir():
        raise ConfigurationError(f"weights directory {root} does not exist")
    backends: dict[str, object] = {}
    disabled: list[tuple[str, str]] = []
    for name in names:
        expected = REAL_WEIGHT_FILES.get(name)
        if expected is None:
            disabled.append((name, "simulation-only card, no real binding"))
            continue
        missing = [f for f in expected if not (root / f).is_file()]
        if missing:
            disabled.append((name, f"missing weights: {', '.join(missing)}"))
            continue
        factory = _BACKEND_FACTORIES.get(name)
        if factory is None:
            disabled.append((name, "no backend registered for this card"))
            continue
        backends[name] = factory(root)
    for name, reason in disabled:
        log.warning("disabling card %s: %s", name, reason)
    if not backends:
        detail = "; ".join(f"{name} ({reason})" for name, reason in disabled)
        raise ConfigurationError(f"no serveable cards remain, all disabled: {detail}")
    return RealToolbox(backends), sorted(backends), disabled
