"""Command line entry: serve tool cards over HTTP."""

from __future__ import annotations

import argparse
import logging

from fastapi import FastAPI

from starqa.cards import load_cards
from starqa.errors import ConfigurationError

from .app import create_app
from .backends import mock_toolbox, real_toolbox


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolserver", description="serve starqa tool cards over HTTP"
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument(
        "--mock", action="store_true",
        help="answer from the simulated tools over a suite file (no weights)",
    )
    parser.add_argument("--suite", help="suite JSON with the ground truth (mock mode)")
    parser.add_argument("--noise-seed", type=int, default=0)
    parser.add_argument(
        "--cards", help="comma-separated card subset (default: every card)"
    )
    parser.add_argument("--weights", help="directory with model weight files (real mode)")
    return parser


def build_app(ns: argparse.Namespace) -> FastAPI:
    registry = load_cards()
    registry.freeze()
    known = registry.names()
    if ns.cards is None:
        names = known
    else:
        names = [s.strip() for s in ns.cards.split(",") if s.strip()]
        unknown = sorted(set(names) - set(known))
        if unknown:
            raise ConfigurationError(f"unknown cards: {', '.join(unknown)}")
    if ns.mock:
        toolbox = mock_toolbox(ns.suite, noise_seed=ns.noise_seed)
        served = names
    else:
        toolbox, served, _ = real_toolbox(names, ns.weights)
    return create_app([registry.get(n) for n in served], toolbox)


def main(argv: list[str] | None = None) -> None:
    parser = _parser()
    ns = parser.parse_args(argv)
    if ns.mock and not ns.suite:
        parser.error("--mock requires --suite")
    if ns.mock and ns.weights:
        parser.error("--weights only applies without --mock")
    if not ns.mock and not ns.weights:
        parser.error("either --mock with --suite, or --weights")
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        app = build_app(ns)
    except (ConfigurationError, OSError) as exc:
        parser.exit(2, f"toolserver: {exc}\n")
    import uvicorn

    uvicorn.run(app, host=ns.host, port=ns.port)


if __name__ == "__main__":
    main()
