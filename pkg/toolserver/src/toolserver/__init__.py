"""HTTP server for starqa tool cards: GET /cards, POST /invoke."""

from .app import create_app
from .backends import mock_toolbox, real_toolbox, register_backend

__version__ = "0.1.0"

__all__ = ["create_app", "mock_toolbox", "real_toolbox", "register_backend", "__version__"]
