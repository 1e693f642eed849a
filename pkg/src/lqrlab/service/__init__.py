"""HTTP service wrapping the core laboratory."""

from .app import create_app

__all__ = ["create_app"]
