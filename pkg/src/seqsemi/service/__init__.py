"""HTTP service wrapping the check runner."""

from .app import app, create_app

__all__ = ["app", "create_app"]
