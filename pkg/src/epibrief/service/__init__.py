"""HTTP service wrapping the investigation loop."""

from epibrief.service.app import create_app

__all__ = ["create_app"]
