"""Model bridge microservice for the key point analysis pipeline."""

from .app import create_app
from .models import StubModels

__version__ = "0.1.0"

__all__ = ["create_app", "StubModels"]
