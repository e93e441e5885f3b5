"""Fill-mask HTTP microservice speaking the infill wire protocol."""

from .backend import BackendError, DeterministicBackend, FillMaskBackend
from .config import ServiceConfig
from .server import create_app

__all__ = [
    "BackendError",
    "DeterministicBackend",
    "FillMaskBackend",
    "ServiceConfig",
    "create_app",
]
