"""Uncertainty-aware multi-view classification with evidential fusion."""

from ._kernels import available_backends, backend_name

__version__ = "0.1.0"

__all__ = ["available_backends", "backend_name", "__version__"]
