"""Multi-satellite uplink MIMO with THz and FSO inter-satellite links."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
