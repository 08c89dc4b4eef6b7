"""Slow-fast Rosenzweig-MacArthur prey-predator model with weak Allee effect."""

from .kinetics import ModelParams

__version__ = "0.1.0"
__all__ = ["ModelParams", "__version__"]
