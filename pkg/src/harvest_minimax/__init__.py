"""Minimax (S-s) harvest policies for a fishery under bounded recruitment shocks."""

from .config import load_model, table1
from .errors import HarvestError
from .models import BioModel, EconModel, Grid, HarvestModel, Horizon
from .solver import solve_dense, solve_fast
from .version import __version__

__all__ = [
    "BioModel",
    "EconModel",
    "Grid",
    "HarvestError",
    "HarvestModel",
    "Horizon",
    "__version__",
    "load_model",
    "solve_dense",
    "solve_fast",
    "table1",
]
