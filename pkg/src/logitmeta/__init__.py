"""Exact and Monte Carlo analysis of logit dynamics in potential games:
chains, spectra, bottlenecks, metastable distributions and partitions."""

from .errors import CapError, InputError, LimitReached, NumericalError, PreconditionError
from .game import GameSpec, ProfileIndex, SubsetMask, load_game, save_game, verify_potential
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CapError", "GameSpec", "InputError", "LimitReached", "NumericalError",
    "PreconditionError", "ProfileIndex", "SubsetMask", "load_game", "save_game",
    "verify_potential",
]
