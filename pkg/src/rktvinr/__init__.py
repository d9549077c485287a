"""Denoising and derivative estimation for ODE trajectories with a sine-activated
implicit neural representation, followed by sparse equation identification."""

from .odesim import Trajectory, make_system, simulate
from .noise import NoiseSpec, corrupt
from .siren import SirenConfig, SirenParams
from .train import TrainConfig, fit
from .sindy import LibrarySpec, SindyModel, identify
from .metrics import ErrorReport, coeff_error, rel_error

__all__ = [
    "Trajectory", "make_system", "simulate", "NoiseSpec", "corrupt", "SirenConfig",
    "SirenParams", "TrainConfig", "fit", "LibrarySpec", "SindyModel", "identify",
    "ErrorReport", "coeff_error", "rel_error",
]
__version__ = "0.1.0"
