"""Pseudospectral simulator for the kappa-coupled Kahler flow on flat complex tori."""

from .config import RunConfig, build, load_config, parse_config, preset_config
from .errors import LyzError
from .integrator import RunResult, StepperConfig, Termination, run
from .spectral import Grid

__all__ = ["Grid", "LyzError", "RunConfig", "RunResult", "StepperConfig", "Termination",
           "build", "load_config", "parse_config", "preset_config", "run"]
__version__ = "0.1.0"
