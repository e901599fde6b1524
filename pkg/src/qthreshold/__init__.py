"""Quantum threshold reflection from the Morse potential and general 1D wells.

Modules
-------
specfun      Kummer M, log-Gamma and digamma for the scattering states
morse        analytic Morse amplitude, wavefunctions, turning points, badlands
senn         reflection for general potentials from boundary data
qdyn         wavepacket propagation over exact scattering states
cwigner      classical Wigner trajectory ensembles
experiments  canned reproduction presets
cli          command-line entry point
"""

from .config import RunConfig
from .errors import NumericalError, QThresholdError, ValidationError
from .morse import MorseParams
from .packet import CoherentState, free_flight_time

__all__ = [
    "CoherentState",
    "MorseParams",
    "NumericalError",
    "QThresholdError",
    "RunConfig",
    "ValidationError",
    "free_flight_time",
]
__version__ = "0.1.0"
