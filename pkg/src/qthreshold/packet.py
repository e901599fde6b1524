"""The Gaussian initial state shared by the quantum and classical engines."""

import math
from dataclasses import dataclass

import numpy as np

from . import morse
from .errors import ValidationError


@dataclass(frozen=True)
class CoherentState:
    """Gaussian packet centred at z_i with momentum -p_i and width parameter gamma."""

    z_i: float
    p_i: float
    gamma: float

    def __post_init__(self):
        if not (self.p_i > 0 and math.isfinite(self.p_i)):
            raise ValidationError("p_i must be positive (the packet moves toward -z)")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError("gamma must be positive")
        if not math.isfinite(self.z_i):
            raise ValidationError("z_i must be finite")

    def wavefunction(self, z, hbar=1.0):
        z = np.asarray(z, dtype=float)
        dz = z - self.z_i
        return (self.gamma / math.pi) ** 0.25 * np.exp(
            -0.5 * self.gamma * dz * dz - 1j * self.p_i * dz / hbar
        )

    def density(self, z):
        dz = np.asarray(z, dtype=float) - self.z_i
        return math.sqrt(self.gamma / math.pi) * np.exp(-self.gamma * dz * dz)

    @property
    def position_variance(self):
        return 1.0 / (2.0 * self.gamma)

    def momentum_variance(self, hbar=1.0):
        return hbar * hbar * self.gamma / 2.0

    def energy(self, m=1.0):
        return self.p_i**2 / (2.0 * m)


def free_flight_time(params, state, y):
    """m (y + z_i + 2|z_TP|) / p_i with z_TP the turning point at the mean energy."""
    z_tp = morse.turning_point(params, state.energy(params.m))
    return params.m * (y + state.z_i + 2.0 * abs(z_tp)) / state.p_i
