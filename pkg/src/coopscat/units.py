"""Natural-unit conventions used throughout the simulator.

Lengths are measured in the reduced wavelength of the atomic transition
(so the wavenumber k = 1), rates in the single-atom decay rate gamma
(so gamma = 1), and hbar = 1.  In these units the squared dipole matrix
element of the J=0 <-> J=1 transition is d^2 = 3*gamma/(4*k^3) = 3/4,
which makes the diagonal self-energy of every excited sublevel exactly
-i*gamma/2 and the resonant total cross section of an isolated atom
exactly 6*pi (in units of reduced wavelength squared).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class UnitsConvention:
    """Unit system of a run.

    ``omega_atom`` is the atomic transition frequency expressed in units
    of gamma.  It only matters for the frequency-dependent (retarded)
    kernel, where the nonresonant channel is evaluated at an argument
    shifted by -2*omega_atom; typical alkali atoms have
    omega_atom ~ 1e7..1e8.
    """

    gamma: float = 1.0
    wavenumber: float = 1.0
    omega_atom: float = 1.0e8

    @property
    def dipole_sq(self) -> float:
        """d^2 = 3*gamma/(4*k^3); fixes the -i*gamma/2 self-energy."""
        return 3.0 * self.gamma / (4.0 * self.wavenumber**3)

    @property
    def sigma_resonant(self) -> float:
        """Resonant total cross section of one atom, 6*pi/k^2."""
        return 6.0 * math.pi / self.wavenumber**2


DEFAULT_UNITS = UnitsConvention()

GAMMA = DEFAULT_UNITS.gamma
WAVENUMBER = DEFAULT_UNITS.wavenumber
DIPOLE_SQ = DEFAULT_UNITS.dipole_sq
SIGMA_RESONANT = DEFAULT_UNITS.sigma_resonant


def lorentzian_cross_section(detuning: float) -> float:
    """Single-atom total cross section 6*pi * (g/2)^2 / (D^2 + (g/2)^2)."""
    half = 0.5 * GAMMA
    return SIGMA_RESONANT * half**2 / (detuning**2 + half**2)
