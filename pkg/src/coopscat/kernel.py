"""Matrix elements of the coupled-dipole theory.

Everything here is a pure function of geometry: the retarded
dipole-dipole coupling between two J=0 <-> J=1 atoms (both the
resonance-frequency "polar" form used in production and the exact
frequency-dependent form kept for retardation studies), the plane-wave
excitation vector, the propagator from an atom to an observation point,
and transverse polarization bases.

Sign and prefactor conventions are pinned by physics calibrations rather
than bookkeeping: with the polar kernel below, the symmetric state of a
close pair is superradiant (width -> 2*gamma as r -> 0), the pair level
shifts carry the classical electrostatic dipole-dipole signs, and the
optical theorem holds at any density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import sici

from .geometry import AtomConfiguration
from .units import DEFAULT_UNITS, DIPOLE_SQ, GAMMA, WAVENUMBER


class ZeroSeparation(ValueError):
    """Pairwise kernel requested at coincident positions."""


class NonTransversePolarization(ValueError):
    """Polarization vector has a component along the propagation direction."""


# ---------------------------------------------------------------------------
# polarization bases and incident waves
# ---------------------------------------------------------------------------


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm < 1e-14:
        raise ValueError("zero vector cannot be normalized")
    return v / norm


@dataclass(frozen=True)
class PolarizationBasis:
    """Two orthonormal transverse polarization vectors for one direction.

    Satisfies e_i . k = 0, e_i . conj(e_j) = delta_ij and the
    completeness relation sum_a e_a^mu conj(e_a^nu) = delta_munu - k^mu k^nu.
    """

    direction: np.ndarray
    vectors: tuple[np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        direction = _unit(self.direction)
        direction.flags.writeable = False
        vecs = []
        for e in self.vectors:
            e = np.asarray(e, dtype=complex).copy()
            if abs(np.vdot(direction, e)) > 1e-10:
                raise NonTransversePolarization(f"vector {e} not transverse to {direction}")
            e.flags.writeable = False
            vecs.append(e)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "vectors", (vecs[0], vecs[1]))


def transverse_frame(direction) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic right-handed real frame (e1, e2, k).

    For directions along +/-z the frame is (x, +/-y, k), which fixes the
    phase conventions of the helicity vectors below.
    """
    k = _unit(direction)
    if abs(k[0]) < 1e-12 and abs(k[1]) < 1e-12:
        e1 = np.array([1.0, 0.0, 0.0])
    else:
        e1 = _unit(np.cross([0.0, 0.0, 1.0], k))
    e2 = np.cross(k, e1)
    return e1, e2


def helicity_basis(direction) -> PolarizationBasis:
    """Helicity unit vectors e_+ = -(e1 + i e2)/sqrt(2), e_- = (e1 - i e2)/sqrt(2).

    For direction = +z this gives the standard spherical vectors
    e_+ = -(x + iy)/sqrt(2) and e_- = (x - iy)/sqrt(2).
    """
    e1, e2 = transverse_frame(direction)
    e_plus = -(e1 + 1j * e2) / math.sqrt(2.0)
    e_minus = (e1 - 1j * e2) / math.sqrt(2.0)
    return PolarizationBasis(direction=_unit(direction), vectors=(e_plus, e_minus))


def linear_basis(direction) -> PolarizationBasis:
    e1, e2 = transverse_frame(direction)
    return PolarizationBasis(direction=_unit(direction), vectors=(e1.astype(complex), e2.astype(complex)))


@dataclass(frozen=True)
class IncidentWave:
    """Plane probe wave: direction, transverse polarization, detuning [gamma]."""

    direction: np.ndarray
    polarization: np.ndarray
    detuning: float = 0.0

    def __post_init__(self) -> None:
        direction = _unit(self.direction)
        pol = np.asarray(self.polarization, dtype=complex)
        norm = np.linalg.norm(pol)
        if norm < 1e-14:
            raise NonTransversePolarization("zero polarization vector")
        pol = pol / norm
        if abs(np.dot(direction, pol)) > 1e-10:
            raise NonTransversePolarization(
                f"polarization {pol} not transverse to direction {direction}"
            )
        direction.flags.writeable = False
        pol.flags.writeable = False
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "polarization", pol)

    @classmethod
    def circular(cls, direction, helicity: int = +1, detuning: float = 0.0) -> "IncidentWave":
        basis = helicity_basis(direction)
        return cls(direction, basis.vectors[0 if helicity > 0 else 1], detuning)

    @classmethod
    def linear(cls, direction, axis: int = 0, detuning: float = 0.0) -> "IncidentWave":
        basis = linear_basis(direction)
        return cls(direction, basis.vectors[axis], detuning)

    def helicity_sign(self) -> int:
        """+1/-1 if the polarization is circular in this direction's frame."""
        basis = helicity_basis(self.direction)
        for sign, e in zip((+1, -1), basis.vectors):
            if abs(abs(np.vdot(e, self.polarization)) - 1.0) < 1e-9:
                return sign
        raise ValueError("incident polarization is not circular; helicity channels undefined")


# ---------------------------------------------------------------------------
# pairwise dipole-dipole kernel
# ---------------------------------------------------------------------------


def _polar_coefficients(kr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scalar coefficients (c_delta, c_rr) of the resonance-frequency kernel.

    Sigma_munu(r) = c_delta * delta_munu - c_rr * rhat_mu rhat_nu with

        c_delta = (3g/4) e^{ikr} (1 - i kr - (kr)^2) / (kr)^3
        c_rr    = (3g/4) e^{ikr} (3 - 3i kr - (kr)^2) / (kr)^3
    """
    prefactor = DIPOLE_SQ * GAMMA * np.exp(1j * kr) / kr**3
    c_delta = prefactor * (1.0 - 1j * kr - kr**2)
    c_rr = prefactor * (3.0 - 3j * kr - kr**2)
    return c_delta, c_rr


def green_tensor_polar(r_vec) -> np.ndarray:
    """3x3 dipole-dipole coupling between two atoms at separation r_vec.

    Evaluated at the atomic resonance frequency ("polar" form); complex
    symmetric and even in r_vec.  Units: gamma, with distances in reduced
    wavelengths.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r <= 0.0:
        raise ZeroSeparation("dipole kernel is singular at zero separation")
    kr = WAVENUMBER * r
    c_delta, c_rr = _polar_coefficients(np.asarray(kr))
    rhat = r_vec / r
    return c_delta * np.eye(3) - c_rr * np.outer(rhat, rhat)


def pairwise_polar_blocks(positions: np.ndarray) -> np.ndarray:
    """All off-diagonal 3x3 kernel blocks at once.

    Returns shape (N, N, 3, 3) with zero diagonal blocks; identical
    formula to green_tensor_polar, vectorized over pairs.
    """
    n = positions.shape[0]
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    np.fill_diagonal(dist, 1.0)  # masked below
    kr = WAVENUMBER * dist
    c_delta, c_rr = _polar_coefficients(kr)
    rhat = diff / dist[..., None]
    blocks = c_delta[..., None, None] * np.eye(3) - c_rr[..., None, None] * (
        rhat[..., :, None] * rhat[..., None, :]
    )
    blocks[np.diag_indices(n)] = 0.0
    return blocks


def _ci_si(x: float) -> tuple[complex, float]:
    """Cosine and sine integrals continued to negative arguments.

    Si is odd; Ci picks up +i*pi on the negative axis (upper branch),
    the continuation consistent with the retarded kernel.
    """
    if x == 0.0:
        raise ValueError("Ci(0) diverges")
    si, ci = sici(abs(x))
    if x > 0:
        return complex(ci), float(si)
    return complex(ci) + 1j * math.pi, -float(si)


def f1_exact(x: float) -> complex:
    """Scalar part of the retarded kernel, scaled by pi*r^3.

    Argument x = omega*r/c (may be negative for the nonresonant channel).
    The combination f1_exact(x) + f1_exact(-x) collapses to the closed
    form pi*(1 - ix - x^2)*e^{ix}.
    """
    ci, si = _ci_si(x)
    g = math.sin(x) * (-1j * math.pi + ci) - math.cos(x) * (math.pi / 2.0 + si)
    h = math.cos(x) * (-1j * math.pi + ci) + math.sin(x) * (math.pi / 2.0 + si)
    return -g + x * h - x + x**2 * g


def f2_exact(x: float) -> complex:
    """Longitudinal part of the retarded kernel, scaled by pi*r^3.

    f2_exact(x) + f2_exact(-x) = -pi*(3 - 3ix - x^2)*e^{ix}.
    """
    ci, si = _ci_si(x)
    g = math.sin(x) * (-1j * math.pi + ci) - math.cos(x) * (math.pi / 2.0 + si)
    h = math.cos(x) * (-1j * math.pi + ci) + math.sin(x) * (math.pi / 2.0 + si)
    return 3.0 * g - 3.0 * x * h + x - x**2 * g


def kernel_exact(r_vec, omega_offset: float = 0.0, omega_atom: float | None = None) -> np.ndarray:
    """Frequency-dependent pair kernel: resonant plus nonresonant channel.

    ``omega_offset`` is the probe frequency minus the atomic frequency in
    units of gamma; ``omega_atom`` the atomic frequency in the same units
    (defaults to the units convention).  The resonant channel is evaluated
    at x1 = (omega/omega_atom)*k*r and the nonresonant one at
    x2 = x1 - 2*k*r; at omega_offset = 0 their sum reduces exactly to
    green_tensor_polar.  Kept for validation and retardation studies; the
    polar form is the production kernel.
    """
    if omega_atom is None:
        omega_atom = DEFAULT_UNITS.omega_atom
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r <= 0.0:
        raise ZeroSeparation("dipole kernel is singular at zero separation")
    kr = WAVENUMBER * r
    ratio = 1.0 + omega_offset / omega_atom
    x_res = ratio * kr
    x_nonres = (ratio - 2.0) * kr
    f1 = f1_exact(x_res) + f1_exact(x_nonres)
    f2 = f2_exact(x_res) + f2_exact(x_nonres)
    rhat = r_vec / r
    scale = DIPOLE_SQ * GAMMA / (math.pi * r**3)
    return scale * (f1 * np.eye(3) + f2 * np.outer(rhat, rhat))


# ---------------------------------------------------------------------------
# excitation vector and detector propagator
# ---------------------------------------------------------------------------


def incident_vector(config: AtomConfiguration, wave: IncidentWave) -> np.ndarray:
    """Plane-wave excitation vector, component (a, mu) = e_mu e^{i k . r_a}.

    The source-distance factors common to the excitation and to the
    incident field at a detector are normalized out, so cross sections
    computed from the resulting amplitudes are source-independent.
    Returned flat with atom-major layout, length 3N.
    """
    phases = np.exp(1j * WAVENUMBER * config.positions @ wave.direction)
    return (phases[:, None] * wave.polarization[None, :]).reshape(-1)


def vector_detector_matrix(r_obs, config: AtomConfiguration) -> np.ndarray:
    """Cartesian field map matrix, shape (3, 3N).

    Row i gives the i-th Cartesian component of the field radiated to
    ``r_obs`` per unit excited-state amplitude:

        D_{i,(a,mu)} = -(k^2/rho_a) [delta_imu - n_i n_mu] e^{ik rho_a}

    with rho_a = |r_obs - r_a| and n the unit vector from atom a to the
    observation point.  Multiply by d^2 and the amplitude vector to get
    the scattered field in incident-field units.
    """
    r_obs = np.asarray(r_obs, dtype=float)
    sep = r_obs[None, :] - config.positions
    rho = np.linalg.norm(sep, axis=1)
    if np.any(rho < 1e-9):
        raise ZeroSeparation("observation point coincides with an atom")
    nhat = sep / rho[:, None]
    scalar = -(WAVENUMBER**2) * np.exp(1j * WAVENUMBER * rho) / rho  # (N,)
    projector = np.eye(3)[None, :, :] - nhat[:, :, None] * nhat[:, None, :]  # (N, 3, 3)
    blocks = scalar[:, None, None] * projector  # (N, 3_i, 3_mu)
    return np.transpose(blocks, (1, 0, 2)).reshape(3, -1)


def detector_propagator(r_obs, config: AtomConfiguration, basis: PolarizationBasis) -> np.ndarray:
    """Analyzer-projected propagator, shape (2, 3N); rows are analyzer channels."""
    full = vector_detector_matrix(r_obs, config)
    analyzers = np.stack([np.conj(basis.vectors[0]), np.conj(basis.vectors[1])])
    return analyzers @ full
