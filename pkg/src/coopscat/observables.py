"""Measurable quantities built from steady-state amplitudes.

Conventions: the scattering amplitude into direction k' with analyzer e'
is f = -d^2 * sum_{a,mu} conj(e'_mu) exp(-i k'.r_a) u_{a,mu}, normalized
so that dsigma/dOmega = |f|^2 and the optical theorem reads
sigma = (4*pi/k) Im f(forward, same polarization).  With these choices
the resonant single-atom total cross section is exactly 6*pi.

Angular integrals use Gauss-Legendre nodes in cos(theta) times a uniform
(trapezoid) azimuthal grid; both are spectrally accurate for the smooth,
band-limited integrands produced by finite clouds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .geometry import AtomConfiguration
from .kernel import (
    IncidentWave,
    helicity_basis,
    incident_vector,
)
from .solver import (
    EffectiveHamiltonian,
    EigenResolvent,
    ResolventFactorization,
    SteadyStateAmplitudes,
    build_hamiltonian,
)
from .units import DIPOLE_SQ, WAVENUMBER

CHANNEL_PARALLEL = "parallel"  # helicity preserved
CHANNEL_PERPENDICULAR = "perpendicular"  # helicity flipped
CHANNEL_TOTAL = "total"
CHANNELS = (CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR, CHANNEL_TOTAL)


class QuadratureNotConverged(RuntimeError):
    """Order-doubling estimate exceeded the requested tolerance."""


@dataclass(frozen=True)
class ScatteringGeometry:
    """Incident wave, outgoing direction, and detection channel."""

    incident: IncidentWave
    outgoing: np.ndarray
    channel: str = CHANNEL_TOTAL

    def __post_init__(self) -> None:
        out = np.asarray(self.outgoing, dtype=float)
        norm = np.linalg.norm(out)
        if norm < 1e-14:
            raise ValueError("outgoing direction cannot be zero")
        out = out / norm
        out.flags.writeable = False
        object.__setattr__(self, "outgoing", out)
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")


# ---------------------------------------------------------------------------
# far-field amplitudes and cross sections
# ---------------------------------------------------------------------------


def radiation_vector(config: AtomConfiguration, u: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """d^2 * sum_a exp(-i k'.r_a) u_a for each direction; shape (n_dir, 3)."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    phases = np.exp(-1j * WAVENUMBER * directions @ config.positions.T)
    return DIPOLE_SQ * (phases @ u.reshape(-1, 3))


def scattering_amplitude(
    config: AtomConfiguration, u: np.ndarray, direction: np.ndarray, analyzer: np.ndarray
) -> complex:
    """f(k -> k', e') for one outgoing mode."""
    vec = radiation_vector(config, u, np.asarray(direction, dtype=float)[None, :])[0]
    return complex(-np.conj(np.asarray(analyzer, dtype=complex)) @ vec)


def helicity_analyzer_grid(directions: np.ndarray, sign: int) -> np.ndarray:
    """Helicity unit vectors of the given sign for many directions at once.

    Same frame convention as helicity_basis (x-axis fallback at the poles).
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    e1 = np.cross(np.broadcast_to([0.0, 0.0, 1.0], directions.shape), directions)
    norms = np.linalg.norm(e1, axis=1)
    polar = norms < 1e-12
    e1[polar] = [1.0, 0.0, 0.0]
    e1[~polar] /= norms[~polar, None]
    e2 = np.cross(directions, e1)
    if sign > 0:
        return -(e1 + 1j * e2) / math.sqrt(2.0)
    return (e1 - 1j * e2) / math.sqrt(2.0)


def _channel_analyzers(incident: IncidentWave, direction: np.ndarray, channel: str):
    """Analyzer vectors for one outgoing direction, or None for 'total'."""
    if channel == CHANNEL_TOTAL:
        return None
    sign = incident.helicity_sign()
    basis = helicity_basis(direction)
    same = basis.vectors[0] if sign > 0 else basis.vectors[1]
    flipped = basis.vectors[1] if sign > 0 else basis.vectors[0]
    return same if channel == CHANNEL_PARALLEL else flipped


def angular_intensity(
    config: AtomConfiguration,
    u: np.ndarray,
    incident: IncidentWave,
    directions: np.ndarray,
    channel: str = CHANNEL_TOTAL,
) -> np.ndarray:
    """dsigma/dOmega for every direction in one detection channel."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    vecs = radiation_vector(config, u, directions)
    if channel == CHANNEL_TOTAL:
        total = np.einsum("di,di->d", vecs, np.conj(vecs)).real
        longitudinal = np.abs(np.einsum("di,di->d", directions, vecs)) ** 2
        return total - longitudinal
    sign = incident.helicity_sign()
    analyzer_sign = sign if channel == CHANNEL_PARALLEL else -sign
    analyzers = helicity_analyzer_grid(directions, analyzer_sign)
    amps = -np.einsum("di,di->d", np.conj(analyzers), vecs)
    return np.abs(amps) ** 2


def differential_cross_section(
    amplitudes: SteadyStateAmplitudes, config: AtomConfiguration, geometry: ScatteringGeometry
) -> float:
    """dsigma/dOmega into geometry.outgoing for the requested channel."""
    value = angular_intensity(
        config, amplitudes.u, geometry.incident, geometry.outgoing[None, :], geometry.channel
    )
    return float(value[0])


def sphere_quadrature(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre x trapezoid nodes on the unit sphere.

    Returns (directions (M, 3), weights (M,)) with sum(weights) = 4*pi.
    """
    nodes, gl_weights = np.polynomial.legendre.leggauss(n_theta)
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    sin_theta = np.sqrt(1.0 - nodes**2)
    dirs = np.empty((n_theta, n_phi, 3))
    dirs[..., 0] = sin_theta[:, None] * np.cos(phis)[None, :]
    dirs[..., 1] = sin_theta[:, None] * np.sin(phis)[None, :]
    dirs[..., 2] = nodes[:, None]
    weights = np.broadcast_to(gl_weights[:, None] * (2.0 * math.pi / n_phi), (n_theta, n_phi))
    return dirs.reshape(-1, 3), weights.reshape(-1).copy()


def _auto_orders(config: AtomConfiguration, n_theta: int, n_phi: int) -> tuple[int, int]:
    # Product of two far-field sums oscillates with angular bandwidth
    # ~ k * diameter; pad generously since nodes are cheap.
    bandwidth = 2.0 * WAVENUMBER * config.spec.bounding_radius
    needed = int(math.ceil(bandwidth)) + 24
    n_theta = max(n_theta, needed)
    n_phi = max(n_phi, 2 * n_theta)
    return n_theta, n_phi


def total_cross_section_quadrature(
    amplitudes: SteadyStateAmplitudes,
    config: AtomConfiguration,
    incident: IncidentWave,
    n_theta: int = 64,
    n_phi: int = 128,
    rtol: float = 1e-6,
    full_output: bool = False,
):
    """Integrate dsigma/dOmega (both output polarizations) over the sphere.

    The order is raised automatically for large clouds, and convergence is
    estimated by doubling the order; a doubling difference above ``rtol``
    raises QuadratureNotConverged.
    """
    n_theta, n_phi = _auto_orders(config, n_theta, n_phi)

    def integrate(nt: int, np_: int) -> float:
        dirs, weights = sphere_quadrature(nt, np_)
        values = angular_intensity(config, amplitudes.u, incident, dirs, CHANNEL_TOTAL)
        return float(weights @ values)

    coarse = integrate(n_theta, n_phi)
    fine = integrate(2 * n_theta, 2 * n_phi)
    error = abs(fine - coarse)
    if error > rtol * max(abs(fine), 1e-300):
        raise QuadratureNotConverged(
            f"order doubling changed sigma by {error:.3e} (value {fine:.6e}); raise n_theta/n_phi"
        )
    if full_output:
        return fine, {"coarse": coarse, "fine": fine, "error": error, "orders": (n_theta, n_phi)}
    return fine


def forward_amplitude(
    amplitudes: SteadyStateAmplitudes, config: AtomConfiguration, incident: IncidentWave
) -> complex:
    """Elastic forward amplitude f(k -> k, e -> e)."""
    return scattering_amplitude(config, amplitudes.u, incident.direction, incident.polarization)


def total_cross_section_optical_theorem(
    amplitudes: SteadyStateAmplitudes, config: AtomConfiguration, incident: IncidentWave
) -> float:
    """sigma = (4*pi/k) Im f(0); same calibration as the quadrature path."""
    return 4.0 * math.pi / WAVENUMBER * forward_amplitude(amplitudes, config, incident).imag


# ---------------------------------------------------------------------------
# near fields, coherent maps, transmission
# ---------------------------------------------------------------------------


def scattered_field_at(
    config: AtomConfiguration, u: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Scattered field (3 Cartesian components) at each point; shape (n_pts, 3).

    In units of the incident-field amplitude at the cloud; watch for the
    d^2 factor being included here, matching the far-field normalization.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    u3 = u.reshape(-1, 3)
    sep = points[:, None, :] - config.positions[None, :, :]  # (P, N, 3)
    rho = np.linalg.norm(sep, axis=2)
    if np.any(rho < 1e-9):
        raise ValueError("field requested at an atom position")
    nhat = sep / rho[..., None]
    radial = np.einsum("pni,ni->pn", nhat, u3)
    transverse = u3[None, :, :] - nhat * radial[..., None]  # (P, N, 3)
    scalar = -DIPOLE_SQ * WAVENUMBER**2 * np.exp(1j * WAVENUMBER * rho) / rho
    return np.einsum("pn,pni->pi", scalar, transverse)


def incident_field_at(incident: IncidentWave, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    phases = np.exp(1j * WAVENUMBER * points @ incident.direction)
    return phases[:, None] * incident.polarization[None, :]


def total_field_at(
    config: AtomConfiguration, u: np.ndarray, incident: IncidentWave, points: np.ndarray
) -> np.ndarray:
    return incident_field_at(incident, points) + scattered_field_at(config, u, points)


def speckle_intensity(
    amplitudes: SteadyStateAmplitudes,
    config: AtomConfiguration,
    point: np.ndarray,
    analyzer: np.ndarray | None = None,
    incident: IncidentWave | None = None,
) -> float:
    """Single-configuration intensity at a point (square-then-average input).

    When ``incident`` is given the incident plane wave is added before
    squaring, so ensemble means of this quantity dominate the coherent
    (average-then-square) intensity pointwise.  Without it the value is
    the pure scattered (diffuse + coherent-scattered) intensity.
    """
    point = np.asarray(point, dtype=float)
    field = scattered_field_at(config, amplitudes.u, point[None, :])[0]
    if incident is not None:
        field = field + incident_field_at(incident, point[None, :])[0]
    if analyzer is not None:
        return float(abs(np.conj(np.asarray(analyzer, dtype=complex)) @ field) ** 2)
    return float(np.real(np.conj(field) @ field))


@dataclass(frozen=True)
class FieldPlane:
    """Observation grid in a plane z = const (perpendicular to the probe)."""

    z: float
    half_width: float
    n_points: int
    half_height: float | None = None
    n_rows: int = 1

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.linspace(-self.half_width, self.half_width, self.n_points)
        if self.n_rows <= 1:
            ys = np.zeros(1)
        else:
            hh = self.half_height if self.half_height is not None else self.half_width
            ys = np.linspace(-hh, hh, self.n_rows)
        return xs, ys

    def points(self) -> np.ndarray:
        xs, ys = self.axes()
        xx, yy = np.meshgrid(xs, ys, indexing="xy")
        grid = np.stack([xx, yy, np.full_like(xx, self.z)], axis=-1)
        return grid.reshape(-1, 3)


@dataclass(frozen=True)
class FieldMap:
    """Configuration-averaged coherent field on a plane grid."""

    plane: FieldPlane
    mean_amplitude: np.ndarray  # (n_rows, n_points, 3) complex
    n_configs: int
    mean_intensity: np.ndarray | None = None  # square-then-average, same grid

    @property
    def coherent_intensity(self) -> np.ndarray:
        return np.sum(np.abs(self.mean_amplitude) ** 2, axis=-1)


def coherent_field_map(
    configs: Iterable[AtomConfiguration],
    incident: IncidentWave,
    plane: FieldPlane,
    include_speckle: bool = False,
) -> FieldMap:
    """Average the total field over configurations, then square.

    Library-surface convenience for small ensembles; the experiment
    drivers compute the same per-configuration fields through the Monte
    Carlo machinery for parallelism and checkpointing.
    """
    points = plane.points()
    xs, ys = plane.axes()
    total = np.zeros((len(points), 3), dtype=complex)
    total_sq = np.zeros(len(points))
    count = 0
    for config in configs:
        hamiltonian = build_hamiltonian(config)
        solve = ResolventFactorization(hamiltonian, incident.detuning)
        rhs = incident_vector(config, incident)
        u = solve.solve(rhs).u
        fields = total_field_at(config, u, incident, points)
        total += fields
        total_sq += np.sum(np.abs(fields) ** 2, axis=-1)
        count += 1
    if count == 0:
        # no scatterers at all: the coherent field is the incident wave
        total = incident_field_at(incident, points)
        count = 1
        total_sq = np.sum(np.abs(total) ** 2, axis=-1)
    mean = (total / count).reshape(len(ys), len(xs), 3)
    mean_sq = (total_sq / count).reshape(len(ys), len(xs))
    return FieldMap(
        plane=plane,
        mean_amplitude=mean,
        n_configs=count,
        mean_intensity=mean_sq if include_speckle else None,
    )


@dataclass(frozen=True)
class ShadowDisk:
    """Geometric-shadow region: disk of given radius around the beam axis."""

    radius: float


def transmission_coefficient(field_map: FieldMap, shadow: ShadowDisk) -> float:
    """Mean coherent intensity over the shadow disk / incident intensity."""
    xs, ys = field_map.plane.axes()
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    mask = np.hypot(xx, yy) <= shadow.radius
    if not np.any(mask):
        raise ValueError("shadow region contains no grid points")
    return float(field_map.coherent_intensity[mask].mean())


# ---------------------------------------------------------------------------
# angular scans near backscattering (CBS)
# ---------------------------------------------------------------------------


def backscatter_directions(
    incident_direction: np.ndarray, thetas: np.ndarray, n_phi: int
) -> tuple[np.ndarray, list[slice]]:
    """Outgoing directions grouped by polar angle from the incident axis.

    theta = pi is the exact retroreflection direction and contributes a
    single direction; other angles carry ``n_phi`` azimuths whose channel
    intensities are averaged per configuration.
    """
    e1, e2 = np.eye(3)[0], np.eye(3)[1]
    khat = np.asarray(incident_direction, dtype=float)
    khat = khat / np.linalg.norm(khat)
    if abs(khat[2]) < 1.0 - 1e-12:
        e1 = np.cross([0.0, 0.0, 1.0], khat)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(khat, e1)
    dirs: list[np.ndarray] = []
    groups: list[slice] = []
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    for theta in thetas:
        start = len(dirs)
        if abs(theta - math.pi) < 1e-12:
            dirs.append(-khat)
        else:
            for phi in phis:
                dirs.append(
                    math.cos(theta) * khat
                    + math.sin(theta) * (math.cos(phi) * e1 + math.sin(phi) * e2)
                )
        groups.append(slice(start, len(dirs)))
    return np.asarray(dirs), groups


@dataclass(frozen=True)
class CBSConeResult:
    """Configuration-averaged backscattering cone and enhancement factors."""

    thetas: np.ndarray
    intensity: dict[str, np.ndarray]
    intensity_sem: dict[str, np.ndarray]
    background: dict[str, float]
    enhancement: dict[str, float]
    enhancement_sem: dict[str, float]
    background_window: dict[str, tuple[float, float]]
    n_configs: int
    warning: str | None = None


def cone_from_curves(
    thetas: np.ndarray,
    means: dict[str, np.ndarray],
    sems: dict[str, np.ndarray],
    background_window,
    n_configs: int,
    target_sem: float | None = None,
) -> CBSConeResult:
    """Assemble enhancement factors from averaged angular curves.

    The peak is the exact theta = pi grid point; the pedestal is the mean
    over the background window (radians), given either as one (low, high)
    pair for all channels or as a per-channel dict.  Window choices are
    recorded in the result so downstream analysis never guesses.
    """
    if isinstance(background_window, dict):
        windows = {ch: tuple(background_window[ch]) for ch in means}
    else:
        windows = {ch: tuple(background_window) for ch in means}
    peak_index = int(np.argmin(np.abs(thetas - math.pi)))
    background: dict[str, float] = {}
    enhancement: dict[str, float] = {}
    enhancement_sem: dict[str, float] = {}
    for channel, mean in means.items():
        lo, hi = windows[channel]
        in_window = (thetas >= lo) & (thetas <= hi)
        if not np.any(in_window):
            raise ValueError(f"background window for {channel!r} contains no grid angles")
        bg = float(mean[in_window].mean())
        peak = float(mean[peak_index])
        background[channel] = bg
        enhancement[channel] = peak / bg
        sem = sems[channel]
        bg_sem = float(np.sqrt(np.sum(sem[in_window] ** 2)) / in_window.sum())
        peak_sem = float(sem[peak_index])
        enhancement_sem[channel] = (
            math.hypot(peak_sem / bg, peak * bg_sem / bg**2) if bg > 0 else math.inf
        )
    warning = None
    if target_sem is not None:
        worst = max(enhancement_sem.values())
        if worst > target_sem:
            warning = (
                f"enhancement sem {worst:.3g} above target {target_sem:.3g}; "
                "increase n_configs"
            )
    return CBSConeResult(
        thetas=thetas,
        intensity=means,
        intensity_sem=sems,
        background=background,
        enhancement=enhancement,
        enhancement_sem=enhancement_sem,
        background_window=windows,
        n_configs=n_configs,
        warning=warning,
    )


# ---------------------------------------------------------------------------
# detuning spectra (single configuration)
# ---------------------------------------------------------------------------


def forward_projection_row(config: AtomConfiguration, incident: IncidentWave) -> np.ndarray:
    """Row p with f_forward = -d^2 (p . u); equals conj(incident vector)."""
    return np.conj(incident_vector(config, incident))


def direction_projection_row(
    config: AtomConfiguration, direction: np.ndarray, analyzer: np.ndarray
) -> np.ndarray:
    """Row p with f(k', e') = -d^2 (p . u)."""
    phases = np.exp(-1j * WAVENUMBER * config.positions @ np.asarray(direction, dtype=float))
    return (phases[:, None] * np.conj(np.asarray(analyzer, dtype=complex))[None, :]).reshape(-1)


def projected_amplitude_sweep(
    hamiltonian: EffectiveHamiltonian,
    incident: IncidentWave,
    detunings: np.ndarray,
    projections: np.ndarray,
    mode: str = "auto",
    eigen_threshold: int = 25,
) -> np.ndarray:
    """f-amplitudes (n_proj, n_det): -d^2 * projections @ u(detuning).

    Detunings enter the polar Hamiltonian only on the diagonal, so a
    single eigen-decomposition turns the whole sweep into evaluating a
    rational function; for short grids per-point LU is cheaper.
    """
    detunings = np.asarray(detunings, dtype=float)
    rhs = incident_vector(hamiltonian.config, incident)
    projections = np.atleast_2d(projections)
    if mode == "auto":
        mode = "eigen" if len(detunings) > eigen_threshold else "lu"
    if mode == "lu":
        out = np.empty((projections.shape[0], len(detunings)), dtype=complex)
        for j, detuning in enumerate(detunings):
            u = ResolventFactorization(hamiltonian, float(detuning)).solve(rhs).u
            out[:, j] = projections @ u
    elif mode == "eigen":
        out = EigenResolvent(hamiltonian).projected_sweep(detunings, rhs, projections)
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    return -DIPOLE_SQ * out


def total_cross_section_spectrum(
    config: AtomConfiguration,
    incident: IncidentWave,
    detunings: np.ndarray,
    mode: str = "auto",
    eigen_threshold: int = 25,
) -> np.ndarray:
    """sigma(detuning) for one configuration via the optical theorem."""
    hamiltonian = build_hamiltonian(config)
    row = forward_projection_row(config, incident)
    amps = projected_amplitude_sweep(
        hamiltonian, incident, detunings, row[None, :], mode, eigen_threshold
    )
    return 4.0 * math.pi / WAVENUMBER * amps[0].imag
