"""Registered per-configuration tasks consumed by the ensemble runner.

Each task maps (configuration, params dict) to a flat numpy vector so
that the Monte Carlo layer can average without knowing any physics.
Params must stay JSON-serializable: they enter the job identity hash.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import AtomConfiguration
from .kernel import IncidentWave, helicity_basis, incident_vector, linear_basis
from .montecarlo import register_task
from .observables import (
    CHANNEL_PARALLEL,
    CHANNEL_PERPENDICULAR,
    angular_intensity,
    backscatter_directions,
    direction_projection_row,
    forward_projection_row,
    projected_amplitude_sweep,
    total_field_at,
)
from .solver import ResolventFactorization, build_hamiltonian, mode_spectrum
from .units import WAVENUMBER


def incident_from_params(params: dict) -> IncidentWave:
    direction = np.asarray(params.get("direction", (0.0, 0.0, 1.0)), dtype=float)
    name = params.get("polarization", "helicity+")
    detuning = float(params.get("detuning", 0.0))
    if name == "helicity+":
        return IncidentWave.circular(direction, +1, detuning)
    if name == "helicity-":
        return IncidentWave.circular(direction, -1, detuning)
    if name in ("x", "y"):
        return IncidentWave(direction, linear_basis(direction).vectors[0 if name == "x" else 1], detuning)
    raise ValueError(f"unknown polarization {name!r}")


def _solve(config: AtomConfiguration, incident: IncidentWave) -> np.ndarray:
    hamiltonian = build_hamiltonian(config)
    rhs = incident_vector(config, incident)
    return ResolventFactorization(hamiltonian, incident.detuning).solve(rhs).u


@register_task("sigma_spectrum")
def sigma_spectrum_task(config: AtomConfiguration, params: dict) -> np.ndarray:
    """Total cross section (optical theorem) on a detuning grid."""
    incident = incident_from_params(params)
    detunings = np.asarray(params["detunings"], dtype=float)
    hamiltonian = build_hamiltonian(config)
    row = forward_projection_row(config, incident)
    amps = projected_amplitude_sweep(
        hamiltonian,
        incident,
        detunings,
        row[None, :],
        mode=params.get("sweep_mode", "auto"),
        eigen_threshold=int(params.get("eigen_threshold", 25)),
    )
    return 4.0 * math.pi / WAVENUMBER * amps[0].imag


@register_task("directional_spectrum")
def directional_spectrum_task(config: AtomConfiguration, params: dict) -> np.ndarray:
    """dsigma/dOmega vs detuning at fixed angles.

    params["angles_deg"] are polar angles from the incident direction in
    the plane spanned by the incident axis and x.  Output is row-major
    (angle, detuning).  With channels=["parallel","perpendicular"] the
    two helicity channels are emitted per angle instead of their sum.
    """
    incident = incident_from_params(params)
    detunings = np.asarray(params["detunings"], dtype=float)
    angles = np.radians(np.asarray(params["angles_deg"], dtype=float))
    channels = params.get("channels")
    hamiltonian = build_hamiltonian(config)
    khat = incident.direction
    e1 = np.array([1.0, 0.0, 0.0])
    if abs(khat[2]) < 1.0 - 1e-12:
        e1 = np.cross([0.0, 0.0, 1.0], khat)
        e1 /= np.linalg.norm(e1)
    rows = []
    sign = incident.helicity_sign() if channels else 0
    for theta in angles:
        direction = math.cos(theta) * khat + math.sin(theta) * e1
        basis = helicity_basis(direction)
        if channels:
            same = basis.vectors[0 if sign > 0 else 1]
            flip = basis.vectors[1 if sign > 0 else 0]
            selected = {CHANNEL_PARALLEL: same, CHANNEL_PERPENDICULAR: flip}
            for channel in channels:
                rows.append(direction_projection_row(config, direction, selected[channel]))
        else:
            rows.append(direction_projection_row(config, direction, basis.vectors[0]))
            rows.append(direction_projection_row(config, direction, basis.vectors[1]))
    amps = projected_amplitude_sweep(
        hamiltonian,
        incident,
        detunings,
        np.asarray(rows),
        mode=params.get("sweep_mode", "auto"),
        eigen_threshold=int(params.get("eigen_threshold", 25)),
    )
    intensities = np.abs(amps) ** 2
    if channels:
        return intensities.reshape(-1)
    # sum the two analyzer rows per angle
    return intensities.reshape(len(angles), 2, len(detunings)).sum(axis=1).reshape(-1)


@register_task("angular_channels")
def angular_channels_task(config: AtomConfiguration, params: dict) -> np.ndarray:
    """Helicity-resolved dsigma/dOmega on a polar-angle grid.

    Azimuths are averaged within the configuration (the ensemble is
    statistically isotropic around the beam axis), which just sharpens
    the statistics.  Output layout: channel-major, theta-minor.
    """
    incident = incident_from_params(params)
    thetas = np.asarray(params["thetas"], dtype=float)
    n_phi = int(params.get("n_phi", 1))
    channels = params.get("channels", [CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR])
    u = _solve(config, incident)
    directions, groups = backscatter_directions(incident.direction, thetas, n_phi)
    out = np.empty(len(channels) * len(thetas))
    for c, channel in enumerate(channels):
        values = angular_intensity(config, u, incident, directions, channel)
        for t, group in enumerate(groups):
            out[c * len(thetas) + t] = values[group].mean()
    return out


@register_task("field_plane")
def field_plane_task(config: AtomConfiguration, params: dict) -> np.ndarray:
    """Total (incident + scattered) field on a plane grid, flattened complex."""
    incident = incident_from_params(params)
    points = _plane_points(params)
    u = _solve(config, incident)
    return total_field_at(config, u, incident, points).reshape(-1)


@register_task("field_plane_intensity")
def field_plane_intensity_task(config: AtomConfiguration, params: dict) -> np.ndarray:
    """Per-configuration |total field|^2 on the same grid as field_plane."""
    incident = incident_from_params(params)
    points = _plane_points(params)
    u = _solve(config, incident)
    field = total_field_at(config, u, incident, points)
    return np.sum(np.abs(field) ** 2, axis=-1)


def _plane_points(params: dict) -> np.ndarray:
    xs = np.asarray(params["grid_x"], dtype=float)
    ys = np.asarray(params.get("grid_y", [0.0]), dtype=float)
    z = float(params["plane_z"])
    xx, yy = np.meshgrid(xs, ys, indexing="xy")
    return np.stack([xx, yy, np.full_like(xx, z)], axis=-1).reshape(-1, 3)


@register_task("eigenvalues")
def eigenvalues_task(config: AtomConfiguration, params: dict) -> np.ndarray:
    """All collective eigenvalues, sorted by real part for stable layout."""
    hamiltonian = build_hamiltonian(config, kernel_variant=params.get("kernel_variant", "polar"))
    values = mode_spectrum(hamiltonian).eigenvalues
    return np.sort_complex(values)
