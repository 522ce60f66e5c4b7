"""Coupled-dipole simulator for weak light scattering by cold atomic clouds."""

__version__ = "0.1.0"

from .geometry import (
    AtomConfiguration,
    CloudSpec,
    load_configuration,
    sample_configuration,
    save_configuration,
    validate_configuration,
)
from .kernel import (
    IncidentWave,
    PolarizationBasis,
    detector_propagator,
    f1_exact,
    f2_exact,
    green_tensor_polar,
    helicity_basis,
    incident_vector,
    kernel_exact,
)
from .montecarlo import EnsembleJob, Statistics, resume_ensemble, run_ensemble
from .observables import (
    ScatteringGeometry,
    differential_cross_section,
    total_cross_section_optical_theorem,
    total_cross_section_quadrature,
)
from .solver import (
    EffectiveHamiltonian,
    ModeSpectrum,
    SteadyStateAmplitudes,
    build_hamiltonian,
    mode_spectrum,
    solve_resolvent,
    sweep_detunings,
)
from .units import DEFAULT_UNITS, SIGMA_RESONANT, UnitsConvention

__all__ = [
    "AtomConfiguration",
    "CloudSpec",
    "DEFAULT_UNITS",
    "EffectiveHamiltonian",
    "EnsembleJob",
    "IncidentWave",
    "ModeSpectrum",
    "PolarizationBasis",
    "ScatteringGeometry",
    "SIGMA_RESONANT",
    "Statistics",
    "SteadyStateAmplitudes",
    "UnitsConvention",
    "build_hamiltonian",
    "detector_propagator",
    "differential_cross_section",
    "f1_exact",
    "f2_exact",
    "green_tensor_polar",
    "helicity_basis",
    "incident_vector",
    "kernel_exact",
    "load_configuration",
    "mode_spectrum",
    "resume_ensemble",
    "run_ensemble",
    "sample_configuration",
    "save_configuration",
    "solve_resolvent",
    "sweep_detunings",
    "total_cross_section_optical_theorem",
    "total_cross_section_quadrature",
    "validate_configuration",
]
