"""Experiment dispatch: from a validated RunConfig to result tables.

Each experiment builds ensemble jobs for the Monte Carlo layer, reduces
the averaged vectors into named tables with unit-annotated columns, and
returns a self-describing ResultBundle.  Writing is delimited text plus
a JSON metadata document; re-running the config echoed in the metadata
reproduces every table byte for byte.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig, serialize_config
from .geometry import sample_configuration
from .kernel import incident_vector
from .montecarlo import EnsembleJob, config_seed, run_ensemble
from .observables import (
    CHANNEL_PARALLEL,
    CHANNEL_PERPENDICULAR,
    cone_from_curves,
    total_cross_section_optical_theorem,
    total_cross_section_quadrature,
)
from .solver import (
    ResolventFactorization,
    build_hamiltonian,
    hamiltonian_dump_bytes,
    mode_spectrum,
)
from .tasks import incident_from_params
from .units import SIGMA_RESONANT

UNIT_LENGTH = "lambdabar"
UNIT_AREA = "lambdabar^2"
UNIT_AREA_PER_SR = "lambdabar^2/sr"
UNIT_RATE = "gamma"
UNIT_NONE = "dimensionless"
UNIT_DEG = "deg"


class MissingExperimentData(KeyError):
    """A bundle does not contain the experiment a consumer asked for."""


@dataclass(frozen=True)
class Column:
    name: str
    units: str
    values: np.ndarray


@dataclass
class Table:
    name: str
    columns: list[Column]
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        for col in self.columns:
            if col.name == name:
                return col.values
        raise KeyError(f"table {self.name!r} has no column {name!r}")


@dataclass
class ResultBundle:
    metadata: dict
    tables: dict[str, Table]
    artifacts: dict[str, bytes] = field(default_factory=dict)

    def table(self, name: str) -> Table:
        if name not in self.tables:
            raise MissingExperimentData(
                f"bundle has no table {name!r}; available: {sorted(self.tables)}"
            )
        return self.tables[name]


def _incident_params(config: RunConfig) -> dict:
    return {
        "direction": list(config.incident.direction),
        "polarization": config.incident.polarization,
        "detuning": config.incident.detuning,
    }


def _label_suffix(label: str) -> str:
    return f"[{label}]" if label else ""


def run_experiment(config: RunConfig, workers: int | None = None) -> ResultBundle:
    """Dispatch one experiment; pure computation, no file I/O."""
    start = time.time()
    workers = config.montecarlo.workers if workers is None else workers
    runner = _EXPERIMENTS.get(config.experiment)
    if runner is None:
        raise ValueError(f"unknown experiment {config.experiment!r}")
    tables, extra_meta, artifacts = runner(config, workers)
    metadata = {
        "experiment": config.experiment,
        "code_version": __version__,
        "units": {
            "length": "reduced wavelength (k = 1)",
            "rate": "single-atom decay rate gamma",
            "cross_section": "lambdabar^2; isolated-atom resonant value 6*pi",
        },
        "config_echo": serialize_config(config),
        "master_seed": config.montecarlo.master_seed,
        "n_configs": config.montecarlo.n_configs,
        "wall_time_s": round(time.time() - start, 3),
    }
    metadata.update(extra_meta)
    return ResultBundle(
        metadata=metadata, tables={t.name: t for t in tables}, artifacts=artifacts
    )


# ---------------------------------------------------------------------------
# individual experiments
# ---------------------------------------------------------------------------


def _spectrum(config: RunConfig, workers: int):
    detunings = np.asarray(config.detunings)
    observable = config.spectrum.observable
    tables = []
    failures = {}
    for label, spec in config.cloud.variants():
        params = _incident_params(config)
        params["detunings"] = list(config.detunings)
        params["sweep_mode"] = config.solver.sweep_mode
        params["eigen_threshold"] = config.solver.eigen_threshold
        if observable == "total":
            task = "sigma_spectrum"
        else:
            task = "directional_spectrum"
            params["angles_deg"] = list(config.spectrum.angles_deg)
            if observable == "polarization":
                params["channels"] = [CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR]
        job = EnsembleJob(
            cloud=spec,
            task=task,
            params=params,
            n_configs=config.montecarlo.n_configs,
            master_seed=config.montecarlo.master_seed,
        )
        stats = run_ensemble(job, workers=workers)
        suffix = _label_suffix(label)
        columns = [Column("detuning", UNIT_RATE, detunings)]
        if observable == "total":
            columns.append(Column(f"sigma{suffix}", UNIT_AREA, stats.mean))
            columns.append(Column(f"sigma_sem{suffix}", UNIT_AREA, stats.sem))
        elif observable == "directional":
            grid = stats.mean.reshape(len(config.spectrum.angles_deg), len(detunings))
            sems = stats.sem.reshape(grid.shape)
            for i, angle in enumerate(config.spectrum.angles_deg):
                columns.append(Column(f"I[theta={angle!r}]{suffix}", UNIT_AREA_PER_SR, grid[i]))
                columns.append(Column(f"I_sem[theta={angle!r}]{suffix}", UNIT_AREA_PER_SR, sems[i]))
        else:
            grid = stats.mean.reshape(2, len(detunings))
            sems = stats.sem.reshape(grid.shape)
            for i, channel in enumerate(("parallel", "perpendicular")):
                columns.append(Column(f"I_{channel}{suffix}", UNIT_AREA_PER_SR, grid[i]))
                columns.append(Column(f"I_{channel}_sem{suffix}", UNIT_AREA_PER_SR, sems[i]))
        name = "spectrum" if not label else f"spectrum_{label}"
        meta = {"cloud": label or "base", "n_atoms": spec.n_atoms, "observable": observable}
        if observable != "total":
            meta["angles_deg"] = list(config.spectrum.angles_deg)
        tables.append(Table(name=name, columns=columns, meta=meta))
        if stats.failures:
            failures[name] = list(stats.failures)
    return tables, {"failed_configs": failures}, {}


def _angular(config: RunConfig, workers: int):
    thetas = np.radians(np.asarray(config.angles_deg))
    tables = []
    failures = {}
    for label, spec in config.cloud.variants():
        params = _incident_params(config)
        params["thetas"] = [float(t) for t in thetas]
        params["n_phi"] = config.angles_n_phi
        params["channels"] = [CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR]
        job = EnsembleJob(
            cloud=spec,
            task="angular_channels",
            params=params,
            n_configs=config.montecarlo.n_configs,
            master_seed=config.montecarlo.master_seed,
        )
        stats = run_ensemble(job, workers=workers)
        means = stats.mean.reshape(2, len(thetas))
        sems = stats.sem.reshape(2, len(thetas))
        suffix = _label_suffix(label)
        name = "angular" if not label else f"angular_{label}"
        tables.append(
            Table(
                name=name,
                columns=[
                    Column("theta", UNIT_DEG, np.asarray(config.angles_deg)),
                    Column(f"I_parallel{suffix}", UNIT_AREA_PER_SR, means[0]),
                    Column(f"I_parallel_sem{suffix}", UNIT_AREA_PER_SR, sems[0]),
                    Column(f"I_perpendicular{suffix}", UNIT_AREA_PER_SR, means[1]),
                    Column(f"I_perpendicular_sem{suffix}", UNIT_AREA_PER_SR, sems[1]),
                ],
                meta={"cloud": label or "base", "n_atoms": spec.n_atoms},
            )
        )
        if stats.failures:
            failures[name] = list(stats.failures)
    return tables, {"failed_configs": failures}, {}


def _cbs(config: RunConfig, workers: int):
    cbs = config.cbs
    thetas = np.linspace(math.radians(cbs.theta_min_deg), math.pi, cbs.n_theta)
    window = {
        channel: tuple(math.radians(v) for v in cbs.channel_window(channel))
        for channel in (CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR)
    }
    tables = []
    summary_rows = []
    failures = {}
    for label, spec in config.cloud.variants():
        params = _incident_params(config)
        params["thetas"] = [float(t) for t in thetas]
        params["n_phi"] = cbs.n_phi
        params["channels"] = [CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR]
        job = EnsembleJob(
            cloud=spec,
            task="angular_channels",
            params=params,
            n_configs=config.montecarlo.n_configs,
            master_seed=config.montecarlo.master_seed,
        )
        stats = run_ensemble(job, workers=workers)
        means = stats.mean.reshape(2, len(thetas))
        sems = stats.sem.reshape(2, len(thetas))
        cone = cone_from_curves(
            thetas,
            {CHANNEL_PARALLEL: means[0], CHANNEL_PERPENDICULAR: means[1]},
            {CHANNEL_PARALLEL: sems[0], CHANNEL_PERPENDICULAR: sems[1]},
            background_window=window,
            n_configs=stats.n_configs,
        )
        suffix = _label_suffix(label)
        name = "cone" if not label else f"cone_{label}"
        tables.append(
            Table(
                name=name,
                columns=[
                    Column("theta", UNIT_DEG, np.degrees(thetas)),
                    Column(f"I_parallel{suffix}", UNIT_AREA_PER_SR, means[0]),
                    Column(f"I_parallel_sem{suffix}", UNIT_AREA_PER_SR, sems[0]),
                    Column(f"I_perpendicular{suffix}", UNIT_AREA_PER_SR, means[1]),
                    Column(f"I_perpendicular_sem{suffix}", UNIT_AREA_PER_SR, sems[1]),
                ],
                meta={
                    "cloud": label or "base",
                    "n_atoms": spec.n_atoms,
                    "parallel_window_deg": list(cbs.channel_window(CHANNEL_PARALLEL)),
                    "perpendicular_window_deg": list(cbs.channel_window(CHANNEL_PERPENDICULAR)),
                },
            )
        )
        for channel in (CHANNEL_PARALLEL, CHANNEL_PERPENDICULAR):
            summary_rows.append(
                (
                    label or "base",
                    channel,
                    cone.background[channel],
                    float(cone.intensity[channel][-1]),
                    cone.enhancement[channel],
                    cone.enhancement_sem[channel],
                )
            )
        if stats.failures:
            failures[name] = list(stats.failures)
    summary = Table(
        name="cbs_summary",
        columns=[
            Column("cloud", UNIT_NONE, np.asarray([r[0] for r in summary_rows])),
            Column("channel", UNIT_NONE, np.asarray([r[1] for r in summary_rows])),
            Column("background", UNIT_AREA_PER_SR, np.asarray([r[2] for r in summary_rows])),
            Column("peak", UNIT_AREA_PER_SR, np.asarray([r[3] for r in summary_rows])),
            Column("enhancement", UNIT_NONE, np.asarray([r[4] for r in summary_rows])),
            Column("enhancement_sem", UNIT_NONE, np.asarray([r[5] for r in summary_rows])),
        ],
        meta={
            "parallel_window_deg": list(cbs.channel_window(CHANNEL_PARALLEL)),
            "perpendicular_window_deg": list(cbs.channel_window(CHANNEL_PERPENDICULAR)),
        },
    )
    tables.append(summary)
    return tables, {"failed_configs": failures}, {}


def _fresnel(config: RunConfig, workers: int):
    fresnel = config.fresnel
    tables = []
    summary_rows = []
    failures = {}
    profile_columns = None
    for label, spec in config.cloud.variants():
        # negative margins tighten the grid around the shadow disk (cheap
        # slope studies); never shrink below the disk itself
        shadow_radius = fresnel.shadow_fraction * spec.radius
        half_width = max(spec.radius + fresnel.margin, shadow_radius + 2 * fresnel.plane_step)
        n_half = int(round(half_width / fresnel.plane_step))
        xs = np.linspace(-n_half * fresnel.plane_step, n_half * fresnel.plane_step, 2 * n_half + 1)
        plane_z = 0.5 * spec.length + fresnel.plane_offset
        params = _incident_params(config)
        params["grid_x"] = [float(x) for x in xs]
        params["grid_y"] = [float(y) for y in xs]
        params["plane_z"] = plane_z
        job = EnsembleJob(
            cloud=spec,
            task="field_plane",
            params=params,
            n_configs=config.montecarlo.n_configs,
            master_seed=config.montecarlo.master_seed,
        )
        stats = run_ensemble(job, workers=workers)
        mean_field = stats.mean.reshape(len(xs), len(xs), 3)
        sem_field = stats.sem.reshape(len(xs), len(xs), 3)
        raw_intensity = np.sum(np.abs(mean_field) ** 2, axis=-1)
        # |mean| ** 2 carries a positive O(var/n) bias; subtract it so thick
        # clouds (small T, large speckle) stay unbiased
        bias = np.sum(sem_field**2, axis=-1)
        intensity = np.clip(raw_intensity - bias, 0.0, None)
        xx, yy = np.meshgrid(xs, xs, indexing="xy")
        mask = np.hypot(xx, yy) <= shadow_radius
        transmission = float(intensity[mask].mean())
        optical_thickness = -math.log(transmission) if transmission > 0 else math.inf
        dilute = spec.density * SIGMA_RESONANT * spec.length
        suffix = _label_suffix(label)
        mid = len(xs) // 2
        if profile_columns is None:
            profile_columns = [Column("x", UNIT_LENGTH, xs)]
        profile_columns.append(Column(f"I_coh{suffix}", UNIT_NONE, intensity[mid, :]))
        summary_rows.append(
            (label or "base", spec.density, float(spec.length), spec.n_atoms, transmission, optical_thickness, dilute)
        )
        if stats.failures:
            failures[label or "base"] = list(stats.failures)
    tables.append(
        Table(
            name="fresnel_profile",
            columns=profile_columns,
            meta={
                "plane_offset": fresnel.plane_offset,
                "row": "y=0",
                "intensity": "coherent (configuration-averaged field, squared)",
            },
        )
    )
    tables.append(
        Table(
            name="fresnel_summary",
            columns=[
                Column("cloud", UNIT_NONE, np.asarray([r[0] for r in summary_rows])),
                Column("density", f"{UNIT_LENGTH}^-3", np.asarray([r[1] for r in summary_rows])),
                Column("length", UNIT_LENGTH, np.asarray([r[2] for r in summary_rows])),
                Column("n_atoms", UNIT_NONE, np.asarray([r[3] for r in summary_rows])),
                Column("transmission", UNIT_NONE, np.asarray([r[4] for r in summary_rows])),
                Column("optical_thickness", UNIT_NONE, np.asarray([r[5] for r in summary_rows])),
                Column("dilute_thickness", UNIT_NONE, np.asarray([r[6] for r in summary_rows])),
            ],
            meta={"shadow_fraction": fresnel.shadow_fraction},
        )
    )
    return tables, {"failed_configs": failures}, {}


def _eigenmodes(config: RunConfig, workers: int):
    del workers  # deterministic direct loop; solves are already threaded
    rows = []
    for label, spec in config.cloud.variants():
        for i in range(config.montecarlo.n_configs):
            seed = config_seed(config.montecarlo.master_seed, i)
            configuration = sample_configuration(spec, seed)
            values = np.sort_complex(mode_spectrum(build_hamiltonian(configuration)).eigenvalues)
            for j, value in enumerate(values):
                rows.append((label or "base", i, j, value.real, value.imag))
    table = Table(
        name="eigenmodes",
        columns=[
            Column("cloud", UNIT_NONE, np.asarray([r[0] for r in rows])),
            Column("config_index", UNIT_NONE, np.asarray([r[1] for r in rows])),
            Column("mode_index", UNIT_NONE, np.asarray([r[2] for r in rows])),
            Column("shift", UNIT_RATE, np.asarray([r[3] for r in rows])),
            Column("im_part", UNIT_RATE, np.asarray([r[4] for r in rows])),
        ],
        meta={"note": "collective width = -2 * im_part"},
    )
    return [table], {}, {}


def _single_shot(config: RunConfig, workers: int):
    del workers
    label, spec = config.cloud.variants()[0]
    seed = config_seed(config.montecarlo.master_seed, 0)
    configuration = sample_configuration(spec, seed)
    incident = incident_from_params(_incident_params(config))
    hamiltonian = build_hamiltonian(configuration)
    amplitudes = ResolventFactorization(hamiltonian, incident.detuning).solve(
        incident_vector(configuration, incident)
    )
    sigma_ot = total_cross_section_optical_theorem(amplitudes, configuration, incident)
    sigma_quad, info = total_cross_section_quadrature(
        amplitudes,
        configuration,
        incident,
        n_theta=config.quadrature.n_theta,
        n_phi=config.quadrature.n_phi,
        full_output=True,
    )
    table = Table(
        name="single_shot",
        columns=[
            Column("n_atoms", UNIT_NONE, np.asarray([configuration.n_atoms])),
            Column("seed", UNIT_NONE, np.asarray([seed])),
            Column("detuning", UNIT_RATE, np.asarray([incident.detuning])),
            Column("sigma_optical_theorem", UNIT_AREA, np.asarray([sigma_ot])),
            Column("sigma_quadrature", UNIT_AREA, np.asarray([sigma_quad])),
            Column("quadrature_error", UNIT_AREA, np.asarray([info["error"]])),
            Column("residual", UNIT_NONE, np.asarray([amplitudes.residual])),
            Column("condition_estimate", UNIT_NONE, np.asarray([amplitudes.condition_estimate])),
        ],
        meta={"quadrature_orders": list(info["orders"])},
    )
    extra = {}
    artifacts = {}
    if config.singleshot.dump_matrix:
        eigenvalues = np.sort_complex(mode_spectrum(hamiltonian).eigenvalues)
        artifacts["hamiltonian.bin"] = hamiltonian_dump_bytes(hamiltonian, eigenvalues)
        extra["hamiltonian_dump"] = "hamiltonian.bin"
    return [table], extra, artifacts


_EXPERIMENTS = {
    "spectrum": _spectrum,
    "angular": _angular,
    "cbs": _cbs,
    "fresnel": _fresnel,
    "eigenmodes": _eigenmodes,
    "single-shot": _single_shot,
}


# ---------------------------------------------------------------------------
# bundle I/O: CSV tables plus a JSON metadata document
# ---------------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, int)):
        return str(int(value))
    return str(value)


def write_table(table: Table, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# coopscat table v1\n")
        fh.write(f"# table={table.name}\n")
        for key, value in sorted(table.meta.items()):
            fh.write(f"# meta {key}={json.dumps(value)}\n")
        units = ", ".join(f"{c.name}={c.units}" for c in table.columns)
        fh.write(f"# units: {units}\n")
        fh.write(",".join(c.name for c in table.columns) + "\n")
        n_rows = len(table.columns[0].values)
        for i in range(n_rows):
            fh.write(",".join(_format_cell(c.values[i]) for c in table.columns) + "\n")


def read_table(path) -> Table:
    name = None
    meta: dict = {}
    units: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# table="):
                name = line.removeprefix("# table=")
            elif line.startswith("# meta "):
                key, _, value = line.removeprefix("# meta ").partition("=")
                meta[key] = json.loads(value)
            elif line.startswith("# units: "):
                for pair in line.removeprefix("# units: ").split(", "):
                    # column labels may embed '=' (e.g. sigma[n=0.01]);
                    # the unit is whatever follows the last one
                    col, _, unit = pair.rpartition("=")
                    units[col] = unit
            elif line.startswith("#"):
                continue
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(line.split(","))
    if name is None or header is None:
        raise ValueError(f"{path} is not a coopscat table")
    columns = []
    for j, col_name in enumerate(header):
        raw = [row[j] for row in rows]
        try:
            values = np.asarray([float(v) for v in raw])
        except ValueError:
            values = np.asarray(raw)
        columns.append(Column(col_name, units.get(col_name, UNIT_NONE), values))
    return Table(name=name, columns=columns, meta=meta)


def write_bundle(bundle: ResultBundle, out_dir) -> list[str]:
    """Write metadata.json and one CSV per table; returns written paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    meta_path = os.path.join(out_dir, "metadata.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(bundle.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)
    for name, table in sorted(bundle.tables.items()):
        path = os.path.join(out_dir, f"{name}.csv")
        write_table(table, path)
        written.append(path)
    for name, blob in sorted(bundle.artifacts.items()):
        path = os.path.join(out_dir, name)
        with open(path, "wb") as fh:
            fh.write(blob)
        written.append(path)
    return written


def read_bundle(out_dir) -> ResultBundle:
    import os

    meta_path = os.path.join(out_dir, "metadata.json")
    if not os.path.exists(meta_path):
        raise MissingExperimentData(f"no metadata.json under {out_dir}")
    with open(meta_path, "r", encoding="utf-8") as fh:
        metadata = json.load(fh)
    tables = {}
    for entry in sorted(os.listdir(out_dir)):
        if entry.endswith(".csv"):
            table = read_table(os.path.join(out_dir, entry))
            tables[table.name] = table
    return ResultBundle(metadata=metadata, tables=tables)
