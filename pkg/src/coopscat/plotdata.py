"""Per-figure CSV layouts for the companion plot scripts.

Each figure id maps a result bundle onto a fixed layout: one x column
followed by one y column per curve, the header naming each curve by its
parameter value.  The plot scripts stay physics-free; everything they
draw is produced here.
"""

from __future__ import annotations

import os

from .experiments import Column, MissingExperimentData, ResultBundle, Table, write_table

FIGURES = ("f1", "f2", "f4", "f5", "f6", "f7", "f8", "f9")


def _curve_columns(table: Table, prefix: str) -> list[Column]:
    """Value columns (mean, not sem) starting with the given prefix."""
    out = []
    for col in table.columns:
        if col.name.startswith(prefix) and "_sem" not in col.name and "sem[" not in col.name:
            out.append(col)
    return out


def _require_tables(bundle: ResultBundle, prefix: str, figure: str) -> list[Table]:
    tables = [t for name, t in sorted(bundle.tables.items()) if name.startswith(prefix)]
    if not tables:
        raise MissingExperimentData(
            f"figure {figure} needs tables {prefix!r}*; bundle has {sorted(bundle.tables)}"
        )
    return tables


def _fresnel_profile(bundle: ResultBundle, figure: str) -> Table:
    source = bundle.table("fresnel_profile")
    columns = [Column("x", source.columns[0].units, source.column("x"))]
    columns += _curve_columns(source, "I_coh")
    return Table(name=figure, columns=columns, meta={"source": "fresnel_profile"})


def _fresnel_thickness(bundle: ResultBundle, figure: str) -> Table:
    source = bundle.table("fresnel_summary")
    return Table(
        name=figure,
        columns=[
            Column("density", "lambdabar^-3", source.column("density")),
            Column("optical_thickness", "dimensionless", source.column("optical_thickness")),
            Column("dilute_thickness", "dimensionless", source.column("dilute_thickness")),
        ],
        meta={"source": "fresnel_summary"},
    )


def _angular_channels(bundle: ResultBundle, figure: str) -> Table:
    tables = _require_tables(bundle, "angular", figure)
    source = tables[0]
    columns = [Column("theta", "deg", source.column("theta"))]
    columns += _curve_columns(source, "I_parallel")
    columns += _curve_columns(source, "I_perpendicular")
    return Table(name=figure, columns=columns, meta={"source": source.name})


def _cbs_cones(bundle: ResultBundle, figure: str) -> Table:
    tables = _require_tables(bundle, "cone", figure)
    columns = [Column("theta", "deg", tables[0].column("theta"))]
    for table in tables:
        columns += _curve_columns(table, "I_parallel")
    return Table(name=figure, columns=columns, meta={"source": "cbs cones, parallel channel"})


def _spectra(bundle: ResultBundle, figure: str, prefix: str) -> Table:
    tables = _require_tables(bundle, "spectrum", figure)
    columns = [Column("detuning", "gamma", tables[0].column("detuning"))]
    for table in tables:
        columns += _curve_columns(table, prefix)
    if len(columns) == 1:
        raise MissingExperimentData(f"figure {figure}: no {prefix!r} curves in spectrum tables")
    return Table(name=figure, columns=columns, meta={"source": "spectrum"})


def _directional(bundle: ResultBundle, figure: str) -> Table:
    return _spectra(bundle, figure, "I[")


def _polarization(bundle: ResultBundle, figure: str) -> Table:
    return _spectra(bundle, figure, "I_")


def _total_spectra(bundle: ResultBundle, figure: str) -> Table:
    return _spectra(bundle, figure, "sigma")


_BUILDERS = {
    "f1": _fresnel_profile,  # Fresnel shadow profile vs optical thickness
    "f2": _fresnel_thickness,  # optical thickness vs density
    "f4": _angular_channels,  # angular distribution, two helicity channels
    "f5": _cbs_cones,  # CBS cone vs density
    "f6": _total_spectra,  # total cross-section spectra vs density
    "f7": _total_spectra,  # total cross-section spectra vs radius
    "f8": _directional,  # spectra at fixed angles
    "f9": _polarization,  # polarization-resolved spectrum at one angle
}


def emit_plot_data(bundle: ResultBundle, figure: str, out_dir) -> str:
    """Write the figure CSV; returns its path."""
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    table = _BUILDERS[figure](bundle, figure)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{figure}.csv")
    write_table(table, path)
    return path
