import pytest

from coopscat.config import (
    ConfigSemanticError,
    ConfigSyntaxError,
    parse_config,
    serialize_config,
)

MINIMAL_SPECTRUM = """
experiment = "spectrum"

[cloud]
shape = "uniform-sphere"
radius = 10.0
density = 0.01

[detunings]
start = -5.0
stop = 5.0
num = 11
"""


def test_minimal_config_gets_documented_defaults():
    config = parse_config(MINIMAL_SPECTRUM)
    assert config.experiment == "spectrum"
    assert config.cloud.min_separation == 0.01
    assert config.incident.polarization == "helicity+"
    assert config.incident.direction == (0.0, 0.0, 1.0)
    assert config.montecarlo.n_configs == 100
    assert config.montecarlo.master_seed == 1
    assert config.solver.sweep_mode == "auto"
    assert config.quadrature.n_theta == 64
    assert config.cbs.background_window_deg == (150.0, 175.0)
    assert config.detunings == tuple(-5.0 + i * 1.0 for i in range(11))


def test_round_trip_is_identity():
    config = parse_config(MINIMAL_SPECTRUM)
    text = serialize_config(config)
    assert parse_config(text) == config


def test_round_trip_with_sweeps_and_options():
    text = """
experiment = "cbs"

[cloud]
shape = "gaussian-sphere"
radius = 8.0
densities = [0.01, 0.1]

[incident]
direction = [0.0, 0.0, 1.0]
polarization = "helicity+"
detuning = 0.0

[montecarlo]
n_configs = 2000
master_seed = 7
workers = 4

[cbs]
theta_min_deg = 145.0
n_theta = 61
n_phi = 6
background_window_deg = [150.0, 170.0]
parallel_window_deg = [135.0, 150.0]
perpendicular_window_deg = [172.0, 179.0]

[output]
directory = "runs/cbs-test"
"""
    config = parse_config(text)
    assert config.cloud.densities == (0.01, 0.1)
    assert parse_config(serialize_config(config)) == config


def test_syntax_error_carries_line_number():
    with pytest.raises(ConfigSyntaxError) as err:
        parse_config("experiment = 'spectrum'\n[cloud\nradius = 1")
    assert "line" in str(err.value)


def test_unknown_keys_rejected_by_qualified_name():
    with pytest.raises(ConfigSemanticError, match="cloud.flavor"):
        parse_config(MINIMAL_SPECTRUM + "\n[cloud.flavor]\nx = 1\n")
    bad = MINIMAL_SPECTRUM.replace("density = 0.01", "density = 0.01\ncolour = 3")
    with pytest.raises(ConfigSemanticError, match="unknown key cloud.colour"):
        parse_config(bad)
    with pytest.raises(ConfigSemanticError, match="unknown key document.extra"):
        parse_config("extra = 1\n" + MINIMAL_SPECTRUM)


def test_negative_density_names_the_key():
    bad = MINIMAL_SPECTRUM.replace("density = 0.01", "density = -0.3")
    with pytest.raises(ConfigSemanticError, match="density"):
        parse_config(bad)


def test_cylinder_without_length_is_semantic_error():
    text = """
experiment = "fresnel"

[cloud]
shape = "cylinder"
radius = 10.0
density = 0.005
"""
    with pytest.raises(ConfigSemanticError, match="length"):
        parse_config(text)


def test_fresnel_requires_cylinder():
    text = """
experiment = "fresnel"

[cloud]
shape = "uniform-sphere"
radius = 10.0
density = 0.005
"""
    with pytest.raises(ConfigSemanticError, match="cylinder"):
        parse_config(text)


def test_spectrum_requires_detuning_grid():
    text = """
experiment = "spectrum"

[cloud]
shape = "uniform-sphere"
radius = 10.0
density = 0.01
"""
    with pytest.raises(ConfigSemanticError, match="detunings"):
        parse_config(text)


def test_grid_forms_equivalent():
    explicit = parse_config(
        MINIMAL_SPECTRUM.replace(
            "start = -5.0\nstop = 5.0\nnum = 11",
            "values = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0]",
        )
    )
    ranged = parse_config(MINIMAL_SPECTRUM)
    assert explicit.detunings == ranged.detunings


def test_grid_rejects_mixed_forms():
    bad = MINIMAL_SPECTRUM.replace("num = 11", "num = 11\nvalues = [1.0]")
    with pytest.raises(ConfigSemanticError, match="values or start/stop/num"):
        parse_config(bad)


def test_atom_count_only_cloud_allowed():
    text = """
experiment = "eigenmodes"

[cloud]
shape = "uniform-sphere"
radius = 10.0
atom_count = 2

[montecarlo]
n_configs = 1
"""
    config = parse_config(text)
    assert config.cloud.atom_count == 2
    assert config.cloud.density is not None  # derived for metadata
    assert parse_config(serialize_config(config)) == config


def test_wrong_type_is_named():
    bad = MINIMAL_SPECTRUM.replace("radius = 10.0", 'radius = "big"')
    with pytest.raises(ConfigSemanticError, match="cloud.radius"):
        parse_config(bad)


def test_polarization_vocabulary_enforced():
    bad = MINIMAL_SPECTRUM + '\n[incident]\npolarization = "elliptical"\n'
    with pytest.raises(ConfigSemanticError, match="incident.polarization"):
        parse_config(bad)
