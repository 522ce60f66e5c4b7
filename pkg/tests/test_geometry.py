import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from coopscat.geometry import (
    AtomConfiguration,
    CloudSpec,
    InvalidCloudSpec,
    PackingError,
    load_configuration,
    min_pair_distance,
    sample_configuration,
    save_configuration,
    validate_configuration,
)


def test_atom_count_rounds_density_volume():
    # 2.387e-4 * (4/3) pi 10^3 = 0.99987 -> a single atom
    spec = CloudSpec(shape="uniform-sphere", radius=10.0, density=2.387e-4)
    assert spec.n_atoms == 1
    spec = CloudSpec(shape="uniform-sphere", radius=15.0, density=0.2)
    assert spec.n_atoms == 2827
    spec = CloudSpec(shape="cylinder", radius=10.0, length=20.0, density=5e-3)
    assert spec.n_atoms == round(5e-3 * math.pi * 100 * 20)
    spec = CloudSpec(shape="gaussian-sphere", radius=8.0, density=1e-2)
    assert spec.n_atoms == round(1e-2 * (2 * math.pi) ** 1.5 * 512)


def test_single_atom_inside_sphere():
    spec = CloudSpec(shape="uniform-sphere", radius=10.0, density=2.387e-4)
    config = sample_configuration(spec, 3)
    assert config.n_atoms == 1
    assert np.linalg.norm(config.positions[0]) <= 10.0


def test_determinism_bit_identical():
    spec = CloudSpec(shape="gaussian-sphere", radius=5.0, density=0.02)
    a = sample_configuration(spec, 99)
    b = sample_configuration(spec, 99)
    assert np.array_equal(a.positions, b.positions)
    c = sample_configuration(spec, 100)
    assert not np.array_equal(a.positions, c.positions)


def test_invalid_specs_rejected():
    with pytest.raises(InvalidCloudSpec):
        CloudSpec(shape="uniform-sphere", radius=-1.0, density=0.1)
    with pytest.raises(InvalidCloudSpec):
        CloudSpec(shape="uniform-sphere", radius=1.0, density=0.0)
    with pytest.raises(InvalidCloudSpec):
        CloudSpec(shape="cylinder", radius=1.0, density=0.1)  # missing length
    with pytest.raises(InvalidCloudSpec):
        CloudSpec(shape="uniform-sphere", radius=1.0, density=0.1, length=2.0)
    with pytest.raises(InvalidCloudSpec):
        CloudSpec(shape="pyramid", radius=1.0, density=0.1)


@settings(max_examples=20, deadline=None)
@given(
    shape=st.sampled_from(["uniform-sphere", "gaussian-sphere", "cylinder"]),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_membership_and_separation(shape, seed):
    spec = CloudSpec(
        shape=shape,
        radius=4.0,
        density=0.05,
        length=6.0 if shape == "cylinder" else None,
        min_separation=0.05,
    )
    config = sample_configuration(spec, seed)
    report = validate_configuration(config)
    assert report.inside_shape
    assert report.min_pair_distance >= spec.min_separation
    assert not report.has_degenerate_atoms


def test_radial_distribution_uniform_sphere():
    spec = CloudSpec(shape="uniform-sphere", radius=15.0, density=0.2)
    radii = []
    for seed in range(4):
        config = sample_configuration(spec, seed)
        radii.append(np.linalg.norm(config.positions, axis=1))
    radii = np.concatenate(radii)
    assert radii.size > 10_000
    result = kstest(radii, lambda r: (r / 15.0) ** 3)
    assert result.pvalue >= 0.01


def test_packing_error_when_density_incompatible_with_exclusion():
    spec = CloudSpec(shape="uniform-sphere", radius=1.0, density=10.0, min_separation=1.5)
    with pytest.raises(PackingError):
        sample_configuration(spec, 0)


def test_validate_reports():
    spec = CloudSpec(shape="uniform-sphere", radius=10.0, density=2.387e-4, atom_count=2)
    degenerate = AtomConfiguration(
        positions=np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), seed=0, spec=spec
    )
    report = validate_configuration(degenerate)
    assert report.has_degenerate_atoms
    assert report.degenerate_pairs == ((0, 1),)

    single = AtomConfiguration(positions=np.array([[0.0, 0.0, 1.0]]), seed=0, spec=spec)
    report = validate_configuration(single)
    assert report.min_pair_distance == math.inf

    spec100 = CloudSpec(shape="uniform-sphere", radius=6.0, density=0.11052)
    config = sample_configuration(spec100, 5)
    report = validate_configuration(config)
    assert report.n_atoms == config.n_atoms
    assert report.bounding_radius <= 6.0


def test_min_pair_distance_trivial_cases():
    assert min_pair_distance(np.zeros((1, 3))) == math.inf
    pts = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 2.0], [0.0, 0.0, 5.0]])
    assert min_pair_distance(pts) == 2.0


def test_save_load_round_trip(tmp_path):
    spec = CloudSpec(shape="cylinder", radius=3.0, length=5.0, density=0.05)
    config = sample_configuration(spec, 77)
    path = tmp_path / "cloud.txt"
    save_configuration(config, path)
    loaded = load_configuration(path)
    assert loaded.spec == spec
    assert loaded.seed == 77
    np.testing.assert_allclose(loaded.positions, config.positions, rtol=0, atol=1e-15)
