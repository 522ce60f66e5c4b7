import numpy as np
import pytest

from coopscat.geometry import CloudSpec, sample_configuration


@pytest.fixture
def small_cloud():
    """Dilute 20-atom sphere used by several solver/observable tests."""
    spec = CloudSpec(shape="uniform-sphere", radius=8.0, density=1e-2, atom_count=20)
    return sample_configuration(spec, 1234)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)
