import numpy as np
import pytest

from coopscat.geometry import AtomConfiguration, CloudSpec, sample_configuration
from coopscat.kernel import IncidentWave, green_tensor_polar, incident_vector
from coopscat.solver import (
    CoincidentAtoms,
    EigenResolvent,
    ResolventFactorization,
    build_hamiltonian,
    hamiltonian_dump_bytes,
    load_hamiltonian_dump,
    mode_spectrum,
    save_hamiltonian,
    solve_resolvent,
    sweep_detunings,
)


def _config(positions, n=None):
    n = len(positions) if n is None else n
    spec = CloudSpec(shape="uniform-sphere", radius=50.0, density=1e-5, atom_count=n)
    return AtomConfiguration(positions=np.asarray(positions, dtype=float), seed=0, spec=spec)


def _pair_config(kr):
    return _config([[0.0, 0.0, 0.0], [0.0, 0.0, kr]])


def test_single_atom_hamiltonian():
    hamiltonian = build_hamiltonian(_config([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(hamiltonian.matrix, -0.5j * np.eye(3), atol=1e-15)


def test_two_atom_blocks_and_symmetry():
    config = _pair_config(1.3)
    hamiltonian = build_hamiltonian(config)
    matrix = hamiltonian.matrix
    block = green_tensor_polar([0.0, 0.0, 1.3])
    np.testing.assert_allclose(matrix[:3, 3:], block, rtol=1e-13)
    np.testing.assert_allclose(matrix[3:, :3], block, rtol=1e-13)
    np.testing.assert_allclose(matrix, matrix.T, atol=1e-14)


@pytest.mark.parametrize("kr", [0.5, 1.0, 3.0])
def test_two_atom_eigenvalues_analytic(kr):
    hamiltonian = build_hamiltonian(_pair_config(kr))
    block = green_tensor_polar([0.0, 0.0, kr])
    expected = np.array(
        [
            -0.5j + block[2, 2],
            -0.5j - block[2, 2],
            -0.5j + block[0, 0],
            -0.5j + block[0, 0],
            -0.5j - block[0, 0],
            -0.5j - block[0, 0],
        ]
    )
    values = mode_spectrum(hamiltonian).eigenvalues
    got = np.sort_complex(values)
    want = np.sort_complex(expected)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)


def test_close_pair_superradiant_and_subradiant():
    hamiltonian = build_hamiltonian(_pair_config(0.05))
    widths = mode_spectrum(hamiltonian).widths
    assert widths.max() > 1.9  # symmetric states decay almost twice as fast
    assert widths.min() < 0.01  # antisymmetric states are long lived
    assert widths.sum() == pytest.approx(6 * 0.5 * 2, rel=1e-12)


def test_trace_identity_random_cloud():
    spec = CloudSpec(shape="uniform-sphere", radius=6.0, density=0.11052)
    config = sample_configuration(spec, 17)
    assert config.n_atoms == 100
    hamiltonian = build_hamiltonian(config)
    trace = np.trace(hamiltonian.matrix)
    expected = -1.5j * config.n_atoms
    assert abs(trace - expected) / abs(expected) < 1e-10
    values = mode_spectrum(hamiltonian).eigenvalues
    assert abs(values.sum() - expected) / abs(expected) < 1e-10


def test_all_mode_widths_positive():
    for seed in range(3):
        spec = CloudSpec(shape="gaussian-sphere", radius=4.0, density=0.05)
        config = sample_configuration(spec, seed)
        widths = mode_spectrum(build_hamiltonian(config)).widths
        assert (widths > -1e-10).all()


def test_coincident_atoms_rejected():
    config = _config([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(CoincidentAtoms):
        build_hamiltonian(config)


def test_single_atom_resolvent_analytic():
    config = _config([[0.0, 0.0, 0.0]])
    hamiltonian = build_hamiltonian(config)
    for detuning in (-2.0, 0.0, 0.7):
        amp = solve_resolvent(hamiltonian, detuning, np.array([1.0, 0.0, 0.0]))
        expected = 1.0 / (detuning + 0.5j)
        assert amp.u[0] == pytest.approx(expected, rel=1e-12)
        assert abs(amp.u[1]) == 0.0 and abs(amp.u[2]) == 0.0


def test_resolvent_residual_contract():
    spec = CloudSpec(shape="uniform-sphere", radius=4.0, density=0.2)
    config = sample_configuration(spec, 23)
    assert config.n_atoms == 54
    hamiltonian = build_hamiltonian(config)
    wave = IncidentWave.circular([0.0, 0.0, 1.0], +1)
    rhs = incident_vector(config, wave)
    amp = solve_resolvent(hamiltonian, 0.3, rhs)
    assert amp.residual <= 1e-10
    assert np.isfinite(amp.condition_estimate)
    # independent residual check against the assembled system
    matrix = 0.3 * np.eye(hamiltonian.dimension) - hamiltonian.matrix
    res = np.linalg.norm(matrix @ amp.u - rhs) / np.linalg.norm(rhs)
    assert res <= 1e-10


def test_lu_and_eigen_paths_agree(small_cloud):
    hamiltonian = build_hamiltonian(small_cloud)
    wave = IncidentWave.circular([0.0, 0.0, 1.0], +1)
    rhs = incident_vector(small_cloud, wave)
    eigen = EigenResolvent(hamiltonian)
    for detuning in (-1.5, 0.0, 2.0):
        lu = ResolventFactorization(hamiltonian, detuning).solve(rhs).u
        sp = eigen.amplitudes(detuning, rhs)
        assert np.linalg.norm(sp - lu) / np.linalg.norm(lu) < 1e-8


def test_sweep_modes_cross_check(small_cloud):
    hamiltonian = build_hamiltonian(small_cloud)
    wave = IncidentWave.circular([0.0, 0.0, 1.0], +1)
    rhs = incident_vector(small_cloud, wave)
    detunings = np.linspace(-5, 5, 200)
    lu = sweep_detunings(hamiltonian, detunings, rhs, mode="lu")
    eig = sweep_detunings(hamiltonian, detunings, rhs, mode="eigen")
    worst = max(
        np.linalg.norm(a.u - b.u) / np.linalg.norm(a.u) for a, b in zip(lu, eig)
    )
    assert worst <= 1e-8
    auto = sweep_detunings(hamiltonian, detunings, rhs, mode="auto")
    np.testing.assert_array_equal(auto[0].u, eig[0].u)  # auto picks eigen for long grids
    single = sweep_detunings(hamiltonian, [0.4], rhs, mode="auto")
    direct = solve_resolvent(hamiltonian, 0.4, rhs)
    np.testing.assert_array_equal(single[0].u, direct.u)


def test_single_atom_sweep_lorentzian():
    config = _config([[0.0, 0.0, 0.0]])
    hamiltonian = build_hamiltonian(config)
    rhs = np.array([1.0, 0.0, 0.0])
    detunings = np.linspace(-3, 3, 41)
    for amp, detuning in zip(sweep_detunings(hamiltonian, detunings, rhs), detunings):
        assert amp.u[0] == pytest.approx(1.0 / (detuning + 0.5j), rel=1e-10)


def test_dump_round_trip(tmp_path):
    config = _pair_config(0.9)
    hamiltonian = build_hamiltonian(config)
    values = np.sort_complex(mode_spectrum(hamiltonian).eigenvalues)
    path = tmp_path / "sigma.bin"
    save_hamiltonian(hamiltonian, path, values)
    matrix, eigenvalues = load_hamiltonian_dump(path)
    np.testing.assert_array_equal(matrix, hamiltonian.matrix)
    np.testing.assert_array_equal(eigenvalues, values)
    blob = hamiltonian_dump_bytes(hamiltonian, values)
    assert path.read_bytes() == blob


def test_exact_kernel_hamiltonian_matches_polar_on_resonance():
    spec = CloudSpec(shape="uniform-sphere", radius=3.0, density=0.05, atom_count=4)
    config = sample_configuration(spec, 12)
    polar = build_hamiltonian(config, kernel_variant="polar")
    exact = build_hamiltonian(config, kernel_variant="exact", omega_offset=0.0)
    np.testing.assert_allclose(exact.matrix, polar.matrix, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(exact.matrix, exact.matrix.T, atol=1e-12)
    with pytest.raises(ValueError):
        build_hamiltonian(config, kernel_variant="retarded-foo")
