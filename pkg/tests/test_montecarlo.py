import numpy as np
import pytest

from coopscat.geometry import CloudSpec
from coopscat.montecarlo import (
    CheckpointMismatch,
    EnsembleFailure,
    EnsembleJob,
    UnknownTask,
    config_seed,
    register_task,
    resume_ensemble,
    run_ensemble,
)

DILUTE = CloudSpec(shape="uniform-sphere", radius=6.0, density=2e-3)


@register_task("_test_radius_stats")
def _radius_stats(config, params):
    radii = np.linalg.norm(config.positions, axis=1)
    return np.array([radii.mean(), radii.max()])


@register_task("_test_flaky")
def _flaky(config, params):
    if config.seed % int(params["fail_modulus"]) == 0:
        raise RuntimeError("synthetic failure")
    return np.array([float(config.seed % 7)])


@register_task("_test_complex")
def _complex(config, params):
    phase = np.exp(1j * np.linalg.norm(config.positions, axis=1).sum())
    return np.array([phase, 2.0 * phase])


def _job(task="_test_radius_stats", n=8, seed=42, params=None):
    return EnsembleJob(
        cloud=DILUTE, task=task, params=params or {}, n_configs=n, master_seed=seed
    )


def test_single_config_sem_is_zero():
    stats = run_ensemble(_job(n=1))
    assert stats.n_configs == 1
    np.testing.assert_array_equal(stats.sem, np.zeros(2))


def test_unknown_task_rejected():
    with pytest.raises(UnknownTask):
        run_ensemble(_job(task="_no_such_task"))


def test_worker_count_invariance():
    # a registry task (visible to spawned workers), real solve path
    job = EnsembleJob(
        cloud=DILUTE,
        task="sigma_spectrum",
        params={"detunings": [-1.0, 0.0, 1.0]},
        n_configs=6,
        master_seed=9,
    )
    serial = run_ensemble(job, workers=1)
    parallel = run_ensemble(job, workers=3)
    np.testing.assert_array_equal(serial.mean, parallel.mean)
    np.testing.assert_array_equal(serial.sem, parallel.sem)
    assert serial.seeds == parallel.seeds


def test_seeds_are_counter_derived_and_stable():
    assert config_seed(42, 0) != config_seed(42, 1)
    assert config_seed(42, 3) == config_seed(42, 3)
    stats = run_ensemble(_job(n=3))
    assert stats.seeds == tuple(config_seed(42, i) for i in range(3))


def test_sem_scales_like_inverse_sqrt_n():
    small = run_ensemble(_job(n=50))
    large = run_ensemble(_job(n=200))
    ratio = small.sem / large.sem
    np.testing.assert_allclose(ratio, 2.0, rtol=0.2)


def test_complex_observable_statistics():
    stats = run_ensemble(_job(task="_test_complex", n=16))
    assert np.iscomplexobj(stats.mean)
    assert stats.sem.dtype.kind == "f"
    assert stats.sem[1] == pytest.approx(2.0 * stats.sem[0], rel=1e-12)


def test_resume_matches_straight_run(tmp_path):
    checkpoint = tmp_path / "partial.ckpt"
    run_ensemble(_job(n=5), checkpoint_path=checkpoint)
    resumed = resume_ensemble(_job(n=12), checkpoint)
    straight = run_ensemble(_job(n=12))
    np.testing.assert_array_equal(resumed.mean, straight.mean)
    np.testing.assert_array_equal(resumed.sem, straight.sem)
    # resuming again with no work left reproduces the same statistics
    again = resume_ensemble(_job(n=12), checkpoint)
    np.testing.assert_array_equal(again.mean, straight.mean)


def test_resume_rejects_mismatched_master_seed(tmp_path):
    checkpoint = tmp_path / "partial.ckpt"
    run_ensemble(_job(n=4, seed=1), checkpoint_path=checkpoint)
    with pytest.raises(CheckpointMismatch):
        resume_ensemble(_job(n=8, seed=2), checkpoint)


def test_resume_rejects_mismatched_cloud(tmp_path):
    checkpoint = tmp_path / "partial.ckpt"
    run_ensemble(_job(n=4), checkpoint_path=checkpoint)
    other = EnsembleJob(
        cloud=CloudSpec(shape="uniform-sphere", radius=5.0, density=2e-3),
        task="_test_radius_stats",
        params={},
        n_configs=8,
        master_seed=42,
    )
    with pytest.raises(CheckpointMismatch):
        resume_ensemble(other, checkpoint)


def test_failures_recorded_and_tolerated():
    # roughly 1/16 of seeds hit the synthetic failure: tolerated
    job = _job(task="_test_flaky", n=64, params={"fail_modulus": 16})
    stats = run_ensemble(job)
    assert stats.n_configs + stats.n_failed == 64


def test_too_many_failures_fail_the_job():
    job = _job(task="_test_flaky", n=32, params={"fail_modulus": 2})
    with pytest.raises(EnsembleFailure):
        run_ensemble(job)


def test_failed_configs_survive_checkpoint_round_trip(tmp_path):
    checkpoint = tmp_path / "flaky.ckpt"
    job = _job(task="_test_flaky", n=48, params={"fail_modulus": 16})
    first = run_ensemble(job, checkpoint_path=checkpoint)
    resumed = resume_ensemble(_job(task="_test_flaky", n=64, params={"fail_modulus": 16}), checkpoint)
    straight = run_ensemble(_job(task="_test_flaky", n=64, params={"fail_modulus": 16}))
    np.testing.assert_array_equal(resumed.mean, straight.mean)
    assert resumed.failures == straight.failures
    assert first.n_failed <= resumed.n_failed


def test_empty_checkpoint_is_equivalent_to_fresh_run(tmp_path):
    from coopscat.montecarlo import _Accumulator, write_checkpoint

    checkpoint = tmp_path / "empty.ckpt"
    job = _job(n=6)
    write_checkpoint(checkpoint, job, 0, _Accumulator(), [])
    resumed = resume_ensemble(job, checkpoint)
    straight = run_ensemble(job)
    np.testing.assert_array_equal(resumed.mean, straight.mean)
    np.testing.assert_array_equal(resumed.sem, straight.sem)
