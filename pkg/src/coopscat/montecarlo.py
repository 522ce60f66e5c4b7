"""Configuration-ensemble averaging with reproducible seeding.

An ensemble job names a registered per-configuration task; configuration
i is always built from the seed derived from (master_seed, i), so means
and standard errors are a pure function of the job, never of worker
count, scheduling, or chunking.  Per-configuration vectors are folded
into running first and second moments strictly in configuration-index
order, which makes the floating-point results bit-identical across
reruns, worker counts, and checkpoint/resume boundaries.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from typing import Callable, Iterable

import numpy as np

from .geometry import CloudSpec, sample_configuration

TASK_REGISTRY: dict[str, Callable] = {}

_CHECKPOINT_MAGIC = "# coopscat-checkpoint v2"
FAILURE_FRACTION_LIMIT = 0.10


class UnknownTask(KeyError):
    """Task name not present in the registry."""


class EnsembleFailure(RuntimeError):
    """More than the tolerated fraction of configurations failed."""


class CheckpointMismatch(ValueError):
    """Checkpoint was produced by an incompatible job."""


def register_task(name: str):
    def decorator(fn: Callable) -> Callable:
        TASK_REGISTRY[name] = fn
        return fn

    return decorator


_builtin_tasks_loaded = False


def _ensure_tasks_loaded() -> None:
    global _builtin_tasks_loaded
    if not _builtin_tasks_loaded:
        from . import tasks  # noqa: F401  (import populates the registry)

        _builtin_tasks_loaded = True


@dataclass(frozen=True)
class EnsembleJob:
    """Cloud spec + task descriptor + ensemble bookkeeping."""

    cloud: CloudSpec
    task: str
    params: dict
    n_configs: int
    master_seed: int

    def __post_init__(self) -> None:
        if self.n_configs < 1:
            raise ValueError(f"n_configs must be >= 1, got {self.n_configs}")

    def identity(self) -> str:
        """Hash of everything that determines per-configuration results.

        Excludes n_configs so a checkpoint can be resumed toward a larger
        target.
        """
        payload = {
            "cloud": asdict(self.cloud),
            "task": self.task,
            "params": self.params,
            "master_seed": self.master_seed,
        }
        canonical = json.dumps(payload, sort_keys=True, default=_jsonify)
        return hashlib.sha256(canonical.encode()).hexdigest()


def _jsonify(obj):
    if isinstance(obj, tuple):
        return list(obj)
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"job params must be JSON-serializable, got {type(obj)}")


@dataclass(frozen=True)
class Statistics:
    """Per-point mean and standard error of the mean over an ensemble.

    For complex observables the sem is the root of the complex sample
    variance (mean squared modulus of the deviation) over n.
    """

    mean: np.ndarray
    sem: np.ndarray
    n_configs: int
    seeds: tuple[int, ...]
    failures: tuple[tuple[int, str], ...] = field(default_factory=tuple)

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def config_seed(master_seed: int, index: int) -> int:
    """Counter-style per-configuration seed derived from the master seed."""
    return int(
        np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)[0]
    )


class _Accumulator:
    """Running sum and sum of squared moduli, folded in index order."""

    def __init__(self):
        self.count = 0
        self.sums: np.ndarray | None = None
        self.sums_sq: np.ndarray | None = None

    def add(self, row: np.ndarray) -> None:
        row = np.asarray(row).reshape(-1)
        if self.sums is None:
            dtype = complex if np.iscomplexobj(row) else float
            self.sums = np.zeros(row.size, dtype=dtype)
            self.sums_sq = np.zeros(row.size, dtype=float)
        elif row.size != self.sums.size:
            raise EnsembleFailure(
                f"task returned inconsistent sizes: {row.size} vs {self.sums.size}"
            )
        self.sums += row
        self.sums_sq += np.abs(row) ** 2
        self.count += 1

    def statistics(self, seeds: Iterable[int], failures, n_target: int) -> Statistics:
        failures = tuple(failures)
        if len(failures) > FAILURE_FRACTION_LIMIT * n_target:
            raise EnsembleFailure(
                f"{len(failures)}/{n_target} configurations failed; first: {failures[0]}"
            )
        if self.count == 0:
            raise EnsembleFailure("every configuration failed")
        mean = self.sums / self.count
        if self.count == 1:
            sem = np.zeros(mean.shape, dtype=float)
        else:
            # second-moment variance; clip the roundoff-negative tail
            var = (self.sums_sq - self.count * np.abs(mean) ** 2) / (self.count - 1)
            sem = np.sqrt(np.clip(var, 0.0, None) / self.count)
        return Statistics(
            mean=mean,
            sem=sem,
            n_configs=self.count,
            seeds=tuple(seeds),
            failures=failures,
        )


def _evaluate_one(args) -> tuple[int, np.ndarray | None, str | None]:
    spec, task_name, params, index, seed = args
    _ensure_tasks_loaded()
    task = TASK_REGISTRY[task_name]
    try:
        config = sample_configuration(spec, seed)
        return index, np.asarray(task(config, params)), None
    except Exception as exc:  # recorded per config; job fails only if too many do
        return index, None, f"{type(exc).__name__}: {exc}"


def _accumulate_range(
    job: EnsembleJob,
    start: int,
    stop: int,
    workers: int,
    acc: _Accumulator,
    failures: list[tuple[int, str]],
) -> None:
    """Evaluate configurations [start, stop) and fold them in index order."""
    work = [
        (job.cloud, job.task, job.params, i, config_seed(job.master_seed, i))
        for i in range(start, stop)
    ]
    if not work:
        return
    if workers <= 1:
        results = map(_evaluate_one, work)
        for index, row, error in results:
            if error is None:
                acc.add(row)
            else:
                failures.append((index, error))
        return
    # spawn keeps BLAS state out of forked children; map() yields results
    # in submission order, so accumulation order never depends on timing
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
        for index, row, error in pool.map(_evaluate_one, work, chunksize=1):
            if error is None:
                acc.add(row)
            else:
                failures.append((index, error))


def run_ensemble(job: EnsembleJob, workers: int = 1, checkpoint_path=None) -> Statistics:
    """Evaluate the task on n_configs seeded configurations and average.

    ``workers`` is a throughput hint only; the statistics are bit-identical
    for any value.  When ``checkpoint_path`` is given, partial sums are
    saved there on completion so the job can later be resumed toward a
    larger n_configs.
    """
    _ensure_tasks_loaded()
    if job.task not in TASK_REGISTRY:
        raise UnknownTask(job.task)
    acc = _Accumulator()
    failures: list[tuple[int, str]] = []
    _accumulate_range(job, 0, job.n_configs, workers, acc, failures)
    if checkpoint_path is not None:
        write_checkpoint(checkpoint_path, job, job.n_configs, acc, failures)
    seeds = [config_seed(job.master_seed, i) for i in range(job.n_configs)]
    return acc.statistics(seeds, failures, job.n_configs)


def resume_ensemble(job: EnsembleJob, checkpoint_path, workers: int = 1) -> Statistics:
    """Continue a checkpointed job to its target n_configs.

    The result is bit-identical to an uninterrupted run of the same job:
    the stored partial sums already reflect configurations [0, n_done) in
    index order, and the remainder is folded in the same order.
    """
    _ensure_tasks_loaded()
    n_done, acc, failures = read_checkpoint(checkpoint_path, job)
    if n_done < job.n_configs:
        _accumulate_range(job, n_done, job.n_configs, workers, acc, failures)
        write_checkpoint(checkpoint_path, job, job.n_configs, acc, failures)
    seeds = [config_seed(job.master_seed, i) for i in range(max(n_done, job.n_configs))]
    return acc.statistics(seeds, failures, max(n_done, job.n_configs))


# ---------------------------------------------------------------------------
# checkpoint file: text header plus little-endian binary partial-sum block
# ---------------------------------------------------------------------------


def write_checkpoint(
    path, job: EnsembleJob, n_done: int, acc: _Accumulator, failures: list[tuple[int, str]]
) -> None:
    dtype = "<c16" if acc.sums is not None and np.iscomplexobj(acc.sums) else "<f8"
    n_points = 0 if acc.sums is None else acc.sums.size
    failed = json.dumps([[i, msg.replace("\n", " ")] for i, msg in failures])
    header = (
        f"{_CHECKPOINT_MAGIC}\n"
        f"# job={job.identity()}\n"
        f"# n_done={n_done} n_success={acc.count} n_points={n_points} dtype={dtype}\n"
        f"# failed={failed}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode())
        if acc.sums is not None:
            fh.write(np.ascontiguousarray(acc.sums, dtype=dtype).tobytes())
            fh.write(np.ascontiguousarray(acc.sums_sq, dtype="<f8").tobytes())


def read_checkpoint(path, job: EnsembleJob) -> tuple[int, _Accumulator, list[tuple[int, str]]]:
    with open(path, "rb") as fh:
        magic = fh.readline().decode().strip()
        if magic != _CHECKPOINT_MAGIC:
            raise CheckpointMismatch(f"not a checkpoint file: {magic!r}")
        stored_hash = fh.readline().decode().strip().removeprefix("# job=")
        if stored_hash != job.identity():
            raise CheckpointMismatch(
                "checkpoint belongs to a different job (cloud/task/params/master_seed mismatch)"
            )
        meta = dict(token.split("=") for token in fh.readline().decode().strip("# \n").split())
        n_done = int(meta["n_done"])
        n_success = int(meta["n_success"])
        n_points = int(meta["n_points"])
        dtype = meta["dtype"]
        failed_entries = json.loads(fh.readline().decode().strip().removeprefix("# failed="))
        blob = fh.read()
    acc = _Accumulator()
    acc.count = n_success
    if n_points:
        item = np.dtype(dtype).itemsize
        acc.sums = np.frombuffer(blob, dtype=dtype, count=n_points).copy()
        acc.sums_sq = np.frombuffer(blob, dtype="<f8", count=n_points, offset=n_points * item).copy()
    failures = [(int(i), str(msg)) for i, msg in failed_entries]
    return n_done, acc, failures
