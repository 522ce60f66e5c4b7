"""Random atomic configurations for the cloud shapes used in the experiments.

All lengths are in reduced wavelengths.  Configurations are immutable and
a pure function of (cloud spec, seed), independent of how many workers the
surrounding Monte Carlo loop uses.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

UNIFORM_SPHERE = "uniform-sphere"
GAUSSIAN_SPHERE = "gaussian-sphere"
CYLINDER = "cylinder"
SHAPES = (UNIFORM_SPHERE, GAUSSIAN_SPHERE, CYLINDER)

# The gaussian cloud is truncated here (in units of its rms radius); the
# discarded tail carries < 0.01% of the mass.
GAUSSIAN_TRUNCATION = 4.0

# Default hard-core exclusion radius.  Tiny compared to every physical
# scale of interest but bounds the 1/r^3 kernel divergence and keeps the
# matrices well conditioned.
DEFAULT_MIN_SEPARATION = 0.01

_MAX_ATTEMPTS_PER_ATOM = 10_000


class InvalidCloudSpec(ValueError):
    """Cloud specification violates a structural invariant."""


class PackingError(RuntimeError):
    """Minimum-separation resampling failed; density too high for r_min."""


@dataclass(frozen=True)
class CloudSpec:
    """Geometry and density of one atomic cloud.

    ``radius`` is the sphere/cylinder radius, or the rms radius of the
    gaussian cloud (per Cartesian axis).  ``density`` is the number
    density for the uniform shapes and the center density for the
    gaussian cloud, in atoms per cubic reduced wavelength.  When
    ``atom_count`` is not given it is derived by rounding density*volume
    (gaussian: density * (2*pi)^(3/2) * radius^3), which keeps runs
    reproducible; a Poisson-distributed count would not be.
    """

    shape: str
    radius: float
    density: float
    length: float | None = None
    min_separation: float = DEFAULT_MIN_SEPARATION
    atom_count: int | None = None

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise InvalidCloudSpec(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if not self.radius > 0:
            raise InvalidCloudSpec(f"radius must be positive, got {self.radius}")
        if not self.density > 0:
            raise InvalidCloudSpec(f"density must be positive, got {self.density}")
        if self.min_separation < 0:
            raise InvalidCloudSpec(f"min_separation must be >= 0, got {self.min_separation}")
        if self.shape == CYLINDER:
            if self.length is None or not self.length > 0:
                raise InvalidCloudSpec("cylinder requires a positive length")
        elif self.length is not None:
            raise InvalidCloudSpec(f"length only applies to cylinders, got shape {self.shape!r}")
        if self.atom_count is not None and self.atom_count < 1:
            raise InvalidCloudSpec(f"atom_count must be >= 1, got {self.atom_count}")

    @property
    def volume(self) -> float:
        """Shape volume; for gaussian clouds the effective (2*pi)^(3/2) R^3."""
        if self.shape == UNIFORM_SPHERE:
            return (4.0 / 3.0) * math.pi * self.radius**3
        if self.shape == CYLINDER:
            return math.pi * self.radius**2 * self.length
        return (2.0 * math.pi) ** 1.5 * self.radius**3

    @property
    def n_atoms(self) -> int:
        """Explicit atom count, or round(density * volume)."""
        if self.atom_count is not None:
            return self.atom_count
        return max(1, round(self.density * self.volume))

    @property
    def bounding_radius(self) -> float:
        """Radius of a sphere guaranteed to contain every atom."""
        if self.shape == UNIFORM_SPHERE:
            return self.radius
        if self.shape == CYLINDER:
            return math.hypot(self.radius, 0.5 * self.length)
        return GAUSSIAN_TRUNCATION * self.radius

    def with_density(self, density: float) -> "CloudSpec":
        return replace(self, density=density, atom_count=None)


@dataclass(frozen=True)
class AtomConfiguration:
    """Immutable snapshot of N atom positions plus the seed that made them."""

    positions: np.ndarray  # (N, 3), read-only
    seed: int
    spec: CloudSpec

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (N, 3), got {pos.shape}")
        pos = pos.copy()
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ConfigurationReport:
    """Diagnostics from validate_configuration (reporting only)."""

    n_atoms: int
    min_pair_distance: float  # +inf when there is a single atom
    bounding_radius: float
    inside_shape: bool
    degenerate_pairs: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @property
    def has_degenerate_atoms(self) -> bool:
        return len(self.degenerate_pairs) > 0


def _draw_point(spec: CloudSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.shape == UNIFORM_SPHERE:
        radius = spec.radius * np.cbrt(rng.uniform())
        direction = rng.standard_normal(3)
        norm = np.linalg.norm(direction)
        while norm < 1e-12:  # vanishing draw; essentially never happens
            direction = rng.standard_normal(3)
            norm = np.linalg.norm(direction)
        return radius * direction / norm
    if spec.shape == CYLINDER:
        rho = spec.radius * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * math.pi)
        z = rng.uniform(-0.5 * spec.length, 0.5 * spec.length)
        return np.array([rho * math.cos(phi), rho * math.sin(phi), z])
    # gaussian-sphere, truncated
    cutoff = GAUSSIAN_TRUNCATION * spec.radius
    while True:
        point = spec.radius * rng.standard_normal(3)
        if np.linalg.norm(point) <= cutoff:
            return point


def sample_configuration(spec: CloudSpec, seed: int) -> AtomConfiguration:
    """Draw one random configuration; deterministic in (spec, seed).

    Atoms are placed sequentially; a draw closer than ``min_separation``
    to any accepted atom is rejected and redrawn.  At the densities this
    package targets (n <= 0.5 per cubic reduced wavelength with the
    default exclusion radius) rejections are rare, so the sampled
    positions stay i.i.d. within the shape to excellent accuracy.
    """
    seed = int(seed)
    n = spec.n_atoms
    rng = np.random.default_rng(seed)
    positions = np.empty((n, 3))
    r2_min = spec.min_separation**2
    for i in range(n):
        for _ in range(_MAX_ATTEMPTS_PER_ATOM):
            candidate = _draw_point(spec, rng)
            if i == 0 or r2_min == 0.0:
                positions[i] = candidate
                break
            d2 = np.sum((positions[:i] - candidate) ** 2, axis=1)
            if np.min(d2) >= r2_min:
                positions[i] = candidate
                break
        else:
            raise PackingError(
                f"could not place atom {i + 1}/{n} after {_MAX_ATTEMPTS_PER_ATOM} draws; "
                f"density {spec.density} is too high for min_separation {spec.min_separation}"
            )
    return AtomConfiguration(positions=positions, seed=seed, spec=spec)


def min_pair_distance(positions: np.ndarray) -> float:
    """Smallest pairwise distance; +inf for fewer than two atoms."""
    n = positions.shape[0]
    if n < 2:
        return math.inf
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    dist[np.diag_indices(n)] = math.inf
    return float(dist.min())


def _inside_shape(spec: CloudSpec, positions: np.ndarray) -> bool:
    if spec.shape == UNIFORM_SPHERE:
        return bool(np.all(np.linalg.norm(positions, axis=1) <= spec.radius * (1 + 1e-12)))
    if spec.shape == CYLINDER:
        rho = np.hypot(positions[:, 0], positions[:, 1])
        return bool(
            np.all(rho <= spec.radius * (1 + 1e-12))
            and np.all(np.abs(positions[:, 2]) <= 0.5 * spec.length * (1 + 1e-12))
        )
    cutoff = GAUSSIAN_TRUNCATION * spec.radius
    return bool(np.all(np.linalg.norm(positions, axis=1) <= cutoff * (1 + 1e-12)))


def validate_configuration(config: AtomConfiguration) -> ConfigurationReport:
    """Report pairwise-distance and shape-membership diagnostics."""
    pos = config.positions
    n = pos.shape[0]
    dmin = min_pair_distance(pos)
    degenerate: list[tuple[int, int]] = []
    if n >= 2 and dmin < 1e-12:
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        ii, jj = np.nonzero(np.triu(dist < 1e-12, k=1))
        degenerate = list(zip(ii.tolist(), jj.tolist()))
    return ConfigurationReport(
        n_atoms=n,
        min_pair_distance=dmin,
        bounding_radius=float(np.linalg.norm(pos, axis=1).max()) if n else 0.0,
        inside_shape=_inside_shape(config.spec, pos),
        degenerate_pairs=tuple(degenerate),
    )


def save_configuration(config: AtomConfiguration, path) -> None:
    """Write a flat text table: one atom per row, columns x y z.

    The header comments carry the cloud spec and the seed, so the file is
    self-describing and can be re-imported with load_configuration.
    """
    spec = config.spec
    header = [
        "coopscat atom configuration v1",
        f"shape={spec.shape} radius={spec.radius!r} length={spec.length!r} "
        f"density={spec.density!r} min_separation={spec.min_separation!r} "
        f"atom_count={spec.atom_count!r}",
        f"seed={config.seed}",
        "columns: x y z  [reduced wavelengths]",
    ]
    np.savetxt(path, config.positions, header="\n".join(header), fmt="%.17g")


def load_configuration(path) -> AtomConfiguration:
    """Re-import a configuration written by save_configuration."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    meta: dict[str, str] = {}
    for line in lines:
        if not line.startswith("#"):
            break
        for token in line[1:].split():
            if "=" in token:
                key, _, value = token.partition("=")
                meta[key] = value
    required = {"shape", "radius", "density", "min_separation", "seed"}
    if not required.issubset(meta):
        raise ValueError(f"missing header fields {sorted(required - set(meta))} in {path}")
    spec = CloudSpec(
        shape=meta["shape"],
        radius=float(meta["radius"]),
        density=float(meta["density"]),
        length=None if meta.get("length", "None") == "None" else float(meta["length"]),
        min_separation=float(meta["min_separation"]),
        atom_count=None if meta.get("atom_count", "None") == "None" else int(meta["atom_count"]),
    )
    positions = np.loadtxt(io.StringIO("".join(ln for ln in lines if not ln.startswith("#"))))
    positions = np.atleast_2d(positions)
    return AtomConfiguration(positions=positions, seed=int(meta["seed"]), spec=spec)
