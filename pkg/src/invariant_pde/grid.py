"""Uniform periodic grids, multi-component fields, trajectories, and file I/O.

All field data is 64-bit floating point.  The on-disk trajectory format is
bit-exact: little-endian header (magic ``PDED``, format version, grid shape,
component/snapshot counts, grid spacings, time step) followed by the raw
snapshot payload, each component row-major float64.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAGIC = b"PDED"
FORMAT_VERSION = 1
# magic + 5 * u32 + 3 * f64
_HEADER = struct.Struct("<4sIIIII ddd".replace(" ", ""))
HEADER_SIZE = _HEADER.size


class TrajectoryIOError(Exception):
    """Base class for trajectory file I/O failures."""


class BadMagicError(TrajectoryIOError):
    """File does not start with the trajectory magic bytes."""


class TruncatedFileError(TrajectoryIOError):
    """File is shorter than the header-declared payload."""


class NonFiniteDataError(TrajectoryIOError):
    """Field payload contains NaN or Inf."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform 2D grid, periodic in both axes.

    Axis 0 of every component array is x, axis 1 is y; point (i, j) sits at
    (i * dx, j * dy).
    """

    nx: int
    ny: int
    dx: float
    dy: float
    periodic: bool = True

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ValueError(f"grid must be at least 8x8, got {self.nx}x{self.ny}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid spacings must be positive")
        if not self.periodic:
            raise ValueError("only periodic grids are supported")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid coordinate arrays (x, y), each of shape (nx, ny)."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="ij")


def square_grid(n: int = 64, length: float = 2.0 * np.pi) -> GridSpec:
    """n x n grid on [0, length)^2."""
    h = length / n
    return GridSpec(nx=n, ny=n, dx=h, dy=h)


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Field:
    """One or more scalar components sampled on a shared grid."""

    spec: GridSpec
    components: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.components) < 1:
            raise ValueError("a field needs at least one component")
        frozen = []
        for c in self.components:
            arr = np.asarray(c, dtype=np.float64)
            if arr.shape != self.spec.shape:
                raise ValueError(f"component shape {arr.shape} != grid shape {self.spec.shape}")
            if not np.all(np.isfinite(arr)):
                raise NonFiniteDataError("field component contains NaN or Inf")
            frozen.append(_freeze(arr))
        object.__setattr__(self, "components", tuple(frozen))

    @property
    def n_components(self) -> int:
        return len(self.components)

    def map(self, fn) -> "Field":
        """New field with fn applied to every component array."""
        return Field(self.spec, tuple(fn(c) for c in self.components))

    def allclose(self, other: "Field", atol: float = 0.0, rtol: float = 0.0) -> bool:
        return self.spec == other.spec and all(
            np.allclose(a, b, atol=atol, rtol=rtol)
            for a, b in zip(self.components, other.components)
        )


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered snapshots with uniform spacing dt."""

    spec: GridSpec
    dt: float
    snapshots: tuple[Field, ...]

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if len(self.snapshots) < 1:
            raise ValueError("a trajectory needs at least one snapshot")
        n = self.snapshots[0].n_components
        for s in self.snapshots:
            if s.spec != self.spec:
                raise ValueError("snapshot grid differs from trajectory grid")
            if s.n_components != n:
                raise ValueError("snapshots disagree on component count")
        object.__setattr__(self, "snapshots", tuple(self.snapshots))

    @property
    def n_snapshots(self) -> int:
        return len(self.snapshots)

    @property
    def n_components(self) -> int:
        return self.snapshots[0].n_components

    def component_stack(self, comp: int) -> np.ndarray:
        """All snapshots of one component as an array (n_snapshots, nx, ny)."""
        return np.stack([s.components[comp] for s in self.snapshots])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.dt == other.dt
            and self.n_snapshots == other.n_snapshots
            and all(
                np.array_equal(a.components[c], b.components[c])
                for a, b in zip(self.snapshots, other.snapshots)
                for c in range(self.n_components)
            )
        )


def write_trajectory(traj: Trajectory, path) -> None:
    """Write a trajectory in the bit-exact PDED format.

    read_trajectory(path) reproduces the input exactly; non-finite payloads
    never reach disk (Field construction already rejects them).
    """
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        traj.spec.nx,
        traj.spec.ny,
        traj.n_components,
        traj.n_snapshots,
        traj.spec.dx,
        traj.spec.dy,
        traj.dt,
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for snap in traj.snapshots:
                for comp in snap.components:
                    fh.write(comp.astype("<f8", copy=False).tobytes(order="C"))
    except OSError as exc:
        raise TrajectoryIOError(f"cannot write trajectory to {path}: {exc}") from exc


def read_trajectory(path) -> Trajectory:
    """Read a PDED trajectory file, validating magic, length, and finiteness."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise TrajectoryIOError(f"cannot read trajectory from {path}: {exc}") from exc

    if len(raw) < HEADER_SIZE or raw[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a trajectory file (bad magic)")
    magic, version, nx, ny, n_comp, n_snap, dx, dy, dt = _HEADER.unpack(raw[:HEADER_SIZE])
    if version != FORMAT_VERSION:
        raise TrajectoryIOError(f"{path}: unsupported format version {version}")

    expected = HEADER_SIZE + n_snap * n_comp * nx * ny * 8
    if len(raw) != expected:
        raise TruncatedFileError(
            f"{path}: expected {expected} bytes for {n_snap} snapshots, got {len(raw)}"
        )

    payload = np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE)
    if not np.all(np.isfinite(payload)):
        raise NonFiniteDataError(f"{path}: payload contains NaN or Inf")
    payload = payload.reshape(n_snap, n_comp, nx, ny)

    spec = GridSpec(nx=nx, ny=ny, dx=dx, dy=dy)
    snaps = tuple(
        Field(spec, tuple(payload[k, c] for c in range(n_comp))) for k in range(n_snap)
    )
    return Trajectory(spec=spec, dt=dt, snapshots=snaps)


def sample_initial_condition(
    spec: GridSpec,
    n: int,
    seed: int,
    n_modes: int = 4,
    amplitude: float = 1.0,
    offset: float = 0.0,
) -> Field:
    """Random smooth periodic field: a superposition of low-wavenumber modes.

    Each component sums n_modes cosine modes with integer wavenumbers of
    magnitude <= 4 per axis and random phases, then is rescaled so its peak
    absolute value equals `amplitude`.  A nonzero `offset` adds a uniform
    random constant in [-offset, offset] per component (a zero-wavenumber
    mode): varying the mean across samples is what makes advective terms
    identifiable against pure derivative products.  Integer wavenumbers make
    the result exactly periodic on the grid.  Deterministic in `seed`.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    rng = np.random.default_rng(seed)
    x, y = spec.coords()
    # wavenumbers are in units of 2*pi / (axis length)
    lx = spec.nx * spec.dx
    ly = spec.ny * spec.dy
    comps = []
    for _ in range(n):
        field = np.zeros(spec.shape)
        for _ in range(n_modes):
            while True:
                kx = int(rng.integers(-4, 5))
                ky = int(rng.integers(-4, 5))
                if kx != 0 or ky != 0:
                    break
            amp = rng.uniform(0.2, 1.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            field += amp * np.cos(2.0 * np.pi * (kx * x / lx + ky * y / ly) + phase)
        peak = np.max(np.abs(field))
        if peak > 0.0 and amplitude > 0.0:
            field *= amplitude / peak
        else:
            field = np.zeros(spec.shape)
        if offset > 0.0:
            field += rng.uniform(-offset, offset)
        comps.append(field)
    return Field(spec, tuple(comps))


def trajectory_from_arrays(spec: GridSpec, dt: float, stacks: Sequence[np.ndarray]) -> Trajectory:
    """Build a trajectory from per-component arrays of shape (n_snap, nx, ny)."""
    n_snap = stacks[0].shape[0]
    snaps = tuple(
        Field(spec, tuple(np.asarray(s[k]) for s in stacks)) for k in range(n_snap)
    )
    return Trajectory(spec=spec, dt=dt, snapshots=snaps)
