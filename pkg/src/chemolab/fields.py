"""Uniform cell-centered rectangular grids, scalar fields, and reductions.

The domain is a rectangle [0, lx] x [0, ly] split into nx x ny cells of size
hx x hy.  Field data is stored as a (ny, nx) float64 array in C (row-major)
order, so ``data[j, i]`` is the cell centered at ``((i+0.5)*hx, (j+0.5)*hy)``
and ``data.ravel()`` enumerates cells x-fastest.  That ordering is also the
on-disk snapshot layout, so snapshot files are reproducible bit for bit.

Reductions interpret fields as cellwise-constant, which makes ``integrate``
exact for that interpretation (midpoint rule).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedFieldError, PositivityError

SNAPSHOT_MAGIC = "CHEMOFIELD"
SNAPSHOT_VERSION = "v1"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh on a rectangle."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx, ny >= 4, got {self.nx} x {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"domain sides must be positive, got {self.lx} x {self.ly}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        """Total measure |Omega| = lx * ly."""
        return self.lx * self.ly

    def cell_centers(self):
        """Return (X, Y) coordinate arrays of shape (ny, nx)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def shape(self):
        return (self.ny, self.nx)


@dataclass
class ScalarField:
    """One real value per cell; carrier for the density u and the signal v."""

    grid: Grid
    data: np.ndarray
    diverged: bool = field(default=False)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.shape != self.grid.shape():
            raise ValueError(
                f"data shape {arr.shape} does not match grid {self.grid.shape()}"
            )
        self.data = arr

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.data.copy(), self.diverged)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape(), float(value)))


def field_from_function(grid: Grid, fn) -> ScalarField:
    """Sample ``fn(x, y)`` at cell centers."""
    X, Y = grid.cell_centers()
    return ScalarField(grid, np.asarray(fn(X, Y), dtype=np.float64))


def _require_finite(f: ScalarField, op: str):
    if not f.is_finite():
        raise DivergedFieldError(f"{op}: field has non-finite entries")


def integrate(f: ScalarField) -> float:
    """Discrete integral over the domain: cell_area * sum of cell values."""
    _require_finite(f, "integrate")
    return f.grid.cell_area * float(np.sum(f.data))


def norm(f: ScalarField, p) -> float:
    """Discrete L^p norm for p in {1, 2, 4, inf}."""
    _require_finite(f, "norm")
    if p == math.inf or p == "inf":
        return float(np.max(np.abs(f.data)))
    if p not in (1, 2, 4):
        raise ValueError(f"unsupported norm order {p!r}; use 1, 2, 4 or inf")
    s = float(np.sum(np.abs(f.data) ** p))
    return (f.grid.cell_area * s) ** (1.0 / p)


def entropy_integrand(u: ScalarField) -> float:
    """Discrete integral of u*ln(u), with the continuous extension 0*ln(0) = 0.

    Negative values anywhere in u are a positivity violation.  The result may
    legitimately be negative: s*ln(s) < 0 on (0, 1), bounded below by -1/e.
    """
    _require_finite(u, "entropy_integrand")
    d = u.data
    if np.any(d < 0):
        raise PositivityError("entropy_integrand: field has negative entries")
    pos = d > 0
    val = float(np.sum(d[pos] * np.log(d[pos])))
    return u.grid.cell_area * val


def write_snapshot(f: ScalarField, t: float, path) -> None:
    """Write a field snapshot: header line, then nx*ny floats row-major."""
    g = f.grid
    header = (f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {g.nx} {g.ny} "
              f"{float(g.lx)!r} {float(g.ly)!r} {float(t)!r}")
    lines = [header]
    lines.extend(repr(v) for v in f.data.ravel().tolist())
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def read_snapshot(path):
    """Read a snapshot; returns (ScalarField, t)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 7 or header[0] != SNAPSHOT_MAGIC or header[1] != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: not a {SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} snapshot")
        nx, ny = int(header[2]), int(header[3])
        lx, ly, t = float(header[4]), float(header[5]), float(header[6])
        data = np.array(fh.read().split(), dtype=np.float64)
    if data.size != nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} values, found {data.size}")
    grid = Grid(nx, ny, lx, ly)
    return ScalarField(grid, data.reshape(ny, nx)), t
