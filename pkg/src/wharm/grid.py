"""Cell-centered grids on a box in R^n and the half-space extension calculus.

The computational domain is the box [-L, L]^n sampled at cell centers
x_k = -L + (k + 1/2) h with h = 2L / N.  No sample ever sits on the
hyperplane x_n = 0, so restriction to a half-space and the reflection
x -> (x', -x_n) are exact index operations (the last axis is x_n).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError

FULL = "full"
UPPER = "upper"
LOWER = "lower"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid over [-L, L]^n, optionally one half-space.

    dim: n in {1, 2}.  halfwidth: L.  points_per_axis: N (even); the last
    axis holds N/2 points on a half grid.  domain: "full" | "upper" | "lower".
    """

    dim: int
    halfwidth: float
    points_per_axis: int
    domain: str = FULL

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterError(f"dim must be 1 or 2, got {self.dim}")
        if self.points_per_axis % 2 != 0 or self.points_per_axis <= 0:
            raise ParameterError("points_per_axis must be a positive even integer")
        if self.halfwidth <= 0:
            raise ParameterError("halfwidth must be positive")
        if self.domain not in (FULL, UPPER, LOWER):
            raise ParameterError(f"unknown domain {self.domain!r}")

    @property
    def h(self) -> float:
        return 2.0 * self.halfwidth / self.points_per_axis

    @property
    def shape(self) -> tuple:
        n, N = self.dim, self.points_per_axis
        if self.domain == FULL:
            return (N,) * n
        return (N,) * (n - 1) + (N // 2,)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def axis_coords(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one array axis."""
        N, h, L = self.points_per_axis, self.h, self.halfwidth
        full = -L + (np.arange(N) + 0.5) * h
        if axis == self.dim - 1 and self.domain != FULL:
            return full[N // 2:] if self.domain == UPPER else full[: N // 2]
        return full

    def points(self) -> np.ndarray:
        """All grid points, shape (*grid.shape, dim)."""
        axes = [self.axis_coords(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def with_domain(self, domain: str) -> "Grid":
        return Grid(self.dim, self.halfwidth, self.points_per_axis, domain)


@dataclass
class GridFunction:
    """Real values sampled at the grid points (one value per cell center)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise DomainError(
                f"values shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("grid function contains non-finite values")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())

    def integral(self) -> float:
        """Exact cell sum: the midpoint-rule integral over the domain."""
        return float(self.values.sum()) * self.grid.cell_volume

    def lp_norm(self, p: float, weight=None) -> float:
        w = 1.0 if weight is None else weight
        return float(np.sum(np.abs(self.values) ** p * w) * self.grid.cell_volume) ** (1.0 / p)


def constant(grid: Grid, c: float) -> GridFunction:
    return GridFunction(grid, np.full(grid.shape, float(c)))


def from_callable(grid: Grid, fn) -> GridFunction:
    """Sample a callable f(x) (x an array of shape (..., dim)) at cell centers."""
    pts = grid.points()
    return GridFunction(grid, np.asarray(fn(pts), dtype=float).reshape(grid.shape))


def reflect(f: GridFunction) -> GridFunction:
    """x -> (x', -x_n): flip the last axis; maps upper <-> lower grids."""
    g = f.grid
    if g.domain == FULL:
        return GridFunction(g, np.flip(f.values, axis=-1))
    other = UPPER if g.domain == LOWER else LOWER
    return GridFunction(g.with_domain(other), np.flip(f.values, axis=-1))


def restrict(f: GridFunction, side: str) -> GridFunction:
    """Restriction of a full-space function to one half-space (bit-exact copy)."""
    if f.grid.domain != FULL:
        raise DomainError("restrict expects a full-space grid function")
    if side not in (UPPER, LOWER):
        raise DomainError(f"side must be 'upper' or 'lower', got {side!r}")
    N = f.grid.points_per_axis
    half = N // 2
    sl = slice(half, None) if side == UPPER else slice(None, half)
    vals = f.values[..., sl].copy()
    return GridFunction(f.grid.with_domain(side), vals)


def _extend(f: GridFunction, sign: float) -> GridFunction:
    g = f.grid
    if g.domain == FULL:
        raise DomainError("extension expects a half-space grid function")
    N = g.points_per_axis
    out = np.empty(g.with_domain(FULL).shape)
    half = N // 2
    if g.domain == UPPER:
        out[..., half:] = f.values
        out[..., :half] = sign * np.flip(f.values, axis=-1)
    else:
        out[..., :half] = f.values
        out[..., half:] = sign * np.flip(f.values, axis=-1)
    return GridFunction(g.with_domain(FULL), out)


def extend_even(f: GridFunction) -> GridFunction:
    """Even extension g with g(x') = g(x) under the reflection x -> x~."""
    return _extend(f, 1.0)


def extend_odd(f: GridFunction) -> GridFunction:
    """Odd extension g with g(x~) = -g(x)."""
    return _extend(f, -1.0)


def sided_even_extensions(f: GridFunction) -> tuple:
    """(f_{+,e}, f_{-,e}) for a full-space function: even extensions of the two restrictions."""
    return extend_even(restrict(f, UPPER)), extend_even(restrict(f, LOWER))


# ---------------------------------------------------------------------------
# serialization: flat CSV (index coordinates then value) and JSON header +
# raw float64 binary column.

def save_csv(f: GridFunction, path: str) -> None:
    g = f.grid
    idx = np.indices(g.shape).reshape(g.dim, -1).T
    vals = f.values.reshape(-1, 1)
    data = np.hstack([idx.astype(float), vals])
    header = ",".join([f"i{a}" for a in range(g.dim)] + ["value"])
    meta = f"# dim={g.dim} halfwidth={g.halfwidth!r} points_per_axis={g.points_per_axis} domain={g.domain}"
    fmt = ["%d"] * g.dim + ["%.17g"]
    with open(path, "w") as fh:
        fh.write(meta + "\n")
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt=fmt, delimiter=",")


def load_csv(path: str) -> GridFunction:
    with open(path) as fh:
        meta = fh.readline().strip()
        if not meta.startswith("#"):
            raise DomainError("missing grid metadata line in CSV")
        kv = dict(tok.split("=", 1) for tok in meta[1:].split())
        fh.readline()  # column header
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = Grid(int(kv["dim"]), float(kv["halfwidth"]), int(kv["points_per_axis"]), kv["domain"])
    vals = np.empty(grid.shape)
    idx = tuple(data[:, a].astype(int) for a in range(grid.dim))
    vals[idx] = data[:, grid.dim]
    return GridFunction(grid, vals)


def save_binary(f: GridFunction, path: str) -> None:
    """JSON header at `path`, float64 column (C order) at `path` + '.bin'."""
    g = f.grid
    header = {
        "dim": g.dim,
        "halfwidth": g.halfwidth,
        "points_per_axis": g.points_per_axis,
        "domain": g.domain,
        "dtype": "float64",
        "count": int(f.values.size),
    }
    with open(path, "w") as fh:
        json.dump(header, fh, indent=1)
    f.values.astype("<f8").tofile(path + ".bin")


def load_binary(path: str) -> GridFunction:
    with open(path) as fh:
        header = json.load(fh)
    grid = Grid(header["dim"], header["halfwidth"], header["points_per_axis"], header["domain"])
    vals = np.fromfile(path + ".bin", dtype="<f8")
    if vals.size != header["count"]:
        raise DomainError("binary column length does not match header count")
    return GridFunction(grid, vals.reshape(grid.shape))
