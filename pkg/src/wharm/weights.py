"""Muckenhoupt weight classes: classical A^p, the reflection-Neumann class,
Bloom triples, conjugate weights, doubling diagnostics, exp/log bridge.

Cube masses w(Q) are exact cell sums served from cached integral images, one
per exponent of the weight, which is the O(1)-per-cube equivalent of a full
mass table.  Analytic 1D profiles (power weights and the one-sided power
weight) are sampled as exact cell averages via their antiderivatives, so
masses over cell-aligned boxes coincide with the continuum integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import BoxSums, DyadicLattice
from .errors import DomainError, ParameterError, RangeError, WeightError
from .grid import FULL, Grid, GridFunction, extend_even, load_binary, load_csv, restrict


class Weight:
    """Strictly positive grid function with cached cube-mass machinery."""

    def __init__(self, values: GridFunction):
        if np.min(values.values) <= 0.0:
            raise WeightError("weight must be strictly positive")
        self.values = values
        self._sums = {}

    @property
    def grid(self) -> Grid:
        return self.values.grid

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    def power_sums(self, s: float = 1.0) -> BoxSums:
        if s not in self._sums:
            arr = self.array if s == 1.0 else self.array ** s
            if not np.all(np.isfinite(arr)):
                raise RangeError(f"w^{s} overflows on this grid")
            self._sums[s] = BoxSums(arr)
        return self._sums[s]

    def cube_mass(self, lat: DyadicLattice, cube, s: float = 1.0) -> float:
        """w^s(Q) = sum over Q of w^s * h^n."""
        return lat.cube_sum(self.power_sums(s), cube) * self.grid.cell_volume

    def cube_average(self, lat: DyadicLattice, cube, s: float = 1.0) -> float:
        return self.cube_mass(lat, cube, s) / lat.cell_measure(cube)

    def box_mass(self, ranges, s: float = 1.0) -> float:
        """w^s over a non-wrapped cell-index box, as a measure."""
        return self.power_sums(s).box(ranges) * self.grid.cell_volume


def as_weight(w) -> Weight:
    if isinstance(w, Weight):
        return w
    if isinstance(w, GridFunction):
        return Weight(w)
    raise WeightError(f"cannot interpret {type(w)} as a weight")


@dataclass
class WeightTriple:
    """Bloom setup: mu, lambda in A^p and nu = mu^{1/p} lambda^{-1/p}."""

    mu: Weight
    lam: Weight
    p: float

    def __post_init__(self):
        if not (1.0 < self.p < math.inf):
            raise ParameterError("p must lie in (1, inf)")
        self.nu = Weight(
            GridFunction(
                self.mu.grid,
                self.mu.array ** (1.0 / self.p) * self.lam.array ** (-1.0 / self.p),
            )
        )

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    def lam_conjugate(self) -> Weight:
        """lambda' = lambda^{-1/(p-1)}."""
        return Weight(GridFunction(self.lam.grid, self.lam.array ** (-1.0 / (self.p - 1.0))))

    def mu_conjugate(self) -> Weight:
        return Weight(GridFunction(self.mu.grid, self.mu.array ** (-1.0 / (self.p - 1.0))))


def conjugate_weight(w: Weight, p: float) -> Weight:
    """w' = w^{1-p'} = w^{-1/(p-1)}."""
    if p <= 1:
        raise ParameterError("conjugate weight needs p > 1")
    return Weight(GridFunction(w.grid, w.array ** (-1.0 / (p - 1.0))))


def _iter_lattices(lattices):
    if isinstance(lattices, DyadicLattice):
        return [lattices]
    return list(lattices)


def ap_cube_quotient(w: Weight, p: float, lat: DyadicLattice, cube) -> float:
    """<w>_Q <w^{-1/(p-1)}>_Q^{p-1} for one cube."""
    a = w.cube_average(lat, cube)
    b = w.cube_average(lat, cube, -1.0 / (p - 1.0))
    return a * b ** (p - 1.0)


def ap_constant(w, p: float, lattices) -> float:
    """Dyadic A^p characteristic: sup of the A^p quotient over all supplied lattices."""
    if p <= 1.0:
        raise ParameterError("ap_constant needs p > 1; use a1_constant for p = 1")
    w = as_weight(w)
    best = 0.0
    for lat in _iter_lattices(lattices):
        for cube in lat.cubes:
            q = ap_cube_quotient(w, p, lat, cube)
            if q > best:
                best = q
    return best


def ap_constant_per_lattice(w, p: float, lattices) -> list:
    """[w]_{A^p} computed lattice by lattice (for reports)."""
    return [
        {"shift": list(lat.shift_labels), "ap": ap_constant(w, p, [lat])}
        for lat in _iter_lattices(lattices)
    ]


def a1_constant(w, lattices) -> float:
    """A^1 characteristic with ess-inf taken as the grid minimum over the cube."""
    w = as_weight(w)
    best = 0.0
    for lat in _iter_lattices(lattices):
        for cube in lat.cubes:
            avg = w.cube_average(lat, cube)
            mn = float(np.min(w.array[np.ix_(*lat.cell_indices(cube))]))
            best = max(best, avg / mn)
    return best


def ap_deltaN_constant(w, p: float, lattices) -> float:
    """[w_{+,e}]_{A^p} + [w_{-,e}]_{A^p}: the reflection-Neumann weight class."""
    w = as_weight(w)
    if w.grid.domain != FULL:
        raise DomainError("the Neumann A^p class is defined for full-space weights")
    up = Weight(extend_even(restrict(w.values, "upper")))
    lo = Weight(extend_even(restrict(w.values, "lower")))
    return ap_constant(up, p, lattices) + ap_constant(lo, p, lattices)


# ---------------------------------------------------------------------------
# coordinate boxes (not necessarily lattice cubes)

def box_cell_ranges(grid: Grid, lo, hi):
    """Per-axis [start, stop) cell-index ranges of centers inside the box."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    ranges = []
    for a in range(grid.dim):
        c = grid.axis_coords(a)
        start = int(np.searchsorted(c, lo[a]))
        stop = int(np.searchsorted(c, hi[a]))
        ranges.append((start, stop))
    return ranges


def ap_quotient_on_box(w, p: float, lo, hi) -> float:
    """The A^p quotient evaluated on one coordinate box (cell sums)."""
    if p <= 1.0:
        raise ParameterError("needs p > 1")
    w = as_weight(w)
    ranges = box_cell_ranges(w.grid, lo, hi)
    cells = 1
    for st, sp in ranges:
        if sp <= st:
            raise DomainError("box contains no grid cells")
        cells *= sp - st
    vol = cells * w.grid.cell_volume
    m1 = w.box_mass(ranges) / vol
    m2 = w.box_mass(ranges, -1.0 / (p - 1.0)) / vol
    return m1 * m2 ** (p - 1.0)


def doubling_ratio(w, lo, hi) -> float:
    """w(2Q)/w(Q) for the coordinate box Q = prod [lo_a, hi_a], 2Q concentric."""
    w = as_weight(w)
    g = w.grid
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    c = (lo + hi) / 2.0
    lo2, hi2 = c - (hi - lo), c + (hi - lo)
    L = g.halfwidth
    if np.any(lo2 < -L - 1e-12) or np.any(hi2 > L + 1e-12):
        raise DomainError("2Q sticks out of the grid box")
    mq = w.box_mass(box_cell_ranges(g, lo, hi))
    m2q = w.box_mass(box_cell_ranges(g, lo2, hi2))
    return m2q / mq


# ---------------------------------------------------------------------------
# exp / log bridge

def exp_log_bridge(b: GridFunction, delta: float, p: float = 2.0) -> Weight:
    """e^{delta b} as a weight (the BMO -> A^p direction of the bridge)."""
    if delta <= 0:
        raise ParameterError("delta must be positive")
    z = delta * b.values
    if np.max(z) > 700.0:
        raise RangeError(f"exp overflow at delta={delta}")
    return Weight(GridFunction(b.grid, np.exp(z)))


def log_weight(w) -> GridFunction:
    """log w (the A^p -> BMO direction of the bridge)."""
    w = as_weight(w)
    return GridFunction(w.grid, np.log(w.array))


# ---------------------------------------------------------------------------
# analytic weight factory; 1D profiles are exact cell averages

def _cell_average_profile(grid: Grid, axis: int, antiderivative):
    """Per-cell averages of a 1D profile along one axis, from its antiderivative."""
    c = grid.axis_coords(axis)
    h = grid.h
    lo, hi = c - h / 2.0, c + h / 2.0
    vals = (antiderivative(hi) - antiderivative(lo)) / h
    shape = [1] * grid.dim
    shape[axis] = len(c)
    return vals.reshape(shape)


def power_weight(grid: Grid, alpha: float) -> Weight:
    """|x|^alpha: exact cell averages in n = 1, cell-center samples in n = 2."""
    if alpha <= -1:
        raise ParameterError("power weight needs alpha > -1 for local integrability")
    if grid.dim == 1:
        def F(x):
            return np.sign(x) * np.abs(x) ** (alpha + 1.0) / (alpha + 1.0)

        vals = _cell_average_profile(grid, 0, F) * np.ones(grid.shape)
    else:
        pts = grid.points()
        r = np.sqrt(np.sum(pts ** 2, axis=-1))
        vals = r ** alpha
    return Weight(GridFunction(grid, vals))


def one_sided_power_weight(grid: Grid, alpha: float) -> Weight:
    """x_n^alpha on x_n > 0, constant 1 on x_n < 0 (exact cell averages in x_n)."""
    if alpha <= -1:
        raise ParameterError("needs alpha > -1")

    def F(x):
        out = np.array(x, dtype=float)
        pos = x > 0
        out[pos] = x[pos] ** (alpha + 1.0) / (alpha + 1.0)
        return out

    prof = _cell_average_profile(grid, grid.dim - 1, F)
    vals = prof * np.ones(grid.shape)
    return Weight(GridFunction(grid, vals))


def weight_from_spec(spec: dict, grid: Grid) -> Weight:
    """Config-driven weights: {kind: one|power|one-sided-power|grid|exp_bmo, ...}."""
    kind = spec.get("kind", "one")
    if kind == "one":
        return Weight(GridFunction(grid, np.ones(grid.shape)))
    if kind == "power":
        return power_weight(grid, float(spec["alpha"]))
    if kind in ("one-sided-power", "prop33"):
        return one_sided_power_weight(grid, float(spec["alpha"]))
    if kind == "grid":
        path = spec["file"]
        f = load_csv(path) if path.endswith(".csv") else load_binary(path)
        return Weight(f)
    if kind == "exp_bmo":
        path = spec["file"]
        b = load_csv(path) if path.endswith(".csv") else load_binary(path)
        return exp_log_bridge(b, float(spec.get("delta", 1.0)))
    raise ParameterError(f"unknown weight kind {kind!r}")
