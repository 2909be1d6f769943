"""Dyadic lattices, Haar system, Haar coefficients, weighted maximal function.

A lattice is the full dyadic tree under the base cube [-L, L]^n, generations
0..max_generation, optionally translated by a whole number of grid cells per
axis (the grid-aligned stand-in for the 1/3-trick).  Translated cubes wrap
around the box periodically, matching the periodic convention of the Fourier
backend; as cell sets they keep the dyadic nesting property.

All integrals are exact cell sums (midpoint rule), so cube masses and Haar
coefficients are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import GridAlignmentError, WeightError
from .grid import FULL, Grid, GridFunction

SHIFT_NAMES = {"none": 0, "third": 1, "two_thirds": 2}


@dataclass(frozen=True)
class DyadicCube:
    """One cube of a lattice: generation k and per-axis index in [0, 2^k)."""

    generation: int
    index: tuple

    def __repr__(self):
        return f"Q(g{self.generation},{list(self.index)})"


class BoxSums:
    """Integral image over a cell array; O(1) sums over wrapped index boxes."""

    def __init__(self, values: np.ndarray):
        self.shape = values.shape
        acc = values
        for ax in range(values.ndim):
            acc = np.cumsum(acc, axis=ax)
            pad = [(0, 0)] * values.ndim
            pad[ax] = (1, 0)
            acc = np.pad(acc, pad)
        self.I = acc

    def box(self, ranges) -> float:
        """Sum over the index box prod_a [start_a, stop_a); no wrapping here."""
        total = 0.0
        nd = len(ranges)
        for corner in product((0, 1), repeat=nd):
            idx = tuple(r[c] for r, c in zip(ranges, corner))
            sign = (-1) ** (nd - sum(corner))
            total += sign * self.I[idx]
        return float(total)

    def segments(self, seglists) -> float:
        """Sum over a product of per-axis unions of [start, stop) segments."""
        total = 0.0
        for combo in product(*seglists):
            total += self.box(combo)
        return total


def split_range(start: int, length: int, n: int):
    """[start, start+length) mod n as a list of non-wrapping segments."""
    start %= n
    if start + length <= n:
        return [(start, start + length)]
    return [(start, n), (0, start + length - n)]


def segments_subset(inner, outer) -> bool:
    """Is a union of index segments contained in another union?"""
    return all(any(a >= c and b <= d for (c, d) in outer) for (a, b) in inner)


class DyadicLattice:
    """Complete dyadic tree of cubes over a full-space grid."""

    def __init__(self, grid: Grid, max_generation: int, shift=None):
        if grid.domain != FULL:
            raise GridAlignmentError("lattices are built over full-space grids")
        N = grid.points_per_axis
        if max_generation < 0 or N % (1 << max_generation) != 0:
            raise GridAlignmentError(
                f"2^{max_generation} must divide points_per_axis={N}"
            )
        self.grid = grid
        self.max_generation = max_generation
        if shift is None:
            shift = ("none",) * grid.dim
        if isinstance(shift, str):
            shift = (shift,) * grid.dim
        self.shift_labels = tuple(shift)
        self.shift_cells = tuple(
            SHIFT_NAMES[s] * (N // 3) for s in self.shift_labels
        )
        self.cubes = [
            DyadicCube(k, idx)
            for k in range(max_generation + 1)
            for idx in product(range(1 << k), repeat=grid.dim)
        ]

    # -- geometry ----------------------------------------------------------
    def cells_per_axis(self, generation: int) -> int:
        return self.grid.points_per_axis >> generation

    def sidelength(self, cube: DyadicCube) -> float:
        return 2.0 * self.grid.halfwidth * 2.0 ** (-cube.generation)

    def cell_measure(self, cube: DyadicCube) -> float:
        return self.sidelength(cube) ** self.grid.dim

    def axis_segments(self, cube: DyadicCube):
        """Per-axis unions of cell-index segments covered by the cube."""
        N = self.grid.points_per_axis
        m = self.cells_per_axis(cube.generation)
        return [
            split_range(self.shift_cells[a] + cube.index[a] * m, m, N)
            for a in range(self.grid.dim)
        ]

    def cell_indices(self, cube: DyadicCube):
        """Per-axis integer index arrays (for np.ix_); wrapped order."""
        N = self.grid.points_per_axis
        m = self.cells_per_axis(cube.generation)
        return tuple(
            (self.shift_cells[a] + cube.index[a] * m + np.arange(m)) % N
            for a in range(self.grid.dim)
        )

    def mask(self, cube: DyadicCube) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=bool)
        out[np.ix_(*self.cell_indices(cube))] = True
        return out

    def is_wrapped(self, cube: DyadicCube) -> bool:
        return any(len(segs) > 1 for segs in self.axis_segments(cube))

    def extent(self, cube: DyadicCube):
        """(lo, hi) coordinate arrays for a non-wrapped cube, else None."""
        segs = self.axis_segments(cube)
        if any(len(s) > 1 for s in segs):
            return None
        L, h = self.grid.halfwidth, self.grid.h
        lo = np.array([-L + s[0][0] * h for s in segs])
        hi = np.array([-L + s[0][1] * h for s in segs])
        return lo, hi

    # -- tree --------------------------------------------------------------
    def children(self, cube: DyadicCube):
        if cube.generation >= self.max_generation:
            return []
        return [
            DyadicCube(cube.generation + 1, tuple(2 * i + o for i, o in zip(cube.index, off)))
            for off in product((0, 1), repeat=self.grid.dim)
        ]

    def parent(self, cube: DyadicCube):
        if cube.generation == 0:
            return None
        return DyadicCube(cube.generation - 1, tuple(i // 2 for i in cube.index))

    def generation_cubes(self, k: int):
        return [c for c in self.cubes if c.generation == k]

    def contains(self, outer: DyadicCube, inner: DyadicCube) -> bool:
        """Tree containment inner <= outer (same lattice)."""
        if inner.generation < outer.generation:
            return False
        shift = inner.generation - outer.generation
        return all(i >> shift == o for i, o in zip(inner.index, outer.index))

    # -- sums --------------------------------------------------------------
    def cube_sum(self, box: BoxSums, cube: DyadicCube) -> float:
        return box.segments(self.axis_segments(cube))

    def to_json(self):
        """Lattice dump: per cube generation, index and cell extents."""
        out = []
        for c in self.cubes:
            ext = self.extent(c)
            out.append(
                {
                    "generation": c.generation,
                    "index": list(c.index),
                    "segments": [[list(s) for s in segs] for segs in self.axis_segments(c)],
                    "extent": None if ext is None else [ext[0].tolist(), ext[1].tolist()],
                }
            )
        return {"max_generation": self.max_generation, "shift": list(self.shift_labels), "cubes": out}


def build_lattice(grid: Grid, max_generation: int, shift=None) -> DyadicLattice:
    """Build the complete dyadic tree; shift in {none, third, two_thirds} per axis."""
    return DyadicLattice(grid, max_generation, shift)


def lattice_family(grid: Grid, max_generation: int):
    """Unshifted plus all per-axis 1/3-shifted lattices (3^n in total).

    Supremum-type quantities (A^p, BMO) scan this family as the grid-aligned
    proxy for 'all cubes'.
    """
    fams = []
    for labels in product(("none", "third", "two_thirds"), repeat=grid.dim):
        fams.append(DyadicLattice(grid, max_generation, labels))
    return fams


# ---------------------------------------------------------------------------
# Haar system.  Signatures are tuples in {0,1}^n minus all-ones; component 0
# is the cancellative factor (left minus right), component 1 the normalized
# indicator.  Haar functions attach to cubes of generation < max_generation.

def signatures(dim: int):
    return [s for s in product((0, 1), repeat=dim) if s != (1,) * dim]


def haar_function(lat: DyadicLattice, cube: DyadicCube, sig) -> GridFunction:
    """h_Q^eps as a grid function (unit L^2 norm under cell sums)."""
    g = lat.grid
    m = lat.cells_per_axis(cube.generation)
    if m < 2:
        raise GridAlignmentError("cube has a single cell per axis; no Haar function")
    N = g.points_per_axis
    vals = np.zeros(g.shape)
    scale = (m * g.h) ** (-g.dim / 2.0)
    half = m // 2
    axis_parts = []
    for a in range(g.dim):
        s0 = lat.shift_cells[a] + cube.index[a] * m
        left = (s0 + np.arange(half)) % N
        right = (s0 + half + np.arange(half)) % N
        axis_parts.append((left, right))
    for halves in product((0, 1), repeat=g.dim):
        sign = 1.0
        for a, hlf in enumerate(halves):
            if sig[a] == 0 and hlf == 1:
                sign = -sign
        idx = tuple(axis_parts[a][hlf] for a, hlf in enumerate(halves))
        vals[np.ix_(*idx)] = sign * scale
    return GridFunction(g, vals)


def haar_coefficients(f: GridFunction, lat: DyadicLattice) -> dict:
    """All <f, h_Q^eps> by exact cell sums; keys (cube, signature)."""
    g = f.grid
    if g is not lat.grid and g != lat.grid:
        raise GridAlignmentError("grid function and lattice live on different grids")
    if g.domain != FULL:
        raise GridAlignmentError("Haar coefficients need a full-space function")
    box = BoxSums(f.values)
    N = g.points_per_axis
    sigs = signatures(g.dim)
    coeffs = {}
    for cube in lat.cubes:
        m = lat.cells_per_axis(cube.generation)
        if cube.generation >= lat.max_generation or m < 2:
            continue
        half = m // 2
        # per-axis (left-half, right-half) cell sums are combined per signature
        axis_segs = []
        for a in range(g.dim):
            s0 = lat.shift_cells[a] + cube.index[a] * m
            axis_segs.append(
                (split_range(s0, half, N), split_range(s0 + half, half, N))
            )
        part = {}
        for halves in product((0, 1), repeat=g.dim):
            part[halves] = box.segments([axis_segs[a][hl] for a, hl in enumerate(halves)])
        scale = (m * g.h) ** (-g.dim / 2.0) * g.cell_volume
        for sig in sigs:
            acc = 0.0
            for halves, s in part.items():
                sign = 1.0
                for a, hlf in enumerate(halves):
                    if sig[a] == 0 and hlf == 1:
                        sign = -sign
                acc += sign * s
            coeffs[(cube, sig)] = scale * acc
    return coeffs


def coefficients_to_csv(coeffs: dict, path: str) -> None:
    """Export a Haar coefficient map keyed by (generation, index, signature)."""
    rows = sorted(
        (cube.generation, cube.index, sig, val) for (cube, sig), val in coeffs.items()
    )
    with open(path, "w") as fh:
        fh.write("generation,index,signature,coefficient\n")
        for gen, idx, sig, val in rows:
            fh.write(
                f"{gen},{'|'.join(map(str, idx))},{'|'.join(map(str, sig))},{val!r}\n"
            )


def haar_reconstruct(coeffs: dict, lat: DyadicLattice, base_mean: float) -> GridFunction:
    """Sum of coeff * h_Q^eps plus the base-cube mean."""
    vals = np.full(lat.grid.shape, float(base_mean))
    for (cube, sig), c in coeffs.items():
        if c == 0.0:
            continue
        vals += c * haar_function(lat, cube, sig).values
    return GridFunction(lat.grid, vals)


def random_haar_sum(lat: DyadicLattice, rng, scale_fn=None, max_generation=None) -> GridFunction:
    """Random finite Haar sum; coefficient std per cube is scale_fn(cube) (default sqrt|Q|)."""
    vals = np.zeros(lat.grid.shape)
    for cube in lat.cubes:
        if cube.generation >= lat.max_generation:
            continue
        if max_generation is not None and cube.generation >= max_generation:
            continue
        for sig in signatures(lat.grid.dim):
            s = np.sqrt(lat.cell_measure(cube)) if scale_fn is None else scale_fn(cube)
            c = rng.standard_normal() * s
            vals += c * haar_function(lat, cube, sig).values
    return GridFunction(lat.grid, vals)


def weighted_maximal(g: GridFunction, w, lat: DyadicLattice) -> GridFunction:
    """Dyadic weighted Hardy-Littlewood maximal function over the lattice cubes.

    (M_w g)(x) = max over cubes Q containing x of w(Q)^{-1} sum_Q |g| w h^n.
    """
    wv = w.values if hasattr(w, "values") else np.asarray(w, dtype=float)
    wv = wv.values if isinstance(wv, GridFunction) else wv
    if np.min(wv) <= 0:
        raise WeightError("maximal function needs a strictly positive weight")
    num = BoxSums(np.abs(g.values) * wv)
    den = BoxSums(wv)
    out = np.zeros(g.grid.shape)
    for cube in lat.cubes:
        avg = lat.cube_sum(num, cube) / lat.cube_sum(den, cube)
        idx = np.ix_(*lat.cell_indices(cube))
        out[idx] = np.maximum(out[idx], avg)
    return GridFunction(g.grid, out)
