"""Littlewood-Paley area functions, g*-type maximal square functions, and the
weighted Hardy norms built from them.

The time integral over (0, infinity) dt/t is truncated to a geometric grid
t_m = t_min 2^{m/M} with log-weight ln(2)/M per step; the cone integral at
scale t is the plain cell sum over {y : |x - y| < t} (clipped at the box,
not periodized), optionally restricted to the same side as x for the
Neumann cone.

Discrete fact worth knowing: for x in the upper half-space,
    (sqrt(2)/2) S_free(f_{+,e})(x) <= S_neumann(f)(x) <= S_free(f_{+,e})(x)
holds pointwise and both bounds are attained; the cone-halving step that
would upgrade the left inequality to an equality swaps the cone vertex x
for its reflection, so equality is generally false.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .dyadic import DyadicLattice, haar_coefficients
from .errors import BackendError, ParameterError
from .grid import FULL, LOWER, UPPER, Grid, GridFunction, extend_even, restrict
from .operators import OperatorHandle, apply, phi_op, qt_op


@dataclass(frozen=True)
class ConeSpec:
    """Cone geometry; aperture fixed at 1 (|x - y| < t).

    kind "neumann" excludes (y, t) with x_n y_n < 0.
    """

    kind: str = "free"

    def __post_init__(self):
        if self.kind not in ("free", "neumann"):
            raise ParameterError(f"unknown cone kind {self.kind!r}")


@dataclass
class TimeGrid:
    """Geometric scales t_m = t_min 2^{m/M}; dt/t weight is ln(2)/M."""

    t_values: np.ndarray
    steps_per_octave: int

    @property
    def log_weight(self) -> float:
        return np.log(2.0) / self.steps_per_octave

    @classmethod
    def geometric(cls, grid: Grid, t_min=None, t_max=None, steps_per_octave: int = 8):
        h, L = grid.h, grid.halfwidth
        t_min = 2.0 * h if t_min is None else float(t_min)
        t_max = L if t_max is None else float(t_max)
        if t_min < h:
            raise ParameterError(f"t_min={t_min} below the cell width {h}")
        if t_max > 2.0 * L:
            raise ParameterError(f"t_max={t_max} above the box size {2 * L}")
        M = steps_per_octave
        m_max = int(np.floor(M * np.log2(t_max / t_min) + 1e-12))
        ts = t_min * 2.0 ** (np.arange(m_max + 1) / M)
        return cls(ts, M)


def _ball_kernel_1d(npts: int, t: float, h: float) -> np.ndarray:
    r = int(np.ceil(t / h)) - 1  # strict |x-y| < t on cell centers
    r = max(min(r, npts - 1), 0)
    return np.ones(2 * r + 1)


def _radial_kernel(grid: Grid, t: float, profile) -> np.ndarray:
    """Kernel K[dz] = profile(|dz| h) over all cell offsets (linear conv)."""
    N = grid.points_per_axis
    off = np.arange(-(N - 1), N) * grid.h
    if grid.dim == 1:
        return profile(np.abs(off))
    dx, dy = np.meshgrid(off, off, indexing="ij")
    return profile(np.sqrt(dx ** 2 + dy ** 2))


def _conv_same(field: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    if field.ndim == 1 and kernel.size <= 3:
        # tiny kernels: direct is cheaper and exact
        return np.convolve(field, kernel, mode="same")
    out = fftconvolve(field, kernel, mode="same")
    return out


def _ball_sums(field: np.ndarray, grid: Grid, t: float) -> np.ndarray:
    """sum_{|x-y| < t} field(y) per x (box-clipped, cell centers)."""
    if grid.dim == 1:
        k = _ball_kernel_1d(field.shape[0], t, grid.h)
        return _conv_same(field, k)
    N = grid.points_per_axis
    off = np.arange(-(N - 1), N)
    dx, dy = np.meshgrid(off, off, indexing="ij")
    k = ((dx ** 2 + dy ** 2) * grid.h ** 2 < t * t).astype(float)
    return fftconvolve(field, k, mode="same")


def _generator_handle(generator, t: float) -> OperatorHandle:
    if generator == "qt":
        return qt_op("free", t)
    if isinstance(generator, tuple) and generator[0] == "phi":
        return phi_op(t, beta=int(generator[1]))
    raise ParameterError(f"unknown square-function generator {generator!r}")


def _sided_fields(f: GridFunction, generator, t: float):
    """|t^2 L_N e^{-t^2 L_N} f|^2 over the full grid, computed side-wise."""
    up = apply(_generator_handle(generator, t), extend_even(restrict(f, UPPER))).values
    lo = apply(_generator_handle(generator, t), extend_even(restrict(f, LOWER))).values
    half = f.grid.points_per_axis // 2
    out = np.empty(f.grid.shape)
    out[..., half:] = up[..., half:]
    out[..., :half] = lo[..., :half]
    return out


def area_function(f: GridFunction, generator, cone: ConeSpec, tg: TimeGrid) -> GridFunction:
    """S(f)(x) = (sum_m ln2/M t_m^{-n} int_{|x-y|<t_m, cone} |G_{t_m} f|^2 dy)^{1/2}."""
    g = f.grid
    if g.domain != FULL:
        raise BackendError("area functions are evaluated on full-space data")
    if cone.kind == "neumann" and not (generator == "qt"):
        raise ParameterError("the Neumann cone is wired for the heat generator only")
    n = g.dim
    acc = np.zeros(g.shape)
    half = g.points_per_axis // 2
    for t in tg.t_values:
        if cone.kind == "free":
            field = apply(_generator_handle(generator, t), f).values ** 2
            acc += _ball_sums(field, g, t) / t ** n
        else:
            field = _sided_fields(f, generator, t) ** 2
            up = np.zeros(g.shape)
            up[..., half:] = field[..., half:]
            lo = np.zeros(g.shape)
            lo[..., :half] = field[..., :half]
            sums_up = _ball_sums(up, g, t)
            sums_lo = _ball_sums(lo, g, t)
            both = np.empty(g.shape)
            both[..., half:] = sums_up[..., half:]
            both[..., :half] = sums_lo[..., :half]
            acc += both / t ** n
    acc *= tg.log_weight * g.cell_volume
    return GridFunction(g, np.sqrt(np.maximum(acc, 0.0)))


def g_star(h_fn: GridFunction, generator, lambda_exponent: int, tg: TimeGrid) -> GridFunction:
    """g*-type maximal square function with weight (t/(t+|x-y|))^lambda_exponent."""
    g = h_fn.grid
    if g.domain != FULL:
        raise BackendError("g* is evaluated on full-space data")
    n = g.dim
    lam = int(lambda_exponent)
    acc = np.zeros(g.shape)
    for t in tg.t_values:
        field = apply(_generator_handle(generator, t), h_fn).values ** 2
        kern = _radial_kernel(g, t, lambda d: (t / (t + d)) ** lam)
        acc += fftconvolve(field, kern, mode="same") / t ** n
    acc *= tg.log_weight * g.cell_volume
    return GridFunction(g, np.sqrt(np.maximum(acc, 0.0)))


def haar_square_function(f: GridFunction, lat: DyadicLattice) -> GridFunction:
    """S_psi(f) = (sum_Q |<f, h_Q^eps>|^2 1_{2Q} / |Q|)^{1/2}, 2Q clipped to the box."""
    g = f.grid
    coeffs = haar_coefficients(f, lat)
    acc = np.zeros(g.shape)
    N = g.points_per_axis
    per_cube = {}
    for (cube, sig), c in coeffs.items():
        per_cube[cube] = per_cube.get(cube, 0.0) + c * c
    for cube, c2 in per_cube.items():
        m = lat.cells_per_axis(cube.generation)
        sl = []
        wrapped = False
        for a in range(g.dim):
            s0 = lat.shift_cells[a] + cube.index[a] * m
            if s0 + m > N:
                wrapped = True
                break
            sl.append(slice(max(s0 - m // 2, 0), min(s0 + m + m // 2, N)))
        if wrapped:
            # 2Q of a wrapped shifted cube: fall back to the cube itself
            idx = np.ix_(*lat.cell_indices(cube))
            acc[idx] += c2 / lat.cell_measure(cube)
            continue
        acc[tuple(sl)] += c2 / lat.cell_measure(cube)
    return GridFunction(g, np.sqrt(acc))


def hardy_norm(f: GridFunction, flavor, w, tg: TimeGrid = None, lattice: DyadicLattice = None) -> float:
    """||S(f)||_{L^1_w} for the selected square-function flavor.

    flavor: "heat-free" | "heat-neumann" | ("classical", beta) | "haar".
    """
    warr = w.array if hasattr(w, "array") else np.asarray(w, dtype=float)
    if np.min(warr) <= 0:
        raise ParameterError("hardy_norm needs a strictly positive weight")
    if flavor == "haar":
        if lattice is None:
            raise ParameterError("the Haar flavor needs a lattice")
        S = haar_square_function(f, lattice)
    else:
        if tg is None:
            tg = TimeGrid.geometric(f.grid)
        if flavor == "heat-free":
            S = area_function(f, "qt", ConeSpec("free"), tg)
        elif flavor == "heat-neumann":
            S = area_function(f, "qt", ConeSpec("neumann"), tg)
        elif isinstance(flavor, tuple) and flavor[0] == "classical":
            S = area_function(f, ("phi", int(flavor[1])), ConeSpec("free"), tg)
        else:
            raise ParameterError(f"unknown hardy flavor {flavor!r}")
    return float(np.sum(S.values * warr) * f.grid.cell_volume)
