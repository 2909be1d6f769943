"""BMO-type norms: classical weighted BMO and its r-variants, the Haar
Carleson-measure norm, semigroup Carleson norms for the free and reflection
Neumann Laplacians, and the half-space extension variants.

Carleson boxes follow the Whitney convention Q^ = Q x (l(Q)/2, l(Q)], so the
boxes of the dyadic cubes below a top cube P tile P x (0, l(P)] exactly.
Suprema over P run over every cube of the supplied lattice family with
l(P) >= 4h (each such P holds a full Whitney slab above the time grid);
inner sums always run over the unshifted dyadic cubes contained in P.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .dyadic import BoxSums, DyadicLattice, haar_coefficients
from .errors import DomainError, ParameterError
from .grid import FULL, Grid, GridFunction, extend_even, extend_odd, restrict
from .operators import apply, qt_op
from .squarefn import TimeGrid, _sided_fields
from .weights import Weight, as_weight

CLASSICAL_FLAVORS = ("classical-w", "classical-wr")
CARLESON_FLAVORS = ("carleson-haar", "carleson-heat-free", "carleson-heat-neumann")
HALF_FLAVORS = ("unweighted-half", "odd-ext-half", "even-ext-half")


def _iter_lattices(lattices):
    if isinstance(lattices, DyadicLattice):
        return [lattices]
    return list(lattices)


def _classical_sup(values: np.ndarray, warr, lattices, r=None) -> float:
    """sup over cubes of the (weighted) mean-deviation functional.

    values may contain NaN to mark cells outside the admissible domain;
    cubes touching such cells are skipped.
    """
    best = 0.0
    for lat in _iter_lattices(lattices):
        for cube in lat.cubes:
            v = values[np.ix_(*lat.cell_indices(cube))]
            if np.isnan(v).any():
                continue
            m = v.mean()
            if r is None:
                num = np.sum(np.abs(v - m))
                den = v.size if warr is None else np.sum(warr[np.ix_(*lat.cell_indices(cube))])
                best = max(best, num / den)
            else:
                wv = warr[np.ix_(*lat.cell_indices(cube))]
                num = np.sum(np.abs(v - m) ** r * wv ** (1.0 - r))
                best = max(best, (num / np.sum(wv)) ** (1.0 / r))
    return best


def _carleson_haar(f: GridFunction, w: Weight, lattices) -> float:
    best = 0.0
    warr = w.array
    h_n = f.grid.cell_volume
    for lat in _iter_lattices(lattices):
        coeffs = haar_coefficients(f, lat)
        per_cube = {}
        for (cube, sig), c in coeffs.items():
            per_cube[cube] = per_cube.get(cube, 0.0) + c * c
        wsums = BoxSums(warr)
        subtree = {}
        for cube in sorted(lat.cubes, key=lambda q: -q.generation):
            s = per_cube.get(cube, 0.0) * lat.cell_measure(cube) / (lat.cube_sum(wsums, cube) * h_n)
            for ch in lat.children(cube):
                s += subtree[ch]
            subtree[cube] = s
        for cube in lat.cubes:
            val = subtree[cube] / (lat.cube_sum(wsums, cube) * h_n)
            best = max(best, val)
    return float(np.sqrt(best))


class _GenerationTables:
    """Per-generation prefix sums of per-cube Carleson contributions."""

    def __init__(self, lat: DyadicLattice, values_by_gen: dict):
        self.lat = lat
        self.prefix = {}
        for k, arr in values_by_gen.items():
            acc = arr
            for ax in range(arr.ndim):
                acc = np.cumsum(acc, axis=ax)
                pad = [(0, 0)] * arr.ndim
                pad[ax] = (1, 0)
                acc = np.pad(acc, pad)
            self.prefix[k] = acc

    def sum_inside(self, seglists) -> float:
        """Sum over dyadic cubes (all generations) inside the cell segments."""
        N = self.lat.grid.points_per_axis
        total = 0.0
        for k, P in self.prefix.items():
            m = N >> k
            ranges_per_axis = []
            for segs in seglists:
                rr = []
                for (a, b) in segs:
                    lo = (a + m - 1) // m
                    hi = b // m
                    if hi > lo:
                        rr.append((lo, hi))
                ranges_per_axis.append(rr)
            if any(not rr for rr in ranges_per_axis):
                continue
            for combo in product(*ranges_per_axis):
                idx_lo = tuple(c[0] for c in combo)
                idx_hi = tuple(c[1] for c in combo)
                nd = len(combo)
                for corner in product((0, 1), repeat=nd):
                    idx = tuple(hi if bit else lo for lo, hi, bit in zip(idx_lo, idx_hi, corner))
                    sign = (-1) ** (nd - sum(corner))
                    total += sign * P[idx]
        return total


def _slab_times(tg: TimeGrid, ell: float):
    ts = tg.t_values
    return ts[(ts > ell / 2.0 + 1e-12 * ell) & (ts <= ell * (1.0 + 1e-12))]


def _carleson_heat(f: GridFunction, w: Weight, lattices, tg: TimeGrid, neumann: bool) -> float:
    g = f.grid
    if g.domain != FULL:
        raise DomainError("semigroup Carleson norms are evaluated on full-space data")
    n = g.dim
    lats = _iter_lattices(lattices)
    dyadic = next((l for l in lats if all(s == 0 for s in l.shift_cells)), None)
    if dyadic is None:
        # inner sums run over unshifted dyadic cubes (block sums rely on it)
        raise ParameterError("semigroup Carleson norms need the unshifted lattice in the family")
    lw = tg.log_weight
    h_n = g.cell_volume
    wsums = w.power_sums()

    def _block_sums(arr: np.ndarray, k: int) -> np.ndarray:
        """Sums of a cell array over the unshifted generation-k cubes."""
        m = g.points_per_axis >> k
        if n == 1:
            return arr.reshape(1 << k, m).sum(axis=1)
        return arr.reshape(1 << k, m, 1 << k, m).sum(axis=(1, 3))

    # per-generation cube contributions c_Q = int_{Q^} |G_t f|^2 t^n/w(Q) dy dt/t
    values_by_gen = {}
    warr = w.array
    for k in range(dyadic.max_generation + 1):
        ell = 2.0 * g.halfwidth * 2.0 ** (-k)
        ts = _slab_times(tg, ell)
        if len(ts) == 0:
            continue
        acc = np.zeros((1 << k,) * n)
        for t in ts:
            if neumann:
                field = _sided_fields(f, "qt", t) ** 2
            else:
                field = apply(qt_op("free", t), f).values ** 2
            acc += lw * t ** n * _block_sums(field, k) * h_n
        values_by_gen[k] = acc / (_block_sums(warr, k) * h_n)
    tables = _GenerationTables(dyadic, values_by_gen)

    best = 0.0
    min_len = 4.0 * g.h
    for lat in lats:
        for cube in lat.cubes:
            if lat.sidelength(cube) < min_len - 1e-12:
                continue
            inner = tables.sum_inside(lat.axis_segments(cube))
            wmass = lat.cube_sum(wsums, cube) * h_n
            best = max(best, inner / wmass)
    return float(np.sqrt(max(best, 0.0)))


def bmo_norm(f: GridFunction, w, flavor: str, lattices, r: float = 2.0, tg: TimeGrid = None) -> float:
    """BMO-type norm of f for the requested flavor.

    classical-w     sup_Q w(Q)^{-1} int_Q |f - <f>_Q|
    classical-wr    (sup_Q w(Q)^{-1} int_Q |f - <f>_Q|^r w^{1-r})^{1/r}
    carleson-haar   sup_P (w(P)^{-1} sum_{Q subset P} <f,h_Q>^2 |Q|/w(Q))^{1/2}
    carleson-heat-* Whitney-box semigroup Carleson norms (free / Neumann)
    unweighted-half classical BMO over cubes inside the half-space
    odd-ext-half    unweighted classical BMO of the odd extension
    even-ext-half   classical BMO of the even extension, weight extended evenly
    """
    if flavor == "classical-w":
        return float(_classical_sup(f.values, as_weight(w).array, lattices))
    if flavor == "classical-wr":
        if r < 1.0:
            raise ParameterError("classical-wr needs r >= 1")
        return float(_classical_sup(f.values, as_weight(w).array, lattices, r=r))
    if flavor == "carleson-haar":
        return _carleson_haar(f, as_weight(w), lattices)
    if flavor == "carleson-heat-free":
        return _carleson_heat(f, as_weight(w), lattices, tg or TimeGrid.geometric(f.grid), neumann=False)
    if flavor == "carleson-heat-neumann":
        return _carleson_heat(f, as_weight(w), lattices, tg or TimeGrid.geometric(f.grid), neumann=True)
    if flavor in HALF_FLAVORS:
        return _half_flavor_norm(f, w, flavor, lattices)
    raise ParameterError(f"unknown BMO flavor {flavor!r}")


def _half_flavor_norm(f: GridFunction, w, flavor: str, lattices) -> float:
    g = f.grid
    if flavor == "unweighted-half":
        if g.domain == FULL:
            raise DomainError("unweighted-half expects a half-space function")
        N = g.points_per_axis
        full = np.full(g.with_domain(FULL).shape, np.nan)
        half = N // 2
        if g.domain == "upper":
            full[..., half:] = f.values
        else:
            full[..., :half] = f.values
        return float(_classical_sup(full, None, lattices))
    if flavor == "odd-ext-half":
        if g.domain == FULL:
            raise DomainError("odd-ext-half expects a half-space function")
        return float(_classical_sup(extend_odd(f).values, None, lattices))
    if flavor == "even-ext-half":
        if g.domain == FULL:
            raise DomainError("even-ext-half expects a half-space function")
        we = extend_even(as_weight(w).values)
        return float(_classical_sup(extend_even(f).values, we.values, lattices))
    raise ParameterError(flavor)


def bmo_deltaN_norm(f: GridFunction, w, lattices, tg: TimeGrid = None) -> float:
    """The reflection-Neumann semigroup Carleson norm (full-space data)."""
    return bmo_norm(f, w, "carleson-heat-neumann", lattices, tg=tg)


def bmo_deltaN_sides(f: GridFunction, w, lattices, tg: TimeGrid = None):
    """(||f_{+,e}||, ||f_{-,e}||) in the free-Laplacian Carleson norm with the
    matching even-extended weights; their sum is equivalent to bmo_deltaN_norm."""
    w = as_weight(w)
    fp = extend_even(restrict(f, "upper"))
    fm = extend_even(restrict(f, "lower"))
    wp = Weight(extend_even(restrict(w.values, "upper")))
    wm = Weight(extend_even(restrict(w.values, "lower")))
    np_ = bmo_norm(fp, wp, "carleson-heat-free", lattices, tg=tg)
    nm = bmo_norm(fm, wm, "carleson-heat-free", lattices, tg=tg)
    return np_, nm


def bmo_deltaN_classical_norm(f: GridFunction, lattices) -> float:
    """Unweighted BMO_{Delta_N}: classical BMO of both even extensions, summed."""
    fp = extend_even(restrict(f, "upper"))
    fm = extend_even(restrict(f, "lower"))
    return float(_classical_sup(fp.values, None, lattices) + _classical_sup(fm.values, None, lattices))


def dyadic_local_bmo(f: GridFunction, lat: DyadicLattice, q0, w=None) -> float:
    """sup over lattice cubes Q contained in q0 of the mean-deviation functional."""
    warr = None if w is None else as_weight(w).array
    best = 0.0
    for cube in lat.cubes:
        if not lat.contains(q0, cube):
            continue
        v = f.values[np.ix_(*lat.cell_indices(cube))]
        m = v.mean()
        num = np.sum(np.abs(v - m))
        den = v.size if warr is None else np.sum(warr[np.ix_(*lat.cell_indices(cube))])
        best = max(best, num / den)
    return float(best)


def john_nirenberg_report(suite, lattices) -> dict:
    """rho = ||b||_{w,r} / ||b||_w per instance plus the A^p-based predictor.

    Asserts rho >= 1 (Hoelder, exact for cell sums) and reports the fitted
    constant max rho / [w]_{A^p}^{max(1, 1/(p-1))}.
    """
    from .weights import ap_constant

    rows = []
    fitted = 0.0
    for item in suite:
        b, w, p, r = item
        if r < 1.0 or r > p / (p - 1.0) + 1e-12:
            raise ParameterError("John-Nirenberg needs 1 <= r <= p'")
        nw = bmo_norm(b, w, "classical-w", lattices)
        if nw == 0.0:
            rows.append({"skipped": "constant symbol"})
            continue
        nwr = bmo_norm(b, w, "classical-wr", lattices, r=r)
        rho = nwr / nw
        apw = ap_constant(w, p, lattices)
        predictor = apw ** max(1.0, 1.0 / (p - 1.0))
        rows.append({"rho": rho, "ap": apw, "predictor": predictor, "p": p, "r": r})
        fitted = max(fitted, rho / predictor)
        if rho < 1.0 - 1e-12:
            raise AssertionError(f"John-Nirenberg ordering violated: rho={rho}")
    return {"rows": rows, "fitted_C": fitted}
