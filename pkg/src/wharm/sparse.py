"""Calderon-Zygmund stopping times, sparse collections with certified
carriers, sparse operators, and the weighted-BMO good-function decomposition.

A collection is eta-sparse when each cube Q owns a carrier E_Q inside Q with
|E_Q| >= eta |Q| and the carriers are pairwise disjoint; it is Lambda-Carleson
when the cubes below any member pack at most Lambda times its measure.  The
two notions are equivalent with eta = 1/Lambda; the constructive direction
(Carleson -> carriers) is solved here by a max-flow assignment of grid cells
at desk scale rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .dyadic import BoxSums, DyadicCube, DyadicLattice
from .errors import ParameterError, SparsityError
from .grid import GridFunction


@dataclass
class StoppingFamily:
    """Maximal subcubes R of a parent with <dens>_R > alpha <dens>_parent."""

    parent: DyadicCube
    alpha: float
    selected: list
    parent_average: float
    averages: dict

    def total_child_cells(self, lat: DyadicLattice) -> int:
        m = 0
        for R in self.selected:
            m += lat.cells_per_axis(R.generation) ** lat.grid.dim
        return m


def _density_array(dens) -> np.ndarray:
    if isinstance(dens, GridFunction):
        return np.abs(dens.values)
    arr = getattr(dens, "array", None)
    if arr is not None:
        return np.asarray(arr, dtype=float)
    return np.abs(np.asarray(dens, dtype=float))


def cz_stopping(dens, lat: DyadicLattice, q0: DyadicCube, alpha: float) -> StoppingFamily:
    """Calderon-Zygmund selection at level alpha over the subtree of q0."""
    if alpha <= 1.0:
        raise ParameterError("cz_stopping needs alpha > 1")
    arr = _density_array(dens)
    sums = BoxSums(arr)

    def avg(cube):
        return lat.cube_sum(sums, cube) / (lat.cells_per_axis(cube.generation) ** lat.grid.dim)

    base = avg(q0)
    selected = []
    averages = {}
    stack = list(lat.children(q0))
    while stack:
        cube = stack.pop()
        a = avg(cube)
        if base > 0 and a > alpha * base:
            selected.append(cube)
            averages[cube] = a
        else:
            stack.extend(lat.children(cube))
    selected.sort(key=lambda c: (c.generation, c.index))
    fam = StoppingFamily(q0, alpha, selected, base, averages)
    # invariants are structural for exact cell sums; treat as internal checks
    dimfac = 2 ** lat.grid.dim
    for R in selected:
        a = averages[R]
        assert a > alpha * base * (1 - 1e-12)
        assert a <= dimfac * alpha * base * (1 + 1e-12)
    cells_q0 = lat.cells_per_axis(q0.generation) ** lat.grid.dim
    assert fam.total_child_cells(lat) <= cells_q0 / alpha * (1 + 1e-12)
    return fam


@dataclass
class SparseCollection:
    """Dyadic cubes with pairwise-disjoint carriers E_Q and certified eta."""

    lattice: DyadicLattice
    cubes: list
    carriers: dict
    eta: float

    def verify(self) -> bool:
        total = np.zeros(self.lattice.grid.shape, dtype=int)
        for q in self.cubes:
            mask = self.carriers[q]
            total += mask.astype(int)
            cells = self.lattice.cells_per_axis(q.generation) ** self.lattice.grid.dim
            if mask.sum() < self.eta * cells * (1 - 1e-12):
                return False
            if not np.all(mask <= self.lattice.mask(q)):
                return False
        return bool(np.max(total, initial=0) <= 1)

    def carleson_constant(self) -> float:
        """max over members Q of sum_{P in S, P below Q} |P| / |Q| (exact cell counts)."""
        lat = self.lattice
        worst = 0.0
        for q in self.cubes:
            cq = lat.cells_per_axis(q.generation) ** lat.grid.dim
            packed = sum(
                lat.cells_per_axis(p.generation) ** lat.grid.dim
                for p in self.cubes
                if lat.contains(q, p)
            )
            worst = max(worst, packed / cq)
        return worst

    def to_json(self) -> dict:
        out = []
        for q in self.cubes:
            mask = self.carriers[q].reshape(-1)
            # run-length encode the flat carrier bitmap
            runs = []
            i = 0
            while i < len(mask):
                if mask[i]:
                    j = i
                    while j < len(mask) and mask[j]:
                        j += 1
                    runs.append([int(i), int(j)])
                    i = j
                else:
                    i += 1
            out.append({"generation": q.generation, "index": list(q.index), "carrier_runs": runs})
        return {"eta": self.eta, "cubes": out}


def build_sparse_from_recursion(children_rule, lat: DyadicLattice, q0: DyadicCube, alpha: float) -> SparseCollection:
    """Recurse children_rule from q0; certifies eta = 1 - 1/alpha sparseness.

    children_rule(cube) must return lattice subcubes with total measure at
    most |cube|/alpha, else SparsityError names the offender.
    """
    if alpha <= 1.0:
        raise ParameterError("needs alpha > 1")
    cubes = []
    carriers = {}
    stack = [q0]
    dim = lat.grid.dim
    while stack:
        cube = stack.pop()
        cubes.append(cube)
        kids = list(children_rule(cube)) if cube.generation < lat.max_generation else []
        cell_budget = lat.cells_per_axis(cube.generation) ** dim / alpha
        kid_cells = sum(lat.cells_per_axis(c.generation) ** dim for c in kids)
        if kid_cells > cell_budget * (1 + 1e-12):
            raise SparsityError(f"children of {cube} carry {kid_cells} cells > |Q|/alpha")
        mask = lat.mask(cube)
        for c in kids:
            mask &= ~lat.mask(c)
        carriers[cube] = mask
        stack.extend(kids)
    cubes.sort(key=lambda c: (c.generation, c.index))
    return SparseCollection(lat, cubes, carriers, 1.0 - 1.0 / alpha)


def sparse_operator_apply(coll: SparseCollection, f: GridFunction) -> GridFunction:
    """A_S f = sum over members of <f>_Q 1_Q."""
    lat = coll.lattice
    sums = BoxSums(f.values)
    out = np.zeros(f.grid.shape)
    for q in coll.cubes:
        avg = lat.cube_sum(sums, q) / (lat.cells_per_axis(q.generation) ** lat.grid.dim)
        out[np.ix_(*lat.cell_indices(q))] += avg
    return GridFunction(f.grid, out)


def sparse_operator_matrix(coll: SparseCollection, grid) -> np.ndarray:
    """Dense matrix of A_S on value vectors."""
    lat = coll.lattice
    npts = int(np.prod(grid.shape))
    M = np.zeros((npts, npts))
    for q in coll.cubes:
        mask = lat.mask(q).reshape(-1)
        idx = np.nonzero(mask)[0]
        M[np.ix_(idx, idx)] += 1.0 / len(idx)
    return M


def carleson_to_sparse(lat: DyadicLattice, cubes, eta: float):
    """Find carriers with |E_Q| >= eta |Q| by max-flow; None when infeasible.

    Carriers are fractional cell masks: a measurable subset of a cell
    corresponds to claiming a fraction of its measure, which is exactly the
    granularity the sparse/Carleson equivalence needs (whole-cell carriers
    need not exist at eta = 1/Lambda because of integrality).
    """
    dim = lat.grid.dim
    G = nx.DiGraph()
    total = 0.0
    for i, q in enumerate(cubes):
        cells = lat.cells_per_axis(q.generation) ** dim
        d = eta * cells
        total += d
        G.add_edge("s", ("q", i), capacity=d)
        flat = np.nonzero(lat.mask(q).reshape(-1))[0]
        for cell in flat:
            G.add_edge(("q", i), ("c", int(cell)), capacity=1.0)
    for node in list(G.nodes):
        if isinstance(node, tuple) and node[0] == "c":
            G.add_edge(node, "t", capacity=1.0)
    value, flow = nx.maximum_flow(G, "s", "t")
    if value < total * (1.0 - 1e-9):
        return None
    carriers = {}
    for i, q in enumerate(cubes):
        mask = np.zeros(int(np.prod(lat.grid.shape)))
        for dst, used in flow[("q", i)].items():
            if used > 0:
                mask[dst[1]] = used
        carriers[q] = mask.reshape(lat.grid.shape)
    return FractionalSparseCollection(lat, list(cubes), carriers, eta)


@dataclass
class FractionalSparseCollection:
    """Sparse carriers with fractional cell ownership (cell masses in [0,1])."""

    lattice: DyadicLattice
    cubes: list
    carriers: dict
    eta: float

    def verify(self) -> bool:
        total = np.zeros(self.lattice.grid.shape)
        for q in self.cubes:
            mask = self.carriers[q]
            total += mask
            cells = self.lattice.cells_per_axis(q.generation) ** self.lattice.grid.dim
            if mask.sum() < self.eta * cells * (1 - 1e-9):
                return False
            if np.any((mask > 0) & ~self.lattice.mask(q)):
                return False
        return bool(np.max(total, initial=0.0) <= 1.0 + 1e-9)


def bmo_good_function(b: GridFunction, w, lat: DyadicLattice, q0: DyadicCube, alpha: float):
    """a = 1_{Q0} b - sum_R (b - <b>_R) 1_R with R from the w-stopping family.

    a agrees with b outside the selected cubes, is flat on each of them, and
    lands in unweighted dyadic BMO over Q0 with norm at most
    2 alpha <w>_{Q0} ||b||_{BMO_D(w), D(Q0)}.
    """
    fam = cz_stopping(w, lat, q0, alpha)
    sums = BoxSums(b.values)
    vals = np.zeros(b.grid.shape)
    mask0 = lat.mask(q0)
    vals[mask0] = b.values[mask0]
    for R in fam.selected:
        idx = np.ix_(*lat.cell_indices(R))
        avg = lat.cube_sum(sums, R) / (lat.cells_per_axis(R.generation) ** lat.grid.dim)
        vals[idx] = avg
    return GridFunction(b.grid, vals), fam
