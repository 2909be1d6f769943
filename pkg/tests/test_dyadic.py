import numpy as np
import pytest

from wharm.dyadic import (
    BoxSums,
    DyadicCube,
    build_lattice,
    haar_coefficients,
    haar_function,
    haar_reconstruct,
    random_haar_sum,
    signatures,
    weighted_maximal,
)
from wharm.errors import GridAlignmentError, WeightError
from wharm.grid import Grid, GridFunction, constant
from wharm.weights import Weight


def test_lattice_counts():
    g = Grid(1, 1.0, 8)
    assert len(build_lattice(g, 3).cubes) == 15  # 1 + 2 + 4 + 8
    g2 = Grid(2, 1.0, 8)
    assert len(build_lattice(g2, 2).cubes) == 21  # 1 + 4 + 16


def test_shifted_lattice_count_matches():
    g = Grid(1, 1.0, 12)
    assert len(build_lattice(g, 2, "third").cubes) == len(build_lattice(g, 2).cubes)


def test_alignment_error():
    g = Grid(1, 1.0, 12)
    with pytest.raises(GridAlignmentError):
        build_lattice(g, 3)  # 8 does not divide 12


def test_haar_orthonormality():
    g = Grid(1, 1.0, 16)
    lat = build_lattice(g, 4)
    hs = [
        (c, s, haar_function(lat, c, s))
        for c in lat.cubes
        if c.generation < lat.max_generation
        for s in signatures(1)
    ]
    for i, (c1, s1, h1) in enumerate(hs):
        for c2, s2, h2 in hs[i:]:
            ip = np.sum(h1.values * h2.values) * g.cell_volume
            expect = 1.0 if (c1, s1) == (c2, s2) else 0.0
            assert abs(ip - expect) <= 1e-12


def test_haar_orthonormality_2d():
    g = Grid(2, 1.0, 8)
    lat = build_lattice(g, 2)
    hs = [
        (c, s, haar_function(lat, c, s))
        for c in lat.cubes
        if c.generation < lat.max_generation
        for s in signatures(2)
    ]
    rng = np.random.default_rng(5)
    idx = rng.integers(0, len(hs), size=(60, 2))
    for i, j in idx:
        c1, s1, h1 = hs[i]
        c2, s2, h2 = hs[j]
        ip = np.sum(h1.values * h2.values) * g.cell_volume
        expect = 1.0 if (c1, s1) == (c2, s2) else 0.0
        assert abs(ip - expect) <= 1e-12


def test_constant_has_zero_coefficients():
    g = Grid(1, 1.0, 16)
    lat = build_lattice(g, 4)
    co = haar_coefficients(constant(g, 7.0), lat)
    assert max(abs(c) for c in co.values()) <= 1e-13


def test_haar_function_coefficient_is_delta():
    g = Grid(1, 1.0, 16)
    lat = build_lattice(g, 4)
    q0 = DyadicCube(0, (0,))
    h0 = haar_function(lat, q0, (0,))
    co = haar_coefficients(h0, lat)
    for (cube, sig), c in co.items():
        expect = 1.0 if (cube, sig) == (q0, (0,)) else 0.0
        assert abs(c - expect) <= 1e-12


def test_reconstruction_and_parseval(rng):
    for n, N, gen in ((1, 64, 6), (2, 16, 4)):
        g = Grid(n, 1.0, N)
        lat = build_lattice(g, gen)
        f = GridFunction(g, rng.standard_normal(g.shape))
        co = haar_coefficients(f, lat)
        mean = float(f.values.mean())
        rec = haar_reconstruct(co, lat, mean)
        scale = np.max(np.abs(f.values))
        assert np.max(np.abs(rec.values - f.values)) <= 1e-10 * scale
        par = sum(c * c for c in co.values())
        l2 = float(np.sum((f.values - mean) ** 2) * g.cell_volume)
        assert abs(par - l2) <= 1e-10 * l2


def test_nestedness_including_shifted():
    g = Grid(1, 1.0, 16)
    for shift in ("none", "third", "two_thirds"):
        lat = build_lattice(g, 3, shift)
        masks = [frozenset(np.nonzero(lat.mask(c).reshape(-1))[0]) for c in lat.cubes]
        for i, mi in enumerate(masks):
            for mj in masks[i + 1:]:
                inter = mi & mj
                assert inter in (frozenset(), mi, mj)


def test_maximal_constant(grid64, lat64):
    w = Weight(constant(grid64, 1.0))
    m = weighted_maximal(constant(grid64, -3.0), w, lat64)
    assert np.allclose(m.values, 3.0, rtol=0, atol=1e-14)


def test_maximal_indicator(grid64, lat64):
    # g = 1_Q for a generation-1 cube: M g = 1 on Q, >= |Q|/|Q0| elsewhere
    w = Weight(constant(grid64, 1.0))
    q = DyadicCube(1, (0,))
    ind = GridFunction(grid64, lat64.mask(q).astype(float))
    m = weighted_maximal(ind, w, lat64)
    on = lat64.mask(q)
    assert np.all(m.values[on] == 1.0)
    assert np.all(m.values[~on] >= 0.5 - 1e-14)


def test_maximal_brute_force_oracle(rng):
    g = Grid(1, 1.0, 32)
    lat = build_lattice(g, 5)
    gfun = GridFunction(g, rng.standard_normal(g.shape))
    w = Weight(GridFunction(g, np.exp(rng.standard_normal(g.shape))))
    m = weighted_maximal(gfun, w, lat)
    # oracle: per point, loop over every cube containing it
    for i in range(0, 32, 3):
        best = 0.0
        for cube in lat.cubes:
            cells = lat.cell_indices(cube)[0]
            if i in cells:
                num = np.sum(np.abs(gfun.values[cells]) * w.array[cells])
                den = np.sum(w.array[cells])
                best = max(best, num / den)
        assert abs(m.values[i] - best) <= 1e-12 * best


def test_maximal_dominates_cube_averages(rng):
    g = Grid(1, 1.0, 32)
    lat = build_lattice(g, 4)
    gfun = GridFunction(g, rng.standard_normal(g.shape))
    w = Weight(GridFunction(g, np.exp(0.5 * rng.standard_normal(g.shape))))
    m = weighted_maximal(gfun, w, lat)
    for cube in lat.cubes:
        cells = lat.cell_indices(cube)[0]
        avg = np.sum(gfun.values[cells] * w.array[cells]) / np.sum(w.array[cells])
        assert np.all(m.values[cells] >= abs(avg) - 1e-12)


def test_maximal_rejects_nonpositive_weight(grid64, lat64):
    with pytest.raises(WeightError):
        weighted_maximal(constant(grid64, 1.0), constant(grid64, 0.0), lat64)


def test_weighted_bmo_coefficient_bound(rng):
    # |<b, h_Q>| <= 4 sqrt|Q| <w>_Q ||b||_{BMO_D(w)} on random instances
    from wharm.bmo import bmo_norm

    g = Grid(1, 1.0, 32)
    lat = build_lattice(g, 5)
    for _ in range(10):
        b = random_haar_sum(lat, rng, max_generation=3)
        w = Weight(GridFunction(g, np.exp(0.6 * rng.standard_normal(g.shape))))
        norm = bmo_norm(b, w, "classical-w", [lat])
        if norm == 0:
            continue
        co = haar_coefficients(b, lat)
        for (cube, sig), c in co.items():
            bound = 4.0 * np.sqrt(lat.cell_measure(cube)) * w.cube_average(lat, cube) * norm
            assert abs(c) <= bound * (1 + 1e-9)


def test_boxsums_wrapped_segments(rng):
    arr = rng.standard_normal((8, 8))
    bs = BoxSums(arr)
    # wrapped range [6, 6+4) mod 8 = rows {6,7,0,1}
    segs = [[(6, 8), (0, 2)], [(3, 5)]]
    total = bs.segments(segs)
    expect = arr[[6, 7, 0, 1]][:, 3:5].sum()
    assert abs(total - expect) <= 1e-12


def test_coefficient_csv_export(tmp_path, rng, grid64, lat64):
    from wharm.dyadic import coefficients_to_csv

    f = GridFunction(grid64, rng.standard_normal(grid64.shape))
    co = haar_coefficients(f, lat64)
    path = str(tmp_path / "co.csv")
    coefficients_to_csv(co, path)
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "generation,index,signature,coefficient"
    assert len(lines) == len(co) + 1
