"""Experiment harness: reproducible probes of the two-weight commutator
equivalence, the Riesz/A^p characterization, the Dirichlet counterexample,
BMO flavor coincidences, and the John-Nirenberg inequality.

Reports are deterministic: a fixed seed fixes every number, reductions run
in fixed orders, and the report JSON carries a content hash of the
configuration plus the tolerance table in force.  Wall-clock goes to the
log, never into the report file, so identical config + seed reproduces the
file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time

import numpy as np

from . import bmo as bmo_mod
from .dyadic import lattice_family, random_haar_sum
from .errors import ParameterError
from .grid import Grid, GridFunction, restrict
from .operators import assemble_matrix, riesz, weighted_operator_norm
from .squarefn import TimeGrid
from .weights import (
    Weight,
    WeightTriple,
    ap_constant_per_lattice,
    ap_deltaN_constant,
    ap_quotient_on_box,
    weight_from_spec,
)

log = logging.getLogger("wharm.harness")

EXPERIMENTS = {}


def experiment(name):
    def wrap(fn):
        EXPERIMENTS[name] = fn
        return fn

    return wrap


def canonical_json(obj) -> str:
    def scrub(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON-serializable: {type(o)}")

    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False, default=scrub)


def content_hash(cfg: dict) -> str:
    """Hash of the canonical config plus the bytes of any referenced files."""
    h = hashlib.sha256(canonical_json(cfg).encode())

    def walk(obj):
        if isinstance(obj, dict):
            for key in sorted(obj):
                if key == "file" and isinstance(obj[key], str):
                    try:
                        h.update(open(obj[key], "rb").read())
                    except OSError:
                        h.update(b"<missing>")
                walk(obj[key])
        elif isinstance(obj, (list, tuple)):
            for item in obj:
                walk(item)

    walk(cfg)
    return h.hexdigest()


def write_report(report: dict, out_path: str, csv_path: str = None) -> None:
    with open(out_path, "w") as fh:
        fh.write(canonical_json(report))
    if csv_path:
        rows = report.get("rows", [])
        keys = sorted({k for r in rows if isinstance(r, dict) for k in r})
        with open(csv_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for r in rows:
                if isinstance(r, dict):
                    writer.writerow({k: r.get(k, "") for k in keys})


def _grid_from_cfg(cfg) -> Grid:
    return Grid(
        int(cfg.get("dim", 1)),
        float(cfg.get("halfwidth", 1.0)),
        int(cfg.get("points_per_axis", 256)),
    )


def _lattices(grid: Grid, cfg) -> list:
    max_gen = int(cfg.get("max_generation", int(np.log2(grid.points_per_axis)) - 1))
    return lattice_family(grid, max_gen)


def _normalized_symbols(grid, lattices, nu, count, seed, norm_fn, max_generation=4):
    """Random Haar sums with coefficients scaled by sqrt|Q| <nu>_Q, normalized."""
    rng = np.random.default_rng(seed)
    lat = lattices[0]
    out = []
    skipped = 0
    for _ in range(count):
        def scale(cube):
            return np.sqrt(lat.cell_measure(cube)) * nu.cube_average(lat, cube)

        b = random_haar_sum(lat, rng, scale_fn=scale, max_generation=max_generation)
        norm = norm_fn(b)
        if norm <= 0:
            skipped += 1
            continue
        out.append(GridFunction(grid, b.values / norm))
    return out, skipped


def _dense_neumann_riesz(grid: Grid, j: int) -> np.ndarray:
    return assemble_matrix(riesz("neumann", j, backend="fourier"), grid)


@experiment("two-weight-commutator")
def run_two_weight_commutator(cfg: dict) -> dict:
    """Theorem-level band: ||[b, R_{N,l}]||_{mu->lambda} against ||b||_{BMO_{Delta_N, nu}}."""
    grid = _grid_from_cfg(cfg)
    lattices = _lattices(grid, cfg)
    tg = TimeGrid.geometric(grid)
    p = float(cfg.get("p", 2.0))
    # p = 2 gets the exact SVD; other p are opt-in ascent runs whose norms are
    # certified lower bounds only, and the report says so
    method = "svd" if p == 2.0 else "ascent"
    pairs = cfg.get(
        "weight_pairs",
        [
            {"mu": {"kind": "one"}, "lambda": {"kind": "one"}},
            {"mu": {"kind": "one-sided-power", "alpha": 0.5}, "lambda": {"kind": "one"}},
            {"mu": {"kind": "power", "alpha": 0.25}, "lambda": {"kind": "one-sided-power", "alpha": 0.5}},
        ],
    )
    count = int(cfg.get("symbols", 50))
    seed = int(cfg.get("seed", 0))
    band_cap = float(cfg.get("band_cap", 50.0))
    half_space = bool(cfg.get("half_space", False))

    matrices = [_dense_neumann_riesz(grid, j + 1) for j in range(grid.dim)]
    if half_space:
        # half-space variant: everything restricted to the upper half-space
        half = grid.points_per_axis // 2
        npts = int(np.prod(grid.shape))
        upper_idx = np.nonzero(grid.points().reshape(-1, grid.dim)[:, -1] > 0)[0]
        matrices = [M[np.ix_(upper_idx, upper_idx)] for M in matrices]

    rows = []
    bands = []
    for pair in pairs:
        mu = weight_from_spec(pair["mu"], grid)
        lam = weight_from_spec(pair["lambda"], grid)
        triple = WeightTriple(mu, lam, p)
        nu = triple.nu

        def bmo_nu(b):
            return bmo_mod.bmo_deltaN_norm(b, nu, lattices, tg=tg)

        symbols, skipped = _normalized_symbols(grid, lattices, nu, count, seed, bmo_nu)
        # symbols carry unit BMO norm, so the measured norm is the ratio itself
        ratios = []
        for b in symbols:
            total = 0.0
            for M in matrices:
                if half_space:
                    bv = restrict(b, "upper").values.reshape(-1)
                    muv = restrict(mu.values, "upper").values.reshape(-1)
                    lamv = restrict(lam.values, "upper").values.reshape(-1)
                    Mb = bv[:, None] * M - M * bv[None, :]
                    val, _ = weighted_operator_norm(Mb, grid, muv, lamv, p=p, method=method, seed=seed)
                else:
                    bv = b.values.reshape(-1)
                    Mb = bv[:, None] * M - M * bv[None, :]
                    val, _ = weighted_operator_norm(Mb, grid, mu, lam, p=p, method=method, seed=seed)
                total += val
            ratios.append(total)
        lo, hi = (min(ratios), max(ratios)) if ratios else (0.0, 0.0)
        bands.append({"pair": pair, "c": lo, "C": hi, "spread": hi / lo if lo > 0 else None,
                      "skipped_constant_symbols": skipped})
        for i, r in enumerate(ratios):
            rows.append({"pair": canonical_json(pair), "symbol": i, "ratio": r})
    ok = all(b["spread"] is not None and b["spread"] <= band_cap for b in bands)
    return {
        "experiment": "two-weight-commutator",
        "config": cfg,
        "input_hash": content_hash(cfg),
        "norm_method": method,
        "norms_are_lower_bounds": method == "ascent",
        "tolerances": {"band_cap": band_cap},
        "bands": bands,
        "rows": rows,
        "pass": bool(ok),
    }


@experiment("riesz-ap")
def run_riesz_ap_characterization(cfg: dict) -> dict:
    """Co-divergence of ||R_{N,l}||_{L^p_w} and the Neumann A^p characteristic."""
    grid = _grid_from_cfg(cfg)
    lattices = _lattices(grid, cfg)
    p = float(cfg.get("p", 2.0))
    alphas = cfg.get("alphas", [0.2, 0.5, 0.8, 0.9, 0.95])
    M = _dense_neumann_riesz(grid, grid.dim)
    rows = []
    for alpha in alphas:
        w = weight_from_spec({"kind": "power", "alpha": alpha}, grid)
        apn = ap_deltaN_constant(w, p, lattices)
        val, _ = weighted_operator_norm(M, grid, w, w, p=2.0, method="svd")
        rows.append(
            {
                "alpha": alpha,
                "ap_deltaN": apn,
                "riesz_norm": val,
                "ap_per_lattice": ap_constant_per_lattice(w, p, lattices),
            }
        )
    mono_ap = all(rows[i]["ap_deltaN"] <= rows[i + 1]["ap_deltaN"] * (1 + 1e-9) for i in range(len(rows) - 1))
    mono_norm = all(rows[i]["riesz_norm"] <= rows[i + 1]["riesz_norm"] * (1 + 1e-9) for i in range(len(rows) - 1))

    # contrast: the one-sided power weight is Neumann-admissible while its
    # classical quotient on growing boxes diverges; the box scan runs on a wide
    # grid so the boxes sit past the crossover scale of the two power terms
    w_os = weight_from_spec({"kind": "one-sided-power", "alpha": 0.5}, grid)
    wide = Grid(grid.dim, 64.0, 4096 if grid.dim == 1 else 64)
    w_os_wide = weight_from_spec({"kind": "one-sided-power", "alpha": 0.5}, wide)
    boxes = [8.0, 16.0, 32.0, 64.0]
    quotients = [ap_quotient_on_box(w_os_wide, p, [-a] * wide.dim, [a] * wide.dim) for a in boxes]
    ap_os = ap_deltaN_constant(w_os, p, lattices)
    norm_os, _ = weighted_operator_norm(M, grid, w_os, w_os, p=2.0, method="svd")
    contrast = {
        "boxes": boxes,
        "classical_quotients": quotients,
        "quotient_growth": quotients[-1] / quotients[0],
        "ap_deltaN": ap_os,
        "riesz_norm": norm_os,
    }
    ok = mono_ap and mono_norm and quotients[-1] > quotients[0]
    return {
        "experiment": "riesz-ap",
        "config": cfg,
        "input_hash": content_hash(cfg),
        "tolerances": {"monotone_slack": 1e-9},
        "rows": rows,
        "contrast": contrast,
        "pass": bool(ok),
    }


@experiment("dirichlet-counterexample")
def run_dirichlet_counterexample(cfg: dict) -> dict:
    """b0 = log x_n: bounded half-space BMO and commutator norm, exploding odd-extension BMO."""
    # refinement factors of 4 keep floor(N/3) odd, so the finest shifted cube
    # straddles the interface at every size and the log divergence is sampled
    # cleanly; growth is normalized per doubling
    Ns = cfg.get("refinements", [64, 256, 1024])
    L = float(cfg.get("halfwidth", 1.0))
    growth_floor = float(cfg.get("growth_floor", 0.5))
    comm_cap = float(cfg.get("commutator_variation_cap", 2.0))
    rows = []
    for N in Ns:
        grid = Grid(1, L, N)
        lattices = lattice_family(grid, int(np.log2(N)) - 1)
        gu = grid.with_domain("upper")
        x = gu.axis_coords(0)
        b0 = GridFunction(gu, np.log(x))
        half_norm = bmo_mod.bmo_norm(b0, None, "unweighted-half", lattices)
        odd_norm = bmo_mod.bmo_norm(b0, None, "odd-ext-half", lattices)
        ones_half = Weight(GridFunction(gu, np.ones(gu.shape)))
        even_norm = bmo_mod.bmo_norm(b0, ones_half, "even-ext-half", lattices)
        M = assemble_matrix(riesz("dirichlet", 1, backend="fourier"), gu)
        bv = b0.values.reshape(-1)
        Mb = bv[:, None] * M - M * bv[None, :]
        val, _ = weighted_operator_norm(Mb, gu, None, None, p=2.0, method="svd")
        rows.append(
            {
                "N": N,
                "half_bmo": half_norm,
                "odd_extension_bmo": odd_norm,
                "even_extension_bmo": even_norm,
                "commutator_norm": val,
            }
        )
    growths = [
        (rows[i + 1]["odd_extension_bmo"] - rows[i]["odd_extension_bmo"])
        / np.log2(rows[i + 1]["N"] / rows[i]["N"])
        for i in range(len(rows) - 1)
    ]
    comm_vals = [r["commutator_norm"] for r in rows]
    half_vals = [r["half_bmo"] for r in rows]
    even_vals = [r["even_extension_bmo"] for r in rows]
    checks = {
        "odd_growth_per_doubling": growths,
        "odd_growth_ok": all(g >= growth_floor for g in growths),
        "half_bmo_stable": max(half_vals) / min(half_vals) < 1.5,
        "even_extension_stable": max(even_vals) / min(even_vals) < 1.5,
        "commutator_variation": max(comm_vals) / min(comm_vals),
        "commutator_ok": max(comm_vals) / min(comm_vals) < comm_cap,
    }
    # flat control symbol
    gridc = Grid(1, L, Ns[0]).with_domain("upper")
    control = GridFunction(gridc, np.ones(gridc.shape))
    Mc = assemble_matrix(riesz("dirichlet", 1, backend="fourier"), gridc)
    cb = control.values.reshape(-1)
    Mbc = cb[:, None] * Mc - Mc * cb[None, :]
    ctrl_val, _ = weighted_operator_norm(Mbc, gridc, None, None, p=2.0, method="svd")
    checks["constant_control_commutator"] = ctrl_val
    ok = checks["odd_growth_ok"] and checks["half_bmo_stable"] and checks["commutator_ok"]
    return {
        "experiment": "dirichlet-counterexample",
        "config": cfg,
        "input_hash": content_hash(cfg),
        "tolerances": {"growth_floor": growth_floor, "commutator_variation_cap": comm_cap},
        "rows": rows,
        "checks": checks,
        "pass": bool(ok),
    }


@experiment("bmo-coincidence")
def run_bmo_coincidence(cfg: dict) -> dict:
    """Flavor-pair ratio bands: classical vs semigroup vs Haar-Carleson vs Neumann."""
    grid = _grid_from_cfg(cfg)
    lattices = _lattices(grid, cfg)
    dyadic = lattices[0]
    tg = TimeGrid.geometric(grid)
    count = int(cfg.get("symbols", 20))
    seed = int(cfg.get("seed", 0))
    band_cap = float(cfg.get("band_cap", 50.0))
    weights = cfg.get(
        "weights",
        [{"kind": "one"}, {"kind": "power", "alpha": 0.25}, {"kind": "one-sided-power", "alpha": 0.3}],
    )
    rng = np.random.default_rng(seed)
    pair_ratios = {"classical_vs_heat": [], "haar_vs_wr2": [], "neumann_vs_sides": []}
    rows = []
    for wspec in weights:
        w = weight_from_spec(wspec, grid)
        for i in range(count):
            b = random_haar_sum(dyadic, rng, max_generation=4)
            n_cl = bmo_mod.bmo_norm(b, w, "classical-w", lattices)
            if n_cl == 0.0:
                continue
            n_heat = bmo_mod.bmo_norm(b, w, "carleson-heat-free", lattices, tg=tg)
            n_haar = bmo_mod.bmo_norm(b, w, "carleson-haar", dyadic)
            n_wr2 = bmo_mod.bmo_norm(b, w, "classical-wr", lattices, r=2.0)
            n_neu = bmo_mod.bmo_deltaN_norm(b, w, lattices, tg=tg)
            s_p, s_m = bmo_mod.bmo_deltaN_sides(b, w, lattices, tg=tg)
            pair_ratios["classical_vs_heat"].append(n_heat / n_cl)
            pair_ratios["haar_vs_wr2"].append(n_haar / n_wr2)
            pair_ratios["neumann_vs_sides"].append(n_neu / (s_p + s_m))
            rows.append(
                {
                    "weight": canonical_json(wspec),
                    "symbol": i,
                    "classical": n_cl,
                    "heat": n_heat,
                    "haar": n_haar,
                    "wr2": n_wr2,
                    "neumann": n_neu,
                    "sides_sum": s_p + s_m,
                }
            )
    bands = {}
    ok = True
    for name, vals in pair_ratios.items():
        lo, hi = min(vals), max(vals)
        bands[name] = {"c": lo, "C": hi, "spread": hi / lo}
        ok &= hi / lo <= band_cap
    return {
        "experiment": "bmo-coincidence",
        "config": cfg,
        "input_hash": content_hash(cfg),
        "tolerances": {"band_cap": band_cap},
        "bands": bands,
        "rows": rows,
        "pass": bool(ok),
    }


@experiment("john-nirenberg")
def run_john_nirenberg(cfg: dict) -> dict:
    """Thin wrapper over the BMO module's John-Nirenberg report."""
    grid = _grid_from_cfg(cfg)
    lattices = _lattices(grid, cfg)
    dyadic = lattices[0]
    count = int(cfg.get("instances", 200))
    seed = int(cfg.get("seed", 0))
    p = float(cfg.get("p", 2.0))
    r = float(cfg.get("r", 2.0))
    rng = np.random.default_rng(seed)
    weights = cfg.get(
        "weights", [{"kind": "one"}, {"kind": "power", "alpha": 0.3}, {"kind": "one-sided-power", "alpha": 0.4}]
    )
    suite = []
    for i in range(count):
        w = weight_from_spec(weights[i % len(weights)], grid)
        b = random_haar_sum(dyadic, rng, max_generation=3)
        suite.append((b, w, p, r))
    rep = bmo_mod.john_nirenberg_report(suite, lattices)
    rhos = [row["rho"] for row in rep["rows"] if "rho" in row]
    return {
        "experiment": "john-nirenberg",
        "config": cfg,
        "input_hash": content_hash(cfg),
        "tolerances": {"rho_floor": 1.0},
        "rows": rep["rows"],
        "fitted_C": rep["fitted_C"],
        "rho_min": min(rhos),
        "rho_max": max(rhos),
        "pass": bool(min(rhos) >= 1.0 - 1e-12),
    }


def run(name: str, cfg: dict) -> dict:
    if name not in EXPERIMENTS:
        raise ParameterError(f"unknown experiment {name!r}; have {sorted(EXPERIMENTS)}")
    t0 = time.perf_counter()
    report = EXPERIMENTS[name](cfg)
    report.setdefault("schema_version", 1)
    # wall-clock stays in the log so identical config + seed reproduces the
    # report file byte for byte
    log.info("experiment %s finished in %.2fs", name, time.perf_counter() - t0)
    return report
