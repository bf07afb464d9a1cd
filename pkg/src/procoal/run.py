"""Pipeline orchestration behind the CLI subcommands.

Keeps all computation in memory and deterministic: simulation happens once
per config, formation reuses cached pool statistics across sweep points,
and every writer emits sorted rows with repr-formatted floats so identical
configs give byte-identical outputs regardless of parallelism.
"""

import csv
import json
import os
from dataclasses import dataclass
from datetime import timedelta

import numpy as np

from . import climate as climate_mod
from . import coalition as coal
from . import prosumer, timeseries
from .coalition import GridRequirements
from .errors import ConfigError, DataQualityError, InvalidArgumentError, SweepInvariantError

SWEEP_FIELDS = ("phi", "p_min", "n_coal", "algorithm", "realization", "seed",
                "mode", "epsilon_star", "welfare", "acceptance",
                "heldout_reliability", "n_valid", "n_coalitions", "n_unassigned",
                "degraded")
COALITION_FIELDS = ("phi", "p_min", "n_coal", "algorithm", "realization",
                    "coalition", "size", "members", "mu", "sigma", "p_phi",
                    "valid", "utility", "contract")
REPORT_FIELDS = ("phi", "p_min", "n_coal", "algorithm", "realizations",
                 "welfare_mean", "welfare_std", "acceptance_mean",
                 "acceptance_std", "reliability_mean")


@dataclass
class SimulationResult:
    grid: object
    pool: list
    series: dict


@dataclass
class PointResult:
    row: dict
    structure: object


def build_climate(cfg):
    c = cfg.climate
    grid = climate_mod.generate_synthetic_climate(
        c.width, c.height, c.start, timedelta(days=c.days),
        interval_hours=c.interval_hours, spatial_corr_length=c.corr_length,
        rng_seed=cfg.climate_seed(), latitude=c.latitude, **c.overrides)
    for ing in cfg.csv_ingests:
        grid = climate_mod.ingest_weather_csv(ing.path, ing.column_map, ing.cell, grid)
    return climate_mod.resample_hourly(grid)


def _agent_from_dict(d, path):
    try:
        turbine = prosumer.TurbineParams(**d["turbine"]) if d.get("turbine") else None
        pv = prosumer.PVParams(**d["pv"]) if d.get("pv") else None
        cell = d.get("cell", [0, 0])
        return prosumer.ProsumerConfig(
            id=str(d["id"]), cell=(int(cell[0]), int(cell[1])),
            n_turbines=int(d.get("n_turbines", 0)), turbine=turbine,
            n_pv=int(d.get("n_pv", 0)), pv=pv,
            base_load=float(d.get("base_load", 600.0)),
            morning_peak_gain=float(d.get("morning_peak_gain", 1.3)),
            evening_peak_gain=float(d.get("evening_peak_gain", 1.45)),
            comfort_temperature=float(d.get("comfort_temperature", 19.0)),
            heating_gain=float(d.get("heating_gain", 60.0)),
            noise_level=float(d.get("noise_level", 0.1)),
            rng_seed=int(d.get("rng_seed", 0)),
        )
    except (KeyError, TypeError, ValueError, InvalidArgumentError) as exc:
        raise ConfigError(path, str(exc)) from None


def build_pool(cfg, grid):
    if cfg.random_pool:
        return prosumer.generate_random_pool(
            cfg.random_pool.count, grid.width, grid.height,
            seed=cfg.pool_seed(), ranges=cfg.random_pool.ranges)
    return [_agent_from_dict(a, f"pool.agents[{i}]") for i, a in enumerate(cfg.agents)]


def simulate(cfg):
    grid = build_climate(cfg)
    pool = build_pool(cfg, grid)
    for i, agent in enumerate(pool):
        try:
            grid.check_cell(agent.cell)
        except InvalidArgumentError as exc:
            raise ConfigError(f"pool.agents[{i}].cell", str(exc)) from None
    return SimulationResult(grid=grid, pool=pool, series=prosumer.simulate_pool(pool, grid))


def write_simulation(out_dir, cfg, sim):
    os.makedirs(out_dir, exist_ok=True)
    series_path = os.path.join(out_dir, "series.csv")
    timeseries.write_series_csv(series_path, sim.series)
    manifest = {
        "config": cfg.raw,
        "effective_seed": cfg.seed,
        "climate_seed": list(cfg.climate_seed()) if isinstance(cfg.climate_seed(), tuple)
                        else cfg.climate_seed(),
        "pool_seed": list(cfg.pool_seed()) if isinstance(cfg.pool_seed(), tuple)
                     else cfg.pool_seed(),
        "agents": [a.id for a in sim.pool],
        "n_samples": sim.grid.n_samples,
        "start": sim.grid.start.isoformat(),
        "mode": cfg.mode,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return series_path


def load_series(path):
    if os.path.isdir(path):
        path = os.path.join(path, "series.csv")
    if not os.path.exists(path):
        raise DataQualityError(f"series file not found: {path}")
    return timeseries.read_series_csv(path)


def prepare_series(series, cfg):
    """Deseasonalize on the train split; adjust the held-out tail with
    train-fitted seasonal profiles. Returns (train, test) mappings."""
    if not series:
        raise InvalidArgumentError("no series to prepare")
    n = len(next(iter(series.values())))
    n_train = int(cfg.split_fraction * n)
    window = cfg.deseason_window_days
    if n_train >= n:  # split_fraction == 1.0: no held-out tail
        return {sid: timeseries.deseasonalize(ts, window) for sid, ts in series.items()}, {}
    train, test = {}, {}
    for sid, ts in series.items():
        tr, te = timeseries.deseasonalize_with_holdout(ts, n_train, window)
        train[sid] = tr
        test[sid] = te
    return train, test


def _mean_reliability(cs, test):
    if not test:
        return None
    vals = [coal.empirical_reliability(c, test) for c in cs.coalitions if c.valid]
    return float(np.mean(vals)) if vals else None


def _point_result(req, cfg, algorithm, realization, seed, cs, test):
    reliability = _mean_reliability(cs, test)
    row = {
        "phi": repr(req.phi), "p_min": repr(req.p_min), "n_coal": req.n_coal,
        "algorithm": algorithm, "realization": realization, "seed": seed,
        "mode": cfg.mode,
        "epsilon_star": "" if cs.epsilon is None else repr(cs.epsilon),
        "welfare": repr(coal.social_welfare(cs)),
        "acceptance": repr(coal.acceptance_percentage(cs)),
        "heldout_reliability": "" if reliability is None else repr(reliability),
        "n_valid": sum(1 for c in cs.coalitions if c.valid),
        "n_coalitions": len(cs.coalitions),
        "n_unassigned": len(cs.unassigned),
        "degraded": int(cs.truncated),
    }
    return PointResult(row=row, structure=cs)


def _evaluate_groups(groups, train, req, cfg, provenance, **extra):
    coalitions = tuple(coal.evaluate(g, train, req, cfg.mode) for g in groups)
    assigned = set().union(*groups) if groups else set()
    return coal.CoalitionStructure(
        coalitions=coalitions, unassigned=tuple(sorted(set(train) - assigned)),
        requirements=req, provenance=provenance, mode=cfg.mode, **extra)


def run_points(cfg, train, test, requirements):
    """Evaluate every requested algorithm at every parameter point, reusing
    the simulated series, the correlation matrix, per-n_coal threshold
    searches, and the baseline memberships (which never depend on phi or
    p_min)."""
    cache = None
    if cfg.percolation or cfg.correlated:
        cache = coal.FormationCache(train, k_min=cfg.k_min)
    random_blocks = {}      # (n_coal, realization) -> blocks
    correlated_blocks = {}  # n_coal -> groups
    results = []
    for req in requirements:
        if cfg.percolation:
            cs = coal.form_coalitions(train, req, mode=cfg.mode, k_min=cfg.k_min,
                                      cache=cache)
            results.append(_point_result(req, cfg, "percolation", 0, cfg.seed, cs, test))
        for r in range(cfg.random_repeats):
            key = (req.n_coal, r)
            if key not in random_blocks:
                random_blocks[key] = coal.random_groups(train, req.n_coal,
                                                        cfg.realization_seed(r))
            cs = _evaluate_groups(random_blocks[key], train, req, cfg, "random")
            results.append(_point_result(req, cfg, "random", r,
                                         cfg.realization_seed(r), cs, test))
        if cfg.correlated:
            if req.n_coal not in correlated_blocks:
                correlated_blocks[req.n_coal] = coal.correlated_groups(cache.corr,
                                                                       req.n_coal)
            cs = _evaluate_groups(correlated_blocks[req.n_coal], train, req, cfg,
                                  "correlated", degenerate=tuple(cache.degenerate))
            results.append(_point_result(req, cfg, "correlated", 0, cfg.seed, cs, test))
    return results


def _check_acceptance_monotone(rows):
    """Raising p_min can only invalidate coalitions, so per (phi, n_coal,
    algorithm, realization) the acceptance must be non-increasing."""
    groups = {}
    for row in rows:
        key = (row["phi"], row["n_coal"], row["algorithm"], row["realization"])
        groups.setdefault(key, []).append((float(row["p_min"]), float(row["acceptance"])))
    for key, pts in groups.items():
        pts.sort()
        for (p1, a1), (p2, a2) in zip(pts, pts[1:]):
            if p2 > p1 and a2 > a1 + 1e-12:
                raise SweepInvariantError(
                    f"acceptance rose from {a1} to {a2} as p_min rose from {p1} "
                    f"to {p2} for {key}")


def form_run(cfg, series):
    """Single-point formation; requires scalar requirement lists."""
    for name, values in (("phi", cfg.phi), ("p_min", cfg.p_min), ("n_coal", cfg.n_coal)):
        if len(values) != 1:
            raise ConfigError(f"requirements.{name}",
                              "form runs a single point; use sweep for lists")
    train, test = prepare_series(series, cfg)
    req = GridRequirements(phi=cfg.phi[0], p_min=cfg.p_min[0], n_coal=cfg.n_coal[0])
    return run_points(cfg, train, test, [req])


def sweep_run(cfg, series):
    """Cartesian product over (phi x p_min x n_coal); series are prepared
    once and never re-simulated."""
    train, test = prepare_series(series, cfg)
    requirements = [
        GridRequirements(phi=phi, p_min=p_min, n_coal=n_coal)
        for phi in cfg.phi for p_min in cfg.p_min for n_coal in cfg.n_coal
    ]
    results = run_points(cfg, train, test, requirements)
    _check_acceptance_monotone([r.row for r in results])
    return results


def coalition_rows(results):
    rows = []
    for res in results:
        meta = res.row
        for idx, c in enumerate(res.structure.coalitions):
            rows.append({
                "phi": meta["phi"], "p_min": meta["p_min"], "n_coal": meta["n_coal"],
                "algorithm": meta["algorithm"], "realization": meta["realization"],
                "coalition": idx, "size": c.size, "members": "|".join(c.members),
                "mu": repr(c.mu), "sigma": repr(c.sigma), "p_phi": repr(c.p_phi),
                "valid": int(c.valid), "utility": repr(c.utility),
                "contract": "" if c.contract is None else repr(c.contract),
            })
    return rows


def _write_csv(path, fieldnames, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def write_form(out_dir, cfg, results):
    os.makedirs(out_dir, exist_ok=True)
    entries = [{"meta": res.row, "structure": coal.structure_to_dict(res.structure)}
               for res in results]
    coal.write_structures_json(os.path.join(out_dir, "structures.json"), entries)
    _write_csv(os.path.join(out_dir, "summary.csv"), COALITION_FIELDS,
               coalition_rows(results))
    return out_dir


def _group_stats(rows, value_key):
    groups = {}
    for row in rows:
        key = (row["phi"], row["p_min"], row["n_coal"], row["algorithm"])
        groups.setdefault(key, []).append(float(row[value_key]))
    return groups


def write_sweep(out_dir, cfg, results):
    os.makedirs(out_dir, exist_ok=True)
    rows = [res.row for res in results]
    _write_csv(os.path.join(out_dir, "sweep.csv"), SWEEP_FIELDS, rows)
    _write_csv(os.path.join(out_dir, "sweep_coalitions.csv"), COALITION_FIELDS,
               coalition_rows(results))

    welfare = _group_stats(rows, "welfare")
    acceptance = _group_stats(rows, "acceptance")
    pivot_w = []
    pivot_a = []
    for key in sorted(welfare, key=lambda k: (float(k[0]), float(k[1]), k[2], k[3])):
        phi, p_min, n_coal, algorithm = key
        w = welfare[key]
        a = acceptance[key]
        pivot_w.append({
            "phi": phi, "p_min": p_min, "algorithm": algorithm, "n_coal": n_coal,
            "welfare_mean": repr(float(np.mean(w))),
            "welfare_std": repr(float(np.std(w))),
        })
        pivot_a.append({
            "phi": phi, "n_coal": n_coal, "algorithm": algorithm, "p_min": p_min,
            "p_min_display": repr(float(p_min) / cfg.display_scale),
            "acceptance_mean": repr(float(np.mean(a))),
            "acceptance_std": repr(float(np.std(a))),
        })
    _write_csv(os.path.join(out_dir, "pivot_welfare_vs_ncoal.csv"),
               ("phi", "p_min", "algorithm", "n_coal", "welfare_mean", "welfare_std"),
               pivot_w)
    _write_csv(os.path.join(out_dir, "pivot_acceptance_vs_pmin.csv"),
               ("phi", "n_coal", "algorithm", "p_min", "p_min_display",
                "acceptance_mean", "acceptance_std"),
               pivot_a)
    with open(os.path.join(out_dir, "sweep_manifest.json"), "w") as fh:
        json.dump({"config": cfg.raw, "effective_seed": cfg.seed, "mode": cfg.mode},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def report_run(paths):
    """Aggregate one or more sweep.csv files: mean/std per parameter point
    and algorithm across realizations."""
    rows = []
    modes = set()
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in ("phi", "p_min", "n_coal", "algorithm", "welfare",
                                   "acceptance", "mode") if c not in (reader.fieldnames or [])]
            if missing:
                raise DataQualityError(f"{path}: not a sweep file (missing {missing})")
            for row in reader:
                modes.add(row["mode"])
                rows.append(row)
    if len(modes) > 1:
        raise DataQualityError(f"cannot aggregate sweeps with mixed modes: {sorted(modes)}")
    if not rows:
        raise DataQualityError("no rows to aggregate")

    groups = {}
    for row in rows:
        key = (row["phi"], row["p_min"], row["n_coal"], row["algorithm"])
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=lambda k: (float(k[0]), float(k[1]), int(k[2]), k[3])):
        phi, p_min, n_coal, algorithm = key
        g = groups[key]
        w = np.array([float(r["welfare"]) for r in g])
        a = np.array([float(r["acceptance"]) for r in g])
        rel = [float(r["heldout_reliability"]) for r in g if r.get("heldout_reliability")]
        out.append({
            "phi": phi, "p_min": p_min, "n_coal": n_coal, "algorithm": algorithm,
            "realizations": len(g),
            "welfare_mean": repr(float(w.mean())), "welfare_std": repr(float(w.std())),
            "acceptance_mean": repr(float(a.mean())),
            "acceptance_std": repr(float(a.std())),
            "reliability_mean": repr(float(np.mean(rel))) if rel else "",
        })
    return out


def write_report(out_dir, rows):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "report.csv")
    _write_csv(path, REPORT_FIELDS, rows)
    return path
