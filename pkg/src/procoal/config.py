"""Run configuration: JSON schema, validation, seed derivation.

Validation errors carry the dotted path of the offending field so CLI
users can find it. Seeds for the climate generator, the pool generator,
and each random-partition realization all derive from the master seed
unless given explicitly, which makes whole runs reproducible from one
integer.
"""

import json
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import ConfigError

MODES = ("analytic", "empirical")


@dataclass
class SyntheticClimateConfig:
    width: int
    height: int
    start: datetime
    days: float
    interval_hours: int = 3
    corr_length: float = 1.5
    seed: object = None  # derived from the master seed when None
    latitude: float = 46.0
    overrides: dict = field(default_factory=dict)


@dataclass
class CsvIngestConfig:
    path: str
    cell: tuple
    column_map: dict = field(default_factory=dict)


@dataclass
class RandomPoolConfig:
    count: int
    seed: object = None
    ranges: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    seed: int
    climate: SyntheticClimateConfig
    csv_ingests: list
    agents: list          # explicit agent dicts; empty when random_pool is used
    random_pool: RandomPoolConfig
    phi: list
    p_min: list
    n_coal: list
    percolation: bool
    random_repeats: int
    correlated: bool
    mode: str = "analytic"
    split_fraction: float = 0.8
    deseason_window_days: int = 30
    k_min: int = 3
    out_dir: str = "out"
    display_scale: float = 1.0  # divide reported power columns for readability
    raw: dict = field(default_factory=dict)

    def climate_seed(self):
        return self.climate.seed if self.climate.seed is not None else (self.seed, 0)

    def pool_seed(self):
        if self.random_pool and self.random_pool.seed is not None:
            return self.random_pool.seed
        return (self.seed, 1)

    def realization_seed(self, realization):
        return int(np.random.SeedSequence((self.seed, 101, realization)).generate_state(1)[0])


def _get(d, key, path, required=True, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    return d[key]


def _number(value, path, lo=None, hi=None, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value!r}")
    if hi is not None and value > hi:
        raise ConfigError(path, f"must be <= {hi}, got {value!r}")
    return int(value) if integer else float(value)


def _number_list(value, path, lo=None, hi=None, integer=False):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of numbers")
    return [_number(v, f"{path}[{i}]", lo, hi, integer) for i, v in enumerate(value)]


def _parse_climate(d):
    if not isinstance(d, dict):
        raise ConfigError("climate", "expected an object")
    syn = _get(d, "synthetic", "climate")
    if not isinstance(syn, dict):
        raise ConfigError("climate.synthetic", "expected an object")
    p = "climate.synthetic"
    start_text = _get(syn, "start", p)
    try:
        start = datetime.fromisoformat(start_text)
    except (TypeError, ValueError):
        raise ConfigError(f"{p}.start", f"not an ISO-8601 timestamp: {start_text!r}") from None
    climate = SyntheticClimateConfig(
        width=_number(_get(syn, "width", p), f"{p}.width", lo=1, integer=True),
        height=_number(_get(syn, "height", p), f"{p}.height", lo=1, integer=True),
        start=start,
        days=_number(_get(syn, "days", p), f"{p}.days", lo=1),
        interval_hours=_number(syn.get("interval_hours", 3), f"{p}.interval_hours",
                               lo=1, hi=24, integer=True),
        corr_length=_number(syn.get("corr_length", 1.5), f"{p}.corr_length", lo=0),
        seed=syn.get("seed"),
        latitude=_number(syn.get("latitude", 46.0), f"{p}.latitude", lo=-90, hi=90),
        overrides=syn.get("overrides", {}),
    )
    ingests = []
    for i, entry in enumerate(d.get("csv", [])):
        q = f"climate.csv[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(q, "expected an object")
        cell = _get(entry, "cell", q)
        if not (isinstance(cell, list) and len(cell) == 2):
            raise ConfigError(f"{q}.cell", "expected [x, y]")
        ingests.append(CsvIngestConfig(
            path=str(_get(entry, "path", q)),
            cell=(int(cell[0]), int(cell[1])),
            column_map=entry.get("column_map", {}),
        ))
    return climate, ingests


def _parse_pool(d):
    if not isinstance(d, dict):
        raise ConfigError("pool", "expected an object")
    agents = d.get("agents")
    random_pool = d.get("random_pool")
    if (agents is None) == (random_pool is None):
        raise ConfigError("pool", "provide exactly one of 'agents' or 'random_pool'")
    if agents is not None:
        if not isinstance(agents, list) or not agents:
            raise ConfigError("pool.agents", "expected a non-empty list")
        return list(agents), None
    if not isinstance(random_pool, dict):
        raise ConfigError("pool.random_pool", "expected an object")
    return [], RandomPoolConfig(
        count=_number(_get(random_pool, "count", "pool.random_pool"),
                      "pool.random_pool.count", lo=1, integer=True),
        seed=random_pool.get("seed"),
        ranges=random_pool.get("ranges", {}),
    )


def parse_config(data, overrides=None):
    """Validate a raw config dict (plus optional CLI overrides) into RunConfig."""
    if not isinstance(data, dict):
        raise ConfigError("", "config root must be a JSON object")
    overrides = overrides or {}

    seed = _number(_get(data, "seed", ""), "seed", integer=True)
    if "seed" in overrides and overrides["seed"] is not None:
        seed = int(overrides["seed"])

    climate, ingests = _parse_climate(_get(data, "climate", ""))
    agents, random_pool = _parse_pool(_get(data, "pool", ""))

    req = _get(data, "requirements", "")
    if not isinstance(req, dict):
        raise ConfigError("requirements", "expected an object")
    phi = _number_list(_get(req, "phi", "requirements"), "requirements.phi", lo=0.0, hi=1.0)
    p_min = _number_list(_get(req, "p_min", "requirements"), "requirements.p_min", lo=0.0)
    n_coal = _number_list(_get(req, "n_coal", "requirements"), "requirements.n_coal",
                          lo=1, integer=True)

    alg = _get(data, "algorithms", "")
    if not isinstance(alg, dict):
        raise ConfigError("algorithms", "expected an object")
    percolation = bool(alg.get("percolation", False))
    correlated = bool(alg.get("correlated", False))
    rnd = alg.get("random")
    if rnd is None or rnd is False:
        random_repeats = 0
    elif rnd is True:
        random_repeats = 1
    elif isinstance(rnd, dict):
        random_repeats = _number(rnd.get("repeats", 1), "algorithms.random.repeats",
                                 lo=1, integer=True)
    else:
        raise ConfigError("algorithms.random", "expected true/false or {'repeats': n}")
    if not (percolation or correlated or random_repeats):
        raise ConfigError("algorithms", "select at least one algorithm")

    mode = str(data.get("mode", "analytic"))
    if "mode" in overrides and overrides["mode"] is not None:
        mode = str(overrides["mode"])
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}, got {mode!r}")
    if mode == "analytic":
        for i, v in enumerate(phi):
            if v in (0.0, 1.0):
                raise ConfigError(f"requirements.phi[{i}]",
                                  "phi=0 or 1 needs mode='empirical'")

    split = _number(data.get("split_fraction", 0.8), "split_fraction", lo=0.5, hi=1.0)
    window = _number(data.get("deseason_window_days", 30), "deseason_window_days",
                     lo=1, integer=True)
    k_min = _number(data.get("k_min", 3), "k_min", lo=2, integer=True)
    out_dir = str(data.get("out_dir", "out"))
    if "out_dir" in overrides and overrides["out_dir"] is not None:
        out_dir = str(overrides["out_dir"])
    display_scale = _number(data.get("display_scale", 1.0), "display_scale", lo=0.0)
    if display_scale == 0.0:
        raise ConfigError("display_scale", "must be > 0")

    return RunConfig(
        seed=seed, climate=climate, csv_ingests=ingests, agents=agents,
        random_pool=random_pool, phi=phi, p_min=p_min, n_coal=n_coal,
        percolation=percolation, random_repeats=random_repeats,
        correlated=correlated, mode=mode, split_fraction=split,
        deseason_window_days=window, k_min=k_min, out_dir=out_dir,
        display_scale=display_scale, raw=data,
    )


def load_config(path, overrides=None):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"config is not valid JSON: {exc}") from None
    return parse_config(data, overrides)
