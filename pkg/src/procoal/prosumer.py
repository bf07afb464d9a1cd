"""Prosumer models: generators, consumption, and pool simulation.

An agent's available power is its production (wind turbines and PV panels
driven by the cell's climate vector) minus its consumption (daily template
with morning/evening peaks, temperature-driven heating, multiplicative
noise). `simulate_pool` evaluates a whole pool on the grid clock through
the batched kernel.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .climate import _calendar_components
from .errors import InvalidArgumentError
from .timeseries import TimeSeries

SOLAR_CONSTANT = 1000.0  # W/m^2 at full elevation under a clear sky
CLOUD_DEGRADATION_EXPONENT = 3.4

# Relative consumption by hour of day: night trough at hours 1-5, morning
# peak 7-9, evening peak 18-21. Peak hours are additionally scaled by the
# per-agent gain factors.
DAILY_PROFILE = (
    0.55, 0.40, 0.38, 0.36, 0.38, 0.45, 0.70, 1.00, 1.05, 0.95, 0.85, 0.80,
    0.85, 0.80, 0.75, 0.80, 0.90, 1.05, 1.20, 1.25, 1.20, 1.05, 0.85, 0.65,
)
MORNING_PEAK_HOURS = (7, 8, 9)
EVENING_PEAK_HOURS = (18, 19, 20, 21)


@dataclass(frozen=True)
class TurbineParams:
    cut_in: float        # m/s
    rated_speed: float   # m/s
    cut_out: float       # m/s
    rated_power: float   # W

    def __post_init__(self):
        if not (0.0 < self.cut_in < self.rated_speed < self.cut_out):
            raise InvalidArgumentError(
                f"need 0 < cut_in < rated_speed < cut_out, got "
                f"({self.cut_in}, {self.rated_speed}, {self.cut_out})"
            )
        if not (self.rated_power > 0.0):
            raise InvalidArgumentError("rated_power must be > 0")


@dataclass(frozen=True)
class PVParams:
    panel_area: float    # m^2 per panel
    efficiency: float    # fraction in (0, 1]
    degradation_exponent: float = CLOUD_DEGRADATION_EXPONENT

    def __post_init__(self):
        if not (self.panel_area > 0.0):
            raise InvalidArgumentError("panel_area must be > 0")
        if not (0.0 < self.efficiency <= 1.0):
            raise InvalidArgumentError("efficiency must lie in (0, 1]")
        if not (self.degradation_exponent >= 0.0):
            raise InvalidArgumentError("degradation_exponent must be >= 0")


@dataclass(frozen=True)
class ProsumerConfig:
    id: str
    cell: tuple = (0, 0)
    n_turbines: int = 0
    turbine: TurbineParams = None
    n_pv: int = 0
    pv: PVParams = None
    base_load: float = 600.0            # W
    morning_peak_gain: float = 1.3
    evening_peak_gain: float = 1.45
    comfort_temperature: float = 19.0   # degC
    heating_gain: float = 60.0          # W per degC below comfort
    noise_level: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_turbines < 0 or self.n_pv < 0:
            raise InvalidArgumentError("generator counts must be >= 0")
        if self.n_turbines > 0 and self.turbine is None:
            raise InvalidArgumentError(f"agent {self.id}: turbines without TurbineParams")
        if self.n_pv > 0 and self.pv is None:
            raise InvalidArgumentError(f"agent {self.id}: PV without PVParams")
        if self.base_load < 0 or self.heating_gain < 0 or self.noise_level < 0:
            raise InvalidArgumentError("base_load, heating_gain, noise_level must be >= 0")
        if self.morning_peak_gain < 0 or self.evening_peak_gain < 0:
            raise InvalidArgumentError("peak gains must be >= 0")
        if self.n_turbines == 0 and self.n_pv == 0 and self.base_load == 0:
            raise InvalidArgumentError(f"agent {self.id} has no generators and no load")


def wind_power(wind_speed, params):
    """Piecewise turbine curve: zero outside [cut_in, cut_out], cubic ramp up
    to rated_speed, flat at rated_power beyond."""
    if wind_speed < 0:
        raise InvalidArgumentError("wind_speed must be >= 0")
    if wind_speed < params.cut_in or wind_speed > params.cut_out:
        return 0.0
    if wind_speed <= params.rated_speed:
        ci3 = params.cut_in ** 3
        return params.rated_power * (wind_speed ** 3 - ci3) / (params.rated_speed ** 3 - ci3)
    return params.rated_power


def _declination_rad(doy):
    return math.radians(23.44) * math.sin(2.0 * math.pi * (284 + doy) / 365.0)


def _sin_elevation(doy, hour, latitude):
    decl = _declination_rad(doy)
    lat = math.radians(latitude)
    omega = math.radians(15.0 * (hour - 12.0))
    return math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(omega)


def clear_sky_irradiance(time, latitude):
    """Clear-sky horizontal irradiance from solar-declination geometry; zero
    whenever the sun sits at or below the horizon. `time` is local solar time."""
    if abs(latitude) > 90.0:
        raise InvalidArgumentError("latitude must lie in [-90, 90]")
    doy = time.timetuple().tm_yday
    hour = time.hour + time.minute / 60.0 + time.second / 3600.0
    s = _sin_elevation(doy, hour, latitude)
    return SOLAR_CONSTANT * s if s > 0.0 else 0.0


def _irradiance_series(start, n, latitude):
    doy, hour = _calendar_components(start, n, 1)
    decl = np.radians(23.44) * np.sin(2.0 * np.pi * (284 + doy) / 365.0)
    lat = math.radians(latitude)
    omega = np.radians(15.0 * (hour - 12.0))
    s = math.sin(lat) * np.sin(decl) + math.cos(lat) * np.cos(decl) * np.cos(omega)
    return np.where(s > 0.0, SOLAR_CONSTANT * s, 0.0), hour


def pv_power(irradiance, cloudiness, params):
    """PV output for one panel under partial cloud cover."""
    if irradiance < 0:
        raise InvalidArgumentError("irradiance must be >= 0")
    if not (0.0 <= cloudiness <= 1.0):
        raise InvalidArgumentError("cloudiness must lie in [0, 1]")
    factor = 1.0 - 0.75 * cloudiness ** params.degradation_exponent
    return irradiance * factor * params.panel_area * params.efficiency


def hourly_load_profile(cfg):
    """24-value consumption template in watts, peak gains applied."""
    prof = np.array(DAILY_PROFILE)
    for h in MORNING_PEAK_HOURS:
        prof[h] *= cfg.morning_peak_gain
    for h in EVENING_PEAK_HOURS:
        prof[h] *= cfg.evening_peak_gain
    return cfg.base_load * prof


def consumption(time, temperature, cfg, rng):
    """Template load plus heating below comfort temperature, scaled by one
    multiplicative noise draw from rng (uniform in 1 +- noise_level)."""
    base = hourly_load_profile(cfg)[time.hour]
    heat = cfg.heating_gain * max(0.0, cfg.comfort_temperature - temperature)
    factor = rng.uniform(1.0 - cfg.noise_level, 1.0 + cfg.noise_level)
    return (base + heat) * factor


def available_power(cfg, climate, time, rng, latitude=46.0):
    """Instantaneous production minus consumption for one agent."""
    wp = cfg.n_turbines * wind_power(climate.wind_speed, cfg.turbine) if cfg.n_turbines else 0.0
    pv = 0.0
    if cfg.n_pv:
        irr = clear_sky_irradiance(time, latitude)
        pv = cfg.n_pv * pv_power(irr, climate.cloudiness, cfg.pv)
    return wp + pv - consumption(time, climate.temperature, cfg, rng)


def _noise_factors(cfg, n):
    rng = np.random.default_rng(cfg.rng_seed)
    return rng.uniform(1.0 - cfg.noise_level, 1.0 + cfg.noise_level, n)


def simulate_pool(pool, grid):
    """Hourly available-power series for every agent in the pool.

    The grid must already be on the hourly clock. Agents in one cell read
    identical climate values; their noise streams come from their own
    rng_seed, so results do not depend on evaluation order.
    """
    if grid.interval_hours != 1:
        raise InvalidArgumentError("simulate_pool needs an hourly grid; call resample_hourly first")
    if not pool:
        raise InvalidArgumentError("pool must contain at least one agent")
    seen = set()
    for cfg in pool:
        if cfg.id in seen:
            raise InvalidArgumentError(f"duplicate agent id {cfg.id!r}")
        seen.add(cfg.id)
        grid.check_cell(cfg.cell)

    n = len(pool)
    t = grid.n_samples
    c = grid.width * grid.height
    wind = grid.wind.reshape(t, c)
    cloud = grid.cloud.reshape(t, c)
    temp = grid.temp.reshape(t, c)
    irr, hour = _irradiance_series(grid.start, t, grid.latitude)

    cell = np.array([cfg.cell[1] * grid.width + cfg.cell[0] for cfg in pool], dtype=np.int64)
    n_turb = np.array([cfg.n_turbines for cfg in pool], dtype=np.float64)
    dummy_t = TurbineParams(1.0, 2.0, 3.0, 1.0)
    dummy_p = PVParams(1.0, 1.0)
    cut_in = np.array([(cfg.turbine or dummy_t).cut_in for cfg in pool])
    rated = np.array([(cfg.turbine or dummy_t).rated_speed for cfg in pool])
    cut_out = np.array([(cfg.turbine or dummy_t).cut_out for cfg in pool])
    rated_pw = np.array([(cfg.turbine or dummy_t).rated_power for cfg in pool])
    n_pv = np.array([cfg.n_pv for cfg in pool], dtype=np.float64)
    area = np.array([(cfg.pv or dummy_p).panel_area for cfg in pool])
    eff = np.array([(cfg.pv or dummy_p).efficiency for cfg in pool])
    dexp = np.array([(cfg.pv or dummy_p).degradation_exponent for cfg in pool])
    profile = np.stack([hourly_load_profile(cfg) for cfg in pool])
    comfort = np.array([cfg.comfort_temperature for cfg in pool])
    heat_gain = np.array([cfg.heating_gain for cfg in pool])
    noise = np.stack([_noise_factors(cfg, t) for cfg in pool])

    values = kernels.available_power_matrix(
        wind, cloud, temp, irr, hour, cell, n_turb, cut_in, rated, cut_out,
        rated_pw, n_pv, area, eff, dexp, profile, comfort, heat_gain, noise)
    return {cfg.id: TimeSeries(cfg.id, grid.start, values[i]) for i, cfg in enumerate(pool)}


# Default parameter ranges for randomly generated pools. The source data
# behind published pools is not available, so these are assumptions:
# residential-scale turbines and rooftop PV counts, sub-kW base loads.
DEFAULT_POOL_RANGES = {
    "n_turbines": (0, 2),
    "cut_in": (2.5, 3.5),
    "rated_speed": (10.0, 13.0),
    "cut_out": (22.0, 28.0),
    "rated_power": (6e3, 14e3),
    "n_pv": (0, 24),
    "panel_area": (1.4, 1.8),
    "efficiency": (0.16, 0.22),
    "degradation_exponent": (CLOUD_DEGRADATION_EXPONENT, CLOUD_DEGRADATION_EXPONENT),
    "base_load": (350.0, 900.0),
    "morning_peak_gain": (1.1, 1.6),
    "evening_peak_gain": (1.2, 1.8),
    "comfort_temperature": (18.0, 21.0),
    "heating_gain": (30.0, 80.0),
    "noise_level": (0.05, 0.15),
}


def generate_random_pool(count, grid_width, grid_height, seed, ranges=None):
    """Draw `count` agent configurations with uniform parameters inside the
    given ranges and uniform cells on the lattice. Per-agent noise seeds are
    derived from `seed` so the pool is reproducible as a whole."""
    if count < 1:
        raise InvalidArgumentError("count must be >= 1")
    r = dict(DEFAULT_POOL_RANGES)
    r.update(ranges or {})
    rng = np.random.default_rng(seed)
    agent_seeds = rng.integers(0, 2**63 - 1, size=count)
    width = len(str(max(count - 1, 1)))

    def fint(key):
        lo, hi = r[key]
        return int(rng.integers(int(lo), int(hi) + 1))

    def ffloat(key):
        lo, hi = r[key]
        return float(rng.uniform(lo, hi))

    pool = []
    for i in range(count):
        cell = (int(rng.integers(0, grid_width)), int(rng.integers(0, grid_height)))
        n_turbines = fint("n_turbines")
        cut_in = ffloat("cut_in")
        turbine = TurbineParams(
            cut_in=cut_in,
            rated_speed=max(ffloat("rated_speed"), cut_in + 1.0),
            cut_out=ffloat("cut_out"),
            rated_power=ffloat("rated_power"),
        )
        pv = PVParams(
            panel_area=ffloat("panel_area"),
            efficiency=ffloat("efficiency"),
            degradation_exponent=ffloat("degradation_exponent"),
        )
        pool.append(ProsumerConfig(
            id=f"a{i:0{width}d}",
            cell=cell,
            n_turbines=n_turbines,
            turbine=turbine,
            n_pv=fint("n_pv"),
            pv=pv,
            base_load=ffloat("base_load"),
            morning_peak_gain=ffloat("morning_peak_gain"),
            evening_peak_gain=ffloat("evening_peak_gain"),
            comfort_temperature=ffloat("comfort_temperature"),
            heating_gain=ffloat("heating_gain"),
            noise_level=ffloat("noise_level"),
            rng_seed=int(agent_seeds[i]),
        ))
    return pool
