"""Climate lattice: synthetic generation, CSV ingestion, hourly resampling.

Every cell of the lattice carries a time-ordered sequence of climate
vectors (wind speed m/s, cloud-cover fraction, temperature degC). Vectors
are constant over their cell: agents sharing a cell read identical values.
"""

import csv
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta

import numpy as np

from .errors import DataQualityError, InvalidArgumentError, SchemaError

# Deterministic seasonal/diurnal templates for the synthetic generator.
TEMP_MEAN = 12.0        # degC
TEMP_ANNUAL_AMP = 9.0   # warmest around day 200 (mid July)
TEMP_DAILY_AMP = 4.0    # warmest around 15:00
TEMP_NOISE = 3.0
WIND_MEAN = 7.0         # m/s, peaks around day 60 (early March)
WIND_ANNUAL_AMP = 2.5
WIND_NOISE = 2.2
CLOUD_MEAN = 0.55
CLOUD_NOISE = 0.25
AR_COEFF_PER_HOUR = 0.92  # temporal persistence of the noise fields

CSV_COLUMNS = ("timestamp", "wind_speed_ms", "cloud_okta", "cloud_frac", "temp_c")


@dataclass(frozen=True)
class ClimateVector:
    wind_speed: float   # m/s, >= 0
    cloudiness: float   # fraction of covered sky in [0, 1]
    temperature: float  # degC

    def __post_init__(self):
        if not (self.wind_speed >= 0.0):
            raise InvalidArgumentError(f"wind_speed must be >= 0, got {self.wind_speed}")
        if not (0.0 <= self.cloudiness <= 1.0):
            raise InvalidArgumentError(f"cloudiness must lie in [0,1], got {self.cloudiness}")
        if not math.isfinite(self.temperature):
            raise InvalidArgumentError("temperature must be finite")


@dataclass(frozen=True)
class ClimateGrid:
    """Lattice of climate series; arrays are (samples, height, width)."""

    width: int
    height: int
    start: datetime
    interval_hours: int
    latitude: float
    wind: np.ndarray
    cloud: np.ndarray
    temp: np.ndarray

    @property
    def n_samples(self):
        return self.wind.shape[0]

    def times(self):
        base = np.datetime64(self.start, "s")
        return base + np.arange(self.n_samples) * np.timedelta64(self.interval_hours * 3600, "s")

    def check_cell(self, cell):
        x, y = cell
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise InvalidArgumentError(f"cell {cell} outside {self.width}x{self.height} lattice")
        return int(x), int(y)

    def vector_at(self, cell, k):
        x, y = self.check_cell(cell)
        return ClimateVector(
            wind_speed=float(self.wind[k, y, x]),
            cloudiness=float(self.cloud[k, y, x]),
            temperature=float(self.temp[k, y, x]),
        )

    def cell_values(self, cell):
        """(wind, cloud, temp) 1-D views for one cell."""
        x, y = self.check_cell(cell)
        return self.wind[:, y, x], self.cloud[:, y, x], self.temp[:, y, x]


def _calendar_components(start, n, interval_hours):
    """Day-of-year (1-based) and hour-of-day for n samples from start."""
    doy = np.empty(n, dtype=np.int64)
    hour = np.empty(n, dtype=np.int64)
    t = start
    step = timedelta(hours=interval_hours)
    for k in range(n):
        doy[k] = t.timetuple().tm_yday
        hour[k] = t.hour
        t = t + step
    return doy, hour


def _smoothing_operator(n, corr_length):
    """Row-normalized Gaussian mixing matrix along one lattice axis.

    Rows have unit L2 norm, so mixing iid unit-variance noise keeps the
    marginal variance at 1 while the inter-cell correlation decays with
    distance at scale ~corr_length. corr_length=inf mixes every row
    identically (all cells see the same realization); corr_length=0 is the
    identity.
    """
    d = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]).astype(np.float64)
    if math.isinf(corr_length):
        k = np.ones((n, n))
    elif corr_length == 0.0:
        k = np.eye(n)
    else:
        k = np.exp(-0.5 * (d / corr_length) ** 2)
    return k / np.sqrt((k * k).sum(axis=1, keepdims=True))


def _correlated_noise(rng, n_samples, height, width, corr_length, ar_coeff):
    white = rng.standard_normal((n_samples, height, width))
    sm_h = _smoothing_operator(height, corr_length)
    sm_w = _smoothing_operator(width, corr_length)
    field = np.einsum("ij,tjw->tiw", sm_h, white)
    field = np.einsum("kw,tiw->tik", sm_w, field)
    out = np.empty_like(field)
    out[0] = field[0]
    c = math.sqrt(1.0 - ar_coeff * ar_coeff)
    for t in range(1, n_samples):
        out[t] = ar_coeff * out[t - 1] + c * field[t]
    return out


def generate_synthetic_climate(width, height, start, duration, interval_hours=3,
                               spatial_corr_length=1.5, rng_seed=0, *,
                               latitude=46.0,
                               temp_mean=TEMP_MEAN, temp_annual_amp=TEMP_ANNUAL_AMP,
                               temp_daily_amp=TEMP_DAILY_AMP, temp_noise=TEMP_NOISE,
                               wind_mean=WIND_MEAN, wind_annual_amp=WIND_ANNUAL_AMP,
                               wind_noise=WIND_NOISE, cloud_mean=CLOUD_MEAN,
                               cloud_noise=CLOUD_NOISE,
                               ar_coeff_per_hour=AR_COEFF_PER_HOUR):
    """Seasonal + diurnal templates plus spatially correlated noise fields.

    `duration` is a timedelta and must be a positive multiple of the
    sampling interval; the same (seed, arguments) always produce the same
    grid. Inter-cell noise correlation decays with lattice distance at
    scale `spatial_corr_length` (cells); infinity makes all cells share one
    noise realization.
    """
    if width < 1 or height < 1:
        raise InvalidArgumentError("lattice dimensions must be >= 1")
    if interval_hours < 1 or 24 % interval_hours != 0:
        raise InvalidArgumentError("interval_hours must be a positive divisor of 24")
    if spatial_corr_length < 0:
        raise InvalidArgumentError("spatial_corr_length must be >= 0")
    total_hours = duration / timedelta(hours=1)
    n = int(round(total_hours / interval_hours))
    if n < 1 or abs(n * interval_hours - total_hours) > 1e-9:
        raise InvalidArgumentError("duration must be a positive multiple of the interval")

    doy, hour = _calendar_components(start, n, interval_hours)
    annual = 2.0 * np.pi * (doy - 1) / 365.25
    daily = 2.0 * np.pi * hour / 24.0

    if not (0.0 <= ar_coeff_per_hour < 1.0):
        raise InvalidArgumentError("ar_coeff_per_hour must lie in [0, 1)")
    rng = np.random.default_rng(rng_seed)
    ar = ar_coeff_per_hour ** interval_hours
    eta_t = _correlated_noise(rng, n, height, width, spatial_corr_length, ar)
    eta_w = _correlated_noise(rng, n, height, width, spatial_corr_length, ar)
    eta_c = _correlated_noise(rng, n, height, width, spatial_corr_length, ar)

    temp_det = (temp_mean
                + temp_annual_amp * np.cos(annual - 2.0 * np.pi * 200.0 / 365.25)
                + temp_daily_amp * np.cos(daily - 2.0 * np.pi * 15.0 / 24.0))
    wind_det = wind_mean + wind_annual_amp * np.cos(annual - 2.0 * np.pi * 60.0 / 365.25)

    temp = temp_det[:, None, None] + temp_noise * eta_t
    wind = np.maximum(0.0, wind_det[:, None, None] + wind_noise * eta_w)
    cloud = np.clip(cloud_mean + cloud_noise * eta_c, 0.0, 1.0)

    return ClimateGrid(width=width, height=height, start=start,
                       interval_hours=interval_hours, latitude=latitude,
                       wind=wind, cloud=cloud, temp=temp)


def resample_hourly(grid):
    """Linear interpolation of all fields onto an hourly clock covering the
    grid's duration; values past the last sample hold constant (at most
    interval-1 trailing hours). Already-hourly grids pass through unchanged."""
    if grid.interval_hours < 1:
        raise InvalidArgumentError("grid interval must be >= 1 hour")
    if grid.n_samples == 0:
        raise InvalidArgumentError("cannot resample an empty grid")
    r = grid.interval_hours
    if r == 1:
        return grid
    n2 = grid.n_samples * r
    k = np.arange(n2)
    idx = k // r
    hi = np.minimum(idx + 1, grid.n_samples - 1)
    frac = ((k % r) / r)[:, None, None]

    def interp(a):
        return (1.0 - frac) * a[idx] + frac * a[hi]

    return replace(grid, interval_hours=1, wind=interp(grid.wind),
                   cloud=np.clip(interp(grid.cloud), 0.0, 1.0),
                   temp=interp(grid.temp))


def _parse_timestamp(text, line):
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataQualityError(f"line {line}: bad timestamp {text!r}: {exc}") from None


def ingest_weather_csv(path, column_map, cell, grid):
    """Replace one cell's series with CSV data.

    Required columns (renameable through column_map): timestamp (ISO-8601),
    wind_speed_ms, temp_c, and either cloud_okta (0-8, divided by 8) or
    cloud_frac. Timestamps must march at the grid interval; runs of at most
    2 missing samples are filled linearly, longer gaps are an error naming
    the missing range. The filled clock must coincide with the grid clock.
    """
    names = {c: c for c in CSV_COLUMNS}
    names.update(column_map or {})
    x, y = grid.check_cell(cell)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for required in ("timestamp", "wind_speed_ms", "temp_c"):
            if names[required] not in header:
                raise SchemaError(f"missing column {names[required]!r} (for {required})")
        has_frac = names["cloud_frac"] in header
        has_okta = names["cloud_okta"] in header
        if not (has_frac or has_okta):
            raise SchemaError(
                f"missing cloud column: neither {names['cloud_frac']!r} nor {names['cloud_okta']!r}"
            )
        rows = []
        for i, row in enumerate(reader, start=2):
            ts = _parse_timestamp(row[names["timestamp"]], i)
            w = float(row[names["wind_speed_ms"]])
            t = float(row[names["temp_c"]])
            if has_frac:
                c = float(row[names["cloud_frac"]])
            else:
                okta = float(row[names["cloud_okta"]])
                if not (0.0 <= okta <= 8.0):
                    raise DataQualityError(f"line {i}: okta value {okta} outside [0, 8]")
                c = okta / 8.0
            ClimateVector(wind_speed=w, cloudiness=c, temperature=t)  # unit checks
            rows.append((ts, w, c, t))

    if not rows:
        raise DataQualityError(f"{path}: no data rows")
    rows.sort(key=lambda r: r[0])
    step = timedelta(hours=grid.interval_hours)
    t0 = rows[0][0]
    series = {}
    for ts, w, c, t in rows:
        offset = (ts - t0) / step
        k = int(round(offset))
        if abs(offset - k) > 1e-9:
            raise DataQualityError(f"timestamp {ts.isoformat()} off the {step} clock")
        if k in series:
            raise DataQualityError(f"duplicate timestamp {ts.isoformat()}")
        series[k] = (w, c, t)

    n = max(series) + 1
    filled = np.full((n, 3), np.nan)
    for k, vals in series.items():
        filled[k] = vals
    missing = np.flatnonzero(np.isnan(filled[:, 0]))
    if missing.size:
        runs = np.split(missing, np.flatnonzero(np.diff(missing) > 1) + 1)
        for run in runs:
            if len(run) > 2:
                first = (t0 + int(run[0]) * step).isoformat()
                last = (t0 + int(run[-1]) * step).isoformat()
                raise DataQualityError(
                    f"gap of {len(run)} samples from {first} to {last} exceeds 2"
                )
            lo, hi = int(run[0]) - 1, int(run[-1]) + 1
            for j, k in enumerate(run, start=1):
                f = j / (hi - lo)
                filled[k] = (1 - f) * filled[lo] + f * filled[hi]

    if t0 != grid.start or n != grid.n_samples:
        raise DataQualityError(
            f"CSV clock ({t0.isoformat()}, {n} samples) does not match grid clock "
            f"({grid.start.isoformat()}, {grid.n_samples} samples)"
        )

    wind = grid.wind.copy()
    cloud = grid.cloud.copy()
    temp = grid.temp.copy()
    wind[:, y, x] = filled[:, 0]
    cloud[:, y, x] = filled[:, 1]
    temp[:, y, x] = filled[:, 2]
    return replace(grid, wind=wind, cloud=cloud, temp=temp)
