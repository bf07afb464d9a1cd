"""Series statistics: seasonal removal, Pearson correlations, aggregation.

All statistics use the population convention (divide by n) so `stats` and
`pearson` stay mutually consistent. Seasonal removal subtracts the
hour-of-day-stratified centered moving average but keeps the series level:
coalition contracts are absolute power values, so the mean must survive.
"""

import csv
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from . import kernels
from .errors import (DataQualityError, DegenerateSeriesError,
                     InvalidArgumentError, LengthError)


@dataclass(frozen=True)
class TimeSeries:
    """Hourly watt values for one agent or coalition."""

    series_id: str
    start: datetime
    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidArgumentError("values must be one-dimensional")
        if arr.size and not np.all(np.isfinite(arr)):
            raise InvalidArgumentError(f"series {self.series_id!r} contains non-finite values")
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SeriesStats:
    mean: float
    std_dev: float
    length: int


@dataclass(frozen=True)
class CorrelationMatrix:
    ids: tuple
    rho: np.ndarray

    def index(self, agent_id):
        return self.ids.index(agent_id)

    @property
    def rho_sq(self):
        return self.rho ** 2


def _check_aligned(a, b):
    if len(a) != len(b) or a.start != b.start:
        raise InvalidArgumentError(
            f"series {a.series_id!r} and {b.series_id!r} are not aligned"
        )


def stats(ts):
    """Population mean and standard deviation."""
    if len(ts) < 2:
        raise LengthError("need at least 2 samples for statistics")
    mean, sd = kernels.mean_std(ts.values)
    return SeriesStats(mean=mean, std_dev=sd, length=len(ts))


def pearson(a, b):
    """Pearson correlation coefficient, clamped to [-1, 1]."""
    _check_aligned(a, b)
    if len(a) < 2:
        raise LengthError("need at least 2 samples for correlation")
    da = a.values - a.values.mean()
    db = b.values - b.values.mean()
    sa = np.sqrt((da * da).mean())
    sb = np.sqrt((db * db).mean())
    degenerate = [ts.series_id for ts, s in ((a, sa), (b, sb)) if s == 0.0]
    if degenerate:
        raise DegenerateSeriesError(degenerate)
    r = (da * db).mean() / (sa * sb)
    return float(min(1.0, max(-1.0, r)))


def partition_degenerate(series):
    """Split agent ids into (usable, zero-variance) lists, both sorted."""
    ok, bad = [], []
    for sid in sorted(series):
        v = series[sid].values
        bad.append(sid) if v.std() == 0.0 else ok.append(sid)
    return ok, bad


def correlation_matrix(series):
    """Pairwise Pearson matrix over sorted agent ids; exactly symmetric with
    a unit diagonal. Zero-variance members raise DegenerateSeriesError."""
    ids = sorted(series)
    if not ids:
        raise InvalidArgumentError("series mapping is empty")
    first = series[ids[0]]
    for sid in ids[1:]:
        _check_aligned(first, series[sid])
    _, bad = partition_degenerate(series)
    if bad:
        raise DegenerateSeriesError(bad)
    if len(ids) == 1:
        return CorrelationMatrix(ids=(ids[0],), rho=np.ones((1, 1)))
    stack = np.stack([series[sid].values for sid in ids])
    rho = np.clip(np.corrcoef(stack), -1.0, 1.0)
    iu = np.triu_indices(len(ids), k=1)
    rho[(iu[1], iu[0])] = rho[iu]  # mirror the upper triangle exactly
    np.fill_diagonal(rho, 1.0)
    return CorrelationMatrix(ids=tuple(ids), rho=rho)


def aggregate(members, series):
    """Pointwise sum of the members' series (summed in sorted-id order)."""
    ordered = sorted(members)
    if not ordered:
        raise InvalidArgumentError("cannot aggregate an empty member set")
    missing = [m for m in ordered if m not in series]
    if missing:
        raise InvalidArgumentError(f"missing series for members: {missing}")
    base = series[ordered[0]]
    total = base.values.copy()
    for sid in ordered[1:]:
        _check_aligned(base, series[sid])
        total += series[sid].values
    return TimeSeries("+".join(ordered), base.start, total)


def deseasonalize(ts, window_days=30):
    """Remove daily and annual cycles while keeping the series level.

    Per hour-of-day, a centered moving average over `window_days` days
    (shrunken one-sided windows at the edges) estimates the seasonal path;
    its zero-mean anomaly is subtracted, so the output keeps the input's
    population mean exactly and each hour-of-day residual centers near it.
    """
    if window_days < 1:
        raise InvalidArgumentError("window_days must be >= 1")
    if len(ts) < 2 * window_days * 24:
        raise LengthError(
            f"series of {len(ts)} samples is shorter than 2*{window_days}*24"
        )
    ma = kernels.hourly_moving_average(ts.values, window_days)
    return TimeSeries(ts.series_id, ts.start, ts.values - ma + ma.mean())


def _tail_seasonal_profile(values, start_hour, window_days):
    """Per-hour-of-day mean of the last `window_days` days: the seasonal
    estimate a centered window would produce just past the series end."""
    profile = np.empty(24)
    for h in range(24):
        offset = (h - start_hour) % 24
        sub = values[offset::24]
        profile[h] = sub[-window_days:].mean()
    return profile


def deseasonalize_with_holdout(ts, n_train, window_days=30):
    """Deseasonalize the first n_train samples on their own statistics, then
    adjust the tail with the train-fitted seasonal profile (no look-ahead).
    Returns (train, tail) series; the tail is empty-free by construction."""
    if not (2 * window_days * 24 <= n_train < len(ts)):
        raise LengthError(
            f"n_train={n_train} must lie in [2*window_days*24, len(series))"
        )
    head = ts.values[:n_train]
    ma = kernels.hourly_moving_average(np.ascontiguousarray(head), window_days)
    level = ma.mean()
    train = TimeSeries(ts.series_id, ts.start, head - ma + level)
    profile = _tail_seasonal_profile(head, ts.start.hour, window_days)
    hours = (ts.start.hour + n_train + np.arange(len(ts) - n_train)) % 24
    tail_vals = ts.values[n_train:] - profile[hours] + level
    tail = TimeSeries(ts.series_id, ts.start + timedelta(hours=n_train), tail_vals)
    return train, tail


def write_series_csv(path, series):
    """Long-format persistence: timestamp, agent_id, watts."""
    ids = sorted(series)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "agent_id", "watts"])
        for sid in ids:
            ts = series[sid]
            stamps = [(ts.start + timedelta(hours=k)).isoformat() for k in range(len(ts))]
            for stamp, v in zip(stamps, ts.values):
                writer.writerow([stamp, sid, repr(float(v))])


def read_series_csv(path):
    by_agent = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for col in ("timestamp", "agent_id", "watts"):
            if col not in (reader.fieldnames or []):
                raise DataQualityError(f"{path}: missing column {col!r}")
        for row in reader:
            by_agent.setdefault(row["agent_id"], []).append(
                (datetime.fromisoformat(row["timestamp"]), float(row["watts"]))
            )
    out = {}
    for sid, rows in by_agent.items():
        rows.sort(key=lambda r: r[0])
        start = rows[0][0]
        for k, (stamp, _) in enumerate(rows):
            if stamp != start + timedelta(hours=k):
                raise DataQualityError(f"{path}: {sid} is not on a gapless hourly clock")
        out[sid] = TimeSeries(sid, start, np.array([v for _, v in rows]))
    return out


def write_correlation_csv(path, corr):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent_id", *corr.ids])
        for i, sid in enumerate(corr.ids):
            writer.writerow([sid, *[repr(float(v)) for v in corr.rho[i]]])
