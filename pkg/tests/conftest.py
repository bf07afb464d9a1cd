from datetime import datetime, timedelta

import numpy as np
import pytest

from procoal.climate import generate_synthetic_climate, resample_hourly
from procoal.prosumer import generate_random_pool, simulate_pool
from procoal.timeseries import TimeSeries, deseasonalize

START = datetime(2006, 2, 1)


def make_series(values, sid="s", start=START):
    return TimeSeries(sid, start, np.asarray(values, dtype=np.float64))


@pytest.fixture(scope="session")
def hourly_grid():
    grid = generate_synthetic_climate(3, 3, START, timedelta(days=120),
                                      interval_hours=3, spatial_corr_length=1.2,
                                      rng_seed=101)
    return resample_hourly(grid)


@pytest.fixture(scope="session")
def small_series(hourly_grid):
    pool = generate_random_pool(24, 3, 3, seed=7)
    return simulate_pool(pool, hourly_grid)


@pytest.fixture(scope="session")
def small_deseason(small_series):
    return {sid: deseasonalize(ts, 15) for sid, ts in small_series.items()}
