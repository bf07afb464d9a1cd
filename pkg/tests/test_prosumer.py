import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from procoal.climate import ClimateVector, generate_synthetic_climate, resample_hourly
from procoal.errors import InvalidArgumentError
from procoal.prosumer import (DAILY_PROFILE, ProsumerConfig, PVParams,
                              TurbineParams, available_power,
                              clear_sky_irradiance, consumption,
                              generate_random_pool, hourly_load_profile,
                              pv_power, simulate_pool, wind_power)

START = datetime(2006, 2, 1)
TURBINE = TurbineParams(cut_in=3.0, rated_speed=12.0, cut_out=25.0, rated_power=2e6)


def test_param_validation():
    with pytest.raises(InvalidArgumentError):
        TurbineParams(cut_in=5.0, rated_speed=4.0, cut_out=25.0, rated_power=1.0)
    with pytest.raises(InvalidArgumentError):
        TurbineParams(cut_in=3.0, rated_speed=12.0, cut_out=25.0, rated_power=0.0)
    with pytest.raises(InvalidArgumentError):
        PVParams(panel_area=0.0, efficiency=0.2)
    with pytest.raises(InvalidArgumentError):
        PVParams(panel_area=1.0, efficiency=1.5)
    with pytest.raises(InvalidArgumentError):
        ProsumerConfig(id="x", n_turbines=0, n_pv=0, base_load=0.0)


def test_wind_power_endpoints():
    assert wind_power(0.0, TURBINE) == 0.0
    assert wind_power(2.9, TURBINE) == 0.0
    assert wind_power(12.0, TURBINE) == pytest.approx(2e6)
    assert wind_power(20.0, TURBINE) == pytest.approx(2e6)
    assert wind_power(25.0, TURBINE) == pytest.approx(2e6)
    assert wind_power(25.1, TURBINE) == 0.0


def test_wind_power_cubic_ramp_value():
    # oracle: rated_power * (v^3 - ci^3) / (rs^3 - ci^3) evaluated separately
    expected = 2e6 * (9.0 ** 3 - 3.0 ** 3) / (12.0 ** 3 - 3.0 ** 3)
    assert expected == pytest.approx(825396.8253968254)
    assert wind_power(9.0, TURBINE) == pytest.approx(expected, rel=1e-12)


def test_wind_power_monotone_and_zero_outside():
    vs = np.linspace(0.0, 12.0, 500)
    ps = [wind_power(v, TURBINE) for v in vs]
    assert all(b >= a for a, b in zip(ps, ps[1:]))
    for v in (0.0, 1.0, 2.99, 25.01, 40.0):
        assert wind_power(v, TURBINE) == 0.0


def oracle_irradiance(doy, hour, lat_deg):
    # independent reimplementation of the declination geometry
    decl = math.radians(23.44) * math.sin(2 * math.pi * (284 + doy) / 365.0)
    lat = math.radians(lat_deg)
    omega = math.radians(15.0 * (hour - 12.0))
    s = (math.sin(lat) * math.sin(decl)
         + math.cos(lat) * math.cos(decl) * math.cos(omega))
    return 1000.0 * s if s > 0 else 0.0


def test_clear_sky_night_is_zero():
    assert clear_sky_irradiance(datetime(2006, 6, 21, 0, 0), 45.0) == 0.0
    assert clear_sky_irradiance(datetime(2006, 12, 21, 23, 0), 10.0) == 0.0


def test_clear_sky_equator_equinox_noon():
    val = clear_sky_irradiance(datetime(2007, 3, 21, 12, 0), 0.0)
    assert val == pytest.approx(1000.0, rel=0.01)


def test_clear_sky_solstice_noon_matches_declination_oracle():
    t = datetime(2007, 6, 21, 12, 0)  # day of year 172
    val = clear_sky_irradiance(t, 45.0)
    assert val == pytest.approx(oracle_irradiance(172, 12.0, 45.0), rel=1e-12)
    # sin(90 - 45 + 23.44 deg) * 1000, i.e. ~930 W/m^2
    assert val == pytest.approx(930.03, abs=0.5)


def test_clear_sky_latitude_validation():
    with pytest.raises(InvalidArgumentError):
        clear_sky_irradiance(START, 91.0)


def test_pv_power_values():
    pv = PVParams(panel_area=10.0, efficiency=0.2)
    assert pv_power(500.0, 0.0, pv) == pytest.approx(500.0 * 10.0 * 0.2)
    assert pv_power(0.0, 0.3, pv) == 0.0
    assert pv_power(800.0, 1.0, pv) == pytest.approx(400.0)  # 800*0.25*10*0.2


def test_pv_power_monotone_in_cloudiness():
    pv = PVParams(panel_area=5.0, efficiency=0.18)
    vals = [pv_power(700.0, c, pv) for c in np.linspace(0, 1, 50)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def cfg_no_noise(**kw):
    args = dict(id="a", base_load=500.0, morning_peak_gain=1.3,
                evening_peak_gain=1.45, comfort_temperature=19.0,
                heating_gain=100.0, noise_level=0.0, rng_seed=1)
    args.update(kw)
    return ProsumerConfig(**args)


def test_consumption_heating_clamp():
    cfg = cfg_no_noise()
    rng = np.random.default_rng(0)
    warm = consumption(datetime(2006, 7, 1, 3), 25.0, cfg, rng)
    assert warm == pytest.approx(cfg.base_load * DAILY_PROFILE[3])


def test_consumption_evening_peak_above_night_trough():
    cfg = cfg_no_noise()
    rng = np.random.default_rng(0)
    night = consumption(datetime(2006, 7, 1, 3), 20.0, cfg, rng)
    evening = consumption(datetime(2006, 7, 1, 19), 20.0, cfg, rng)
    assert evening > night


def test_consumption_heating_term():
    cfg = cfg_no_noise()
    rng = np.random.default_rng(0)
    base_term = cfg.base_load * DAILY_PROFILE[3]  # hour 3 is not a peak hour
    got = consumption(datetime(2006, 1, 5, 3), 9.0, cfg, rng)
    assert got == pytest.approx(base_term + 100.0 * 10.0)


def test_load_profile_peak_gains():
    cfg = cfg_no_noise(morning_peak_gain=2.0, evening_peak_gain=3.0)
    prof = hourly_load_profile(cfg)
    assert prof[8] == pytest.approx(cfg.base_load * DAILY_PROFILE[8] * 2.0)
    assert prof[19] == pytest.approx(cfg.base_load * DAILY_PROFILE[19] * 3.0)
    assert prof[12] == pytest.approx(cfg.base_load * DAILY_PROFILE[12])


def test_available_power_consumer_only():
    cfg = cfg_no_noise()
    vec = ClimateVector(5.0, 0.5, 10.0)
    out = available_power(cfg, vec, datetime(2006, 7, 1, 12), np.random.default_rng(0))
    assert out < 0.0
    assert out == pytest.approx(-consumption(datetime(2006, 7, 1, 12), 10.0, cfg,
                                             np.random.default_rng(0)))


def test_available_power_idle_night():
    cfg = ProsumerConfig(id="a", n_pv=2, pv=PVParams(1.5, 0.2), base_load=0.0,
                         heating_gain=0.0, noise_level=0.0)
    vec = ClimateVector(0.0, 0.2, 25.0)
    out = available_power(cfg, vec, datetime(2006, 7, 1, 0), np.random.default_rng(0))
    assert out == 0.0


def test_available_power_is_sum_of_terms():
    cfg = cfg_no_noise(n_turbines=2, turbine=TURBINE, n_pv=3,
                       pv=PVParams(10.0, 0.2))
    t = datetime(2006, 6, 21, 12, 0)
    vec = ClimateVector(9.0, 1.0, 9.0)
    lat = 45.0
    wind_term = 2 * wind_power(9.0, TURBINE)
    pv_term = 3 * pv_power(clear_sky_irradiance(t, lat), 1.0, cfg.pv)
    cons_term = consumption(t, 9.0, cfg, np.random.default_rng(0))
    got = available_power(cfg, vec, t, np.random.default_rng(0), latitude=lat)
    assert got == pytest.approx(wind_term + pv_term - cons_term, rel=1e-12)


# -- pool simulation ----------------------------------------------------------

def test_simulate_pool_requires_hourly_grid():
    grid = generate_synthetic_climate(2, 2, START, timedelta(days=10),
                                      interval_hours=3, rng_seed=3)
    with pytest.raises(InvalidArgumentError):
        simulate_pool([cfg_no_noise(cell=(0, 0))], grid)


def test_simulate_pool_cell_out_of_range(hourly_grid):
    with pytest.raises(InvalidArgumentError):
        simulate_pool([cfg_no_noise(cell=(9, 0))], hourly_grid)


def test_simulate_pool_identical_seeds_identical_series(hourly_grid):
    a = cfg_no_noise(id="a", cell=(1, 1), noise_level=0.2, rng_seed=55)
    b = cfg_no_noise(id="b", cell=(1, 1), noise_level=0.2, rng_seed=55)
    out = simulate_pool([a, b], hourly_grid)
    assert np.array_equal(out["a"].values, out["b"].values)


def test_simulate_pool_seed_changes_decorrelate_noise(hourly_grid):
    a = cfg_no_noise(id="a", cell=(1, 1), noise_level=0.1, rng_seed=1)
    b = cfg_no_noise(id="b", cell=(1, 1), noise_level=0.1, rng_seed=2)
    out = simulate_pool([a, b], hourly_grid)
    rho = np.corrcoef(out["a"].values, out["b"].values)[0, 1]
    assert 0.9 < rho < 0.99999


def test_simulate_pool_zero_noise_ignores_seed(hourly_grid):
    a = cfg_no_noise(id="a", cell=(0, 1), noise_level=0.0, rng_seed=1)
    b = cfg_no_noise(id="b", cell=(0, 1), noise_level=0.0, rng_seed=999)
    out = simulate_pool([a, b], hourly_grid)
    assert np.array_equal(out["a"].values, out["b"].values)


def test_simulate_pool_year_has_8760_samples():
    grid = resample_hourly(generate_synthetic_climate(
        2, 2, START, timedelta(days=365), interval_hours=3, rng_seed=9))
    pool = generate_random_pool(200, 2, 2, seed=4)
    out = simulate_pool(pool, grid)
    assert len(out) == 200
    assert all(len(ts) == 8760 for ts in out.values())


def test_simulate_pool_matches_scalar_path(hourly_grid):
    cfg = cfg_no_noise(id="a", cell=(2, 0), n_turbines=1, turbine=TURBINE,
                       n_pv=2, pv=PVParams(1.6, 0.2), noise_level=0.1,
                       rng_seed=77)
    out = simulate_pool([cfg], hourly_grid)["a"].values
    rng = np.random.default_rng(cfg.rng_seed)
    t = hourly_grid.start
    expected = np.empty(48)
    for k in range(48):
        vec = hourly_grid.vector_at(cfg.cell, k)
        expected[k] = available_power(cfg, vec, t, rng, latitude=hourly_grid.latitude)
        t += timedelta(hours=1)
    assert np.allclose(out[:48], expected, rtol=1e-10, atol=1e-9)


def test_generate_random_pool_deterministic():
    p1 = generate_random_pool(10, 3, 3, seed=42)
    p2 = generate_random_pool(10, 3, 3, seed=42)
    assert p1 == p2
    assert len({c.id for c in p1}) == 10
