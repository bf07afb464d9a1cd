import os
import subprocess
import sys

import numpy as np
import pytest

from procoal import kernels
from procoal.prosumer import generate_random_pool, simulate_pool
from procoal.timeseries import deseasonalize

BACKENDS = ["numpy"] + (["numba"] if kernels.HAS_NUMBA else [])


@pytest.fixture()
def restore_backend():
    previous = kernels.current_backend()
    yield
    kernels.use_backend(previous)


def test_backend_switch_and_validation(restore_backend):
    kernels.use_backend("numpy")
    assert kernels.current_backend() == "numpy"
    with pytest.raises(ValueError):
        kernels.use_backend("cython")


def test_env_flag_selects_backend():
    code = "from procoal import kernels; print(kernels.current_backend())"
    env = dict(os.environ, PROCOAL_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba unavailable")
def test_simulate_pool_backend_parity(hourly_grid, restore_backend):
    pool = generate_random_pool(12, 3, 3, seed=3)
    results = {}
    for backend in BACKENDS:
        kernels.use_backend(backend)
        results[backend] = simulate_pool(pool, hourly_grid)
    for sid in results["numpy"]:
        a = results["numpy"][sid].values
        b = results["numba"][sid].values
        assert np.allclose(a, b, rtol=1e-12, atol=1e-9)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba unavailable")
def test_deseasonalize_backend_parity(small_series, restore_backend):
    sid = sorted(small_series)[0]
    outs = {}
    for backend in BACKENDS:
        kernels.use_backend(backend)
        outs[backend] = deseasonalize(small_series[sid], 15).values
    assert np.allclose(outs["numpy"], outs["numba"], rtol=1e-12, atol=1e-9)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba unavailable")
def test_batch_stats_backend_parity(small_series, restore_backend):
    ids = sorted(small_series)
    rows = np.stack([small_series[i].values for i in ids])
    base = rows[0]
    outs = {}
    for backend in BACKENDS:
        kernels.use_backend(backend)
        outs[backend] = kernels.batch_stats(base, rows)
    np.testing.assert_allclose(outs["numpy"][0], outs["numba"][0], rtol=1e-11)
    np.testing.assert_allclose(outs["numpy"][1], outs["numba"][1], rtol=1e-11)


@pytest.mark.skipif(not kernels.HAS_NUMBA, reason="numba unavailable")
def test_mean_std_backend_parity(small_series, restore_backend):
    values = next(iter(small_series.values())).values
    kernels.use_backend("numpy")
    m_np, s_np = kernels.mean_std(values)
    kernels.use_backend("numba")
    m_nb, s_nb = kernels.mean_std(values)
    assert m_np == pytest.approx(m_nb, rel=1e-12)
    assert s_np == pytest.approx(s_nb, rel=1e-12)


def test_within_backend_determinism(hourly_grid, restore_backend):
    pool = generate_random_pool(6, 3, 3, seed=8)
    for backend in BACKENDS:
        kernels.use_backend(backend)
        a = simulate_pool(pool, hourly_grid)
        b = simulate_pool(pool, hourly_grid)
        for sid in a:
            assert np.array_equal(a[sid].values, b[sid].values)
