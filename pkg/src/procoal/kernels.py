"""Hot numeric kernels with numba-jitted and pure-numpy twins.

Three loops dominate runtime: turning climate fields into per-agent power
series, the hour-of-day moving average used for seasonal removal, and the
batched mean/std of candidate coalitions during greedy growth. Each has a
jitted implementation and a vectorized numpy fallback; `_backend` decides
which one runs. Within one backend results are bit-reproducible; across
backends they agree to reduction round-off (~1e-12 relative).
"""

import numpy as np

from ._backend import HAS_NUMBA, current_backend, njit, prange, use_backend  # noqa: F401


# -- available power: (agents x hours) ------------------------------------

def _available_power_np(wind, cloud, temp, irr, hour, cell, n_turb, cut_in,
                        rated, cut_out, rated_pw, n_pv, area, eff, dexp,
                        profile, comfort, heat_gain, noise):
    v = wind[:, cell].T                       # (N, T)
    ci = cut_in[:, None]
    ci3 = ci ** 3
    ramp = rated_pw[:, None] * (v ** 3 - ci3) / (rated[:, None] ** 3 - ci3)
    wp = np.where(
        (v < ci) | (v > cut_out[:, None]),
        0.0,
        np.where(v <= rated[:, None], ramp, rated_pw[:, None]),
    )
    cl = cloud[:, cell].T
    pv = irr[None, :] * (1.0 - 0.75 * cl ** dexp[:, None]) * (area * eff)[:, None]
    heat = np.maximum(0.0, comfort[:, None] - temp[:, cell].T)
    cons = (profile[np.arange(len(cell))[:, None], hour[None, :]]
            + heat_gain[:, None] * heat) * noise
    return n_turb[:, None] * wp + n_pv[:, None] * pv - cons


def _available_power_loop(wind, cloud, temp, irr, hour, cell, n_turb, cut_in,
                          rated, cut_out, rated_pw, n_pv, area, eff, dexp,
                          profile, comfort, heat_gain, noise):
    n, t = noise.shape
    out = np.empty((n, t))
    for i in prange(n):
        c = cell[i]
        ci = cut_in[i]
        ci3 = ci ** 3
        denom = rated[i] ** 3 - ci3
        ae = area[i] * eff[i]
        for k in range(t):
            v = wind[k, c]
            if v < ci or v > cut_out[i]:
                wp = 0.0
            elif v <= rated[i]:
                wp = rated_pw[i] * (v ** 3 - ci3) / denom
            else:
                wp = rated_pw[i]
            pv = irr[k] * (1.0 - 0.75 * cloud[k, c] ** dexp[i]) * ae
            heat = comfort[i] - temp[k, c]
            if heat < 0.0:
                heat = 0.0
            cons = (profile[i, hour[k]] + heat_gain[i] * heat) * noise[i, k]
            out[i, k] = n_turb[i] * wp + n_pv[i] * pv - cons
    return out


# -- hour-of-day stratified centered moving average ------------------------

def _hourly_moving_average_np(values, window):
    t = values.shape[0]
    ma = np.empty(t)
    half_lo = (window - 1) // 2
    half_hi = window // 2
    for h0 in range(min(24, t)):
        s = values[h0::24]
        d = np.arange(len(s))
        lo = np.maximum(0, d - half_lo)
        hi = np.minimum(len(s) - 1, d + half_hi)
        cs = np.concatenate(([0.0], np.cumsum(s)))
        ma[h0::24] = (cs[hi + 1] - cs[lo]) / (hi + 1 - lo)
    return ma


def _hourly_moving_average_loop(values, window):
    t = values.shape[0]
    ma = np.empty(t)
    half_lo = (window - 1) // 2
    half_hi = window // 2
    for h0 in prange(min(24, t)):
        n = (t - h0 + 23) // 24
        cs = np.empty(n + 1)
        cs[0] = 0.0
        for d in range(n):
            cs[d + 1] = cs[d] + values[h0 + 24 * d]
        for d in range(n):
            lo = d - half_lo
            if lo < 0:
                lo = 0
            hi = d + half_hi
            if hi > n - 1:
                hi = n - 1
            ma[h0 + 24 * d] = (cs[hi + 1] - cs[lo]) / (hi + 1 - lo)
    return ma


# -- batched coalition statistics ------------------------------------------

def _batch_stats_np(base, rows):
    m = rows + base[None, :]
    mean = m.mean(axis=1)
    sd = np.sqrt(((m - mean[:, None]) ** 2).mean(axis=1))
    return mean, sd


def _batch_stats_loop(base, rows):
    k, t = rows.shape
    mean = np.empty(k)
    sd = np.empty(k)
    for i in prange(k):
        s = 0.0
        for j in range(t):
            s += base[j] + rows[i, j]
        m = s / t
        q = 0.0
        for j in range(t):
            d = base[j] + rows[i, j] - m
            q += d * d
        mean[i] = m
        sd[i] = np.sqrt(q / t)
    return mean, sd


def _mean_std_np(values):
    m = values.mean()
    return float(m), float(np.sqrt(((values - m) ** 2).mean()))


def _mean_std_loop(values):
    t = values.shape[0]
    s = 0.0
    for j in range(t):
        s += values[j]
    m = s / t
    q = 0.0
    for j in range(t):
        d = values[j] - m
        q += d * d
    return m, np.sqrt(q / t)


if HAS_NUMBA:
    _available_power_nb = njit(parallel=True, cache=True)(_available_power_loop)
    _hourly_moving_average_nb = njit(cache=True)(_hourly_moving_average_loop)
    _batch_stats_nb = njit(parallel=True, cache=True)(_batch_stats_loop)
    _mean_std_nb = njit(cache=True)(_mean_std_loop)


def available_power_matrix(wind, cloud, temp, irr, hour, cell, n_turb, cut_in,
                           rated, cut_out, rated_pw, n_pv, area, eff, dexp,
                           profile, comfort, heat_gain, noise):
    """Per-agent available power over the whole clock; output (agents, hours)."""
    args = (wind, cloud, temp, irr, hour, cell, n_turb, cut_in, rated, cut_out,
            rated_pw, n_pv, area, eff, dexp, profile, comfort, heat_gain, noise)
    if current_backend() == "numba":
        return _available_power_nb(*args)
    return _available_power_np(*args)


def hourly_moving_average(values, window):
    """Centered moving average of each hour-of-day subseries (window in days);
    edges shrink to one-sided windows."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if current_backend() == "numba":
        return _hourly_moving_average_nb(values, window)
    return _hourly_moving_average_np(values, window)


def batch_stats(base, rows):
    """Population mean/std of base + rows[i] for every row; two (k,) arrays."""
    base = np.ascontiguousarray(base, dtype=np.float64)
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if current_backend() == "numba":
        return _batch_stats_nb(base, rows)
    return _batch_stats_np(base, rows)


def mean_std(values):
    """Population mean and standard deviation of a 1-D array."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if current_backend() == "numba":
        m, s = _mean_std_nb(values)
        return float(m), float(s)
    return _mean_std_np(values)
