"""Coalition formation for energy prosumers.

Simulates climate-driven available-power series for a pool of prosumers,
builds the decorrelation graph over their deseasonalized series, seeds
coalitions from disjoint cliques, grows them by local utility
optimization, and benchmarks the result against random and
correlation-maximizing partitions under grid reliability and minimum
production constraints.
"""

from ._backend import HAS_NUMBA, current_backend, use_backend
from .climate import (ClimateGrid, ClimateVector, generate_synthetic_climate,
                      ingest_weather_csv, resample_hourly)
from .coalition import (Coalition, CoalitionStructure, FormationCache,
                        GridRequirements, acceptance_percentage,
                        correlated_partition, empirical_max_contract,
                        empirical_reliability, evaluate, form_coalitions,
                        grow_seed, max_contract, random_partition,
                        resolve_overlaps, shortfall_probability, social_welfare)
from .graph import (CliqueSet, CorrelationGraph, build_epsilon_graph,
                    disjoint_cliques, epsilon_star, maximal_cliques)
from .prosumer import (ProsumerConfig, PVParams, TurbineParams,
                       available_power, clear_sky_irradiance, consumption,
                       generate_random_pool, pv_power, simulate_pool, wind_power)
from .special import erf, erfinv
from .timeseries import (CorrelationMatrix, SeriesStats, TimeSeries, aggregate,
                         correlation_matrix, deseasonalize,
                         deseasonalize_with_holdout, pearson, stats)

__version__ = "0.1.0"
