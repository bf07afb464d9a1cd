"""Coalition validity, utility, seeded growth, and baseline partitions.

A coalition is valid when the largest contract it can announce while
keeping its shortfall probability at phi still clears the grid's minimum;
its utility is that contract divided by the member count, zero otherwise.
Formation seeds coalitions from disjoint cliques of the decorrelation
graph and grows them greedily on the utility (on the achievable contract
while utility is still zero), then multi-claimed agents go to whichever
coalition loses the largest utility fraction without them.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (DataQualityError, InfeasibleError, InvalidArgumentError,
                     LengthError, PhiBoundaryError)
from .graph import epsilon_star
from .special import erf, erfinv
from .timeseries import aggregate, correlation_matrix, partition_degenerate

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class GridRequirements:
    phi: float      # max shortfall probability
    p_min: float    # watts; floor on the announced contract
    n_coal: int     # desired coalition count

    def __post_init__(self):
        if not (0.0 <= self.phi <= 1.0):
            raise InvalidArgumentError(f"phi must lie in [0,1], got {self.phi}")
        if self.p_min < 0.0:
            raise InvalidArgumentError("p_min must be >= 0")
        if self.n_coal < 1:
            raise InvalidArgumentError("n_coal must be >= 1")


@dataclass(frozen=True)
class Coalition:
    members: tuple
    mu: float
    sigma: float
    p_phi: float
    valid: bool
    utility: float
    contract: float = None  # equals p_phi when valid, absent otherwise

    @property
    def size(self):
        return len(self.members)


@dataclass(frozen=True)
class CoalitionStructure:
    coalitions: tuple
    unassigned: tuple
    requirements: GridRequirements
    provenance: str
    mode: str
    epsilon: float = None
    truncated: bool = False
    degenerate: tuple = ()

    def __post_init__(self):
        seen = set()
        for c in self.coalitions:
            if not c.members:
                raise InvalidArgumentError("structures may not contain empty coalitions")
            overlap = seen.intersection(c.members)
            if overlap:
                raise InvalidArgumentError(f"coalitions overlap on {sorted(overlap)}")
            seen.update(c.members)


# -- contract math ----------------------------------------------------------

def shortfall_probability(mu, sigma, contract):
    """Probability that a Gaussian N(mu, sigma) stays at or below contract."""
    if sigma < 0.0:
        raise InvalidArgumentError("sigma must be >= 0")
    if sigma == 0.0:
        return 0.0 if contract < mu else (1.0 if contract > mu else 0.5)
    return 0.5 * (1.0 + erf((contract - mu) / (sigma * _SQRT2)))


def max_contract(mu, sigma, phi):
    """Largest contract whose shortfall probability does not exceed phi."""
    if sigma < 0.0:
        raise InvalidArgumentError("sigma must be >= 0")
    if not (0.0 < phi < 1.0):
        raise PhiBoundaryError(
            f"phi={phi}: the analytic contract diverges at the boundary; "
            "use empirical mode"
        )
    if sigma == 0.0:
        return float(mu)
    return float(mu - sigma * _SQRT2 * erfinv(1.0 - 2.0 * phi))


def empirical_max_contract(ts, phi):
    """Distribution-free contract: the empirical phi-quantile (lower
    interpolation) of the series; phi=0 falls back to the series minimum."""
    if not (0.0 <= phi <= 1.0):
        raise InvalidArgumentError("phi must lie in [0,1]")
    n = len(ts)
    if n < 1 or (phi > 0.0 and n < 1.0 / phi):
        raise LengthError(
            f"series of {n} samples is too short for the {phi} quantile"
        )
    return float(np.quantile(ts.values, phi, method="lower"))


def _z_factor(phi):
    # shared with max_contract: p_phi = mu - sigma * z
    if not (0.0 < phi < 1.0):
        raise PhiBoundaryError(f"phi={phi}: analytic mode needs 0 < phi < 1")
    return _SQRT2 * erfinv(1.0 - 2.0 * phi)


def _quantile_lower(values, phi, axis=None):
    return np.quantile(values, phi, method="lower", axis=axis)


# -- evaluation -------------------------------------------------------------

class _Pool:
    """Stacked series matrix for fast member sums; rows follow sorted ids."""

    def __init__(self, series):
        self.ids = sorted(series)
        if not self.ids:
            raise InvalidArgumentError("series mapping is empty")
        first = series[self.ids[0]]
        for sid in self.ids[1:]:
            other = series[sid]
            if len(other) != len(first) or other.start != first.start:
                raise InvalidArgumentError(f"series {sid!r} is not aligned with the pool")
        self.matrix = np.stack([series[sid].values for sid in self.ids])
        self.row = {sid: i for i, sid in enumerate(self.ids)}

    def agg(self, members):
        rows = sorted(self.row[m] for m in members)
        out = self.matrix[rows[0]].copy()
        for r in rows[1:]:
            out += self.matrix[r]
        return out


def _coalition_from_values(members, values, req, mode):
    mu, sigma = kernels.mean_std(values)
    if mode == "analytic":
        p_phi = max_contract(mu, sigma, req.phi)
    elif mode == "empirical":
        p_phi = float(_quantile_lower(values, req.phi))
    else:
        raise InvalidArgumentError(f"mode must be 'analytic' or 'empirical', got {mode!r}")
    valid = p_phi >= req.p_min
    return Coalition(
        members=tuple(members),
        mu=mu,
        sigma=sigma,
        p_phi=p_phi,
        valid=valid,
        utility=p_phi / len(members) if valid else 0.0,
        contract=p_phi if valid else None,
    )


def evaluate(members, series, req, mode="analytic"):
    """Aggregate the members, derive (mu, sigma), pick the largest admissible
    contract, and score the coalition."""
    ordered = tuple(sorted(set(members)))
    if not ordered:
        raise InvalidArgumentError("cannot evaluate an empty member set")
    agg = aggregate(ordered, series)
    return _coalition_from_values(ordered, agg.values, req, mode)


# -- growth and overlap resolution -------------------------------------------

def grow_seed(seed, g, series, req, assigned=frozenset(), mode="analytic", _pool=None):
    """Greedy local expansion of one clique seed.

    Candidates are graph neighbors of at least one member that are not yet
    assigned elsewhere. While the coalition is invalid (utility zero) the
    step criterion is the achievable contract, which gives the greedy a
    gradient below the validity threshold; afterwards it is the utility.
    Each step adds the best strictly-improving candidate, smallest id on
    ties. Seed members are never removed.
    """
    pool = _pool if _pool is not None else _Pool(series)
    members = sorted(set(seed))
    if not members:
        raise InvalidArgumentError("seed must be non-empty")
    gidx = {sid: i for i, sid in enumerate(g.ids)}
    for m in members:
        if m not in gidx:
            raise InvalidArgumentError(f"seed member {m!r} is not a graph node")
    for m in members:
        for other in members:
            if other != m and not (g.adj[gidx[m]] >> gidx[other]) & 1:
                raise InvalidArgumentError(f"seed is not a clique: {m!r} !~ {other!r}")

    z = _z_factor(req.phi) if mode == "analytic" else None
    assigned = set(assigned)
    current = _coalition_from_values(tuple(members), pool.agg(members), req, mode)
    while True:
        nbr_mask = 0
        for m in members:
            nbr_mask |= g.adj[gidx[m]]
        candidates = [g.ids[j] for j in _mask_bits(nbr_mask)]
        candidates = sorted(c for c in candidates if c not in assigned and c not in members)
        if not candidates:
            break
        agg = pool.agg(members)
        rows = pool.matrix[[pool.row[c] for c in candidates]]
        mu_v, sd_v = kernels.batch_stats(agg, rows)
        if mode == "analytic":
            p_vec = mu_v - sd_v * z
        else:
            p_vec = _quantile_lower(rows + agg[None, :], req.phi, axis=1)
        if current.utility > 0.0:
            score = np.where(p_vec >= req.p_min, p_vec / (len(members) + 1), 0.0)
            threshold = current.utility
        else:
            score = p_vec
            threshold = current.p_phi
        best = float(score.max())
        if not best > threshold:
            break
        members.append(candidates[int(np.argmax(score))])
        members.sort()
        current = _coalition_from_values(tuple(members), pool.agg(members), req, mode)
    return current


def _mask_bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _tau(full, rest_utility, rest_p_phi):
    """Relative loss the coalition suffers without the agent. Valid
    coalitions use the utility ratio; invalid ones (utility zero would
    divide by zero) fall back to the relative loss of the achievable
    contract."""
    if full.utility > 0.0:
        return (full.utility - rest_utility) / full.utility
    d = full.p_phi - rest_p_phi
    if full.p_phi != 0.0:
        return d / abs(full.p_phi)
    return 1.0 if d > 0.0 else 0.0


def resolve_overlaps(candidates, series, req, mode="analytic", provenance="resolved",
                     epsilon=None, truncated=False, degenerate=(), _pool=None):
    """Assign each multi-claimed agent to the candidate that needs it most.

    Agents claimed by several candidates are processed in ascending id
    order; the agent stays in the candidate with the largest relative
    utility loss (ties: fewer members, then lexicographically smallest
    member set) and leaves the rest, whose statistics are refreshed before
    later agents are judged. Emptied candidates are dropped.
    """
    pool = _pool if _pool is not None else _Pool(series)
    sets = [set(c) for c in candidates if c]
    aggs = [pool.agg(s) for s in sets]

    claimed = {}
    for si, s in enumerate(sets):
        for a in s:
            claimed.setdefault(a, []).append(si)
    for agent in sorted(a for a, owners in claimed.items() if len(owners) > 1):
        holders = [si for si in range(len(sets)) if agent in sets[si]]
        if len(holders) < 2:
            continue
        row = pool.matrix[pool.row[agent]]
        entries = []
        for si in holders:
            full = _coalition_from_values(tuple(sorted(sets[si])), aggs[si], req, mode)
            rest = sets[si] - {agent}
            if rest:
                rc = _coalition_from_values(tuple(sorted(rest)), aggs[si] - row, req, mode)
                rest_utility, rest_p_phi = rc.utility, rc.p_phi
            else:
                rest_utility, rest_p_phi = 0.0, 0.0
            entries.append((_tau(full, rest_utility, rest_p_phi),
                            len(sets[si]), tuple(sorted(sets[si])), si))
        winner = min(entries, key=lambda e: (-e[0], e[1], e[2]))[3]
        for _, _, _, si in entries:
            if si != winner:
                sets[si].discard(agent)
                aggs[si] = aggs[si] - row

    final = [
        _coalition_from_values(tuple(sorted(s)), pool.agg(s), req, mode)
        for s in sets if s
    ]
    final.sort(key=lambda c: c.members)
    assigned = set().union(*(c.members for c in final)) if final else set()
    unassigned = tuple(sorted(set(series) - assigned))
    return CoalitionStructure(
        coalitions=tuple(final), unassigned=unassigned, requirements=req,
        provenance=provenance, mode=mode, epsilon=epsilon,
        truncated=truncated, degenerate=tuple(degenerate),
    )


class FormationCache:
    """Pool statistics shared across sweep points: the stacked series
    matrix, the correlation matrix over non-degenerate agents, and one
    threshold-search result per n_coal. Valid for a fixed (series, k_min)."""

    def __init__(self, series, k_min=2, max_count=100_000, time_budget=None):
        self.series = series
        self.k_min = k_min
        self.max_count = max_count
        self.time_budget = time_budget
        self.ok_ids, self.degenerate = partition_degenerate(series)
        self.pool = _Pool(series)
        self.corr = (correlation_matrix({sid: series[sid] for sid in self.ok_ids})
                     if self.ok_ids else None)
        self._eps = {}

    def epsilon_star(self, n_coal):
        if n_coal not in self._eps:
            if len(self.ok_ids) < 2:
                raise InfeasibleError(n_coal, 0)
            self._eps[n_coal] = epsilon_star(self.corr, n_coal, k_min=self.k_min,
                                             max_count=self.max_count,
                                             time_budget=self.time_budget)
        return self._eps[n_coal]


def form_coalitions(series, req, mode="analytic", k_min=2,
                    max_count=100_000, time_budget=None, cache=None):
    """Full pipeline: correlation matrix, threshold search, clique seeds,
    sequential growth, overlap resolution.

    Seeds grow in descending seed-utility order (ties: higher achievable
    contract, then members), each growth excluding previously grown
    members; only the best n_coal seeds are kept so the structure matches
    the requested coalition count. Zero-variance agents are left out of the
    graph and reported via the structure's `degenerate` field.
    """
    if cache is None:
        cache = FormationCache(series, k_min=k_min, max_count=max_count,
                               time_budget=time_budget)
    elif cache.series is not series or cache.k_min != k_min:
        raise InvalidArgumentError("cache was built for a different pool or k_min")
    eps, g, seed_cs = cache.epsilon_star(req.n_coal)
    pool = cache.pool
    scored = [
        _coalition_from_values(tuple(sorted(c)), pool.agg(c), req, mode)
        for c in seed_cs.cliques
    ]
    scored.sort(key=lambda c: (-c.utility, -c.p_phi, c.members))
    seeds = scored[:req.n_coal]

    assigned = set()
    grown = []
    for seed in seeds:
        cand = grow_seed(seed.members, g, series, req,
                         assigned=frozenset(assigned), mode=mode, _pool=pool)
        grown.append(cand.members)
        assigned.update(cand.members)
    return resolve_overlaps(grown, series, req, mode=mode, provenance="percolation",
                            epsilon=eps, truncated=seed_cs.truncated,
                            degenerate=cache.degenerate, _pool=pool)


# -- baseline partitions ------------------------------------------------------

def random_groups(ids, n_coal, rng_seed):
    """Uniform random split of the (sorted) ids into n_coal non-empty blocks.

    Empty-block draws are rejected; after 100 rejections (possible only
    when n_coal approaches the pool size) a permutation seeds one agent
    into every block and the rest are assigned uniformly.
    """
    ids = sorted(ids)
    if len(ids) < n_coal:
        raise InvalidArgumentError(f"pool of {len(ids)} cannot form {n_coal} coalitions")
    rng = np.random.default_rng(rng_seed)
    assign = None
    for _ in range(100):
        draw = rng.integers(0, n_coal, size=len(ids))
        if len(np.unique(draw)) == n_coal:
            assign = draw
            break
    if assign is None:
        perm = rng.permutation(len(ids))
        assign = np.empty(len(ids), dtype=np.int64)
        assign[perm[:n_coal]] = np.arange(n_coal)
        assign[perm[n_coal:]] = rng.integers(0, n_coal, size=len(ids) - n_coal)
    blocks = [[] for _ in range(n_coal)]
    for sid, b in zip(ids, assign):
        blocks[int(b)].append(sid)
    return [tuple(b) for b in blocks]


def random_partition(series, n_coal, rng_seed, req, mode="analytic"):
    """Random baseline: uniform assignment into n_coal non-empty coalitions,
    each evaluated against the requirements."""
    blocks = random_groups(series, n_coal, rng_seed)
    coalitions = [evaluate(block, series, req, mode) for block in blocks]
    return CoalitionStructure(coalitions=tuple(coalitions), unassigned=(),
                              requirements=req, provenance="random", mode=mode)


def correlated_groups(corr, n_coal):
    """Agglomerative grouping that maximizes within-group correlation:
    starting from singletons, repeatedly merge the two groups with the
    highest average pairwise squared correlation until n_coal remain."""
    n = len(corr.ids)
    if n < n_coal:
        raise InvalidArgumentError(f"pool of {n} cannot form {n_coal} coalitions")
    link = corr.rho_sq.copy()
    np.fill_diagonal(link, 0.0)
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    groups = [[sid] for sid in corr.ids]
    for _ in range(n - n_coal):
        score = link / np.outer(sizes, sizes)
        score[~active, :] = -np.inf
        score[:, ~active] = -np.inf
        score[np.diag_indices(n)] = -np.inf
        a, b = np.unravel_index(int(np.argmax(score)), score.shape)
        if b < a:
            a, b = b, a
        link[a, :] += link[b, :]
        link[:, a] += link[:, b]
        sizes[a] += sizes[b]
        active[b] = False
        groups[a].extend(groups[b])
        groups[b] = []
    out = [tuple(sorted(groups[i])) for i in range(n) if active[i]]
    out.sort()
    return out


def correlated_partition(series, n_coal, req, mode="analytic", corr=None):
    """Worst-case baseline: coalitions of the most correlated agents.
    Zero-variance agents are reported unassigned."""
    if corr is None:
        ok_ids, _ = partition_degenerate(series)
        if len(ok_ids) < n_coal:
            raise InvalidArgumentError(
                f"pool of {len(ok_ids)} cannot form {n_coal} coalitions")
        corr = correlation_matrix({sid: series[sid] for sid in ok_ids})
    degenerate = tuple(sorted(set(series) - set(corr.ids)))
    coalitions = [evaluate(g, series, req, mode) for g in correlated_groups(corr, n_coal)]
    return CoalitionStructure(coalitions=tuple(coalitions),
                              unassigned=degenerate, requirements=req,
                              provenance="correlated", mode=mode,
                              degenerate=degenerate)


# -- structure metrics and persistence ----------------------------------------

def social_welfare(cs):
    """Sum of coalition utilities."""
    return float(sum(c.utility for c in cs.coalitions))


def acceptance_percentage(cs):
    """Fraction of coalitions allowed to enter the market."""
    if not cs.coalitions:
        raise InvalidArgumentError("structure has no coalitions")
    return sum(1 for c in cs.coalitions if c.valid) / len(cs.coalitions)


def empirical_reliability(coalition, held_out):
    """Fraction of held-out hours where the aggregate falls short of the
    contract; near phi when the model generalizes."""
    if coalition.contract is None:
        raise InvalidArgumentError("coalition has no contract")
    missing = [m for m in coalition.members if m not in held_out]
    if missing:
        raise DataQualityError(f"held-out series missing for members: {missing}")
    agg = aggregate(coalition.members, held_out)
    return float(np.mean(agg.values < coalition.contract))


def structure_to_dict(cs):
    return {
        "provenance": cs.provenance,
        "mode": cs.mode,
        "epsilon": cs.epsilon,
        "truncated": cs.truncated,
        "requirements": {"phi": cs.requirements.phi, "p_min": cs.requirements.p_min,
                         "n_coal": cs.requirements.n_coal},
        "welfare": social_welfare(cs),
        "acceptance": acceptance_percentage(cs) if cs.coalitions else None,
        "coalitions": [
            {"members": list(c.members), "mu": c.mu, "sigma": c.sigma,
             "p_phi": c.p_phi, "valid": c.valid, "utility": c.utility,
             "contract": c.contract}
            for c in cs.coalitions
        ],
        "unassigned": list(cs.unassigned),
        "degenerate": list(cs.degenerate),
    }


def write_structures_json(path, entries):
    with open(path, "w") as fh:
        json.dump(entries, fh, indent=2, sort_keys=True)
        fh.write("\n")


STRUCTURE_CSV_FIELDS = ("provenance", "realization", "coalition", "size", "members",
                        "mu", "sigma", "p_phi", "valid", "utility", "contract")


def write_structure_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=STRUCTURE_CSV_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def structure_csv_rows(cs, realization=0):
    rows = []
    for idx, c in enumerate(cs.coalitions):
        rows.append({
            "provenance": cs.provenance, "realization": realization,
            "coalition": idx, "size": c.size, "members": "|".join(c.members),
            "mu": repr(c.mu), "sigma": repr(c.sigma), "p_phi": repr(c.p_phi),
            "valid": int(c.valid), "utility": repr(c.utility),
            "contract": "" if c.contract is None else repr(c.contract),
        })
    return rows
