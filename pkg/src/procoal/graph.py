"""Decorrelation graph: edges join weakly correlated agents.

An edge (i, j) exists whenever the squared Pearson correlation is at most
epsilon, so cliques are groups whose members are all mutually decorrelated.
Adjacency lives in per-node integer bitmasks; the clique enumerator is
Bron-Kerbosch with pivoting, with a result cap and an optional time budget
because dense graphs blow up combinatorially. The greedy disjoint packing
uses a branch-and-bound largest-clique search instead of full enumeration,
which keeps the threshold scan tractable.
"""

import json
import time
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InfeasibleError

MAX_CLIQUES_DEFAULT = 100_000


@dataclass(frozen=True)
class CorrelationGraph:
    ids: tuple
    epsilon: float
    rho_sq: np.ndarray
    adj: tuple  # per-node neighbor bitmask, no self-loops

    @property
    def n_nodes(self):
        return len(self.ids)

    @property
    def n_edges(self):
        return sum(m.bit_count() for m in self.adj) // 2

    def has_edge(self, a, b):
        i, j = self.ids.index(a), self.ids.index(b)
        return bool(self.adj[i] >> j & 1)

    def neighbors(self, agent_id):
        i = self.ids.index(agent_id)
        return tuple(self.ids[j] for j in _bits(self.adj[i]))

    def export_edge_list(self, path):
        with open(path, "w") as fh:
            for i in range(self.n_nodes):
                for j in _bits(self.adj[i]):
                    if j > i:
                        fh.write(f"{self.ids[i]} {self.ids[j]} {self.rho_sq[i, j]!r}\n")


@dataclass(frozen=True)
class CliqueSet:
    cliques: tuple      # tuples of agent ids, each sorted
    disjoint: bool
    truncated: bool

    def __len__(self):
        return len(self.cliques)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"cliques": [list(c) for c in self.cliques],
                       "disjoint": self.disjoint,
                       "truncated": self.truncated}, fh, indent=2, sort_keys=True)


def _bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _adjacency_masks(below):
    n = below.shape[0]
    return tuple(
        int.from_bytes(np.packbits(below[i], bitorder="little").tobytes(), "little")
        for i in range(n)
    )


def build_epsilon_graph(corr, epsilon):
    """Threshold the squared-correlation matrix at epsilon (inclusive)."""
    if not (0.0 <= epsilon <= 1.0):
        raise InvalidArgumentError("epsilon must lie in [0, 1]")
    rho_sq = corr.rho_sq
    below = rho_sq <= epsilon
    np.fill_diagonal(below, False)
    return CorrelationGraph(ids=corr.ids, epsilon=epsilon, rho_sq=rho_sq,
                            adj=_adjacency_masks(below))


def _enumerate_maximal(adj, universe, max_count, deadline):
    """Pivoting Bron-Kerbosch over the nodes in `universe` (a bitmask).
    Returns (list of clique bitmasks, truncated flag)."""
    out = []
    truncated = False
    if universe == 0:
        return out, truncated

    def expand(r, p, x):
        nonlocal truncated
        if truncated:
            return
        if p == 0 and x == 0:
            out.append(r)
            if len(out) >= max_count:
                truncated = True
            return
        if deadline is not None and time.monotonic() > deadline:
            truncated = True
            return
        pivot, best = -1, -1
        m = p | x
        while m:
            low = m & -m
            m ^= low
            u = low.bit_length() - 1
            c = (p & adj[u]).bit_count()
            if c > best:
                pivot, best = u, c
        ext = p & ~adj[pivot]
        while ext:
            low = ext & -ext
            ext ^= low
            v = low.bit_length() - 1
            expand(r | low, p & adj[v], x & adj[v])
            p &= ~low
            x |= low
            if truncated:
                return

    expand(0, universe, 0)
    return out, truncated


def _color_bound(adj, p):
    """Greedy coloring of the candidate set: the class count bounds the
    largest clique inside it."""
    classes = []
    m = p
    while m:
        low = m & -m
        m ^= low
        v = low.bit_length() - 1
        nv = adj[v]
        for i, cls in enumerate(classes):
            if cls & nv == 0:
                classes[i] = cls | low
                break
        else:
            classes.append(low)
    return len(classes)


def _largest_clique(adj, universe, node_cap, deadline):
    """Maximum clique within `universe`; ties break to the lexicographically
    smallest member set. Branch-and-bound on clique size: branches that
    cannot reach the incumbent size are cut (coloring bound on dense
    candidate sets), equal-size branches survive so the tie-break stays
    exact. Returns (mask, truncated)."""
    best = {"mask": 0, "size": 0, "members": ()}
    state = {"visits": 0, "truncated": False}
    if universe == 0:
        return 0, False

    def expand(r, rsize, p, x):
        if state["truncated"]:
            return
        state["visits"] += 1
        if node_cap is not None and state["visits"] > node_cap:
            state["truncated"] = True
            return
        if deadline is not None and state["visits"] % 256 == 0 \
                and time.monotonic() > deadline:
            state["truncated"] = True
            return
        if p == 0 and x == 0:
            members = tuple(_bits(r))
            if rsize > best["size"] or (rsize == best["size"] and members < best["members"]):
                best.update(mask=r, size=rsize, members=members)
            return
        pcount = p.bit_count()
        if rsize + pcount < best["size"]:
            return
        if pcount > 16 and rsize + _color_bound(adj, p) < best["size"]:
            return
        pivot, bcount = -1, -1
        m = p | x
        while m:
            low = m & -m
            m ^= low
            u = low.bit_length() - 1
            c = (p & adj[u]).bit_count()
            if c > bcount:
                pivot, bcount = u, c
        ext = p & ~adj[pivot]
        while ext:
            low = ext & -ext
            ext ^= low
            v = low.bit_length() - 1
            expand(r | low, rsize + 1, p & adj[v], x & adj[v])
            p &= ~low
            x |= low
            if state["truncated"]:
                return

    expand(0, 0, universe, 0)
    return best["mask"], state["truncated"]


def _verify_clique(adj, universe, mask):
    """Independent completeness + maximality check of one clique mask."""
    common = universe & ~mask
    m = mask
    while m:
        low = m & -m
        m ^= low
        v = low.bit_length() - 1
        if (mask & ~low) & ~adj[v]:
            raise RuntimeError("clique search returned a non-clique")
        common &= adj[v]
    if common:
        raise RuntimeError("clique search returned a non-maximal clique")


def maximal_cliques(g, max_count=MAX_CLIQUES_DEFAULT, time_budget=None):
    """All maximal cliques, sorted by size (desc) then members; returns
    (list of id-tuples, truncated). A truncated run is a flagged outcome,
    not an error."""
    universe = (1 << g.n_nodes) - 1
    deadline = None if time_budget is None else time.monotonic() + float(time_budget)
    masks, truncated = _enumerate_maximal(list(g.adj), universe, max_count, deadline)
    for m in masks:
        _verify_clique(g.adj, universe, m)
    masks.sort(key=lambda m: (-m.bit_count(), tuple(_bits(m))))
    return [tuple(g.ids[i] for i in _bits(m)) for m in masks], truncated


def disjoint_cliques(g, k_min=2, max_count=MAX_CLIQUES_DEFAULT, time_budget=None):
    """Greedy vertex-disjoint clique packing: repeatedly take the largest
    clique of the remaining subgraph (ties break to the lexicographically
    smallest member set), drop its nodes, repeat while cliques of size
    k_min survive. `max_count` caps branch-and-bound node visits per round;
    hitting it (or the time budget) flags the result truncated."""
    if k_min < 2:
        raise InvalidArgumentError("k_min must be >= 2")
    deadline = None if time_budget is None else time.monotonic() + float(time_budget)
    adj = list(g.adj)
    remaining = (1 << g.n_nodes) - 1
    picked = []
    truncated = False
    while remaining:
        masked = [a & remaining for a in adj]
        best, trunc = _largest_clique(masked, remaining, max_count, deadline)
        truncated = truncated or trunc
        if best.bit_count() < k_min:
            break
        _verify_clique(masked, remaining, best)
        picked.append(tuple(g.ids[i] for i in _bits(best)))
        remaining &= ~best
    return CliqueSet(cliques=tuple(picked), disjoint=True, truncated=truncated)


def _packing_precheck(below, n_coal, k_min):
    """Cheap necessary conditions for n_coal disjoint cliques of size >=
    k_min: enough nodes of degree >= k_min-1, and for k_min >= 3 enough
    nodes sitting in at least one triangle."""
    deg = below.sum(axis=1)
    if int((deg >= k_min - 1).sum()) < n_coal * k_min:
        return False
    if k_min >= 3:
        a = below.astype(np.float64)
        tri = ((a @ a) * a).any(axis=1)
        if int(tri.sum()) < n_coal * k_min:
            return False
    return True


def epsilon_star(corr, n_coal, k_min=2, max_count=MAX_CLIQUES_DEFAULT, time_budget=None):
    """Smallest threshold whose graph packs at least n_coal disjoint cliques.

    Scans the sorted distinct squared correlations (the only points where
    the graph changes) in ascending order and re-runs the greedy packing at
    each; thresholds that provably cannot hold n_coal cliques (too few
    edges, degrees, or triangles) are skipped without a search.
    """
    if n_coal < 1:
        raise InvalidArgumentError("n_coal must be >= 1")
    n = len(corr.ids)
    if n_coal > n // k_min:
        raise InfeasibleError(n_coal, n // k_min)
    rho_sq = corr.rho_sq
    iu = np.triu_indices(n, k=1)
    pair_vals = np.sort(rho_sq[iu])
    thresholds = np.unique(pair_vals)
    needed_edges = n_coal * (k_min * (k_min - 1) // 2)
    best = 0
    for eps in thresholds:
        if np.searchsorted(pair_vals, eps, side="right") < needed_edges:
            continue
        below = rho_sq <= eps
        np.fill_diagonal(below, False)
        if not _packing_precheck(below, n_coal, k_min):
            continue
        g = CorrelationGraph(ids=corr.ids, epsilon=float(eps), rho_sq=rho_sq,
                             adj=_adjacency_masks(below))
        cs = disjoint_cliques(g, k_min, max_count, time_budget)
        if len(cs) >= n_coal:
            return float(eps), g, cs
        best = max(best, len(cs))
    raise InfeasibleError(n_coal, best)
