"""
Chemical (intrinsic) distance in the open subgraph and canonical shortest
bridges between vertices of the giant cluster.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csgraph

from .clusters import giant_cluster, giant_mask, label_clusters
from .lattice import LatticeGraph
from .percolation import BondConfig, sample_bond
from .stats import TailFit, fit_log_linear_tail

__all__ = [
    "DistanceResult",
    "InsufficientDataError",
    "open_neighbors",
    "chemical_dist",
    "shortest_bridge",
    "APResult",
    "ap_pairs",
    "ap_summarize",
    "ap_tail_experiment",
    "write_pairs_csv",
]


class InsufficientDataError(RuntimeError):
    pass


@dataclass(frozen=True)
class DistanceResult:
    """Length of a shortest open path (``None`` when unreachable) and the path."""

    length: Optional[int]
    path: tuple = ()

    @property
    def reachable(self) -> bool:
        return self.length is not None


def open_neighbors(config: BondConfig) -> list[list[int]]:
    """Adjacency lists of the open subgraph in canonical order (cached per config)."""
    nb = config.__dict__.get("_open_nbrs")
    if nb is None:
        nb = config.graph.neighbor_lists(config.open)
        config.__dict__["_open_nbrs"] = nb
    return nb


def chemical_dist(config: BondConfig, v: int, w: int) -> DistanceResult:
    """Shortest open path from ``v`` to ``w`` by bidirectional BFS."""
    if v == w:
        return DistanceResult(0, (v,))
    nb = open_neighbors(config)
    par_f, par_b = {v: -1}, {w: -1}
    front_f, front_b = [v], [w]
    meet = None
    while front_f and front_b and meet is None:
        # expand the smaller frontier by one full layer
        if len(front_f) <= len(front_b):
            front, par, other = front_f, par_f, par_b
        else:
            front, par, other = front_b, par_b, par_f
        nxt = []
        for u in front:
            for x in nb[u]:
                if x not in par:
                    par[x] = u
                    nxt.append(x)
                    if x in other and meet is None:
                        meet = x
        if front is front_f:
            front_f = nxt
        else:
            front_b = nxt
    if meet is None:
        return DistanceResult(None)
    left = []
    x = meet
    while x != -1:
        left.append(x)
        x = par_f[x]
    left.reverse()
    x = par_b[meet]
    while x != -1:
        left.append(x)
        x = par_b[x]
    return DistanceResult(len(left) - 1, tuple(left))


def _bfs_until(nb, src: int, target: int, allowed=None) -> dict:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if u == target:
            break
        du = dist[u] + 1
        for x in nb[u]:
            if x not in dist and (allowed is None or allowed[x]):
                dist[x] = du
                q.append(x)
    return dist


def lex_shortest_path(nb, a: int, b: int, allowed=None) -> Optional[tuple]:
    """
    Lexicographically smallest (canonical vertex order) among the shortest
    ``a -> b`` paths in the graph given by adjacency lists ``nb``,
    optionally restricted to vertices with ``allowed[x]`` true.
    """
    if a == b:
        return (a,)
    dist = _bfs_until(nb, b, a, allowed)
    if a not in dist:
        return None
    path = [a]
    cur, d = a, dist[a]
    while d > 0:
        # neighbours are sorted, so the first hit is the smallest index
        for x in nb[cur]:
            if dist.get(x, -1) == d - 1:
                cur = x
                break
        d -= 1
        path.append(cur)
    return tuple(path)


def shortest_bridge(config: BondConfig, a: int, b: int, giant: np.ndarray) -> DistanceResult:
    """
    Canonical shortest open path between giant-cluster vertices ``a`` and
    ``b``: among all shortest paths the lexicographically smallest vertex
    sequence.
    """
    if not (giant[a] and giant[b]):
        raise ValueError("bridge endpoints must lie in the giant cluster")
    path = lex_shortest_path(open_neighbors(config), a, b)
    if path is None:
        raise ValueError("endpoints are not connected")
    return DistanceResult(len(path) - 1, path)


@dataclass(frozen=True)
class APResult:
    """Chemical-distance statistics over sampled giant-cluster pairs."""

    rho_hat: float
    ms: np.ndarray
    tail: np.ndarray
    theta: TailFit
    rows: list
    quantile: float

    def fraction_exceeding(self, factor: float) -> float:
        r = np.array([row[4] / row[3] for row in self.rows])
        return float(np.mean(r > factor))

    def summary(self) -> dict:
        return {
            "rho_hat": self.rho_hat,
            "quantile": self.quantile,
            "theta_hat": self.theta.rate,
            "theta_ci": [self.theta.ci_low, self.theta.ci_high],
            "pairs": len(self.rows),
        }


def ap_pairs(p: float, graph: LatticeGraph, seed: int, n_pairs: int, sources: int = 20) -> list:
    """
    Rows ``(seed, v, w, L1, D)`` for ``n_pairs`` pairs in the giant cluster
    of one configuration.

    ``sources`` sources are drawn uniformly from the giant cluster; one BFS
    from each gives ``D`` to targets drawn uniformly from the giant cluster.
    Draws use a generator seeded by the percolation seed.
    """
    cfg = sample_bond(graph, p, seed)
    lab = label_clusters(cfg)
    gmask = giant_mask(lab, giant_cluster(lab))
    members = np.flatnonzero(gmask)
    if members.size < 2 or n_pairs <= 0:
        return []
    rng = np.random.default_rng([seed, 0xA9])
    n_src = max(1, min(sources, n_pairs))
    per_src = math.ceil(n_pairs / n_src)
    src = rng.choice(members, size=n_src, replace=members.size < n_src)
    dist = csgraph.dijkstra(graph.matrix(cfg.open), directed=False, indices=src, unweighted=True)
    rows = []
    for i, s in enumerate(src):
        for t in rng.choice(members, size=per_src):
            if t == s:
                continue
            l1 = int(np.abs(graph.coords[t] - graph.coords[s]).sum())
            rows.append((int(seed), int(s), int(t), l1, int(dist[i, t])))
    return rows[:n_pairs]


def ap_summarize(rows: list, ms=None, quantile: float = 0.99, min_pairs: int = 10) -> APResult:
    """Quantile of ``D / L1``, survival of ``D / L1`` on ``ms`` and its decay fit."""
    if ms is None:
        ms = np.round(np.arange(1.0, 5.0001, 0.125), 6)
    if len(rows) < min_pairs:
        raise InsufficientDataError(f"only {len(rows)} giant-cluster pairs")
    ratio = np.array([r[4] / r[3] for r in rows])
    rho = float(np.quantile(ratio, quantile))
    tail = np.array([np.mean(ratio > m) for m in ms])
    theta = fit_log_linear_tail(ratio, grid=ms, min_count=5)
    return APResult(rho, np.asarray(ms), tail, theta, list(rows), quantile)


def ap_tail_experiment(
    p: float,
    graph: LatticeGraph,
    pairs: int,
    seeds: Sequence[int],
    sources_per_seed: int = 20,
    ms: Optional[np.ndarray] = None,
    quantile: float = 0.99,
    min_pairs: int = 10,
) -> APResult:
    """
    Sample vertex pairs inside the giant cluster and compare the chemical
    distance ``D`` with the L1 distance.

    The ``pairs`` budget is split evenly over ``seeds`` (see
    :func:`ap_pairs`). Returns the ``quantile`` of ``D / L1``
    (``rho_hat``), the survival curve ``P(D > m L1)`` on ``ms`` and its
    log-linear decay fit.

    Raises
    ------
    InsufficientDataError
        Fewer than ``min_pairs`` pairs could be drawn.
    """
    per_seed = max(1, math.ceil(pairs / max(1, len(seeds))))
    rows = []
    for seed in seeds:
        rows.extend(ap_pairs(p, graph, int(seed), per_seed, sources_per_seed))
    return ap_summarize(rows[:pairs], ms, quantile, min_pairs)


def write_pairs_csv(fh, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["seed", "v", "w", "L1", "D"])
    w.writerows(rows)
