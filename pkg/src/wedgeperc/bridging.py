"""
Transport of path measures into the giant cluster.

Every path of a measure is rewritten so that it uses only open edges of the
giant cluster: the pieces of the path that run through gaps (or across
closed edges) are replaced by bridges, and the result is loop-erased. The
pushforward of the weights gives the transported measure, and the
projection relation ``e -> f`` (edge ``e`` of a replaced piece, edge ``f``
of its bridge, plus the identity) yields the energy comparison bounds.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .chemical import lex_shortest_path, open_neighbors, shortest_bridge
from .clusters import _complement_components, giant_cluster, giant_mask, inner_k_boundary, label_clusters, weakly_closed_extensions
from .flows import EnergyGauge, PathMeasure, edge_mass
from .percolation import BondConfig

__all__ = [
    "BridgeEvent",
    "BridgeError",
    "Transport",
    "ProjectionStats",
    "EnergyReport",
    "EnergyComparisonError",
    "loop_erase",
    "bridge_path",
    "transport_measure",
    "projection_stats",
    "projection_profile",
    "energy_comparison",
    "write_events_csv",
]

log = logging.getLogger(__name__)


class BridgeError(RuntimeError):
    pass


class EnergyComparisonError(AssertionError):
    pass


@dataclass(frozen=True)
class BridgeEvent:
    """One replaced segment: ``removed`` runs from ``a`` to ``b`` and is replaced by ``bridge``."""

    gap: int
    a: int
    b: int
    removed: tuple
    bridge: tuple
    strategy: str

    def removed_edges(self, graph) -> np.ndarray:
        r = np.asarray(self.removed)
        return graph.edge_ids(r[:-1], r[1:]) if r.size > 1 else np.empty(0, dtype=np.int64)

    def bridge_edges(self, graph) -> np.ndarray:
        r = np.asarray(self.bridge)
        return graph.edge_ids(r[:-1], r[1:]) if r.size > 1 else np.empty(0, dtype=np.int64)


def loop_erase(path: Sequence[int]) -> list:
    """Chronological loop erasure."""
    out: list = []
    where: dict = {}
    for x in path:
        j = where.get(x)
        if j is not None:
            for y in out[j + 1 :]:
                del where[y]
            del out[j + 1 :]
        else:
            where[x] = len(out)
            out.append(x)
    return out


def _check_endpoints(path, giant):
    if not (giant[path[0]] and giant[path[-1]]):
        raise ValueError("path must start and end in the giant cluster")


def _bridge_shortest(path, config, giant, gap_of) -> tuple[list, list]:
    g = config.graph
    path = [int(x) for x in path]
    out = [path[0]]
    events = []
    i = 0
    m = len(path) - 1
    open_ = config.open
    while i < m:
        u, v = path[i], path[i + 1]
        e = int(g.edge_ids(u, v)[0])
        if open_[e] and giant[v]:
            out.append(v)
            i += 1
            continue
        j = i + 1
        while not giant[path[j]]:
            j += 1
        off = [x for x in path[i + 1 : j] if gap_of is not None and gap_of[x] >= 0]
        gid = int(gap_of[off[0]]) if off else -1
        br = shortest_bridge(config, u, path[j], giant).path
        events.append(BridgeEvent(gid, u, path[j], tuple(path[i : j + 1]), tuple(br), "shortest"))
        out.extend(br[1:])
        i = j
    return out, events


def _bridge_boundary(path, config, giant, k, ext, ext_inner) -> tuple[list, list]:
    g = config.graph
    path = [int(x) for x in path]
    gap_of = ext.gap_of
    nb = open_neighbors(config)
    out: list = []
    events = []
    i = 0
    m = len(path) - 1
    last = {}
    for idx, x in enumerate(path):
        if gap_of[x] >= 0:
            last[int(gap_of[x])] = idx
    while i <= m:
        x = path[i]
        gid = int(gap_of[x])
        if gid < 0:
            out.append(x)
            i += 1
            continue
        t = last[gid]
        s_v, t_v = x, path[t]
        inner = ext_inner(gid)
        if not (inner[s_v] and inner[t_v]):
            raise BridgeError(f"segment ends are not in the inner boundary of extension {gid}")
        br = lex_shortest_path(nb, s_v, t_v, allowed=inner)
        if br is None:
            raise BridgeError(f"inner boundary of extension {gid} is not open-connected")
        if not np.all(giant[list(br)]):
            raise BridgeError("boundary bridge leaves the giant cluster")
        if t > i:
            events.append(BridgeEvent(gid, s_v, t_v, tuple(path[i : t + 1]), tuple(br), f"boundary({k})"))
        out.extend(br)
        i = t + 1
    # every remaining step must be an open giant edge
    ids = g.edge_ids(out[:-1], out[1:]) if len(out) > 1 else np.empty(0, dtype=np.int64)
    if np.any(ids < 0) or not np.all(config.open[ids]) or not np.all(giant[out]):
        raise BridgeError("boundary strategy produced an invalid path")
    return out, events


class _Context:
    """Per-configuration data shared by all paths of a measure."""

    def __init__(self, config: BondConfig, strategy: str, k: int):
        self.config = config
        lab = label_clusters(config)
        self.giant_id = giant_cluster(lab)
        self.giant = giant_mask(lab, self.giant_id)
        self.strategy = strategy
        self.k = k
        # gap ids for the event log (ambient components of the complement)
        self.gap_of = _complement_components(config.graph, self.giant, diameters=False).gap_of
        self._ext = None
        self._inner: dict = {}

    @property
    def ext(self):
        if self._ext is None:
            self._ext, _ = weakly_closed_extensions(self.config, self.k)
        return self._ext

    def inner(self, gid: int) -> np.ndarray:
        if gid not in self._inner:
            g = self.config.graph
            verts = self.ext.gaps[gid].vertices
            mask = np.zeros(g.n_vertices, dtype=bool)
            try:
                mask[inner_k_boundary(verts, self.k, g)] = True
            except ValueError as exc:
                # no k-strongly open giant cluster at all
                raise BridgeError(str(exc)) from None
            self._inner[gid] = mask
        return self._inner[gid]


def _parse_strategy(strategy) -> tuple[str, int]:
    if strategy == "shortest":
        return "shortest", 0
    k = None
    if isinstance(strategy, tuple) and strategy[0] == "boundary":
        k = int(strategy[1])
    elif isinstance(strategy, str) and strategy.startswith("boundary"):
        k = int(strategy[len("boundary") :].strip("()") or "2")
    if k is None:
        raise ValueError(f"unknown strategy {strategy!r}")
    if k < 2:
        # the inner 1-boundary {d(x, complement) < 1} is empty
        raise ValueError("boundary strategy needs k >= 2")
    return "boundary", k


def _bridge(path, ctx: _Context) -> tuple[list, list, bool]:
    _check_endpoints(path, ctx.giant)
    if ctx.strategy == "boundary":
        try:
            out, ev = _bridge_boundary(path, ctx.config, ctx.giant, ctx.k, ctx.ext, ctx.inner)
            return loop_erase(out), ev, False
        except BridgeError as exc:
            log.info("boundary strategy failed (%s); falling back to shortest bridges", exc)
            out, ev = _bridge_shortest(path, ctx.config, ctx.giant, ctx.gap_of)
            ev = [BridgeEvent(e.gap, e.a, e.b, e.removed, e.bridge, "shortest(fallback)") for e in ev]
            return loop_erase(out), ev, True
    out, ev = _bridge_shortest(path, ctx.config, ctx.giant, ctx.gap_of)
    return loop_erase(out), ev, False


def bridge_path(path, config: BondConfig, giant: Optional[np.ndarray] = None, strategy="shortest"):
    """
    Rewrite ``path`` into a self-avoiding open path of the giant cluster.

    ``strategy`` is ``"shortest"`` (each maximal bad piece, i.e. a run of
    steps that cross a closed edge or leave the giant cluster, is replaced by
    the canonical shortest bridge between its last giant vertex before and
    first giant vertex after) or ``("boundary", k)`` / ``"boundary(k)"``
    (the piece between the first and last visit of a component of the
    complement of the k-strongly open giant cluster is replaced by a
    shortest open path inside that component's inner k-boundary; on failure
    the whole path falls back to shortest bridges).

    Returns
    -------
    new_path : list of int
    events : list of BridgeEvent
    """
    name, k = _parse_strategy(strategy)
    ctx = _Context(config, name, k)
    if giant is not None:
        ctx.giant = np.asarray(giant, dtype=bool)
    out, ev, _ = _bridge(path, ctx)
    return out, ev


@dataclass(frozen=True, eq=False)
class Transport:
    """Result of transporting a path measure: ``mu_prime = mu o phi^-1``."""

    mu: PathMeasure
    mu_prime: PathMeasure
    image: np.ndarray
    events: list
    fallbacks: int
    giant: np.ndarray
    strategy: str

    @property
    def graph(self):
        return self.mu.graph

    def relation(self) -> sp.csr_matrix:
        """Boolean ``R[e, f] = (e -> f)``, identity included on all used edges."""
        g = self.graph
        rows, cols = [], []
        for evs in self.events:
            for ev in evs:
                re_ = ev.removed_edges(g)
                be = ev.bridge_edges(g)
                if re_.size and be.size:
                    rows.append(np.repeat(re_, be.size))
                    cols.append(np.tile(be, re_.size))
        used = np.flatnonzero((edge_mass(self.mu) > 0) | (edge_mass(self.mu_prime) > 0))
        rows.append(used)
        cols.append(used)
        r, c = np.concatenate(rows), np.concatenate(cols)
        n = g.n_edges
        m = sp.csr_matrix((np.ones(r.size, dtype=bool), (r, c)), shape=(n, n))
        m.sum_duplicates()
        return m


def transport_measure(mu: PathMeasure, config: BondConfig, strategy="shortest") -> Transport:
    """
    Push ``mu`` forward under :func:`bridge_path`. Paths with identical
    images are merged and their weights added (in order of first
    appearance).
    """
    name, k = _parse_strategy(strategy)
    ctx = _Context(config, name, k)
    index: dict = {}
    paths, weights, events = [], [], []
    image = np.empty(len(mu.paths), dtype=np.int64)
    fallbacks = 0
    for i, (p, w) in enumerate(zip(mu.paths, mu.weights)):
        out, ev, fb = _bridge(p.tolist(), ctx)
        fallbacks += fb
        events.append(ev)
        key = tuple(out)
        j = index.get(key)
        if j is None:
            j = index[key] = len(paths)
            paths.append(out)
            weights.append(0.0)
        weights[j] += w
        image[i] = j
    w = np.asarray(weights)
    mu_p = PathMeasure(mu.graph, tuple(paths), w / w.sum())
    tag = name if name == "shortest" else f"boundary({k})"
    return Transport(mu, mu_p, image, events, fallbacks, ctx.giant, tag)


@dataclass(frozen=True)
class ProjectionStats:
    """``S(e)`` for the sampled edges, ``|T(f)|`` for all edges and the compound sums."""

    edges: np.ndarray
    S: list
    T_size: np.ndarray
    compound: np.ndarray


def projection_stats(tr: Transport, sample_edges=None) -> ProjectionStats:
    """
    Projection sets of the sampled edges (default: every edge used by
    ``mu``) together with ``sum_{f in S(e)} |T(f)|``.
    """
    R = tr.relation()
    T_size = np.asarray(R.sum(axis=0)).ravel().astype(np.int64)
    if sample_edges is None:
        sample_edges = np.flatnonzero(edge_mass(tr.mu) > 0)
    sample_edges = np.asarray(sample_edges, dtype=np.int64)
    S = [R.indices[R.indptr[e] : R.indptr[e + 1]].copy() for e in sample_edges]
    compound = np.array([int(T_size[s].sum()) for s in S], dtype=np.int64)
    return ProjectionStats(sample_edges, S, T_size, compound)


def _edge_distance(graph, e: int) -> np.ndarray:
    """Lattice distance from edge ``e`` to every edge: smallest L1 distance between endpoints."""
    c = graph.coords
    ends = graph.edges[e]
    best = None
    for a in ends:
        for col in (0, 1):
            d = np.abs(c[graph.edges[:, col]] - c[a]).sum(axis=1)
            best = d if best is None else np.minimum(best, d)
    return best


def projection_profile(transports: Sequence[Transport], max_r: int = 12, per_sample: int = 5, seed: int = 0):
    """
    Empirical ``P(e -> f)`` against the distance ``d(e, f)``.

    From each transport ``per_sample`` edges ``e`` are drawn from the
    support of ``mu``; for every ``r <= max_r`` the fraction of edges at
    distance ``r`` onto which ``e`` is projected is averaged over all draws.

    Returns ``(r, probability, n_draws)``.
    """
    rng = np.random.default_rng(seed)
    num = np.zeros(max_r + 1)
    den = np.zeros(max_r + 1)
    draws = 0
    for tr in transports:
        R = tr.relation()
        support = np.flatnonzero(edge_mass(tr.mu) > 0)
        if support.size == 0:
            continue
        for e in rng.choice(support, size=min(per_sample, support.size), replace=False):
            d = _edge_distance(tr.graph, int(e))
            f = R.indices[R.indptr[e] : R.indptr[e + 1]]
            hit = np.bincount(np.minimum(d[f], max_r + 1), minlength=max_r + 2)[: max_r + 1]
            tot = np.bincount(np.minimum(d, max_r + 1), minlength=max_r + 2)[: max_r + 1]
            num += hit / np.maximum(tot, 1)
            den += tot > 0
            draws += 1
    return np.arange(max_r + 1), num / np.maximum(den, 1), draws


@dataclass(frozen=True)
class EnergyReport:
    quadratic_lhs: float
    quadratic_rhs: float
    cauchy_lhs: float
    cauchy_rhs: float
    g_lhs: float
    g_rhs: float
    l: int
    events: int

    @property
    def ok(self) -> bool:
        return (
            _le(self.quadratic_lhs, self.quadratic_rhs)
            and _le(self.cauchy_lhs, self.cauchy_rhs)
            and _le(self.g_lhs, self.g_rhs)
        )


def _le(a: float, b: float, rel: float = 1e-12) -> bool:
    return a <= b + rel * max(abs(a), abs(b))


def energy_comparison(tr: Transport, g: EnergyGauge, l: Optional[int] = None, strict: bool = True) -> EnergyReport:
    """
    Evaluate, for the realized configuration,

    * ``sum_f F'(f)^2 <= sum_e F(e)^2 * sum_{f in S(e)} |T(f)|``,
    * the intermediate Cauchy-Schwarz step
      ``sum_f (sum_{e in T(f)} F(e))^2 <= sum_f |T(f)| sum_{e in T(f)} F(e)^2``,
    * ``H_g(F') <= sum_e g(F(e)) * (sum_{f in S(e)} |T(f)|)^(l-1)``,

    where ``F`` and ``F'`` are the edge masses of ``mu`` and ``mu'`` (these
    coincide with the induced flows in absolute value when every edge is
    crossed in one direction only). Inequalities are checked with a
    relative slack of 1e-12 for rounding.

    Raises
    ------
    EnergyComparisonError
        If ``strict`` and some inequality fails.
    """
    l = g.l if l is None else l
    if l is None:
        raise ValueError("gauge exponent l required")
    F = edge_mass(tr.mu)
    Fp = edge_mass(tr.mu_prime)
    R = tr.relation().astype(np.float64)
    T_size = np.asarray(R.sum(axis=0)).ravel()
    compound = R @ T_size
    q_lhs = float(np.sum(Fp**2))
    q_rhs = float(np.sum(F**2 * compound))
    push = R.T @ F
    c_lhs = float(np.sum(push**2))
    c_rhs = float(np.sum(T_size * (R.T @ F**2)))
    g_lhs = float(np.sum(g(Fp)))
    g_rhs = float(np.sum(g(F) * compound ** (l - 1)))
    rep = EnergyReport(q_lhs, q_rhs, c_lhs, c_rhs, g_lhs, g_rhs, int(l), sum(len(e) for e in tr.events))
    if strict and not rep.ok:
        raise EnergyComparisonError(f"energy comparison violated: {rep}")
    return rep


def write_events_csv(fh, tr: Transport) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["path", "gap", "a", "b", "removed_length", "bridge_length", "strategy"])
    for i, evs in enumerate(tr.events):
        for ev in evs:
            w.writerow([i, ev.gap, ev.a, ev.b, len(ev.removed) - 1, len(ev.bridge) - 1, ev.strategy])
