"""
Flows, path measures and g-energies.

A :class:`Flow` stores one value per undirected edge, oriented from the
edge's low endpoint to its high endpoint; the reverse direction carries the
negated value. Path measures are finitely supported: paths run from the
source to a sink set (the truncation shell at finite volume).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .lattice import LatticeGraph

__all__ = [
    "Flow",
    "PathMeasure",
    "EnergyGauge",
    "GaugeValidationError",
    "DecompositionError",
    "psi",
    "quadratic_gauge",
    "psi_gauge",
    "sqrt_gauge",
    "energy",
    "validate_gauge",
    "path_measure_to_flow",
    "edge_mass",
    "expected_intersection",
    "flow_to_path_measure",
    "cancel_cycles",
    "random_outward_measure",
    "write_flow_csv",
    "write_measure",
]


class GaugeValidationError(ValueError):
    def __init__(self, message: str, x: float):
        super().__init__(message)
        self.x = x


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Flow:
    graph: LatticeGraph
    values: np.ndarray
    source: int
    sinks: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.graph.n_edges,):
            raise ValueError("one value per edge required")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sinks", np.unique(np.asarray(self.sinks, dtype=np.int64)))

    def divergence(self) -> np.ndarray:
        """Net outflow at every vertex."""
        e = self.graph.edges
        div = np.zeros(self.graph.n_vertices)
        np.add.at(div, e[:, 0], self.values)
        np.add.at(div, e[:, 1], -self.values)
        return div

    def strength(self) -> float:
        return float(self.divergence()[self.source])

    def conservation_error(self) -> float:
        """Largest |divergence| away from the source and the sinks."""
        div = self.divergence()
        free = np.ones(self.graph.n_vertices, dtype=bool)
        free[self.source] = False
        free[self.sinks] = False
        return float(np.abs(div[free]).max()) if free.any() else 0.0

    def value(self, u: int, v: int) -> float:
        """``F(uv)``; antisymmetric in its arguments."""
        e = int(self.graph.edge_ids(u, v)[0])
        if e < 0:
            raise ValueError(f"{u} and {v} are not adjacent")
        return float(self.values[e] if self.graph.edges[e, 0] == u else -self.values[e])


@dataclass(frozen=True, eq=False)
class PathMeasure:
    """
    Weighted self-avoiding paths (vertex index sequences) from a common
    source; weights are positive and sum to 1.
    """

    graph: LatticeGraph
    paths: tuple
    weights: np.ndarray

    def __post_init__(self):
        paths = tuple(np.asarray(p, dtype=np.int64) for p in self.paths)
        w = np.asarray(self.weights, dtype=float)
        if len(paths) == 0 or len(paths) != w.size:
            raise ValueError("need one positive weight per path")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")
        src = paths[0][0]
        for p in paths:
            if p[0] != src:
                raise ValueError("all paths must start at the same source")
            if np.unique(p).size != p.size:
                raise ValueError("paths must be self-avoiding")
            if p.size > 1 and np.any(self.graph.edge_ids(p[:-1], p[1:]) < 0):
                raise ValueError("consecutive path vertices must be adjacent")
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "weights", w)

    @property
    def source(self) -> int:
        return int(self.paths[0][0])

    @property
    def endpoints(self) -> np.ndarray:
        return np.unique([p[-1] for p in self.paths])

    def path_edges(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Edge ids of path ``i`` and the sign of each traversal (+1 low->high)."""
        p = self.paths[i]
        if p.size < 2:
            return np.empty(0, dtype=np.int64), np.empty(0)
        e = self.graph.edge_ids(p[:-1], p[1:])
        sign = np.where(self.graph.edges[e, 0] == p[:-1], 1.0, -1.0)
        return e, sign


# ---------------------------------------------------------------------------
# gauges and energies
# ---------------------------------------------------------------------------


def psi(d: int, alpha: float, x):
    """
    ``|x|**(d/(d-1)) / log(1 + 1/|x|)**alpha``, extended by ``psi(0) = 0``.
    """
    x = np.abs(np.asarray(x, dtype=float))
    q = d / (d - 1.0)
    out = np.zeros_like(x)
    nz = x > 0
    xs = x[nz]
    out[nz] = xs**q / np.log1p(1.0 / xs) ** alpha
    return out if out.ndim else float(out)


def _psi_d1(d, alpha, x):
    x = np.abs(np.asarray(x, dtype=float))
    q = d / (d - 1.0)
    out = np.zeros_like(x)
    nz = x > 0
    xs = x[nz]
    L = np.log1p(1.0 / xs)
    out[nz] = xs ** (q - 1) * L**-alpha * (q + alpha / ((xs + 1) * L))
    return out


def _psi_d2(d, alpha, x):
    x = np.abs(np.asarray(x, dtype=float))
    q = d / (d - 1.0)
    out = np.zeros_like(x)
    nz = x > 0
    xs = x[nz]
    L = np.log1p(1.0 / xs)
    # g' = x^(q-1) L^-a (q + a u), u = 1/((x+1) L); du/dx = -u/(x+1) + u^2/x
    u = 1.0 / ((xs + 1) * L)
    du = -u / (xs + 1) + u * u / xs
    dLa = alpha * L ** (-alpha - 1) / (xs * (xs + 1))
    out[nz] = (
        (q - 1) * xs ** (q - 2) * L**-alpha * (q + alpha * u)
        + xs ** (q - 1) * dLa * (q + alpha * u)
        + xs ** (q - 1) * L**-alpha * alpha * du
    )
    return out


@dataclass(frozen=True)
class EnergyGauge:
    """
    Energy density ``g`` on ``[0, inf)`` with optional first and second
    derivatives (needed by the convex solver) and a claimed exponent ``l``
    such that ``x**-l g(x)`` is nonincreasing.
    """

    func: Callable
    name: str = "g"
    l: Optional[int] = None
    d1: Optional[Callable] = None
    d2: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.func(np.abs(np.asarray(x, dtype=float)))


def quadratic_gauge() -> EnergyGauge:
    return EnergyGauge(
        lambda x: x * x, "x^2", 2, lambda x: 2.0 * np.abs(x), lambda x: np.full_like(np.asarray(x, float), 2.0),
        {"d": 2, "alpha": 0.0},
    )


def psi_gauge(d: int, alpha: float, l: Optional[int] = 4) -> EnergyGauge:
    return EnergyGauge(
        lambda x: psi(d, alpha, x), f"psi_{d},{alpha}", l,
        lambda x: _psi_d1(d, alpha, x), lambda x: _psi_d2(d, alpha, x), {"d": d, "alpha": alpha},
    )


def sqrt_gauge() -> EnergyGauge:
    return EnergyGauge(lambda x: np.sqrt(np.abs(x)), "sqrt", None)


def energy(F, g: EnergyGauge) -> float:
    """``sum_e g(|F(e)|)`` over undirected edges."""
    vals = F.values if isinstance(F, Flow) else np.asarray(F, dtype=float)
    return float(np.sum(g(np.abs(vals))))


@dataclass(frozen=True)
class GaugeReport:
    name: str
    l: Optional[int]
    points: int
    convex: bool
    decay: bool


def validate_gauge(g: EnergyGauge, grid, l: Optional[int] = None, rtol: float = 1e-9) -> GaugeReport:
    """
    Check convexity (nondecreasing chord slopes and the midpoint inequality)
    and that ``x**-l g(x)`` is nonincreasing on ``grid``.

    Raises
    ------
    GaugeValidationError
        Naming the first grid point where a condition fails.
    """
    x = np.asarray(grid, dtype=float)
    if np.any(np.diff(x) <= 0) or x[0] <= 0:
        raise ValueError("grid must be positive and strictly increasing")
    l = g.l if l is None else l
    gx = g(x)
    if abs(float(g(np.array([0.0]))[0])) > 0:
        raise GaugeValidationError(f"{g.name}: g(0) != 0", 0.0)
    if np.any(np.diff(gx) < -rtol * np.abs(gx[1:])):
        i = int(np.flatnonzero(np.diff(gx) < -rtol * np.abs(gx[1:]))[0])
        raise GaugeValidationError(f"{g.name}: decreasing at x={x[i + 1]:.6g}", x[i + 1])
    slope = np.diff(gx) / np.diff(x)
    ds = np.diff(slope)
    bad = np.flatnonzero(ds < -rtol * np.maximum(np.abs(slope[1:]), np.abs(slope[:-1])))
    if bad.size:
        xi = x[bad[0] + 1]
        raise GaugeValidationError(f"{g.name}: convexity fails at x={xi:.6g}", xi)
    mid = 0.5 * (x[1:] + x[:-1])
    chord = 0.5 * (gx[1:] + gx[:-1])
    bad = np.flatnonzero(g(mid) > chord * (1 + rtol))
    if bad.size:
        xi = mid[bad[0]]
        raise GaugeValidationError(f"{g.name}: midpoint convexity fails at x={xi:.6g}", xi)
    if l is not None:
        r = x ** (-float(l)) * gx
        bad = np.flatnonzero(r[1:] > r[:-1] * (1 + rtol))
        if bad.size:
            xi = x[bad[0] + 1]
            raise GaugeValidationError(f"{g.name}: x^-{l} g(x) increases at x={xi:.6g}", xi)
    return GaugeReport(g.name, l, x.size, True, l is not None)


# ---------------------------------------------------------------------------
# path measures <-> flows
# ---------------------------------------------------------------------------


def path_measure_to_flow(mu: PathMeasure, sinks=None) -> Flow:
    """
    Flow induced by ``mu``: each path pushes its weight along its edges.
    Sinks default to the path endpoints.
    """
    vals = np.zeros(mu.graph.n_edges)
    for i, w in enumerate(mu.weights):
        e, s = mu.path_edges(i)
        np.add.at(vals, e, w * s)
    sinks = mu.endpoints if sinks is None else sinks
    return Flow(mu.graph, vals, mu.source, sinks)


def edge_mass(mu: PathMeasure) -> np.ndarray:
    """``mu(paths through e)`` per edge."""
    m = np.zeros(mu.graph.n_edges)
    for i, w in enumerate(mu.weights):
        e, _ = mu.path_edges(i)
        np.add.at(m, e, w)
    return m


def expected_intersection(mu: PathMeasure) -> float:
    """
    ``E |P ∩ Q|`` for independent ``P, Q ~ mu`` by enumerating every pair of
    support paths (quadratic in the support size; an oracle, not a fast path).
    """
    sets = [set(mu.path_edges(i)[0].tolist()) for i in range(len(mu.paths))]
    w = mu.weights
    total = 0.0
    for i in range(len(sets)):
        for j in range(len(sets)):
            total += w[i] * w[j] * len(sets[i] & sets[j])
    return total


def _positive_digraph(graph: LatticeGraph, vals: np.ndarray, eps: float):
    """Directed adjacency lists (canonical order) along positive flow."""
    e = graph.edges
    pos = vals > eps
    neg = vals < -eps
    tail = np.concatenate([e[pos, 0], e[neg, 1]])
    head = np.concatenate([e[pos, 1], e[neg, 0]])
    eid = np.concatenate([np.flatnonzero(pos), np.flatnonzero(neg)])
    order = np.lexsort((head, tail))
    tail, head, eid = tail[order], head[order], eid[order]
    n = graph.n_vertices
    ptr = np.searchsorted(tail, np.arange(n + 1))
    return tail, head, eid, ptr


def cancel_cycles(F: Flow, eps: float = 0.0) -> Flow:
    """
    Remove directed cycles of positive flow: repeatedly take the lowest
    canonical edge lying on such a cycle, close it with the canonical-first
    BFS path back to its tail, and subtract the cycle's minimum.
    """
    g = F.graph
    vals = F.values.copy()
    e = g.edges
    while True:
        tail, head, eid, ptr = _positive_digraph(g, vals, eps)
        if tail.size == 0:
            break
        n = g.n_vertices
        a = sp.csr_matrix((np.ones(tail.size), (tail, head)), shape=(n, n))
        ncomp, comp = csgraph.connected_components(a, directed=True, connection="strong")
        on_cycle = comp[tail] == comp[head]
        if not on_cycle.any():
            break
        # lowest canonical edge on a cycle
        k = np.flatnonzero(on_cycle)[np.argmin(eid[on_cycle])]
        u, v, c = int(tail[k]), int(head[k]), comp[tail[k]]
        # BFS v -> u inside the strong component
        par = {v: -1}
        q = [v]
        found = v == u
        while q and not found:
            nxt = []
            for x in q:
                for j in range(ptr[x], ptr[x + 1]):
                    y = int(head[j])
                    if comp[y] == c and y not in par:
                        par[y] = x
                        if y == u:
                            found = True
                            break
                        nxt.append(y)
                if found:
                    break
            q = nxt
        cyc = [u]
        x = u
        while par[x] != -1:
            x = par[x]
            cyc.append(x)
        cyc.reverse()  # v ... u
        cyc = [u] + cyc  # u -> v -> ... -> u
        us, vs = np.array(cyc[:-1]), np.array(cyc[1:])
        ids = g.edge_ids(us, vs)
        sgn = np.where(e[ids, 0] == us, 1.0, -1.0)
        amt = float(np.min(vals[ids] * sgn))
        vals[ids] -= sgn * amt
        vals[ids[np.abs(vals[ids]) <= eps]] = 0.0
        # the bottleneck edge is now exactly zero
        vals[ids[np.argmin(np.abs(vals[ids]))]] = 0.0
    return Flow(g, vals, F.source, F.sinks)


def flow_to_path_measure(F: Flow, tol: float = 1e-9) -> tuple[PathMeasure, Flow]:
    """
    Decompose a unit flow into a path measure.

    Stage 1 cancels cycles (:func:`cancel_cycles`). Stage 2 repeatedly
    follows, from the source, the positive-flow edge to the smallest-index
    neighbour until a sink is reached, records the path with weight equal
    to its bottleneck value and subtracts it.

    Returns
    -------
    mu : PathMeasure
    acyclic : Flow
        The flow after cycle cancellation, which ``mu`` reproduces.

    Raises
    ------
    DecompositionError
        If the weights miss 1 by more than ``tol`` or the reconstruction
        differs from the acyclic flow by more than ``tol`` on some edge.
    """
    g = F.graph
    eps = tol * 1e-3
    acyclic = cancel_cycles(F, eps)
    vals = acyclic.values.copy()
    vals[np.abs(vals) <= eps] = 0.0
    sink = np.zeros(g.n_vertices, dtype=bool)
    sink[acyclic.sinks] = True
    src = acyclic.source
    e = g.edges
    paths, weights = [], []
    for _ in range(10 * g.n_edges + 10):
        tail, head, eid, ptr = _positive_digraph(g, vals, eps)
        if ptr[src + 1] == ptr[src]:
            break
        path, ids = [src], []
        x = src
        seen = {src}
        while not sink[x] or x == src and not path[1:]:
            if ptr[x + 1] == ptr[x]:
                break
            j = ptr[x]
            y = int(head[j])
            if y in seen:
                raise DecompositionError("cycle encountered after cancellation")
            ids.append(int(eid[j]))
            path.append(y)
            seen.add(y)
            x = y
            if sink[x]:
                break
        if not ids:
            break
        ids = np.array(ids)
        us = np.array(path[:-1])
        sgn = np.where(e[ids, 0] == us, 1.0, -1.0)
        w = float(np.min(vals[ids] * sgn))
        vals[ids] -= sgn * w
        vals[ids[np.abs(vals[ids]) <= eps]] = 0.0
        if sink[x]:
            paths.append(path)
            weights.append(w)
    total = float(np.sum(weights))
    if abs(total - 1.0) > tol:
        raise DecompositionError(f"path weights sum to {total!r}, not 1")
    weights = np.asarray(weights) / total
    mu = PathMeasure(g, tuple(paths), weights)
    recon = path_measure_to_flow(mu).values * total
    err = float(np.max(np.abs(recon - acyclic.values))) if recon.size else 0.0
    if err > tol:
        raise DecompositionError(f"reconstruction error {err:.3g} exceeds tol")
    return mu, acyclic


def random_outward_measure(
    graph: LatticeGraph, v0: int, n_paths: int, rng: np.random.Generator, sink: Optional[np.ndarray] = None,
    accept: Optional[np.ndarray] = None, max_tries: int = 100000,
) -> PathMeasure:
    """
    Random path measure whose paths leave ``v0`` strictly increasing their
    L1 distance from it, stopping at the first vertex in ``sink`` (default:
    the graph's outer boundary). Every edge is crossed in the same direction
    by all paths. Paths ending outside ``accept`` are discarded and redrawn.
    Weights are Dirichlet(1, ..., 1).
    """
    if sink is None:
        sink = graph.degree < 2 * graph.dim
    c0 = graph.coords[v0]
    nbr = graph.nbr
    l1 = np.abs(graph.coords - c0).sum(axis=1)
    paths = []
    tries = 0
    while len(paths) < n_paths:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not draw enough accepted paths")
        path = [v0]
        x = v0
        while not sink[x]:
            nb = nbr[x]
            out = nb[(nb >= 0)]
            out = out[l1[out] > l1[x]]
            if out.size == 0:
                break
            x = int(out[rng.integers(out.size)])
            path.append(x)
        if len(path) < 2 or not sink[x]:
            continue
        if accept is not None and not accept[x]:
            continue
        paths.append(path)
    w = rng.dirichlet(np.ones(n_paths))
    return PathMeasure(graph, tuple(paths), w)


def write_flow_csv(fh, F: Flow) -> None:
    """One row per edge with nonzero value: low endpoint, high endpoint, value."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["u", "v", "value"])
    for e in np.flatnonzero(F.values):
        a, b = F.graph.edges[e]
        w.writerow([int(a), int(b), repr(float(F.values[e]))])


def write_measure(fh, mu: PathMeasure) -> None:
    """One path per line: weight, then the vertex sequence."""
    for p, w in zip(mu.paths, mu.weights):
        fh.write(repr(float(w)) + " " + " ".join(map(str, p.tolist())) + "\n")
