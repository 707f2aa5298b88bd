"""
Effective resistance, minimum g-energy unit flows and resistance-scaling
curves (the finite-volume transience diagnostic).

All solves ground the sink set, i.e. the sinks are collapsed into a single
super-sink held at potential 0, and a unit current is injected at ``v0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import LinearOperator, cg, spsolve

from .clusters import label_components
from .flows import EnergyGauge, Flow, energy
from .lattice import LatticeGraph, box_graph
from .percolation import sample_bond
from .stats import mean_ci

__all__ = [
    "UnreachableError",
    "SolverError",
    "ResistanceResult",
    "MinEnergyResult",
    "ResistanceCurve",
    "effective_resistance",
    "min_energy_flow",
    "resistance_scaling",
    "shell_mask",
    "write_curve_csv",
]

MAX_ITER = 100_000


class UnreachableError(RuntimeError):
    pass


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan, iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class ResistanceResult:
    resistance: float
    potential: np.ndarray
    iterations: int
    residual: float

    def __float__(self):
        return self.resistance


def _reduced_problem(graph: LatticeGraph, v0: int, sinks, edge_mask):
    """Edges and vertices of the component of ``v0``; raise if no sink is reachable."""
    emask = np.ones(graph.n_edges, dtype=bool) if edge_mask is None else np.asarray(edge_mask, dtype=bool)
    sink = np.zeros(graph.n_vertices, dtype=bool)
    sink[np.asarray(sinks, dtype=np.int64)] = True
    lab = label_components(graph, emask)
    comp = lab.labels == lab.labels[v0]
    if not np.any(sink & comp):
        raise UnreachableError("source is not connected to the sink set")
    e = graph.edges[emask]
    e = e[comp[e[:, 0]]]
    return e, comp, sink


def _laplacian(n, e, w):
    i, j = e[:, 0], e[:, 1]
    a = sp.coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(n, n))
    a = a.tocsr()
    return sp.diags(np.asarray(a.sum(axis=1)).ravel()) - a


def effective_resistance(
    graph: LatticeGraph,
    v0: int,
    sinks,
    tol: float = 1e-8,
    edge_mask: Optional[np.ndarray] = None,
    method: str = "cg",
    maxiter: int = MAX_ITER,
) -> ResistanceResult:
    """
    Effective resistance between ``v0`` and the (grounded) sink set through
    the edges in ``edge_mask`` (all edges by default).

    ``method="cg"`` runs Jacobi-preconditioned conjugate gradients to relative
    residual ``tol`` (iteration cap ``maxiter``, default 1e5); ``method="direct"`` uses a sparse
    factorization.

    Raises
    ------
    UnreachableError
        ``v0`` is not connected to any sink.
    SolverError
        CG did not converge within the iteration cap.
    """
    e, comp, sink = _reduced_problem(graph, v0, sinks, edge_mask)
    n = graph.n_vertices
    if sink[v0]:
        return ResistanceResult(0.0, np.zeros(n), 0, 0.0)
    free = comp & ~sink
    idx = np.flatnonzero(free)
    L = _laplacian(n, e, np.ones(len(e)))[idx][:, idx].tocsr()
    b = np.zeros(idx.size)
    s = int(np.searchsorted(idx, v0))
    b[s] = 1.0
    its = 0
    if method == "direct":
        x = spsolve(L.tocsc(), b)
    elif method == "cg":
        dinv = 1.0 / L.diagonal()
        M = LinearOperator(L.shape, matvec=lambda r: dinv * r, dtype=float)

        def count(_):
            nonlocal its
            its += 1

        x, info = cg(L, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=count)
        if info != 0:
            res = float(np.linalg.norm(L @ x - b))
            raise SolverError(f"CG did not converge in {its} iterations", res, its)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(np.linalg.norm(L @ x - b) / np.linalg.norm(b))
    phi = np.zeros(n)
    phi[idx] = x
    return ResistanceResult(float(x[s]), phi, its, res)


# ---------------------------------------------------------------------------
# convex minimum-energy flows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinEnergyResult:
    flow: Flow
    energy: float
    iterations: int
    decrement: float
    gradient_residual: float


def _tree_flow(graph, v0, sink, e_idx):
    """Unit flow along the canonical BFS path from ``v0`` to the nearest sink."""
    e = graph.edges[e_idx]
    n = graph.n_vertices
    a = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    order, pred = csgraph.breadth_first_order(a, v0, directed=False, return_predecessors=True)
    reached = order[sink[order]]
    t = int(reached[0])
    vals = np.zeros(graph.n_edges)
    while t != v0:
        u = int(pred[t])
        k = int(graph.edge_ids(u, t)[0])
        vals[k] += 1.0 if graph.edges[k, 0] == u else -1.0
        t = u
    return vals


def min_energy_flow(
    graph: LatticeGraph,
    g: EnergyGauge,
    v0: int,
    sinks,
    tol: float = 1e-10,
    edge_mask: Optional[np.ndarray] = None,
    max_iter: int = 200,
) -> MinEnergyResult:
    """
    Unit flow from ``v0`` to the sink set minimizing ``sum g(|F(e)|)``.

    Damped Newton iterations on the affine set of unit flows, started from a
    BFS path flow; each step solves a weighted Laplacian system with weights
    ``1 / g''``. Convergence is declared when the squared Newton decrement
    falls below ``tol`` (relative to the energy). The returned
    ``gradient_residual`` is the norm of ``g'(F)`` projected onto the cycle
    space, relative to ``|g'(F)|``; it vanishes at the optimum.

    Raises
    ------
    UnreachableError, SolverError
    """
    if g.d1 is None or g.d2 is None:
        raise ValueError("gauge needs first and second derivatives")
    e_all, comp, sink = _reduced_problem(graph, v0, sinks, edge_mask)
    emask = np.ones(graph.n_edges, dtype=bool) if edge_mask is None else np.asarray(edge_mask, dtype=bool)
    e_idx = np.flatnonzero(emask & comp[graph.edges[:, 0]])
    n = graph.n_vertices
    sink_list = np.flatnonzero(sink)
    if sink[v0]:
        return MinEnergyResult(Flow(graph, np.zeros(graph.n_edges), v0, sink_list), 0.0, 0, 0.0, 0.0)
    free = comp & ~sink
    idx = np.flatnonzero(free)
    pos = np.full(n, -1, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    E = graph.edges[e_idx]
    # incidence restricted to free vertices: B[v, e] = +1 at tail, -1 at head
    rows = np.concatenate([pos[E[:, 0]], pos[E[:, 1]]])
    cols = np.concatenate([np.arange(len(E)), np.arange(len(E))])
    vals = np.concatenate([np.ones(len(E)), -np.ones(len(E))])
    keep = rows >= 0
    B = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(idx.size, len(E)))

    F = _tree_flow(graph, v0, sink, e_idx)[e_idx]

    def H(x):
        return float(np.sum(g(np.abs(x))))

    def grad(x):
        return np.sign(x) * g.d1(np.abs(x))

    def hess(x):
        return np.maximum(g.d2(np.maximum(np.abs(x), 1e-10)), 1e-12)

    it = 0
    dec = math.inf
    for it in range(1, max_iter + 1):
        gr = grad(F)
        w = 1.0 / hess(F)
        K = (B @ sp.diags(w) @ B.T).tocsc()
        lam = spsolve(K, B @ (w * gr))
        step = w * (B.T @ lam - gr)
        dec = float(-(gr @ step))
        if dec <= tol * max(H(F), 1e-300):
            break
        t, h0 = 1.0, H(F)
        while H(F + t * step) > h0 - 0.25 * t * dec:
            t *= 0.5
            if t < 1e-12:
                break
        F = F + t * step
    else:
        raise SolverError(f"Newton did not converge (decrement {dec:.3g})", dec, it)
    # projected-gradient certificate
    gr = grad(F)
    L = (B @ B.T).tocsc()
    lam = spsolve(L, B @ gr)
    proj = gr - B.T @ lam
    gres = float(np.linalg.norm(proj) / max(np.linalg.norm(gr), 1e-300))
    full = np.zeros(graph.n_edges)
    full[e_idx] = F
    flow = Flow(graph, full, v0, sink_list)
    return MinEnergyResult(flow, energy(flow, g), it, dec, gres)


# ---------------------------------------------------------------------------
# scaling curves
# ---------------------------------------------------------------------------


def shell_mask(graph: LatticeGraph, n: int, center=None) -> np.ndarray:
    """Vertices with L-infinity distance exactly ``n`` from ``center``."""
    c = np.zeros(graph.dim, dtype=np.int64) if center is None else np.asarray(center)
    return np.abs(graph.coords - c).max(axis=1) == n


@dataclass
class ResistanceCurve:
    """``R[i, j]`` is the resistance at ``radii[i]`` for ``seeds[j]`` (``nan`` if skipped)."""

    region: str
    p: float
    radii: np.ndarray
    seeds: np.ndarray
    R: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    skipped: np.ndarray

    def mean(self) -> np.ndarray:
        return np.array([mean_ci(r)[0] for r in self.R])

    def ci(self) -> np.ndarray:
        return np.array([mean_ci(r)[1:] for r in self.R])

    def increments(self) -> np.ndarray:
        """Mean of per-seed ``R(radii[i]) - R(radii[i-1])`` over seeds valid at both."""
        d = np.diff(self.R, axis=0)
        return np.array([np.nanmean(x) if np.any(~np.isnan(x)) else math.nan for x in d])

    def rows(self):
        for i, n in enumerate(self.radii):
            for j, s in enumerate(self.seeds):
                if not np.isnan(self.R[i, j]):
                    yield (self.region, self.p, int(n), int(s), float(self.R[i, j]),
                           int(self.iterations[i, j]), float(self.residuals[i, j]))


def _region_graph(region, n: int) -> LatticeGraph:
    if isinstance(region, int):
        return box_graph(region, n)
    if region.shape == "box":
        return box_graph(region.dim, n, center=region.anchor)
    return region.graph(n)


def resistance_scaling(
    region,
    p: float,
    radii: Sequence[int],
    seeds: Sequence[int],
    tol: float = 1e-8,
) -> ResistanceCurve:
    """
    ``R(v0 -> shell of Λ_n)`` inside ``region ∩ Λ_n`` for each radius and seed.

    ``region`` is a :class:`RegionSpec` or an integer dimension (meaning the
    whole lattice). ``v0`` is the region's anchor. For ``p < 1`` the solve
    runs on the open cluster of ``v0``; samples where that cluster does not
    reach the shell are skipped and counted. At ``p = 1`` the value does not
    depend on the seed and is computed once per radius.
    """
    radii = np.asarray(radii, dtype=int)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    seeds = np.asarray(seeds, dtype=np.int64)
    name = f"Z{region}" if isinstance(region, int) else f"{region.shape}{region.dim}"
    anchor = np.zeros(region if isinstance(region, int) else region.dim, dtype=np.int64)
    if not isinstance(region, int):
        anchor = np.asarray(region.anchor, dtype=np.int64)
    shape = (radii.size, seeds.size)
    R = np.full(shape, np.nan)
    its = np.zeros(shape, dtype=int)
    res = np.full(shape, np.nan)
    skipped = np.zeros(radii.size, dtype=int)
    for i, n in enumerate(radii):
        graph = _region_graph(region, int(n))
        v0 = int(graph.index(anchor)[0])
        if v0 < 0:
            raise ValueError("anchor is not in the region")
        sinks = np.flatnonzero(shell_mask(graph, int(n), anchor))
        cache = None
        for j, s in enumerate(seeds):
            if p >= 1.0:
                if cache is None:
                    cache = effective_resistance(graph, v0, sinks, tol)
                out = cache
            else:
                cfg = sample_bond(graph, p, int(s))
                try:
                    out = effective_resistance(graph, v0, sinks, tol, edge_mask=cfg.open)
                except UnreachableError:
                    skipped[i] += 1
                    continue
            R[i, j], its[i, j], res[i, j] = out.resistance, out.iterations, out.residual
    return ResistanceCurve(name, float(p), radii, seeds, R, its, res, skipped)


def write_curve_csv(fh, curves: Sequence[ResistanceCurve]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["region", "p", "n", "seed", "R", "iterations", "residual"])
    for c in curves:
        for r in c.rows():
            w.writerow([r[0], repr(r[1]), r[2], r[3], repr(r[4]), r[5], repr(r[6])])
