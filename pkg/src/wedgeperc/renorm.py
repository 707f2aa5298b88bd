"""
Block renormalization.

At scale ``N`` (a multiple of 8) the coarse site ``v`` owns the cube
``Q_N(v) = N v + [-5N/8, 5N/8]^d``; neighbouring cubes overlap. The block
event asks for an open component of ``Q_N(v)`` touching all ``2d`` faces
while every other open component has graph diameter at most ``N / 10``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csgraph

from .clusters import graph_diameter, label_components
from .lattice import LatticeGraph, box_graph, induced_graph
from .percolation import BondConfig, SiteConfig, sample_bond
from .stats import wilson_interval

__all__ = [
    "BlockGrid",
    "coarse_sites",
    "block_event",
    "renormalized_config",
    "block_probability",
    "BlockEstimate",
    "lift_check",
    "write_block_csv",
]


@dataclass(frozen=True, eq=False)
class BlockGrid:
    """Coarse sites ``A_N`` (lexicographically sorted) at scale ``N``."""

    N: int
    dim: int
    sites: np.ndarray

    @property
    def half(self) -> int:
        return 5 * self.N // 8

    def cube(self, v) -> tuple[np.ndarray, np.ndarray]:
        c = self.N * np.asarray(v, dtype=np.int64)
        return c - self.half, c + self.half

    def graph(self) -> Optional[LatticeGraph]:
        return induced_graph(self.sites) if len(self.sites) else None


def _check_N(N: int) -> None:
    if N <= 0 or N % 8:
        raise ValueError(f"block scale N={N} must be a positive multiple of 8")


def coarse_sites(A: LatticeGraph, N: int) -> BlockGrid:
    """
    ``A_N = {v : N v + [-5N/8, 5N/8]^d ⊆ A}``, evaluated exactly with a
    summed-area table of the occupancy of ``A``.
    """
    _check_N(N)
    d = A.dim
    half = 5 * N // 8
    lo, lut = A._lut
    occ = (lut >= 0).astype(np.int64)
    # summed-area table with a zero border
    S = np.pad(occ, [(1, 0)] * d)
    for a in range(d):
        S = np.cumsum(S, axis=a)
    hi = lo + np.array(occ.shape) - 1
    vlo = np.ceil((lo + half) / N).astype(np.int64)
    vhi = np.floor((hi - half) / N).astype(np.int64)
    if np.any(vhi < vlo):
        return BlockGrid(N, d, np.empty((0, d), dtype=np.int64))
    ranges = [np.arange(a, b + 1) for a, b in zip(vlo, vhi)]
    V = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, d)
    a0 = V * N - half - lo  # inclusive lower corner, occupancy coordinates
    a1 = V * N + half - lo + 1  # exclusive upper corner
    total = np.zeros(len(V), dtype=np.int64)
    # inclusion-exclusion over the 2^d corners
    for mask in range(1 << d):
        idx = []
        sign = 1
        for a in range(d):
            if mask >> a & 1:
                idx.append(a0[:, a])
                sign = -sign
            else:
                idx.append(a1[:, a])
        total += sign * S[tuple(idx)]
    full = (2 * half + 1) ** d
    return BlockGrid(N, d, V[total == full])


def _cube_vertices(graph: LatticeGraph, lo, hi) -> np.ndarray:
    ranges = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, graph.dim)
    idx = graph.index(pts)
    if np.any(idx < 0):
        raise ValueError("block cube is clipped by the configuration's graph")
    return idx


def _block(config: BondConfig, v, N: int) -> tuple[bool, Optional[np.ndarray]]:
    _check_N(N)
    g = config.graph
    half = 5 * N // 8
    c = N * np.asarray(v, dtype=np.int64)
    lo, hi = c - half, c + half
    idx = _cube_vertices(g, lo, hi)
    inside = np.zeros(g.n_vertices, dtype=bool)
    inside[idx] = True
    em = config.open & inside[g.edges[:, 0]] & inside[g.edges[:, 1]]
    a = g.matrix(em)[idx][:, idx]
    ncomp, lab = csgraph.connected_components(a, directed=False)
    xyz = g.coords[idx]
    faces = np.zeros((ncomp, 2 * g.dim), dtype=bool)
    for ax in range(g.dim):
        faces[:, 2 * ax] = np.bincount(lab, weights=xyz[:, ax] == lo[ax], minlength=ncomp) > 0
        faces[:, 2 * ax + 1] = np.bincount(lab, weights=xyz[:, ax] == hi[ax], minlength=ncomp) > 0
    crossing = np.flatnonzero(faces.all(axis=1))
    if crossing.size != 1:
        return False, None
    cross = int(crossing[0])
    limit = N / 10.0
    sizes = np.bincount(lab, minlength=ncomp)
    # coordinate extent bounds the diameter from below, size - 1 from above
    ext = np.zeros(ncomp)
    for ax in range(g.dim):
        mx = np.full(ncomp, -np.inf)
        mn = np.full(ncomp, np.inf)
        np.maximum.at(mx, lab, xyz[:, ax])
        np.minimum.at(mn, lab, xyz[:, ax])
        ext = np.maximum(ext, mx - mn)
    others = np.arange(ncomp) != cross
    if np.any(others & (ext > limit)):
        return False, None
    unsure = np.flatnonzero(others & (sizes - 1 > limit))
    for k in unsure:
        if graph_diameter(g, idx[lab == k], em) > limit:
            return False, None
    return True, idx[lab == cross]


def block_event(config: BondConfig, v, N: int) -> bool:
    """
    Whether ``Q_N(v)`` has exactly one open component touching all ``2d``
    faces and every other open component has diameter at most ``N / 10``.

    Raises
    ------
    ValueError
        ``N`` not a multiple of 8, or the cube is not inside the graph.
    """
    return _block(config, v, N)[0]


def renormalized_config(config: BondConfig, grid: BlockGrid) -> SiteConfig:
    """Site configuration on the coarse graph: ``v`` open iff its block event holds."""
    if len(grid.sites) == 0:
        raise ValueError("empty block grid")
    cg = grid.graph()
    # the coarse graph stores sites in canonical order; evaluate in that order
    states = np.array([block_event(config, v, grid.N) for v in cg.coords], dtype=bool)
    return SiteConfig(cg, states, config.p, config.seed)


def lift_check(config: BondConfig, grid: BlockGrid) -> tuple[bool, int]:
    """
    Lift the largest open coarse cluster: the union of the crossing
    components of its blocks must lie in a single open cluster of the
    fine configuration. Returns ``(ok, coarse cluster size)``.
    """
    cg = grid.graph()
    crossing = {}
    for i, v in enumerate(cg.coords):
        ok, comp = _block(config, v, grid.N)
        if ok:
            crossing[i] = comp
    if not crossing:
        return True, 0
    opened = np.zeros(cg.n_vertices, dtype=bool)
    opened[list(crossing)] = True
    em = opened[cg.edges[:, 0]] & opened[cg.edges[:, 1]]
    lab = label_components(cg, em)
    on = np.flatnonzero(opened)
    sizes = np.bincount(lab.labels[on])
    big = int(np.argmax(sizes))
    members = on[lab.labels[on] == big]
    fine = label_components(config.graph, config.open).labels
    ids = np.unique(np.concatenate([fine[crossing[int(i)]] for i in members]))
    return bool(ids.size == 1), int(members.size)


@dataclass(frozen=True)
class BlockEstimate:
    p: float
    N: int
    dim: int
    hits: int
    n: int
    ci: tuple

    @property
    def p_hat(self) -> float:
        return self.hits / self.n if self.n else float("nan")


def block_probability(dim: int, p: float, N: int, seeds: Sequence[int]) -> BlockEstimate:
    """Monte Carlo estimate of ``P(block event)`` for the cube at the origin."""
    _check_N(N)
    g = box_graph(dim, 5 * N // 8)
    zero = np.zeros(dim, dtype=np.int64)
    hits = sum(block_event(sample_bond(g, p, int(s)), zero, N) for s in seeds)
    return BlockEstimate(float(p), N, dim, int(hits), len(seeds), wilson_interval(int(hits), len(seeds)))


def write_block_csv(fh, rows: Sequence[BlockEstimate]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["dim", "p", "N", "hits", "n", "p_hat", "ci_low", "ci_high"])
    for r in rows:
        w.writerow([r.dim, repr(r.p), r.N, r.hits, r.n, repr(r.p_hat), repr(float(r.ci[0])), repr(float(r.ci[1]))])
