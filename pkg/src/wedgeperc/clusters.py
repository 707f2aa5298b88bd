"""
Cluster structure of percolation configurations: component labels, the
crossing (giant) cluster, gaps, k-strongly open edges, weakly closed
clusters and inner k-boundaries.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csgraph

from .lattice import LatticeGraph
from .percolation import BondConfig

__all__ = [
    "ClusterLabeling",
    "Gap",
    "GapSet",
    "label_clusters",
    "label_components",
    "giant_cluster",
    "giant_mask",
    "gaps",
    "graph_diameter",
    "strongly_open_edges",
    "WeaklyClosedClusters",
    "weakly_closed_clusters",
    "weakly_closed_extensions",
    "inner_k_boundary",
    "is_connected",
    "diameter_survival",
    "write_gap_csv",
]


@dataclass(frozen=True, eq=False)
class ClusterLabeling:
    """
    Component id per vertex, numbered in order of each component's first
    vertex in canonical order, with sizes and coordinate bounding boxes.
    """

    graph: LatticeGraph
    labels: np.ndarray
    sizes: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def n_components(self) -> int:
        return self.sizes.size

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cid)


def label_components(graph: LatticeGraph, edge_mask: Optional[np.ndarray] = None) -> ClusterLabeling:
    """Connected components of ``graph`` restricted to ``edge_mask``."""
    n = graph.n_vertices
    _, raw = csgraph.connected_components(graph.matrix(edge_mask), directed=False)
    # canonical renumbering: by first vertex
    _, first = np.unique(raw, return_index=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    labels = rank[raw]
    sizes = np.bincount(labels, minlength=first.size)
    order = np.argsort(labels, kind="stable")
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    c = graph.coords[order]
    lo = np.minimum.reduceat(c, starts, axis=0) if n else np.empty((0, graph.dim), int)
    hi = np.maximum.reduceat(c, starts, axis=0) if n else np.empty((0, graph.dim), int)
    return ClusterLabeling(graph, labels, sizes, lo, hi)


def label_clusters(config: BondConfig) -> ClusterLabeling:
    """Connected components of the open subgraph."""
    return label_components(config.graph, config.open)


def giant_cluster(labeling: ClusterLabeling, axes: Optional[Sequence[int]] = None) -> Optional[int]:
    """
    Component crossing between two opposite faces of the graph's bounding
    box (along any of ``axes``); the largest if several, ``None`` if none.
    """
    g = labeling.graph
    glo, ghi = g.coords.min(axis=0), g.coords.max(axis=0)
    ax = list(range(g.dim)) if axes is None else list(axes)
    crossing = np.zeros(labeling.n_components, dtype=bool)
    for a in ax:
        if ghi[a] > glo[a]:
            crossing |= (labeling.lo[:, a] == glo[a]) & (labeling.hi[:, a] == ghi[a])
    cand = np.flatnonzero(crossing)
    if cand.size == 0:
        return None
    # argmax picks the lowest id among equal sizes
    return int(cand[np.argmax(labeling.sizes[cand])])


def giant_mask(labeling: ClusterLabeling, giant: Optional[int]) -> np.ndarray:
    if giant is None:
        return np.zeros(labeling.graph.n_vertices, dtype=bool)
    return labeling.labels == giant


def graph_diameter(graph: LatticeGraph, vertices: np.ndarray, edge_mask: Optional[np.ndarray] = None) -> int:
    """Graph diameter of the subgraph induced on ``vertices`` (must be connected)."""
    vertices = np.asarray(vertices)
    s = vertices.size
    if s <= 1:
        return 0
    local = np.full(graph.n_vertices, -1, dtype=np.int64)
    local[vertices] = np.arange(s)
    e = graph.edges if edge_mask is None else graph.edges[edge_mask]
    e = e[(local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)]
    le = local[e]
    import scipy.sparse as sp

    a = sp.coo_matrix((np.ones(len(le)), (le[:, 0], le[:, 1])), shape=(s, s)).tocsr()
    best = 0
    for start in range(0, s, 256):
        d = csgraph.shortest_path(a, directed=False, unweighted=True, indices=np.arange(start, min(s, start + 256)))
        if np.isinf(d).any():
            raise ValueError("vertex set is not connected")
        best = max(best, int(d.max()))
    return best


@dataclass(frozen=True)
class Gap:
    """
    One gap: a connected (in the ambient lattice) cluster of vertices
    outside the giant cluster.
    """

    id: int
    vertices: np.ndarray
    diameter: Optional[int]
    giant_neighbors: np.ndarray
    censored: bool

    @property
    def size(self) -> int:
        return self.vertices.size


@dataclass(frozen=True, eq=False)
class GapSet:
    """Gaps of a configuration together with a per-vertex gap id (``-1`` off gaps)."""

    gaps: list
    gap_of: np.ndarray
    giant: Optional[int]

    def __len__(self):
        return len(self.gaps)

    def __iter__(self):
        return iter(self.gaps)

    def diameters(self, include_censored: bool = False) -> np.ndarray:
        return np.array(
            [g.diameter for g in self.gaps if include_censored or not g.censored], dtype=np.int64
        )


def _complement_components(graph: LatticeGraph, inside: np.ndarray, diameters: bool) -> GapSet:
    idx = np.flatnonzero(~inside)
    gap_of = np.full(graph.n_vertices, -1, dtype=np.int64)
    if idx.size == 0:
        return GapSet([], gap_of, None)
    # ambient adjacency (open or closed) among non-giant vertices
    mask = ~inside[graph.edges[:, 0]] & ~inside[graph.edges[:, 1]]
    lab = label_components(graph, mask).labels
    sub = lab[idx]
    _, first = np.unique(sub, return_index=True)
    order = np.argsort(first)
    remap = np.full(sub.max() + 1, -1, dtype=np.int64)
    uniq = sub[first[order]]
    remap[uniq] = np.arange(uniq.size)
    gid = remap[sub]
    gap_of[idx] = gid
    full_degree = 2 * graph.dim
    nbr = graph.nbr
    out = []
    by_gap = np.argsort(gid, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(np.bincount(gid))])
    for k in range(uniq.size):
        verts = idx[by_gap[bounds[k] : bounds[k + 1]]]
        nb = nbr[verts]
        nb = nb[nb >= 0]
        gn = np.unique(nb[inside[nb]])
        censored = bool(np.any(graph.degree[verts] < full_degree))
        diam = graph_diameter(graph, verts) if diameters else None
        out.append(Gap(k, verts, diam, gn, censored))
    return GapSet(out, gap_of, None)


def gaps(config: BondConfig, giant: Optional[int], labeling: Optional[ClusterLabeling] = None,
         diameters: bool = True) -> GapSet:
    """
    Gaps of ``config``: components, under ambient lattice adjacency, of the
    vertices outside the giant cluster. Non-giant open clusters belong to
    the gaps that surround them. A gap touching the graph's outer boundary
    (a vertex of degree below ``2d``) is flagged ``censored``.
    """
    if labeling is None:
        labeling = label_clusters(config)
    inside = giant_mask(labeling, giant)
    gs = _complement_components(config.graph, inside, diameters)
    return GapSet(gs.gaps, gs.gap_of, giant)


def strongly_open_edges(config: BondConfig, k: int) -> np.ndarray:
    """
    Mask of k-strongly open edges: open, and every edge within line-graph
    distance ``k`` is open as well.

    An edge ``f`` lies within line-graph distance ``k >= 1`` of ``e`` iff
    some endpoints of the two are within vertex distance ``k - 1``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    g = config.graph
    if k == 0:
        return config.open.copy()
    closed = ~config.open
    bad = np.zeros(g.n_vertices, dtype=bool)
    bad[g.edges[closed, 0]] = True
    bad[g.edges[closed, 1]] = True
    if not bad.any():
        return config.open.copy()
    dist = g.bfs_distance(np.flatnonzero(bad), limit=k)
    near = np.minimum(dist[g.edges[:, 0]], dist[g.edges[:, 1]]) <= k - 1
    return config.open & ~near


@dataclass(frozen=True, eq=False)
class WeaklyClosedClusters:
    """
    Components of the subgraph of k-weakly closed edges. ``cluster_of`` is
    ``-1`` for vertices touching no weakly closed edge.
    """

    k: int
    weak: np.ndarray
    cluster_of: np.ndarray
    clusters: list
    diameters: np.ndarray
    censored: np.ndarray

    def tail(self, n_max: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        return diameter_survival(self.diameters[~self.censored], n_max)


def weakly_closed_clusters(config: BondConfig, k: int, diameters: bool = True) -> WeaklyClosedClusters:
    g = config.graph
    weak = ~strongly_open_edges(config, k)
    touched = np.zeros(g.n_vertices, dtype=bool)
    touched[g.edges[weak, 0]] = True
    touched[g.edges[weak, 1]] = True
    lab = label_components(g, weak).labels
    cluster_of = np.full(g.n_vertices, -1, dtype=np.int64)
    idx = np.flatnonzero(touched)
    clusters, diams, cens = [], [], []
    if idx.size:
        sub = lab[idx]
        _, first = np.unique(sub, return_index=True)
        uniq = sub[np.sort(first)]
        remap = np.full(lab.max() + 1, -1, dtype=np.int64)
        remap[uniq] = np.arange(uniq.size)
        cluster_of[idx] = remap[sub]
        by = np.argsort(cluster_of[idx], kind="stable")
        bounds = np.concatenate([[0], np.cumsum(np.bincount(cluster_of[idx]))])
        for c in range(uniq.size):
            verts = idx[by[bounds[c] : bounds[c + 1]]]
            clusters.append(verts)
            diams.append(graph_diameter(g, verts, weak) if diameters else -1)
            cens.append(bool(np.any(g.degree[verts] < 2 * g.dim)))
    return WeaklyClosedClusters(
        k, weak, cluster_of, clusters, np.array(diams, dtype=np.int64), np.array(cens, dtype=bool)
    )


def weakly_closed_extensions(config: BondConfig, k: int) -> tuple[GapSet, np.ndarray]:
    """
    Components of the complement of the k-strongly open giant cluster.

    Returns the gap set (ids index the extensions) and the strongly open
    giant-cluster vertex mask.
    """
    strong = config.with_open(strongly_open_edges(config, k))
    lab = label_clusters(strong)
    # a lone vertex is never part of the strongly open cluster
    big = giant_cluster(lab)
    inside = giant_mask(lab, big)
    gs = _complement_components(config.graph, inside, diameters=False)
    return GapSet(gs.gaps, gs.gap_of, big), inside


def inner_k_boundary(region, k: int, graph: LatticeGraph) -> np.ndarray:
    """
    ``{x in region : d(x, graph - region) < k}`` as sorted vertex indices;
    ``region`` is a vertex index array or boolean mask.
    """
    mask = np.zeros(graph.n_vertices, dtype=bool)
    region = np.asarray(region)
    if region.dtype == bool:
        mask |= region
    else:
        mask[region] = True
    if not mask.any():
        raise ValueError("region is empty")
    if mask.all():
        raise ValueError("region is the whole graph")
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    dist = graph.bfs_distance(np.flatnonzero(~mask), limit=k)
    return np.flatnonzero(mask & (dist < k))


def is_connected(graph: LatticeGraph, vertices: np.ndarray, edge_mask: Optional[np.ndarray] = None) -> bool:
    """Whether the subgraph induced on ``vertices`` (edges in ``edge_mask``) is connected."""
    vertices = np.asarray(vertices)
    if vertices.size <= 1:
        return True
    inside = np.zeros(graph.n_vertices, dtype=bool)
    inside[vertices] = True
    m = inside[graph.edges[:, 0]] & inside[graph.edges[:, 1]]
    if edge_mask is not None:
        m &= edge_mask
    lab = label_components(graph, m).labels
    return bool(np.all(lab[vertices] == lab[vertices[0]]))


def diameter_survival(diameters: Iterable[int], n_max: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``P(diam > n)`` for ``n = 0..n_max``."""
    d = np.asarray(list(diameters) if not isinstance(diameters, np.ndarray) else diameters)
    if d.size == 0:
        return np.arange(1), np.zeros(1)
    n_max = int(d.max()) if n_max is None else n_max
    n = np.arange(n_max + 1)
    counts = np.bincount(d, minlength=n_max + 2)
    exceed = d.size - np.cumsum(counts)[: n_max + 1]
    return n, exceed / d.size


def write_gap_csv(fh, rows: Iterable[tuple]) -> None:
    """Rows of ``(sample id, gap diameter, censored flag)``."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["sample", "diameter", "censored"])
    for s, dm, c in rows:
        w.writerow([s, dm, int(bool(c))])
