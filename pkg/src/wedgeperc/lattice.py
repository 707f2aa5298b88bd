"""
Lattice geometry: gauge functions, wedge regions, induced subgraphs of Z^d
and C-cores.

Gauges are tabulated arrays ``h[j]`` for ``j = 0..j_max``; closed forms are
materialized at construction. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

__all__ = [
    "GaugeFunction",
    "SeriesTail",
    "Convergence",
    "RegionSpec",
    "LatticeGraph",
    "induced_graph",
    "box_graph",
    "cube_graph",
    "lyons_partial_sum",
    "hm_partial_sum",
    "lyons_terms",
    "hm_terms",
    "series_tail",
    "classify_convergence",
    "classify_gauge",
    "regularize_gauge",
    "shifted_half_gauge",
    "core_containment_violations",
    "c_core",
    "load_gauge",
]

# neighbour status codes stored per (vertex, direction)
PRESENT, GENUINE, TRUNCATION = 0, 1, 2


class RangeError(ValueError):
    """Requested index lies outside the tabulated range of a gauge."""


# ---------------------------------------------------------------------------
# gauges
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugeFunction:
    """
    Tabulated positive, nondecreasing height function ``h(j)``.

    Parameters
    ----------
    values : array_like
        ``h(0), h(1), ..., h(j_max)``.
    kind : str
        One of ``constant``, ``power``, ``log_power`` or ``custom``.
    params : dict
        Parameters of the closed form (used by :func:`series_tail`).
    """

    values: np.ndarray
    kind: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("gauge values must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            bad = int(np.flatnonzero(~(v > 0))[0]) if np.any(~(v > 0)) else -1
            raise ValueError(f"gauge must be positive (h({bad}) = {v[bad]})")
        dec = np.flatnonzero(np.diff(v) < 0)
        if dec.size:
            j = int(dec[0])
            raise ValueError(f"gauge must be nondecreasing (h({j + 1}) < h({j}))")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def j_max(self) -> int:
        return self.values.size - 1

    def __call__(self, j):
        j = np.asarray(j)
        if np.any(j < 0) or np.any(j > self.j_max):
            raise RangeError(f"index outside tabulated range [0, {self.j_max}]")
        return self.values[j]

    @classmethod
    def constant(cls, c: float, j_max: int) -> "GaugeFunction":
        return cls(np.full(j_max + 1, float(c)), "constant", {"c": float(c)})

    @classmethod
    def power(cls, a: float, j_max: int, c: float = 1.0) -> "GaugeFunction":
        """``h(j) = c * max(j, 1)**a`` (the ``max`` keeps ``h(0) > 0``)."""
        j = np.maximum(np.arange(j_max + 1), 1).astype(float)
        return cls(c * j**a, "power", {"a": float(a), "c": float(c)})

    @classmethod
    def log_power(cls, r: float, j_max: int, offset: float = 2.0, c: float = 1.0) -> "GaugeFunction":
        """``h(j) = c * log(j + offset)**r``."""
        if offset <= 1:
            raise ValueError("offset must exceed 1 so that h(0) > 0")
        j = np.arange(j_max + 1, dtype=float)
        vals = c * np.log(j + offset) ** r
        return cls(vals, "log_power", {"r": float(r), "offset": float(offset), "c": float(c)})


def load_gauge(spec: Mapping) -> GaugeFunction:
    """
    Build a gauge from a config mapping, e.g. ``{"kind": "log_power", "r": 2,
    "j_max": 10000}``. Custom gauges give ``values`` explicitly.
    """
    kind = spec.get("kind", "custom")
    if kind == "custom":
        return GaugeFunction(np.asarray(spec["values"], dtype=float))
    j_max = int(spec["j_max"])
    if kind == "constant":
        return GaugeFunction.constant(spec.get("c", 1.0), j_max)
    if kind == "power":
        return GaugeFunction.power(spec["a"], j_max, c=spec.get("c", 1.0))
    if kind == "log_power":
        return GaugeFunction.log_power(
            spec["r"], j_max, offset=spec.get("offset", 2.0), c=spec.get("c", 1.0)
        )
    raise ValueError(f"unknown gauge kind {kind!r}")


def _check_J(h: GaugeFunction, J: int) -> None:
    if J < 1 or J > h.j_max:
        raise RangeError(f"J={J} outside [1, {h.j_max}]")


def lyons_terms(h: GaugeFunction, J: int) -> np.ndarray:
    _check_J(h, J)
    j = np.arange(1, J + 1, dtype=float)
    return 1.0 / (j * h.values[1 : J + 1])


def hm_terms(h: GaugeFunction, J: int) -> np.ndarray:
    _check_J(h, J)
    j = np.arange(1, J + 1, dtype=float)
    return 1.0 / (j * np.sqrt(h.values[1 : J + 1]))


def lyons_partial_sum(h: GaugeFunction, J: int) -> float:
    """Sum of ``1 / (j h(j))`` for ``j = 1..J``."""
    return float(np.sum(lyons_terms(h, J)))


def hm_partial_sum(h: GaugeFunction, J: int) -> float:
    """Sum of ``1 / (j sqrt(h(j)))`` for ``j = 1..J``."""
    return float(np.sum(hm_terms(h, J)))


class Convergence(str, Enum):
    CONVERGENT = "convergent"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SeriesTail:
    """
    Certified bounds on the tail ``sum_{j > J} t(j)`` of a series.

    ``upper(J)`` and ``lower(J)`` bound the full infinite tail; ``lower(J)``
    is ``inf`` exactly when the comparison integral diverges.
    """

    upper: Callable[[int], float]
    lower: Callable[[int], float]
    min_J: int = 1


def series_tail(h: GaugeFunction, q: float = 1.0) -> Optional[SeriesTail]:
    """
    Integral-comparison tail bounds for ``sum 1 / (j h(j)**q)``.

    ``q = 1`` is the wedge transience sum and ``q = 1/2`` the square-root
    variant. Returns ``None`` for custom gauges, which have no closed form.
    """
    p = h.params
    if h.kind in ("constant", "power"):
        a = 0.0 if h.kind == "constant" else p["a"]
        scale = p["c"] ** (-q)
        s = a * q

        def upper(J):
            return scale * J ** (-s) / s if s > 0 else math.inf

        def lower(J):
            return scale * (J + 1) ** (-s) / s if s > 0 else math.inf

        return SeriesTail(upper, lower, 1)

    if h.kind == "log_power":
        r, off, c = p["r"], p["offset"], p["c"]
        scale = c ** (-q)
        s = r * q

        # upper: log(j + off) >= log j; lower: log(j + off) <= log j + log 2 for j >= off
        def upper(J):
            return scale * math.log(J) ** (1 - s) / (s - 1) if s > 1 else math.inf

        def lower(J):
            if s <= 1:
                return math.inf
            return scale * (math.log(J + 1) + math.log(2)) ** (1 - s) / (s - 1)

        return SeriesTail(upper, lower, max(2, math.ceil(off)))

    return None


def classify_convergence(
    partial_sums: Sequence[float], tail: Optional[SeriesTail], tol: float = 1.0
) -> Convergence:
    """
    Decide convergence of a positive series from its partial sums and a
    certified tail oracle.

    Convergent only when the certified upper tail bound beyond the last
    partial sum is below ``tol``; divergent only when the certified lower
    tail bound is infinite. Partial sums alone never establish divergence.
    """
    J = len(partial_sums)
    if tail is None or J < tail.min_J:
        return Convergence.INCONCLUSIVE
    if math.isinf(tail.lower(J)):
        return Convergence.DIVERGENT
    if tail.upper(J) < tol:
        return Convergence.CONVERGENT
    return Convergence.INCONCLUSIVE


@dataclass(frozen=True)
class GaugeClassification:
    criterion: str
    J: int
    partial_sum: float
    tail_lower: float
    tail_upper: float
    verdict: Convergence


def classify_gauge(
    h: GaugeFunction, criterion: str = "lyons", J: Optional[int] = None, tol: float = 1.0
) -> GaugeClassification:
    """Run ``classify_convergence`` on the wedge (``lyons``) or square-root (``hm``) sum."""
    J = h.j_max if J is None else J
    if criterion == "lyons":
        terms, q = lyons_terms(h, J), 1.0
    elif criterion == "hm":
        terms, q = hm_terms(h, J), 0.5
    else:
        raise ValueError(f"unknown criterion {criterion!r}")
    sums = np.cumsum(terms)
    tail = series_tail(h, q)
    verdict = classify_convergence(sums, tail, tol)
    lo = tail.lower(J) if tail is not None and J >= tail.min_J else math.nan
    hi = tail.upper(J) if tail is not None and J >= tail.min_J else math.nan
    return GaugeClassification(criterion, J, float(sums[-1]), lo, hi, verdict)


def regularize_gauge(h: GaugeFunction) -> GaugeFunction:
    """Unit-Lipschitz minorant: ``f(0) = h(0)``, ``f(n+1) = min(h(n+1), f(n) + 1)``."""
    vals = h.values.tolist()
    out = [vals[0]]
    for v in vals[1:]:
        out.append(min(v, out[-1] + 1.0))
    return GaugeFunction(np.array(out), "custom")


def shifted_half_gauge(h: GaugeFunction, C: float) -> tuple[int, GaugeFunction]:
    """
    Smallest ``x0`` with ``h(x) > 4 C log x`` for every tabulated ``x > x0``,
    and the half gauge ``g(x) = h(x + x0) / 2``.
    """
    x = np.arange(1, h.j_max + 1, dtype=float)
    fails = np.flatnonzero(~(h.values[1:] > 4.0 * C * np.log(x)))
    x0 = int(fails[-1]) + 1 if fails.size else 0
    if x0 >= h.j_max:
        raise RangeError(f"no x0 within tabulated range [0, {h.j_max}] for C={C}")
    g = GaugeFunction(h.values[x0:] / 2.0, "custom", {"x0": x0, "C": float(C)})
    return x0, g


# ---------------------------------------------------------------------------
# regions and graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegionSpec:
    """
    A subset of Z^d: ``box`` (``[-m, m]^d``), ``wedge`` (``x >= 0`` and
    ``|z| <= h(x)``), ``subwedge`` (wedge with ``|y| <= x``) or
    ``halfspace`` (``x >= 0``). ``x`` is coordinate 0, ``z`` the last
    coordinate and ``y`` coordinate 1.
    """

    dim: int
    shape: str
    m: Optional[int] = None
    gauge: Optional[GaugeFunction] = None
    anchor: tuple = ()

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if self.shape not in ("box", "wedge", "subwedge", "halfspace"):
            raise ValueError(f"unknown region shape {self.shape!r}")
        if self.shape in ("wedge", "subwedge") and self.gauge is None:
            raise ValueError(f"{self.shape} needs a gauge")
        if self.shape == "subwedge" and self.dim < 3:
            raise ValueError("subwedge needs dim >= 3")
        if self.shape == "box" and self.m is None:
            raise ValueError("box needs m")
        if not self.anchor:
            object.__setattr__(self, "anchor", (0,) * self.dim)

    def contains(self, pts: np.ndarray, strict: bool = True) -> np.ndarray:
        """
        Membership of the untruncated region for integer points ``(k, d)``.

        With ``strict=False`` points beyond the tabulated gauge are judged
        against ``h(j_max)`` instead of raising.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        if self.shape == "box":
            return np.all(np.abs(pts - np.asarray(self.anchor)) <= self.m, axis=1)
        x = pts[:, 0]
        ok = x >= 0
        if self.shape == "halfspace":
            return ok
        h = self.gauge
        xi = np.clip(x, 0, h.j_max)
        if strict and np.any(ok & (x > h.j_max)):
            raise RangeError("wedge point beyond tabulated gauge range")
        ok &= np.abs(pts[:, -1]) <= h.values[xi]
        if self.shape == "subwedge":
            ok &= np.abs(pts[:, 1]) <= x
        return ok

    def graph(self, m: Optional[int] = None) -> "LatticeGraph":
        """Induced graph of the region inside the truncation box ``[-m, m]^d``."""
        m = self.m if m is None else m
        if m is None:
            raise ValueError("truncation size m required")
        a = np.asarray(self.anchor, dtype=np.int64)
        if self.shape == "box":
            mm = min(m, self.m)
            return box_graph(self.dim, mm, center=a)
        ranges = [np.arange(-m, m + 1)] * self.dim
        ranges[0] = np.arange(0, m + 1)
        if self.shape != "halfspace":
            hz = int(math.floor(float(self.gauge(min(m, self.gauge.j_max)))))
            ranges[-1] = np.arange(-min(m, hz), min(m, hz) + 1)
        grid = np.stack(np.meshgrid(*ranges, indexing="ij"), -1).reshape(-1, self.dim)
        pts = grid[self.contains(grid)]
        lo, hi = np.full(self.dim, -m), np.full(self.dim, m)
        return induced_graph(pts, inside=lambda q: self.contains(q, strict=False), box=(lo, hi))


@dataclass(frozen=True, eq=False)
class LatticeGraph:
    """
    Finite induced subgraph of Z^d.

    Vertices are stored in lexicographic order of their coordinates, which
    is the canonical vertex order; vertex index = canonical rank. Edges are
    stored as ``(low, high)`` with ``high = low + e_axis``, sorted by
    ``(low, axis)``.

    ``status[v, 2a]`` / ``status[v, 2a+1]`` describe the ``+e_a`` / ``-e_a``
    neighbour: present, missing because it is outside the region (genuine
    boundary), or missing because of the truncation box.
    """

    coords: np.ndarray
    edges: np.ndarray
    axes: np.ndarray
    nbr: np.ndarray
    status: np.ndarray

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def boundary(self) -> np.ndarray:
        """Vertices with a lattice neighbour outside the region."""
        return np.any(self.status == GENUINE, axis=1)

    @cached_property
    def truncated(self) -> np.ndarray:
        """Vertices adjacent to the truncation faces."""
        return np.any(self.status == TRUNCATION, axis=1)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.sum(self.nbr >= 0, axis=1)

    @cached_property
    def _lut(self):
        lo = self.coords.min(axis=0)
        shape = tuple(self.coords.max(axis=0) - lo + 1)
        lut = np.full(shape, -1, dtype=np.int64)
        lut[tuple((self.coords - lo).T)] = np.arange(self.n_vertices)
        return lo, lut

    def index(self, pts) -> np.ndarray:
        """Vertex indices of integer points; ``-1`` where absent."""
        pts = np.atleast_2d(np.asarray(pts, dtype=np.int64))
        lo, lut = self._lut
        rel = pts - lo
        ok = np.all((rel >= 0) & (rel < np.array(lut.shape)), axis=1)
        out = np.full(len(pts), -1, dtype=np.int64)
        out[ok] = lut[tuple(rel[ok].T)]
        return out

    @cached_property
    def edge_of(self) -> np.ndarray:
        """``edge_of[v, a]`` is the edge from ``v`` to ``v + e_a`` or ``-1``."""
        out = np.full((self.n_vertices, self.dim), -1, dtype=np.int64)
        out[self.edges[:, 0], self.axes] = np.arange(self.n_edges)
        return out

    def edge_ids(self, u, v) -> np.ndarray:
        """Edge index of each vertex pair ``(u[i], v[i])``; ``-1`` if not adjacent."""
        u = np.atleast_1d(np.asarray(u, dtype=np.int64))
        v = np.atleast_1d(np.asarray(v, dtype=np.int64))
        diff = self.coords[v] - self.coords[u]
        l1 = np.abs(diff).sum(axis=1)
        axis = np.argmax(np.abs(diff), axis=1)
        step = diff[np.arange(len(u)), axis]
        low = np.where(step > 0, u, v)
        out = self.edge_of[low, axis]
        out[l1 != 1] = -1
        return out

    def matrix(self, edge_mask: Optional[np.ndarray] = None, weights=None) -> sp.csr_matrix:
        """Symmetric sparse adjacency restricted to ``edge_mask``."""
        e = self.edges if edge_mask is None else self.edges[edge_mask]
        w = np.ones(len(e)) if weights is None else np.asarray(weights, dtype=float)
        n = self.n_vertices
        a = sp.coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
            shape=(n, n),
        )
        return a.tocsr()

    def neighbor_lists(self, edge_mask: Optional[np.ndarray] = None) -> list[list[int]]:
        """Python adjacency lists in canonical order (for small BFS work)."""
        a = self.matrix(edge_mask)
        a.sort_indices()
        ind, ptr = a.indices.tolist(), a.indptr.tolist()
        return [ind[ptr[i] : ptr[i + 1]] for i in range(self.n_vertices)]

    def boundary_mask(self, include_truncation: bool = False) -> np.ndarray:
        return self.boundary | self.truncated if include_truncation else self.boundary.copy()

    def subgraph(self, mask: np.ndarray) -> "LatticeGraph":
        """Induced subgraph on ``mask``; dropped neighbours become genuine boundary."""
        mask = np.asarray(mask, dtype=bool)
        new_idx = np.full(self.n_vertices, -1, dtype=np.int64)
        new_idx[mask] = np.arange(mask.sum())
        nbr = self.nbr[mask]
        status = self.status[mask].copy()
        kept = np.where(nbr >= 0, new_idx[np.maximum(nbr, 0)], -1)
        status[(nbr >= 0) & (kept < 0)] = GENUINE
        keep_e = mask[self.edges[:, 0]] & mask[self.edges[:, 1]]
        return LatticeGraph(
            self.coords[mask], new_idx[self.edges[keep_e]], self.axes[keep_e], kept, status
        )

    def l1_from(self, v: int) -> np.ndarray:
        return np.abs(self.coords - self.coords[v]).sum(axis=1)

    def bfs_distance(self, sources, edge_mask: Optional[np.ndarray] = None, limit=np.inf) -> np.ndarray:
        """Multi-source graph distance (``inf`` where unreachable or beyond ``limit``)."""
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if sources.size == 0:
            return np.full(self.n_vertices, np.inf)
        return csgraph.dijkstra(
            self.matrix(edge_mask), directed=False, indices=sources,
            unweighted=True, min_only=True, limit=limit,
        )


def induced_graph(
    pts,
    inside: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    box: Optional[tuple] = None,
) -> LatticeGraph:
    """
    Build the induced subgraph of Z^d on the integer points ``pts``.

    A missing lattice neighbour counts as truncation when it lies outside
    ``box`` but ``inside`` accepts it; otherwise it is genuine boundary.
    """
    pts = np.unique(np.atleast_2d(np.asarray(pts, dtype=np.int64)), axis=0)
    n, d = pts.shape
    lo = pts.min(axis=0)
    shape = pts.max(axis=0) - lo + 1
    lut = np.full(tuple(shape), -1, dtype=np.int64)
    lut[tuple((pts - lo).T)] = np.arange(n)

    nbr = np.full((n, 2 * d), -1, dtype=np.int64)
    status = np.zeros((n, 2 * d), dtype=np.int8)
    e_low, e_high, e_ax = [], [], []
    for a in range(d):
        for k, step in ((2 * a, 1), (2 * a + 1, -1)):
            q = pts.copy()
            q[:, a] += step
            rel = q - lo
            ok = np.all((rel >= 0) & (rel < shape), axis=1)
            idx = np.full(n, -1, dtype=np.int64)
            idx[ok] = lut[tuple(rel[ok].T)]
            nbr[:, k] = idx
            miss = idx < 0
            st = np.full(n, GENUINE, dtype=np.int8)
            if inside is not None and box is not None and miss.any():
                qm = q[miss]
                outside_box = np.any((qm < box[0]) | (qm > box[1]), axis=1)
                cand = np.flatnonzero(outside_box)
                if cand.size:
                    in_region = np.zeros(len(qm), dtype=bool)
                    in_region[cand] = inside(qm[cand])
                    st_m = np.where(outside_box & in_region, TRUNCATION, GENUINE)
                    st[miss] = st_m
            status[:, k] = np.where(miss, st, PRESENT)
            if step == 1:
                src = np.flatnonzero(~miss)
                e_low.append(src)
                e_high.append(idx[src])
                e_ax.append(np.full(src.size, a, dtype=np.int8))
    low = np.concatenate(e_low)
    high = np.concatenate(e_high)
    ax = np.concatenate(e_ax)
    order = np.lexsort((ax, low))
    edges = np.stack([low[order], high[order]], axis=1)
    return LatticeGraph(pts, edges, ax[order], nbr, status)


def box_graph(dim: int, m: int, center=None) -> LatticeGraph:
    """``Λ_m = center + [-m, m]^dim``; its faces are genuine boundary."""
    c = np.zeros(dim, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64)
    r = np.arange(-m, m + 1)
    grid = np.stack(np.meshgrid(*([r] * dim), indexing="ij"), -1).reshape(-1, dim)
    return induced_graph(grid + c)


def cube_graph(dim: int, L: int) -> LatticeGraph:
    """``{0, ..., L-1}^dim``, the box of side ``L`` anchored at the origin."""
    r = np.arange(L)
    grid = np.stack(np.meshgrid(*([r] * dim), indexing="ij"), -1).reshape(-1, dim)
    return induced_graph(grid)


# ---------------------------------------------------------------------------
# cores
# ---------------------------------------------------------------------------


def c_core(
    A: LatticeGraph, C: float, v0: int, include_truncation: bool = False
) -> tuple[np.ndarray, LatticeGraph]:
    """
    The C-core of ``A`` relative to base vertex ``v0``.

    Keeps ``v`` with ``d(v, ∂A) > C log max(d(v, v0), 1)``, where ``d(v, v0)``
    is the Z^d (L1) distance and ``d(v, ∂A)`` is found by multi-source BFS
    from the boundary. Truncation faces join ``∂A`` only when
    ``include_truncation`` is set.

    Returns
    -------
    mask : ndarray of bool
        Core membership per vertex of ``A``.
    core : LatticeGraph
        The induced subgraph.
    """
    if not 0 <= v0 < A.n_vertices:
        raise ValueError(f"v0={v0} is not a vertex of A")
    dist_b = A.bfs_distance(np.flatnonzero(A.boundary_mask(include_truncation)))
    logd = np.log(np.maximum(A.l1_from(v0), 1).astype(float))
    with np.errstate(invalid="ignore"):
        thresh = np.where(logd > 0, C * logd, 0.0)
    mask = dist_b > thresh
    return mask, A.subgraph(mask)


def core_containment_violations(
    h: GaugeFunction, C: float, extent: int, x0: Optional[int] = None
) -> np.ndarray:
    """
    Points of the translated sub-wedge ``V_g + (x0, 0, 0)`` (``g`` the half
    gauge) with ``x0 <= x <= x0 + extent`` and ``|y| <= extent`` that fail the
    C-core predicate of the 3-d wedge ``W_h`` with ``v0`` at the origin.

    Boundary distances are exact: the wedge is invariant under ``y``
    translation, so they are computed by BFS on the 2-d ``(x, z)`` section,
    truncated far enough beyond ``x0 + extent`` not to matter.
    """
    if x0 is None:
        x0, _ = shifted_half_gauge(h, C)
    x_hi = x0 + extent
    if x_hi > h.j_max:
        raise RangeError("extent exceeds tabulated gauge range")
    margin = int(math.floor(h.values[x_hi])) + 2
    X = min(h.j_max, x_hi + margin)
    section = RegionSpec(2, "wedge", gauge=h)
    zmax = int(math.floor(h.values[X]))
    xs = np.arange(0, X + 1)
    pts = [np.stack([np.full(2 * int(math.floor(h.values[x])) + 1, x),
                     np.arange(-int(math.floor(h.values[x])), int(math.floor(h.values[x])) + 1)], 1)
           for x in xs]
    G = induced_graph(np.concatenate(pts), inside=lambda q: section.contains(q, strict=False),
                      box=(np.array([0, -zmax]), np.array([X, zmax])))
    dist_b = G.bfs_distance(np.flatnonzero(G.boundary))

    bad = []
    for x in range(x0, x_hi + 1):
        zlim = int(math.floor(h.values[x] / 2.0))
        z = np.arange(-zlim, zlim + 1)
        db = dist_b[G.index(np.stack([np.full(z.size, x), z], 1))]
        ylim = min(x - x0, extent)
        y = np.arange(-ylim, ylim + 1)
        Y, Z = np.meshgrid(y, z, indexing="ij")
        DB = np.broadcast_to(db, Y.shape)
        l1 = x + np.abs(Y) + np.abs(Z)
        logd = np.log(np.maximum(l1, 1).astype(float))
        thresh = np.where(logd > 0, C * logd, 0.0)
        fail = ~(DB > thresh)
        if fail.any():
            bad.append(np.stack([np.full(fail.sum(), x), Y[fail], Z[fail]], 1))
    return np.concatenate(bad) if bad else np.empty((0, 3), dtype=np.int64)
