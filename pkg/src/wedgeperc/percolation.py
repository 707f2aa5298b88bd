"""
Seeded Bernoulli bond and site percolation.

Every edge (vertex) gets a uniform number derived from a hash of
``(seed, lattice coordinates of its low endpoint, axis)``; it is open iff
that number is below ``p``. Consequently

* configurations do not depend on how the graph was enumerated,
* restricting a configuration to a subgraph equals sampling the subgraph,
* configurations at ``p1 <= p2`` with one seed are coupled monotonically.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import LatticeGraph

__all__ = [
    "BondConfig",
    "SiteConfig",
    "sample_bond",
    "sample_site",
    "edge_uniforms",
    "site_uniforms",
    "restrict",
    "dump_config",
    "load_config",
]

EDGE_ORDERING_VERSION = "lex-low-endpoint-axis-v1"
_MAGIC = {"bond": b"WEDGEPERC-BOND", "site": b"WEDGEPERC-SITE"}

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_BOND_TAG = np.uint64(0xB0D5EED5)
_SITE_TAG = np.uint64(0x517E5EED)


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _key_hash(coords: np.ndarray, tail: np.ndarray, tag: np.uint64) -> np.ndarray:
    with np.errstate(over="ignore"):
        h = np.full(coords.shape[0], tag, dtype=np.uint64)
        for a in range(coords.shape[1]):
            h = _mix(h ^ (coords[:, a].astype(np.int64).view(np.uint64) + _GOLDEN))
        return _mix(h ^ (tail.astype(np.uint64) + _GOLDEN))


def _to_uniform(key: np.ndarray, seed: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        s = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        z = _mix(key ^ s)
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _edge_key(graph: LatticeGraph) -> np.ndarray:
    # cached on the (immutable) graph instance
    key = graph.__dict__.get("_bond_key")
    if key is None:
        key = _key_hash(graph.coords[graph.edges[:, 0]], graph.axes, _BOND_TAG)
        graph.__dict__["_bond_key"] = key
    return key


def edge_uniforms(graph: LatticeGraph, seed: int) -> np.ndarray:
    """Uniform in [0, 1) per edge, keyed by lattice position and ``seed``."""
    return _to_uniform(_edge_key(graph), seed)


def site_uniforms(graph: LatticeGraph, seed: int) -> np.ndarray:
    k = _key_hash(graph.coords, np.zeros(graph.n_vertices, dtype=np.int64), _SITE_TAG)
    return _to_uniform(k, seed)


@dataclass(frozen=True, eq=False)
class BondConfig:
    """Open/closed state of every edge of ``graph``."""

    graph: LatticeGraph
    open: np.ndarray
    p: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        o = np.asarray(self.open, dtype=bool)
        if o.shape != (self.graph.n_edges,):
            raise ValueError(f"bit count {o.size} does not match edge count {self.graph.n_edges}")
        o.setflags(write=False)
        object.__setattr__(self, "open", o)

    @property
    def open_fraction(self) -> float:
        return float(self.open.mean()) if self.open.size else 0.0

    def with_open(self, mask) -> "BondConfig":
        return BondConfig(self.graph, mask, self.p, self.seed)


@dataclass(frozen=True, eq=False)
class SiteConfig:
    """Open/closed state of every vertex of ``graph``."""

    graph: LatticeGraph
    open: np.ndarray
    p: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        o = np.asarray(self.open, dtype=bool)
        if o.shape != (self.graph.n_vertices,):
            raise ValueError(f"bit count {o.size} does not match vertex count {self.graph.n_vertices}")
        o.setflags(write=False)
        object.__setattr__(self, "open", o)


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")


def sample_bond(graph: LatticeGraph, p: float, seed: int) -> BondConfig:
    _check_p(p)
    return BondConfig(graph, edge_uniforms(graph, seed) < p, p, seed)


def sample_site(graph: LatticeGraph, p: float, seed: int) -> SiteConfig:
    _check_p(p)
    return SiteConfig(graph, site_uniforms(graph, seed) < p, p, seed)


def restrict(ambient: BondConfig, A: LatticeGraph) -> BondConfig:
    """Bits of ``ambient`` on the edges of the subgraph ``A``."""
    amb = ambient.graph
    low = amb.index(A.coords[A.edges[:, 0]])
    ok = low >= 0
    eid = np.full(A.n_edges, -1, dtype=np.int64)
    eid[ok] = amb.edge_of[low[ok], A.axes[ok]]
    if np.any(eid < 0):
        raise ValueError("A is not a subgraph of the ambient graph")
    return BondConfig(A, ambient.open[eid], ambient.p, ambient.seed)


def _fingerprint(graph: LatticeGraph, kind: str) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(graph.coords).tobytes())
    if kind == "bond":
        h.update(np.ascontiguousarray(graph.edges).tobytes())
    return h.hexdigest()[:16]


def dump_config(cfg, fh) -> None:
    """
    Write a config as a textual header followed by a packed bitmap.

    The header holds ``key=value`` lines (dimension, bounding box, counts,
    ``p``, seed, ordering version, graph fingerprint) and ends with a blank
    line.
    """
    kind = "bond" if isinstance(cfg, BondConfig) else "site"
    g = cfg.graph
    lo, hi = g.coords.min(axis=0), g.coords.max(axis=0)
    header = [
        _MAGIC[kind].decode(),
        f"dim={g.dim}",
        f"box={','.join(map(str, lo))}:{','.join(map(str, hi))}",
        f"count={cfg.open.size}",
        f"p={cfg.p!r}",
        f"seed={cfg.seed}",
        f"ordering={EDGE_ORDERING_VERSION}",
        f"graph={_fingerprint(g, kind)}",
    ]
    fh.write(("\n".join(header) + "\n\n").encode())
    fh.write(np.packbits(cfg.open).tobytes())


def load_config(fh, graph: LatticeGraph):
    """Read a config written by :func:`dump_config` onto ``graph``."""
    if isinstance(fh, (bytes, bytearray)):
        fh = io.BytesIO(fh)
    lines = []
    while True:
        line = fh.readline()
        if not line:
            raise ValueError("truncated header")
        line = line.rstrip(b"\n")
        if not line:
            break
        lines.append(line.decode())
    magic = lines[0].encode()
    kinds = {v: k for k, v in _MAGIC.items()}
    if magic not in kinds:
        raise ValueError(f"bad magic {lines[0]!r}")
    kind = kinds[magic]
    meta = dict(l.split("=", 1) for l in lines[1:])
    if meta["ordering"] != EDGE_ORDERING_VERSION:
        raise ValueError(f"unsupported ordering {meta['ordering']!r}")
    if meta["graph"] != _fingerprint(graph, kind):
        raise ValueError("config was written for a different graph")
    count = int(meta["count"])
    bits = np.unpackbits(np.frombuffer(fh.read(), dtype=np.uint8), count=count).astype(bool)
    seed = None if meta["seed"] == "None" else int(meta["seed"])
    cls = BondConfig if kind == "bond" else SiteConfig
    return cls(graph, bits, float(meta["p"]), seed)
