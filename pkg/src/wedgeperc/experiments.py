"""
Reproducible experiment driver.

An experiment is described by a TOML file; running it produces one output
directory with a copy of the config, CSV tables, a JSON summary and a
manifest. Replicas (seeds) run on a thread pool and are collected in seed
order, so the tables do not depend on the thread count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .bridging import energy_comparison, transport_measure
from .chemical import ap_pairs, ap_summarize
from .clusters import gaps, giant_cluster, giant_mask, label_clusters, weakly_closed_clusters
from .flows import flow_to_path_measure, psi_gauge, quadratic_gauge, random_outward_measure
from .lattice import (
    RegionSpec,
    box_graph,
    c_core,
    classify_gauge,
    core_containment_violations,
    cube_graph,
    load_gauge,
    regularize_gauge,
    shifted_half_gauge,
)
from .percolation import EDGE_ORDERING_VERSION, dump_config, sample_bond
from .renorm import block_event, coarse_sites, lift_check, renormalized_config
from .resistance import effective_resistance, min_energy_flow, resistance_scaling
from .stats import fit_log_linear_tail, wilson_interval

__all__ = ["ConfigError", "ExperimentConfig", "RunManifest", "load_config", "run", "COMMANDS"]

COMMANDS = ("gauge", "sample", "clusters", "apdist", "core", "flow", "bridge", "resist", "renorm")


class ConfigError(ValueError):
    """Invalid experiment config; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    command: str
    seeds: list
    p: list
    region: dict
    gauge: dict
    sizes: list
    strategy: str
    tol: dict
    params: dict
    out: Optional[str] = None
    raw: bytes = b""

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.raw).hexdigest()


@dataclass
class RunManifest:
    config_sha256: str
    version: str
    command: str
    seeds: list
    threads: int
    wall_time_s: float
    residuals: dict
    artifacts: dict
    log_base: str = "e"
    edge_ordering: str = EDGE_ORDERING_VERSION

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _seeds(v, path="seeds") -> list:
    if isinstance(v, dict):
        try:
            start, count = int(v.get("start", 0)), int(v["count"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(path, "expected {start, count}") from None
        if count < 1:
            raise ConfigError(f"{path}.count", "must be positive")
        return list(range(start, start + count))
    if isinstance(v, int):
        return [v]
    if isinstance(v, list) and v and all(isinstance(s, int) for s in v):
        return list(v)
    raise ConfigError(path, "expected an integer, a list of integers or {start, count}")


def _floats(v, path) -> list:
    vals = v if isinstance(v, list) else [v]
    try:
        out = [float(x) for x in vals]
    except (TypeError, ValueError):
        raise ConfigError(path, "expected numbers") from None
    return out


def parse_config(data: dict, raw: bytes = b"", command: Optional[str] = None) -> ExperimentConfig:
    cmd = data.get("command", command)
    if command is not None and cmd != command:
        raise ConfigError("command", f"config is for {cmd!r}, not {command!r}")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}")
    p = _floats(data.get("p", 1.0), "p")
    for i, x in enumerate(p):
        if not 0.0 <= x <= 1.0:
            raise ConfigError(f"p[{i}]", "must lie in [0, 1]")
    sizes = data.get("sizes", [])
    if not isinstance(sizes, list) or not all(isinstance(s, int) and s > 0 for s in sizes):
        raise ConfigError("sizes", "expected a list of positive integers")
    region = data.get("region", {})
    if not isinstance(region, dict):
        raise ConfigError("region", "expected a table")
    gauge = data.get("gauge", {})
    if not isinstance(gauge, dict):
        raise ConfigError("gauge", "expected a table")
    tol = data.get("tol", {})
    if not isinstance(tol, dict):
        raise ConfigError("tol", "expected a table")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "expected a table")
    known = {"command", "seeds", "p", "region", "gauge", "sizes", "strategy", "tol", "params", "out"}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(extra[0], "unknown key")
    return ExperimentConfig(
        command=cmd,
        seeds=_seeds(data.get("seeds", 0)),
        p=p,
        region=region,
        gauge=gauge,
        sizes=list(sizes),
        strategy=str(data.get("strategy", "shortest")),
        tol=tol,
        params=params,
        out=data.get("out"),
        raw=raw,
    )


def load_config(path, command: Optional[str] = None) -> ExperimentConfig:
    raw = Path(path).read_bytes()
    try:
        data = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", str(exc)) from None
    return parse_config(data, raw, command)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


@dataclass
class Output:
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    summary: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    blobs: dict = field(default_factory=dict)
    exit_code: int = 0


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (bool, np.bool_)):
        return int(bool(v))
    return v


def _csv(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue().encode()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        # strict JSON has no nan/inf
        return None if math.isnan(x) else (repr(x) if math.isinf(x) else x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _region(cfg: ExperimentConfig) -> RegionSpec:
    r = cfg.region
    try:
        dim = int(r.get("dim", 2))
        shape = r.get("shape", "box")
        gauge = load_gauge(r["gauge"]) if "gauge" in r else (load_gauge(cfg.gauge) if cfg.gauge else None)
        m = r.get("m")
        return RegionSpec(dim, shape, m, gauge, tuple(r.get("anchor", ())))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("region", str(exc)) from None


def _graph(cfg: ExperimentConfig, size: Optional[int] = None):
    """Graph of the configured region; ``shape = "cube"`` means ``{0..L-1}^d``."""
    r = cfg.region
    shape = r.get("shape", "box")
    dim = int(r.get("dim", 2))
    if shape == "cube":
        L = size if size is not None else r.get("side")
        if L is None:
            raise ConfigError("region.side", "cube needs a side length")
        return cube_graph(dim, int(L))
    if shape == "box":
        m = size if size is not None else r.get("m")
        if m is None:
            raise ConfigError("region.m", "box size required (or give sizes)")
        return box_graph(dim, int(m), center=r.get("anchor"))
    spec = _region(cfg)
    m = size if size is not None else spec.m
    if m is None:
        raise ConfigError("region.m", "truncation size required (or give sizes)")
    return spec.graph(int(m))


def _center_vertex(graph, mask=None) -> int:
    """Vertex closest (L1, then canonical order) to the centre of the bounding box."""
    c = (graph.coords.min(axis=0) + graph.coords.max(axis=0)) // 2
    d = np.abs(graph.coords - c).sum(axis=1).astype(float)
    if mask is not None:
        d[~mask] = np.inf
    return int(np.argmin(d))


def _warm(graph) -> None:
    # fill lazily cached graph data before sharing across threads
    graph.edge_of, graph._lut, graph.degree, graph.boundary, graph.truncated
    sample_bond(graph, 0.5, 0)


def _map(fn: Callable, items, threads: int) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gauge(cfg: ExperimentConfig, threads: int) -> Output:
    specs = cfg.params.get("gauges") or ([cfg.gauge] if cfg.gauge else None)
    if not specs:
        raise ConfigError("params.gauges", "at least one gauge spec required")
    tol = float(cfg.tol.get("classify", 1.0))
    rows, summary = [], {}
    for i, spec in enumerate(specs):
        try:
            h = load_gauge(spec)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"params.gauges[{i}]", str(exc)) from None
        label = spec.get("label", f"{h.kind}:{json.dumps(h.params, sort_keys=True)}")
        for crit in ("lyons", "hm"):
            c = classify_gauge(h, crit, tol=tol)
            rows.append((label, crit, c.J, c.partial_sum, c.tail_lower, c.tail_upper, c.verdict.value))
            summary.setdefault(label, {})[crit] = c.verdict.value
    return Output({"gauge": (["gauge", "criterion", "J", "partial_sum", "tail_lower", "tail_upper", "verdict"], rows)},
                  summary)


def cmd_sample(cfg: ExperimentConfig, threads: int) -> Output:
    g = _graph(cfg, cfg.sizes[0] if cfg.sizes else None)
    _warm(g)
    jobs = [(p, s) for p in cfg.p for s in cfg.seeds]

    def one(job):
        p, s = job
        c = sample_bond(g, p, s)
        lab = label_clusters(c)
        gid = giant_cluster(lab)
        buf = io.BytesIO()
        dump_config(c, buf)
        size = int(lab.sizes[gid]) if gid is not None else 0
        return (p, s, g.n_vertices, g.n_edges, c.open_fraction, size), buf.getvalue()

    res = _map(one, jobs, threads)
    blobs = {f"configs/p{p!r}_seed{s}.bin": b for (p, s), (_, b) in zip(jobs, res)}
    return Output({"sample": (["p", "seed", "vertices", "edges", "open_fraction", "giant_size"], [r for r, _ in res])},
                  {"samples": len(res)}, blobs=blobs)


def cmd_clusters(cfg: ExperimentConfig, threads: int) -> Output:
    g = _graph(cfg, cfg.sizes[0] if cfg.sizes else None)
    _warm(g)
    k = int(cfg.params.get("k", 0))
    jobs = [(p, s) for p in cfg.p for s in cfg.seeds]

    def one(job):
        p, s = job
        c = sample_bond(g, p, s)
        lab = label_clusters(c)
        gs = gaps(c, giant_cluster(lab), lab)
        rows = [(p, s, gp.id, gp.size, gp.diameter, gp.censored) for gp in gs]
        wrows = []
        if k > 0:
            wc = weakly_closed_clusters(c, k)
            wrows = [(p, s, i, len(v), int(d), bool(ce)) for i, (v, d, ce) in
                     enumerate(zip(wc.clusters, wc.diameters, wc.censored))]
        return rows, wrows

    res = _map(one, jobs, threads)
    rows = [r for a, _ in res for r in a]
    wrows = [r for _, b in res for r in b]
    summary = {}
    for p in cfg.p:
        d = np.array([r[4] for r in rows if r[0] == p and not r[5]])
        fit = fit_log_linear_tail(d, min_count=int(cfg.params.get("min_count", 5)))
        summary[repr(p)] = {"gaps": int(d.size), "gamma_hat": fit.rate, "ci": [fit.ci_low, fit.ci_high],
                            "ci_excludes_zero": fit.ci_excludes_zero}
    header = ["p", "seed", "gap", "size", "diameter", "censored"]
    tables = {"gaps": (header, rows)}
    if k > 0:
        tables["weakly_closed"] = (["p", "seed", "cluster", "size", "diameter", "censored"], wrows)
    return Output(tables, summary)


def cmd_apdist(cfg: ExperimentConfig, threads: int) -> Output:
    g = _graph(cfg, cfg.sizes[0] if cfg.sizes else None)
    _warm(g)
    pairs = int(cfg.params.get("pairs", 1000))
    sources = int(cfg.params.get("sources", 20))
    factor = float(cfg.params.get("factor", 3.0))
    quant = float(cfg.params.get("quantile", 0.99))
    per_seed = max(1, math.ceil(pairs / len(cfg.seeds)))
    rows, summary = [], {}
    for p in cfg.p:
        res = _map(lambda s: ap_pairs(p, g, s, per_seed, sources), cfg.seeds, threads)
        pr = [(p,) + r for rs in res for r in rs][:pairs]
        rows.extend(pr)
        ap = ap_summarize([r[1:] for r in pr], quantile=quant)
        s = ap.summary()
        s["fraction_exceeding"] = {"factor": factor, "value": ap.fraction_exceeding(factor)}
        summary[repr(p)] = s
    return Output({"pairs": (["p", "seed", "v", "w", "L1", "D"], rows)}, summary)


def cmd_core(cfg: ExperimentConfig, threads: int) -> Output:
    spec = _region(cfg)
    Cs = _floats(cfg.params.get("C", [1.0]), "params.C")
    sizes = cfg.sizes or [spec.m]
    extent = int(cfg.params.get("extent", 10))
    rows = []
    for m in sizes:
        A = spec.graph(int(m))
        v0 = int(A.index(np.asarray(spec.anchor))[0])
        for C in Cs:
            mask, _ = c_core(A, C, v0, include_truncation=bool(cfg.params.get("include_truncation", False)))
            x0 = viol = raw = ""
            if spec.shape == "wedge" and spec.dim == 3:
                # the sub-wedge argument needs a unit-Lipschitz gauge; raw counts are kept for comparison
                reg = regularize_gauge(spec.gauge)
                try:
                    x0, _ = shifted_half_gauge(reg, C)
                    viol = int(len(core_containment_violations(reg, C, extent, x0)))
                    raw = int(len(core_containment_violations(spec.gauge, C, extent)))
                except ValueError:
                    pass
            rows.append((m, C, A.n_vertices, int(mask.sum()), x0, viol, raw))
    header = ["m", "C", "vertices", "core_size", "x0", "containment_violations", "raw_gauge_violations"]
    return Output({"core": (header, rows)}, {"rows": len(rows)})


def _energy_gauges(cfg):
    out = [("quadratic", quadratic_gauge())]
    for gs in cfg.params.get("psi", []):
        d, a = int(gs["d"]), float(gs["alpha"])
        out.append((f"psi_{d}_{a!r}", psi_gauge(d, a, gs.get("l", 4))))
    return out


def cmd_flow(cfg: ExperimentConfig, threads: int) -> Output:
    g = _graph(cfg, cfg.sizes[0] if cfg.sizes else None)
    _warm(g)
    tol = float(cfg.tol.get("newton", 1e-10))
    gauges = _energy_gauges(cfg)
    sink = g.degree < 2 * g.dim
    jobs = [(p, s) for p in cfg.p for s in cfg.seeds]

    def one(job):
        p, s = job
        c = sample_bond(g, p, s)
        lab = label_clusters(c)
        gm = giant_mask(lab, giant_cluster(lab))
        if not gm.any():
            return []
        v0 = _center_vertex(g, gm)
        sinks = np.flatnonzero(sink & gm)
        R = effective_resistance(g, v0, sinks, float(cfg.tol.get("cg", 1e-10)), edge_mask=c.open)
        out = []
        for name, gg in gauges:
            mf = min_energy_flow(g, gg, v0, sinks, tol, edge_mask=c.open)
            mu, acyc = flow_to_path_measure(mf.flow, float(cfg.tol.get("decompose", 1e-9)))
            out.append((p, s, name, mf.energy, R.resistance, mf.iterations, mf.decrement,
                        mf.gradient_residual, len(mu.paths)))
        return out

    res = _map(one, jobs, threads)
    rows = [r for rs in res for r in rs]
    header = ["p", "seed", "gauge", "energy", "R", "iterations", "decrement", "gradient_residual", "paths"]
    resid = {"gradient_residual_max": max((r[7] for r in rows), default=0.0)}
    return Output({"flow": (header, rows)}, {"rows": len(rows)}, resid)


def cmd_bridge(cfg: ExperimentConfig, threads: int) -> Output:
    g = _graph(cfg, cfg.sizes[0] if cfg.sizes else None)
    _warm(g)
    n_paths = int(cfg.params.get("paths", 20))
    d = int(cfg.params.get("d", 2))
    alpha = float(cfg.params.get("alpha", 1.5))
    l = int(cfg.params.get("l", 4))
    psi = psi_gauge(d, alpha, l)
    sink = g.degree < 2 * g.dim
    jobs = [(p, s) for p in cfg.p for s in cfg.seeds]

    def one(job):
        p, s = job
        c = sample_bond(g, p, s)
        lab = label_clusters(c)
        gm = giant_mask(lab, giant_cluster(lab))
        if not np.any(gm & sink):
            return None
        v0 = _center_vertex(g, gm)
        mu = random_outward_measure(g, v0, n_paths, np.random.default_rng([s, 0xB1]), sink=sink, accept=gm)
        tr = transport_measure(mu, c, cfg.strategy)
        q = energy_comparison(tr, quadratic_gauge(), 2, strict=False)
        h = energy_comparison(tr, psi, l, strict=False)
        ev = [(p, s, i, e.gap, e.a, e.b, len(e.removed) - 1, len(e.bridge) - 1, e.strategy)
              for i, evs in enumerate(tr.events) for e in evs]
        erow = (p, s, len(ev), tr.fallbacks, q.quadratic_lhs, q.quadratic_rhs, q.cauchy_lhs, q.cauchy_rhs,
                h.g_lhs, h.g_rhs, q.ok and h.ok)
        return ev, erow

    res = [r for r in _map(one, jobs, threads) if r is not None]
    events = [e for ev, _ in res for e in ev]
    energies = [er for _, er in res]
    bad = sum(1 for er in energies if not er[-1])
    out = Output(
        {
            "bridge_events": (["p", "seed", "path", "gap", "a", "b", "removed_length", "bridge_length", "strategy"], events),
            "energy": (["p", "seed", "events", "fallbacks", "quad_lhs", "quad_rhs", "cs_lhs", "cs_rhs",
                        "g_lhs", "g_rhs", "ok"], energies),
        },
        {"samples": len(energies), "violations": bad, "skipped": len(jobs) - len(res), "events": len(events)},
    )
    out.exit_code = 5 if bad else 0
    return out


def cmd_resist(cfg: ExperimentConfig, threads: int) -> Output:
    r = cfg.region
    if r.get("shape", "box") == "box" and "m" not in r:
        region = int(r.get("dim", 2))
    else:
        region = _region(cfg)
    radii = cfg.sizes
    if not radii:
        raise ConfigError("sizes", "radii required")
    tol = float(cfg.tol.get("cg", 1e-8))
    rows, summary, resid = [], {}, []
    for p in cfg.p:
        if p >= 1.0:
            curves = [resistance_scaling(region, p, radii, cfg.seeds, tol)]
        else:
            curves = _map(lambda s: resistance_scaling(region, p, radii, [s], tol), cfg.seeds, threads)
        R = np.concatenate([c.R for c in curves], axis=1)
        for c in curves:
            rows.extend(c.rows())
            resid.extend(c.residuals[~np.isnan(c.residuals)].tolist())
        skipped = np.sum([c.skipped for c in curves], axis=0) if p < 1.0 else curves[0].skipped
        inc = np.diff(R, axis=0)
        summary[repr(p)] = {
            "radii": radii,
            "mean_R": [float(np.nanmean(x)) if np.any(~np.isnan(x)) else None for x in R],
            "increments": [float(np.nanmean(x)) if np.any(~np.isnan(x)) else None for x in inc],
            "skipped": [int(x) for x in skipped],
        }
    header = ["region", "p", "n", "seed", "R", "iterations", "residual"]
    return Output({"curve": (header, rows)}, summary, {"cg_residual_max": max(resid, default=0.0)})


def cmd_renorm(cfg: ExperimentConfig, threads: int) -> Output:
    dim = int(cfg.region.get("dim", 2))
    Ns = cfg.sizes or [8]
    rows = []
    for N in Ns:
        if N % 8:
            raise ConfigError("sizes", f"block scale {N} is not a multiple of 8")
        g = box_graph(dim, 5 * N // 8)
        _warm(g)
        zero = np.zeros(dim, dtype=np.int64)
        for p in cfg.p:
            hits = _map(lambda s: block_event(sample_bond(g, p, s), zero, N), cfg.seeds, threads)
            k = int(sum(hits))
            lo, hi = wilson_interval(k, len(hits))
            rows.append((dim, p, N, k, len(hits), k / len(hits), lo, hi))
    out = Output({"blocks": (["dim", "p", "N", "hits", "n", "p_hat", "ci_low", "ci_high"], rows)}, {"rows": len(rows)})
    m = cfg.params.get("lift_m")
    if m:
        g = box_graph(dim, int(m))
        grid = coarse_sites(g, int(Ns[0]))
        lifts = {}
        for p in cfg.p:
            c = sample_bond(g, p, cfg.seeds[0])
            sc = renormalized_config(c, grid)
            buf = io.BytesIO()
            dump_config(sc, buf)
            out.blobs[f"renormalized_p{p!r}_seed{cfg.seeds[0]}.bin"] = buf.getvalue()
            ok, size = lift_check(c, grid)
            lifts[repr(p)] = {"open_fraction": float(sc.open.mean()), "lift_ok": ok, "coarse_cluster": size}
        out.summary["lift"] = lifts
    return out


_DISPATCH = {
    "gauge": cmd_gauge,
    "sample": cmd_sample,
    "clusters": cmd_clusters,
    "apdist": cmd_apdist,
    "core": cmd_core,
    "flow": cmd_flow,
    "bridge": cmd_bridge,
    "resist": cmd_resist,
    "renorm": cmd_renorm,
}


def run(cfg: ExperimentConfig, out_dir, threads: int = 1, seed_offset: int = 0) -> tuple[int, RunManifest]:
    """Execute ``cfg`` and write its artifacts to ``out_dir``."""
    if seed_offset:
        cfg.seeds = [s + seed_offset for s in cfg.seeds]
    t0 = time.perf_counter()
    res = _DISPATCH[cfg.command](cfg, max(1, int(threads)))
    wall = time.perf_counter() - t0
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    for name, (header, rows) in res.tables.items():
        data = _csv(header, rows)
        (out / f"{name}.csv").write_bytes(data)
        artifacts[f"{name}.csv"] = hashlib.sha256(data).hexdigest()
    for name, data in res.blobs.items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        artifacts[name] = hashlib.sha256(data).hexdigest()
    summary = json.dumps(_jsonable(res.summary), indent=2, sort_keys=True).encode()
    (out / "summary.json").write_bytes(summary)
    artifacts["summary.json"] = hashlib.sha256(summary).hexdigest()
    (out / "config.toml").write_bytes(cfg.raw)
    man = RunManifest(cfg.sha256, __version__, cfg.command, list(cfg.seeds), int(threads), wall,
                      _jsonable(res.residuals), artifacts)
    (out / "manifest.json").write_text(man.to_json())
    return res.exit_code, man
