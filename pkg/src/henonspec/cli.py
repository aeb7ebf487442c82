"""Command-line pipeline: stages, config, content-hashed stage cache and run manifest.

Every subcommand runs its stage after the stages it depends on.  Stage outputs
are cached under ``--stage-cache`` keyed by a hash of the config fields the
stage reads, the resolved map parameters and the keys of its upstream stages.
Tables are written as comma-separated text with ``# key=value`` headers.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import math
import pickle
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .errors import ConfigError, HenonError, StageError

log = logging.getLogger("henonspec")

AUTO = "auto-astar"


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    a: object = AUTO                       # number, or "auto-astar"
    b: float = 0.01
    delta: float = 0.1
    lambda_const: float = 0.35
    stages: list = field(default_factory=list)
    t_grid: list = field(default_factory=lambda: [-10.0, 10.0, 50])
    beta_grid: Optional[list] = None       # [lo, hi, n]; default spans the orbit exponents
    scales: Optional[list] = None          # box sizes for box counting
    orders: list = field(default_factory=lambda: [10, 12, 14])
    profile_order: int = 12
    n_max: int = 20
    depth: int = 3
    tau_cap: int = 20
    box_n_time: int = 12
    box_samples: int = 2_000_000
    baseline_samples: int = 10_000
    baseline_time: int = 1_000_000
    manifold_arclength: float = 6.0
    synth_horizon: int = 1_000_000
    synth_lo: list = field(default_factory=lambda: [4])
    synth_hi: list = field(default_factory=lambda: [20])
    deep_returns: list = field(default_factory=lambda: [6, 8, 10])
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def validate(self) -> None:
        if not (self.a == AUTO or (isinstance(self.a, (int, float)) and 0 < self.a < 3)):
            raise ConfigError(f"a must be a number in (0, 3) or {AUTO!r}")
        if not (isinstance(self.b, (int, float)) and 0 < self.b < 1):
            raise ConfigError("b must lie in (0, 1)")
        if not (0 < self.delta < 1) or not (0 < self.lambda_const < math.log(2)):
            raise ConfigError("delta must lie in (0, 1) and lambda_const in (0, log 2)")
        for name in ("t_grid",) + (("beta_grid",) if self.beta_grid is not None else ()):
            g = getattr(self, name)
            if len(g) != 3 or int(g[2]) < 2 or not g[0] < g[1]:
                raise ConfigError(f"{name} must be [lo, hi, n] with lo < hi and n >= 2")
        if not self.orders or any(int(n) != n or not 1 <= n <= 24 for n in self.orders):
            raise ConfigError("orders must be integers in 1..24")
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        for name in ("depth", "tau_cap", "n_max", "baseline_samples", "baseline_time",
                     "synth_horizon", "box_n_time", "box_samples", "profile_order"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- tables

def table_text(columns: list, rows, meta: Optional[dict] = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if np.isfinite(v) else str(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(str(s) for s in v)
    return str(v)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    return str(o)


def _curve_rows(c):
    return [(float(x), float(y)) for x, y in c.samples]


# ---------------------------------------------------------------- stages

@dataclass
class StageOutput:
    result: object
    derived: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)      # file name -> text


@dataclass
class Stage:
    name: str
    deps: tuple
    keys: tuple            # config fields read by the stage
    at_astar: bool         # geometry-based stages always run at a*(b)
    fn: Callable


STAGES: dict = {}


def stage(name: str, deps=(), keys=(), at_astar: bool = False, uses_params: bool = True):
    def deco(fn):
        STAGES[name] = Stage(name, tuple(deps), tuple(keys), at_astar, fn)
        fn.uses_params = uses_params
        return fn
    return deco


@stage("saddles")
def _saddles(r: "Runner") -> StageOutput:
    from .core import find_saddles
    P, Q = find_saddles(r.params("saddles"))
    d = {"P": P.to_dict(), "Q": Q.to_dict(),
         "log_eig_u": {"P": math.log(abs(P.lambda_u)), "Q": math.log(abs(Q.lambda_u))}}
    return StageOutput((P, Q), {"saddles": d}, {"saddles.json": _json(d)})


@stage("find-astar", uses_params=False)
def _find_astar(r: "Runner") -> StageOutput:
    from .bifurcation import find_first_bifurcation
    from .core import MapParams
    c = r.cfg
    bif = find_first_bifurcation(c.b, template=MapParams(2.5, c.b, lambda_const=c.lambda_const,
                                                         delta=c.delta))
    d = bif.to_dict()
    return StageOutput(bif, {"a_star": bif.a_star, "bracket_counts": list(bif.counts)},
                       {"astar.json": _json(d)})


@stage("geometry", deps=("find-astar",), at_astar=True)
def _geometry(r: "Runner") -> StageOutput:
    from .bifurcation import build_region_geometry
    geo = build_region_geometry(r.params("geometry"), r.results["find-astar"])
    files = {"geometry.json": _json(geo.summary())}
    for region in ("R", "Theta"):
        for side, c in getattr(geo, region).items():
            files[f"geometry_{region}_{side}.csv"] = table_text(["x", "y"], _curve_rows(c))
    return StageOutput(geo, {"geometry_checks": geo.checks}, files)


@stage("manifold", deps=("saddles",), keys=("manifold_arclength",))
def _manifold(r: "Runner") -> StageOutput:
    from .manifold import grow_unstable, local_stable_graph
    p = r.params("manifold")
    P, Q = r.results["saddles"]
    L = r.cfg.manifold_arclength
    curves = {"Wu_P_plus": grow_unstable(p, P, L, branch=1),
              "Wu_P_minus": grow_unstable(p, P, L, branch=-1),
              "Wu_Q_plus": grow_unstable(p, Q, L, branch=1)}
    # stable sets as graphs over y: inverse iteration expands by 1/b and is not used
    for name, s in (("Ws_loc_P", P), ("Ws_loc_Q", Q)):
        curves[name] = local_stable_graph(p, s, 2.0 * p.b).curve()
    files = {f"manifold_{k}.csv": table_text(["x", "y"], _curve_rows(c), {"arclength": c.length})
             for k, c in curves.items()}
    return StageOutput(curves, {}, files)


@stage("critical", deps=("geometry",), at_astar=True)
def _critical(r: "Runner") -> StageOutput:
    from .recurrence import critical_set_from_strands
    geo = r.results["geometry"]
    crit = critical_set_from_strands(r.params("critical"), [geo.R["bottom"], geo.R["top"]], geo)
    rows = [(c.location.x, c.location.y, int(c.in_S), c.alignment) for c in crit]
    return StageOutput(crit, {"critical_points": len(crit)},
                       {"critical.csv": table_text(["x", "y", "in_S", "alignment"], rows)})


@stage("orbits", keys=("orders",))
def _orbits(r: "Runner") -> StageOutput:
    from .thermo import enumerate_periodic_orbits, pruned_fraction
    p = r.params("orbits")
    sets, reports, files = {}, {}, {}
    for n in sorted(set(int(k) for k in r.cfg.orders)):
        rep = {}
        sets[n] = enumerate_periodic_orbits(p, n, workers=r.workers, report=rep)
        reports[n] = {"found": rep["found"], "pruned": len(rep["pruned"]),
                      "pruned_fraction": pruned_fraction(rep)}
        rows = [("".join(map(str, o.word)), o.period, o.primitive_period, o.log_multiplier,
                 o.residual, o.points[0, 0], o.points[0, 1]) for o in sets[n]]
        files[f"orbits_n{n}.csv"] = table_text(
            ["word", "period", "primitive_period", "log_multiplier", "residual", "x0", "y0"],
            rows, {"n": n, "orbit_count": len(rows),
                   "pruned_fraction": reports[n]["pruned_fraction"]})
    return StageOutput((sets, reports), {"orbits": {str(k): v for k, v in reports.items()}}, files)


@stage("pressure", deps=("orbits",), keys=("t_grid",))
def _pressure(r: "Runner") -> StageOutput:
    from .thermo import lyapunov_bounds, pressure_table, solve_tu
    sets, reports = r.results["orbits"]
    lo, hi, m = r.cfg.t_grid
    tg = np.linspace(lo, hi, int(m))
    tables, files = {}, {}
    for n, orbs in sets.items():
        tables[n] = pressure_table(orbs, tg, n, reports[n]["pruned_fraction"])
        buf = io.StringIO()
        tables[n].write(buf)
        files[f"pressure_n{n}.csv"] = buf.getvalue()
    root = solve_tu(sets)
    nmax = max(sets)
    bounds = lyapunov_bounds(sets[nmax])
    d = {"t_u": root.value, "t_u_spread": root.uncertainty,
         "t_u_per_order": {str(k): v for k, v in root.per_order.items()},
         "lambda_bounds": list(bounds),
         "convexity_residual": {str(n): t.convexity_residual for n, t in tables.items()},
         "P0": {str(n): t.at(0.0) for n, t in tables.items()}}
    files["thermo.json"] = _json(d)
    return StageOutput((tables, root, bounds), d, files)


@stage("spectrum", deps=("pressure", "orbits", "geometry"), keys=("beta_grid", "scales",
                                                                  "box_n_time", "box_samples"))
def _spectrum(r: "Runner") -> StageOutput:
    from .thermo import box_counting_spectrum, legendre_spectrum, pressure
    tables, root, (lmin, lmax) = r.results["pressure"]
    sets, _ = r.results["orbits"]
    n = max(tables)
    if r.cfg.beta_grid is None:
        beta = np.linspace(lmin, lmax, 203)[1:-1]
    else:
        lo, hi, m = r.cfg.beta_grid
        beta = np.linspace(lo, hi, int(m))
    leg = legendre_spectrum(tables[n], beta, lambda t: pressure(sets[n], t, n), root.value)
    geo = r.results["geometry"]
    box = box_counting_spectrum(r.params("geometry", at_astar=True), geo.R["bottom"],
                                n_time=r.cfg.box_n_time, samples=r.cfg.box_samples,
                                scales=r.cfg.scales, legendre_beta_star=leg.beta_star)
    files = {}
    for name, t in (("legendre", leg), ("box_counting", box)):
        buf = io.StringIO()
        t.write(buf)
        files[f"spectrum_{name}.csv"] = buf.getvalue()
    d = {"beta_star": leg.beta_star, "L_max": leg.L_max, "box_beta_star": box.beta_star}
    return StageOutput((leg, box), d, files)


@stage("profile", deps=("orbits",), keys=("profile_order",), at_astar=True)
def _profile(r: "Runner") -> StageOutput:
    from .recurrence import binding_statistics
    from .thermo import enumerate_periodic_orbits
    p = r.params("profile")
    n = int(r.cfg.profile_order)
    orbs = enumerate_periodic_orbits(p, n, workers=r.workers)
    st = binding_statistics(p, [o.points for o in orbs])
    rows = st.rows
    return StageOutput(st, {"binding": st.to_dict()},
                       {"profile.csv": table_text(["d_crit", "q", "p", "norm_q1"], rows,
                                                  {"order": n, "c_b": st.c_b,
                                                   "cap_constant": st.cap_constant})})


@stage("induce", deps=("geometry",), keys=("n_max", "depth", "tau_cap"), at_astar=True)
def _induce(r: "Runner") -> StageOutput:
    from .inducing import (build_alpha_family, build_proper_rectangles, check_nesting,
                           distortion_scan, expansion_rate)
    p = r.params("induce")
    geo = r.results["geometry"]
    fam = build_alpha_family(p, geo, r.cfg.n_max)
    rep = {}
    rects = build_proper_rectangles(p, geo, fam, r.cfg.depth, r.cfg.tau_cap, report=rep)
    dist = {}
    for rc in rects:
        if rc.depth == 1:
            dist[rc.word] = distortion_scan(p, rc, fam.bottom)
    rows = []
    for rc in rects:
        dr = dist.get(rc.word)
        rows.append((list(rc.word), rc.depth, rc.tau, rc.interval[0], rc.interval[1],
                     rc.unstable_length, dr.max_log_ratio if dr else float("nan"),
                     dr.slope if dr else float("nan")))
    nested, bad = check_nesting(rects)
    d = {"rectangles": len(rects), "resolution_lost": rep.get("resolution_lost", 0),
         "nesting_ok": bool(nested), "nesting_violations": bad,
         "expansion_rate": expansion_rate(rects),
         "min_tau_minus_2n": min(rc.tau - 2 * rc.depth for rc in rects),
         "alpha_checks": {k: v for k, v in fam.checks.items()
                          if not isinstance(v, list)}}
    files = {"rectangles.csv": table_text(
        ["word", "n", "tau", "x_lo", "x_hi", "unstable_length", "max_log_ratio", "slope"], rows,
        {"tau_cap": r.cfg.tau_cap, "depth": r.cfg.depth}), "induce.json": _json(d)}
    return StageOutput((fam, rects, dist), {"induce": d}, files)


@stage("baseline", keys=("baseline_samples", "baseline_time", "seed"), uses_params=False)
def _baseline(r: "Runner") -> StageOutput:
    from .thermo import quadratic_baseline
    c = r.cfg
    ex = quadratic_baseline(c.baseline_samples, c.baseline_time, c.seed)
    special = quadratic_baseline(seeds=[-1.0, 1.0], n_time=c.baseline_time)
    frac = float(np.mean(np.abs(ex - math.log(2)) <= 0.02))
    d = {"within_0.02_of_log2": frac, "seed_pm1": special.tolist()}
    files = {"baseline.csv": table_text(["index", "exponent"], enumerate(ex.tolist()),
                                        {"n_time": c.baseline_time, "seed": c.seed}),
             "baseline.json": _json(d)}
    return StageOutput(ex, {"baseline": d}, files)


@stage("synthesize", deps=("induce", "geometry"),
       keys=("synth_horizon", "synth_lo", "synth_hi", "deep_returns"), at_astar=True)
def _synthesize(r: "Runner") -> StageOutput:
    from .synthesis import (deep_return, induced_cycle, shadow_check, synthesize_irregular,
                            synthesize_target, verify_birkhoff)
    p = r.params("synthesize")
    fam = r.results["induce"][0]
    geo = r.results["geometry"]
    lo = induced_cycle(p, fam, r.cfg.synth_lo)
    hi = induced_cycle(p, fam, r.cfg.synth_hi)
    H = int(r.cfg.synth_horizon)
    beta = 0.5 * (lo.exponent + hi.exponent)
    tgt = synthesize_target(beta, [lo, hi], H, p=p, fam=fam)
    irr = synthesize_irregular(lo, hi, H, p=p, fam=fam)
    deep = [deep_return(p, geo, fam, int(n)).to_dict() for n in r.cfg.deep_returns]
    d = {"lambda_lo": lo.exponent, "lambda_hi": hi.exponent,
         "target": verify_birkhoff(tgt).to_dict(), "irregular": verify_birkhoff(irr).to_dict(),
         "shadow_target": shadow_check(p, fam, tgt), "shadow_irregular": shadow_check(p, fam, irr),
         "deep_returns": deep}
    files = {"synth_target.csv": table_text(["t", "average"], tgt.window_exponents,
                                            {"beta": beta, "horizon": H}),
             "synth_irregular.csv": table_text(["t", "average"], irr.window_exponents,
                                               {"horizon": H}),
             "synth_schedule.json": _json({"target": tgt.schedule.to_dict(),
                                           "irregular": irr.schedule.to_dict()}),
             "synthesis.json": _json(d)}
    return StageOutput((tgt, irr), {"synthesis": {
        "irregular_gap_ratio": d["irregular"]["gap"] / (hi.exponent - lo.exponent),
        "target_error": d["target"]["final_error"]}}, files)


@stage("verify", deps=("saddles", "find-astar", "geometry", "pressure", "spectrum", "induce",
                       "synthesize"))
def _verify(r: "Runner") -> StageOutput:
    res = r.results
    P, Q = res["saddles"]
    tables, root, _ = res["pressure"]
    leg, box = res["spectrum"]
    _, rects, dist = res["induce"]
    derived = r.derived
    checks = {
        "saddle_exponents": bool(abs(math.log(abs(P.lambda_u)) - math.log(2)) <= 0.05
                                 and abs(math.log(abs(Q.lambda_u)) - math.log(4)) <= 0.05),
        "a_star_range": 1.8 < res["find-astar"].a_star < 2.2,
        "geometry_checks": all(bool(v) for k, v in res["geometry"].checks.items()
                               if isinstance(v, bool)),
        "pressure_signs": all(0.5 < t.at(0.0) <= math.log(2) + 0.02 and t.at(1.0) < 0
                              for t in tables.values()),
        "pressure_convex": all(t.convexity_residual >= -1e-9 for t in tables.values()),
        "t_u_in_unit_interval": 0 < root.value < 1,
        "legendre_max_is_t_u": abs(leg.L_max - root.value) <= 1e-3 and leg.unimodal(),
        "tau_at_least_2n": all(rc.tau >= 2 * rc.depth for rc in rects),
        "nesting": derived["induce"]["nesting_ok"],
        "distortion_finite": all(np.isfinite(d.max_log_ratio) and d.slope > 0
                                 for d in dist.values()),
        "irregular_gap": derived["synthesis"]["irregular_gap_ratio"] >= 0.8,
    }
    checks = {k: bool(v) for k, v in checks.items()}
    return StageOutput(checks, {"verify": checks}, {"verify.json": _json(checks)})


ORDER = ["saddles", "find-astar", "geometry", "manifold", "critical", "orbits", "pressure",
         "spectrum", "profile", "induce", "baseline", "synthesize", "verify"]


# ---------------------------------------------------------------- runner

def _versions() -> dict:
    import numba
    import scipy
    return {"henonspec": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


class Runner:
    def __init__(self, cfg: RunConfig, out, workers: int = 1, cache_dir=None):
        self.cfg = cfg
        self.out = Path(out)
        self.workers = max(1, int(workers))
        self.cache = Path(cache_dir) if cache_dir else None
        self.results: dict = {}
        self.keys: dict = {}
        self.derived: dict = {}
        self.timings: dict = {}

    def needs_astar(self, name: str) -> bool:
        st = STAGES[name]
        return st.at_astar or (self.cfg.a == AUTO and getattr(st.fn, "uses_params", True))

    def params(self, name: str, at_astar: bool = None):
        from .core import MapParams
        at = self.needs_astar(name) if at_astar is None else at_astar or self.cfg.a == AUTO
        a = self.results["find-astar"].a_star if at else float(self.cfg.a)
        return MapParams(a, self.cfg.b, lambda_const=self.cfg.lambda_const, delta=self.cfg.delta)

    def deps(self, name: str) -> list:
        out = list(STAGES[name].deps)
        if self.needs_astar(name) and "find-astar" not in out and name != "find-astar":
            out.insert(0, "find-astar")
        return out

    def plan(self, targets) -> list:
        seen, order = set(), []

        def visit(n):
            if n in seen:
                return
            for d in self.deps(n):
                visit(d)
            seen.add(n)
            order.append(n)
        for t in targets:
            visit(t)
        return order

    def key(self, name: str) -> str:
        st = STAGES[name]
        payload = {"stage": name, "version": __version__,
                   "cfg": {k: getattr(self.cfg, k) for k in st.keys},
                   "deps": {d: self.keys[d] for d in self.deps(name)}}
        if getattr(st.fn, "uses_params", True):
            payload["params"] = self.params(name).to_dict()
        elif name == "find-astar":
            payload["cfg"].update(b=self.cfg.b, delta=self.cfg.delta,
                                  lambda_const=self.cfg.lambda_const)
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def _load(self, name: str, key: str) -> Optional[StageOutput]:
        if self.cache is None:
            return None
        f = self.cache / f"{name}-{key}.pkl"
        if not f.exists():
            return None
        try:
            with open(f, "rb") as fh:
                return pickle.load(fh)
        except Exception as exc:        # a stale or truncated cache entry is recomputed
            log.warning("ignoring cache entry %s: %s", f, exc)
            return None

    def _store(self, name: str, key: str, out: StageOutput) -> None:
        if self.cache is None:
            return
        self.cache.mkdir(parents=True, exist_ok=True)
        try:
            blob = pickle.dumps(out)
        except Exception as exc:
            log.warning("stage %s not cached: %s", name, exc)
            return
        (self.cache / f"{name}-{key}.pkl").write_bytes(blob)

    def run(self, targets) -> dict:
        self.out.mkdir(parents=True, exist_ok=True)
        manifest = {"config": self.cfg.to_dict(), "targets": list(targets),
                    "versions": _versions(), "stages": {}, "derived": self.derived}
        try:
            for name in self.plan(targets):
                t0 = time.perf_counter()
                key = self.key(name)
                out = self._load(name, key)
                hit = out is not None
                if not hit:
                    log.info("running %s", name)
                    try:
                        out = STAGES[name].fn(self)
                    except (HenonError, ValueError, ArithmeticError) as exc:
                        raise StageError(name, exc) from exc
                    self._store(name, key, out)
                self.results[name] = out.result
                self.keys[name] = key
                self.derived.update(out.derived)
                for fname, text in out.files.items():
                    (self.out / fname).write_text(text)
                self.timings[name] = time.perf_counter() - t0
                info = {"key": key, "cached": hit, "seconds": round(self.timings[name], 3)}
                if getattr(STAGES[name].fn, "uses_params", True):
                    info["a"] = self.params(name).a
                manifest["stages"][name] = info
            manifest["status"] = "ok"
        except StageError as exc:
            manifest["status"] = "failed"
            manifest["failed_stage"] = exc.stage
            manifest["error"] = str(exc.cause)
            raise
        finally:
            (self.out / "manifest.json").write_text(_json(manifest))
        return manifest


def run_pipeline(cfg: RunConfig, out, workers: int = 1, cache_dir=None, targets=None) -> dict:
    """Run ``targets`` (default: ``cfg.stages``) with their dependencies."""
    targets = list(targets if targets is not None else cfg.stages)
    if not targets:
        raise ConfigError("no stages requested")
    return Runner(cfg, out, workers, cache_dir).run(targets)


# ---------------------------------------------------------------- argparse

def _parse_set(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise ConfigError(f"--set expects KEY=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", default="henon_out", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes for orbit solves")
    common.add_argument("--stage-cache", default=None, help="directory for cached stage outputs")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field (value parsed as JSON)")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="henonspec",
                                 description="Henon-like maps at the first bifurcation: "
                                             "geometry, inducing, thermodynamics, synthesis.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ORDER:
        sub.add_parser(name, parents=[common], help=f"run the {name} stage")
    sub.add_parser("run", parents=[common], help="run the stages listed in the config")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        base = RunConfig.load(args.config).to_dict() if args.config else RunConfig().to_dict()
        base.update(_parse_set(args.set))
        cfg = RunConfig.from_dict(base)
        targets = cfg.stages if args.command == "run" else [args.command]
        manifest = run_pipeline(cfg, args.out, args.workers, args.stage_cache, targets)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    summary = {"status": manifest["status"], "out": str(args.out),
               "stages": {k: v["seconds"] for k, v in manifest["stages"].items()}}
    if "verify" in manifest["derived"]:
        summary["verify"] = manifest["derived"]["verify"]
    print(json.dumps(summary, indent=1))
    if args.command == "verify" and not all(manifest["derived"]["verify"].values()):
        return 3
    return 0


if __name__ == "__main__":
    # import by name so cached stage outputs pickle as henonspec.cli classes
    from henonspec.cli import main as _main
    sys.exit(_main())
