"""Invariant manifolds as adaptive polylines, curve diagnostics and intersections.

Manifold branches are parameterised by a continuous "fundamental-domain time"
``t``: the point with parameter ``t`` is ``g^k(S + e_k s0 |mu|^(t-k) v)`` with
``k = floor(t)``, where ``g`` is the map (unstable case) or its inverse (stable
case), ``mu`` the expanding eigenvalue of ``Dg`` at the saddle ``S`` and ``v``
its eigenvector.  Tangents come from pushing ``v`` with the derivative cocycle,
so they are exact up to rounding rather than re-differenced.

Stable curves of the classical family are additionally available as explicit
graphs (:class:`StableGraph`, :class:`PullbackParabola`): the pullback of a
near-vertical graph ``x = h(y)`` is ``y = h(b x) - 1 + a x^2``, which avoids the
1/b blow-up of inverse iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .core import MapParams, SaddleData, eval_inverse, eval_map, jacobian
from .errors import GrowthStalled, TooFewSamples

ORIGINS = ("Wu_P", "Wu_Q", "Ws_Q", "Ws_P", "derived")


# ---------------------------------------------------------------- curves

def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return v / n


@dataclass
class Curve:
    """Ordered polyline with unit tangents and cumulative arclength.

    ``breaks`` lists indices ``i`` such that samples ``i-1`` and ``i`` are not
    joined (the curve left the bounding box in between).  ``params`` keeps the
    growth parameter of every sample when the curve came from a manifold branch.
    """

    samples: np.ndarray
    tangents: np.ndarray
    arclength: np.ndarray
    origin: str = "derived"
    params: Optional[np.ndarray] = None
    breaks: tuple = ()
    # exact evaluation t -> (points, tangents, ok) when the curve came from a branch
    evaluator: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown curve origin {self.origin!r}")

    @classmethod
    def from_points(cls, pts, tangents=None, origin="derived", params=None, breaks=()):
        pts = np.asarray(pts, float)
        joined = np.ones(max(len(pts) - 1, 0), bool)
        for i in breaks:
            joined[i - 1] = False
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1) * joined
        s = np.concatenate([[0.0], np.cumsum(seg)])
        if tangents is None:
            tangents = _polyline_tangents(pts, s)
        t = _unit(np.asarray(tangents, float))
        return cls(pts, t, s, origin, None if params is None else np.asarray(params, float),
                   tuple(int(i) for i in breaks))

    def __len__(self):
        return len(self.samples)

    @property
    def length(self) -> float:
        return float(self.arclength[-1]) if len(self.arclength) else 0.0

    def joined_mask(self) -> np.ndarray:
        """Boolean per segment ``(i, i+1)``: true when the two samples are joined."""
        m = np.ones(max(len(self) - 1, 0), bool)
        for i in self.breaks:
            m[i - 1] = False
        return m

    def pieces(self) -> list["Curve"]:
        cuts = [0, *self.breaks, len(self)]
        out = []
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            if hi - lo >= 2:
                out.append(self.slice(lo, hi))
        return out

    def slice(self, lo: int, hi: int) -> "Curve":
        br = tuple(i - lo for i in self.breaks if lo < i < hi)
        par = None if self.params is None else self.params[lo:hi]
        c = Curve.from_points(self.samples[lo:hi], self.tangents[lo:hi], self.origin, par, br)
        c.evaluator = self.evaluator
        return c

    def point_at(self, s) -> np.ndarray:
        """Linear interpolation of the polyline at arclength ``s``."""
        s = np.asarray(s, float)
        return np.stack([np.interp(s, self.arclength, self.samples[:, 0]),
                         np.interp(s, self.arclength, self.samples[:, 1])], axis=-1)

    def to_records(self) -> np.ndarray:
        """Rows ``(arclength, x, y, tangent_x, tangent_y)``."""
        return np.column_stack([self.arclength, self.samples, self.tangents])

    def write(self, path, meta: Optional[dict] = None):
        header = [f"origin={self.origin}", f"breaks={','.join(map(str, self.breaks))}"]
        for k, v in (meta or {}).items():
            header.append(f"{k}={v}")
        header.append("arclength,x,y,tangent_x,tangent_y")
        np.savetxt(path, self.to_records(), delimiter=",", fmt="%.17g",
                   header="\n".join(header))

    @classmethod
    def read(cls, path) -> "Curve":
        origin, breaks = "derived", ()
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                line = line[1:].strip()
                if line.startswith("origin="):
                    origin = line.split("=", 1)[1]
                elif line.startswith("breaks="):
                    val = line.split("=", 1)[1]
                    breaks = tuple(int(v) for v in val.split(",") if v)
        rec = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(rec[:, 1:3].copy(), rec[:, 3:5].copy(), rec[:, 0].copy(), origin, None, breaks)


def _polyline_tangents(pts: np.ndarray, s: np.ndarray) -> np.ndarray:
    if len(pts) < 2:
        return np.tile([1.0, 0.0], (len(pts), 1))
    d = np.gradient(pts, axis=0)
    return _unit(d)


def hausdorff_distance(c1, c2) -> float:
    """Symmetric Hausdorff distance between two sample sets (point-to-polyline)."""
    a = c1.samples if isinstance(c1, Curve) else np.asarray(c1, float)
    b = c2.samples if isinstance(c2, Curve) else np.asarray(c2, float)
    da = _point_polyline_distance(a, c2 if isinstance(c2, Curve) else Curve.from_points(b))
    db = _point_polyline_distance(b, c1 if isinstance(c1, Curve) else Curve.from_points(a))
    return float(max(np.max(da), np.max(db)))


def one_sided_distance(pts, c: Curve) -> float:
    """max over ``pts`` of the distance to polyline ``c``."""
    return float(np.max(_point_polyline_distance(np.asarray(pts, float), c)))


def _point_polyline_distance(pts: np.ndarray, c: Curve, k: int = 4) -> np.ndarray:
    d, _, _ = _project(pts, c, k)
    return np.abs(d)


def _project(pts: np.ndarray, c: Curve, k: int = 4):
    """Signed distance of ``pts`` to ``c`` (positive on the left of its tangent),
    index of the closest segment and the projection parameter on it."""
    pts = np.atleast_2d(pts)
    tree = cKDTree(c.samples)
    k = min(k, len(c))
    _, idx = tree.query(pts, k=k)
    idx = np.atleast_2d(idx).reshape(len(pts), -1)
    joined = c.joined_mask()
    best = np.full(len(pts), np.inf)
    best_signed = np.zeros(len(pts))
    best_seg = np.zeros(len(pts), int)
    best_u = np.zeros(len(pts))
    for col in range(idx.shape[1]):
        for off in (-1, 0):
            seg = np.clip(idx[:, col] + off, 0, len(c) - 2)
            a = c.samples[seg]
            e = c.samples[seg + 1] - a
            ee = np.einsum("ij,ij->i", e, e)
            with np.errstate(invalid="ignore", divide="ignore"):
                u = np.clip(np.einsum("ij,ij->i", pts - a, e) / ee, 0.0, 1.0)
            u = np.where(ee > 0, u, 0.0)
            q = a + u[:, None] * e
            dist = np.linalg.norm(pts - q, axis=1)
            dist = np.where(joined[seg], dist, np.linalg.norm(pts - a, axis=1))
            cross = e[:, 0] * (pts[:, 1] - a[:, 1]) - e[:, 1] * (pts[:, 0] - a[:, 0])
            better = dist < best
            best = np.where(better, dist, best)
            best_signed = np.where(better, np.sign(cross) * dist, best_signed)
            best_seg = np.where(better, seg, best_seg)
            best_u = np.where(better, u, best_u)
    return best_signed, best_seg, best_u


# ---------------------------------------------------------------- diagnostics

@dataclass
class CurveDiagnostics:
    max_slope: float
    max_curvature: float
    is_C2b: bool
    inside_R: bool

    def to_dict(self) -> dict:
        return dict(max_slope=self.max_slope, max_curvature=self.max_curvature,
                    is_C2b=self.is_C2b, inside_R=self.inside_R)


def circumradius_curvature(pts: np.ndarray) -> np.ndarray:
    """Curvature 1/R of the circle through consecutive sample triples."""
    p0, p1, p2 = pts[:-2], pts[1:-1], pts[2:]
    a = np.linalg.norm(p1 - p0, axis=1)
    b = np.linalg.norm(p2 - p1, axis=1)
    c = np.linalg.norm(p2 - p0, axis=1)
    cross = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    with np.errstate(invalid="ignore", divide="ignore"):
        k = 2.0 * np.abs(cross) / (a * b * c)
    return np.where(np.isfinite(k), k, 0.0)


def curve_diagnostics(c: Curve, p: MapParams) -> CurveDiagnostics:
    if len(c) < 3:
        raise TooFewSamples("curve diagnostics need at least 3 samples")
    sq = math.sqrt(p.b)
    slopes = []
    curvs = []
    for piece in c.pieces() or [c]:
        if len(piece) < 3:
            continue
        t = piece.tangents[1:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes.append(np.abs(t[:, 1]) / np.abs(t[:, 0]))
        curvs.append(circumradius_curvature(piece.samples))
    if not slopes:
        raise TooFewSamples("no piece with 3 joined samples")
    ms = float(np.max(np.concatenate(slopes)))
    mk = float(np.max(np.concatenate(curvs)))
    x, y = c.samples[:, 0], c.samples[:, 1]
    inside = bool(np.all(np.abs(x) < 2.0) and np.all(np.abs(y) < sq))
    return CurveDiagnostics(ms, mk, bool(ms <= sq and mk <= sq), inside)


# ---------------------------------------------------------------- intersections

@dataclass
class IntersectionReport:
    transversal: list = field(default_factory=list)   # (PlanePoint-like tuple, angle)
    tangencies: list = field(default_factory=list)    # (point tuple, signed gap)

    @property
    def n_transversal(self) -> int:
        return len(self.transversal)

    def to_dict(self) -> dict:
        return {"transversal": [[list(map(float, z)), float(a)] for z, a in self.transversal],
                "tangencies": [[list(map(float, z)), float(g)] for z, g in self.tangencies]}


def _segment_crossings(c1: Curve, c2: Curve):
    """All crossings of joined segments of c1 with joined segments of c2."""
    m1, m2 = c1.joined_mask(), c2.joined_mask()
    a1, e1 = c1.samples[:-1], np.diff(c1.samples, axis=0)
    a2, e2 = c2.samples[:-1], np.diff(c2.samples, axis=0)
    mid2 = a2 + 0.5 * e2
    r2 = 0.5 * np.linalg.norm(e2, axis=1)
    tree = cKDTree(mid2)
    mid1 = a1 + 0.5 * e1
    r1 = 0.5 * np.linalg.norm(e1, axis=1)
    reach = float(np.max(r2[m2])) if np.any(m2) else 0.0
    out = []
    cand = tree.query_ball_point(mid1, r1 + reach + 1e-15)
    for i, js in enumerate(cand):
        if not m1[i] or not js:
            continue
        js = np.asarray(js)
        js = js[m2[js]]
        if len(js) == 0:
            continue
        d = a2[js] - a1[i]
        den = e1[i, 0] * e2[js, 1] - e1[i, 1] * e2[js, 0]
        with np.errstate(invalid="ignore", divide="ignore"):
            u = (d[:, 0] * e2[js, 1] - d[:, 1] * e2[js, 0]) / den
            w = (d[:, 0] * e1[i, 1] - d[:, 1] * e1[i, 0]) / den
        # half-open on the far end so a crossing through a shared vertex counts once
        hit = (den != 0) & (u >= 0) & (u < 1) & (w >= 0) & (w < 1)
        for j, uu in zip(js[hit], u[hit]):
            out.append((i, int(j), float(uu)))
    return out


def curve_intersections(c1: Curve, c2: Curve, angle_tol: float = 1e-3,
                        gap_tol: float = 1e-9) -> IntersectionReport:
    """Transversal crossings and tangency candidates between two polylines.

    Crossings come from segment-pair tests, located by linear interpolation
    inside the crossing segments.  Tangency candidates are local minima of the
    unsigned gap from ``c1`` samples to ``c2`` that do not change sign; the
    minimum is refined with a parabola through the three nearest samples and
    kept when it falls below ``gap_tol``.
    """
    rep = IntersectionReport()
    for i, j, u in _segment_crossings(c1, c2):
        z = c1.samples[i] + u * (c1.samples[i + 1] - c1.samples[i])
        t1 = _unit(c1.samples[i + 1] - c1.samples[i])
        t2 = _unit(c2.samples[j + 1] - c2.samples[j])
        ang = math.asin(min(1.0, abs(t1[0] * t2[1] - t1[1] * t2[0])))
        if ang > angle_tol:
            rep.transversal.append((tuple(map(float, z)), ang))
        else:
            rep.tangencies.append((tuple(map(float, z)), 0.0))
    gap, seg, _ = _project(c1.samples, c2)
    # restrict to samples whose projection lies on the interior of c2
    for piece_lo, piece_hi in _piece_bounds(c1):
        g = gap[piece_lo:piece_hi]
        s = c1.arclength[piece_lo:piece_hi]
        if len(g) < 3:
            continue
        ag = np.abs(g)
        for k in range(1, len(g) - 1):
            if not (ag[k] <= ag[k - 1] and ag[k] <= ag[k + 1]):
                continue
            if np.sign(g[k - 1]) != np.sign(g[k + 1]):
                continue     # sign change: a crossing, handled above
            coef = np.polyfit(s[k - 1:k + 2] - s[k], g[k - 1:k + 2], 2)
            if coef[0] == 0:
                continue
            sv = -coef[1] / (2 * coef[0])
            gv = float(np.polyval(coef, sv)) if abs(sv) <= (s[k + 1] - s[k - 1]) else float(g[k])
            if abs(gv) <= gap_tol:
                z = c1.point_at(s[k] + np.clip(sv, s[k - 1] - s[k], s[k + 1] - s[k]))
                rep.tangencies.append((tuple(map(float, z)), gv))
    return rep


def _piece_bounds(c: Curve):
    cuts = [0, *c.breaks, len(c)]
    return list(zip(cuts[:-1], cuts[1:]))


# ---------------------------------------------------------------- growth

@dataclass
class GrowthPolicy:
    max_step: float = 0.01
    max_angle: float = 0.05
    bbox: tuple = (-2.5, 2.5, -2.5, 2.5)
    min_dt: float = 1e-12
    s0: float = 1e-7
    n_initial: int = 64
    max_points: int = 4_000_000
    boundary_dt: float = 1e-9
    # segments shorter than this are not split for turning (nested folds)
    min_arc: float = 1e-10

    def to_dict(self) -> dict:
        return dict(max_step=self.max_step, max_angle=self.max_angle, bbox=list(self.bbox),
                    min_dt=self.min_dt, s0=self.s0, n_initial=self.n_initial)


class ManifoldBranch:
    """One branch of ``W^u(S)`` (``kind='unstable'``) or ``W^s(S)`` (``'stable'``)."""

    def __init__(self, p: MapParams, saddle: SaddleData, kind: str = "unstable",
                 branch: int = 1, s0: float = 1e-7):
        if kind not in ("unstable", "stable"):
            raise ValueError(kind)
        if kind == "stable":
            eval_inverse(p, saddle.z)   # raises DegenerateInverse for b = 0
        self.p = p
        self.saddle = saddle
        self.kind = kind
        self.branch = 1 if branch >= 0 else -1
        self.s0 = s0
        if kind == "unstable":
            self.mu = saddle.lambda_u
            self.v = saddle.v_u
        else:
            self.mu = 1.0 / saddle.lambda_s
            self.v = saddle.v_s
        self.origin = ("Wu_" if kind == "unstable" else "Ws_") + saddle.label

    def _step(self, z, w):
        if self.kind == "unstable":
            return eval_map(self.p, z), np.einsum("...ij,...j->...i", jacobian(self.p, z), w)
        zn = eval_inverse(self.p, z)
        return zn, np.linalg.solve(jacobian(self.p, zn), w[..., None])[..., 0]

    def evaluate(self, t):
        """Points, unit tangents (oriented along increasing ``t``) and a finite mask."""
        t = np.atleast_1d(np.asarray(t, float))
        k = np.floor(t).astype(int)
        frac = t - k
        amu = abs(self.mu)
        sg = 1.0 if self.mu > 0 else -1.0
        pts = np.empty((len(t), 2))
        tans = np.empty((len(t), 2))
        S = self.saddle.z
        with np.errstate(all="ignore"):
            for kk in np.unique(k):
                sel = k == kk
                eps = self.branch * (sg ** kk if kk >= 0 else sg ** (-kk))
                z = S + (eps * self.s0 * amu ** frac[sel])[:, None] * self.v
                w = np.tile(eps * self.v, (int(sel.sum()), 1))
                if kk < 0:
                    raise ValueError("negative growth parameter")
                for _ in range(kk):
                    z, w = self._step(z, w)
                    w = _unit(w)
                pts[sel] = z
                tans[sel] = w
        ok = np.all(np.isfinite(pts), axis=1) & np.all(np.isfinite(tans), axis=1)
        return pts, tans, ok


def _inside(pts, bbox):
    x0, x1, y0, y1 = bbox
    with np.errstate(invalid="ignore"):
        return (pts[:, 0] > x0) & (pts[:, 0] < x1) & (pts[:, 1] > y0) & (pts[:, 1] < y1)


def sample_branch(branch: ManifoldBranch, t0: float, t1: float,
                  policy: Optional[GrowthPolicy] = None, keep_outside: bool = False) -> Curve:
    """Adaptively sample the branch for ``t`` in ``[t0, t1]``.

    Consecutive kept samples are at most ``max_step`` apart with tangent turn
    at most ``max_angle``.  Samples outside ``policy.bbox`` are dropped and the
    curve is split there.
    """
    pol = policy or GrowthPolicy()
    n0 = max(pol.n_initial, int(math.ceil((t1 - t0) * pol.n_initial)))
    t = np.linspace(t0, t1, n0 + 1)
    pts, tans, ok = branch.evaluate(t)
    ok &= _inside(pts, pol.bbox)
    while True:
        dt = np.diff(t)
        both = ok[:-1] & ok[1:]
        step = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cosang = np.einsum("ij,ij->i", tans[:-1], tans[1:])
        with np.errstate(invalid="ignore"):
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        need = both & ((step > pol.max_step) | ((ang > pol.max_angle) & (step > pol.min_arc)))
        edge = (ok[:-1] != ok[1:]) & (dt > pol.boundary_dt)
        stalled = need & (dt < pol.min_dt)
        need &= dt >= pol.min_dt
        if np.any(stalled & (step > pol.max_step)):
            raise GrowthStalled(f"step underflow at t={t[:-1][stalled][0]:.15g}")
        need |= edge
        if not np.any(need):
            break
        if len(t) + int(need.sum()) > pol.max_points:
            raise GrowthStalled("point budget exhausted while refining")
        tm = 0.5 * (t[:-1][need] + t[1:][need])
        pm, tm_tan, okm = branch.evaluate(tm)
        okm &= _inside(pm, pol.bbox)
        order = np.argsort(np.concatenate([t, tm]), kind="stable")
        t = np.concatenate([t, tm])[order]
        pts = np.concatenate([pts, pm])[order]
        tans = np.concatenate([tans, tm_tan])[order]
        ok = np.concatenate([ok, okm])[order]
    if keep_outside:
        c = Curve.from_points(pts, tans, branch.origin, t)
    else:
        idx = np.flatnonzero(ok)
        if len(idx) == 0:
            c = Curve.from_points(np.zeros((0, 2)), np.zeros((0, 2)), branch.origin, np.zeros(0))
        else:
            breaks = tuple(int(i) for i in np.flatnonzero(np.diff(idx) > 1) + 1)
            c = Curve.from_points(pts[idx], tans[idx], branch.origin, t[idx], breaks)
    c.evaluator = branch.evaluate
    return c


def _grow(branch: ManifoldBranch, target_arclength: float, policy: Optional[GrowthPolicy],
          t_max: float) -> Curve:
    pol = policy or GrowthPolicy()
    curve = None
    t_end = 1.0
    while True:
        curve = sample_branch(branch, 0.0, t_end, pol)
        if curve.length >= target_arclength or t_end >= t_max:
            break
        t_end += 1.0
    if curve.length > target_arclength:
        # trim to the first sample reaching the target
        cut = int(np.searchsorted(curve.arclength, target_arclength)) + 1
        curve = curve.slice(0, min(cut, len(curve)))
    return curve


def grow_unstable(p: MapParams, s: SaddleData, target_arclength: float,
                  policy: Optional[GrowthPolicy] = None, branch: int = 1,
                  t_max: float = 40.0) -> Curve:
    """Grow one branch of the unstable manifold of ``s`` up to ``target_arclength``."""
    return _grow(ManifoldBranch(p, s, "unstable", branch, (policy or GrowthPolicy()).s0),
                 target_arclength, policy, t_max)


def grow_stable(p: MapParams, s: SaddleData, target_arclength: float,
                policy: Optional[GrowthPolicy] = None, branch: int = 1,
                t_max: float = 40.0) -> Curve:
    """Grow one branch of the stable manifold of ``s`` (inverse iteration)."""
    return _grow(ManifoldBranch(p, s, "stable", branch, (policy or GrowthPolicy()).s0),
                 target_arclength, policy, t_max)


def join_branches(c_minus: Curve, c_plus: Curve) -> Curve:
    """Concatenate the two branches through the saddle into one oriented curve."""
    rev = c_minus.samples[::-1]
    pts = np.concatenate([rev, c_plus.samples])
    tans = np.concatenate([-c_minus.tangents[::-1], c_plus.tangents])
    n = len(c_minus)
    br = [n - i for i in c_minus.breaks][::-1] + [n + i for i in c_plus.breaks]
    return Curve.from_points(pts, tans, c_plus.origin, None, tuple(br))


# ---------------------------------------------------------------- explicit stable graphs

@dataclass
class StableGraph:
    """Near-vertical curve ``x = h(y)`` for ``y`` in ``[y0, y1]`` (Chebyshev fit)."""

    h: Chebyshev
    y0: float
    y1: float
    label: str = ""

    def __call__(self, y):
        return self.h(np.asarray(y, float))

    def slope_dx_dy(self, y):
        return self.h.deriv()(np.asarray(y, float))

    def curve(self, n: int = 401, origin: str = "derived") -> Curve:
        y = np.linspace(self.y0, self.y1, n)
        pts = np.column_stack([self(y), y])
        tans = np.column_stack([self.slope_dx_dy(y), np.ones(n)])
        return Curve.from_points(pts, tans, origin)

    def side(self, z) -> np.ndarray:
        """Signed horizontal offset ``x - h(y)`` (positive to the right)."""
        z = np.asarray(z, float)
        return z[..., 0] - self(z[..., 1])

    @property
    def x_mid(self) -> float:
        return float(self(0.5 * (self.y0 + self.y1)))


@dataclass
class PullbackParabola:
    """Preimage of a stable graph: ``y = G(x) = h(b x) - 1 + a x^2``."""

    base: StableGraph
    a: float
    b: float
    label: str = ""

    def __call__(self, x):
        x = np.asarray(x, float)
        return self.base(self.b * x) - 1.0 + self.a * x * x

    def deriv(self, x):
        x = np.asarray(x, float)
        return self.b * self.base.slope_dx_dy(self.b * x) + 2.0 * self.a * x

    def gap(self, z) -> np.ndarray:
        """``y - G(x)``; positive inside the cup."""
        z = np.asarray(z, float)
        return z[..., 1] - self(z[..., 0])

    def vertex(self) -> tuple[float, float]:
        from scipy.optimize import minimize_scalar
        r = minimize_scalar(lambda x: float(self(x)), bounds=(-0.5, 0.5), method="bounded",
                            options={"xatol": 1e-14})
        return float(r.x), float(r.fun)

    def branch_x(self, y, side: int) -> np.ndarray:
        """x on the left (side=-1) or right (side=+1) arm with ``G(x) = y``."""
        y = np.atleast_1d(np.asarray(y, float))
        xv, gv = self.vertex()
        out = np.full(len(y), np.nan)
        for i, yy in enumerate(y):
            if yy < gv:
                continue
            f = lambda x: float(self(x)) - yy
            lo, hi = (xv, 3.0) if side > 0 else (-3.0, xv)
            if f(lo) * f(hi) > 0:
                continue
            out[i] = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15)
        return out

    def curve(self, x0: float, x1: float, n: int = 801) -> Curve:
        x = np.linspace(x0, x1, n)
        pts = np.column_stack([x, self(x)])
        tans = np.column_stack([np.ones(n), self.deriv(x)])
        return Curve.from_points(pts, tans, "derived")


@dataclass
class UnstableGraph:
    """Near-horizontal curve ``y = u(x)`` as piecewise Chebyshev fits on ``breaks``."""

    breaks: np.ndarray
    fits: list
    fit_error: float = 0.0

    @property
    def x0(self) -> float:
        return float(self.breaks[0])

    @property
    def x1(self) -> float:
        return float(self.breaks[-1])

    def _panel(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, len(self.fits) - 1)

    def u(self, x, der: int = 0):
        x = np.asarray(x, float)
        flat = np.atleast_1d(x)
        k = self._panel(flat)
        out = np.empty(flat.shape)
        for j in np.unique(k):
            m = k == j
            fj = self.fits[j] if der == 0 else self.fits[j].deriv(der)
            out[m] = fj(flat[m])
        return out.reshape(x.shape) if x.ndim else float(out[0])

    __call__ = u

    def restrict(self, xa: float, xb: float) -> "UnstableGraph":
        k0 = int(self._panel(np.array([xa]))[0])
        k1 = int(self._panel(np.array([xb]))[0])
        br = self.breaks[k0:k1 + 2].copy()
        br[0], br[-1] = xa, xb
        return UnstableGraph(br, self.fits[k0:k1 + 1], self.fit_error)

    def points(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        return np.column_stack([x, self.u(x)])

    def tangents(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, float))
        t = np.column_stack([np.ones_like(x), self.u(x, 1)])
        return t / np.linalg.norm(t, axis=1, keepdims=True)

    def arclength(self, xa: float, xb: float, n: int = 33) -> float:
        x = np.linspace(xa, xb, n)
        return float(np.sum(np.linalg.norm(np.diff(self.points(x), axis=0), axis=1)))

    def curve(self, xa: float = None, xb: float = None, n: int = 401) -> "Curve":
        x = np.linspace(self.x0 if xa is None else xa, self.x1 if xb is None else xb, n)
        return Curve.from_points(self.points(x), self.tangents(x), "derived")


def unstable_graph(c: "Curve", tol: float = 1e-14, deg: int = 24, n: int = 20001,
                   min_pts: int = 80) -> UnstableGraph:
    """Fit a near-horizontal curve as a graph, splitting panels until the fit error
    is below ``tol``.  Exact points from the curve's evaluator are used when present."""
    if c.evaluator is not None and c.params is not None:
        t = np.linspace(c.params[0], c.params[-1], n)
        pts, _, _ = c.evaluator(t)
    else:
        pts = c.samples
    return unstable_graph_from_points(pts[:, 0], pts[:, 1], tol, deg, min_pts)


def unstable_graph_from_points(x, y, tol: float = 1e-14, deg: int = 24,
                               min_pts: int = 80) -> UnstableGraph:
    order = np.argsort(x)
    x, y = np.asarray(x, float)[order], np.asarray(y, float)[order]
    if np.any(np.diff(x) <= 0):
        keep = np.concatenate([[True], np.diff(x) > 0])
        x, y = x[keep], y[keep]
    panels = [(0, len(x))]
    done = []
    while panels:
        i0, i1 = panels.pop()
        xs, ys = x[i0:i1], y[i0:i1]
        fit = Chebyshev.fit(xs, ys, min(deg, len(xs) - 1), domain=[xs[0], xs[-1]])
        err = float(np.max(np.abs(fit(xs) - ys)))
        if err > tol and i1 - i0 >= 2 * min_pts:
            mid = (i0 + i1) // 2
            panels += [(mid - 1, i1), (i0, mid)]    # neighbouring panels share one point
            continue
        done.append((xs[0], fit, err))
    done.sort(key=lambda d: d[0])
    breaks = np.array([d[0] for d in done] + [x[-1]])
    return UnstableGraph(breaks, [d[1] for d in done], max(d[2] for d in done))


def graph_from_points(x_of_y: Callable, y0: float, y1: float, deg: int = 24,
                      label: str = "") -> StableGraph:
    h = Chebyshev.interpolate(lambda y: x_of_y(np.asarray(y, float)), deg, domain=[y0, y1])
    return StableGraph(h, y0, y1, label)


def pullback_component(p: MapParams, g: StableGraph, side: int, y0: float = None,
                       y1: float = None, deg: int = 24, label: str = "") -> StableGraph:
    """Left (``side=-1``) or right (``side=+1``) arm of ``f^{-1}(g)`` as a graph.

    Uses the contraction ``x = side * sqrt((y + 1 - h(b x)) / a)``, valid while
    the arm stays away from the vertex of the pullback parabola.
    """
    if not p.classical:
        raise NotImplementedError("explicit pullback graphs need the classical family")
    y0 = g.y0 if y0 is None else y0
    y1 = g.y1 if y1 is None else y1

    def arm(y):
        x = np.full_like(y, side * 0.5)
        for _ in range(200):
            arg = (y + 1.0 - g(p.b * x)) / p.a
            if np.any(arg <= 0):
                raise ValueError("pullback arm reaches the parabola vertex")
            xn = side * np.sqrt(arg)
            if np.max(np.abs(xn - x)) < 1e-16:
                x = xn
                break
            x = xn
        return x

    return graph_from_points(arm, y0, y1, deg, label)


def local_stable_graph(p: MapParams, s: SaddleData, half_height: float, deg: int = 24,
                       tol: float = 1e-15, maxiter: int = 200) -> StableGraph:
    """Local stable manifold of ``s`` as a graph, by fixed-point pullback iteration.

    The arm of ``f^{-1}`` of the current graph on the saddle's side is a
    contraction towards ``W^s_loc(s)``.
    """
    side = 1 if s.z[0] > 0 else -1
    y0, y1 = -half_height, half_height
    k = s.v_s[0] / s.v_s[1]
    g = graph_from_points(lambda y: s.z[0] + (y - s.z[1]) * k, y0, y1, deg)
    yy = np.linspace(y0, y1, 257)
    for _ in range(maxiter):
        gn = pullback_component(p, g, side, y0, y1, deg)
        if np.max(np.abs(gn(yy) - g(yy))) < tol:
            return gn
        g = gn
    return g
