"""First-return structure on Theta: alpha curves, return times, proper rectangles.

Every alpha curve of the classical family is an explicit graph:

* ``tilde_alpha[n]`` and ``alpha[n]`` are near-vertical graphs ``x = h(y)``;
  ``tilde_alpha[n]`` is the left arm of the preimage of ``tilde_alpha[n-1]`` and
  ``alpha[n]`` the right arm of the preimage of ``tilde_alpha[n]``.
* The two arms of ``f^{-1}(alpha[n])`` form the parabola ``y = G_n(x)``;
  its right/left parts inside Theta are ``alpha_{n+1}^+`` and ``alpha_{n+1}^-``.

A point ``z`` of Theta returns at time ``n + 1`` exactly when
``G_{n-1}(x) <= y < G_n(x)``, and never returns when it lies above the escape
parabola (the set S).  Rectangles are stored by their trace on one unstable
slice (a graph ``y = u(x)`` fitted to the bottom side of Theta), where they are
nested intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .bifurcation import RegionGeometry
from .core import MapParams, PlanePoint, eval_map, jacobian
from .errors import (ComponentAmbiguous, HorizonExceeded, InsufficientSamples,
                     ResolutionLoss)
from .manifold import (Curve, PullbackParabola, StableGraph, UnstableGraph, pullback_component,
                       unstable_graph)

NEVER = math.inf


# ---------------------------------------------------------------- unstable slice

UnstableSlice = UnstableGraph


def theta_slices(geo: RegionGeometry) -> tuple[UnstableGraph, UnstableGraph]:
    """Bottom and top unstable sides of Theta as graphs."""
    out = []
    for g, c in ((geo.bottom_graph, geo.Theta["bottom"]), (geo.top_graph, geo.Theta["top"])):
        if g is None:
            g = unstable_graph(c)
        # Theta's unstable sides end exactly on alpha_1^{+-}
        out.append(g.restrict(float(c.samples[0, 0]), float(c.samples[-1, 0])))
    return out[0], out[1]


# ---------------------------------------------------------------- alpha family

@dataclass
class AlphaFamily:
    tilde: list                 # StableGraph, tilde_alpha[0] = alpha_1^+
    right: list                 # StableGraph alpha[n]
    parabolas: list             # PullbackParabola G_n, arms alpha_{n+1}^{+-}
    escape: PullbackParabola
    n_max: int
    bottom: UnstableSlice = None
    top: UnstableSlice = None
    checks: dict = field(default_factory=dict)
    x_split: float = 0.0        # closest approach of the bottom slice to the escape parabola

    # curve views ------------------------------------------------------
    @property
    def tilde_alpha(self) -> list:
        return [g.curve() for g in self.tilde]

    def arm(self, n: int, side: int, samples: int = 401) -> Curve:
        """``alpha_n^+`` (side=+1) or ``alpha_n^-`` (side=-1) between the unstable sides, n >= 1."""
        G = self.parabolas[n - 1]
        xb = self._cross(G, self.bottom, side)
        xt = self._cross(G, self.top, side)
        if xb is None:
            raise ValueError(f"alpha_{n} does not meet the bottom of Theta")
        if xt is None:   # shallow arms leave Theta through its side
            xt = self.top.x1 if side > 0 else self.top.x0
        x = np.linspace(xb, xt, samples)
        pts = np.column_stack([x, G(x)])
        tans = np.column_stack([np.ones(samples), G.deriv(x)])
        return Curve.from_points(pts, tans / np.linalg.norm(tans, axis=1, keepdims=True), "derived")

    @property
    def alpha_plus(self) -> list:
        return [self.arm(n, +1) for n in range(1, self.n_max + 2)]

    @property
    def alpha_minus(self) -> list:
        return [self.arm(n, -1) for n in range(1, self.n_max + 2)]

    def _cross(self, G: PullbackParabola, s: UnstableSlice, side: int) -> Optional[float]:
        xv, _ = self.escape.vertex()
        f = lambda x: float(s.u(x) - G(x))
        lo, hi = (xv, s.x1) if side > 0 else (s.x0, xv)
        fl, fh = f(lo), f(hi)
        for x, v in ((lo, fl), (hi, fh)):
            if abs(v) < 1e-13:   # alpha_1 ends exactly on the slice corners
                return x
        if fl * fh > 0:
            return None
        return brentq(f, lo, hi, xtol=1e-16, rtol=1e-15)

    # membership ---------------------------------------------------------
    def level(self, z) -> np.ndarray:
        """Sandwich return time of points of Theta: ``n + 1`` when ``G_{n-1} <= y < G_n``.

        Returns 0 below ``alpha_1``, ``NEVER`` in the escape cup and ``-1`` when
        the point lies above ``G_{n_max}`` but below the escape parabola.
        """
        z = np.atleast_2d(np.asarray(z, float))
        x, y = z[:, 0], z[:, 1]
        out = np.full(len(z), -1.0)
        done = np.zeros(len(z), bool)
        for n, G in enumerate(self.parabolas):
            hit = ~done & (y < G(x))
            out[hit] = n + 1
            done |= hit
        out[~done & (self.escape.gap(z) >= 0)] = NEVER
        out[out == 1] = 0            # strictly below alpha_1: outside Theta
        return out

    def in_S(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, float))
        below_top = z[:, 1] <= self.top.u(z[:, 0]) if self.top is not None else True
        return (self.escape.gap(z) >= 0) & below_top


def build_alpha_family(p: MapParams, geo: RegionGeometry, n_max: int = 20,
                       hausdorff_tol: float = 1e-9) -> AlphaFamily:
    if n_max > 25:
        raise ValueError("n_max must be at most 25")
    tilde = [geo.alpha1_plus]
    for n in range(1, n_max + 1):
        try:
            tilde.append(pullback_component(p, tilde[-1], -1, label=f"tilde_alpha{n}"))
        except ValueError as exc:
            raise ComponentAmbiguous(f"left component of tilde_alpha{n}: {exc}") from exc
    right = [pullback_component(p, g, +1, label=f"alpha{n}") for n, g in enumerate(tilde)]
    parabolas = [PullbackParabola(g, p.a, p.b, f"G{n}") for n, g in enumerate(right)]
    fam = AlphaFamily(tilde, right, parabolas, geo.parabola, n_max, *theta_slices(geo))
    sl, E = fam.bottom, fam.escape
    fam.x_split = brentq(lambda x: float(E.deriv(x) - sl.u(x, der=1)), sl.x0, sl.x1,
                         xtol=1e-16, rtol=1e-15)
    fam.checks = _family_checks(p, geo, fam, hausdorff_tol)
    return fam


def _family_checks(p: MapParams, geo: RegionGeometry, fam: AlphaFamily, tol: float) -> dict:
    y = np.linspace(-p.b, p.b, 201)
    img_err = []
    for n in range(1, len(fam.tilde)):
        img = eval_map(p, np.column_stack([fam.tilde[n](y), y]))
        img_err.append(float(np.max(np.abs(fam.tilde[n - 1].side(img)))))
    ref = geo.alpha0_minus
    dist = [float(np.max(np.abs(g(y) - ref(y)))) for g in fam.tilde]
    # spacing of consecutive parabolas at the vertex abscissa
    xv, _ = fam.escape.vertex()
    gaps = [float(fam.escape(xv) - G(xv)) for G in fam.parabolas]
    rates = [gaps[k + 1] / gaps[k] for k in range(len(gaps) - 1) if gaps[k] > 0]
    return {"image_error_max": max(img_err), "image_ok": max(img_err) <= tol,
            "dist_to_alpha0_minus": dist,
            "dist_decreasing": bool(np.all(np.diff(dist) < 0)),
            "vertex_gaps": gaps, "gap_rates": rates,
            "slice_fit_error": fam.bottom.fit_error}


# ---------------------------------------------------------------- return times

def first_return_time(p: MapParams, geo: RegionGeometry, fam: AlphaFamily, z,
                      horizon: int = 400, band: float = 1e-9):
    """First return time of ``z`` in Theta by iteration; ``NEVER`` inside S."""
    z = np.asarray(z, float)
    if not geo.in_Theta(z, band)[0]:
        raise ValueError("point is not in Theta")
    if fam.in_S(z)[0]:
        return NEVER
    w = z.copy()
    for k in range(1, horizon + 1):
        w = eval_map(p, w)
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 10:
            break
        if geo.in_Theta(w, band)[0]:
            return k
    raise HorizonExceeded(f"no return within {horizon} steps and not certified in S")


# ---------------------------------------------------------------- rectangles

def symbol(side: int, r: int) -> int:
    """Partition symbol: ``+r`` for the right component, ``-r`` for the left one."""
    return int(side) * int(r)


@dataclass
class ProperRectangle:
    word: tuple                  # partition symbols
    depth: int
    tau: int
    interval: tuple              # (x_lo, x_hi) on the slice
    unstable_length: float = 0.0
    sample_points: list = field(default_factory=list, repr=False)
    sides: Optional[dict] = field(default=None, repr=False)

    @property
    def returns(self) -> list:
        """Partial sums of the return times (times the orbit is back in Theta)."""
        return list(np.cumsum([abs(s) for s in self.word]))

    def to_dict(self) -> dict:
        return {"word": list(self.word), "n": self.depth, "tau": self.tau,
                "x_lo": self.interval[0], "x_hi": self.interval[1],
                "unstable_length": self.unstable_length}


def _iterate(p: MapParams, pts: np.ndarray, n: int) -> np.ndarray:
    for _ in range(n):
        pts = eval_map(p, pts)
    return pts


def _bisect_many(g, lo: np.ndarray, hi: np.ndarray, maxiter: int = 200) -> np.ndarray:
    """Vectorised bisection for roots of ``g`` (elementwise) bracketed by ``lo, hi``."""
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    glo = g(lo)
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        gm = g(mid)
        left = np.sign(gm) == np.sign(glo)
        lo = np.where(left, mid, lo)
        glo = np.where(left, gm, glo)
        hi = np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _children(p: MapParams, fam: AlphaFamily, sl: UnstableSlice, lo: float, hi: float,
              tau: int, r_max: int):
    """Sub-intervals of ``[lo, hi]`` whose ``f^tau`` image lies in each P_1 component.

    The image is split where it comes closest to the escape parabola; a level curve
    that does not cross the image on one side yields no child there.
    """
    E = fam.escape
    F = lambda x: _iterate(p, sl.points(x), tau)

    def dgap(x):
        z, v = sl.points(x), sl.tangents(x)
        # escaping images give nan here, which fails the sign test below
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(tau):
                v = np.einsum("kij,kj->ki", jacobian(p, z), v)
                v /= np.linalg.norm(v, axis=1, keepdims=True)
                z = eval_map(p, z)
            return E.deriv(z[:, 0]) * v[:, 0] - v[:, 1]

    d_lo, d_hi = dgap(np.array([lo, hi]))
    if not d_lo * d_hi < 0:
        raise ComponentAmbiguous("image has no closest approach to the escape parabola")
    split = _bisect_many(dgap, np.array([lo]), np.array([hi]))[0]
    x_split = F(np.array([split]))[0, 0]
    out = []
    K = min(r_max, len(fam.parabolas))
    ks = np.arange(1, K)
    gfun = lambda x: np.array([z[1] - fam.parabolas[k](z[0]) for z, k in zip(F(x), ks)])
    for a, b_ in ((lo, split), (split, hi)):
        side = 1 if F(np.array([0.5 * (a + b_)]))[0, 0] > x_split else -1
        end = a if abs(a - split) > abs(b_ - split) else b_          # endpoint on alpha_1
        e_end, e_split = np.full(len(ks), end), np.full(len(ks), split)
        crosses = np.sign(gfun(e_end)) != np.sign(gfun(e_split))
        # the levels are nested, so the crossing ones form a prefix
        m = int(np.argmin(crosses)) if not crosses.all() else len(ks)
        roots = _bisect_many(gfun, e_end, e_split)[:m] if m else np.empty(0)
        bounds = np.concatenate([[end], roots])
        for r in range(2, m + 2):
            xa, xb = sorted((bounds[r - 2], bounds[r - 1]))
            out.append((symbol(side, r), r, xa, xb))
    return out


def build_proper_rectangles(p: MapParams, geo: RegionGeometry, fam: AlphaFamily,
                            depth: int = 3, tau_cap: int = 20, slice_: UnstableSlice = None,
                            samples: int = 5, strict: bool = False,
                            report: Optional[dict] = None) -> list:
    """Proper rectangles of depths ``1..depth`` with ``tau <= tau_cap``, traced on the slice."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    sl = slice_ if slice_ is not None else fam.bottom
    out, lost = [], 0
    frontier = [((), 0, sl.x0, sl.x1)]
    for n in range(1, depth + 1):
        nxt = []
        for word, tau, lo, hi in frontier:
            for sym, r, xa, xb in _children(p, fam, sl, lo, hi, tau, tau_cap - tau):
                if tau + r > tau_cap:
                    continue
                if xb - xa <= 64 * np.finfo(float).eps * max(1.0, abs(xa)):
                    if strict:
                        raise ResolutionLoss(f"rectangle {word + (sym,)} thinner than sampling")
                    lost += 1
                    continue
                xs = np.linspace(xa, xb, samples + 2)[1:-1]
                rect = ProperRectangle(word + (sym,), n, tau + r, (float(xa), float(xb)),
                                       sl.arclength(xa, xb),
                                       [PlanePoint(float(a), float(b)) for a, b in sl.points(xs)])
                out.append(rect)
                nxt.append((rect.word, rect.tau, xa, xb))
        frontier = nxt
    if report is not None:
        report.update({"count": len(out), "resolution_lost": lost, "depth": depth,
                       "tau_cap": tau_cap})
    return out


def rectangle_sides(p: MapParams, geo: RegionGeometry, rect: ProperRectangle,
                    sl: UnstableSlice, **leaf_kw) -> dict:
    """Materialise the four sides: stable leaves through the interval ends and the
    pieces of the unstable sides of Theta between them."""
    from .recurrence import build_stable_leaf
    left = build_stable_leaf(p, sl.points(rect.interval[0])[0], geo=geo, **leaf_kw).curve
    right = build_stable_leaf(p, sl.points(rect.interval[1])[0], geo=geo, **leaf_kw).curve
    xt0, xt1 = left.samples[-1, 0], right.samples[-1, 0]
    top = geo.Theta["top"]
    keep = (top.samples[:, 0] >= min(xt0, xt1)) & (top.samples[:, 0] <= max(xt0, xt1))
    top_pts = np.concatenate([[left.samples[-1]], top.samples[keep], [right.samples[-1]]])
    rect.sides = {"left": left, "right": right,
                  "bottom": sl.curve(*rect.interval, n=65),
                  "top": Curve.from_points(top_pts)}
    return rect.sides


def check_nesting(rects: list) -> tuple[bool, int]:
    """Every pair of slice intervals is nested or disjoint (shared endpoints allowed)."""
    if not rects:
        return True, 0
    lo = np.array([r.interval[0] for r in rects])
    hi = np.array([r.interval[1] for r in rects])
    bad = 0
    for i in range(len(rects)):
        overlap = (np.minimum(hi[i], hi) - np.maximum(lo[i], lo)) > 0
        nested = ((lo[i] <= lo) & (hi <= hi[i])) | ((lo <= lo[i]) & (hi[i] <= hi))
        bad += int(np.count_nonzero(overlap & ~nested))
    return bad == 0, bad // 2


def expansion_rate(rects: list) -> float:
    """Largest ``lam`` with ``length <= exp(-lam * n)`` for every rectangle."""
    return float(min(-math.log(r.unstable_length) / r.depth for r in rects))


# ---------------------------------------------------------------- distortion

@dataclass
class DistortionReport:
    word: tuple
    max_log_ratio: float
    pairs_sampled: int
    slope: float                  # fitted C in |log ratio| <= C |f^tau x - f^tau y|
    max_expansion_log: float      # max over samples of log |Df^tau v|
    tau: int

    def to_dict(self) -> dict:
        return {"word": list(self.word), "tau": self.tau, "max_log_ratio": self.max_log_ratio,
                "pairs_sampled": self.pairs_sampled, "slope": self.slope,
                "max_expansion_log": self.max_expansion_log}


def log_derivative(p: MapParams, pts: np.ndarray, tans: np.ndarray, n: int):
    """``log |Df^n v|`` and ``f^n`` for arrays of points and tangent vectors."""
    z, v = pts.copy(), tans.copy()
    acc = np.zeros(len(z))
    for _ in range(n):
        v = np.einsum("kij,kj->ki", jacobian(p, z), v)
        nv = np.linalg.norm(v, axis=1)
        acc += np.log(nv)
        v /= nv[:, None]
        z = eval_map(p, z)
    return acc, z


def distortion_scan(p: MapParams, rect: ProperRectangle, sl: UnstableSlice,
                    pairs: int = 64, seed: int = 0) -> DistortionReport:
    xa, xb = rect.interval
    m = max(2, int(math.ceil(math.sqrt(2 * pairs))) + 1)
    xs = np.linspace(xa, xb, m)
    if len(np.unique(xs)) < 2:
        raise InsufficientSamples("rectangle too thin for two distinct samples")
    lg, img = log_derivative(p, sl.points(xs), sl.tangents(xs), rect.tau)
    i, j = np.triu_indices(m, 1)
    rng = np.random.default_rng(seed)
    if len(i) > pairs:
        pick = rng.choice(len(i), pairs, replace=False)
        i, j = i[pick], j[pick]
    ratio = np.abs(lg[i] - lg[j])
    dist = np.linalg.norm(img[i] - img[j], axis=1)
    slope = float(np.dot(dist, ratio) / np.dot(dist, dist)) if np.any(dist > 0) else float("nan")
    return DistortionReport(rect.word, float(ratio.max()), len(i), slope, float(lg.max()), rect.tau)


# ---------------------------------------------------------------- coding

def itinerary(p: MapParams, fam: AlphaFamily, z, n_symbols: int) -> tuple:
    """First ``n_symbols`` partition symbols of ``z`` under the return map (sandwich levels)."""
    z = np.asarray(z, float)
    out = []
    for _ in range(n_symbols):
        r = fam.level(z)[0]
        if not (r >= 2 and np.isfinite(r)):
            break
        out.append(symbol(1 if z[0] > fam.x_split else -1, int(r)))
        z = _iterate(p, z[None, :], int(r))[0]
    return tuple(out)


def decode(p: MapParams, fam: AlphaFamily, word, sl: UnstableSlice = None) -> tuple:
    """Slice interval of the cylinder of a finite word (nested child selection)."""
    sl = sl if sl is not None else fam.bottom
    lo, hi, tau = sl.x0, sl.x1, 0
    for sym in word:
        kids = {s: (a, b) for s, _, a, b in _children(p, fam, sl, lo, hi, tau, abs(sym))}
        if sym not in kids:
            raise ComponentAmbiguous(f"symbol {sym} unavailable at this depth")
        lo, hi = kids[sym]
        tau += abs(sym)
    return lo, hi, tau


def decode_periodic(p: MapParams, fam: AlphaFamily, word, reps: int = 3,
                    sl: UnstableSlice = None) -> np.ndarray:
    """Periodic point coded by the bi-infinite repetition of ``word``.

    The cylinder of ``word * reps`` on the slice seeds a multiple-shooting solve of
    ``f^tau(z) = z`` with ``tau`` the total return time of one period.
    """
    from .thermo import _newton
    sl = sl if sl is not None else fam.bottom
    for k in range(reps, 0, -1):     # deep words only resolve with fewer repetitions
        try:
            lo, hi, _ = decode(p, fam, tuple(word) * k, sl)
            break
        except ComponentAmbiguous:
            if k == 1:
                raise
    tau = sum(abs(s) for s in word)
    z0 = sl.points(0.5 * (lo + hi))
    orb = np.empty((tau, 2))
    orb[0] = z0[0]
    for k in range(1, tau):
        orb[k] = eval_map(p, orb[k - 1])
    z, res = _newton(p, orb[None])
    if not res[0] <= 1e-10:
        raise ComponentAmbiguous("periodic decode did not converge")
    return z[0]
