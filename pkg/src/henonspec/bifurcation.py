"""First-bifurcation parameter, tangency point and the rectangle geometry around it.

For the classical (orientation reversing) family the tracked pair is the lowest
strand of ``W^u(P)`` crossing the critical strip and the parabola
``f^{-1}(alpha_0^+)``, a component of ``W^s(Q)``.  Above ``a*`` the strand
crosses the parabola twice; below it misses it.  The bisection decides the
crossing count from the sign of the refined maximum of the gap
``y_strand(x) - G(x)`` (the parabola is ``y = G(x)``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import MapParams, PlanePoint, SaddleData, eval_map, find_saddles, jacobian
from .errors import (BracketInvalid, GeometryInconsistent, HenonError, ManifoldGrowthFailed)
from .manifold import (Curve, GrowthPolicy, ManifoldBranch, PullbackParabola, StableGraph,
                       UnstableGraph, local_stable_graph, pullback_component, sample_branch,
                       unstable_graph, unstable_graph_from_points)

STRIP_WINDOW = 0.5     # |x| window in which strands are compared with the parabola


# ---------------------------------------------------------------- stable sides

@dataclass
class StableSides:
    alpha0_minus: StableGraph      # local W^s(Q), left stable side of R
    alpha0_plus: StableGraph       # right arm of f^{-1} alpha0_minus
    parabola: PullbackParabola     # f^{-1} alpha0_plus


def stable_sides(p: MapParams, Q: Optional[SaddleData] = None) -> StableSides:
    if Q is None:
        _, Q = find_saddles(p)
    h = 2.0 * p.b
    am = local_stable_graph(p, Q, h)
    am.label = "alpha0-"
    ap = pullback_component(p, am, +1, label="alpha0+")
    return StableSides(am, ap, PullbackParabola(ap, p.a, p.b, "parabola"))


# ---------------------------------------------------------------- strands

@dataclass
class StrandPiece:
    """A fold-free piece of a manifold branch, addressed by its growth-parameter range."""

    branch: ManifoldBranch
    t_lo: float
    t_hi: float

    def points(self, t) -> np.ndarray:
        pts, _, _ = self.branch.evaluate(np.atleast_1d(t))
        return pts

    def point_tangent(self, t):
        pts, tans, _ = self.branch.evaluate(np.atleast_1d(t))
        return pts, tans

    def sample(self, policy: Optional[GrowthPolicy] = None) -> Curve:
        pol = policy or GrowthPolicy(max_step=0.002, bbox=(-3, 3, -1, 1))
        return sample_branch(self.branch, self.t_lo, self.t_hi, pol)


def growth_horizon(s0: float, lam: float, extra: int = 7) -> int:
    return int(math.ceil(-math.log(s0) / math.log(abs(lam)))) + extra


def strand_pieces(p: MapParams, saddle: SaddleData, T: float,
                  policy: Optional[GrowthPolicy] = None) -> list[tuple[float, StrandPiece]]:
    """Every fold-free piece of ``W^u(saddle)`` crossing ``x = 0``, with its crossing height.

    Both branches of the manifold are grown for ``t`` in ``[0, T]``; a piece is
    delimited by the folds (sign changes of the tangent's x component) or bounding
    box exits on either side of its crossing.
    """
    pol = policy or GrowthPolicy(bbox=(-1.6, 1.6, -0.25, 0.25))
    out = []
    for br in (1, -1):
        mb = ManifoldBranch(p, saddle, "unstable", br, pol.s0)
        u = sample_branch(mb, 0.0, T, pol)
        if len(u) < 3:
            continue
        x = u.samples[:, 0]
        m = u.joined_mask()
        cr = np.flatnonzero(m & (np.sign(x[:-1]) != np.sign(x[1:])))
        sx = np.sign(u.tangents[:, 0])
        # piece boundaries: a fold or a break between consecutive samples
        cut = ~m | (sx[:-1] != sx[1:])
        cut_idx = np.flatnonzero(cut)
        # nested strands can be closer than the chord error, so heights are exact
        yc = _crossing_heights(mb, u.params[cr], u.params[cr + 1])
        for i, y in zip(cr, yc):
            k = np.searchsorted(cut_idx, i)
            lo = cut_idx[k - 1] + 1 if k > 0 else 0
            hi = cut_idx[k] if k < len(cut_idx) else len(x) - 1
            out.append((float(y), StrandPiece(mb, float(u.params[lo]), float(u.params[hi]))))
    if not out:
        raise ManifoldGrowthFailed("no unstable strand crosses the critical strip")
    return out


def _crossing_heights(mb: ManifoldBranch, ta: np.ndarray, tb: np.ndarray,
                      iters: int = 60) -> np.ndarray:
    """Heights where ``mb`` crosses ``x = 0``, bisecting every bracket at once."""
    ta, tb = np.array(ta, float), np.array(tb, float)
    if len(ta) == 0:
        return np.empty(0)
    sa = np.sign(mb.evaluate(ta)[0][:, 0])
    for _ in range(iters):
        tm = 0.5 * (ta + tb)
        if np.all(tm == ta) or np.all(tm == tb):
            break
        sm = np.sign(mb.evaluate(tm)[0][:, 0])
        left = sm == sa
        ta = np.where(left, tm, ta)
        tb = np.where(left, tb, tm)
    pa, pb = mb.evaluate(ta)[0], mb.evaluate(tb)[0]
    w = pa[:, 0] / np.where(pa[:, 0] == pb[:, 0], 1.0, pa[:, 0] - pb[:, 0])
    return (1 - w) * pa[:, 1] + w * pb[:, 1]


@dataclass
class OuterFold:
    """The outermost C-shaped fold of ``W^u(saddle)``.

    ``upper`` is the arm through the saddle, made of the two branches on either
    side of it (``upper_minus`` runs left from the saddle, ``upper_plus`` right
    up to the fold); ``lower`` is the arm after the fold.
    """
    lower: StrandPiece
    upper_minus: StrandPiece
    upper_plus: StrandPiece

    def upper_points(self, n: int = 20001) -> np.ndarray:
        out = []
        for sp in (self.upper_minus, self.upper_plus):
            t = np.linspace(sp.t_lo, sp.t_hi, n)
            out.append(sp.points(t))
        pts = np.concatenate(out)
        return pts[np.argsort(pts[:, 0])]


def _cuts(u: Curve) -> np.ndarray:
    sx = np.sign(u.tangents[:, 0])
    return np.flatnonzero(~u.joined_mask() | (sx[:-1] != sx[1:]))


def outer_fold(p: MapParams, saddle: SaddleData, T: float,
               policy: Optional[GrowthPolicy] = None) -> OuterFold:
    pol = policy or GrowthPolicy(bbox=(-1.6, 1.6, -0.25, 0.25))
    pieces = {}
    for br in (1, -1):
        mb = ManifoldBranch(p, saddle, "unstable", br, pol.s0)
        u = sample_branch(mb, 0.0, T, pol)
        c = _cuts(u)
        if len(c) < 1 + (br == 1):
            raise ManifoldGrowthFailed("unstable branch too short to contain the outer fold")
        pieces[br] = (mb, u, c)
    mb, u, c = pieces[1]
    # the first cut of the branch heading to the tip is the fold itself
    if u.samples[c[0], 0] < saddle.z[0]:
        mb, u, c = pieces[-1]
        other = pieces[1]
    else:
        other = pieces[-1]
    plus = StrandPiece(mb, 0.0, float(u.params[c[0]]))
    lower = StrandPiece(mb, float(u.params[c[0] + 1]), float(u.params[c[1]]))
    mbo, uo, co = other
    minus = StrandPiece(mbo, 0.0, float(uo.params[co[0]]))
    return OuterFold(lower, minus, plus)


def find_strands(p: MapParams, saddle: SaddleData, T: float,
                 policy: Optional[GrowthPolicy] = None) -> tuple[StrandPiece, StrandPiece]:
    """Lowest and highest pieces of ``W^u(saddle)`` crossing ``x = 0``."""
    pieces = strand_pieces(p, saddle, T, policy)
    ys = [y for y, _ in pieces]
    return pieces[int(np.argmin(ys))][1], pieces[int(np.argmax(ys))][1]


def spanning_top(pieces, left: StableGraph, right: StableGraph) -> StrandPiece:
    """Highest crossing piece whose ends lie beyond both stable sides."""
    for y, sp in sorted(pieces, key=lambda e: -e[0]):
        ends = sp.points(np.array([sp.t_lo, sp.t_hi]))
        e = ends[np.argsort(ends[:, 0])]
        if left.side(e[0]) < 0 and right.side(e[1]) > 0:
            return sp
    raise GeometryInconsistent("no unstable strand spans the rectangle")


def fold_neighbour(strand: StrandPiece, span: float = 1.0) -> StrandPiece:
    """The piece across the fold at the right-hand (larger x) end of ``strand``."""
    ends = strand.points(np.array([strand.t_lo, strand.t_hi]))
    forward = ends[1, 0] > ends[0, 0]
    t0 = strand.t_hi if forward else strand.t_lo
    width = strand.t_hi - strand.t_lo
    t1 = t0 + (span * width if forward else -span * width)
    t = np.linspace(min(t0, t1), max(t0, t1), 20001)
    _, tans = strand.point_tangent(t)
    if not forward:
        t, tans = t[::-1], tans[::-1]
    sx = np.sign(tans[:, 0])
    # skip the tail of the current piece up to the fold, then stop at the next fold
    k = int(np.argmax(sx != sx[0]))
    if k == 0:
        raise ManifoldGrowthFailed("no fold found next to the strand")
    nxt = np.flatnonzero(sx[k:] != sx[k])
    if len(nxt) == 0:
        raise ManifoldGrowthFailed("neighbouring piece longer than the search span")
    ta, tb = t[k], t[k + nxt[0] - 1]
    return StrandPiece(strand.branch, float(min(ta, tb)), float(max(ta, tb)))


@dataclass
class GapProfile:
    max_gap: float
    t_max: float
    point: np.ndarray
    crossings: list          # [(point, angle)]


def gap_profile(strand: StrandPiece, parabola: PullbackParabola, n: int = 4001) -> GapProfile:
    """Refined maximum of ``y - G(x)`` along the strand, and the crossings."""
    t = np.linspace(strand.t_lo, strand.t_hi, n)
    pts = strand.points(t)
    win = np.abs(pts[:, 0]) < STRIP_WINDOW
    if not np.any(win):
        raise ManifoldGrowthFailed("strand does not reach the critical strip")
    g = np.where(win, parabola.gap(pts), -np.inf)
    i = int(np.argmax(g))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, n - 1)]
    gfun = lambda s: float(parabola.gap(strand.points(s)[0]))
    r = minimize_scalar(lambda s: -gfun(s), bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-15})
    t_star = float(r.x)
    gmax = -float(r.fun)
    if gmax < g[i]:
        t_star, gmax = float(t[i]), float(g[i])

    def dgap(s):
        z, w = strand.point_tangent(s)
        return float(w[0, 1] - parabola.deriv(z[0, 0]) * w[0, 0])

    # the slope difference has a simple root at the maximum: far better conditioned
    if dgap(lo) * dgap(hi) < 0:
        t_star = brentq(dgap, lo, hi, xtol=1e-15, rtol=1e-15)
        gmax = max(gmax, gfun(t_star))
    cross = []
    if gmax > 0:
        # walk outwards from the maximum to the first negative samples
        for direction in (-1, 1):
            j = i
            while 0 <= j < n and win[j] and g[j] > 0:
                j += direction
            if not (0 <= j < n) or not win[j]:
                continue
            ta, tb = sorted((t[j], t_star))
            tr = brentq(gfun, ta, tb, xtol=1e-15, rtol=1e-15)
            z, w = strand.point_tangent(tr)
            slope_p = float(parabola.deriv(z[0, 0]))
            tp = np.array([1.0, slope_p]) / math.hypot(1.0, slope_p)
            ang = math.asin(min(1.0, abs(w[0, 0] * tp[1] - w[0, 1] * tp[0])))
            cross.append((tuple(map(float, z[0])), ang))
    return GapProfile(gmax, t_star, strand.points(t_star)[0], cross)


# ---------------------------------------------------------------- bifurcation

@dataclass
class BifurcationResult:
    a_star: float
    zeta0: PlanePoint
    orientation: str
    tangency_partner: str
    bracket_width: float
    b: float = 0.0
    bracket: tuple = ()
    counts: tuple = ()                  # crossing counts at (low, high) bracket ends
    quad_coeff: float = float("nan")    # c in gap(s) = gmax - c (s - s0)^2
    quad_residual: float = float("nan")
    growth_extra: int = 0
    strand_t: tuple = ()
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "a_star": self.a_star, "b": self.b,
            "zeta0": [self.zeta0.x, self.zeta0.y],
            "orientation": self.orientation, "tangency_partner": self.tangency_partner,
            "bracket_width": self.bracket_width, "bracket": list(self.bracket),
            "counts": list(self.counts), "quad_coeff": self.quad_coeff,
            "quad_residual": self.quad_residual, "growth_extra": self.growth_extra,
            "strand_t": list(self.strand_t), "iterations": self.iterations,
        }


def orientation_case(p: MapParams) -> tuple[str, str]:
    det = float(np.linalg.det(jacobian(p, (0.0, 0.0))))
    if det < 0:
        return "reversing", "Wu_P"
    return "preserving", "Wu_Q"


@dataclass
class _Probe:
    count: int
    profile: GapProfile
    strand: StrandPiece
    sides: StableSides


def probe(p: MapParams, extra: int, partner: str = "Wu_P", s0: float = 1e-7) -> _Probe:
    """Crossing count between the designated strand and the parabola at ``p.a``.

    The growth horizon is ``growth_horizon(s0, lambda_u, extra)`` so that the
    grown arclength is comparable across parameters.
    """
    P, Q = find_saddles(p)
    sides = stable_sides(p, Q)
    saddle = P if partner == "Wu_P" else Q
    low, _ = find_strands(p, saddle, growth_horizon(s0, saddle.lambda_u, extra))
    prof = gap_profile(low, sides.parabola)
    return _Probe(len(prof.crossings) if prof.max_gap > 0 else 0, prof, low, sides)


def _calibrate_extra(p: MapParams, partner: str, s0: float = 1e-7, max_extra: int = 14) -> int:
    """Smallest extra growth after which the lowest strand stops moving."""
    P, Q = find_saddles(p)
    saddle = P if partner == "Wu_P" else Q
    prev = None
    for extra in range(3, max_extra):
        low, _ = find_strands(p, saddle, growth_horizon(s0, saddle.lambda_u, extra))
        ymin = float(np.min(low.sample().samples[:, 1]))
        if prev is not None and abs(ymin - prev) < 1e-12:
            return extra + 1
        prev = ymin
    return max_extra


def find_first_bifurcation(b: float, a_bracket: tuple = (1.5, 2.5), tol: float = 1e-10,
                           template: Optional[MapParams] = None, log=None) -> BifurcationResult:
    """Bisect on the crossing count of the designated strand / parabola pair."""
    lo, hi = map(float, a_bracket)
    base = template or MapParams(hi, b)
    mk = lambda a: MapParams(a, b, base.phi_variant, base.lambda_const, base.delta,
                             base.map_fn, base.jac_fn, base.inv_fn)
    orientation, partner = orientation_case(mk(hi))
    try:
        extra = _calibrate_extra(mk(hi), partner)
        c_lo = probe(mk(lo), extra, partner).count
        c_hi = probe(mk(hi), extra, partner).count
    except HenonError as exc:
        if isinstance(exc, ManifoldGrowthFailed):
            raise
        raise ManifoldGrowthFailed(str(exc)) from exc
    if c_lo == c_hi:
        raise BracketInvalid(f"crossing counts equal at both ends ({c_lo}, {c_hi})")
    if not (c_lo == 0 and c_hi == 2):
        raise BracketInvalid(f"expected counts (0, 2) at the bracket ends, got ({c_lo}, {c_hi})")
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        c = probe(mk(mid), extra, partner).count
        if c == 0:
            lo = mid
        else:
            hi = mid
        it += 1
        if log:
            log(f"bisection {it}: [{lo:.15f}, {hi:.15f}] count={c}")
    a_star = 0.5 * (lo + hi)
    pr = probe(mk(a_star), extra, partner)
    z0 = pr.profile.point
    coef, resid = quadratic_fit(pr.strand, pr.sides.parabola, pr.profile.t_max)
    return BifurcationResult(a_star, PlanePoint(float(z0[0]), float(z0[1])), orientation, partner,
                             hi - lo, b, (lo, hi), (c_lo, c_hi), coef, resid, extra,
                             (pr.strand.t_lo, pr.strand.t_hi), it)


def quadratic_fit(strand: StrandPiece, parabola: PullbackParabola, t_star: float,
                  half_width: float = 0.02, n: int = 41) -> tuple[float, float]:
    """Fit ``gap(s) = g0 + g1 (s - s0) - c (s - s0)^2 + g3 (s - s0)^3`` around the tangency.

    ``s`` is the x coordinate along the strand (the strand is a graph over x near
    the strip).  Returns ``c`` and the relative rms residual of the fit.
    """
    # locate t values whose x spans the window around the tangency
    z0 = strand.points(t_star)[0]
    f = lambda t, target: float(strand.points(t)[0, 0]) - target
    ts = []
    for xt in np.linspace(z0[0] - half_width, z0[0] + half_width, n):
        try:
            ts.append(brentq(f, strand.t_lo, strand.t_hi, args=(xt,), xtol=1e-15))
        except ValueError:
            continue
    pts = strand.points(np.array(ts))
    s = pts[:, 0] - z0[0]
    g = parabola.gap(pts)
    coef = np.polyfit(s, g, 3)
    resid = g - np.polyval(coef, s)
    scale = max(np.max(np.abs(g)), 1e-300)
    return float(-coef[1]), float(np.sqrt(np.mean(resid ** 2)) / scale)


# ---------------------------------------------------------------- region geometry

@dataclass
class RegionGeometry:
    R: dict                 # sides: left, right, bottom, top (Curve)
    Theta: dict             # sides: left, right, bottom, top (Curve)
    S_domain: Curve         # closed lens boundary (parabola arc + unstable-side arc)
    I_delta: tuple
    p: MapParams = None
    alpha0_minus: StableGraph = None
    alpha0_plus: StableGraph = None
    alpha1_minus: StableGraph = None
    alpha1_plus: StableGraph = None
    parabola: PullbackParabola = None
    bottom: StrandPiece = None
    top: StrandPiece = None
    zeta0: np.ndarray = None
    checks: dict = field(default_factory=dict)
    bottom_graph: UnstableGraph = None
    top_graph: UnstableGraph = None

    # unstable sides as graphs y(x)
    def y_bottom(self, x):
        if self.bottom_graph is not None:
            return self.bottom_graph(x)
        c = self.R["bottom"]
        return np.interp(x, c.samples[:, 0], c.samples[:, 1])

    def y_top(self, x):
        if self.top_graph is not None:
            return self.top_graph(x)
        c = self.R["top"]
        return np.interp(x, c.samples[:, 0], c.samples[:, 1])

    def in_R(self, z, band: float = 0.0) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, float))
        x, y = z[:, 0], z[:, 1]
        return ((self.alpha0_minus.side(z) >= -band) & (self.alpha0_plus.side(z) <= band)
                & (y >= self.y_bottom(x) - band) & (y <= self.y_top(x) + band))

    def in_Theta(self, z, band: float = 0.0) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, float))
        x, y = z[:, 0], z[:, 1]
        return ((self.alpha1_minus.side(z) >= -band) & (self.alpha1_plus.side(z) <= band)
                & (y >= self.y_bottom(x) - band) & (y <= self.y_top(x) + band))

    def in_S(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, float))
        return (self.parabola.gap(z) >= 0) & (z[:, 1] <= self.y_top(z[:, 0]))

    def in_I_delta(self, z) -> np.ndarray:
        z = np.atleast_2d(np.asarray(z, float))
        return np.abs(z[:, 0]) < self.I_delta[1]

    def summary(self) -> dict:
        out = {"I_delta": list(self.I_delta), "checks": self.checks}
        for name in ("R", "Theta"):
            out[name] = {k: {"n": len(c), "length": c.length} for k, c in getattr(self, name).items()}
        out["S_domain"] = {"n": len(self.S_domain), "length": self.S_domain.length}
        return out


def _clip_strand(strand: StrandPiece, left: StableGraph, right: StableGraph,
                 policy: Optional[GrowthPolicy] = None) -> Curve:
    """Piece of the strand between two stable graphs, oriented left to right."""
    fl = lambda t: float(left.side(strand.points(t)[0]))
    fr = lambda t: float(right.side(strand.points(t)[0]))
    t = np.linspace(strand.t_lo, strand.t_hi, 2001)
    pts = strand.points(t)
    sl = left.side(pts)
    sr = right.side(pts)
    inside = (sl >= 0) & (sr <= 0)
    if not np.any(inside):
        raise GeometryInconsistent("strand does not cross the region between the stable sides")
    idx = np.flatnonzero(inside)
    i0, i1 = idx[0], idx[-1]
    if i0 == 0 or i1 == len(t) - 1:
        raise GeometryInconsistent("strand does not reach both stable sides")
    ends = []
    for ia, ib in ((i0 - 1, i0), (i1, i1 + 1)):
        fa = fl if (sl[ia] < 0) != (sl[ib] < 0) else fr
        ends.append(brentq(fa, t[ia], t[ib], xtol=1e-15, rtol=1e-15))
    mb = strand.branch
    pol = policy or GrowthPolicy(max_step=0.002, bbox=(-3, 3, -1, 1))
    c = sample_branch(mb, min(ends), max(ends), pol)
    if c.samples[0, 0] > c.samples[-1, 0]:
        ev = c.evaluator
        c = Curve.from_points(c.samples[::-1], -c.tangents[::-1], c.origin, c.params[::-1])
        c.evaluator = ev
    return c


def _graph_between(g: StableGraph, bottom: Curve, top: Curve, origin: str, n: int = 201) -> Curve:
    """Piece of a stable graph between the two unstable sides."""
    def y_end(side: Curve):
        f = lambda y: float(np.interp(g(y), side.samples[:, 0], side.samples[:, 1])) - y
        return brentq(f, g.y0, g.y1, xtol=1e-16)
    y0, y1 = y_end(bottom), y_end(top)
    y = np.linspace(y0, y1, n)
    pts = np.column_stack([g(y), y])
    tans = np.column_stack([g.slope_dx_dy(y), np.ones(n)])
    return Curve.from_points(pts, tans, origin)


def build_region_geometry(p: MapParams, bif: BifurcationResult,
                          hausdorff_tol: float = 1e-9) -> RegionGeometry:
    P, Q = find_saddles(p)
    sides = stable_sides(p, Q)
    saddle = P if bif.tangency_partner == "Wu_P" else Q
    fold = outer_fold(p, saddle, growth_horizon(1e-7, saddle.lambda_u, bif.growth_extra or 7))
    low, high = fold.lower, fold.upper_plus
    am, ap = sides.alpha0_minus, sides.alpha0_plus
    a1p = local_stable_graph(p, P, 2.0 * p.b)
    a1p.label = "alpha1+"
    a1m = pullback_component(p, a1p, -1, label="alpha1-")
    bottom = _clip_strand(low, am, ap)
    bottom_graph = unstable_graph(bottom)
    up = fold.upper_points()
    up = up[(up[:, 0] > am.x_mid - 0.02) & (up[:, 0] < ap.x_mid + 0.005)]
    top_graph = unstable_graph_from_points(up[:, 0], up[:, 1])
    top = _clip_graph(top_graph, am, ap)
    R = {"left": _graph_between(am, bottom, top, "Ws_Q"),
         "right": _graph_between(ap, bottom, top, "Ws_Q"),
         "bottom": bottom, "top": top}
    th_bottom = _clip_graph(bottom_graph, a1m, a1p)
    th_top = _clip_graph(top_graph, a1m, a1p)
    Theta = {"left": _graph_between(a1m, bottom, top, "Ws_P"),
             "right": _graph_between(a1p, bottom, top, "Ws_P"),
             "bottom": th_bottom, "top": th_top}
    S = _lens_boundary(sides.parabola, top_graph)
    geo = RegionGeometry(R, Theta, S, (-p.delta, p.delta), p, am, ap, a1m, a1p,
                         sides.parabola, low, high, np.array(bif.zeta0, float),
                         bottom_graph=bottom_graph, top_graph=top_graph)
    geo.checks = _geometry_checks(p, geo, hausdorff_tol)
    return geo


def _clip_graph(g: UnstableGraph, left: StableGraph, right: StableGraph, n: int = 2001) -> Curve:
    """Piece of an unstable graph between two stable graphs."""
    side = lambda st: (lambda x: float(st.side(g.points(x))[0]))
    xl = brentq(side(left), g.x0, left.x_mid + 0.1, xtol=1e-16, rtol=1e-15)
    xr = brentq(side(right), right.x_mid - 0.1, g.x1, xtol=1e-16, rtol=1e-15)
    return g.curve(xl, xr, n)


def _lens_boundary(par: PullbackParabola, top: UnstableGraph, n: int = 401) -> Curve:
    """Boundary of the lens between the parabola and the top unstable side."""
    f = lambda x: float(par(x) - top(x))
    xv, _ = par.vertex()
    if f(xv) >= 0:
        raise GeometryInconsistent("parabola does not cross the top unstable side")
    xl = brentq(f, xv - 0.5, xv, xtol=1e-15)
    xr = brentq(f, xv, xv + 0.5, xtol=1e-15)
    xs = np.linspace(xl, xr, n)
    arc = np.column_stack([xs, par(xs)])
    topx = np.linspace(xr, xl, n)[1:]
    toparc = np.column_stack([topx, top(topx)])
    return Curve.from_points(np.concatenate([arc, toparc]), None, "derived")


def _geometry_checks(p: MapParams, geo: RegionGeometry, tol: float) -> dict:
    sq = math.sqrt(p.b)
    checks = {}
    # f(alpha0+) inside alpha0-
    y = np.linspace(geo.R["right"].samples[0, 1], geo.R["right"].samples[-1, 1], 201)
    img = eval_map(p, np.column_stack([geo.alpha0_plus(y), y]))
    checks["alpha0_plus_image_dist"] = float(np.max(np.abs(geo.alpha0_minus.side(img))))
    # R inside the box |x| < 2, |y| < sqrt(b)
    allpts = np.concatenate([c.samples for c in geo.R.values()])
    checks["R_in_box"] = bool(np.all(np.abs(allpts[:, 0]) < 2) and np.all(np.abs(allpts[:, 1]) < sq))
    # zeta0 on the bottom unstable side; f(zeta0) on alpha0+
    z0 = geo.zeta0
    b = geo.R["bottom"]
    checks["zeta0_side_dist"] = float(abs(geo.y_bottom(z0[0]) - z0[1]))
    checks["f_zeta0_stable_dist"] = float(abs(geo.alpha0_plus.side(eval_map(p, z0))))
    checks["zeta0_in_I_delta"] = bool(abs(z0[0]) < p.delta)
    bad = []
    if checks["alpha0_plus_image_dist"] > tol:
        bad.append("f(alpha0+) not inside alpha0-")
    if not checks["R_in_box"]:
        bad.append("R leaves |x|<2, |y|<sqrt(b)")
    if checks["zeta0_side_dist"] > 1e-6:
        bad.append("zeta0 not on the bottom unstable side")
    if not checks["zeta0_in_I_delta"]:
        bad.append("zeta0 outside I(delta)")
    if bad:
        raise GeometryInconsistent("; ".join(bad))
    return checks
