"""Critical points, binding, fold/bound periods, controlled points and stable leaves.

Operational conventions used throughout:

* ``e^s(z)`` is the most contracted direction of ``Df^k`` at ``z``, obtained by
  pulling a generic vector back along the forward orbit (``k`` = ``depth``,
  truncated when the orbit leaves the admissible box).
* The fold period of a return ``z`` with unstable direction ``v`` splits
  ``Df(z) v = A (1, 0) + B e^s(fz)``; it is the number of further steps after
  which the horizontal part ``|A| |Df^j (1,0)|`` dominates ``|B| |Df^j e^s|``.
* The bound period is the first ``p`` with ``slope(Df^p v) <= sqrt(b)`` and
  ``|Df^p v| >= exp(lambda p / 3)``.
* ``d_crit`` is the planar distance to the binding point; times that are not
  free returns to ``I(delta)`` satisfy the controlled/``G_m`` thresholds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import MapParams, PlanePoint, eval_map, jacobian
from .errors import (BindingUnavailable, FieldUndefined, MultipleCandidates, NoSignChange,
                     NotControlled, NotConverged, OrbitEscaped)
from .manifold import Curve, StableGraph

ADMISSIBLE_BOX = 4.0


def c_of_b(b: float) -> float:
    """The exponent constant ``c(b) = -1/log b``."""
    return -1.0 / math.log(b)


# ---------------------------------------------------------------- stable direction field

def _inverse_jacobian_apply(p: MapParams, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``Df(z)^{-1} w`` for arrays of points and vectors."""
    if p.classical:
        wx = w[..., 1] / p.b
        return np.stack([wx, w[..., 0] + 2.0 * p.a * z[..., 0] * wx], axis=-1)
    return np.linalg.solve(jacobian(p, z), w[..., None])[..., 0]


def stable_field(p: MapParams, z, depth: int = 8, seed=(0.8, 0.6), box: float = ADMISSIBLE_BOX):
    """Vectorised ``e^s`` at points ``z`` (shape ``(n, 2)``).

    Returns unit vectors (upward oriented) and the depth actually used per point.
    """
    z = np.atleast_2d(np.asarray(z, float))
    n = len(z)
    orb = np.empty((depth + 1, n, 2))
    orb[0] = z
    term = np.full(n, depth)
    alive = np.ones(n, bool)
    with np.errstate(all="ignore"):
        for i in range(depth):
            orb[i + 1] = eval_map(p, orb[i])
            out = ~(np.all(np.abs(orb[i + 1]) < box, axis=1))
            newly = alive & out
            term[newly] = i
            alive &= ~out
    w = np.tile(np.asarray(seed, float) / np.hypot(*seed), (n, 1))
    for i in range(depth, 0, -1):
        act = term >= i
        if not np.any(act):
            continue
        w[act] = _inverse_jacobian_apply(p, orb[i - 1][act], w[act])
        w[act] /= np.linalg.norm(w[act], axis=1, keepdims=True)
    w = np.where(w[:, 1:2] < 0, -w, w)
    return w, term


def stable_direction(p: MapParams, z, depth: int = 8, tol: float = 1e-10,
                     min_depth: int = 2) -> np.ndarray:
    """Most contracted direction of ``Df^depth`` at ``z``, checked against depth - 1."""
    e1, d1 = stable_field(p, [z], depth)
    if d1[0] < min_depth:
        raise FieldUndefined(f"orbit of {tuple(z)} leaves the admissible box after {d1[0]} steps")
    e2, _ = stable_field(p, [z], int(d1[0]) - 1)
    ang = abs(e1[0, 0] * e2[0, 1] - e1[0, 1] * e2[0, 0])
    if ang > tol:
        raise NotConverged(f"stable direction not converged (angle {ang:.2e})")
    return e1[0]


# ---------------------------------------------------------------- critical points

@dataclass
class CriticalPoint:
    location: PlanePoint
    host_curve: Optional[Curve] = field(default=None, repr=False)
    in_S: bool = False
    tangent: tuple = (1.0, 0.0)          # host tangent at the point
    alignment: float = 0.0               # |sin| of the angle between f(host) and e^s at f(point)
    param: float = float("nan")          # host parameter (growth t or arclength)

    @property
    def z(self) -> np.ndarray:
        return np.array(self.location, float)

    def to_dict(self) -> dict:
        return {"x": self.location.x, "y": self.location.y, "in_S": self.in_S,
                "tangent": list(self.tangent), "alignment": self.alignment}


def _alignment(p: MapParams, z: np.ndarray, t: np.ndarray, depth: int) -> np.ndarray:
    """Signed sine of the angle between ``Df(z) t`` and ``e^s(f z)``."""
    w = np.einsum("...ij,...j->...i", jacobian(p, z), t)
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    e, _ = stable_field(p, eval_map(p, z), depth)
    return w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]


def _curve_eval(gamma: Curve):
    """Parameter array and an evaluator ``s -> (points, tangents)`` for the curve."""
    if gamma.evaluator is not None and gamma.params is not None:
        def ev(s):
            pts, tans, _ = gamma.evaluator(np.atleast_1d(s))
            return pts, tans
        return gamma.params, ev
    s_all = gamma.arclength

    def ev(s):
        s = np.atleast_1d(s)
        pts = gamma.point_at(s)
        tx = np.interp(s, s_all, gamma.tangents[:, 0])
        ty = np.interp(s, s_all, gamma.tangents[:, 1])
        t = np.column_stack([tx, ty])
        return pts, t / np.linalg.norm(t, axis=1, keepdims=True)
    return s_all, ev


def find_critical_point(p: MapParams, gamma: Curve, geo=None, depth: int = 8,
                        refine: bool = True) -> CriticalPoint:
    """The point of ``gamma`` inside ``I(delta)`` whose image is tangent to ``e^s``."""
    par, ev = _curve_eval(gamma)
    pts, tans = gamma.samples, gamma.tangents
    inside = np.abs(pts[:, 0]) < p.delta
    if np.count_nonzero(inside) < 2:
        raise NoSignChange("curve does not cross I(delta)")
    idx = np.flatnonzero(inside)
    for attempt in range(2):
        sub_par = par[idx]
        pz, pt = ev(sub_par)
        f = _alignment(p, pz, pt, depth)
        joined = np.diff(idx) == 1
        sc = np.flatnonzero(joined & (np.sign(f[:-1]) != np.sign(f[1:])) & (f[:-1] != 0))
        if len(sc) == 1:
            break
        if len(sc) == 0:
            raise NoSignChange("host curve never aligns with the stable field inside I(delta)")
        if attempt == 0 and refine:
            # densify once and retry
            fine = np.linspace(sub_par[0], sub_par[-1], 8 * len(sub_par))
            par = fine
            pts, tans = ev(fine)
            idx = np.flatnonzero(np.abs(pts[:, 0]) < p.delta)
            continue
        raise MultipleCandidates(f"{len(sc)} critical point candidates on one curve")
    k = sc[0]
    g = lambda s: float(_alignment(p, *ev(s), depth)[0])
    s_star = brentq(g, sub_par[k], sub_par[k + 1], xtol=1e-15, rtol=1e-15)
    z, t = ev(s_star)
    in_s = bool(geo.in_S(z[0])[0]) if geo is not None else False
    return CriticalPoint(PlanePoint(float(z[0, 0]), float(z[0, 1])), gamma, in_s,
                         (float(t[0, 0]), float(t[0, 1])), abs(g(s_star)), float(s_star))


def critical_set_from_strands(p: MapParams, strands, geo=None, depth: int = 8) -> list:
    """Critical points of several host curves; curves without one are skipped."""
    out = []
    for c in strands:
        try:
            out.append(find_critical_point(p, c, geo, depth))
        except (NoSignChange, MultipleCandidates):
            continue
    return out


# ---------------------------------------------------------------- jets and binding

def second_derivative(p: MapParams, z: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``D^2 f(z)(u, u)``."""
    if p.classical:
        return np.array([-2.0 * p.a * u[0] * u[0], 0.0])
    h = 1e-6
    jp = jacobian(p, z + h * u)
    jm = jacobian(p, z - h * u)
    return (jp - jm) @ u / (2 * h)


def hermite_admissible(z, tz, zeta, tzeta, bound: float) -> bool:
    """Can ``z`` and ``zeta`` be joined by a cubic Hermite graph with slope and
    second derivative at most ``bound`` (given end tangents)?"""
    x0, y0 = z
    x1, y1 = zeta
    h = x1 - x0
    if h == 0 or tz[0] == 0 or tzeta[0] == 0:
        return False
    m0, m1 = tz[1] / tz[0], tzeta[1] / tzeta[0]
    s = np.linspace(0.0, 1.0, 65)
    # derivatives of the Hermite basis w.r.t. x
    d1 = ((6 * s * s - 6 * s) * y0 + (3 * s * s - 4 * s + 1) * h * m0
          + (-6 * s * s + 6 * s) * y1 + (3 * s * s - 2 * s) * h * m1) / h
    d2 = ((12 * s - 6) * y0 + (6 * s - 4) * h * m0 + (-12 * s + 6) * y1 + (6 * s - 2) * h * m1) / (h * h)
    return bool(np.max(np.abs(d1)) <= bound and np.max(np.abs(d2)) <= bound)


def jet_critical_point(p: MapParams, z: np.ndarray, tangent: np.ndarray, curv: np.ndarray,
                       depth: int = 8, span: float = None) -> CriticalPoint:
    """Critical point on the quadratic jet ``z + s T + s^2/2 K`` of the host curve."""
    span = span if span is not None else 2.5 * p.delta
    T = tangent / np.linalg.norm(tangent)

    def host(s):
        s = np.atleast_1d(s)[:, None]
        return z + s * T + 0.5 * s * s * curv, T + s * curv

    s = np.linspace(-span, span, 161)
    pts, tans = host(s)
    f = _alignment(p, pts, tans, depth)
    sc = np.flatnonzero((np.sign(f[:-1]) != np.sign(f[1:])) & np.isfinite(f[:-1]) & np.isfinite(f[1:]))
    if len(sc) == 0:
        raise BindingUnavailable("host jet has no critical point")
    # nearest sign change to the return point
    k = sc[np.argmin(np.abs(0.5 * (s[sc] + s[sc + 1])))]
    g = lambda u: float(_alignment(p, *host(u), depth)[0])
    u = brentq(g, s[k], s[k + 1], xtol=1e-15, rtol=1e-15)
    zz, tt = host(u)
    tt = tt[0] / np.linalg.norm(tt[0])
    return CriticalPoint(PlanePoint(float(zz[0, 0]), float(zz[0, 1])), None, False,
                         (float(tt[0]), float(tt[1])), abs(g(u)), float(u))


# ---------------------------------------------------------------- orbit profiles

@dataclass
class ReturnEvent:
    n: int
    point: PlanePoint
    binding: Optional[CriticalPoint]
    d_crit: float
    q: Optional[int]
    p: Optional[int]
    norm_q1: float = float("nan")      # |D_z f^{q+1} v|
    log_norm_q: float = float("nan")   # log |D_z f^q v|
    flags: tuple = ()

    def row(self) -> list:
        return [self.n, self.point.x, self.point.y, self.d_crit,
                -1 if self.p is None else self.p, -1 if self.q is None else self.q]


@dataclass
class OrbitProfile:
    seed: PlanePoint
    N: int
    events: list
    d_crit_series: list          # (n, d_crit) for free returns
    controlled: bool
    g_m_level: Optional[int]
    log_norms: np.ndarray = field(default=None, repr=False)   # log |D f^n v|, n = 0..N

    def to_dict(self) -> dict:
        return {"seed": list(self.seed), "N": self.N, "controlled": self.controlled,
                "g_m_level": self.g_m_level, "n_events": len(self.events),
                "events": [e.row() for e in self.events]}


def _push_jets(p: MapParams, orb: np.ndarray, t0: np.ndarray, k0: np.ndarray):
    """Unit tangents, curvature vectors and log speed of ``f^n`` of a curve jet."""
    n = len(orb) - 1
    T = np.empty((n + 1, 2))
    K = np.empty((n + 1, 2))
    logs = np.zeros(n + 1)
    T[0] = t0 / np.linalg.norm(t0)
    K[0] = k0
    for i in range(n):
        J = jacobian(p, orb[i])
        c1 = J @ T[i]
        c2 = J @ K[i] + second_derivative(p, orb[i], T[i])
        sp = np.linalg.norm(c1)
        tn = c1 / sp
        # unit-speed reparameterisation: curvature vector is the normal part / speed^2
        c2n = (c2 - np.dot(c2, tn) * tn) / (sp * sp)
        T[i + 1] = tn
        K[i + 1] = c2n
        logs[i + 1] = logs[i] + math.log(sp)
    return T, K, logs


def _fold_period(p: MapParams, orb: np.ndarray, n: int, v: np.ndarray, depth: int,
                 jmax: int) -> Optional[int]:
    z = orb[n]
    u = jacobian(p, z) @ v
    e, _ = stable_field(p, [orb[n + 1]], depth)
    e = e[0]
    B = u[1] / e[1]
    A = u[0] - B * e[0]
    if B == 0:
        return 0
    hx = np.array([1.0, 0.0])
    hs = e.copy()
    lx = ls = 0.0
    for j in range(0, jmax + 1):
        if math.log(abs(A) + 1e-300) + lx >= math.log(abs(B)) + ls:
            return j
        if n + 1 + j >= len(orb) - 1:
            return None
        J = jacobian(p, orb[n + 1 + j])
        hx = J @ hx
        hs = J @ hs
        nx, ns = np.linalg.norm(hx), np.linalg.norm(hs)
        lx += math.log(nx)
        ls += math.log(ns)
        hx /= nx
        hs /= ns
    return None


def bind_and_decompose(p: MapParams, seed, N: int, critical_set: Sequence[CriticalPoint] = None,
                       orbit: Optional[np.ndarray] = None, v0=(1.0, 0.0), k0=(0.0, 0.0),
                       depth: int = 8, box: float = ADMISSIBLE_BOX,
                       record_until: Optional[int] = None) -> OrbitProfile:
    """Return structure of the orbit of ``seed`` over ``N`` steps.

    Returns after ``record_until`` are not recorded: near the end of the
    horizon their fold and bound periods would be censored.

    ``orbit`` may supply the points (e.g. an exact periodic cycle); otherwise the
    seed is iterated.  ``v0``/``k0`` give the tangent and curvature of the
    unstable curve through the seed (a horizontal segment by default).
    """
    if orbit is None:
        orb = np.empty((N + 1, 2))
        orb[0] = seed
        for i in range(N):
            orb[i + 1] = eval_map(p, orb[i])
            if not np.all(np.abs(orb[i + 1]) < box):
                raise OrbitEscaped(f"orbit left the admissible box at step {i + 1}")
    else:
        orb = np.asarray(orbit, float)[:N + 1]
        N = len(orb) - 1
    T, K, logs = _push_jets(p, orb, np.asarray(v0, float), np.asarray(k0, float))
    sq = math.sqrt(p.b)
    lam = p.lambda_const
    events = []
    series = []
    last = N if record_until is None else min(N, record_until)
    n = 0
    while n <= last:
        z = orb[n]
        if abs(z[0]) >= p.delta:
            n += 1
            continue
        flags = []
        binding = None
        try:
            if critical_set:
                cands = [c for c in critical_set
                         if hermite_admissible(z, T[n], c.z, c.tangent, sq)]
                if not cands:
                    raise BindingUnavailable("no admissible critical point")
                binding = min(cands, key=lambda c: float(np.linalg.norm(c.z - z)))
            else:
                binding = jet_critical_point(p, z, T[n], K[n], depth)
            d = float(np.linalg.norm(binding.z - z))
        except BindingUnavailable:
            flags.append("binding_unavailable")
            d = float("nan")
        q = pp = None
        nq1 = lq = float("nan")
        if n < N:
            q = _fold_period(p, orb, n, T[n], depth, N - n - 1)
            if q is not None and n + q + 1 <= N:
                nq1 = math.exp(logs[n + q + 1] - logs[n])
                lq = logs[n + q] - logs[n]
            for k in range(1, N - n + 1):
                tk = T[n + k]
                if abs(tk[1]) <= sq * abs(tk[0]) and logs[n + k] - logs[n] >= lam * k / 3.0:
                    pp = k
                    break
        if pp is None:
            flags.append("bound_period_beyond_horizon")
        events.append(ReturnEvent(n, PlanePoint(float(z[0]), float(z[1])), binding, d, q, pp,
                                  nq1, lq, tuple(flags)))
        series.append((n, d))
        n += pp if pp is not None else N + 1
    controlled = all(not (d <= p.b ** (k / 9.0)) for k, d in series)
    level = 0
    for k, d in series:
        if not (d > p.b ** (k / 10.0)):
            level = k + 1
    g_m = level if level <= N else None
    return OrbitProfile(PlanePoint(float(orb[0, 0]), float(orb[0, 1])), N, events, series,
                        controlled, g_m, logs)


def cycle_profile(p: MapParams, cycle: np.ndarray, phase: int = 0, reps: int = 4,
                  **kw) -> OrbitProfile:
    """Profile of a periodic point, iterating the exact cycle ``reps`` times.

    The seed tangent is the expanding eigenvector of the cycle multiplier and the
    jet is warmed up by one period before the recorded window starts.
    """
    pts = np.roll(np.asarray(cycle, float), -phase, axis=0)
    n = len(pts)
    M = np.eye(2)
    for z in pts:
        M = jacobian(p, z) @ M
    w, V = np.linalg.eig(M)
    v = V[:, np.argmax(np.abs(w))].real
    # warm the curvature jet up along one full period
    T, K, _ = _push_jets(p, np.concatenate([pts, pts[:1]]), v, np.zeros(2))
    orb = np.concatenate([np.tile(pts, (reps + 1, 1)), pts[:1]])
    kw.setdefault("record_until", reps * n)
    return bind_and_decompose(p, pts[0], len(orb) - 1, orbit=orb, v0=T[-1], k0=K[-1], **kw)


@dataclass
class BindingStats:
    """Binding inequalities over the returns of controlled periodic points."""
    n_cycles: int
    n_returns: int
    failures: int                 # returns violating the q or p bound
    cap_constant: float           # C in |Df^{q+1} v| <= C d^{1 - c(b)}
    cap_min: float
    loglog_slope: float           # fit of log |Df^{q+1} v| against log d_crit
    c_b: float
    rows: list = field(default_factory=list, repr=False)    # (d_crit, q, p, norm_q1)

    @property
    def pass_fraction(self) -> float:
        return 1.0 - self.failures / self.n_returns if self.n_returns else float("nan")

    def to_dict(self) -> dict:
        out = {k: v for k, v in vars(self).items() if k != "rows"}
        out["pass_fraction"] = self.pass_fraction
        return out


def binding_statistics(p: MapParams, cycles: Sequence[np.ndarray], reps: int = 4) -> BindingStats:
    """Profile every cycle from its first controlled phase and test the binding bounds."""
    cb = c_of_b(p.b)
    events, nc = [], 0
    for pts in cycles:
        for ph in range(len(pts)):
            prof = cycle_profile(p, pts, ph, reps)
            if prof.controlled:
                nc += 1
                events += prof.events
                break
    rows, bad = [], 0
    for e in events:
        ld = -math.log(e.d_crit)
        ok = e.q is not None and e.p is not None and e.q <= cb * ld and e.p >= 2.0 / 3.0 * ld
        bad += not ok
        rows.append((e.d_crit, -1 if e.q is None else e.q, -1 if e.p is None else e.p, e.norm_q1))
    if not rows:
        return BindingStats(nc, 0, 0, float("nan"), float("nan"), float("nan"), cb, rows)
    d = np.array([r[0] for r in rows])
    nq = np.array([r[3] for r in rows])
    ratio = nq / d ** (1.0 - cb)
    slope = float(np.polyfit(np.log(d), np.log(nq), 1)[0]) if len(rows) > 1 else float("nan")
    return BindingStats(nc, len(rows), bad, float(ratio.max()), float(ratio.min()), slope, cb, rows)


def free_segments(profile: OrbitProfile, delta: float, orbit: np.ndarray) -> list:
    """Maximal time intervals after a bound period that stay outside ``I(delta)``."""
    bound = np.zeros(profile.N + 1, bool)
    for e in profile.events:
        end = e.n + (e.p if e.p is not None else profile.N + 1)
        bound[e.n:min(end, profile.N + 1)] = True
    free = ~bound & (np.abs(orbit[:profile.N + 1, 0]) >= delta)
    segs = []
    i = 0
    while i <= profile.N:
        if free[i]:
            j = i
            while j + 1 <= profile.N and free[j + 1]:
                j += 1
            segs.append((i, j + 1))
            i = j + 1
        else:
            i += 1
    return segs


# ---------------------------------------------------------------- stable leaves

@dataclass
class StableLeaf:
    curve: Curve
    contraction_rate: float
    fit_residual: float = float("nan")
    through: tuple = ()

    def to_dict(self) -> dict:
        return {"through": list(self.through), "length": self.curve.length,
                "contraction_rate": self.contraction_rate, "fit_residual": self.fit_residual}


def _integrate_leaf(p: MapParams, z: np.ndarray, direction: int, h: float, stop, depth: int,
                    max_len: float) -> np.ndarray:
    def field_at(q):
        e, d = stable_field(p, [q], depth)
        if d[0] < 1:
            raise FieldUndefined(f"stable field undefined at {tuple(q)}")
        return e[0] * direction

    def rk4(q, hh):
        k1 = field_at(q)
        k2 = field_at(q + 0.5 * hh * k1)
        k3 = field_at(q + 0.5 * hh * k2)
        k4 = field_at(q + hh * k3)
        return q + hh * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    pts = [z.copy()]
    s = 0.0
    while s < max_len:
        nxt = rk4(pts[-1], h)
        if stop(nxt):
            # bisect the length of the last step so the end lands on the boundary
            lo, hi = 0.0, h
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if stop(rk4(pts[-1], mid)):
                    hi = mid
                else:
                    lo = mid
            if lo > 0:
                pts.append(rk4(pts[-1], lo))
            break
        pts.append(nxt)
        s += h
    return np.array(pts)


def build_stable_leaf(p: MapParams, z, length: float = None, geo=None, step: float = None,
                      depth: int = 8, profile: Optional[OrbitProfile] = None,
                      base_orbit: Optional[np.ndarray] = None, n_fit: int = 6) -> StableLeaf:
    """Integrate ``e^s`` through ``z`` up to the unstable sides of ``R`` (or ``length``)."""
    z = np.asarray(z, float)
    if profile is not None and not profile.controlled:
        raise NotControlled("leaf requested through a point that is not controlled")
    length = length if length is not None else 4.0 * p.b
    step = step if step is not None else length / 80.0
    if geo is not None:
        stop_up = lambda q: q[1] > float(geo.y_top(q[0]))
        stop_dn = lambda q: q[1] < float(geo.y_bottom(q[0]))
    else:
        stop_up = stop_dn = lambda q: False
    up = _integrate_leaf(p, z, +1, step, stop_up, depth, 0.5 * length)
    dn = _integrate_leaf(p, z, -1, step, stop_dn, depth, 0.5 * length)
    pts = np.concatenate([dn[::-1], up[1:]])
    tans, _ = stable_field(p, pts, depth)
    curve = Curve.from_points(pts, tans, "derived")
    rate, resid = contraction_rate(p, curve, z, base_orbit=base_orbit, n_fit=n_fit)
    return StableLeaf(curve, rate, resid, (float(z[0]), float(z[1])))


def shadow_orbit(p: MapParams, y: np.ndarray, base_orbit: np.ndarray, n: int,
                 snap: float = 1e-13) -> np.ndarray:
    """Orbit of ``y`` that follows ``base_orbit`` once it is within ``snap`` of it.

    Used for points on the stable leaf of an exact cycle, whose computed orbits
    would otherwise be pushed off by rounding after a few dozen steps.
    """
    out = np.empty((n + 1, 2))
    out[0] = y
    snapped = False
    for i in range(n):
        if snapped:
            out[i + 1] = base_orbit[(i + 1) % len(base_orbit)]
            continue
        out[i + 1] = eval_map(p, out[i])
        if np.linalg.norm(out[i + 1] - base_orbit[(i + 1) % len(base_orbit)]) < snap:
            snapped = True
            out[i + 1] = base_orbit[(i + 1) % len(base_orbit)]
    return out


def contraction_rate(p: MapParams, leaf: Curve, z: np.ndarray, base_orbit=None,
                     n_fit: int = 6, floor: float = 1e-13) -> tuple[float, float]:
    """Fit ``rho`` in ``|f^n x - f^n y| <= C rho^n`` from leaf points paired with ``z``."""
    idx = np.linspace(0, len(leaf) - 1, 9).astype(int)
    ns, logs = [], []
    for i in idx:
        y = leaf.samples[i]
        d0 = np.linalg.norm(y - z)
        if d0 < 1e-9:
            continue
        zx, yx = z.copy(), y.copy()
        for n in range(1, n_fit + 1):
            zx, yx = eval_map(p, zx), eval_map(p, yx)
            if base_orbit is not None:
                zx = base_orbit[n % len(base_orbit)]
            d = np.linalg.norm(yx - zx)
            if d < floor or not np.isfinite(d):
                break
            ns.append(n)
            logs.append(math.log(d / d0))
    if len(ns) < 2:
        raise FieldUndefined("not enough separated pairs to fit the contraction rate")
    ns, logs = np.array(ns, float), np.array(logs)
    A = np.column_stack([ns, np.ones_like(ns)])
    coef, res, *_ = np.linalg.lstsq(A, logs, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - logs) ** 2)))
    return float(math.exp(coef[0])), resid


def leaf_derivative_ratios(p: MapParams, leaf: Curve, base_orbit: np.ndarray, n: int = 30,
                           npts: int = 9) -> np.ndarray:
    """Ratios ``|D f^n (1,0)|`` at leaf points over the same at the cycle point."""
    z = base_orbit[0]
    ref = _log_push(p, shadow_orbit(p, z, base_orbit, n))
    out = []
    for i in np.linspace(0, len(leaf) - 1, npts).astype(int):
        orb = shadow_orbit(p, leaf.samples[i], base_orbit, n)
        out.append(math.exp(_log_push(p, orb) - ref))
    return np.array(out)


def _log_push(p: MapParams, orb: np.ndarray, v=(1.0, 0.0)) -> float:
    w = np.asarray(v, float)
    total = 0.0
    for i in range(len(orb) - 1):
        w = jacobian(p, orb[i]) @ w
        nw = np.linalg.norm(w)
        total += math.log(nw)
        w /= nw
    return total


def leaf_hausdorff(c1: Curve, c2: Curve) -> float:
    """Hausdorff distance between two near-vertical leaves over their common height."""
    from .manifold import hausdorff_distance
    y0 = max(c1.samples[:, 1].min(), c2.samples[:, 1].min())
    y1 = min(c1.samples[:, 1].max(), c2.samples[:, 1].max())
    pick = lambda c: c.samples[(c.samples[:, 1] >= y0) & (c.samples[:, 1] <= y1)]
    a, b = pick(c1), pick(c2)
    if len(a) < 2 or len(b) < 2:
        return float("nan")
    return hausdorff_distance(Curve.from_points(a), Curve.from_points(b))
