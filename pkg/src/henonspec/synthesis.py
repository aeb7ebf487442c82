"""Orbits with prescribed exponent behaviour, assembled from periodic blocks.

A synthesized orbit is a long word in the partition alphabet of the inducing
scheme: a concatenation of blocks, each repeating one periodic cycle ``kappa``
times.  Its exponent series is computed symbolically from the per-step cocycle
increments of the cycles, and a shadow point is decoded from a word prefix (as
deep as the resolution allows) to check that a real orbit follows the prediction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import MapParams, PlanePoint, eval_map, jacobian
from .errors import ComponentAmbiguous, OrbitEscaped, TargetOutOfRange
from .inducing import (AlphaFamily, ProperRectangle, decode, decode_periodic, distortion_scan,
                       log_derivative)
from .manifold import ManifoldBranch
from .recurrence import bind_and_decompose
from .thermo import PeriodicOrbit, _log_multipliers

RULES = ("geometric", "dominating")
MIN_SPLIT = 0.1          # irregular synthesis needs exponents at least this far apart


# ---------------------------------------------------------------- cycles

def induced_cycle(p: MapParams, fam: AlphaFamily, word: Sequence[int]) -> PeriodicOrbit:
    """Periodic orbit coded by repeating a partition word; ``word`` holds the symbols."""
    z = decode_periodic(p, fam, tuple(word))
    lm = float(_log_multipliers(p, z[None])[0])
    n = len(z)
    return PeriodicOrbit(tuple(int(s) for s in word), z, n, lm, 0.0, n)


def cycle_increments(p: MapParams, orbit: PeriodicOrbit, warmup: int = 3) -> np.ndarray:
    """Per-step ``log |Df e^u|`` along the cycle; the entries sum to the log multiplier."""
    z = orbit.points
    v = np.array([1.0, 0.0])
    inc = np.empty(len(z))
    for _ in range(warmup + 1):
        for i in range(len(z)):
            v = jacobian(p, z[i]) @ v
            nv = np.linalg.norm(v)
            inc[i] = math.log(nv)
            v /= nv
    return inc


# ---------------------------------------------------------------- schedules

@dataclass
class BlockSchedule:
    pool: list                   # PeriodicOrbit used by the blocks
    blocks: list                 # (pool index, repeats kappa)
    growth_rule: str
    targets: tuple               # (beta,) or (beta_lo, beta_hi)
    rounds: list = field(default_factory=list)   # kappa_n when a round mixes cycles

    @property
    def kappas(self) -> list:
        return list(self.rounds) if self.rounds else [k for _, k in self.blocks]

    @property
    def block_ends(self) -> np.ndarray:
        return np.cumsum([self.pool[i].period * k for i, k in self.blocks])

    @property
    def copy_ends(self) -> np.ndarray:
        """Times at which a cycle copy is complete."""
        return np.cumsum(np.concatenate([np.full(k, self.pool[i].period) for i, k in self.blocks]))

    @property
    def total_time(self) -> int:
        return int(self.block_ends[-1]) if self.blocks else 0

    def word(self) -> np.ndarray:
        return np.concatenate([np.tile(np.asarray(self.pool[i].word, np.int16), k)
                               for i, k in self.blocks])

    def increments(self, p: MapParams) -> np.ndarray:
        inc = [cycle_increments(p, o) for o in self.pool]
        return np.concatenate([np.tile(inc[i], k) for i, k in self.blocks])

    def to_dict(self) -> dict:
        return {"growth_rule": self.growth_rule, "targets": list(self.targets),
                "pool": [{"word": list(o.word), "period": o.period, "exponent": o.exponent}
                         for o in self.pool],
                "blocks": [[int(i), int(k)] for i, k in self.blocks],
                "kappas": [int(k) for k in self.kappas]}


def _kappa(rule: str, n: int, kappa0: int, g: float, prev_time: int, period: int,
           prev_kappa: int) -> int:
    if rule == "geometric":
        return max(int(math.ceil(kappa0 * g ** n)), prev_kappa)
    # each block outweighs everything before it by a growing factor
    return max(int(math.ceil(g * (n + 1) * prev_time / period)), prev_kappa + 1, kappa0)


@dataclass
class SynthesizedOrbit:
    word: np.ndarray = field(repr=False)
    shadow_point: Optional[PlanePoint]
    window_exponents: list = field(repr=False)     # (time, running average)
    schedule: BlockSchedule = None
    decoded_depth: int = 0
    _cum: np.ndarray = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self._cum) - 1

    def running_average(self, t) -> np.ndarray:
        t = np.asarray(t, int)
        return self._cum[t] / t

    def to_dict(self) -> dict:
        return {"symbols": int(len(self.word)), "horizon": self.horizon,
                "shadow_point": None if self.shadow_point is None else list(self.shadow_point),
                "decoded_depth": self.decoded_depth, "schedule": self.schedule.to_dict(),
                "window_exponents": [[int(t), float(a)] for t, a in self.window_exponents]}


def _windows(T: int, ratio: float = 2 ** 0.125) -> np.ndarray:
    k = np.arange(int(math.log(T) / math.log(ratio)) + 1)
    return np.unique(np.clip(np.ceil(ratio ** k).astype(np.int64), 1, T))


def _finish(p: MapParams, sched: BlockSchedule, fam: Optional[AlphaFamily],
            max_depth: int) -> SynthesizedOrbit:
    inc = sched.increments(p)
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    T = len(inc)
    # exponentially spaced windows, each snapped back to the last complete cycle
    ce = sched.copy_ends
    snap = ce[np.maximum(np.searchsorted(ce, _windows(T), side="right") - 1, 0)]
    win = np.union1d(snap, sched.block_ends)
    o = SynthesizedOrbit(sched.word(), None, [(int(t), float(cum[t] / t)) for t in win],
                         sched, 0, cum)
    if fam is not None:
        z, depth = decode_prefix(p, fam, o.word, max_depth)
        o.shadow_point = PlanePoint(float(z[0]), float(z[1]))
        o.decoded_depth = depth
    return o


def synthesize_target(beta: float, pool: Sequence[PeriodicOrbit], horizon: int,
                      rule: str = "geometric", p: MapParams = None,
                      fam: Optional[AlphaFamily] = None, kappa0: int = 1, g: float = 2.0,
                      max_depth: int = 40) -> SynthesizedOrbit:
    """Orbit whose running exponent tends to ``beta``.

    Two pool cycles bracketing ``beta`` are mixed in rounds of ``kappa_n`` copies;
    inside a round the copies are allotted so that the cumulative time share of the
    lower cycle tracks ``t`` with ``t lam_lo + (1 - t) lam_hi = beta``.
    """
    if rule not in RULES:
        raise ValueError(f"unknown growth rule {rule!r}")
    pool = list(pool)
    ex = np.array([o.exponent for o in pool])
    if not pool or beta < ex.min() - 1e-12 or beta > ex.max() + 1e-12:
        raise TargetOutOfRange(f"beta={beta} outside the pool's exponent hull")
    exact = np.flatnonzero(np.abs(ex - beta) <= 1e-12)
    blocks, rounds = [], []
    if len(exact):
        i = int(exact[0])
        T, n = 0, 0
        while T < horizon:
            k = _kappa(rule, n, kappa0, g, T, pool[i].period, blocks[-1][1] if blocks else 0)
            k = min(k, -(-(horizon - T) // pool[i].period))
            blocks.append((i, k))
            T += k * pool[i].period
            n += 1
    else:
        lo = int(np.argmax(np.where(ex < beta, ex, -np.inf)))
        hi = int(np.argmin(np.where(ex > beta, ex, np.inf)))
        t = (ex[hi] - beta) / (ex[hi] - ex[lo])
        per = (pool[lo].period, pool[hi].period)
        tl = th = 0          # time spent in each cycle
        n, prev, rounds = 0, 0, []
        while tl + th < horizon:
            k = _kappa(rule, n, kappa0, g, tl + th, max(per), prev)
            k = min(k, -(-(horizon - tl - th) // min(per)))
            prev = k
            n += 1
            rounds.append(k)
            # greedy: each copy keeps the time share of the lower cycle closest to t
            for _ in range(k):
                T = tl + th
                if T >= horizon:
                    break
                take_lo = abs((tl + per[0]) / (T + per[0]) - t) <= abs(tl / (T + per[1]) - t)
                idx = lo if take_lo else hi
                if blocks and blocks[-1][0] == idx:
                    blocks[-1] = (idx, blocks[-1][1] + 1)
                else:
                    blocks.append((idx, 1))
                if take_lo:
                    tl += per[0]
                else:
                    th += per[1]
    sched = BlockSchedule(pool, blocks, rule, (float(beta),), rounds)
    return _finish(p, sched, fam, max_depth)


def synthesize_irregular(orbit_lo: PeriodicOrbit, orbit_hi: PeriodicOrbit, horizon: int,
                         rule: str = "dominating", p: MapParams = None,
                         fam: Optional[AlphaFamily] = None, kappa0: int = 1, g: float = 2.0,
                         max_depth: int = 40) -> SynthesizedOrbit:
    """Alternating blocks of two cycles with growing repeats, so averages keep swinging."""
    if rule not in RULES:
        raise ValueError(f"unknown growth rule {rule!r}")
    same = orbit_lo is orbit_hi or (tuple(orbit_lo.word) == tuple(orbit_hi.word))
    gap = abs(orbit_hi.exponent - orbit_lo.exponent)
    if not same and gap < MIN_SPLIT:
        raise TargetOutOfRange(f"exponents differ by {gap:.3g} < {MIN_SPLIT}")
    pool = [orbit_lo] if same else [orbit_lo, orbit_hi]
    blocks, T, n, prev = [], 0, 0, 0
    while T < horizon:
        i = 0 if same else n % 2
        k = _kappa(rule, n, kappa0, g, T, pool[i].period, prev)
        prev = k
        k = min(k, -(-(horizon - T) // pool[i].period))   # the last block stops at the horizon
        if blocks and blocks[-1][0] == i:
            blocks[-1] = (i, blocks[-1][1] + k)
        else:
            blocks.append((i, k))
        T += k * pool[i].period
        n += 1
    sched = BlockSchedule(pool, blocks, rule,
                          (float(orbit_lo.exponent), float(orbit_hi.exponent)))
    return _finish(p, sched, fam, max_depth)


# ---------------------------------------------------------------- verification

@dataclass
class BirkhoffReport:
    liminf: float
    limsup: float
    gap: float
    converged: bool
    target: Optional[float] = None
    final_error: Optional[float] = None
    scaling_c: Optional[float] = None     # max_k |A(T_k) - target| * k over block ends
    n_windows: int = 0

    def to_dict(self) -> dict:
        return dict(vars(self))


def verify_birkhoff(o: SynthesizedOrbit, windows=None, tail: float = 0.5,
                    tol: float = 0.02) -> BirkhoffReport:
    """liminf/limsup estimates over windows in the tail ``t >= T**tail``."""
    T = o.horizon
    if windows is None:
        win = np.array([t for t, _ in o.window_exponents])
    else:
        win = np.asarray(windows, int)
    win = win[(win >= max(1, int(T ** tail))) & (win <= T)]
    if len(win) == 0:
        win = np.array([T])
    a = o.running_average(win)
    lo, hi = float(a.min()), float(a.max())
    rep = BirkhoffReport(lo, hi, hi - lo, hi - lo <= tol, n_windows=len(win))
    if o.schedule is not None and len(o.schedule.targets) == 1:
        beta = o.schedule.targets[0]
        rep.target = beta
        rep.final_error = float(abs(o.running_average(T) - beta))
        ends = o.schedule.block_ends
        err = np.abs(o.running_average(ends) - beta)
        rep.scaling_c = float(np.max(err * np.arange(1, len(ends) + 1)))
    return rep


# ---------------------------------------------------------------- shadowing

def decode_prefix(p: MapParams, fam: AlphaFamily, word: np.ndarray, max_depth: int = 40,
                  min_width: float = 1e-13) -> tuple[np.ndarray, int]:
    """Point of the slice whose itinerary starts with ``word``, decoded as deep as
    the slice resolution allows; returns the point and the depth used."""
    sl = fam.bottom
    lo, hi, depth = sl.x0, sl.x1, 0
    for k in range(1, min(max_depth, len(word)) + 1):
        try:
            a, b, _ = decode(p, fam, tuple(int(s) for s in word[:k]), sl)
        except ComponentAmbiguous:
            break
        if b - a < min_width:
            break
        lo, hi, depth = a, b, k
    if depth == 0:
        raise ComponentAmbiguous("first symbol of the word does not decode")
    return sl.points(0.5 * (lo + hi))[0], depth


def check_admissible(p: MapParams, fam: AlphaFamily, word: np.ndarray, depth: int) -> bool:
    """Every prefix up to ``depth`` decodes to a nested interval with the right return time."""
    prev = (fam.bottom.x0, fam.bottom.x1)
    tau = 0
    for k in range(1, depth + 1):
        try:
            a, b, t = decode(p, fam, tuple(int(s) for s in word[:k]))
        except ComponentAmbiguous:
            return False
        tau += abs(int(word[k - 1]))
        if t != tau or a < prev[0] or b > prev[1]:
            return False
        prev = (a, b)
    return True


def shadow_check(p: MapParams, fam: AlphaFamily, o: SynthesizedOrbit,
                 rects: Optional[Sequence[ProperRectangle]] = None) -> dict:
    """Cocycle along the decoded shadow orbit against the block prediction.

    The budget is one depth-1 distortion constant per block the decoded prefix
    touches (plus one for the entry), measured by ``distortion_scan``.
    """
    if o.shadow_point is None:
        raise ValueError("orbit has no shadow point; synthesize with fam")
    tau = int(np.sum(np.abs(o.word[:o.decoded_depth])))
    z = np.array([list(o.shadow_point)])
    lg, _ = log_derivative(p, z, fam.bottom.tangents(np.array([o.shadow_point.x])), tau)
    predicted = float(o._cum[tau])
    if rects is None:
        from .inducing import build_proper_rectangles
        syms = set(int(s) for s in o.word[:o.decoded_depth])
        rects = [r for r in build_proper_rectangles(p, None, fam, depth=1,
                                                    tau_cap=max(abs(s) for s in syms))
                 if r.word[0] in syms]
    D = max(distortion_scan(p, r, fam.bottom).max_log_ratio for r in rects)
    ends = o.schedule.block_ends
    n_blocks = int(np.searchsorted(ends, tau, side="left")) + 1
    budget = D * (n_blocks + 1)
    diff = abs(float(lg[0]) - predicted)
    return {"tau": tau, "depth": o.decoded_depth, "measured": float(lg[0]),
            "predicted": predicted, "difference": diff, "budget": budget,
            "distortion_constant": D, "ok": diff <= budget}


# ---------------------------------------------------------------- deep returns

@dataclass
class DeepReturn:
    n: int
    target_distance: float
    d_crit: float
    q: Optional[int]
    exponent_at_n_plus_q: float
    log_norms: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"n": self.n, "target_distance": self.target_distance, "d_crit": self.d_crit,
                "q": self.q, "exponent_at_n_plus_q": self.exponent_at_n_plus_q}


def deep_return_seed(p: MapParams, geo, fam: AlphaFamily, n: int, d: Optional[float] = None):
    """Point of ``W^u(P)`` whose ``n``-th iterate lands on the bottom side of Theta at
    distance ``d`` from the tangency point, with the manifold tangent there.

    The seed is read off the manifold parametrisation rather than by backward
    iteration, which would blow up the stable component.
    """
    if d is None:
        d = min(max(0.5 * p.b ** (n / 2), 1e-9), p.b ** (n / 10))
    piece = geo.bottom
    mb = piece.branch
    xt = fam.x_split + d
    ty = brentq(lambda s: float(piece.points(s)[0, 0]) - xt, piece.t_lo, piece.t_hi,
                xtol=1e-15, rtol=1e-15)
    if ty - n < 0:
        raise ValueError(f"the bottom side is not {n} iterates from the local manifold")
    # a negative unstable eigenvalue swaps the two branches at every step
    br = mb.branch * (1 if mb.mu > 0 else (-1) ** n)
    pts, tans, _ = ManifoldBranch(p, mb.saddle, "unstable", br, mb.s0).evaluate(np.array([ty - n]))
    return pts[0], tans[0], d


def deep_return(p: MapParams, geo, fam: AlphaFamily, n: int, d: Optional[float] = None,
                extra: int = 40, box: float = 3.5) -> DeepReturn:
    """Finite-time exponent at ``n + q`` for a seed with a deep return at time ``n``."""
    x, v, d = deep_return_seed(p, geo, fam, n, d)
    z, N = x.copy(), n + extra
    for k in range(n + extra):
        z = eval_map(p, z)
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > box:
            N = k
            break
    if N <= n + 1:
        raise OrbitEscaped("orbit leaves right after the deep return")
    prof = bind_and_decompose(p, x, N, v0=v, record_until=n + 1)
    ev = [e for e in prof.events if e.n == n]
    if not ev or ev[0].q is None:
        raise ComponentAmbiguous(f"no bound return recorded at time {n}")
    e = ev[0]
    t = n + e.q
    return DeepReturn(n, d, e.d_crit, e.q, float(prof.log_norms[t] / t), prof.log_norms)
