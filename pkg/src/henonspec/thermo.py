"""Periodic orbits, pressure, the dimension root t^u and the Lyapunov spectrum.

Periodic orbits are found for every binary necklace of a given length by a
damped multiple-shooting Newton solve, seeded by backward iteration of the
one-dimensional limit along the symbolic itinerary (symbol 1 means ``x > 0``).
All solves for one period are batched in numpy.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .core import MapParams, PlanePoint, eval_map, jacobian
from .errors import EmptyOrbitSet, FitUnstable, GridTooCoarse, NoSignChange

SHOOT_TOL = 1e-10
CHUNK = 4096


@dataclass
class PeriodicOrbit:
    word: tuple                  # symbols along the cycle, length n
    points: np.ndarray = field(repr=False)   # (n, 2), points[i+1] = f(points[i])
    period: int = 0              # length of the word (n)
    log_multiplier: float = 0.0  # log |expanding eigenvalue of Df^n|
    residual: float = 0.0        # max multiple-shooting defect
    primitive_period: int = 0

    @property
    def exponent(self) -> float:
        return self.log_multiplier / self.period

    @property
    def plane_points(self) -> list:
        return [PlanePoint(float(x), float(y)) for x, y in self.points]

    def to_dict(self) -> dict:
        return {"word": "".join(map(str, self.word)), "period": self.period,
                "primitive_period": self.primitive_period,
                "log_multiplier": self.log_multiplier, "residual": self.residual,
                "points": self.points.tolist()}


# ---------------------------------------------------------------- words

def necklaces(n: int) -> np.ndarray:
    """Canonical (minimal-rotation) representatives of binary necklaces, as ints.

    Bit ``n-1-i`` of the integer is the symbol at time ``i``.
    """
    if n < 1 or n > 24:
        raise ValueError("period must be in 1..24")
    mask = (1 << n) - 1
    w = np.arange(1 << n, dtype=np.int64)
    canon = w.copy()
    for r in range(1, n):
        rot = ((w << r) | (w >> (n - r))) & mask
        np.minimum(canon, rot, out=canon)
    return w[canon == w]


def primitive_periods(words: np.ndarray, n: int) -> np.ndarray:
    mask = (1 << n) - 1
    out = np.full(len(words), n)
    for r in range(n - 1, 0, -1):
        if n % r:
            continue
        rot = ((words << r) | (words >> (n - r))) & mask
        out[rot == words] = r
    return out


def word_bits(words: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(n - 1, -1, -1)
    return ((words[:, None] >> shifts) & 1).astype(np.int8)


def canonical_rotation(bits: np.ndarray) -> tuple:
    n = len(bits)
    rots = [tuple(np.roll(bits, -r)) for r in range(n)]
    return min(rots)


# ---------------------------------------------------------------- solving

def _seed_x(p: MapParams, bits: np.ndarray, sweeps: int = 60) -> np.ndarray:
    """Backward iteration ``x_i = s_i sqrt((1 - x_{i+1} + b x_{i-1}) / a)`` on all words."""
    sgn = np.where(bits == 1, 1.0, -1.0)
    x = 0.7 * sgn
    for _ in range(sweeps):
        nxt = np.roll(x, -1, axis=1)
        prv = np.roll(x, 1, axis=1)
        x = sgn * np.sqrt(np.clip((1.0 - nxt + p.b * prv) / p.a, 0.0, None))
    return x


def _defect(p: MapParams, z: np.ndarray) -> np.ndarray:
    """Shooting defect ``f(z_i) - z_{i+1}`` for a batch ``(W, n, 2)``."""
    return eval_map(p, z) - np.roll(z, -1, axis=1)


def _newton(p: MapParams, z: np.ndarray, maxiter: int = 40, tol: float = 1e-13):
    W, n, _ = z.shape
    N = 2 * n
    for _ in range(maxiter):
        F = _defect(p, z).reshape(W, N)
        res = np.max(np.abs(F), axis=1)
        if np.all(res < tol):
            break
        J = np.zeros((W, N, N))
        Df = jacobian(p, z)                     # (W, n, 2, 2)
        for i in range(n):
            J[:, 2 * i:2 * i + 2, 2 * i:2 * i + 2] = Df[:, i]
            j = (i + 1) % n
            J[:, 2 * i, 2 * j] -= 1.0
            J[:, 2 * i + 1, 2 * j + 1] -= 1.0
        try:
            dz = np.linalg.solve(J, -F[..., None])[..., 0].reshape(W, n, 2)
        except np.linalg.LinAlgError:
            dz = np.stack([_safe_solve(J[k], -F[k]) for k in range(W)]).reshape(W, n, 2)
        # damping: halve the step while the defect grows
        step = np.ones(W)
        for _ in range(8):
            trial = z + step[:, None, None] * dz
            with np.errstate(all="ignore"):
                r2 = np.max(np.abs(_defect(p, trial).reshape(W, N)), axis=1)
            bad = ~(r2 <= np.maximum(res, 1e-300)) & (res > tol)
            if not np.any(bad):
                break
            step[bad] *= 0.5
        z = z + step[:, None, None] * dz
    with np.errstate(all="ignore"):
        res = np.max(np.abs(_defect(p, z).reshape(W, N)), axis=1)
    return z, res


def _safe_solve(A, b):
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _log_multipliers(p: MapParams, z: np.ndarray) -> np.ndarray:
    """log of the largest |eigenvalue| of ``Df^n`` along each cycle."""
    W, n, _ = z.shape
    Df = jacobian(p, z)
    M = np.tile(np.eye(2), (W, 1, 1))
    lognorm = np.zeros(W)
    for i in range(n):
        M = Df[:, i] @ M
        s = np.linalg.norm(M, axis=(1, 2))
        M /= s[:, None, None]
        lognorm += np.log(s)
    ev = np.max(np.abs(np.linalg.eigvals(M)), axis=1)
    return lognorm + np.log(ev)


def _solve_chunk(args):
    p, words, n = args
    bits = word_bits(words, n)
    x = _seed_x(p, bits)
    z = np.stack([x, p.b * np.roll(x, 1, axis=1)], axis=-1)
    z, res = _newton(p, z)
    ok = np.isfinite(res) & (res <= SHOOT_TOL)
    lm = np.full(len(words), np.nan)
    if np.any(ok):
        lm[ok] = _log_multipliers(p, z[ok])
    return bits, z, res, lm


def enumerate_periodic_orbits(p: MapParams, n: int, workers: int = 1,
                              report: Optional[dict] = None) -> list:
    """Periodic orbits for every binary necklace of length ``n``.

    Words whose solve fails, whose itinerary differs from the word or which
    duplicate an orbit already found are recorded as pruned in ``report``.
    """
    words = necklaces(n)
    prim = primitive_periods(words, n)
    chunks = [(p, words[i:i + CHUNK], n) for i in range(0, len(words), CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_solve_chunk, chunks))
    else:
        parts = [_solve_chunk(c) for c in chunks]
    out, pruned, seen = [], [], set()
    k = 0
    for bits, z, res, lm in parts:
        for j in range(len(bits)):
            word = tuple(int(s) for s in bits[j])
            d = int(prim[k])
            k += 1
            if not (res[j] <= SHOOT_TOL) or not np.isfinite(lm[j]):
                pruned.append(("".join(map(str, word)), "not_converged"))
                continue
            actual = (z[j, :, 0] > 0).astype(np.int8)
            if tuple(actual) != word:
                pruned.append(("".join(map(str, word)), "itinerary_mismatch"))
                continue
            key = canonical_rotation(actual)
            if key in seen:
                pruned.append(("".join(map(str, word)), "duplicate"))
                continue
            seen.add(key)
            out.append(PeriodicOrbit(word, z[j].copy(), n, float(lm[j]), float(res[j]), d))
    if report is not None:
        report.update({"n": n, "words": len(words), "found": len(out), "pruned": pruned,
                       "pruned_points": sum(int(prim[i]) for i in range(len(words))) -
                       sum(o.primitive_period for o in out)})
    return out


# ---------------------------------------------------------------- pressure

def _order(orbits: Sequence[PeriodicOrbit], n: Optional[int]) -> tuple[int, list]:
    if not orbits:
        raise EmptyOrbitSet("no periodic orbits")
    n = n if n is not None else max(o.period for o in orbits)
    sel = sorted((o for o in orbits if o.period == n), key=lambda o: o.word)
    if not sel:
        raise EmptyOrbitSet(f"no orbits of period {n}")
    return n, sel


def pressure(orbits: Sequence[PeriodicOrbit], t, n: Optional[int] = None):
    """``P_n(t) = (1/n) log sum_{x in Fix f^n} exp(-t log|Df^n|E^u(x)|)``."""
    n, sel = _order(orbits, n)
    lm = np.array([o.log_multiplier for o in sel])
    w = np.log(np.array([o.primitive_period for o in sel], float))
    t = np.asarray(t, float)
    vals = logsumexp(w[None, :] - np.atleast_1d(t)[:, None] * lm[None, :], axis=1) / n
    return float(vals[0]) if t.ndim == 0 else vals


@dataclass
class PressureTable:
    t_grid: np.ndarray
    P_values: np.ndarray
    order: int
    orbit_count: int
    pruned_fraction: float = 0.0
    label: str = ""

    @property
    def convexity_residual(self) -> float:
        """Smallest second difference quotient (non-negative when convex)."""
        t, P = self.t_grid, self.P_values
        if len(t) < 3:
            return 0.0
        h1 = np.diff(t)
        s = np.diff(P) / h1
        return float(np.min(2 * np.diff(s) / (h1[1:] + h1[:-1])))

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.P_values) <= 1e-12))

    def at(self, t: float) -> float:
        return float(np.interp(t, self.t_grid, self.P_values))

    def to_dict(self) -> dict:
        return {"order": self.order, "orbit_count": self.orbit_count,
                "pruned_fraction": self.pruned_fraction, "t_grid": self.t_grid.tolist(),
                "P_values": self.P_values.tolist(), "convexity_residual": self.convexity_residual}

    def write(self, path) -> None:
        head = (f"n={self.order}\norbit_count={self.orbit_count}\n"
                f"pruned_fraction={self.pruned_fraction:.6g}\n"
                f"t_grid={self.t_grid[0]:.6g}:{self.t_grid[-1]:.6g}:{len(self.t_grid)}\nt,P")
        np.savetxt(path, np.column_stack([self.t_grid, self.P_values]), delimiter=",",
                   header=head, comments="# ")


def pressure_table(orbits: Sequence[PeriodicOrbit], t_grid, n: Optional[int] = None,
                   pruned_fraction: float = 0.0, label: str = "") -> PressureTable:
    n, sel = _order(orbits, n)
    t_grid = np.asarray(t_grid, float)
    return PressureTable(t_grid, pressure(sel, t_grid, n), n, len(sel), pruned_fraction, label)


def pruned_fraction(report: dict) -> float:
    total = 2 ** report["n"]
    return report["pruned_points"] / total


@dataclass
class RootEstimate:
    value: float
    uncertainty: float
    per_order: dict

    def to_dict(self) -> dict:
        return {"t_u": self.value, "uncertainty": self.uncertainty,
                "per_order": {str(k): v for k, v in self.per_order.items()}}


def solve_tu(orbit_sets: dict, t_hi: float = 1.0) -> RootEstimate:
    """Root of ``t -> P_n(t)`` for each ``n``; the value is taken at the largest ``n``
    and the uncertainty is the spread across the two largest orders."""
    roots = {}
    for n in sorted(orbit_sets):
        f = lambda t: pressure(orbit_sets[n], t, n)
        lo, hi = f(0.0), f(t_hi)
        if not (lo > 0 > hi):
            raise NoSignChange(f"P_{n}(0)={lo:.4g}, P_{n}({t_hi})={hi:.4g}")
        roots[n] = brentq(f, 0.0, t_hi, xtol=1e-14, rtol=1e-14)
    ks = sorted(roots)
    spread = abs(roots[ks[-1]] - roots[ks[-2]]) if len(ks) > 1 else float("nan")
    return RootEstimate(roots[ks[-1]], spread, roots)


def lyapunov_bounds(orbits: Iterable[PeriodicOrbit]) -> tuple[float, float]:
    """Inner estimates of the extreme unstable exponents over the given orbits."""
    ex = [o.exponent for o in orbits]
    if not ex:
        raise EmptyOrbitSet("no periodic orbits")
    return min(ex), max(ex)


# ---------------------------------------------------------------- spectrum

@dataclass
class SpectrumTable:
    beta_grid: np.ndarray
    L_values: np.ndarray
    method: str                   # "legendre" or "box_counting"
    t_u: float = float("nan")
    beta_star: float = float("nan")
    t_argmin: np.ndarray = field(default=None, repr=False)
    endpoint: np.ndarray = field(default=None, repr=False)   # infimum at a grid end
    residuals: np.ndarray = field(default=None, repr=False)  # box-counting fit residuals

    @property
    def L_max(self) -> float:
        return float(np.nanmax(self.L_values))

    def unimodal(self, tol: float = 1e-9) -> bool:
        L = self.L_values
        k = int(np.nanargmax(L))
        return bool(np.all(np.diff(L[:k + 1]) >= -tol) and np.all(np.diff(L[k:]) <= tol))

    def to_dict(self) -> dict:
        return {"method": self.method, "t_u": self.t_u, "beta_star": self.beta_star,
                "L_max": self.L_max, "beta_grid": self.beta_grid.tolist(),
                "L_values": [None if not np.isfinite(v) else float(v) for v in self.L_values]}

    def write(self, path) -> None:
        head = (f"method={self.method}\nt_u={self.t_u:.12g}\nbeta_star={self.beta_star:.12g}\n"
                f"beta_grid={self.beta_grid[0]:.6g}:{self.beta_grid[-1]:.6g}:{len(self.beta_grid)}"
                "\nbeta,L")
        np.savetxt(path, np.column_stack([self.beta_grid, self.L_values]), delimiter=",",
                   header=head, comments="# ")


def legendre_spectrum(pt: PressureTable, beta_grid, pressure_fn=None, t_u: float = None,
                      convex_tol: float = 1e-9) -> SpectrumTable:
    """``L(beta) = inf_t (P(t) + t beta) / beta`` over the table's t grid.

    With ``pressure_fn`` the grid minimiser is polished by a bounded scalar
    minimisation between its grid neighbours.
    """
    from scipy.optimize import minimize_scalar
    if pt.convexity_residual < -convex_tol:
        raise FitUnstable(f"pressure not convex on the grid ({pt.convexity_residual:.3g})")
    t, P = pt.t_grid, pt.P_values
    beta = np.asarray(beta_grid, float)
    G = (P[None, :] + t[None, :] * beta[:, None]) / beta[:, None]
    k = np.argmin(G, axis=1)
    L = G[np.arange(len(beta)), k]
    targ = t[k].astype(float)
    endpoint = (k == 0) | (k == len(t) - 1)
    if pressure_fn is not None:
        for i in np.flatnonzero(~endpoint):
            b = beta[i]
            r = minimize_scalar(lambda s: (pressure_fn(s) + s * b) / b,
                                bounds=(t[k[i] - 1], t[k[i] + 1]), method="bounded",
                                options={"xatol": 1e-12})
            if r.fun < L[i]:
                L[i], targ[i] = r.fun, r.x
    j = int(np.argmax(L))
    if endpoint[j]:
        raise GridTooCoarse("spectrum maximum attained at the t-grid boundary")
    if t_u is None:
        t_u = float(np.interp(0.0, -P, t)) if P[0] > 0 > P[-1] else float("nan")
    return SpectrumTable(beta, L, "legendre", t_u, float(beta[j]), targ, endpoint)


def finite_time_exponents(p: MapParams, pts: np.ndarray, tans: np.ndarray, n: int,
                          escape: float = 1.6):
    """Exponents ``(1/n) log |Df^n t|`` and a survival mask (orbit stays bounded)."""
    z = np.array(pts, float)
    v = np.array(tans, float)
    acc = np.zeros(len(z))
    alive = np.ones(len(z), bool)
    for _ in range(n):
        with np.errstate(all="ignore"):
            v = np.einsum("kij,kj->ki", jacobian(p, z), v)
            nv = np.linalg.norm(v, axis=1)
            acc += np.log(nv)
            v /= nv[:, None]
            z = eval_map(p, z)
        alive &= np.all(np.abs(z) < escape, axis=1)
    # survivors must also stay bounded a few steps beyond the window
    for _ in range(4):
        with np.errstate(all="ignore"):
            z = eval_map(p, z)
        alive &= np.all(np.abs(z) < escape, axis=1)
    return acc / n, alive


def _box_slope(s: np.ndarray, scales: np.ndarray):
    counts = np.array([len(np.unique(np.floor(s / e))) for e in scales], float)
    if np.any(np.diff(counts) < 0):      # counts must grow as scales shrink
        raise FitUnstable("non-monotone box counts")
    X = np.log(1.0 / scales)
    A = np.column_stack([X, np.ones_like(X)])
    coef, *_ = np.linalg.lstsq(A, np.log(counts), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.log(counts)) ** 2)))
    return float(coef[0]), resid


def box_counting_spectrum(p: MapParams, slice_curve, n_time: int = 12, beta_bins=None,
                          scales=None, samples: int = 2_000_000, min_count: int = 50,
                          legendre_beta_star: float = float("nan")) -> SpectrumTable:
    """Box-counting dimension of the finite-time level sets on an unstable slice."""
    if n_time > 60:
        raise ValueError("n_time must be at most 60")
    s_all = slice_curve.arclength
    s = np.linspace(s_all[0], s_all[-1], samples)
    if slice_curve.evaluator is not None and slice_curve.params is not None:
        par = np.interp(s, s_all, slice_curve.params)
        pts, tans, _ = slice_curve.evaluator(par)
    else:
        pts = slice_curve.point_at(s)
        tans = np.column_stack([np.interp(s, s_all, slice_curve.tangents[:, 0]),
                                np.interp(s, s_all, slice_curve.tangents[:, 1])])
    ex, alive = finite_time_exponents(p, pts, tans, n_time)
    if beta_bins is None:
        beta_bins = np.linspace(0.6, 1.45, 18)
    beta_bins = np.asarray(beta_bins, float)
    span = s[-1] - s[0]
    ds = s[1] - s[0]
    centers = 0.5 * (beta_bins[1:] + beta_bins[:-1])
    L = np.full(len(centers), np.nan)
    res = np.full(len(centers), np.nan)
    for i in range(len(centers)):
        m = alive & (ex >= beta_bins[i]) & (ex < beta_bins[i + 1])
        if np.count_nonzero(m) < min_count:
            continue
        # scales above the cylinder size of the bin and the sampling step
        lo = max(16 * ds, 4 * span * math.exp(-n_time * beta_bins[i + 1]))
        sc = scales if scales is not None else np.geomspace(span / 8, lo, 8)
        if sc[0] <= sc[-1] * 4:
            continue
        try:
            L[i], res[i] = _box_slope(s[m] - s[0], np.asarray(sc))
        except FitUnstable:
            continue
    if np.all(np.isnan(L)):
        raise FitUnstable("no level set had enough samples for a fit")
    j = int(np.nanargmax(L))
    return SpectrumTable(centers, L, "box_counting", float("nan"), float(centers[j]),
                         residuals=res)


# ---------------------------------------------------------------- quadratic limit

def _baseline_kernel():
    from numba import njit, prange

    @njit(parallel=True, cache=True)
    def run(seeds, n):
        # the product |4x| is carried as mantissa * 2**e so powers of two stay exact
        ln2 = math.log(2.0)
        out = np.empty(len(seeds))
        for k in prange(len(seeds)):
            x = seeds[k]
            m = 1.0
            e = 0
            for i in range(n):
                m *= abs(4.0 * x)
                x = 1.0 - 2.0 * x * x
                if (i & 7) == 7:
                    m, de = math.frexp(m)
                    e += de
            m, de = math.frexp(m)
            e += de - 1
            out[k] = (e / n) * ln2 + math.log(2.0 * m) / n
        return out
    return run


_BASELINE = None


def quadratic_baseline(n_samples: int = 10_000, n_time: int = 1_000_000, seed: int = 0,
                       seeds=None) -> np.ndarray:
    """Finite-time exponents of ``x -> 1 - 2x^2`` (uniform seeds in [-1, 1] unless given)."""
    global _BASELINE
    if _BASELINE is None:
        _BASELINE = _baseline_kernel()
    if seeds is None:
        seeds = np.random.default_rng(seed).uniform(-1.0, 1.0, n_samples)
    return _BASELINE(np.asarray(seeds, float), int(n_time))


# ---------------------------------------------------------------- synthetic horseshoe

@dataclass(frozen=True)
class SyntheticHorseshoe:
    """Piecewise-linear full 2-shift: slope ``L0`` on ``[0, 1/L0]`` and ``L1`` on ``[1-1/L1, 1]``."""
    L0: float = 2.0
    L1: float = 4.0

    def branch(self, s: int, x):
        return self.L0 * x if s == 0 else self.L1 * (x - 1.0 + 1.0 / self.L1)

    def periodic_orbits(self, n: int) -> list:
        words = necklaces(n)
        prim = primitive_periods(words, n)
        out = []
        for w, d, bits in zip(words, prim, word_bits(words, n)):
            # f_w(x) = A x + B along the word; fixed point x = B / (1 - A)
            A, B = 1.0, 0.0
            for s in bits:
                if s == 0:
                    A, B = self.L0 * A, self.L0 * B
                else:
                    A, B = self.L1 * A, self.L1 * (B - 1.0 + 1.0 / self.L1)
            x = B / (1.0 - A)
            xs = [x]
            for s in bits[:-1]:
                xs.append(self.branch(int(s), xs[-1]))
            k1 = int(bits.sum())
            lm = (n - k1) * math.log(self.L0) + k1 * math.log(self.L1)
            pts = np.column_stack([xs, np.zeros(n)])
            res = abs(self.branch(int(bits[-1]), xs[-1]) - x)
            out.append(PeriodicOrbit(tuple(int(b) for b in bits), pts, n, lm, res, int(d)))
        return out

    def pressure(self, t):
        return np.log(self.L0 ** (-np.asarray(t, float)) + self.L1 ** (-np.asarray(t, float)))

    def t_u(self) -> float:
        return brentq(lambda t: float(self.pressure(t)), 0.0, 1.0, xtol=1e-15, rtol=1e-15)

    def legendre(self, beta):
        """Closed form: ``beta = (1-w) log L0 + w log L1`` and ``L = H(w) / beta``."""
        beta = np.asarray(beta, float)
        l0, l1 = math.log(self.L0), math.log(self.L1)
        w = (beta - l0) / (l1 - l0)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = -np.where(w > 0, w * np.log(w), 0.0) - np.where(w < 1, (1 - w) * np.log1p(-w), 0.0)
        return h / beta

    def legendre_scan(self, beta, t_grid=None):
        """Brute-force conjugation over a dense t grid, independent of the closed form."""
        t = np.linspace(-20.0, 20.0, 10_000) if t_grid is None else np.asarray(t_grid)
        P = self.pressure(t)
        beta = np.atleast_1d(np.asarray(beta, float))
        return np.min((P[None, :] + t[None, :] * beta[:, None]) / beta[:, None], axis=1)
