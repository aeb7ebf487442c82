"""Map family, inverse, derivative cocycle, saddles and finite-time exponents.

The default family is the classical Hénon map ``(x, y) -> (1 - a x^2 + y, b x)``,
whose Jacobian determinant is the constant ``-b``.  A ``custom`` variant can be
plugged in through callables on :class:`MapParams`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from numba import njit

from .errors import DegenerateInverse, NoSaddle, NotConverged, OrbitEscaped

ESCAPE_RADIUS = 10.0
FIXED_TOL = 1e-12


class PlanePoint(NamedTuple):
    x: float
    y: float


class TangentVector(NamedTuple):
    xi: float
    eta: float

    @property
    def slope(self) -> float:
        return slope(self)


def slope(v) -> float:
    """|eta|/|xi|, infinite for vertical vectors."""
    xi, eta = float(v[0]), float(v[1])
    if xi == 0.0:
        return math.inf
    return abs(eta) / abs(xi)


@dataclass(frozen=True)
class MapParams:
    a: float
    b: float
    phi_variant: str = "classical_henon"
    lambda_const: float = 0.35
    delta: float = 0.1
    # custom hooks: map_fn(a, b, x, y) -> (x', y'); jac_fn(a, b, x, y) -> 2x2;
    # inv_fn(a, b, x, y) -> (x, y)
    map_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    jac_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    inv_fn: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not (0.0 <= self.b < 1.0):
            raise ValueError(f"b must lie in [0, 1), got {self.b}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not (0.0 < self.lambda_const < math.log(2.0)):
            raise ValueError("lambda_const must lie in (0, log 2)")
        if self.phi_variant not in ("classical_henon", "custom"):
            raise ValueError(f"unknown phi_variant {self.phi_variant!r}")
        if self.phi_variant == "custom" and (self.map_fn is None or self.jac_fn is None):
            raise ValueError("custom variant needs map_fn and jac_fn")

    @property
    def classical(self) -> bool:
        return self.phi_variant == "classical_henon"

    def with_a(self, a: float) -> "MapParams":
        return MapParams(a, self.b, self.phi_variant, self.lambda_const, self.delta,
                         self.map_fn, self.jac_fn, self.inv_fn)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "phi_variant": self.phi_variant,
                "lambda_const": self.lambda_const, "delta": self.delta}


# ---------------------------------------------------------------- map pieces

def eval_map(p: MapParams, z) -> np.ndarray:
    """Image of ``z`` (shape ``(2,)`` or ``(..., 2)``)."""
    z = np.asarray(z, dtype=float)
    x, y = z[..., 0], z[..., 1]
    if p.classical:
        return np.stack([1.0 - p.a * x * x + y, p.b * x], axis=-1)
    xn, yn = p.map_fn(p.a, p.b, x, y)
    return np.stack([np.asarray(xn, float), np.asarray(yn, float)], axis=-1)


def eval_inverse(p: MapParams, z) -> np.ndarray:
    if p.b == 0.0:
        raise DegenerateInverse("the b = 0 family is not invertible")
    z = np.asarray(z, dtype=float)
    x, y = z[..., 0], z[..., 1]
    if p.classical:
        xp = y / p.b
        return np.stack([xp, x - 1.0 + p.a * xp * xp], axis=-1)
    if p.inv_fn is None:
        raise DegenerateInverse("custom variant has no inverse hook")
    xp, yp = p.inv_fn(p.a, p.b, x, y)
    return np.stack([np.asarray(xp, float), np.asarray(yp, float)], axis=-1)


def jacobian(p: MapParams, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    x = z[..., 0]
    if p.classical:
        out = np.zeros(z.shape[:-1] + (2, 2))
        out[..., 0, 0] = -2.0 * p.a * x
        out[..., 0, 1] = 1.0
        out[..., 1, 0] = p.b
        return out
    return np.asarray(p.jac_fn(p.a, p.b, x, z[..., 1]), dtype=float)


def inverse_jacobian(p: MapParams, z) -> np.ndarray:
    """Derivative of the inverse map at ``z`` (i.e. ``Df(f^{-1} z)^{-1}``)."""
    return np.linalg.inv(jacobian(p, eval_inverse(p, z)))


def orbit(p: MapParams, z, n: int) -> np.ndarray:
    out = np.empty((n + 1, 2))
    out[0] = z
    for i in range(n):
        out[i + 1] = eval_map(p, out[i])
    return out


def backward_orbit(p: MapParams, z, n: int) -> np.ndarray:
    out = np.empty((n + 1, 2))
    out[0] = z
    for i in range(n):
        out[i + 1] = eval_inverse(p, out[i])
    return out


def escaped(z) -> bool:
    z = np.asarray(z)
    return not (abs(z[0]) < ESCAPE_RADIUS and abs(z[1]) < ESCAPE_RADIUS)


# ---------------------------------------------------------------- saddles

@dataclass
class SaddleData:
    label: str
    location: PlanePoint
    eigenvalues: tuple      # (unstable, stable)
    eigenvectors: tuple     # (TangentVector, TangentVector), unit length

    @property
    def z(self) -> np.ndarray:
        return np.array(self.location, dtype=float)

    @property
    def lambda_u(self) -> float:
        return self.eigenvalues[0]

    @property
    def lambda_s(self) -> float:
        return self.eigenvalues[1]

    @property
    def v_u(self) -> np.ndarray:
        return np.array(self.eigenvectors[0], dtype=float)

    @property
    def v_s(self) -> np.ndarray:
        return np.array(self.eigenvectors[1], dtype=float)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "x": self.location.x, "y": self.location.y,
            "eig_u": self.eigenvalues[0], "eig_s": self.eigenvalues[1],
            "v_u": list(self.eigenvectors[0]), "v_s": list(self.eigenvectors[1]),
        }


def _newton_fixed_point(p: MapParams, seed, tol=1e-13, maxiter=60):
    z = np.array(seed, dtype=float)
    eye = np.eye(2)
    for _ in range(maxiter):
        r = eval_map(p, z) - z
        if np.max(np.abs(r)) < tol:
            return z, float(np.max(np.abs(r)))
        step = np.linalg.solve(jacobian(p, z) - eye, -r)
        z = z + step
        if not np.all(np.isfinite(z)):
            break
    r = eval_map(p, z) - z
    res = float(np.max(np.abs(r)))
    if res > 1e-12 or not np.isfinite(res):
        raise NoSaddle(f"Newton failed from seed {tuple(seed)} (residual {res:.2e})")
    return z, res


def _saddle_record(p: MapParams, label: str, z: np.ndarray) -> SaddleData:
    w, vecs = np.linalg.eig(jacobian(p, z))
    if np.iscomplexobj(w) and np.any(np.abs(np.imag(w)) > 0):
        raise NoSaddle(f"{label}: complex eigenvalues {w}")
    w = np.real(w)
    vecs = np.real(vecs)
    order = np.argsort(-np.abs(w))
    lu, ls = w[order]
    if not (abs(lu) > 1.0 > abs(ls)):
        raise NoSaddle(f"{label}: eigenvalues {lu}, {ls} are not of saddle type")
    vu = vecs[:, order[0]] / np.linalg.norm(vecs[:, order[0]])
    vs = vecs[:, order[1]] / np.linalg.norm(vecs[:, order[1]])
    if vu[0] < 0:
        vu = -vu
    if vs[1] < 0:
        vs = -vs
    return SaddleData(label, PlanePoint(float(z[0]), float(z[1])), (float(lu), float(ls)),
                      (TangentVector(*map(float, vu)), TangentVector(*map(float, vs))))


def find_saddles(p: MapParams) -> tuple[SaddleData, SaddleData]:
    """The two fixed saddles ``(P, Q)`` seeded at (1/2, 0) and (-1, 0)."""
    zp, _ = _newton_fixed_point(p, (0.5, 0.0))
    zq, _ = _newton_fixed_point(p, (-1.0, 0.0))
    if not zp[0] > 0 > zq[0]:
        raise NoSaddle("fixed points did not separate as P.x > 0 > Q.x")
    return _saddle_record(p, "P", zp), _saddle_record(p, "Q", zq)


# ---------------------------------------------------------------- cocycle

@dataclass
class CocycleRecord:
    orbit: np.ndarray       # (n+1, 2)
    vectors: np.ndarray     # (n+1, 2) unit vectors
    log_norms: np.ndarray   # (n,) log growth at each step

    @property
    def total(self) -> float:
        return float(np.sum(self.log_norms))


def push_cocycle(p: MapParams, z, v, n: int) -> CocycleRecord:
    """Push ``v`` along the orbit of ``z`` for ``n`` steps with renormalisation."""
    pts = np.empty((n + 1, 2))
    vecs = np.empty((n + 1, 2))
    logs = np.empty(n)
    pts[0] = z
    w = np.asarray(v, float)
    vecs[0] = w / np.linalg.norm(w)
    for i in range(n):
        w = jacobian(p, pts[i]) @ vecs[i]
        nw = np.linalg.norm(w)
        logs[i] = math.log(nw)
        vecs[i + 1] = w / nw
        pts[i + 1] = eval_map(p, pts[i])
        if escaped(pts[i + 1]):
            raise OrbitEscaped(f"orbit left the escape box at step {i + 1}")
    return CocycleRecord(pts, vecs, logs)


def unstable_direction(p: MapParams, backward_orbit_pts, depth: int, tol: float = 1e-9,
                       seed_vector=(0.6, 0.8)) -> TangentVector:
    """Unstable direction at ``backward_orbit_pts[0]``.

    A generic seed vector placed at ``backward_orbit_pts[depth]`` is pushed
    forward to the base point; the estimates from ``depth`` and ``depth - 5``
    must agree in angle to ``tol``.
    """
    pts = np.asarray(backward_orbit_pts, float)
    if depth >= len(pts):
        raise ValueError("depth exceeds the length of the backward orbit")
    if depth < 6:
        raise ValueError("depth must be at least 6")

    def push(d):
        w = np.asarray(seed_vector, float)
        w = w / np.linalg.norm(w)
        for i in range(d, 0, -1):
            w = jacobian(p, pts[i]) @ w
            w = w / np.linalg.norm(w)
        return w

    v1 = push(depth)
    v2 = push(depth - 5)
    ang = abs(v1[0] * v2[1] - v1[1] * v2[0])
    if ang > tol:
        raise NotConverged(f"unstable direction not converged (angle {ang:.2e})")
    if v1[0] < 0:
        v1 = -v1
    return TangentVector(float(v1[0]), float(v1[1]))


@njit(cache=True)
def _birkhoff_classical(a, b, x, y, xi, eta, n, compensated, frozen):
    nv = math.sqrt(xi * xi + eta * eta)
    xi /= nv
    eta /= nv
    total = 0.0
    comp = 0.0
    for i in range(n):
        nxi = -2.0 * a * x * xi + eta
        neta = b * xi
        nv = math.sqrt(nxi * nxi + neta * neta)
        term = math.log(nv)
        if compensated:
            yk = term - comp
            t = total + yk
            comp = (t - total) - yk
            total = t
        else:
            total += term
        xi = nxi / nv
        eta = neta / nv
        if frozen:
            continue
        xn = 1.0 - a * x * x + y
        y = b * x
        x = xn
        if not (abs(x) < 10.0 and abs(y) < 10.0):
            return total, -(i + 1)
    return total, n


def birkhoff_exponent(p: MapParams, z, v, n: int, compensated: bool = False) -> float:
    """``(1/n) log |D_z f^n v|`` with per-step renormalisation."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = np.asarray(z, float)
    v = np.asarray(v, float)
    # a numerically fixed point is held fixed; otherwise rounding pushes it off
    frozen = bool(np.max(np.abs(eval_map(p, z) - z)) <= FIXED_TOL)
    if p.classical:
        total, steps = _birkhoff_classical(p.a, p.b, z[0], z[1], v[0], v[1], int(n),
                                           bool(compensated), frozen)
        if steps < 0:
            raise OrbitEscaped(f"orbit escaped after {-steps} steps")
        return total / n
    if frozen:
        J = jacobian(p, z)
        w = v / np.linalg.norm(v)
        logs = np.empty(n)
        for i in range(n):
            w = J @ w
            logs[i] = math.log(np.linalg.norm(w))
            w = w / np.linalg.norm(w)
        return (math.fsum(logs) if compensated else float(np.sum(logs))) / n
    rec = push_cocycle(p, z, v, n)
    if compensated:
        return math.fsum(rec.log_norms) / n
    return rec.total / n
