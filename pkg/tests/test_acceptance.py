"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from conftest import TIMINGS, record
from henonspec import inducing as ind
from henonspec import recurrence as rec
from henonspec import synthesis as syn
from henonspec import thermo as th
from henonspec.core import MapParams, find_saddles

LOG2, LOG4 = math.log(2.0), math.log(4.0)
T_GRID = np.linspace(-10.0, 10.0, 50)


def test_criterion_01_fixed_point_exponents():
    rows, ok = [], True
    for b in (1e-2, 1e-3):
        t0 = time.perf_counter()
        P, Q = find_saddles(MapParams(2.0, b))
        dt = time.perf_counter() - t0
        eP, eQ = math.log(abs(P.lambda_u)), math.log(abs(Q.lambda_u))
        ok &= abs(eP - LOG2) <= 0.05 and abs(eQ - LOG4) <= 0.05 and dt < 1.0
        rows.append(f"b={b:g}: P {eP - LOG2:+.4f}, Q {eQ - LOG4:+.4f}, {dt * 1e3:.1f} ms")
    record(1, ok, "; ".join(rows))
    assert ok


def test_criterion_02_first_bifurcation_trend(bif_cache):
    b2, b3 = bif_cache(1e-2), bif_cache(1e-3)
    times = [TIMINGS.get(("astar", b), 0.0) for b in (1e-2, 1e-3)]
    ok = (1.8 < b2.a_star < 2.2 and 1.8 < b3.a_star < 2.2
          and abs(b3.a_star - 2) < abs(b2.a_star - 2)
          and tuple(b2.counts) == (0, 2) and tuple(b3.counts) == (0, 2)
          and max(times) < 300)
    record(2, ok, f"a*(1e-2)={b2.a_star:.10f}, a*(1e-3)={b3.a_star:.10f}, "
                  f"counts {tuple(b2.counts)} {tuple(b3.counts)}, "
                  f"{times[0]:.0f} s / {times[1]:.0f} s")
    assert ok


def test_criterion_03_pressure_signs_and_shape(orbit_cache):
    sets = orbit_cache(1e-2)
    dt = TIMINGS[("orbits", 1e-2)]
    rows, ok = [], dt < 600
    for n, (orbs, rep) in sets.items():
        pt = th.pressure_table(orbs, T_GRID, n, th.pruned_fraction(rep))
        P0, P1 = float(th.pressure(orbs, 0.0, n)), float(th.pressure(orbs, 1.0, n))
        good = 0.5 < P0 <= LOG2 + 0.02 and P1 < 0 and pt.convexity_residual >= -1e-9
        ok &= good
        rows.append(f"n={n}: P(0)={P0:.5f} P(1)={P1:.4f} conv={pt.convexity_residual:.2e}")
    record(3, ok, "; ".join(rows) + f"; {dt:.0f} s")
    assert ok


def test_criterion_04_dimension_root(orbit_cache):
    roots = {}
    for b in (1e-2, 1e-3):
        roots[b] = th.solve_tu({n: v[0] for n, v in orbit_cache(b).items()})
    r2, r3 = roots[1e-2], roots[1e-3]
    spread = {b: max(r.per_order.values()) - min(r.per_order.values()) for b, r in roots.items()}
    ok = (all(0 < r.value < 1 for r in roots.values()) and max(spread.values()) < 0.05
          and r3.value > r2.value)
    record(4, ok, f"t_u(1e-2)={r2.value:.6f} (spread {spread[1e-2]:.1e}), "
                  f"t_u(1e-3)={r3.value:.6f} (spread {spread[1e-3]:.1e})")
    assert ok


def test_criterion_05_synthetic_horseshoe_oracle():
    t0 = time.perf_counter()
    hs = th.SyntheticHorseshoe(2.0, 4.0)
    sets = {n: hs.periodic_orbits(n) for n in (8, 10, 12)}
    err_p = max(float(np.max(np.abs(th.pressure(o, T_GRID, n) - hs.pressure(T_GRID))))
                for n, o in sets.items())
    tu = th.solve_tu(sets).value
    err_t = abs(tu - hs.t_u())
    beta = np.linspace(LOG2, LOG4, 41)[1:-1]
    pt = th.pressure_table(sets[12], T_GRID, 12)
    sp = th.legendre_spectrum(pt, beta, lambda t: th.pressure(sets[12], t, 12), tu)
    closed = hs.legendre(beta)
    err_l = float(np.max(np.abs(sp.L_values - closed)))
    err_scan = float(np.max(np.abs(hs.legendre_scan(beta) - closed)))
    dt = time.perf_counter() - t0
    ok = max(err_p, err_t, err_l, err_scan) <= 1e-6 and dt < 10
    record(5, ok, f"pressure {err_p:.1e}, t_u {err_t:.1e}, Legendre {err_l:.1e}, "
                  f"scan oracle {err_scan:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_06_spectrum_shape(orbit_sets, p_star, geo):
    n = 14
    root = th.solve_tu(orbit_sets)
    lo, hi = th.lyapunov_bounds(orbit_sets[n])
    beta = np.linspace(lo, hi, 203)[1:-1]
    pt = th.pressure_table(orbit_sets[n], T_GRID, n)
    sp = th.legendre_spectrum(pt, beta, lambda t: th.pressure(orbit_sets[n], t, n), root.value)
    box = th.box_counting_spectrum(p_star, geo.R["bottom"], n_time=12,
                                   legendre_beta_star=sp.beta_star)
    ok = (sp.unimodal() and bool(np.all(sp.L_values > 0))
          and abs(sp.L_max - root.value) <= 1e-3
          and abs(box.beta_star - sp.beta_star) <= 0.15)
    record(6, ok, f"L_max - t_u = {sp.L_max - root.value:.1e}, unimodal {sp.unimodal()}, "
                  f"beta* {sp.beta_star:.4f}, box argmax {box.beta_star:.4f}")
    assert ok


def test_criterion_07_quadratic_baseline():
    t0 = time.perf_counter()
    special = th.quadratic_baseline(seeds=[-1.0, 1.0], n_time=10 ** 6)
    ex = th.quadratic_baseline(10 ** 4, 10 ** 6, seed=0)
    dt = time.perf_counter() - t0
    frac = float(np.mean(np.abs(ex - LOG2) <= 0.02))
    ok = bool(np.all(special == LOG4)) and frac >= 0.99 and dt < 120
    record(7, ok, f"seeds -1,1: {special.tolist()}; within 0.02 of log 2: {frac:.4f}; {dt:.0f} s")
    assert ok


def test_criterion_08_binding_inequalities(p_star, orbit_sets):
    st = rec.binding_statistics(p_star, [o.points for o in orbit_sets[12]])
    ok = (st.n_returns >= 500 and st.failures == 0
          and np.isfinite(st.cap_constant) and st.cap_constant > 0)
    record(8, ok, f"{st.n_returns} returns from {st.n_cycles} cycles, {st.failures} failures, "
                  f"C={st.cap_constant:.3f} (log-log slope {st.loglog_slope:.3f})")
    assert ok


def test_criterion_09_inducing_structure(rects):
    tau_ok = all(r.tau >= 2 * r.depth for r in rects)
    lam = min(-math.log(r.unstable_length) / r.depth for r in rects)
    len_ok = lam > 0 and all(r.unstable_length <= math.exp(-lam * r.depth) * (1 + 1e-12)
                             for r in rects)
    nested, bad = ind.check_nesting(rects)
    ok = tau_ok and len_ok and nested
    record(9, ok, f"{len(rects)} rectangles, tau >= 2n {tau_ok}, fitted lambda {lam:.4f}, "
                  f"nesting violations {bad}")
    assert ok


def test_criterion_10_distortion(p_star, geo, fam, rects, orbit_sets):
    reps = [ind.distortion_scan(p_star, r, fam.bottom) for r in rects]
    mx = np.array([r.max_log_ratio for r in reps])
    sl = np.array([r.slope for r in reps])
    dist_ok = bool(np.all(np.isfinite(mx)) and np.all(np.isfinite(sl)) and np.all(sl > 0))
    ratios = []
    # leaves through every primitive cycle; the fixed points sit on corners of R or Theta
    for o in (o for o in orbit_sets[10] if o.primitive_period == 10):
        leaf = rec.build_stable_leaf(p_star, o.points[0], geo=geo, base_orbit=o.points)
        ratios.append(rec.leaf_derivative_ratios(p_star, leaf.curve, o.points, 30))
    ratios = np.concatenate(ratios)
    leaf_ok = bool(np.all((ratios >= 0.5) & (ratios <= 2.0)))
    ok = dist_ok and leaf_ok
    record(10, ok, f"{len(reps)} rectangles: max log-ratio {mx.max():.3f}, slopes "
                   f"[{sl.min():.3f}, {sl.max():.3f}]; leaf ratios [{ratios.min():.4f}, "
                   f"{ratios.max():.4f}] over {len(ratios)} points")
    assert ok


def test_criterion_11_irregular_witness(p_star, geo, fam):
    lo = syn.induced_cycle(p_star, fam, (4,))
    hi = syn.induced_cycle(p_star, fam, (20,))
    o = syn.synthesize_irregular(lo, hi, 10 ** 6, p=p_star, fam=fam)
    rep = syn.verify_birkhoff(o)
    ratio = rep.gap / (hi.exponent - lo.exponent)
    deep = [syn.deep_return(p_star, geo, fam, n) for n in (6, 8, 10)]
    deep_ok = all(d.exponent_at_n_plus_q < 0 for d in deep)
    ok = o.horizon >= 10 ** 6 and ratio >= 0.8 and deep_ok
    record(11, ok, f"gap ratio {ratio:.3f} at horizon {o.horizon}; deep returns "
                   + ", ".join(f"n={d.n} q={d.q}: {d.exponent_at_n_plus_q:.3f}" for d in deep))
    assert ok
