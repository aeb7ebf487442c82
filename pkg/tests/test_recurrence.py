import math

import numpy as np
import pytest

from henonspec import recurrence as rec
from henonspec.core import eval_map, find_saddles, jacobian
from henonspec.errors import FieldUndefined, NotControlled
from henonspec.manifold import Curve


def test_c_of_b():
    assert rec.c_of_b(math.exp(-4)) == pytest.approx(0.25)


def test_stable_direction_at_saddle(p2):
    P, _ = find_saddles(p2)
    e = rec.stable_direction(p2, P.z)
    assert abs(e[0] * P.v_s[1] - e[1] * P.v_s[0]) < 1e-10
    assert e[1] > 0


def test_stable_field_is_contracted(p2, rng):
    z = rng.uniform(-0.5, 0.5, (20, 2)) * [1, 0.01]
    e, depth = rec.stable_field(p2, z)
    full = depth == 8                       # points that escape get a shorter depth
    assert full.sum() >= 15 and np.all(depth <= 8)
    w = np.einsum("kij,kj->ki", jacobian(p2, z[full]), e[full])
    assert np.all(np.linalg.norm(w, axis=1) < 0.05)


def test_stable_field_undefined_after_escape(p2):
    with pytest.raises(FieldUndefined):
        rec.stable_direction(p2, np.array([3.5, 0.0]))


def test_critical_points_of_R_sides(p_star, geo):
    crit = rec.critical_set_from_strands(p_star, [geo.R["bottom"], geo.R["top"]], geo)
    assert len(crit) >= 1
    for c in crit:
        assert abs(c.location.x) < p_star.delta
        assert c.alignment < 1e-6
    # the tangency point of the bottom side is critical
    d = min(np.hypot(c.location.x - geo.zeta0[0], c.location.y - geo.zeta0[1]) for c in crit)
    assert d < 1e-4


def test_cycle_profile_is_consistent(p_star, orbit_sets):
    found = ((o, rec.cycle_profile(p_star, o.points, ph))
             for o in orbit_sets[10] if o.primitive_period == 10 for ph in range(10))
    o, prof = next((o, pr) for o, pr in found if pr.controlled and pr.events)
    assert prof.N == 5 * 10
    assert np.all(np.isfinite(prof.log_norms))
    for e in prof.events:
        assert e.d_crit > 0 and abs(e.point.x) < p_star.delta
    segs = rec.free_segments(prof, p_star.delta, np.tile(o.points, (6, 1)))
    for a, b in segs:
        assert a < b


def test_binding_statistics_small(p_star, orbit_sets):
    st = rec.binding_statistics(p_star, [o.points for o in orbit_sets[10]])
    assert st.n_returns > 0 and st.failures == 0
    assert st.cap_min <= st.cap_constant
    assert 0 <= st.pass_fraction <= 1


def test_stable_leaf_contracts(p_star, geo, orbit_sets):
    o = [o for o in orbit_sets[10] if o.primitive_period == 10][30]
    leaf = rec.build_stable_leaf(p_star, o.points[0], geo=geo, base_orbit=o.points)
    assert leaf.contraction_rate < 10 * p_star.b
    ys = leaf.curve.samples[:, 1]
    # the leaf runs between the unstable sides of R
    assert ys.min() < geo.y_bottom(leaf.curve.samples[0, 0]) + 1e-3
    r = rec.leaf_derivative_ratios(p_star, leaf.curve, o.points, 30)
    assert np.all((r > 0.5) & (r < 2.0))


def test_hermite_admissible_accepts_a_line():
    z, zeta = np.array([0.01, 0.0]), np.array([0.0, 0.0])
    t = np.array([1.0, 0.0])
    assert rec.hermite_admissible(z, t, zeta, t, 0.1)
