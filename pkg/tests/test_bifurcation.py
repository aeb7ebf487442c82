import math

import numpy as np
import pytest

from henonspec.bifurcation import find_first_bifurcation, stable_sides
from henonspec.core import MapParams, eval_map, find_saddles
from henonspec.errors import BracketInvalid


def test_bracket_certificate(bif):
    lo, hi = bif.bracket
    assert lo < bif.a_star < hi and hi - lo <= 1e-9
    assert tuple(bif.counts) == (0, 2)
    assert bif.quad_coeff > 0


def test_invalid_bracket_is_rejected():
    # both ends lie above the tangency, so the crossing counts agree
    with pytest.raises(BracketInvalid):
        find_first_bifurcation(0.01, a_bracket=(2.1, 2.3))


def test_stable_sides_chain(p2):
    _, Q = find_saddles(p2)
    ss = stable_sides(p2, Q)
    y = np.linspace(-p2.b, p2.b, 51)
    # alpha0- is the local stable set of Q: it passes through Q and is invariant
    assert abs(ss.alpha0_minus(Q.location.y) - Q.location.x) < 1e-13
    img = eval_map(p2, np.column_stack([ss.alpha0_plus(y), y]))
    assert np.max(np.abs(ss.alpha0_minus.side(img))) < 1e-12
    assert ss.alpha0_plus.x_mid == pytest.approx(-ss.alpha0_minus.x_mid, abs=0.02)


def test_geometry_checks(geo, p_star):
    c = geo.checks
    assert c["R_in_box"] and c["zeta0_in_I_delta"]
    assert c["alpha0_plus_image_dist"] < 1e-10
    assert c["zeta0_side_dist"] < 1e-12 and c["f_zeta0_stable_dist"] < 1e-9


def test_tangency_is_on_the_critical_strip(geo, p_star):
    z0 = geo.zeta0
    assert abs(z0[0]) < p_star.delta
    # the bottom side touches the parabola at zeta0 without crossing
    x = np.linspace(geo.R["bottom"].samples[:, 0].min(), geo.R["bottom"].samples[:, 0].max(), 2001)
    x = x[np.abs(x) < 0.2]
    gap = geo.parabola.gap(np.column_stack([x, geo.y_bottom(x)]))
    assert np.all(gap <= 1e-12) or np.all(gap >= -1e-12)


def test_theta_inside_R(geo):
    for side, c in geo.Theta.items():
        assert np.all(geo.in_R(c.samples, band=1e-9)), side
    P, _ = find_saddles(geo.p)
    assert geo.in_Theta(P.z, band=1e-9)[0]


def test_summary_is_serialisable(geo):
    import json
    s = json.loads(json.dumps(geo.summary()))
    assert set(s["R"]) == {"left", "right", "bottom", "top"}
