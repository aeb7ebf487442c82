import math

import numpy as np
import pytest

from henonspec.core import (MapParams, backward_orbit, birkhoff_exponent, eval_inverse, eval_map,
                            find_saddles, jacobian, orbit, push_cocycle, unstable_direction)
from henonspec.errors import DegenerateInverse, OrbitEscaped


def test_params_validation():
    with pytest.raises(ValueError):
        MapParams(2.0, 1.5)
    with pytest.raises(ValueError):
        MapParams(2.0, 0.01, lambda_const=0.8)
    assert MapParams(2.0, 0.01).with_a(1.9).a == 1.9


def test_inverse_round_trip(p2, rng):
    z = rng.uniform(-1, 1, (50, 2)) * [1.0, 0.01]
    assert np.allclose(eval_inverse(p2, eval_map(p2, z)), z, atol=1e-12)


def test_b_zero_has_no_inverse():
    with pytest.raises(DegenerateInverse):
        eval_inverse(MapParams(2.0, 0.0), [0.1, 0.0])


def test_jacobian_matches_finite_differences(p2):
    z = np.array([0.3, 0.002])
    h = 1e-6
    fd = np.column_stack([(eval_map(p2, z + e) - eval_map(p2, z - e)) / (2 * h)
                          for e in (np.array([h, 0]), np.array([0, h]))])
    assert np.allclose(jacobian(p2, z), fd, atol=1e-8)


def test_saddles_are_fixed_with_eigenpairs(p2):
    for s in find_saddles(p2):
        assert np.allclose(eval_map(p2, s.z), s.z, atol=1e-14)
        J = jacobian(p2, s.z)
        assert np.allclose(J @ s.v_u, s.lambda_u * s.v_u, atol=1e-12)
        assert np.allclose(J @ s.v_s, s.lambda_s * s.v_s, atol=1e-12)
        # determinant of the map is -b
        assert math.isclose(s.lambda_u * s.lambda_s, -p2.b, rel_tol=1e-12)


def test_saddle_x_closed_form(p2):
    P, Q = find_saddles(p2)
    a, b = p2.a, p2.b
    r = math.sqrt((1 - b) ** 2 + 4 * a)
    assert math.isclose(P.location.x, (-(1 - b) + r) / (2 * a), rel_tol=1e-13)
    assert math.isclose(Q.location.x, (-(1 - b) - r) / (2 * a), rel_tol=1e-13)


def test_birkhoff_exponent_at_fixed_point(p2):
    P, _ = find_saddles(p2)
    ex = birkhoff_exponent(p2, P.z, P.v_u, 1000)
    assert ex == pytest.approx(math.log(abs(P.lambda_u)), abs=1e-12)


def test_cocycle_total_matches_birkhoff(p2):
    z = np.array([0.2, 0.001])
    rec = push_cocycle(p2, z, (1.0, 0.0), 20)
    assert rec.total / 20 == pytest.approx(birkhoff_exponent(p2, z, (1.0, 0.0), 20), abs=1e-12)
    assert np.allclose(np.linalg.norm(rec.vectors, axis=1), 1.0)


def test_escape_is_reported(p2):
    with pytest.raises(OrbitEscaped):
        push_cocycle(p2, [3.0, 0.0], (1, 0), 10)


def test_unstable_direction_at_saddle(p2):
    P, _ = find_saddles(p2)
    back = np.repeat(P.z[None, :], 30, axis=0)
    v = np.array(unstable_direction(p2, back, 25))
    assert abs(v[0] * P.v_u[1] - v[1] * P.v_u[0]) < 1e-9


def test_orbit_helpers(p2):
    z = np.array([0.1, 0.0])
    fw = orbit(p2, z, 3)
    assert np.allclose(backward_orbit(p2, fw[-1], 3)[-1], z, atol=1e-9)
