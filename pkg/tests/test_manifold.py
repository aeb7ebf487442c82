import numpy as np
import pytest

from henonspec.core import eval_map, find_saddles
from henonspec.manifold import (Curve, curve_intersections, grow_unstable, hausdorff_distance,
                                ManifoldBranch, local_stable_graph, one_sided_distance)


@pytest.fixture(scope="module")
def wu(p2):
    P, _ = find_saddles(p2)
    return P, grow_unstable(p2, P, 3.0)


def test_unstable_manifold_starts_at_saddle(wu):
    P, c = wu
    assert np.linalg.norm(c.samples[0] - P.z) < 1e-5
    assert c.length >= 3.0


def test_unstable_manifold_is_invariant(p2, wu):
    P, c = wu
    # the unstable eigenvalue is negative, so f swaps the two branches
    other = grow_unstable(p2, P, 3.0, branch=-1)
    head = c.samples[c.arclength < 1.0]
    assert one_sided_distance(eval_map(p2, head), other) < 1e-4   # polyline chord error
    t = np.linspace(1.0, 4.0, 37)
    plus, minus = ManifoldBranch(p2, P, "unstable", 1), ManifoldBranch(p2, P, "unstable", -1)
    assert np.allclose(eval_map(p2, plus.evaluate(t)[0]), minus.evaluate(t + 1)[0], atol=1e-12)


def test_local_stable_graph_contains_saddle_and_is_invariant(p2):
    P, _ = find_saddles(p2)
    g = local_stable_graph(p2, P, 2 * p2.b)
    assert abs(g(P.location.y) - P.location.x) < 1e-13
    c = g.curve()
    img = eval_map(p2, c.samples)
    assert np.max(np.abs(g.side(img))) < 1e-10


def test_curve_round_trip(tmp_path):
    t = np.linspace(0, 1, 21)
    c = Curve.from_points(np.column_stack([t, t ** 2]))
    c.write(tmp_path / "c.csv", {"note": "parabola"})
    d = Curve.read(tmp_path / "c.csv")
    assert np.allclose(d.samples, c.samples)
    assert d.length == pytest.approx(c.length)


def test_hausdorff_of_shifted_line():
    t = np.linspace(0, 1, 11)
    a = Curve.from_points(np.column_stack([t, 0 * t]))
    b = Curve.from_points(np.column_stack([t, 0 * t + 0.25]))
    assert hausdorff_distance(a, b) == pytest.approx(0.25)
    assert hausdorff_distance(a, a) == 0.0


def test_transversal_crossing_of_diagonals():
    t = np.linspace(-1, 1, 11)
    a = Curve.from_points(np.column_stack([t, t]))
    b = Curve.from_points(np.column_stack([t, -t + 0.05]))
    rep = curve_intersections(a, b)
    assert rep.n_transversal == 1
    z, ang = rep.transversal[0]
    assert np.allclose(z, [0.025, 0.025], atol=1e-12)
    assert ang == pytest.approx(np.pi / 2, abs=1e-6)


def test_breaks_split_pieces():
    pts = np.column_stack([np.arange(6.0), np.zeros(6)])
    c = Curve.from_points(pts, breaks=(3,))
    assert [len(p) for p in c.pieces()] == [3, 3]
    assert c.length == pytest.approx(4.0)
