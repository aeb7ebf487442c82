import numpy as np
import pytest

from henonspec import inducing as ind
from henonspec.core import eval_map
from henonspec.errors import ComponentAmbiguous


class _R:
    def __init__(self, lo, hi, n=1, length=0.1):
        self.interval, self.depth, self.unstable_length = (lo, hi), n, length


def test_check_nesting_on_intervals():
    assert ind.check_nesting([_R(0, 1), _R(0.2, 0.4), _R(0.4, 0.6)]) == (True, 0)
    assert ind.check_nesting([_R(0, 0.5), _R(0.3, 0.8)]) == (False, 1)
    assert ind.check_nesting([]) == (True, 0)


def test_expansion_rate_is_tight():
    rs = [_R(0, 1, 1, np.exp(-0.5)), _R(0, 1, 2, np.exp(-1.6))]
    assert ind.expansion_rate(rs) == pytest.approx(0.5)


def test_symbol_sign():
    assert ind.symbol(1, 3) == 3 and ind.symbol(-1, 3) == -3


def test_family_checks(fam):
    c = fam.checks
    assert c["image_ok"] and c["dist_decreasing"]
    # consecutive escape gaps shrink geometrically
    assert all(0 < r < 1 for r in c["gap_rates"][:10])


def test_rectangles_depth_and_times(rects):
    assert {r.depth for r in rects} == {1, 2, 3}
    for r in rects:
        assert r.tau == sum(abs(s) for s in r.word) <= 20
        assert r.tau >= 2 * r.depth
        assert r.interval[0] < r.interval[1]


def test_children_lie_inside_parents(rects):
    by_word = {r.word: r for r in rects}
    for r in rects:
        if r.depth > 1:
            parent = by_word[r.word[:-1]]
            assert parent.interval[0] <= r.interval[0] and r.interval[1] <= parent.interval[1]


def test_return_time_of_rectangle_points(p_star, geo, fam, rects):
    for r in [r for r in rects if r.depth == 1][:12]:
        z = fam.bottom.points(0.5 * (r.interval[0] + r.interval[1]))[0]
        assert ind.first_return_time(p_star, geo, fam, z) == abs(r.word[0])


def test_decode_and_itinerary_round_trip(p_star, fam, rects):
    for r in [r for r in rects if r.depth == 2][::25]:
        lo, hi, tau = ind.decode(p_star, fam, r.word)
        assert (lo, hi) == pytest.approx(r.interval, abs=1e-12)
        assert tau == r.tau
        z = fam.bottom.points(0.5 * (lo + hi))[0]
        assert ind.itinerary(p_star, fam, z, 2) == r.word


def test_unavailable_symbol(p_star, fam):
    with pytest.raises(ComponentAmbiguous):
        ind.decode(p_star, fam, (1,))


def test_decode_periodic_gives_a_cycle(p_star, fam):
    z = ind.decode_periodic(p_star, fam, (2, 3))
    assert z.shape == (5, 2)
    assert np.allclose(eval_map(p_star, z[-1]), z[0], atol=1e-10)


def test_distortion_of_a_rectangle(p_star, fam, rects):
    r = next(r for r in rects if r.depth == 1 and r.tau >= 6)
    rep = ind.distortion_scan(p_star, r, fam.bottom)
    assert np.isfinite(rep.max_log_ratio) and rep.slope > 0
    assert rep.max_expansion_log / rep.tau > 0.5
