import math

import numpy as np
import pytest

from henonspec import thermo as th
from henonspec.core import MapParams
from henonspec.errors import EmptyOrbitSet, GridTooCoarse


@pytest.mark.parametrize("n,count", [(1, 2), (4, 6), (6, 14), (10, 108), (12, 352)])
def test_necklace_counts(n, count):
    assert len(th.necklaces(n)) == count


def test_primitive_periods():
    words = th.necklaces(6)
    prim = th.primitive_periods(words, 6)
    # 2 fixed words, 1 of period 2, 2 of period 3, 9 primitive of period 6
    assert sorted(np.bincount(prim).nonzero()[0].tolist()) == [1, 2, 3, 6]
    assert np.bincount(prim)[[1, 2, 3, 6]].tolist() == [2, 1, 2, 9]


@pytest.fixture(scope="module")
def full_shift():
    # above the first bifurcation every binary word is realised
    p = MapParams(2.2, 0.01)
    rep = {}
    orbs = th.enumerate_periodic_orbits(p, 8, report=rep)
    return p, orbs, rep


def test_full_horseshoe_has_every_word(full_shift):
    _, orbs, rep = full_shift
    assert rep["found"] == 36 and rep["pruned_points"] == 0
    assert th.pruned_fraction(rep) == 0.0
    assert th.pressure(orbs, 0.0, 8) == pytest.approx(math.log(2), abs=1e-14)
    assert max(o.residual for o in orbs) < 1e-10


def test_orbits_follow_their_words(full_shift):
    p, orbs, _ = full_shift
    from henonspec.core import eval_map
    for o in orbs:
        assert np.allclose(eval_map(p, o.points), np.roll(o.points, -1, axis=0), atol=1e-10)
        assert tuple((o.points[:, 0] > 0).astype(int)) == o.word


def test_pressure_decreasing_and_convex(full_shift):
    _, orbs, _ = full_shift
    pt = th.pressure_table(orbs, np.linspace(-3, 3, 50), 8)
    assert pt.monotone and pt.convexity_residual >= -1e-9


def test_horseshoe_closed_forms():
    hs = th.SyntheticHorseshoe(2.0, 4.0)
    assert hs.t_u() == pytest.approx(-math.log2((math.sqrt(5) - 1) / 2), abs=1e-14)
    orbs = hs.periodic_orbits(6)
    t = np.linspace(-1, 2, 7)
    assert np.allclose(th.pressure(orbs, t, 6), hs.pressure(t), atol=1e-13)
    # equal weights give entropy log 2 at the mean exponent
    beta = 0.5 * (math.log(2) + math.log(4))
    assert hs.legendre(beta) == pytest.approx(math.log(2) / beta, abs=1e-14)


def test_legendre_matches_closed_form_and_peaks_at_t_u():
    hs = th.SyntheticHorseshoe(2.0, 3.0)
    orbs = hs.periodic_orbits(10)
    pt = th.pressure_table(orbs, np.linspace(-10, 10, 50), 10)
    beta = np.linspace(math.log(2), math.log(3), 101)[1:-1]
    sp = th.legendre_spectrum(pt, beta, lambda s: th.pressure(orbs, s, 10), hs.t_u())
    exact = hs.legendre(beta)
    inner = ~sp.endpoint
    assert inner.sum() > 90
    assert np.allclose(sp.L_values[inner], exact[inner], atol=1e-8)
    # at the t-grid ends the infimum is only bounded from above
    assert np.all(sp.L_values[~inner] >= exact[~inner] - 1e-12)
    assert sp.unimodal()
    assert sp.L_max == pytest.approx(hs.t_u(), abs=1e-3)


def test_legendre_rejects_too_narrow_t_grid():
    hs = th.SyntheticHorseshoe()
    orbs = hs.periodic_orbits(8)
    pt = th.pressure_table(orbs, np.linspace(2.0, 3.0, 10), 8)
    with pytest.raises(GridTooCoarse):
        th.legendre_spectrum(pt, np.linspace(0.8, 1.2, 9))


def test_root_and_bounds_errors():
    with pytest.raises(EmptyOrbitSet):
        th.lyapunov_bounds([])
    hs = th.SyntheticHorseshoe()
    r = th.solve_tu({n: hs.periodic_orbits(n) for n in (6, 8)})
    assert r.uncertainty < 1e-12 and r.value == pytest.approx(hs.t_u(), abs=1e-12)


def test_quadratic_baseline_special_and_typical():
    ex = th.quadratic_baseline(seeds=[-1.0, 1.0, 0.0], n_time=1000)
    assert ex[0] == math.log(4) and ex[1] == math.log(4)
    typical = th.quadratic_baseline(200, 20_000, seed=1)
    assert np.median(np.abs(typical - math.log(2))) < 0.02


def test_table_writers(tmp_path):
    hs = th.SyntheticHorseshoe()
    orbs = hs.periodic_orbits(6)
    pt = th.pressure_table(orbs, np.linspace(-1, 1, 5), 6)
    pt.write(tmp_path / "p.csv")
    back = np.loadtxt(tmp_path / "p.csv", delimiter=",")
    assert np.allclose(back[:, 1], pt.P_values)
    assert "orbit_count=14" in (tmp_path / "p.csv").read_text()
