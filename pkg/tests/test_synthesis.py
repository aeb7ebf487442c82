import math

import numpy as np
import pytest

from henonspec import synthesis as syn
from henonspec.errors import TargetOutOfRange
from henonspec.thermo import PeriodicOrbit


def _fake(word, lm):
    n = len(word)
    return PeriodicOrbit(tuple(word), np.zeros((n, 2)), n, lm, 0.0, n)


def test_kappa_rules():
    assert [syn._kappa("geometric", n, 1, 2, 0, 1, 0) for n in range(4)] == [1, 2, 4, 8]
    # each block outweighs all earlier time by g (n + 1)
    k = syn._kappa("dominating", 2, 1, 2.0, 100, 5, 3)
    assert k * 5 >= 2.0 * 3 * 100 and k > 3


def test_schedule_bookkeeping():
    pool = [_fake((2,), 1.4), _fake((4, 2), 4.0)]
    s = syn.BlockSchedule(pool, [(0, 3), (1, 2)], "geometric", (1.0,))
    assert s.block_ends.tolist() == [3, 7]
    assert s.copy_ends.tolist() == [1, 2, 3, 5, 7]
    assert s.total_time == 7
    assert s.word().tolist() == [2, 2, 2, 4, 2, 4, 2]
    assert s.kappas == [3, 2]


@pytest.fixture(scope="module")
def pool(p_star, fam):
    return syn.induced_cycle(p_star, fam, (4,)), syn.induced_cycle(p_star, fam, (20,))


def test_induced_cycles_are_periodic(p_star, pool):
    from henonspec.core import eval_map
    for o in pool:
        assert o.period == sum(abs(s) for s in o.word)
        assert np.allclose(eval_map(p_star, o.points[-1]), o.points[0], atol=1e-10)
    assert pool[0].exponent < pool[1].exponent


def test_cycle_increments_sum_to_multiplier(p_star, pool):
    for o in pool:
        inc = syn.cycle_increments(p_star, o)
        assert len(inc) == o.period
        assert inc.sum() == pytest.approx(o.log_multiplier, abs=1e-9)


def test_target_orbit_converges(p_star, fam, pool):
    lo, hi = pool
    beta = 0.3 * lo.exponent + 0.7 * hi.exponent
    o = syn.synthesize_target(beta, [lo, hi], 20_000, p=p_star, fam=fam)
    rep = syn.verify_birkhoff(o)
    assert o.horizon == 20_000
    assert rep.final_error < 1e-3 and rep.converged
    assert syn.check_admissible(p_star, fam, o.word, o.decoded_depth)


def test_target_outside_the_pool_is_rejected(p_star, pool):
    with pytest.raises(TargetOutOfRange):
        syn.synthesize_target(pool[1].exponent + 0.1, list(pool), 1000, p=p_star)


def test_irregular_orbit_keeps_swinging(p_star, pool):
    lo, hi = pool
    o = syn.synthesize_irregular(lo, hi, 100_000, p=p_star)
    rep = syn.verify_birkhoff(o)
    assert rep.gap > 0.5 * (hi.exponent - lo.exponent)
    assert not rep.converged
    ks = o.schedule.kappas[:-1]          # the last block is trimmed at the horizon
    assert all(b > a for a, b in zip(ks, ks[1:]))


def test_same_cycle_has_no_gap(p_star, pool):
    o = syn.synthesize_irregular(pool[0], pool[0], 10_000, p=p_star)
    assert syn.verify_birkhoff(o).gap < 1e-9


def test_shadow_check_within_budget(p_star, fam, pool):
    o = syn.synthesize_target(0.5 * (pool[0].exponent + pool[1].exponent), list(pool), 5_000,
                              p=p_star, fam=fam)
    res = syn.shadow_check(p_star, fam, o)
    assert res["ok"] and res["difference"] <= res["budget"]


def test_deep_return_seed_distance(p_star, geo, fam):
    x, v, d = syn.deep_return_seed(p_star, geo, fam, 6)
    assert d == pytest.approx(0.5 * p_star.b ** 3)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    dr = syn.deep_return(p_star, geo, fam, 6)
    assert dr.q is not None and dr.q >= 1
    assert math.isfinite(dr.exponent_at_n_plus_q)
