import time

import numpy as np
import pytest

from henonspec.core import MapParams

# criterion number -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict = {}
# wall-clock seconds of the expensive session computations
TIMINGS: dict = {}


def record(k: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def bif_cache():
    """First-bifurcation results keyed by b, computed once per session."""
    from henonspec.bifurcation import find_first_bifurcation
    cache = {}

    def get(b: float):
        if b not in cache:
            t0 = time.perf_counter()
            cache[b] = find_first_bifurcation(b)
            TIMINGS[("astar", b)] = time.perf_counter() - t0
        return cache[b]
    return get


@pytest.fixture(scope="session")
def bif(bif_cache):
    return bif_cache(0.01)


@pytest.fixture(scope="session")
def p_star(bif):
    return MapParams(bif.a_star, 0.01)


@pytest.fixture(scope="session")
def geo(p_star, bif):
    from henonspec.bifurcation import build_region_geometry
    return build_region_geometry(p_star, bif)


@pytest.fixture(scope="session")
def fam(p_star, geo):
    from henonspec.inducing import build_alpha_family
    return build_alpha_family(p_star, geo, 20)


@pytest.fixture(scope="session")
def rects(p_star, geo, fam):
    from henonspec.inducing import build_proper_rectangles
    return build_proper_rectangles(p_star, geo, fam, depth=3, tau_cap=20)


@pytest.fixture(scope="session")
def orbit_cache(bif_cache):
    """Periodic orbits of orders 10, 12, 14 at a*(b), keyed by b."""
    from henonspec.thermo import enumerate_periodic_orbits
    cache = {}

    def get(b: float):
        if b not in cache:
            p = MapParams(bif_cache(b).a_star, b)
            t0 = time.perf_counter()
            cache[b] = {}
            for n in (10, 12, 14):
                rep = {}
                cache[b][n] = (enumerate_periodic_orbits(p, n, report=rep), rep)
            TIMINGS[("orbits", b)] = time.perf_counter() - t0
        return cache[b]
    return get


@pytest.fixture(scope="session")
def orbit_sets(orbit_cache):
    return {n: v[0] for n, v in orbit_cache(0.01).items()}


@pytest.fixture(scope="session")
def p2():
    return MapParams(2.0, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
