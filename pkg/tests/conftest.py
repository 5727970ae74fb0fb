import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from henonlab import from_classical_henon, make_map


@pytest.fixture(scope="session")
def henon_classic():
    """The classical quadratic map at (1.4, 0.3), elementary form."""
    return from_classical_henon(1.4, 0.3)


@pytest.fixture(scope="session")
def horseshoe():
    return from_classical_henon(5.0, 0.3)


@pytest.fixture(scope="session")
def solenoid():
    """p(y) = y^2, delta = 0.05: a small perturbation of angle doubling."""
    return make_map([([0, 0, 1.0], 0.05)])


@pytest.fixture(scope="session")
def classic_orbits(henon_classic):
    from henonlab import find_periodic_orbits
    return find_periodic_orbits(henon_classic.map, 1)


@pytest.fixture(scope="session")
def classic_saddle(classic_orbits):
    """The fixed saddle at x* = 0.6313544..., elementary coordinates."""
    return max(classic_orbits, key=lambda o: o.points[0].x.real)
