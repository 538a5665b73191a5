import pytest

import rwpattern as rw


@pytest.fixture(scope="session")
def gauss_run():
    """Canonical seeded run shared by the detection and measurement tests.

    eps=20, mu=2 develops a clear cascade well inside t_max=15 on the
    default auto-sized grid (length 80, nx 1024, dt 1e-3).
    """
    return rw.simulate_gaussian(eps=20, mu=2, t_max=15)
