import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_ns(rng, n_pr=1):
    """Random point of the non-signaling polytope: a Dirichlet mixture of all 24 vertices."""
    from bellcert.core import JointDistribution, vertex_matrix

    lam = rng.dirichlet(np.full(24, 0.5))
    p = lam @ vertex_matrix()
    return JointDistribution((p / p.sum()).reshape(2, 2, 2, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def xor3_fit():
    from bellcert.data import xor3_training_counts
    from bellcert.mle import fit_nonsignaling

    return fit_nonsignaling(xor3_training_counts())


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: s.split("criterion ")[1]):
            terminalreporter.write_line(line)
