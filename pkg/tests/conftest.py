import numpy as np
import pytest
from hypothesis import settings

from dimbie.geometry import RuleSpec, analytic_shape, build_global_quadrature
from dimbie.kernels import PdeKind

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")

PDES_2D = {
    "laplace": PdeKind.laplace(2),
    "helmholtz": PdeKind.helmholtz(2, 2.0),
    "elastostatic": PdeKind.elastostatic(2, 2.0, 1.0),
    "elastodynamic": PdeKind.elastodynamic(2, 2.0, 1.0, 1.0, 2.0),
}
PDES_3D = {
    "laplace": PdeKind.laplace(3),
    "helmholtz": PdeKind.helmholtz(3, 2.0),
    "elastostatic": PdeKind.elastostatic(3, 2.0, 1.0),
    "elastodynamic": PdeKind.elastodynamic(3, 2.0, 1.0, 1.0, 2.0),
}
ALL_PDES = [pytest.param(p, id=f"{k}-2d") for k, p in PDES_2D.items()] + \
           [pytest.param(p, id=f"{k}-3d") for k, p in PDES_3D.items()]


def quadrature(shape, M, p=4, **options):
    return build_global_quadrature(analytic_shape(shape, M, **options), RuleSpec(p=p))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion (slow)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
