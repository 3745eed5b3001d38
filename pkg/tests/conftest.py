import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    path = tmp_path_factory.mktemp("cache")
    old = os.environ.get("DILUTEBOSE_CACHE_DIR")
    os.environ["DILUTEBOSE_CACHE_DIR"] = str(path)
    yield path
    if old is None:
        os.environ.pop("DILUTEBOSE_CACHE_DIR", None)
    else:
        os.environ["DILUTEBOSE_CACHE_DIR"] = old


@pytest.fixture(scope="session")
def soft():
    from dilutebose.potential import Potential
    return Potential(V0=2.0, R=1.0)


@pytest.fixture(scope="session")
def params_k0():
    from dilutebose.potential import ModelParams
    return ModelParams(N=10_000, kappa=0.0)


@pytest.fixture(scope="session")
def params_k001():
    from dilutebose.potential import ModelParams
    return ModelParams(N=10_000, kappa=0.01)


@pytest.fixture(scope="session")
def sol_k0(soft, params_k0):
    from dilutebose.scattering import solve_neumann
    return solve_neumann(soft, params_k0)


@pytest.fixture(scope="session")
def sol_k001(soft, params_k001):
    from dilutebose.scattering import solve_neumann
    return solve_neumann(soft, params_k001)


@pytest.fixture(scope="session")
def table_k001(sol_k001, soft, params_k001):
    from dilutebose.coefficients import build_coefficients
    from dilutebose.lattice import build_lattice
    return build_coefficients(sol_k001, soft, params_k001, build_lattice(40 * math.pi))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
