import numpy as np
import pytest

from edgeinfer.scenario import EdgeConfig, gen_geometric_scenario, make_rng


@pytest.fixture
def rng():
    return make_rng(12345)


def small_scenario(seed, num_aps=2, antennas=2, num_users=2, num_elements=0, sinr_db=0.0, **kw):
    cfg = EdgeConfig(
        num_aps=num_aps, antennas=antennas, num_users=num_users, num_elements=num_elements, sinr_db=sinr_db, **kw
    )
    return gen_geometric_scenario(cfg, make_rng(seed))


def rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def scenario_factory():
    return small_scenario


def pytest_configure(config):
    np.seterr(over="ignore")


# ------------------------------------------------------------ acceptance report

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record ``(number, title, passed, detail)`` for the end-of-session report."""

    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number} {'PASS' if passed else 'FAIL'} [{title}] {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}: {detail}")
