import copy

import pytest

from hystrelax.config import build_scenario, build_solver_config, load_config


def scenario_from(name, **edits):
    """Bundled preset with dotted-path edits applied, e.g. ``{"domain.n": 21}``."""
    raw = copy.deepcopy(load_config(name))
    for path, value in edits.items():
        node = raw
        *head, last = path.split(".")
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value
    return raw


@pytest.fixture(scope="session")
def budworm_raw():
    return load_config("budworm-1d")


@pytest.fixture(scope="session")
def budworm(budworm_raw):
    return build_scenario(budworm_raw)


@pytest.fixture(scope="session")
def budworm_cfg(budworm_raw):
    return build_solver_config(budworm_raw)


@pytest.fixture(scope="session")
def small_budworm():
    """Coarse budworm scenario for fast solver-level tests."""
    return build_scenario(scenario_from("budworm-1d", **{"domain.n": 21}))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
