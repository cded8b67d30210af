import numpy as np
import pytest

from bdris_isac.ao import NormalizationConstants, build_problem
from bdris_isac.geometry import ScenarioConfig, make_scenario
from bdris_isac.manifold import project_power, random_feasible
from bdris_isac.metrics import Beamformer

TINY = ScenarioConfig(n_tx=2, n_ris=4, n_sensor=3, n_users=2, n_targets=2)
DESK = ScenarioConfig(n_tx=4, n_ris=8, n_sensor=4, n_users=2, n_targets=2, weight_rho=0.8)


def random_beam(rng, n_tx, n_users, power):
    g = rng.standard_normal((n_tx, n_users + n_tx)) + 1j * rng.standard_normal((n_tx, n_users + n_tx))
    return Beamformer.from_matrix(project_power(g, power), n_users)


def random_point(scn, rng):
    cfg = scn.cfg
    return random_feasible(scn.topology, rng), random_beam(rng, cfg.n_tx, cfg.n_users, cfg.power_budget)


def cplx(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny():
    return make_scenario(TINY, 3)


@pytest.fixture
def desk():
    return make_scenario(DESK, 0)


def problem_at(scn, rho, vc=1.0, vs=1.0):
    return build_problem(scn, rho, NormalizationConstants(vc, vs))


# -- acceptance report: one line per criterion in the terminal summary --------

_ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def report():
    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
        print(_ACCEPTANCE_LINES[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[key])
