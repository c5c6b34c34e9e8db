import numpy as np
import pytest

from rkal.fem import Operators, build_mesh

# (criterion, label, passed, detail), filled by test_acceptance.py
ACCEPTANCE = []


def report(criterion, label, passed, detail=""):
    ACCEPTANCE.append((criterion, label, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, label, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        line = f"{'PASS' if passed else 'FAIL'}  criterion {crit:>2}  {label}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit2():
    mesh, spaces = build_mesh(((0.0, 1.0), (0.0, 1.0)), 2)
    return spaces, Operators(spaces)


@pytest.fixture(scope="session")
def unit3():
    mesh, spaces = build_mesh(((0.0, 1.0), (0.0, 1.0)), 3)
    return spaces, Operators(spaces)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
