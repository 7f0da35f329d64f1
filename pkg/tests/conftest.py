import numpy as np
import pytest

from pesabp.environment import Environment
from pesabp.geometry import AxisBox

CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    def record(name, ok, detail=""):
        CRITERIA.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


def make_env(boxes, tx=(0.5, 0.5, 2.5), rx=(14.5, 9.5, 1.5), env_id=0, room=(15.0, 10.0, 3.0)):
    return Environment(env_id, tuple(tx), tuple(rx),
                       tuple(AxisBox(c, d) for c, d in boxes), tuple(room))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
