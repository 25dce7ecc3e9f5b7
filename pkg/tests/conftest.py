import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# (criterion, passed, detail) appended by the acceptance suite
ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    def _record(criterion: str, passed: bool, detail: str) -> None:
        ACCEPTANCE.append((criterion, bool(passed), detail))
        print(f"ACCEPTANCE {criterion} {'PASS' if passed else 'FAIL'} {detail}")

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda x: int(x[0][1:])):
        terminalreporter.write_line(f"ACCEPTANCE {crit} {'PASS' if ok else 'FAIL'}  {detail}")
