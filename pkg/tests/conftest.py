import numpy as np
import pytest

from ruintail.model import reference_model

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(key: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[key] = (bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] {key}: {detail}")

    return record


@pytest.fixture(scope="session")
def ref_spec():
    return reference_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0].rstrip("."))):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}  ({detail})")
