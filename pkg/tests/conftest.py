import numpy as np
import pytest

# criterion number -> (label, passed); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def record(number: int, label: str, passed: bool, detail: str = ""):
    ACCEPTANCE[number] = (label, bool(passed), detail)
    line = f"acceptance {number:2d} {label}: {'PASS' if passed else 'FAIL'}"
    print(line + (f"  ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        label, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {label}: {'PASS' if ok else 'FAIL'}"
                                    + (f"  ({detail})" if detail else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
