import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

# Filled by test_acceptance: criterion number -> (passed, detail)
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(k, passed, detail):
        ACCEPTANCE[k] = (bool(passed), detail)
        print(f"criterion {k:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

    return _record
