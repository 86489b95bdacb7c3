import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(k, name, ok, detail)`` then assert."""

    def record(k, name, ok, detail=""):
        _ACCEPTANCE.append((k, name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {k}: {name} {detail}")
        assert ok, f"criterion {k} ({name}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, name, ok, detail in sorted(_ACCEPTANCE, key=lambda r: (r[0], r[1])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:>2}. {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
