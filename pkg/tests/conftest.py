import json
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def oracles():
    return json.loads((Path(__file__).parent / "fixtures" / "oracles.json").read_text())


_GATE: list[str] = []


@pytest.fixture
def gate():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(n: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} #{n} {detail}"
        _GATE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _GATE:
        terminalreporter.section("acceptance")
        for line in sorted(_GATE, key=lambda s: int(s.split("#")[1].split()[0])):
            terminalreporter.write_line(line)
