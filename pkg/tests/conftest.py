import sys
from pathlib import Path

import pytest
from hypothesis import settings

ROOT = Path(__file__).resolve().parents[1]
ML100K = ROOT / "data" / "ml-100k"

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


def movielens_dir() -> Path:
    """MovieLens 100K directory, fetched on first use."""
    if not (ML100K / "u.data").exists() or not (ML100K / "u.item").exists():
        sys.path.insert(0, str(ROOT / "scripts"))
        from fetch_movielens import fetch

        fetch(ML100K)
    return ML100K


@pytest.fixture(scope="session")
def ml100k() -> Path:
    return movielens_dir()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
