from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tantra.metamodel import Model  # noqa: E402
from tantra.sector import data_path, load_sector_fixture  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def model() -> Model:
    return Model()


@pytest.fixture
def sector_model() -> Model:
    m = Model()
    load_sector_fixture(m)
    return m


@pytest.fixture
def schemes_csv() -> Path:
    return data_path("schemes.csv")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
