from pathlib import Path

import pytest

GOLDEN = Path(__file__).parent / "golden"
SCENARIOS = Path(__file__).parents[1] / "src" / "gwave" / "scenarios"


def pytest_addoption(parser):
    parser.addoption("--regen-golden", action="store_true", default=False,
                     help="rewrite tests/golden from the current code instead of comparing")


@pytest.fixture
def regen_golden(request):
    return request.config.getoption("--regen-golden")
