from pathlib import Path

import pytest

CONFIGS = Path(__file__).parent / "configs"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running branch continuations")


@pytest.fixture
def configs_dir() -> Path:
    return CONFIGS
