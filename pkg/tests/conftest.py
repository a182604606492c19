import os
import tempfile

import pytest

# логи тестов не смешиваются с рабочими
os.environ.setdefault("CELLFLOW_LOG_DIR", os.path.join(tempfile.gettempdir(), "cellflow-test-logs"))

from cellflow.config import settings  # noqa: E402
from cellflow.models import ForcingParams  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="запускать долгие проверки динамики")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: долгий тест (интегрирование ОДУ в цикле)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="нужен --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def restore_settings():
    """CLI меняет глобальные settings; возвращаем значения после каждого теста"""
    saved = settings.model_dump()
    yield
    for name, value in saved.items():
        setattr(settings, name, value)


@pytest.fixture()
def symmetric_params():
    return ForcingParams(a=0.05, b=0.05)


@pytest.fixture()
def inertial_params():
    return ForcingParams(a=0.05, b=0.05, epsilon=1 / 25)
