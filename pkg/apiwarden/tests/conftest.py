import logging
import os
from typing import AsyncGenerator, Callable, Generator

import pytest
from httpx import AsyncClient

os.environ["ENV_STATE"] = "test"
from apiwarden.fixtures import get_fixture  # noqa: E402
from apiwarden.tests.helpers import TEST_BASE_URL, Harness, make_harness  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: starts real fixture servers")


@pytest.fixture(autouse=True)
def propagate_logs():
    # the CLI config stops propagation, caplog listens on the root logger
    logging.getLogger("apiwarden").propagate = True
    yield


@pytest.fixture(scope="session")
def anyio_backend():
    return "asyncio"


@pytest.fixture()
def harness_factory() -> Generator[Callable[..., Harness], None, None]:
    opened: list[Harness] = []

    def factory(name: str, **options) -> Harness:
        harness = make_harness(name, **options)
        opened.append(harness)
        return harness

    yield factory
    for harness in opened:
        harness.close()


@pytest.fixture()
def fixture_client() -> Callable[..., AsyncClient]:
    def client(name: str, **options) -> AsyncClient:
        app = get_fixture(name).create_app(**options)
        return AsyncClient(app=app, base_url=TEST_BASE_URL)

    return client


@pytest.fixture()
async def correct_client(fixture_client) -> AsyncGenerator:
    async with fixture_client("correct") as ac:
        yield ac
