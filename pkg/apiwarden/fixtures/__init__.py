from apiwarden.fixtures.registry import FIXTURES, FixtureSpec, get_fixture, seeded_fixtures
from apiwarden.fixtures.server import FixtureHandle, start_fixture, stop_fixture

__all__ = [
    "FIXTURES",
    "FixtureHandle",
    "FixtureSpec",
    "get_fixture",
    "seeded_fixtures",
    "start_fixture",
    "stop_fixture",
]
