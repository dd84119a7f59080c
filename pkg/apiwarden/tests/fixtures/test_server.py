import httpx
import pytest

from apiwarden.errors import FixtureError
from apiwarden.fixtures import (
    FIXTURES,
    get_fixture,
    seeded_fixtures,
    start_fixture,
    stop_fixture,
)
from apiwarden.models.fault import SECURITY_ORACLES
from apiwarden.schema import load_schema


def test_nine_seeded_fixtures_cover_every_oracle():
    assert sorted(s.seeded_fault for s in seeded_fixtures()) == sorted(SECURITY_ORACLES)


@pytest.mark.parametrize("name", list(FIXTURES))
def test_fixture_schema_loads(name: str):
    schema = load_schema(get_fixture(name).schema_document(), "json")

    assert schema.endpoints


def test_unknown_fixture():
    with pytest.raises(FixtureError):
        get_fixture("nope")


@pytest.mark.acceptance
def test_restart_drops_state():
    spec = get_fixture("correct")
    with start_fixture(spec) as handle:
        response = httpx.put(
            f"{handle.base_url}/api/resources/3", json={}, headers={"Authorization": "FOO"}
        )
        assert response.status_code == 201

    with start_fixture(spec) as handle:
        response = httpx.put(
            f"{handle.base_url}/api/resources/3", json={}, headers={"Authorization": "FOO"}
        )
        assert response.status_code == 201


@pytest.mark.acceptance
def test_stop_is_idempotent_and_releases_port():
    handle = start_fixture(get_fixture("hidden-accessible"))
    stop_fixture(handle)
    stop_fixture(handle)

    with pytest.raises(httpx.TransportError):
        httpx.get(f"{handle.base_url}/api/resources", timeout=1)


@pytest.mark.acceptance
def test_bind_failure():
    with start_fixture(get_fixture("correct")) as handle:
        port = int(handle.base_url.rsplit(":", 1)[1])
        with pytest.raises(FixtureError):
            start_fixture(get_fixture("correct"), port=port)
