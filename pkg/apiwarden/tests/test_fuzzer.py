import logging
import random

import pytest

from apiwarden.errors import InputGenerationError
from apiwarden.fuzzer import PATTERN_ATTEMPTS, BaseFuzzer, ValueGenerator, base_fuzz
from apiwarden.models.schema import (
    EndpointId,
    HttpVerb,
    ParamConstraints,
    ParamLocation,
    ParamSpec,
    ValueKind,
)

RESOURCE = "/api/resources/{id}"
GET_RESOURCE = EndpointId(verb=HttpVerb.GET, path=RESOURCE)
PUT_RESOURCE = EndpointId(verb=HttpVerb.PUT, path=RESOURCE)


def param(kind=ValueKind.string, location=ParamLocation.query, **constraints) -> ParamSpec:
    return ParamSpec(
        name="p",
        location=location,
        value_kind=kind,
        constraints=ParamConstraints(**constraints),
    )


def test_values_respect_length_bounds():
    values = ValueGenerator(random.Random(3))
    spec = param(min_length=2, max_length=5)

    drawn = [values.value(spec) for _ in range(20)]

    assert all(2 <= len(v) <= 5 for v in drawn)
    assert len(drawn[0]) == 2


def test_values_cycle_through_enum():
    values = ValueGenerator(random.Random(3))
    spec = param(enum=("a", "b"))

    assert [values.value(spec) for _ in range(4)] == ["a", "b", "a", "b"]


def test_values_match_pattern():
    values = ValueGenerator(random.Random(3))
    spec = param(pattern="^[a-f0-9]{4}$", min_length=4, max_length=4)

    assert all(spec.constraints.accepts(values.value(spec)) for _ in range(10))


def test_path_integers_are_positive():
    values = ValueGenerator(random.Random(3))
    spec = param(ValueKind.integer, ParamLocation.path)

    assert all(values.value(spec) >= 1 for _ in range(50))


def test_unsatisfiable_pattern_gives_up(mocker):
    values = ValueGenerator(random.Random(3))
    spy = mocker.spy(values.rng, "choice")

    with pytest.raises(InputGenerationError):
        values.value(param(pattern="^!{3}$", min_length=3, max_length=3))
    assert spy.call_count == PATTERN_ATTEMPTS * 3


def test_base_fuzz_covers_create_read_and_forbidden(harness_factory):
    harness = harness_factory("existence-leakage")

    pool = harness.fuzz()

    put = {status for status, _ in pool.statuses(PUT_RESOURCE)}
    get = {status for status, _ in pool.statuses(GET_RESOURCE)}
    assert {201, 204, 401} <= put
    assert {200, 403, 404} <= get
    assert pool.find_entry(GET_RESOURCE, 403, "FOO") is not None


def test_base_fuzz_is_deterministic(harness_factory):
    first = harness_factory("correct").fuzz(seed=11)
    second = harness_factory("correct").fuzz(seed=11)

    assert [e.test for e in first.entries] == [e.test for e in second.entries]
    assert [[c.status for c in e.calls] for e in first.entries] == [
        [c.status for c in e.calls] for e in second.entries
    ]


def test_deny_list_keeps_paths_read_only(harness_factory):
    harness = harness_factory("correct")

    pool = base_fuzz(
        harness.schema, harness.auth, harness.executor, 30.0, deny_list=["/api/*"]
    )

    assert len(pool) > 0
    assert all(e.verb == HttpVerb.GET for e in pool.endpoints)


def test_zero_budget_leaves_pool_empty(harness_factory, caplog):
    harness = harness_factory("correct")

    with caplog.at_level(logging.WARNING):
        pool = harness.fuzz(budget_seconds=0)

    assert len(pool) == 0
    assert "budget is zero" in caplog.text


def test_post_creation_is_chained_through_location(harness_factory):
    harness = harness_factory("not-recognized-authentication")
    fuzzer = BaseFuzzer(harness.schema, harness.auth, harness.executor, seed=0)

    pool = fuzzer.run(30.0)

    creation = fuzzer.creations[RESOURCE]
    assert creation.creator.verb == HttpVerb.POST
    assert creation.extractor.kind == "locationHeader"
    assert any(e.test.bindings for e in pool.entries)
