import random

import pytest

from apiwarden.corpus import (
    AUTHENTICATED,
    PoolEntry,
    SliceSpec,
    TestPool,
    concat_and_bind,
    load_pool,
    refresh_created_ids,
    save_pool,
    slice_prefix,
    slice_solo,
)
from apiwarden.errors import CompositionError, CorpusError
from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.http import Binding, ExecutedCall, Extractor, Slot, TestRun
from apiwarden.models.schema import EndpointId, HttpVerb
from apiwarden.tests.helpers import action, scenario

RESOURCE = "/api/resources/{id}"
GET_RESOURCE = EndpointId(verb=HttpVerb.GET, path=RESOURCE)
IDENTITIES = ["FOO", "BAR", ANONYMOUS]
STATUSES = [200, 201, 204, 401, 403, 404, 500]


def location_binding(source: int, target: int) -> Binding:
    return Binding(
        source_call_index=source,
        extractor=Extractor(kind="locationHeader"),
        target_call_index=target,
        target_slot=Slot(kind="pathArg", name="id"),
    )


def random_entry(rng: random.Random) -> PoolEntry:
    size = rng.randint(1, 5)
    calls = [
        action(
            rng.choice(["GET", "PUT", "DELETE"]),
            RESOURCE,
            rng.choice(IDENTITIES),
            id=rng.randint(1, 50),
        )
        for _ in range(size)
    ]
    bindings = [
        location_binding(rng.randrange(target), target)
        for target in range(1, size)
        if rng.random() < 0.4
    ]
    test = scenario(*calls, bindings=tuple(bindings))
    executed = [
        ExecutedCall(action=c, status=rng.choice(STATUSES), duration_ms=1.0) for c in calls
    ]
    return PoolEntry(test=test, calls=executed)


def reference_prefix(entry: PoolEntry, k: int) -> list[tuple]:
    return [
        (c.endpoint, c.identity, dict(c.path_args), entry.calls[i].status)
        for i, c in enumerate(entry.test.calls[: k + 1])
    ]


def reference_bindings(entry: PoolEntry, k: int, offset: int = 0) -> list[tuple]:
    return [
        (b.source_call_index + offset, b.target_call_index + offset)
        for b in entry.test.bindings
        if b.target_call_index <= k
    ]


def shape(test) -> list[tuple]:
    return [
        (c.endpoint, c.identity, dict(c.path_args), c.expected_status) for c in test.calls
    ]


def test_slicing_and_concatenation_match_list_reference():
    rng = random.Random(7)
    for _ in range(1000):
        head_entry, tail_entry = random_entry(rng), random_entry(rng)
        k = rng.randrange(len(head_entry.calls))
        j = rng.randrange(len(tail_entry.calls))

        head = slice_prefix(SliceSpec(head_entry, k))
        tail = slice_prefix(SliceSpec(tail_entry, j))
        joined = concat_and_bind(head, tail)

        assert shape(head) == reference_prefix(head_entry, k)
        assert shape(joined) == reference_prefix(head_entry, k) + reference_prefix(
            tail_entry, j
        )
        assert [
            (b.source_call_index, b.target_call_index) for b in joined.bindings
        ] == reference_bindings(head_entry, k) + reference_bindings(
            tail_entry, j, offset=k + 1
        )


def test_slice_solo_keeps_concrete_values():
    entry = PoolEntry(
        test=scenario(
            action("POST", "/api/resources/", "BAR"),
            action("GET", RESOURCE, "BAR", id=0),
            bindings=(location_binding(0, 1),),
        ),
        calls=[
            ExecutedCall(action=action("POST", "/api/resources/", "BAR"), status=201),
            ExecutedCall(action=action("GET", RESOURCE, "BAR", id="9"), status=200),
        ],
    )

    solo = slice_solo(SliceSpec(entry, 1))

    assert len(solo.calls) == 1
    assert solo.bindings == []
    assert solo.calls[0].path_args == {"id": "9"}
    assert solo.calls[0].expected_status == 200


def test_slice_out_of_range():
    entry = random_entry(random.Random(1))

    with pytest.raises(CompositionError):
        SliceSpec(entry, len(entry.calls))


def test_concat_with_resource_binding_rebinds_tail():
    head = scenario(
        action("POST", "/api/resources/", "FOO", expected=201),
        action("DELETE", RESOURCE, "BAR", expected=403, id=0),
        bindings=(location_binding(0, 1),),
    )
    tail = scenario(action("PUT", RESOURCE, "BAR", expected="2xx", id=77))

    joined = concat_and_bind(head, tail, bind_resource=True)

    assert joined.calls[2].path_args == {"id": 0}
    assert joined.bindings[-1] == location_binding(0, 2)


def test_concat_resource_binding_needs_shared_placeholder():
    head = scenario(action("GET", "/api/things/{thing}", "FOO", thing=1))
    tail = scenario(action("PUT", RESOURCE, "FOO", id=2))

    with pytest.raises(CompositionError):
        concat_and_bind(head, tail, bind_resource=True)


def pool_of(*entries: tuple) -> TestPool:
    pool = TestPool()
    for identity, status, duration in entries:
        call = action("GET", RESOURCE, identity, id=1)
        pool.add(
            scenario(call),
            TestRun(calls=[ExecutedCall(action=call, status=status, duration_ms=duration)]),
        )
    return pool


def test_find_entry_filters():
    pool = pool_of(("FOO", 200, 3000.0), ("anonymous", 401, 1.0), ("BAR", 200, 5.0))

    assert pool.find_entry(GET_RESOURCE, "2xx").identity == "FOO"
    assert pool.find_entry(GET_RESOURCE, "2xx", duration_below=2000).identity == "BAR"
    assert pool.find_entry(GET_RESOURCE, (401, 403), AUTHENTICATED) is None
    assert pool.find_entry(GET_RESOURCE, 401, ANONYMOUS) is not None
    assert pool.find_entry(GET_RESOURCE, 500) is None


def test_find_entry_prefers_shorter_tests():
    pool = TestPool()
    long_call = action("GET", RESOURCE, "FOO", id=1)
    pool.add(
        scenario(action("PUT", RESOURCE, "FOO", id=1), long_call),
        TestRun(
            calls=[
                ExecutedCall(action=long_call, status=201),
                ExecutedCall(action=long_call, status=200),
            ]
        ),
    )
    pool.add(scenario(long_call), TestRun(calls=[ExecutedCall(action=long_call, status=200)]))

    assert len(pool.find_entry(GET_RESOURCE, 200).entry.calls) == 1


def test_incomplete_runs_are_not_pooled():
    call = action("GET", RESOURCE, "FOO", id=1)

    pool = TestPool()
    pool.add(scenario(call, call), TestRun(calls=[ExecutedCall(action=call, status=200)]))

    assert len(pool) == 0


def test_refresh_created_ids_renames_consistently():
    test = scenario(
        action("PUT", RESOURCE, "FOO", expected=201, id=12),
        action("GET", RESOURCE, "BAR", expected=403, id=12),
        action("GET", RESOURCE, "BAR", expected=404, id=13),
    )

    fresh = refresh_created_ids(test, random.Random(0))

    new_id = fresh.calls[0].path_args["id"]
    assert new_id != 12
    assert fresh.calls[1].path_args["id"] == new_id
    assert fresh.calls[2].path_args["id"] == 13


def test_corpus_round_trip(fs):
    pool = pool_of(("FOO", 200, 3.0), ("BAR", 403, 4.0))

    save_pool(pool, "corpus.json", "http://api", "schema.json", 3)
    loaded, corpus = load_pool("corpus.json")

    assert corpus.base_url == "http://api"
    assert loaded.statuses(GET_RESOURCE) == pool.statuses(GET_RESOURCE)


def test_corpus_malformed(fs):
    fs.create_file("corpus.json", contents="{}")

    with pytest.raises(CorpusError):
        load_pool("corpus.json")
