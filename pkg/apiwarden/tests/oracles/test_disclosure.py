import json

from apiwarden.models.fault import FaultCode
from apiwarden.models.schema import EndpointId, HttpVerb
from apiwarden.oracles.disclosure import (
    find_stack_trace,
    oracle_f902,
    oracle_f903,
    tag_f100,
    tag_f101,
)
from apiwarden.payloads import compile_patterns, load_stack_trace_patterns
from apiwarden.tests.helpers import action, pooled, scenario

PATTERNS = compile_patterns(load_stack_trace_patterns())


def test_stack_trace_inside_json_strings():
    body = json.dumps({"error": {"stack": ["at com.foo.Api.get(Api.java:12)"]}})

    language, snippet = find_stack_trace(body, PATTERNS)

    assert language == "java"
    assert "Api.java:12" in snippet


def test_no_stack_trace_in_plain_error():
    assert find_stack_trace('{"detail": "Not Found"}', PATTERNS) is None


def test_f902_leaked_stack_trace(harness_factory):
    harness = harness_factory("leaked-stack-trace")

    faults = oracle_f902(harness.context(harness.fuzz()))

    assert sorted(f.endpoint.path for f in faults) == [
        "/api/resources/null-pointer-json",
        "/api/resources/null-pointer-text",
    ]
    assert all(f.code == FaultCode.LEAKED_STACK_TRACE for f in faults)
    assert all("java" in f.evidence for f in faults)


def test_f903_hidden_accessible(harness_factory):
    harness = harness_factory("hidden-accessible")

    faults = oracle_f903(harness.context(harness.fuzz()))

    assert [f.endpoint for f in faults] == [
        EndpointId(verb=HttpVerb.GET, path="/api/resources")
    ]
    calls = faults[0].reproduction.calls
    assert [c.endpoint.verb for c in calls] == [HttpVerb.OPTIONS, HttpVerb.GET]
    assert faults[0].flagged_call_index == 1
    assert calls[1].expected_status == 200


def test_f903_works_from_an_empty_pool(harness_factory):
    harness = harness_factory("hidden-accessible")
    ctx = harness.context(pooled(harness))

    assert len(oracle_f903(ctx)) == 1
    assert ctx.new_tests == 4


def test_disclosure_oracles_quiet_on_correct_api(harness_factory):
    harness = harness_factory("correct")
    ctx = harness.context(harness.fuzz())

    assert oracle_f902(ctx) == []
    assert oracle_f903(ctx) == []


def test_taggers(harness_factory):
    harness = harness_factory("leaked-stack-trace")
    pool = pooled(
        harness,
        scenario(action("GET", "/api/resources/null-pointer-json")),
    )
    ctx = harness.context(pool)

    assert [f.code for f in tag_f100(ctx)] == [FaultCode.HTTP_500]
    assert [f.code for f in tag_f101(ctx)] == [FaultCode.SCHEMA_MISMATCH]
