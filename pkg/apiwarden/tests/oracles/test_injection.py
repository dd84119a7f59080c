from apiwarden.models.fault import FaultCode
from apiwarden.models.schema import (
    EndpointId,
    HttpVerb,
    ParamConstraints,
    ParamLocation,
    ParamSpec,
)
from apiwarden.oracles.injection import (
    contains_verbatim,
    inject,
    oracle_f200,
    oracle_f201,
)
from apiwarden.tests.helpers import action

SQLI = EndpointId(verb=HttpVerb.POST, path="/api/sqli/body/vulnerable")
GUESTBOOK = "/api/stored/json/guestbook"


def test_inject_skips_values_breaking_constraints():
    original = action("POST", "/login", body={"user": {"name": "ann"}, "pin": "12"})
    inputs = [
        ParamSpec(name="user.name", location=ParamLocation.body),
        ParamSpec(
            name="pin",
            location=ParamLocation.body,
            constraints=ParamConstraints(max_length=4),
        ),
    ]

    injected, changed = inject(original, inputs, lambda v: v + "' OR 1=1")

    assert changed == ["user.name"]
    assert injected.body.value == {"user": {"name": "ann' OR 1=1"}, "pin": "12"}
    assert original.body.value["user"]["name"] == "ann"


def test_contains_verbatim_sees_through_json_escaping():
    payload = '"><script>alert(1)</script>'

    assert contains_verbatim('[{"entry": "\\"><script>alert(1)</script>"}]', payload)
    assert not contains_verbatim("&lt;script&gt;alert(1)&lt;/script&gt;", payload)


def test_f200_time_based_sql_injection(harness_factory):
    harness = harness_factory("sql-injection", sleep_seconds=1.2)

    faults = oracle_f200(harness.context(harness.fuzz(), sqli_sleep_seconds=1.0))

    assert [f.endpoint for f in faults] == [SQLI]
    fault = faults[0]
    baseline, delayed = fault.reproduction.calls[-2:]
    assert fault.flagged_call_index == len(fault.reproduction.calls) - 1
    assert baseline.max_duration_ms == 500
    assert delayed.min_duration_ms == 1000
    assert "SLEEP(1.00)" in delayed.body.value["username"]


def test_f200_needs_the_delay(harness_factory):
    harness = harness_factory("sql-injection", sleep_enabled=False)
    ctx = harness.context(harness.fuzz())

    assert oracle_f200(ctx) == []
    assert ctx.new_tests == len(ctx.settings.sqli_payloads)


def test_f201_stored_xss(harness_factory):
    harness = harness_factory("stored-xss")

    faults = oracle_f201(harness.context(harness.fuzz()))

    assert [f.code for f in faults] == [FaultCode.XSS]
    fault = faults[0]
    assert fault.endpoint == EndpointId(verb=HttpVerb.GET, path=GUESTBOOK)
    write, read = fault.reproduction.calls[-2:]
    assert write.endpoint.verb == HttpVerb.POST
    assert write.query["entry"] == write.query["name"]
    assert read.endpoint.verb == HttpVerb.GET


def test_injection_oracles_quiet_on_correct_api(harness_factory):
    harness = harness_factory("correct")
    ctx = harness.context(harness.fuzz())

    assert oracle_f200(ctx) == []
    assert oracle_f201(ctx) == []
