import json

import pytest

from apiwarden.auth import load_auth_config
from apiwarden.corpus import TestPool
from apiwarden.errors import ReportError
from apiwarden.fixtures import get_fixture
from apiwarden.models.fault import Fault, FaultCode
from apiwarden.models.http import (
    Binding,
    ExecutedCall,
    Extractor,
    Provenance,
    Slot,
    TestRun,
)
from apiwarden.models.report import PhaseStats, TestPlan
from apiwarden.reporter import build_report, emit_suite, write_report
from apiwarden.reporter import suites
from apiwarden.tests.helpers import action, scenario

RESOURCE = "/api/resources/{id}"
BASE_URL = "http://localhost:8080"

STATIC = load_auth_config(get_fixture("correct").auth_document())
LOGIN = load_auth_config(get_fixture("login").auth_document())


def missed_check_fault() -> Fault:
    test = scenario(
        action("PUT", RESOURCE, "FOO", expected=201, body={"name": "x"}, id=42),
        action("DELETE", RESOURCE, "BAR", expected=403, id=42),
        action("PUT", RESOURCE, "BAR", expected="2xx", body={"name": "y"}, id=42),
    ).model_copy(update={"provenance": Provenance(kind="securitySynthesis", oracle_code=206)})
    return Fault(
        code=FaultCode.MISSED_AUTHORIZATION_CHECKS,
        endpoint=test.calls[2].endpoint,
        reproduction=test,
        evidence="DELETE forbidden for BAR but PUT answered 204",
        flagged_call_index=2,
    )


def leakage_fault() -> Fault:
    test = scenario(
        action("POST", "/api/resources/", "FOO", expected=201),
        action("GET", RESOURCE, "BAR", expected=403, id=0),
        action("GET", RESOURCE, "BAR", expected=404, id=99),
        bindings=(
            Binding(
                source_call_index=0,
                extractor=Extractor(kind="locationHeader"),
                target_call_index=1,
                target_slot=Slot(kind="pathArg", name="id"),
            ),
        ),
    )
    return Fault(
        code=FaultCode.EXISTENCE_LEAKAGE,
        endpoint=test.calls[1].endpoint,
        reproduction=test,
        evidence="403 for an existing resource, 404 for a missing one",
        flagged_call_index=2,
    )


def stats() -> PhaseStats:
    phase = PhaseStats()
    phase.record(206, 3, 12.5)
    phase.record(204, 1, 2.25)
    return phase


def test_report_sorts_and_counts():
    report = build_report(
        [missed_check_fault(), leakage_fault()], stats(), BASE_URL, "schema.json", 7
    )

    assert [f.code for f in report.faults] == [204, 206]
    assert report.observed_faults == 2
    assert report.phase_stats.total_elapsed_ms == pytest.approx(14.75)


def test_report_json_shape(fs):
    report = build_report([leakage_fault()], stats(), BASE_URL, "schema.json", 7)

    path = write_report(report, "out/nested/report.json")

    document = json.loads(path.read_text())
    assert document["runSeed"] == 7
    assert document["targetBaseUrl"] == BASE_URL
    assert document["generatedAt"].endswith("Z")
    fault = document["faults"][0]
    assert fault["code"] == 204
    assert fault["label"] == "Existence Leakage"
    assert fault["flaggedCallIndex"] == 2
    assert fault["endpoint"] == {"verb": "GET", "path": RESOURCE}
    assert fault["test"]["bindings"][0]["extractor"] == {"kind": "locationHeader", "path": None}
    assert "truncated" not in document["phaseStats"]


def test_report_unwritable(fs):
    fs.create_file("out")

    with pytest.raises(ReportError):
        write_report(build_report([], PhaseStats(), BASE_URL, "s", 0), "out/report.json")


def test_test_names_are_slugs():
    assert suites.test_name(missed_check_fault()) == "fault_206_put_api_resources_id"


def test_json_plan_carries_faults_and_identities():
    suite = emit_suite([leakage_fault()], None, "json-plan", BASE_URL, LOGIN)

    name, content = suite.files[0]
    plan = TestPlan.model_validate_json(content)
    assert name == suites.PLAN_FILE
    assert [i.name for i in plan.identities] == ["FOO", "BAR"]
    assert plan.tests[0].comment == "Fault204. Existence Leakage."
    assert plan.tests[0].test == leakage_fault().reproduction


def test_json_plan_with_coverage():
    call = action("GET", RESOURCE, "FOO", id=3)
    pool = TestPool()
    pool.add(scenario(call), TestRun(calls=[ExecutedCall(action=call, status=403)]))

    suite = emit_suite([], pool, "json-plan", BASE_URL, STATIC, include_coverage=True)

    plan = TestPlan.model_validate_json(suite.files[0][1])
    assert plan.tests[0].name == "coverage_0"
    assert plan.tests[0].test.calls[0].expected_status == 403


def test_shell_suite_static_headers():
    suite = emit_suite([missed_check_fault()], None, "shell", BASE_URL, STATIC)

    name, script = suite.files[0]
    assert name == "fault_206_put_api_resources_id.sh"
    assert script.startswith("#!/usr/bin/env bash\n")
    assert 'BASE_URL="${BASE_URL:-http://localhost:8080}"' in script
    assert "-H 'Authorization: BAR'" in script
    assert "--data-raw '{\"name\": \"y\"}'" in script
    assert "expect_status 1 403" in script
    assert "expect_status 2 2xx" in script
    assert "# Fault206. Missed Authorization Checks." in script
    assert script.rstrip().endswith("exit $(( failures > 0 ))")


def test_shell_suite_binds_location_and_logs_in():
    suite = emit_suite([leakage_fault()], None, "shell", BASE_URL, LOGIN)

    script = suite.files[0][1]
    assert "bound_1_id=$(location_id 0)" in script
    assert '"$BASE_URL/api/resources/${bound_1_id}"' in script
    assert "# log in as FOO" in script
    assert "jq -r 'getpath([\"access_token\"])'" in script
    assert '-H "Authorization: Bearer ${token_BAR}"' in script


def test_httpfile_suite():
    suite = emit_suite(
        [leakage_fault(), missed_check_fault()], None, "httpfile", BASE_URL, LOGIN
    )

    name, text = suite.files[0]
    assert name == suites.HTTPFILE_FILE
    assert text.startswith(f"@baseUrl = {BASE_URL}\n")
    prefix = "fault_204_get_api_resources_id"
    assert f"# @name {prefix}_login_BAR" in text
    assert f"GET {{{{baseUrl}}}}/api/resources/{{{{{prefix}_0.response.headers.Location}}}}" in text
    assert (
        f"Authorization: Bearer {{{{{prefix}_login_BAR.response.body.$.access_token}}}}"
        in text
    )
    assert "# expect status 404" in text
    assert text.count("# Fault") == 2


def test_written_suite_files(tmp_path):
    suite = emit_suite([missed_check_fault()], None, "shell", BASE_URL, STATIC)

    paths = suite.write(tmp_path / "suites")

    assert [p.name for p in paths] == ["fault_206_put_api_resources_id.sh"]
    assert paths[0].read_text() == suite.files[0][1]
