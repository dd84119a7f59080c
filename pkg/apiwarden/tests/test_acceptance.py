"""Full campaigns against live fixture servers."""

import json
import os
import re
import shutil
import subprocess
from pathlib import Path

import pytest
from click.testing import CliRunner

from apiwarden.auth import AuthManager, load_auth_config
from apiwarden.executor import HttpExecutor
from apiwarden.fixtures import get_fixture, seeded_fixtures, start_fixture
from apiwarden.fuzzer import base_fuzz
from apiwarden.main import ExitCode, cli
from apiwarden.oracles import run_security_phase
from apiwarden.reporter import load_plan
from apiwarden.schema import load_schema
from apiwarden.tests.helpers import settings

pytestmark = pytest.mark.acceptance

# the fixture sleeps a little longer than the oracle waits for
FIXTURE_OPTIONS = {"sql-injection": {"sleep_seconds": 1.2}}


def campaign(name: str, seed: int = 0) -> set[int]:
    spec = get_fixture(name)
    schema = load_schema(spec.schema_document(), "json", source=name)
    auth = AuthManager(load_auth_config(spec.auth_document()))
    with start_fixture(spec, **FIXTURE_OPTIONS.get(name, {})) as handle:
        with HttpExecutor(handle.base_url, auth) as executor:
            pool = base_fuzz(schema, auth, executor, 30.0, seed)
            faults, stats = run_security_phase(
                pool, schema, auth, executor, settings(seed=seed)
            )
    assert stats.total_elapsed_ms < 60_000
    return {int(f.code) for f in faults}


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("name", [s.name for s in seeded_fixtures()])
def test_each_fixture_triggers_only_its_oracle(name: str, seed: int):
    assert campaign(name, seed) == {int(get_fixture(name).seeded_fault)}


@pytest.mark.parametrize("name", ["correct", "login"])
def test_clean_fixtures_have_no_faults(name: str):
    assert campaign(name) == set()


def write_inputs(tmp_path, name: str) -> tuple[str, str]:
    spec = get_fixture(name)
    schema = tmp_path / "schema.json"
    schema.write_bytes(spec.schema_document())
    auth = tmp_path / "auth.yaml"
    auth.write_bytes(spec.auth_document())
    return str(schema), str(auth)


def fuzz_with_cli(tmp_path, name: str) -> Path:
    spec = get_fixture(name)
    schema, auth = write_inputs(tmp_path, name)
    out_dir = tmp_path / "out"
    with start_fixture(spec, **FIXTURE_OPTIONS.get(name, {})) as handle:
        result = CliRunner().invoke(
            cli,
            [
                "fuzz", "--schema", schema, "--base-url", handle.base_url,
                "--auth", auth, "--out-dir", str(out_dir), "--budget-seconds", "60",
            ],
        )
    assert result.exit_code == ExitCode.FAULTS
    return out_dir


@pytest.mark.parametrize("name", [s.name for s in seeded_fixtures()])
def test_cli_fuzz_then_replay_on_a_fresh_instance(tmp_path, name: str):
    spec = get_fixture(name)

    out_dir = fuzz_with_cli(tmp_path, name)

    report = json.loads((out_dir / "report.json").read_text())
    assert {f["code"] for f in report["faults"]} == {int(spec.seeded_fault)}
    assert (out_dir / "faults.http").exists()
    assert list(out_dir.glob(f"fault_{int(spec.seeded_fault)}_*.sh"))

    with start_fixture(spec, **FIXTURE_OPTIONS.get(name, {})) as handle:
        result = CliRunner().invoke(
            cli,
            ["replay", str(out_dir / "faults.plan.json"), "--base-url", handle.base_url],
        )
    assert result.exit_code == ExitCode.CLEAN


def expected_statuses(script: str) -> dict[int, str]:
    return {
        int(m.group(1)): m.group(2)
        for m in re.finditer(r"^expect_status (\d+) (\S+)$", script, re.MULTILINE)
    }


@pytest.mark.parametrize("name", [s.name for s in seeded_fixtures()])
def test_shell_suite_reproduces_on_a_fresh_instance(tmp_path, name: str):
    spec = get_fixture(name)
    out_dir = fuzz_with_cli(tmp_path, name)
    plan = load_plan(out_dir / "faults.plan.json")

    for planned in plan.tests:
        script = out_dir / f"{planned.name}.sh"
        assert expected_statuses(script.read_text()) == {
            index: str(call.expected_status)
            for index, call in enumerate(planned.test.calls)
            if call.expected_status is not None
        }

    if shutil.which("curl") is None or shutil.which("jq") is None:
        pytest.skip("running the shell suite needs curl and jq")
    for planned in plan.tests:
        with start_fixture(spec, **FIXTURE_OPTIONS.get(name, {})) as handle:
            completed = subprocess.run(
                ["bash", str(out_dir / f"{planned.name}.sh")],
                env={**os.environ, "BASE_URL": handle.base_url},
                capture_output=True,
                text=True,
                timeout=120,
            )
        assert completed.returncode == 0, completed.stderr
