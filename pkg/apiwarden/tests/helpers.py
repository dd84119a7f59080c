from dataclasses import dataclass
from typing import Any, Optional

from fastapi import FastAPI
from fastapi.testclient import TestClient

from apiwarden.auth import AuthManager, load_auth_config
from apiwarden.config import config
from apiwarden.corpus import TestPool
from apiwarden.executor import HttpExecutor
from apiwarden.fixtures import FixtureSpec, get_fixture
from apiwarden.fuzzer import base_fuzz
from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.fault import SecurityConfig
from apiwarden.models.http import Binding, HttpAction, RequestBody, TestCase
from apiwarden.models.schema import EndpointId, HttpVerb
from apiwarden.oracles.context import OracleContext
from apiwarden.payloads import (
    load_sqli_payloads,
    load_stack_trace_patterns,
    load_xss_payloads,
)
from apiwarden.schema import SchemaModel, load_schema

TEST_BASE_URL = "http://testserver"


@dataclass
class Harness:
    """One fixture app wired to a real executor through an in-process client."""

    spec: FixtureSpec
    app: FastAPI
    schema: SchemaModel
    auth: AuthManager
    executor: HttpExecutor

    def fuzz(self, seed: int = 0, budget_seconds: float = 30.0) -> TestPool:
        return base_fuzz(self.schema, self.auth, self.executor, budget_seconds, seed)

    def context(self, pool: TestPool, **overrides: Any) -> OracleContext:
        return OracleContext(
            pool, self.schema, self.auth, self.executor, settings(**overrides)
        )

    def close(self) -> None:
        self.executor.close()


def make_harness(name: str, **options: Any) -> Harness:
    spec = get_fixture(name)
    app = spec.create_app(**options)
    schema = load_schema(spec.schema_document(), "json", source=spec.name)
    auth = AuthManager(load_auth_config(spec.auth_document()))
    executor = HttpExecutor(TEST_BASE_URL, auth, client=TestClient(app))
    return Harness(spec, app, schema, auth, executor)


def settings(**overrides: Any) -> SecurityConfig:
    sleep = overrides.get("sqli_sleep_seconds", config.SQLI_SLEEP_SECONDS)
    defaults = {
        "sqli_payloads": load_sqli_payloads(sleep),
        "xss_payloads": load_xss_payloads(),
        "stack_trace_patterns": load_stack_trace_patterns(),
    }
    return SecurityConfig(**{**defaults, **overrides})


def action(
    verb: str,
    path: str,
    identity: str = ANONYMOUS,
    expected: Optional[Any] = None,
    body: Optional[Any] = None,
    **path_args: Any,
) -> HttpAction:
    return HttpAction(
        endpoint=EndpointId(verb=HttpVerb(verb), path=path),
        identity=identity,
        path_args=path_args,
        body=RequestBody(value=body) if body is not None else None,
        expected_status=expected,
    )


def scenario(*calls: HttpAction, bindings: tuple[Binding, ...] = ()) -> TestCase:
    return TestCase(calls=list(calls), bindings=list(bindings))


def pooled(harness: Harness, *tests: TestCase) -> TestPool:
    pool = TestPool()
    for test in tests:
        pool.add(test, harness.executor.run_test_case(test))
    return pool
