from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Callable, Optional

from fastapi import FastAPI

from apiwarden.errors import FixtureError
from apiwarden.fixtures.apps import disclosure, injection, login
from apiwarden.fixtures.apps import resources as owned
from apiwarden.models.fault import FaultCode

_PACKAGE = "apiwarden.fixtures"


@dataclass(frozen=True)
class FixtureSpec:
    name: str
    seeded_fault: Optional[FaultCode]
    app_factory: Callable[..., FastAPI]
    description: str
    auth_file: str = "static.yaml"
    options: dict[str, Any] = field(default_factory=dict)

    @property
    def schema_file(self) -> str:
        return f"{self.name.replace('-', '_')}.json"

    def schema_document(self) -> bytes:
        return resources.files(_PACKAGE).joinpath("schemas", self.schema_file).read_bytes()

    def auth_document(self) -> bytes:
        return resources.files(_PACKAGE).joinpath("auth", self.auth_file).read_bytes()

    def create_app(self, **options: Any) -> FastAPI:
        return self.app_factory(**{**self.options, **options})


def _owned(policy: owned.Policy, title: str) -> Callable[..., FastAPI]:
    def factory() -> FastAPI:
        return owned.create_app(policy, title)

    return factory


_SPECS = [
    FixtureSpec(
        "correct", None, _owned(owned.CORRECT, "correct"),
        "owner-only resources, 403 for others and for missing ids",
    ),
    FixtureSpec(
        "not-recognized-authentication", FaultCode.NOT_RECOGNIZED_AUTHENTICATION,
        _owned(owned.NOT_RECOGNIZED, "not-recognized-authentication"),
        "POST /api/resources/ rejects FOO's valid credentials with 401",
    ),
    FixtureSpec(
        "existence-leakage", FaultCode.EXISTENCE_LEAKAGE,
        _owned(owned.EXISTENCE_LEAKAGE, "existence-leakage"),
        "GET answers 403 for other users' resources but 404 for missing ones",
    ),
    FixtureSpec(
        "missed-authorization-checks", FaultCode.MISSED_AUTHORIZATION_CHECKS,
        _owned(owned.MISSED_CHECK, "missed-authorization-checks"),
        "DELETE checks ownership, PUT does not",
    ),
    FixtureSpec(
        "anonymous-modifications", FaultCode.ANONYMOUS_MODIFICATIONS,
        _owned(owned.ANONYMOUS_MODIFICATION, "anonymous-modifications"),
        "resources can be overwritten without credentials",
    ),
    FixtureSpec(
        "ignore-anonymous", FaultCode.IGNORE_ANONYMOUS,
        _owned(owned.IGNORE_ANONYMOUS, "ignore-anonymous"),
        "existing resources are readable without credentials",
    ),
    FixtureSpec(
        "leaked-stack-trace", FaultCode.LEAKED_STACK_TRACE,
        disclosure.create_stack_trace_app,
        "crashing endpoints return JVM stack traces",
    ),
    FixtureSpec(
        "hidden-accessible", FaultCode.HIDDEN_ACCESSIBLE,
        disclosure.create_hidden_app,
        "OPTIONS advertises an undeclared GET that answers 200",
    ),
    FixtureSpec(
        "sql-injection", FaultCode.SQL_INJECTION,
        injection.create_sqli_app,
        "sleep payloads in the login body delay the response",
    ),
    FixtureSpec(
        "stored-xss", FaultCode.XSS,
        injection.create_guestbook_app,
        "guestbook entries are served back unsanitized",
    ),
    FixtureSpec(
        "login", None, login.create_app,
        "bearer tokens from a form-encoded login endpoint",
        auth_file="login.yaml",
    ),
]

FIXTURES: dict[str, FixtureSpec] = {spec.name: spec for spec in _SPECS}


def get_fixture(name: str) -> FixtureSpec:
    try:
        return FIXTURES[name]
    except KeyError:
        raise FixtureError(
            f"unknown fixture {name!r}, choose one of {', '.join(FIXTURES)}"
        ) from None


def seeded_fixtures() -> list[FixtureSpec]:
    return [spec for spec in _SPECS if spec.seeded_fault is not None]
