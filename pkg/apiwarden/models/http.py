import re
from typing import Any, Literal, Optional, Union
from urllib.parse import quote

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic.alias_generators import to_camel

from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.schema import EndpointId

StatusExpectation = Union[int, str]

_STATUS_CLASS = re.compile(r"^[1-5]xx$")


class WireModel(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)


def status_matches(expected: Optional[StatusExpectation], status: int) -> bool:
    if expected is None:
        return True
    if isinstance(expected, int):
        return expected == status
    return str(status)[0] == expected[0]


class RequestBody(WireModel):
    media_type: str = "application/json"
    value: Any = None


class HttpAction(WireModel):
    endpoint: EndpointId
    identity: str = ANONYMOUS
    path_args: dict[str, Any] = Field(default_factory=dict)
    query: dict[str, Any] = Field(default_factory=dict)
    headers: dict[str, str] = Field(default_factory=dict)
    body: Optional[RequestBody] = None
    expected_status: Optional[StatusExpectation] = None
    max_duration_ms: Optional[float] = None
    min_duration_ms: Optional[float] = None
    origin: Optional[str] = None

    @field_validator("expected_status")
    @classmethod
    def code_or_class(cls, value: Optional[StatusExpectation]):
        if isinstance(value, str):
            value = value.lower()
            if not _STATUS_CLASS.match(value):
                raise ValueError(f"status class must look like '2xx', got {value!r}")
        elif isinstance(value, int) and not 100 <= value <= 599:
            raise ValueError(f"status code out of range: {value}")
        return value

    @model_validator(mode="after")
    def placeholders_covered(self) -> "HttpAction":
        missing = set(self.endpoint.placeholders) - set(self.path_args)
        if missing:
            raise ValueError(f"{self.endpoint}: missing path args {sorted(missing)}")
        return self

    def render_path(self) -> str:
        path = self.endpoint.path
        for name, value in self.path_args.items():
            path = path.replace("{" + name + "}", quote(str(value), safe=""))
        return path

    def describe(self) -> str:
        return f"({self.identity}) {self.endpoint.verb.value} {self.render_path()}"


class ExecutedCall(WireModel):
    action: HttpAction
    status: int = 0
    response_headers: dict[str, str] = Field(default_factory=dict)
    response_body: str = ""
    truncated: bool = False
    duration_ms: float = 0.0
    timed_out: bool = False

    @model_validator(mode="after")
    def status_in_range(self) -> "ExecutedCall":
        if self.duration_ms < 0:
            raise ValueError("duration must be non-negative")
        if not self.timed_out and not 100 <= self.status <= 599:
            raise ValueError(f"status out of range: {self.status}")
        return self

    @property
    def endpoint(self) -> EndpointId:
        return self.action.endpoint

    @property
    def identity(self) -> str:
        return self.action.identity

    def header(self, name: str) -> Optional[str]:
        lowered = name.lower()
        for key, value in self.response_headers.items():
            if key.lower() == lowered:
                return value
        return None


class Extractor(WireModel):
    kind: Literal["locationHeader", "bodyField"]
    path: Optional[str] = None

    @model_validator(mode="after")
    def body_field_has_path(self) -> "Extractor":
        if self.kind == "bodyField" and not self.path:
            raise ValueError("bodyField extractor requires a path")
        return self


class Slot(WireModel):
    kind: Literal["pathArg", "queryParam", "bodyField"]
    name: str


class Binding(WireModel):
    source_call_index: int
    extractor: Extractor
    target_call_index: int
    target_slot: Slot

    def shifted(self, offset: int) -> "Binding":
        return self.model_copy(
            update={
                "source_call_index": self.source_call_index + offset,
                "target_call_index": self.target_call_index + offset,
            }
        )


class Provenance(WireModel):
    kind: Literal["baseFuzzing", "securitySynthesis"] = "baseFuzzing"
    oracle_code: Optional[int] = None


class TestCase(WireModel):
    __test__ = False

    calls: list[HttpAction]
    bindings: list[Binding] = Field(default_factory=list)
    provenance: Provenance = Field(default_factory=Provenance)

    @model_validator(mode="after")
    def bindings_in_bounds(self) -> "TestCase":
        if not self.calls:
            raise ValueError("a test case needs at least one call")
        for binding in self.bindings:
            if not 0 <= binding.source_call_index < binding.target_call_index < len(
                self.calls
            ):
                raise ValueError(
                    f"binding {binding.source_call_index}->{binding.target_call_index}"
                    f" out of bounds for {len(self.calls)} calls"
                )
            target = self.calls[binding.target_call_index]
            slot = binding.target_slot
            if slot.kind == "pathArg" and slot.name not in target.endpoint.placeholders:
                raise ValueError(f"{target.endpoint} has no placeholder {slot.name!r}")
        return self

    def bindings_into(self, index: int) -> list[Binding]:
        return [b for b in self.bindings if b.target_call_index == index]

    def describe(self) -> str:
        return "\n".join(
            f"{call.describe()} -> {call.expected_status or '?'}" for call in self.calls
        )


class TestRun(WireModel):
    """Outcome of replaying one test case."""

    __test__ = False

    calls: list[ExecutedCall] = Field(default_factory=list)
    unbindable: bool = False
    reason: str = ""

    @property
    def statuses(self) -> list[int]:
        return [c.status for c in self.calls]

    @property
    def last(self) -> Optional[ExecutedCall]:
        return self.calls[-1] if self.calls else None
