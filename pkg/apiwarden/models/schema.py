import re
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PLACEHOLDER_RE = re.compile(r"\{([^{}/]+)\}")


class HttpVerb(str, Enum):
    GET = "GET"
    POST = "POST"
    PUT = "PUT"
    PATCH = "PATCH"
    DELETE = "DELETE"
    HEAD = "HEAD"
    OPTIONS = "OPTIONS"


MODIFYING_VERBS = frozenset({HttpVerb.PUT, HttpVerb.PATCH, HttpVerb.DELETE})


class EndpointId(BaseModel):
    model_config = ConfigDict(frozen=True)

    verb: HttpVerb
    path: str

    @field_validator("path")
    @classmethod
    def path_is_template(cls, path: str) -> str:
        if not path.startswith("/"):
            raise ValueError(f"path must begin with '/': {path!r}")
        names = PLACEHOLDER_RE.findall(path)
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate placeholder names in {path!r}")
        return path

    @property
    def placeholders(self) -> list[str]:
        return PLACEHOLDER_RE.findall(self.path)

    def __str__(self) -> str:
        return f"{self.verb.value} {self.path}"


class ParamLocation(str, Enum):
    path = "path"
    query = "query"
    header = "header"
    body = "body-field"


class ValueKind(str, Enum):
    string = "string"
    integer = "integer"
    number = "number"
    boolean = "boolean"
    array = "array"
    object = "object"


class ParamConstraints(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_length: Optional[int] = None
    max_length: Optional[int] = None
    enum: Optional[tuple[Any, ...]] = None
    pattern: Optional[str] = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None

    @model_validator(mode="after")
    def bounds_consistent(self) -> "ParamConstraints":
        if (
            self.min_length is not None
            and self.max_length is not None
            and self.min_length > self.max_length
        ):
            raise ValueError("minLength greater than maxLength")
        if (
            self.minimum is not None
            and self.maximum is not None
            and self.minimum > self.maximum
        ):
            raise ValueError("minimum greater than maximum")
        if self.pattern is not None:
            try:
                re.compile(self.pattern)
            except re.error as err:
                raise ValueError(f"invalid pattern {self.pattern!r}: {err}") from err
        return self

    def accepts(self, value: Any) -> bool:
        """Check a candidate value against every declared bound."""
        if self.enum is not None and value not in self.enum:
            return False
        if isinstance(value, str):
            if self.min_length is not None and len(value) < self.min_length:
                return False
            if self.max_length is not None and len(value) > self.max_length:
                return False
            # OpenAPI patterns are not implicitly anchored
            if self.pattern is not None and not re.search(self.pattern, value):
                return False
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            if self.minimum is not None and value < self.minimum:
                return False
            if self.maximum is not None and value > self.maximum:
                return False
        return True


class ParamSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    location: ParamLocation
    value_kind: ValueKind = ValueKind.string
    constraints: ParamConstraints = Field(default_factory=ParamConstraints)
    required: bool = False
    example: Any = None

    @model_validator(mode="after")
    def enum_satisfies_constraints(self) -> "ParamSpec":
        enum = self.constraints.enum
        if enum is not None:
            loose = self.constraints.model_copy(update={"enum": None})
            bad = [v for v in enum if not loose.accepts(v)]
            if bad:
                raise ValueError(
                    f"enum values {bad!r} of {self.name!r} violate its constraints"
                )
        return self


class EndpointSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: EndpointId
    parameters: tuple[ParamSpec, ...] = ()
    body_schema: Optional[dict[str, Any]] = None
    body_media_type: Optional[str] = None
    declared_responses: frozenset[str] = frozenset()

    @model_validator(mode="after")
    def placeholders_declared(self) -> "EndpointSpec":
        declared = {p.name for p in self.parameters if p.location == ParamLocation.path}
        missing = set(self.id.placeholders) - declared
        if missing:
            raise ValueError(
                f"{self.id}: placeholders without path parameter: {sorted(missing)}"
            )
        return self

    def params_in(self, location: ParamLocation) -> list[ParamSpec]:
        return [p for p in self.parameters if p.location == location]

    def param(self, location: ParamLocation, name: str) -> Optional[ParamSpec]:
        for p in self.parameters:
            if p.location == location and p.name == name:
                return p
        return None

    def declares_status(self, status: int) -> bool:
        if not self.declared_responses or "default" in self.declared_responses:
            return True
        return (
            str(status) in self.declared_responses
            or f"{str(status)[0]}XX" in {r.upper() for r in self.declared_responses}
        )


class PathNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    template: str
    children: tuple[str, ...] = ()
    endpoints: tuple[HttpVerb, ...] = ()
