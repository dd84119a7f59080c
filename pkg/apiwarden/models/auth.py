from datetime import datetime, timezone
from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic.alias_generators import to_camel

from apiwarden.models.schema import HttpVerb

ANONYMOUS = "anonymous"
TOKEN_PLACEHOLDER = "{token}"


class IdentityKind(str, Enum):
    anonymous = "anonymous"
    static_headers = "staticHeaders"
    login_flow = "loginFlow"


class TokenExtractor(BaseModel):
    model_config = ConfigDict(frozen=True, alias_generator=to_camel, populate_by_name=True)

    extract_from: Literal["body", "header"] = "body"
    field: str
    header_name: str = "Authorization"
    header_template: str = "Bearer {token}"

    @field_validator("field")
    @classmethod
    def single_field(cls, field: str) -> str:
        if not field.strip() or "," in field:
            raise ValueError("token extractor must reference exactly one field")
        return field.strip()

    @field_validator("header_template")
    @classmethod
    def one_placeholder(cls, template: str) -> str:
        if template.count(TOKEN_PLACEHOLDER) != 1:
            raise ValueError(
                f"headerTemplate must contain {TOKEN_PLACEHOLDER} exactly once"
            )
        return template

    def render(self, token: str) -> dict[str, str]:
        return {self.header_name: self.header_template.replace(TOKEN_PLACEHOLDER, token)}


class LoginRecipe(BaseModel):
    model_config = ConfigDict(frozen=True, alias_generator=to_camel, populate_by_name=True)

    endpoint: str
    method: HttpVerb = HttpVerb.POST
    content_type: str = "application/json"
    payload: str = ""
    token: TokenExtractor

    @field_validator("endpoint")
    @classmethod
    def url_or_path(cls, endpoint: str) -> str:
        if not endpoint.startswith(("/", "http://", "https://")):
            raise ValueError("login endpoint must be an absolute URL or start with '/'")
        return endpoint


class AuthIdentity(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str
    kind: IdentityKind
    static_headers: dict[str, str] = Field(default_factory=dict, alias="headers")
    login_flow: Optional[LoginRecipe] = Field(default=None, alias="login")

    @model_validator(mode="after")
    def kind_matches_recipe(self) -> "AuthIdentity":
        if self.kind == IdentityKind.static_headers and not self.static_headers:
            raise ValueError(f"identity {self.name!r} declares no headers")
        if self.kind == IdentityKind.login_flow and self.login_flow is None:
            raise ValueError(f"identity {self.name!r} declares no login recipe")
        if self.kind == IdentityKind.anonymous and (
            self.static_headers or self.login_flow
        ):
            raise ValueError("the anonymous identity carries no credentials")
        return self

    @property
    def is_anonymous(self) -> bool:
        return self.kind == IdentityKind.anonymous

    def __hash__(self) -> int:
        return hash(self.name)


ANONYMOUS_IDENTITY = AuthIdentity(name=ANONYMOUS, kind=IdentityKind.anonymous)


class ResolvedCredential(BaseModel):
    model_config = ConfigDict(frozen=True)

    identity: str
    headers: dict[str, str] = Field(default_factory=dict)
    obtained_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
