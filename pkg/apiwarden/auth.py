import json
import logging
import threading
from pathlib import Path
from typing import Iterable, Optional, Protocol
from urllib.parse import urlsplit

import yaml
from pydantic import ValidationError

from apiwarden.errors import AuthConfigError, LoginError
from apiwarden.executor import lookup_field
from apiwarden.models.auth import (
    ANONYMOUS,
    ANONYMOUS_IDENTITY,
    AuthIdentity,
    IdentityKind,
    LoginRecipe,
    ResolvedCredential,
)
from apiwarden.models.http import ExecutedCall, HttpAction, RequestBody
from apiwarden.models.schema import EndpointId

logger = logging.getLogger(__name__)


class CallSink(Protocol):
    def execute(
        self, action: HttpAction, credentials: ResolvedCredential
    ) -> ExecutedCall: ...


def load_auth_config(document: bytes) -> list[AuthIdentity]:
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as err:
        raise AuthConfigError(f"malformed auth config: {err}") from err
    if not isinstance(data, dict) or not isinstance(data.get("auth"), list):
        raise AuthConfigError("auth config must be a mapping with an 'auth:' list")
    if not data["auth"]:
        raise AuthConfigError("at least one user required")

    identities: list[AuthIdentity] = []
    seen: set[str] = set()
    for position, entry in enumerate(data["auth"]):
        if not isinstance(entry, dict) or "name" not in entry:
            raise AuthConfigError(f"auth entry {position} has no name")
        name = str(entry["name"])
        if name in seen or name == ANONYMOUS:
            raise AuthConfigError(f"duplicate or reserved user name {name!r}")
        seen.add(name)
        if ("headers" in entry) == ("login" in entry):
            raise AuthConfigError(
                f"user {name!r} must declare exactly one of 'headers' or 'login'"
            )
        kind = IdentityKind.static_headers if "headers" in entry else IdentityKind.login_flow
        try:
            identities.append(
                AuthIdentity(
                    name=name,
                    kind=kind,
                    headers={str(k): str(v) for k, v in (entry.get("headers") or {}).items()},
                    login=entry.get("login"),
                )
            )
        except ValidationError as err:
            raise AuthConfigError(f"invalid auth entry for {name!r}: {err}") from err

    logger.info(f"Loaded {len(identities)} users from auth config")
    return identities + [ANONYMOUS_IDENTITY]


def read_auth_config(path: str) -> list[AuthIdentity]:
    try:
        return load_auth_config(Path(path).read_bytes())
    except OSError as err:
        raise AuthConfigError(f"could not read auth config {path}: {err}") from err


def login_action(recipe: LoginRecipe) -> HttpAction:
    """The HTTP call a login recipe performs, as a replayable action."""
    parts = urlsplit(recipe.endpoint)
    origin = f"{parts.scheme}://{parts.netloc}" if parts.netloc else None
    path = parts.path or "/"
    query = dict(
        pair.split("=", 1) if "=" in pair else (pair, "")
        for pair in parts.query.split("&")
        if pair
    )
    value: object = recipe.payload
    if "json" in recipe.content_type and recipe.payload:
        try:
            value = json.loads(recipe.payload)
        except json.JSONDecodeError:
            value = recipe.payload
    return HttpAction(
        endpoint=EndpointId(verb=recipe.method, path=path),
        identity=ANONYMOUS,
        query=query,
        body=RequestBody(media_type=recipe.content_type, value=value),
        expected_status="2xx",
        origin=origin,
    )


def extract_token(recipe: LoginRecipe, call: ExecutedCall) -> str:
    extractor = recipe.token
    if extractor.extract_from == "header":
        token = call.header(extractor.field)
    else:
        try:
            token = lookup_field(json.loads(call.response_body), extractor.field)
        except json.JSONDecodeError:
            token = None
    if token is None or isinstance(token, (dict, list)) or token == "":
        raise LoginError(
            f"login response has no {extractor.extract_from} field {extractor.field!r}"
        )
    return str(token)


class AuthManager:
    """Holds the configured identities and a per-identity credential cache."""

    def __init__(self, identities: Iterable[AuthIdentity]) -> None:
        self.identities = tuple(identities)
        if not any(i.is_anonymous for i in self.identities):
            self.identities += (ANONYMOUS_IDENTITY,)
        anonymous = [i for i in self.identities if i.is_anonymous]
        if len(anonymous) != 1:
            raise AuthConfigError("exactly one anonymous identity expected")
        self._by_name = {i.name: i for i in self.identities}
        if len(self._by_name) != len(self.identities):
            raise AuthConfigError("identity names must be distinct")
        self._cache: dict[str, ResolvedCredential] = {}
        self._cache_lock = threading.Lock()
        self._identity_locks = {name: threading.Lock() for name in self._by_name}

    @property
    def authenticated(self) -> list[AuthIdentity]:
        return [i for i in self.identities if not i.is_anonymous]

    @property
    def names(self) -> list[str]:
        return [i.name for i in self.identities]

    def identity(self, name: str) -> AuthIdentity:
        try:
            return self._by_name[name]
        except KeyError:
            raise AuthConfigError(f"unknown identity {name!r}") from None

    def is_anonymous(self, name: str) -> bool:
        return name == ANONYMOUS or self.identity(name).is_anonymous

    def invalidate(self) -> None:
        with self._cache_lock:
            self._cache.clear()
        logger.debug("Credential cache cleared")

    def resolve(self, identity: AuthIdentity, executor: Optional[CallSink]) -> ResolvedCredential:
        if identity.kind == IdentityKind.anonymous:
            return ResolvedCredential(identity=identity.name)
        if identity.kind == IdentityKind.static_headers:
            return ResolvedCredential(
                identity=identity.name, headers=dict(identity.static_headers)
            )

        with self._identity_locks[identity.name]:
            with self._cache_lock:
                cached = self._cache.get(identity.name)
            if cached is not None:
                return cached
            if executor is None:
                raise LoginError(f"no executor to log in {identity.name!r}")
            recipe = identity.login_flow
            call = executor.execute(login_action(recipe), ResolvedCredential(identity=ANONYMOUS))
            if call.timed_out or not 200 <= call.status < 300:
                raise LoginError(
                    f"login for {identity.name!r} failed with status {call.status}"
                )
            token = extract_token(recipe, call)
            logger.info(
                f"Obtained token for {identity.name}", extra={"credential": token}
            )
            credential = ResolvedCredential(
                identity=identity.name, headers=recipe.token.render(token)
            )
            with self._cache_lock:
                self._cache[identity.name] = credential
            return credential

    def resolve_name(self, name: str, executor: Optional[CallSink]) -> ResolvedCredential:
        return self.resolve(self.identity(name), executor)
