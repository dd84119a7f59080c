import json
import logging
import re
from pathlib import Path
from typing import Any, Iterable, Literal, Optional

import httpx
import yaml
from pydantic import BaseModel, ConfigDict, PrivateAttr, ValidationError

from apiwarden.errors import EndpointNotFoundError, SchemaError, UnsupportedVersionError
from apiwarden.models.schema import (
    EndpointId,
    EndpointSpec,
    HttpVerb,
    ParamConstraints,
    ParamLocation,
    ParamSpec,
    PathNode,
    ValueKind,
)

logger = logging.getLogger(__name__)

SchemaFormat = Literal["json", "yaml"]

_VERB_KEYS = {v.value.lower(): v for v in HttpVerb}
_SEGMENT_PLACEHOLDER = re.compile(r"\{[^{}/]+\}")
_BODY_MEDIA_TYPES = ("application/json", "application/x-www-form-urlencoded")
_MAX_BODY_DEPTH = 3
_EXCLUDED_FROM_HIDDEN = {HttpVerb.OPTIONS, HttpVerb.HEAD}


def _segments(path: str) -> list[str]:
    return [] if path == "/" else path.split("/")[1:]


def _shape(segment: str) -> str:
    return _SEGMENT_PLACEHOLDER.sub("{}", segment)


def _same_shape(a: list[str], b: list[str]) -> bool:
    return len(a) == len(b) and all(_shape(x) == _shape(y) for x, y in zip(a, b))


class SchemaModel(BaseModel):
    """Immutable view over the endpoints declared by an OpenAPI v3 document."""

    model_config = ConfigDict(frozen=True)

    source: str = ""
    title: str = ""
    endpoints: tuple[EndpointSpec, ...] = ()
    warnings: tuple[str, ...] = ()

    _by_id: dict[EndpointId, EndpointSpec] = PrivateAttr(default_factory=dict)
    _paths: list[str] = PrivateAttr(default_factory=list)
    _nodes: dict[str, PathNode] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        verbs_by_path: dict[str, list[HttpVerb]] = {}
        for spec in self.endpoints:
            self._by_id[spec.id] = spec
            verbs_by_path.setdefault(spec.id.path, []).append(spec.id.verb)
        self._paths = list(verbs_by_path)

        children: dict[str, list[str]] = {p: [] for p in self._paths}
        for path in self._paths:
            parent = self._nearest_declared_ancestor(path)
            if parent is not None:
                children[parent].append(path)
        self._nodes = {
            p: PathNode(
                template=p,
                children=tuple(children[p]),
                endpoints=tuple(verbs_by_path[p]),
            )
            for p in self._paths
        }

    @property
    def paths(self) -> list[str]:
        return list(self._paths)

    @property
    def path_nodes(self) -> dict[str, PathNode]:
        return dict(self._nodes)

    def endpoint(self, endpoint_id: EndpointId) -> EndpointSpec:
        try:
            return self._by_id[endpoint_id]
        except KeyError:
            raise EndpointNotFoundError(f"{endpoint_id} is not declared") from None

    def has_endpoint(self, endpoint_id: EndpointId) -> bool:
        return endpoint_id in self._by_id

    def verbs_at(self, path: str) -> list[HttpVerb]:
        node = self._nodes.get(path)
        return list(node.endpoints) if node else []

    def _ancestor_templates(self, path: str) -> list[str]:
        """Declared templates structurally above `path`, root first."""
        segs = _segments(path)
        found = []
        for k in range(len(segs)):
            prefix = segs[:k]
            for declared in self._paths:
                if _same_shape(_segments(declared), prefix):
                    found.append(declared)
                    break
        return found

    def _nearest_declared_ancestor(self, path: str) -> Optional[str]:
        ancestors = self._ancestor_templates(path)
        return ancestors[-1] if ancestors else None

    def top_get_ancestor(self, path: str) -> Optional[EndpointId]:
        if path not in self._nodes:
            raise EndpointNotFoundError(f"path {path} is not declared")
        for ancestor in self._ancestor_templates(path):
            if HttpVerb.GET in self._nodes[ancestor].endpoints:
                return EndpointId(verb=HttpVerb.GET, path=ancestor)
        return None

    def undeclared_verbs(self, path: str, allow: Iterable[str]) -> list[HttpVerb]:
        declared = set(self.verbs_at(path))
        hidden: list[HttpVerb] = []
        for token in allow:
            token = token.strip().upper()
            if not token:
                continue
            try:
                verb = HttpVerb(token)
            except ValueError:
                logger.debug(f"Ignoring unsupported verb {token!r} in Allow header")
                continue
            if verb in declared or verb in _EXCLUDED_FROM_HIDDEN or verb in hidden:
                continue
            hidden.append(verb)
        return hidden


def parse_allow_header(value: Optional[str]) -> list[str]:
    if not value:
        return []
    return [token.strip() for token in value.split(",") if token.strip()]


class _Loader:
    def __init__(self, root: dict[str, Any]) -> None:
        self.root = root
        self.warnings: list[str] = []

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)

    def lookup(self, ref: str) -> Any:
        if not ref.startswith("#/"):
            raise SchemaError(f"external $ref not supported: {ref}", ref)
        node: Any = self.root
        for token in ref[2:].split("/"):
            token = token.replace("~1", "/").replace("~0", "~")
            if not isinstance(node, dict) or token not in node:
                raise SchemaError(f"unresolvable $ref {ref}", ref)
            node = node[token]
        return node

    def shallow(self, node: Any) -> Any:
        seen = set()
        while isinstance(node, dict) and "$ref" in node:
            ref = node["$ref"]
            if ref in seen:
                raise SchemaError(f"circular $ref {ref}", ref)
            seen.add(ref)
            node = self.lookup(ref)
        return node

    def deep(self, node: Any, stack: tuple[str, ...] = ()) -> Any:
        if isinstance(node, dict):
            if "$ref" in node:
                ref = node["$ref"]
                if ref in stack:
                    self.warn(f"recursive schema {ref} truncated")
                    return {}
                return self.deep(self.lookup(ref), stack + (ref,))
            return {k: self.deep(v, stack) for k, v in node.items()}
        if isinstance(node, list):
            return [self.deep(v, stack) for v in node]
        return node

    def pick_alternative(self, schema: dict[str, Any], where: str) -> dict[str, Any]:
        for key in ("oneOf", "anyOf"):
            options = schema.get(key)
            if options:
                self.warn(f"{where}: {key} body, generating from first alternative")
                merged = {k: v for k, v in schema.items() if k != key}
                merged.update(options[0])
                return self.pick_alternative(merged, where)
        return schema

    def value_kind(self, schema: dict[str, Any]) -> ValueKind:
        kind = schema.get("type")
        if isinstance(kind, list):
            kind = next((k for k in kind if k != "null"), "string")
        if kind is None:
            if "properties" in schema:
                kind = "object"
            elif "items" in schema:
                kind = "array"
            else:
                kind = "string"
        try:
            return ValueKind(kind)
        except ValueError:
            return ValueKind.string

    def constraints(self, schema: dict[str, Any], where: str) -> ParamConstraints:
        raw = {
            "min_length": schema.get("minLength"),
            "max_length": schema.get("maxLength"),
            "enum": tuple(schema["enum"]) if schema.get("enum") else None,
            "pattern": schema.get("pattern"),
            "minimum": schema.get("minimum"),
            "maximum": schema.get("maximum"),
        }
        try:
            return ParamConstraints(**raw)
        except ValidationError as err:
            self.warn(f"{where}: inconsistent constraints dropped ({err.errors()[0]['msg']})")
            return ParamConstraints()

    def param_spec(
        self,
        name: str,
        location: ParamLocation,
        schema: dict[str, Any],
        required: bool,
        where: str,
    ) -> ParamSpec:
        schema = self.pick_alternative(self.deep(schema), where)
        fields = dict(
            name=name,
            location=location,
            value_kind=self.value_kind(schema),
            required=required,
            example=schema.get("example", schema.get("default")),
        )
        try:
            return ParamSpec(constraints=self.constraints(schema, where), **fields)
        except ValidationError as err:
            self.warn(f"{where}: {err.errors()[0]['msg']}, constraints dropped")
            return ParamSpec(**fields)

    def body_fields(
        self, schema: dict[str, Any], where: str, prefix: str = "", depth: int = 0
    ) -> list[ParamSpec]:
        schema = self.pick_alternative(schema, where)
        required = set(schema.get("required", []))
        specs = []
        for name, prop in (schema.get("properties") or {}).items():
            prop = self.pick_alternative(prop, where)
            dotted = f"{prefix}{name}"
            if self.value_kind(prop) == ValueKind.object and depth < _MAX_BODY_DEPTH:
                specs.extend(self.body_fields(prop, where, f"{dotted}.", depth + 1))
                continue
            specs.append(
                self.param_spec(
                    dotted, ParamLocation.body, prop, name in required, where
                )
            )
        return specs

    def endpoint(
        self,
        path: str,
        verb: HttpVerb,
        operation: dict[str, Any],
        shared_params: list[Any],
    ) -> EndpointSpec:
        where = f"{verb.value} {path}"
        pointer = f"$.paths.{path}.{verb.value.lower()}.parameters"
        params: dict[tuple[str, str], ParamSpec] = {}
        for raw in list(shared_params) + list(operation.get("parameters") or []):
            raw = self.shallow(raw)
            if not isinstance(raw, dict):
                raise SchemaError("parameter must be a mapping", pointer)
            location = raw.get("in")
            if location == "cookie":
                self.warn(f"{where}: cookie parameter {raw.get('name')!r} ignored")
                continue
            if location not in ("path", "query", "header"):
                self.warn(f"{where}: unsupported parameter location {location!r}")
                continue
            name = raw.get("name")
            if not isinstance(name, str) or not name:
                raise SchemaError(f"{location} parameter without a name", pointer)
            spec = self.param_spec(
                name,
                ParamLocation(location),
                raw.get("schema") or {},
                bool(raw.get("required")) or location == "path",
                where,
            )
            params[(location, name)] = spec

        for name in EndpointId(verb=verb, path=path).placeholders:
            if ("path", name) not in params:
                self.warn(f"{where}: placeholder {{{name}}} undeclared, assuming string")
                params[("path", name)] = ParamSpec(
                    name=name, location=ParamLocation.path, required=True
                )

        body_schema = None
        media_type = None
        request_body = operation.get("requestBody")
        if request_body:
            content = self.shallow(request_body).get("content") or {}
            media_type = next((m for m in _BODY_MEDIA_TYPES if m in content), None)
            if media_type is None:
                if content:
                    self.warn(
                        f"{where}: request body media types {sorted(content)} unhandled"
                    )
            else:
                body_schema = self.pick_alternative(
                    self.deep(content[media_type].get("schema") or {}), where
                )
                for spec in self.body_fields(body_schema, where):
                    params[("body", spec.name)] = spec

        return EndpointSpec(
            id=EndpointId(verb=verb, path=path),
            parameters=tuple(params.values()),
            body_schema=body_schema,
            body_media_type=media_type,
            declared_responses=frozenset(
                str(code) for code in (operation.get("responses") or {})
            ),
        )


def _parse_document(document: bytes, fmt: SchemaFormat) -> Any:
    try:
        text = document.decode("utf-8-sig") if isinstance(document, bytes) else document
    except UnicodeDecodeError as err:
        raise SchemaError("document is not valid UTF-8", f"byte {err.start}") from err
    if fmt == "json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise SchemaError(
                f"malformed JSON: {err.msg}", f"line {err.lineno} column {err.colno}"
            ) from err
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as err:
        mark = getattr(err, "problem_mark", None)
        location = f"line {mark.line + 1} column {mark.column + 1}" if mark else ""
        raise SchemaError(f"malformed YAML: {err}", location) from err


def load_schema(
    document: bytes, fmt: SchemaFormat = "json", source: str = ""
) -> SchemaModel:
    root = _parse_document(document, fmt)
    if not isinstance(root, dict):
        raise SchemaError("document root must be a mapping", "$")
    if "swagger" in root:
        raise UnsupportedVersionError(
            f"Swagger {root['swagger']} documents are not supported", "$.swagger"
        )
    version = str(root.get("openapi", ""))
    if not version.startswith("3"):
        raise UnsupportedVersionError(
            f"unsupported OpenAPI version {version or 'missing'}", "$.openapi"
        )

    loader = _Loader(root)
    endpoints: list[EndpointSpec] = []
    paths = root.get("paths") or {}
    if not isinstance(paths, dict):
        raise SchemaError("paths must be a mapping", "$.paths")
    if not paths:
        loader.warn("empty schema")
    for path, item in paths.items():
        item = loader.shallow(item) or {}
        if not isinstance(item, dict):
            raise SchemaError("path item must be a mapping", f"$.paths.{path}")
        shared = item.get("parameters") or []
        for key, operation in item.items():
            verb = _VERB_KEYS.get(str(key).lower())
            if verb is None:
                continue
            if operation is not None and not isinstance(operation, dict):
                raise SchemaError("operation must be a mapping", f"$.paths.{path}.{key}")
            try:
                endpoints.append(loader.endpoint(path, verb, operation or {}, shared))
            except ValidationError as err:
                raise SchemaError(
                    f"invalid endpoint: {err.errors()[0]['msg']}",
                    f"$.paths.{path}.{key}",
                ) from err

    logger.info(f"Loaded schema with {len(endpoints)} endpoints")
    return SchemaModel(
        source=source,
        title=str((root.get("info") or {}).get("title", "")),
        endpoints=tuple(endpoints),
        warnings=tuple(loader.warnings),
    )


def detect_format(name: str, document: bytes) -> SchemaFormat:
    if name.lower().endswith((".yaml", ".yml")):
        return "yaml"
    if name.lower().endswith(".json"):
        return "json"
    return "json" if document.lstrip()[:1] in (b"{", b"[") else "yaml"


def read_schema_source(source: str, timeout: float = 10.0) -> SchemaModel:
    """Load a schema from a local file path or an HTTP(S) URL."""
    if source.startswith(("http://", "https://")):
        logger.debug(f"Fetching schema from {source}")
        try:
            response = httpx.get(source, timeout=timeout, follow_redirects=True)
            response.raise_for_status()
        except httpx.HTTPError as err:
            raise SchemaError(f"could not fetch schema: {err}", source) from err
        document = response.content
    else:
        try:
            document = Path(source).read_bytes()
        except OSError as err:
            raise SchemaError(f"could not read schema: {err}", source) from err
    return load_schema(document, detect_format(source, document), source=source)
