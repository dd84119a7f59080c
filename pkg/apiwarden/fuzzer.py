import fnmatch
import json
import logging
import random
import re
import string
import time
from dataclasses import dataclass
from typing import Any, Iterable, Optional

from apiwarden.auth import AuthManager
from apiwarden.config import config
from apiwarden.corpus import TestPool
from apiwarden.errors import InputGenerationError
from apiwarden.executor import HttpExecutor, assign_field
from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.http import (
    Binding,
    ExecutedCall,
    Extractor,
    HttpAction,
    RequestBody,
    Slot,
    TestCase,
)
from apiwarden.models.schema import (
    MODIFYING_VERBS,
    EndpointId,
    EndpointSpec,
    HttpVerb,
    ParamLocation,
    ParamSpec,
    ValueKind,
)
from apiwarden.schema import SchemaModel

logger = logging.getLogger(__name__)

PATTERN_ATTEMPTS = 100
_RESERVED_HEADERS = {"authorization", "content-type", "accept", "content-length"}
_VERB_ORDER = [
    HttpVerb.POST,
    HttpVerb.PUT,
    HttpVerb.GET,
    HttpVerb.HEAD,
    HttpVerb.PATCH,
    HttpVerb.DELETE,
    HttpVerb.OPTIONS,
]
_ALPHABETS = (
    string.ascii_lowercase,
    string.ascii_uppercase,
    string.digits,
    string.ascii_letters + string.digits,
    string.hexdigits.lower(),
    string.ascii_lowercase + "-_",
)
_LAST_PLACEHOLDER = re.compile(r"/\{([^{}/]+)\}$")


class ValueGenerator:
    """Draws parameter values that respect the declared constraints."""

    def __init__(self, rng: random.Random) -> None:
        self.rng = rng
        self._turns: dict[str, int] = {}

    def _turn(self, key: str) -> int:
        turn = self._turns.get(key, 0)
        self._turns[key] = turn + 1
        return turn

    def _string(self, spec: ParamSpec, turn: int) -> str:
        c = spec.constraints
        low = c.min_length if c.min_length is not None else 1
        high = c.max_length if c.max_length is not None else max(low, 12)
        # alternate boundary lengths with random ones
        lengths = [low, high] if turn % 3 != 2 else []
        for attempt in range(PATTERN_ATTEMPTS):
            length = lengths[attempt] if attempt < len(lengths) else self.rng.randint(low, high)
            alphabet = _ALPHABETS[(turn + attempt) % len(_ALPHABETS)]
            candidate = "".join(self.rng.choice(alphabet) for _ in range(length))
            if c.pattern is None or c.accepts(candidate):
                return candidate
        raise InputGenerationError(
            f"no value for {spec.name!r} matches pattern {c.pattern!r} "
            f"after {PATTERN_ATTEMPTS} attempts"
        )

    def _number(self, spec: ParamSpec, turn: int, integral: bool) -> Any:
        c = spec.constraints
        if spec.location == ParamLocation.path:
            low, high = 1, 999_999
        else:
            low, high = 0, 1000
        low = c.minimum if c.minimum is not None else low
        high = c.maximum if c.maximum is not None else high
        if integral:
            low, high = int(low), int(high)
            if spec.location != ParamLocation.path and turn % 3 == 0:
                return low
            return self.rng.randint(low, high)
        return round(self.rng.uniform(low, high), 3)

    def value(self, spec: ParamSpec, key: str = "") -> Any:
        turn = self._turn(key or spec.name)
        c = spec.constraints
        if c.enum:
            return c.enum[turn % len(c.enum)]
        if turn == 0 and spec.example is not None and c.accepts(spec.example):
            return spec.example
        if spec.value_kind == ValueKind.string:
            return self._string(spec, turn)
        if spec.value_kind == ValueKind.integer:
            return self._number(spec, turn, integral=True)
        if spec.value_kind == ValueKind.number:
            return self._number(spec, turn, integral=False)
        if spec.value_kind == ValueKind.boolean:
            return self.rng.random() < 0.5
        if spec.value_kind == ValueKind.array:
            return []
        return {}

    def action(
        self, spec: EndpointSpec, identity: str, path_args: Optional[dict] = None
    ) -> HttpAction:
        key = str(spec.id)
        args = dict(path_args or {})
        for param in spec.params_in(ParamLocation.path):
            if param.name not in args:
                args[param.name] = self.value(param, f"{key}:path:{param.name}")
        query = {
            p.name: self.value(p, f"{key}:query:{p.name}")
            for p in spec.params_in(ParamLocation.query)
            if p.required or self.rng.random() < 0.5
        }
        headers = {
            p.name: str(self.value(p, f"{key}:header:{p.name}"))
            for p in spec.params_in(ParamLocation.header)
            if p.name.lower() not in _RESERVED_HEADERS
            and (p.required or self.rng.random() < 0.5)
        }
        body = None
        if spec.body_media_type is not None:
            value: dict[str, Any] = {}
            for p in spec.params_in(ParamLocation.body):
                if p.required or self.rng.random() < 0.7:
                    assign_field(value, p.name, self.value(p, f"{key}:body:{p.name}"))
            body = RequestBody(media_type=spec.body_media_type, value=value)
        return HttpAction(
            endpoint=spec.id,
            identity=identity,
            path_args=args,
            query=query,
            headers=headers,
            body=body,
        )


@dataclass(frozen=True)
class Creation:
    """How a resource under a path template gets created."""

    creator: EndpointId
    placeholder: str
    extractor: Optional[Extractor] = None


def _collection_of(path: str) -> Optional[tuple[str, str]]:
    match = _LAST_PLACEHOLDER.search(path)
    if match is None:
        return None
    collection = path[: match.start()] or "/"
    return collection, match.group(1)


def _creation_extractor(call: ExecutedCall, placeholder: str) -> Optional[Extractor]:
    if call.header("location"):
        return Extractor(kind="locationHeader")
    try:
        document = json.loads(call.response_body)
    except json.JSONDecodeError:
        return None
    if isinstance(document, dict):
        for name in (placeholder, "id"):
            if isinstance(document.get(name), (str, int)):
                return Extractor(kind="bodyField", path=name)
    return None


class BaseFuzzer:
    """Flat random fuzzing with creation chaining, seeded for repeatability."""

    def __init__(
        self,
        schema: SchemaModel,
        auth: AuthManager,
        executor: HttpExecutor,
        seed: int = 0,
        max_rounds: int = config.FUZZ_MAX_ROUNDS,
        deny_list: Iterable[str] = (),
    ) -> None:
        self.schema = schema
        self.auth = auth
        self.executor = executor
        self.rng = random.Random(seed)
        self.values = ValueGenerator(self.rng)
        self.max_rounds = max_rounds
        self.deny_list = tuple(deny_list)
        self.creations: dict[str, Creation] = {}
        self.pool = TestPool()

    def _ordered_endpoints(self) -> list[EndpointSpec]:
        specs = []
        for spec in self.schema.endpoints:
            if spec.id.verb in MODIFYING_VERBS and any(
                fnmatch.fnmatch(spec.id.path, pattern) for pattern in self.deny_list
            ):
                logger.info(f"Not mutating {spec.id}: path is deny-listed")
                continue
            specs.append(spec)
        return sorted(
            specs, key=lambda s: (s.id.path.count("/"), _VERB_ORDER.index(s.id.verb), s.id.path)
        )

    def _learn(self, run_calls: list[ExecutedCall]) -> None:
        for call in run_calls:
            verb, path = call.endpoint.verb, call.endpoint.path
            if not 200 <= call.status < 300:
                continue
            if verb == HttpVerb.PUT and call.status == 201:
                collection = _collection_of(path)
                if collection and path not in self.creations:
                    self.creations[path] = Creation(call.endpoint, collection[1])
                    logger.debug(f"{path} resources are created by PUT")
            if verb != HttpVerb.POST:
                continue
            for declared in self.schema.paths:
                collection = _collection_of(declared)
                if collection is None or collection[0].rstrip("/") != path.rstrip("/"):
                    continue
                current = self.creations.get(declared)
                if current is not None and current.creator.verb == HttpVerb.POST:
                    continue
                extractor = _creation_extractor(call, collection[1])
                if extractor is not None:
                    self.creations[declared] = Creation(call.endpoint, collection[1], extractor)
                    logger.debug(f"{declared} resources are created by POST {path}")

    def _chained(self, spec: EndpointSpec, target: str, creator: str) -> Optional[TestCase]:
        creation = self.creations.get(spec.id.path)
        if creation is None:
            return None
        creator_spec = self.schema.endpoint(creation.creator)
        if creation.extractor is None:
            first = self.values.action(creator_spec, creator)
            second = self.values.action(spec, target, path_args=dict(first.path_args))
            return TestCase(calls=[first, second])
        first = self.values.action(creator_spec, creator)
        inherited = {
            k: v for k, v in first.path_args.items() if k in spec.id.placeholders
        }
        second = self.values.action(spec, target, path_args=inherited)
        binding = Binding(
            source_call_index=0,
            extractor=creation.extractor,
            target_call_index=1,
            target_slot=Slot(kind="pathArg", name=creation.placeholder),
        )
        return TestCase(calls=[first, second], bindings=[binding])

    def _run(self, test: TestCase) -> None:
        run = self.executor.run_test_case(test)
        self.pool.add(test, run)
        self._learn(run.calls)

    def run(self, budget_seconds: float) -> TestPool:
        if budget_seconds <= 0:
            logger.warning("Fuzzing budget is zero, the pool stays empty")
            return self.pool
        deadline = time.monotonic() + budget_seconds
        authenticated = [i.name for i in self.auth.authenticated]
        identities = authenticated + [ANONYMOUS]
        specs = self._ordered_endpoints()
        logger.info(
            f"Fuzzing {len(specs)} endpoints as {len(identities)} identities "
            f"for up to {self.max_rounds} rounds"
        )
        for round_index in range(self.max_rounds):
            for spec in specs:
                for position, identity in enumerate(identities):
                    if time.monotonic() >= deadline:
                        logger.info(f"Budget spent during round {round_index}")
                        return self.pool
                    try:
                        self._run(TestCase(calls=[self.values.action(spec, identity)]))
                        if authenticated and spec.id.placeholders:
                            creator = authenticated[
                                (position + round_index) % len(authenticated)
                            ]
                            chained = self._chained(spec, identity, creator)
                            if chained is not None:
                                self._run(chained)
                    except InputGenerationError as err:
                        logger.warning(f"Cannot generate input for {spec.id}: {err}")
                        raise
        logger.info(f"Base fuzzing produced {len(self.pool)} test cases")
        return self.pool


def base_fuzz(
    schema: SchemaModel,
    auth: AuthManager,
    executor: HttpExecutor,
    budget_seconds: float,
    seed: int = 0,
    max_rounds: int = config.FUZZ_MAX_ROUNDS,
    deny_list: Iterable[str] = (),
) -> TestPool:
    fuzzer = BaseFuzzer(schema, auth, executor, seed, max_rounds, deny_list)
    return fuzzer.run(budget_seconds)
