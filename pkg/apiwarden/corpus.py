import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Union

from pydantic import Field, ValidationError

from apiwarden.errors import CompositionError, CorpusError
from apiwarden.models.auth import ANONYMOUS
from apiwarden.models.http import (
    Binding,
    ExecutedCall,
    HttpAction,
    Slot,
    StatusExpectation,
    TestCase,
    TestRun,
    WireModel,
    status_matches,
)
from apiwarden.models.schema import EndpointId, HttpVerb

logger = logging.getLogger(__name__)

ANY_IDENTITY = "*"
AUTHENTICATED = "+"

StatusFilter = Union[StatusExpectation, tuple[StatusExpectation, ...]]


class PoolEntry(WireModel):
    test: TestCase
    calls: list[ExecutedCall]


@dataclass(frozen=True)
class SliceSpec:
    entry: PoolEntry
    target_index: int
    position: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.target_index < len(self.entry.calls):
            raise CompositionError(
                f"target index {self.target_index} outside a "
                f"{len(self.entry.calls)}-call test"
            )

    @property
    def call(self) -> ExecutedCall:
        return self.entry.calls[self.target_index]

    @property
    def identity(self) -> str:
        return self.call.identity


PoolRef = SliceSpec


def _status_ok(status_filter: Optional[StatusFilter], status: int) -> bool:
    if status_filter is None:
        return True
    if isinstance(status_filter, tuple):
        return any(status_matches(f, status) for f in status_filter)
    return status_matches(status_filter, status)


def _identity_ok(identity_filter: str, identity: str) -> bool:
    if identity_filter == ANY_IDENTITY:
        return True
    if identity_filter == AUTHENTICATED:
        return identity != ANONYMOUS
    return identity == identity_filter


class TestPool:
    """Executed test cases plus an index by endpoint, status and identity."""

    __test__ = False

    def __init__(self, entries: Iterable[PoolEntry] = ()) -> None:
        self.entries: list[PoolEntry] = []
        self._index: dict[EndpointId, dict[tuple[int, str], list[SliceSpec]]] = {}
        for entry in entries:
            self._insert(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def _insert(self, entry: PoolEntry) -> PoolEntry:
        if len(entry.calls) != len(entry.test.calls):
            raise CorpusError("pool entries need one executed call per test call")
        position = len(self.entries)
        self.entries.append(entry)
        for index, call in enumerate(entry.calls):
            if call.timed_out:
                continue
            key = (call.status, call.identity)
            bucket = self._index.setdefault(call.endpoint, {})
            bucket.setdefault(key, []).append(SliceSpec(entry, index, position))
        return entry

    def add(self, test: TestCase, run: TestRun) -> Optional[PoolEntry]:
        if run.unbindable or len(run.calls) != len(test.calls):
            logger.debug("Not pooling an incomplete run")
            return None
        return self._insert(PoolEntry(test=test, calls=list(run.calls)))

    @property
    def endpoints(self) -> list[EndpointId]:
        return list(self._index)

    def statuses(self, endpoint: EndpointId) -> set[tuple[int, str]]:
        return set(self._index.get(endpoint, {}))

    def find_all(
        self,
        endpoint: EndpointId,
        status: Optional[StatusFilter] = None,
        identity: str = ANY_IDENTITY,
        *,
        duration_below: Optional[float] = None,
        exclude_identity: Optional[str] = None,
        predicate: Optional[Callable[[ExecutedCall], bool]] = None,
    ) -> list[SliceSpec]:
        """Matches ordered by call count of their test, then insertion order."""
        matches = []
        for (code, who), refs in self._index.get(endpoint, {}).items():
            if not _status_ok(status, code) or not _identity_ok(identity, who):
                continue
            if exclude_identity is not None and who == exclude_identity:
                continue
            for ref in refs:
                call = ref.call
                if duration_below is not None and not call.duration_ms < duration_below:
                    continue
                if predicate is not None and not predicate(call):
                    continue
                matches.append(ref)
        matches.sort(key=lambda r: (len(r.entry.calls), r.position, r.target_index))
        return matches

    def find_entry(
        self,
        endpoint: EndpointId,
        status: Optional[StatusFilter] = None,
        identity: str = ANY_IDENTITY,
        **extra,
    ) -> Optional[SliceSpec]:
        matches = self.find_all(endpoint, status, identity, **extra)
        return matches[0] if matches else None


def _expect_observed(action: HttpAction, call: ExecutedCall) -> HttpAction:
    return action.model_copy(
        update={"expected_status": None if call.timed_out else call.status}, deep=True
    )


def slice_prefix(spec: SliceSpec) -> TestCase:
    cut = spec.target_index + 1
    entry = spec.entry
    return TestCase(
        calls=[
            _expect_observed(action, call)
            for action, call in zip(entry.test.calls[:cut], entry.calls[:cut])
        ],
        bindings=[b for b in entry.test.bindings if b.target_call_index < cut],
        provenance=entry.test.provenance,
    )


def slice_solo(spec: SliceSpec) -> TestCase:
    # the executed action already carries the concrete values bindings produced
    return TestCase(
        calls=[_expect_observed(spec.call.action, spec.call)],
        provenance=spec.entry.test.provenance,
    )


def concat_and_bind(
    head: TestCase, tail: TestCase, bind_resource: bool = False
) -> TestCase:
    offset = len(head.calls)
    calls = [c.model_copy(deep=True) for c in head.calls]
    bindings = list(head.bindings) + [b.shifted(offset) for b in tail.bindings]
    if not bind_resource:
        calls += [c.model_copy(deep=True) for c in tail.calls]
        return TestCase(calls=calls, bindings=bindings)

    target_index = offset - 1
    target = head.calls[target_index]
    inbound = {
        b.target_slot.name: b
        for b in head.bindings_into(target_index)
        if b.target_slot.kind == "pathArg"
    }
    for position, call in enumerate(tail.calls):
        index = offset + position
        path_args = dict(call.path_args)
        for name in call.endpoint.placeholders:
            if name not in target.path_args:
                raise CompositionError(
                    f"cannot bind {call.endpoint}: {{{name}}} not in {target.endpoint}"
                )
            path_args[name] = target.path_args[name]
            # drop tail bindings into this slot, the head decides the resource now
            bindings = [
                b
                for b in bindings
                if not (
                    b.target_call_index == index
                    and b.target_slot.kind == "pathArg"
                    and b.target_slot.name == name
                )
            ]
            if name in inbound:
                bindings.append(
                    Binding(
                        source_call_index=inbound[name].source_call_index,
                        extractor=inbound[name].extractor,
                        target_call_index=index,
                        target_slot=Slot(kind="pathArg", name=name),
                    )
                )
        calls.append(call.model_copy(update={"path_args": path_args}, deep=True))
    return TestCase(calls=calls, bindings=bindings)


def with_identity(test: TestCase, index: int, identity: str) -> TestCase:
    calls = list(test.calls)
    calls[index] = calls[index].model_copy(update={"identity": identity})
    return test.model_copy(update={"calls": calls})


def with_expectation(
    test: TestCase, index: int, expected: Optional[StatusExpectation]
) -> TestCase:
    calls = list(test.calls)
    calls[index] = calls[index].model_copy(update={"expected_status": expected})
    return test.model_copy(update={"calls": calls})


def append_call(
    test: TestCase, action: HttpAction, copy_bindings_from: Optional[int] = None
) -> TestCase:
    """Append `action`; optionally re-point the bindings of an earlier call at it."""
    index = len(test.calls)
    bindings = list(test.bindings)
    if copy_bindings_from is not None:
        bindings += [
            b.model_copy(update={"target_call_index": index})
            for b in test.bindings_into(copy_bindings_from)
        ]
    return TestCase(
        calls=list(test.calls) + [action],
        bindings=bindings,
        provenance=test.provenance,
    )


def observed(test: TestCase, run: TestRun) -> TestCase:
    """`test` with expectations replaced by what `run` observed."""
    calls = [
        _expect_observed(action, call) for action, call in zip(test.calls, run.calls)
    ]
    calls += test.calls[len(calls):]
    return test.model_copy(update={"calls": calls})


def refresh_created_ids(test: TestCase, rng: random.Random) -> TestCase:
    """Rename literal ids minted by creating PUTs (expected 201) to fresh values."""
    renames: dict[str, object] = {}
    bound = {
        (b.target_call_index, b.target_slot.name)
        for b in test.bindings
        if b.target_slot.kind == "pathArg"
    }
    for index, call in enumerate(test.calls):
        if call.endpoint.verb != HttpVerb.PUT or call.expected_status != 201:
            continue
        for name, value in call.path_args.items():
            if (index, name) in bound or str(value) in renames:
                continue
            fresh = rng.randint(100_000, 999_999)
            renames[str(value)] = fresh if isinstance(value, int) else str(fresh)
    if not renames:
        return test
    calls = [
        call.model_copy(
            update={
                "path_args": {
                    k: renames.get(str(v), v) for k, v in call.path_args.items()
                }
            }
        )
        for call in test.calls
    ]
    return test.model_copy(update={"calls": calls})


class CorpusFile(WireModel):
    format_version: int = 1
    base_url: str
    schema_source: str = ""
    seed: int = 0
    entries: list[PoolEntry] = Field(default_factory=list)


def save_pool(
    pool: TestPool, path: Union[str, Path], base_url: str, schema_source: str, seed: int
) -> None:
    corpus = CorpusFile(
        base_url=base_url, schema_source=schema_source, seed=seed, entries=pool.entries
    )
    try:
        Path(path).write_text(corpus.model_dump_json(by_alias=True, indent=2))
    except OSError as err:
        raise CorpusError(f"could not write corpus {path}: {err}") from err
    logger.info(f"Saved {len(pool)} pool entries to {path}")


def load_pool(path: Union[str, Path]) -> tuple[TestPool, CorpusFile]:
    try:
        corpus = CorpusFile.model_validate_json(Path(path).read_text())
    except OSError as err:
        raise CorpusError(f"could not read corpus {path}: {err}") from err
    except ValidationError as err:
        raise CorpusError(f"corpus {path} is malformed: {err}") from err
    return TestPool(corpus.entries), corpus
