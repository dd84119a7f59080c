import json
import logging
import time
from typing import TYPE_CHECKING, Any, Optional, Sequence, Union
from urllib.parse import urlparse
from uuid import uuid4

import httpx
from asgi_correlation_id import correlation_id

from apiwarden.config import config
from apiwarden.errors import TransportError
from apiwarden.models.auth import ResolvedCredential
from apiwarden.models.http import (
    Binding,
    ExecutedCall,
    Extractor,
    HttpAction,
    TestCase,
    TestRun,
    status_matches,
)

if TYPE_CHECKING:
    from apiwarden.auth import AuthManager

logger = logging.getLogger(__name__)

FORM_MEDIA_TYPE = "application/x-www-form-urlencoded"


def lookup_field(document: Any, path: str) -> Any:
    """Follow a dotted path (list indexes allowed) through decoded JSON."""
    node = document
    for part in path.split("."):
        if isinstance(node, dict) and part in node:
            node = node[part]
        elif isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        else:
            return None
    return node


def assign_field(document: dict[str, Any], path: str, value: Any) -> None:
    parts = path.split(".")
    node = document
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def extract(call: ExecutedCall, extractor: Extractor) -> Any:
    if extractor.kind == "locationHeader":
        location = call.header("location")
        if not location:
            return None
        segments = [s for s in urlparse(location).path.split("/") if s]
        return segments[-1] if segments else None
    try:
        document = json.loads(call.response_body)
    except (json.JSONDecodeError, TypeError):
        return None
    value = lookup_field(document, extractor.path)
    return None if isinstance(value, (dict, list)) else value


def apply_bindings(
    action: HttpAction, bindings: Sequence[Binding], executed: Sequence[ExecutedCall]
) -> Optional[HttpAction]:
    """Return a concrete copy of `action`, or None when a value cannot be extracted."""
    if not bindings:
        return action
    path_args = dict(action.path_args)
    query = dict(action.query)
    body = action.body.model_copy(deep=True) if action.body else None
    for binding in bindings:
        value = extract(executed[binding.source_call_index], binding.extractor)
        if value is None:
            return None
        slot = binding.target_slot
        if slot.kind == "pathArg":
            path_args[slot.name] = value
        elif slot.kind == "queryParam":
            query[slot.name] = value
        elif body is not None and isinstance(body.value, dict):
            assign_field(body.value, slot.name, value)
    return action.model_copy(update={"path_args": path_args, "query": query, "body": body})


def verify_statuses(
    test: TestCase, observed: Union[TestRun, Sequence[ExecutedCall]]
) -> bool:
    calls = observed.calls if isinstance(observed, TestRun) else list(observed)
    for index, action in enumerate(test.calls):
        if action.expected_status is None:
            continue
        if index >= len(calls) or calls[index].timed_out:
            return False
        if not status_matches(action.expected_status, calls[index].status):
            return False
    return True


def verify_timings(test: TestCase, observed: TestRun) -> bool:
    for action, call in zip(test.calls, observed.calls):
        if action.max_duration_ms is not None and not call.duration_ms < action.max_duration_ms:
            return False
        if action.min_duration_ms is not None and not call.duration_ms > action.min_duration_ms:
            return False
    return len(observed.calls) == len(test.calls)


class HttpExecutor:
    """Sends actions to the target API, one at a time."""

    def __init__(
        self,
        base_url: str,
        auth: "AuthManager",
        client: Optional[httpx.Client] = None,
        timeout: float = config.HTTP_TIMEOUT_SECONDS,
        body_cap: int = config.RESPONSE_BODY_CAP_BYTES,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.auth = auth
        self.body_cap = body_cap
        self.timeout = timeout
        self.client = client or httpx.Client(
            base_url=self.base_url,
            timeout=timeout,
            follow_redirects=False,
            trust_env=True,
        )
        self.tests_executed = 0

    def __enter__(self) -> "HttpExecutor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        self.client.close()

    def _request_kwargs(
        self, action: HttpAction, credentials: ResolvedCredential
    ) -> dict[str, Any]:
        headers = {k: str(v) for k, v in action.headers.items()}
        headers.update(credentials.headers)
        kwargs: dict[str, Any] = {
            "params": {k: v for k, v in action.query.items() if v is not None},
            "headers": headers,
            "timeout": self.timeout,
            "follow_redirects": False,
        }
        if action.body is not None:
            body = action.body
            if body.media_type == FORM_MEDIA_TYPE and isinstance(body.value, dict):
                kwargs["data"] = body.value
            elif body.media_type == FORM_MEDIA_TYPE:
                kwargs["content"] = str(body.value)
                headers.setdefault("Content-Type", FORM_MEDIA_TYPE)
            elif "json" in body.media_type:
                kwargs["json"] = body.value
            else:
                kwargs["content"] = "" if body.value is None else str(body.value)
                headers.setdefault("Content-Type", body.media_type)
        return kwargs

    def execute(self, action: HttpAction, credentials: ResolvedCredential) -> ExecutedCall:
        url = (action.origin or "") + action.render_path()
        kwargs = self._request_kwargs(action, credentials)
        logger.debug(f"Executing {action.describe()}")

        chunks: list[bytes] = []
        received = 0
        truncated = False
        started = time.perf_counter()
        try:
            with self.client.stream(action.endpoint.verb.value, url, **kwargs) as response:
                for chunk in response.iter_bytes():
                    room = self.body_cap - received
                    if len(chunk) > room:
                        chunks.append(chunk[:room])
                        truncated = True
                        break
                    chunks.append(chunk)
                    received += len(chunk)
                elapsed_ms = (time.perf_counter() - started) * 1000
                status = response.status_code
                headers = dict(response.headers)
                encoding = response.encoding or "utf-8"
        except httpx.TimeoutException:
            elapsed_ms = (time.perf_counter() - started) * 1000
            logger.warning(f"Timed out after {elapsed_ms:.0f} ms: {action.describe()}")
            return ExecutedCall(action=action, duration_ms=elapsed_ms, timed_out=True)
        except httpx.TransportError as err:
            raise TransportError(
                f"could not reach {self.base_url} for {action.describe()}: {err}"
            ) from err

        body = b"".join(chunks).decode(encoding, errors="replace")
        logger.debug(f"{action.describe()} -> {status} in {elapsed_ms:.1f} ms")
        return ExecutedCall(
            action=action,
            status=status,
            response_headers=headers,
            response_body=body,
            truncated=truncated,
            duration_ms=elapsed_ms,
        )

    def run_test_case(self, test: TestCase) -> TestRun:
        token = correlation_id.set(uuid4().hex[:8])
        self.tests_executed += 1
        run = TestRun()
        try:
            for index, template in enumerate(test.calls):
                action = apply_bindings(template, test.bindings_into(index), run.calls)
                if action is None:
                    run.unbindable = True
                    run.reason = f"could not bind values into call {index}"
                    logger.info(f"Test unbindable at call {index}, skipping the rest")
                    break
                credentials = self.auth.resolve_name(action.identity, self)
                run.calls.append(self.execute(action, credentials))
        finally:
            correlation_id.reset(token)
        return run
