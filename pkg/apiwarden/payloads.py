import json
import logging
import math
import re
from importlib import resources
from pathlib import Path
from typing import Optional

from apiwarden.errors import PayloadError

logger = logging.getLogger(__name__)


def _read(path: Optional[str], default: str) -> str:
    if path is None:
        return resources.files("apiwarden.data").joinpath(default).read_text("utf-8")
    try:
        return Path(path).read_text("utf-8")
    except OSError as err:
        raise PayloadError(f"could not read {path}: {err}") from err


def _lines(text: str) -> list[str]:
    return [line for line in text.splitlines() if line.strip()]


def load_sqli_payloads(sleep_seconds: float, path: Optional[str] = None) -> list[str]:
    """Sleep payloads with `{sleep}` / `{sleep_int}` filled in for `sleep_seconds`."""
    payloads = [
        line.replace("{sleep}", f"{sleep_seconds:.2f}").replace(
            "{sleep_int}", str(math.ceil(sleep_seconds))
        )
        for line in _lines(_read(path, "sqli.txt"))
    ]
    if not payloads:
        raise PayloadError("SQLi payload file is empty")
    logger.debug(f"Loaded {len(payloads)} SQLi payloads")
    return payloads


def load_xss_payloads(path: Optional[str] = None) -> list[str]:
    payloads = _lines(_read(path, "xss.txt"))
    if not payloads:
        raise PayloadError("XSS payload file is empty")
    return payloads


def load_stack_trace_patterns(path: Optional[str] = None) -> dict[str, list[str]]:
    try:
        document = json.loads(_read(path, "stack_traces.json"))
    except json.JSONDecodeError as err:
        raise PayloadError(f"stack-trace patterns are not valid JSON: {err}") from err
    if not isinstance(document, dict):
        raise PayloadError("stack-trace patterns must map names to regex lists")
    patterns = {}
    for name, entries in document.items():
        entries = [entries] if isinstance(entries, str) else entries
        if not isinstance(entries, list) or not all(isinstance(e, str) for e in entries):
            raise PayloadError(f"patterns for {name!r} must be strings")
        patterns[str(name)] = entries
    compile_patterns(patterns)
    return patterns


def compile_patterns(patterns: dict[str, list[str]]) -> dict[str, list[re.Pattern]]:
    compiled = {}
    for name, entries in patterns.items():
        try:
            compiled[name] = [re.compile(p, re.MULTILINE) for p in entries]
        except re.error as err:
            raise PayloadError(f"bad {name} stack-trace pattern: {err}") from err
    return compiled
