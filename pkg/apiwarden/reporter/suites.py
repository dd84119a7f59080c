import json
import logging
import re
import shlex
from typing import Iterable, Optional
from urllib.parse import quote, urlencode

from apiwarden import __version__
from apiwarden.auth import login_action
from apiwarden.corpus import SliceSpec, TestPool, slice_prefix
from apiwarden.executor import FORM_MEDIA_TYPE
from apiwarden.models.auth import TOKEN_PLACEHOLDER, AuthIdentity, IdentityKind
from apiwarden.models.fault import Fault
from apiwarden.models.http import Binding, HttpAction, TestCase
from apiwarden.models.report import EmittedSuite, PlanTest, SuiteFormat, TestPlan

logger = logging.getLogger(__name__)

PLAN_FILE = "faults.plan.json"
HTTPFILE_FILE = "faults.http"


def fault_comment(fault: Fault) -> str:
    return f"Fault{int(fault.code)}. {fault.label}."


def test_name(fault: Fault) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", fault.endpoint.path.lower()).strip("_")
    return f"fault_{int(fault.code)}_{fault.endpoint.verb.value.lower()}_{slug or 'root'}"


def _token_var(identity: AuthIdentity) -> str:
    return "token_" + re.sub(r"\W", "_", identity.name)


def _login_identities(test: TestCase, identities: dict[str, AuthIdentity]) -> list[AuthIdentity]:
    seen = []
    for call in test.calls:
        identity = identities.get(call.identity)
        if identity and identity.kind == IdentityKind.login_flow and identity not in seen:
            seen.append(identity)
    return seen


def _body_text(action: HttpAction) -> Optional[str]:
    if action.body is None:
        return None
    value = action.body.value
    if action.body.media_type == FORM_MEDIA_TYPE and isinstance(value, dict):
        return urlencode(value)
    if "json" in action.body.media_type:
        return json.dumps(value)
    return "" if value is None else str(value)


def _query_text(action: HttpAction, bound: dict[str, str]) -> str:
    pairs = [
        f"{quote(str(k), safe='')}={bound[k] if k in bound else quote(str(v), safe='')}"
        for k, v in action.query.items()
        if v is not None
    ]
    return "?" + "&".join(pairs) if pairs else ""


def _path_text(action: HttpAction, bound: dict[str, str]) -> str:
    path = action.endpoint.path
    for name in action.endpoint.placeholders:
        value = bound.get(name, quote(str(action.path_args.get(name, "")), safe=""))
        path = path.replace("{" + name + "}", value)
    return path


def emit_json_plan(
    faults: list[Fault],
    pool: Optional[TestPool],
    base_url: str,
    identities: Iterable[AuthIdentity],
) -> EmittedSuite:
    tests = [
        PlanTest(
            name=test_name(f),
            fault_code=int(f.code),
            flagged_call_index=f.flagged_call_index,
            comment=fault_comment(f),
            test=f.reproduction,
        )
        for f in faults
    ]
    if pool is not None:
        for position, entry in enumerate(pool.entries):
            # base-coverage tests replay the pooled entry with its observed statuses
            last = len(entry.calls) - 1
            tests.append(
                PlanTest(
                    name=f"coverage_{position}",
                    test=slice_prefix(SliceSpec(entry, last, position)),
                )
            )
    plan = TestPlan(
        target_base_url=base_url,
        identities=[i for i in identities if not i.is_anonymous],
        tests=tests,
    )
    return EmittedSuite(
        format="json-plan",
        files=[(PLAN_FILE, plan.model_dump_json(by_alias=True, indent=2) + "\n")],
    )


class ShellRenderer:
    """Renders one fault reproduction as a bash script driving curl and jq."""

    PRELUDE = """\
set -uo pipefail
BASE_URL="${{BASE_URL:-{base_url}}}"
work=$(mktemp -d)
trap 'rm -rf "$work"' EXIT
failures=0

call() {{
  local index=$1; shift
  local out
  out=$(curl -sS -o "$work/body_$index" -D "$work/headers_$index" \\
    -w '%{{http_code}} %{{time_total}}' "$@") || {{ echo "call $index: transport error" >&2; exit 1; }}
  status=${{out% *}}
  elapsed_ms=$(awk -v t="${{out#* }}" 'BEGIN {{ printf "%d", t * 1000 }}')
}}

expect_status() {{
  local index=$1 expected=$2
  if [[ "$expected" == ?xx ]]; then
    [[ "${{status:0:1}}" == "${{expected:0:1}}" ]] && return
  else
    [[ "$status" == "$expected" ]] && return
  fi
  echo "call $index: expected status $expected, got $status" >&2
  failures=$((failures + 1))
}}

expect_faster() {{
  if (( elapsed_ms >= $2 )); then
    echo "call $1: elapsed ${{elapsed_ms}} ms should be less than $2 ms" >&2
    failures=$((failures + 1))
  fi
}}

expect_slower() {{
  if (( elapsed_ms <= $2 )); then
    echo "call $1: elapsed ${{elapsed_ms}} ms should be greater than $2 ms" >&2
    failures=$((failures + 1))
  fi
}}

location_id() {{
  grep -i '^location:' "$work/headers_$1" | tail -n 1 | tr -d '\\r' \\
    | sed -e 's/^[^:]*: *//' -e 's/[?#].*$//' -e 's#/*$##' -e 's#.*/##'
}}
"""

    def __init__(self, base_url: str, identities: dict[str, AuthIdentity]) -> None:
        self.base_url = base_url
        self.identities = identities

    @staticmethod
    def _dq(text: str) -> str:
        return re.sub(r'(["$`\\])', r"\\\1", text)

    @staticmethod
    def _var(binding: Binding) -> str:
        name = re.sub(r"\W", "_", binding.target_slot.name)
        return f"bound_{binding.target_call_index}_{name}"

    def _login(self, identity: AuthIdentity) -> list[str]:
        recipe = identity.login_flow
        action = login_action(recipe)
        url = (action.origin or "$BASE_URL") + action.render_path() + _query_text(action, {})
        var = _token_var(identity)
        command = [
            f'curl -sS -D "$work/login_{var}" -X {action.endpoint.verb.value} "{self._dq(url)}"',
            f"-H {shlex.quote('Content-Type: ' + recipe.content_type)}",
        ]
        if recipe.payload:
            command.append(f"--data-raw {shlex.quote(recipe.payload)}")
        field = recipe.token.field
        if recipe.token.extract_from == "body":
            path = json.dumps([int(p) if p.isdigit() else p for p in field.split(".")])
            extract = f"jq -r {shlex.quote(f'getpath({path})')}"
            line = f"{var}=$({' '.join(command)} | {extract})"
        else:
            line = (
                f"{' '.join(command)} -o /dev/null\n"
                f"{var}=$(grep -i {shlex.quote('^' + field + ':')} \"$work/login_{var}\" "
                "| tail -n 1 | tr -d '\\r' | sed -e 's/^[^:]*: *//')"
            )
        return [f"# log in as {identity.name}", line, ""]

    def _auth_headers(self, identity_name: str) -> list[str]:
        identity = self.identities.get(identity_name)
        if identity is None or identity.is_anonymous:
            return []
        if identity.kind == IdentityKind.static_headers:
            return [f"-H {shlex.quote(f'{k}: {v}')}" for k, v in identity.static_headers.items()]
        token = identity.login_flow.token
        var = _token_var(identity)
        value = self._dq(token.header_template).replace(
            self._dq(TOKEN_PLACEHOLDER), "${" + var + "}"
        )
        return [f'-H "{self._dq(token.header_name)}: {value}"']

    def _call(self, test: TestCase, index: int, fault: Fault) -> list[str]:
        action = test.calls[index]
        inbound = test.bindings_into(index)
        path_vars = {
            b.target_slot.name: "${" + self._var(b) + "}"
            for b in inbound
            if b.target_slot.kind == "pathArg"
        }
        query_vars = {
            b.target_slot.name: "${" + self._var(b) + "}"
            for b in inbound
            if b.target_slot.kind == "queryParam"
        }
        lines = [f"# {action.describe()}"]
        for binding in inbound:
            source = binding.source_call_index
            if binding.extractor.kind == "locationHeader":
                lines.append(f"{self._var(binding)}=$(location_id {source})")
            else:
                path = json.dumps(
                    [int(p) if p.isdigit() else p for p in binding.extractor.path.split(".")]
                )
                lines.append(
                    f"{self._var(binding)}=$(jq -r {shlex.quote(f'getpath({path})')} "
                    f'"$work/body_{source}")'
                )

        markers = {k: f"\0{k}\0" for k in path_vars}
        url = "$BASE_URL" + re.sub(
            "\0([^\0]+)\0",
            lambda m: path_vars[m.group(1)],
            self._dq(_path_text(action, markers)),
        )
        url += _query_text(action, query_vars)
        args = [f"call {index}", f"-X {action.endpoint.verb.value}", f'"{url}"']
        args += self._auth_headers(action.identity)
        args += [f"-H {shlex.quote(f'{k}: {v}')}" for k, v in action.headers.items()]
        body = _body_text(action)
        if body is not None:
            args.append(f"-H {shlex.quote('Content-Type: ' + action.body.media_type)}")
            body_fields = [b for b in inbound if b.target_slot.kind == "bodyField"]
            if body_fields and "json" in action.body.media_type:
                program = " | ".join(
                    f"setpath({json.dumps(b.target_slot.name.split('.'))}; $v{n})"
                    for n, b in enumerate(body_fields)
                )
                jq_args = " ".join(
                    f'--arg v{n} "${{{self._var(b)}}}"' for n, b in enumerate(body_fields)
                )
                args.append(
                    f'--data-raw "$(jq -c {jq_args} {shlex.quote(program)} '
                    f"<<< {shlex.quote(body)})\""
                )
            else:
                args.append(f"--data-raw {shlex.quote(body)}")

        if index == fault.flagged_call_index:
            lines.append(f"# {fault_comment(fault)}")
        lines.append(" \\\n  ".join(args))
        if action.expected_status is not None:
            lines.append(f"expect_status {index} {action.expected_status}")
        if action.max_duration_ms is not None:
            lines.append(f"expect_faster {index} {int(action.max_duration_ms)}")
        if action.min_duration_ms is not None:
            lines.append(f"expect_slower {index} {int(action.min_duration_ms)}")
        return lines + [""]

    def render(self, fault: Fault) -> str:
        test = fault.reproduction
        lines = [
            "#!/usr/bin/env bash",
            f"# Reproduces F{int(fault.code)} {fault.label} on {fault.endpoint}.",
            f"# {fault.evidence}",
            f"# Generated by apiwarden {__version__}; needs curl and jq.",
            self.PRELUDE.format(base_url=self._dq(self.base_url)),
        ]
        for identity in _login_identities(test, self.identities):
            lines += self._login(identity)
        for index in range(len(test.calls)):
            lines += self._call(test, index, fault)
        lines.append("exit $(( failures > 0 ))")
        return "\n".join(lines) + "\n"


def emit_shell(
    faults: list[Fault], base_url: str, identities: Iterable[AuthIdentity]
) -> EmittedSuite:
    renderer = ShellRenderer(base_url, {i.name: i for i in identities})
    return EmittedSuite(
        format="shell",
        files=[(f"{test_name(f)}.sh", renderer.render(f)) for f in faults],
    )


class HttpFileRenderer:
    """Request-per-block text in the `.http` layout understood by editor REST clients."""

    def __init__(self, identities: dict[str, AuthIdentity]) -> None:
        self.identities = identities

    def _login(self, identity: AuthIdentity, prefix: str) -> list[str]:
        recipe = identity.login_flow
        action = login_action(recipe)
        url = (action.origin or "{{baseUrl}}") + action.render_path() + _query_text(action, {})
        lines = [
            f"### log in as {identity.name}",
            f"# @name {prefix}_login_{identity.name}",
            f"{action.endpoint.verb.value} {url}",
            f"Content-Type: {recipe.content_type}",
            "",
        ]
        if recipe.payload:
            lines += [recipe.payload, ""]
        return lines

    def _auth_headers(self, identity_name: str, prefix: str) -> list[str]:
        identity = self.identities.get(identity_name)
        if identity is None or identity.is_anonymous:
            return []
        if identity.kind == IdentityKind.static_headers:
            return [f"{k}: {v}" for k, v in identity.static_headers.items()]
        token = identity.login_flow.token
        where = "body.$." if token.extract_from == "body" else "headers."
        reference = f"{{{{{prefix}_login_{identity.name}.response.{where}{token.field}}}}}"
        return [f"{token.header_name}: {token.header_template.replace(TOKEN_PLACEHOLDER, reference)}"]

    def render(self, fault: Fault) -> list[str]:
        test = fault.reproduction
        prefix = test_name(fault)
        lines = [f"# ===== F{int(fault.code)} {fault.label} on {fault.endpoint}", ""]
        for identity in _login_identities(test, self.identities):
            lines += self._login(identity, prefix)
        for index, action in enumerate(test.calls):
            bound = {}
            for binding in test.bindings_into(index):
                source = f"{prefix}_{binding.source_call_index}"
                if binding.extractor.kind == "bodyField":
                    reference = f"{{{{{source}.response.body.$.{binding.extractor.path}}}}}"
                else:
                    reference = f"{{{{{source}.response.headers.Location}}}}"
                bound[binding.target_slot.name] = reference
            lines += [
                f"### {action.describe()}",
                f"# @name {prefix}_{index}",
                f"# expect status {action.expected_status or 'any'}",
            ]
            if action.max_duration_ms is not None:
                lines.append(f"# expect elapsed less than {int(action.max_duration_ms)} ms")
            if action.min_duration_ms is not None:
                lines.append(f"# expect elapsed greater than {int(action.min_duration_ms)} ms")
            for name, reference in bound.items():
                lines.append(f"# {name} comes from {reference}")
            if index == fault.flagged_call_index:
                lines.append(f"# {fault_comment(fault)}")
            path_bound = {
                b.target_slot.name: bound[b.target_slot.name]
                for b in test.bindings_into(index)
                if b.target_slot.kind == "pathArg"
            }
            lines.append(
                f"{action.endpoint.verb.value} {{{{baseUrl}}}}"
                f"{_path_text(action, path_bound)}{_query_text(action, {})}"
            )
            lines += self._auth_headers(action.identity, prefix)
            lines += [f"{k}: {v}" for k, v in action.headers.items()]
            body = _body_text(action)
            if body is not None:
                lines += [f"Content-Type: {action.body.media_type}", "", body]
            lines.append("")
        return lines


def emit_httpfile(
    faults: list[Fault], base_url: str, identities: Iterable[AuthIdentity]
) -> EmittedSuite:
    renderer = HttpFileRenderer({i.name: i for i in identities})
    lines = [f"@baseUrl = {base_url}", ""]
    for fault in faults:
        lines += renderer.render(fault)
    return EmittedSuite(format="httpfile", files=[(HTTPFILE_FILE, "\n".join(lines) + "\n")])


def emit_suite(
    faults: list[Fault],
    pool: Optional[TestPool],
    suite_format: SuiteFormat,
    base_url: str,
    identities: Iterable[AuthIdentity] = (),
    include_coverage: bool = False,
) -> EmittedSuite:
    identities = list(identities)
    if suite_format == "json-plan":
        return emit_json_plan(
            faults, pool if include_coverage else None, base_url, identities
        )
    if suite_format == "shell":
        return emit_shell(faults, base_url, identities)
    return emit_httpfile(faults, base_url, identities)
