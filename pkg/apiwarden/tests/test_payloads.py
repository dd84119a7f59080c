import re

import pytest

from apiwarden.errors import PayloadError
from apiwarden.payloads import (
    compile_patterns,
    load_sqli_payloads,
    load_stack_trace_patterns,
    load_xss_payloads,
)

JVM_TRACE = """java.lang.NullPointerException: null
\tat com.example.api.ResourceService.find(ResourceService.java:42)
\tat sun.reflect.NativeMethodAccessorImpl.invoke0(Native Method)"""


def matches(text: str) -> set[str]:
    compiled = compile_patterns(load_stack_trace_patterns())
    return {
        name for name, patterns in compiled.items() if any(p.search(text) for p in patterns)
    }


def test_sqli_payloads_carry_the_sleep():
    payloads = load_sqli_payloads(1.5)

    assert any("SLEEP(1.50)" in p for p in payloads)
    assert any("pg_sleep(1.50)" in p for p in payloads)
    assert any("0:0:2" in p for p in payloads)
    assert not any("{sleep" in p for p in payloads)


def test_xss_payloads_default():
    assert "<script>alert('XSS')</script>" in load_xss_payloads()


def test_custom_payload_file(fs):
    fs.create_file("sqli.txt", contents="x' OR SLEEP({sleep})\n\n")

    assert load_sqli_payloads(2, "sqli.txt") == ["x' OR SLEEP(2.00)"]


def test_empty_payload_file(fs):
    fs.create_file("xss.txt", contents="\n  \n")

    with pytest.raises(PayloadError):
        load_xss_payloads("xss.txt")


def test_missing_payload_file(fs):
    with pytest.raises(PayloadError):
        load_sqli_payloads(1, "nope.txt")


@pytest.mark.parametrize(
    "contents", ["[]", "{not json", '{"java": [1]}', '{"java": ["(unclosed"]}']
)
def test_bad_stack_trace_patterns(fs, contents):
    fs.create_file("traces.json", contents=contents)

    with pytest.raises(PayloadError):
        load_stack_trace_patterns("traces.json")


@pytest.mark.parametrize(
    "text, language",
    [
        (JVM_TRACE, "java"),
        ('Traceback (most recent call last):\n  File "/app/x.py", line 3, in run', "python"),
        ("   at Api.Controllers.Get() in C:\\src\\Api.cs:line 12", "csharp"),
        ("    at Object.handler (/srv/app/index.js:10:5)", "javascript"),
        ("goroutine 1 [running]:\nmain.main()", "go"),
        ("PHP Fatal error:  Uncaught Error in /var/www/a.php:3", "php"),
        ("app.rb:12:in `block in <main>'", "ruby"),
        ("thread 'main' panicked at src/main.rs:2:5", "rust"),
    ],
)
def test_stack_trace_languages(text, language):
    assert language in matches(text)


@pytest.mark.parametrize(
    "text",
    ['{"id": 1, "name": "at home"}', "Internal Server Error", '{"error": "bad input"}'],
)
def test_plain_errors_are_not_traces(text):
    assert matches(text) == set()


def test_single_string_pattern_is_listed(fs):
    fs.create_file("traces.json", contents='{"custom": "BOOM-\\\\d+"}')

    patterns = load_stack_trace_patterns("traces.json")

    assert patterns == {"custom": ["BOOM-\\d+"]}
    assert re.search(patterns["custom"][0], "BOOM-12")
