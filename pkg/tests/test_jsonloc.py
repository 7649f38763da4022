"""Position-tracking JSON parser."""

import json

import pytest

from fareopt import _jsonloc


def test_values_round_trip():
    text = '{"a": [1, 2.5, true, null, "x"], "b": {"c": -3e2}}'
    doc = _jsonloc.parse(text)
    assert doc.value == json.loads(text)


def test_positions_point_at_lines():
    text = '{\n  "a": 1,\n  "b": [\n    10,\n    20\n  ]\n}'
    doc = _jsonloc.parse(text)
    assert doc.line_of(("a",)) == 2
    assert doc.line_of(("b",)) == 3
    assert doc.line_of(("b", 0)) == 4
    assert doc.line_of(("b", 1)) == 5
    assert doc.line_of(()) == 1


def test_syntax_error_carries_position():
    with pytest.raises(_jsonloc.JsonSyntaxError) as err:
        _jsonloc.parse('{\n "a": ,\n}')
    assert err.value.line == 2


def test_duplicate_keys_rejected():
    with pytest.raises(_jsonloc.JsonSyntaxError):
        _jsonloc.parse('{"a": 1, "a": 2}')


def test_trailing_garbage_rejected():
    with pytest.raises(_jsonloc.JsonSyntaxError):
        _jsonloc.parse('{"a": 1} {}')


def test_agrees_with_stdlib_on_tricky_strings():
    text = '{"s": "a\\"b\\\\n\\u00e9", "n": [0, -0.5, 1e-3]}'
    assert _jsonloc.parse(text).value == json.loads(text)
