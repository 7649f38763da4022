"""JSON parsing that remembers the source line/column of every node.

Schema validation elsewhere can then point at the offending line of a config
file instead of only naming a key. Parses standard JSON (objects, arrays,
strings, numbers, true/false/null); duplicate object keys are rejected.
"""

from __future__ import annotations

import bisect
import json.decoder
import re

_NUMBER = re.compile(r"-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?")
_WHITESPACE = " \t\n\r"

JsonPath = tuple  # of str (object key) | int (array index)


class JsonSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class LocatedJson:
    """A parsed JSON value plus a map from node path to (line, column)."""

    def __init__(self, value, positions: dict[JsonPath, tuple[int, int]]):
        self.value = value
        self.positions = positions

    def line_of(self, path) -> int | None:
        pos = self.positions.get(tuple(path))
        return pos[0] if pos is not None else None


def parse(text: str) -> LocatedJson:
    """Parse ``text`` and record where every value begins."""
    newlines = [i for i, ch in enumerate(text) if ch == "\n"]

    def linecol(i: int) -> tuple[int, int]:
        line = bisect.bisect_right(newlines, i - 1)
        start = newlines[line - 1] + 1 if line > 0 else 0
        return line + 1, i - start + 1

    def fail(message: str, i: int):
        raise JsonSyntaxError(message, *linecol(i))

    def skip_ws(i: int) -> int:
        while i < len(text) and text[i] in _WHITESPACE:
            i += 1
        return i

    positions: dict[JsonPath, tuple[int, int]] = {}

    def value(i: int, path: JsonPath):
        i = skip_ws(i)
        if i >= len(text):
            fail("unexpected end of input", i)
        positions[path] = linecol(i)
        ch = text[i]
        if ch == "{":
            return obj(i, path)
        if ch == "[":
            return arr(i, path)
        if ch == '"':
            try:
                s, end = json.decoder.scanstring(text, i + 1)
            except ValueError:
                fail("invalid string", i)
            return s, end
        for literal, out in (("true", True), ("false", False), ("null", None)):
            if text.startswith(literal, i):
                return out, i + len(literal)
        m = _NUMBER.match(text, i)
        if m:
            raw = m.group()
            return (int(raw) if raw.lstrip("-").isdigit() else float(raw)), m.end()
        fail(f"unexpected character {ch!r}", i)

    def obj(i: int, path: JsonPath):
        out: dict = {}
        i = skip_ws(i + 1)
        if i < len(text) and text[i] == "}":
            return out, i + 1
        while True:
            i = skip_ws(i)
            if i >= len(text) or text[i] != '"':
                fail("expected object key", i)
            key_pos = i
            try:
                key, i = json.decoder.scanstring(text, i + 1)
            except ValueError:
                fail("invalid string", i)
            if key in out:
                fail(f"duplicate key {key!r}", key_pos)
            i = skip_ws(i)
            if i >= len(text) or text[i] != ":":
                fail("expected ':' after object key", i)
            out[key], i = value(i + 1, path + (key,))
            i = skip_ws(i)
            if i < len(text) and text[i] == ",":
                i += 1
                continue
            if i < len(text) and text[i] == "}":
                return out, i + 1
            fail("expected ',' or '}' in object", i)

    def arr(i: int, path: JsonPath):
        out: list = []
        i = skip_ws(i + 1)
        if i < len(text) and text[i] == "]":
            return out, i + 1
        while True:
            item, i = value(i, path + (len(out),))
            out.append(item)
            i = skip_ws(i)
            if i < len(text) and text[i] == ",":
                i += 1
                continue
            if i < len(text) and text[i] == "]":
                return out, i + 1
            fail("expected ',' or ']' in array", i)

    root, end = value(0, ())
    end = skip_ws(end)
    if end != len(text):
        fail("trailing data after document", end)
    return LocatedJson(root, positions)
