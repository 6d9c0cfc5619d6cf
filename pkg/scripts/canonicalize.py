#!/usr/bin/env python3
"""Independent canonical-JSON writer and digest checker.

Deliberately does not reuse the package's serializer: the bytes are built by
hand-rolled recursion so the two implementations can cross-check each other.

Usage:
    python3 scripts/canonicalize.py exported.passport.json
prints the SHA-256 hex digest of the canonical byte form.
"""

from __future__ import annotations

import hashlib
import json
import sys


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\b":
            out.append("\\b")
        elif ch == "\f":
            out.append("\\f")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def _number(value) -> str:
    if isinstance(value, bool):
        raise TypeError("bool is not a number here")
    if isinstance(value, int):
        return str(value)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("non-finite numbers have no canonical form")
    return repr(value)


def canonical(obj) -> bytes:
    def emit(value) -> str:
        if value is None:
            return "null"
        if value is True:
            return "true"
        if value is False:
            return "false"
        if isinstance(value, str):
            return f'"{_escape(value)}"'
        if isinstance(value, (int, float)):
            return _number(value)
        if isinstance(value, (list, tuple)):
            return "[" + ",".join(emit(v) for v in value) + "]"
        if isinstance(value, dict):
            items = sorted(value.items())
            return "{" + ",".join(f'"{_escape(k)}":{emit(v)}'
                                  for k, v in items) + "}"
        raise TypeError(f"cannot canonicalize {type(value).__name__}")

    return emit(obj).encode("utf-8")


def digest_of(obj) -> str:
    return hashlib.sha256(canonical(obj)).hexdigest()


def main() -> int:
    if len(sys.argv) != 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    with open(sys.argv[1], "rb") as fh:
        obj = json.load(fh)
    print(digest_of(obj))
    return 0


if __name__ == "__main__":
    sys.exit(main())
