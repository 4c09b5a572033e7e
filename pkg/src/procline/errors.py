"""Error type shared by every module.

All failures carry a stable string code (``E_SCHEMA``, ``E_PARSE``, ...) so the
CLI can surface them verbatim and tests can match on them.
"""

from __future__ import annotations

from typing import Any

# Codes that mean "the input could not be read", as opposed to "the input was
# read and something about it is wrong". The CLI maps these to exit status 2.
PARSE_CODES = frozenset({"E_PARSE", "E_SCHEMA", "E_CSV", "E_JSON"})


class ProcLineError(Exception):
    def __init__(self, code: str, message: str, **details: Any) -> None:
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details


class RuleParseError(ProcLineError):
    """Syntax error in rule text, positioned at a 1-based line and column."""

    def __init__(self, line: int, column: int, expected: str, found: str = "") -> None:
        where = f"line {line}, col {column}"
        msg = f"{where}: {expected}" + (f" (found {found!r})" if found else "")
        super().__init__("E_PARSE", msg, line=line, column=column, expected=expected)
        self.line = line
        self.column = column
        self.expected = expected
