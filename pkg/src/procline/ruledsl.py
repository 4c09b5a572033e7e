"""Variation rule language.

One rule per line::

    rule   := ID ":" ["if" cond "then"] action ("," action)*
    cond   := conj ("or" conj)*
    conj   := atom ("and" atom)*
    atom   := "(" cond ")" | ATTR op value | ATTR "in" "{" value ("," value)* "}"
    op     := "==" | "!=" | "<=" | ">=" | "<" | ">"
    action := include(ID, ...) | exclude(ID, ...) | resolve(ID) | set(name, value)

``#`` starts a comment running to end of line. Element ids that are not plain
words (edge keys such as ``pf:A>W:produces``) are written as double-quoted
strings.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Union

from procline.charmaps import (
    FALSE_WORDS,
    TRUE_WORDS,
    AttributeDef,
    Value,
    canonical_value,
)
from procline.errors import ProcLineError, RuleParseError

DEFAULT_SCORE = 4  # neutral likelihood 2 x damage 2
ALWAYS_SCORE = 0

ORDERED_OPS = ("<=", ">=", "<", ">")
COMPARE_OPS = ("==", "!=", *ORDERED_OPS)
RESERVED = frozenset({"if", "then", "and", "or", "in"})
PARAM_RE = re.compile(r"[a-z_]+")
WORD_RE = re.compile(r"[A-Za-z0-9_.\-]+")
INT_RE = re.compile(r"-?[0-9]+")
FLOAT_RE = re.compile(r"-?[0-9]+\.[0-9]+")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<punct>[:(),{}])
  | (?P<word>[A-Za-z0-9_.\-]+)
    """,
    re.VERBOSE,
)


# -- syntax tree -------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    attribute: str
    op: str
    value: Value


@dataclass(frozen=True)
class Membership:
    attribute: str
    values: frozenset


@dataclass(frozen=True)
class And:
    operands: tuple[Condition, ...]


@dataclass(frozen=True)
class Or:
    operands: tuple[Condition, ...]


Condition = Union[Comparison, Membership, And, Or]


@dataclass(frozen=True)
class Include:
    elements: tuple[str, ...]


@dataclass(frozen=True)
class Exclude:
    elements: tuple[str, ...]


@dataclass(frozen=True)
class Resolve:
    target: str


@dataclass(frozen=True)
class SetParam:
    name: str
    value: int | float | str


Action = Union[Include, Exclude, Resolve, SetParam]


@dataclass(frozen=True)
class Rule:
    id: str
    condition: Condition | None  # None means ALWAYS
    actions: tuple[Action, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...] = ()

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def get(self, rule_id: str) -> Rule | None:
        for rule in self.rules:
            if rule.id == rule_id:
                return rule
        return None

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.rules)


def condition_attributes(cond: Condition | None) -> frozenset[str]:
    if cond is None:
        return frozenset()
    if isinstance(cond, (Comparison, Membership)):
        return frozenset({cond.attribute})
    out: set[str] = set()
    for operand in cond.operands:
        out |= condition_attributes(operand)
    return frozenset(out)


# -- context -----------------------------------------------------------------


@dataclass(frozen=True)
class ProjectContext:
    """Attribute values for one project/product pair, with the priority score
    of the characteristic behind each value (used to settle action conflicts)."""

    values: Mapping[str, Value]
    scores: Mapping[str, int] = field(default_factory=dict)

    def score(self, attribute: str) -> int:
        return self.scores.get(attribute, DEFAULT_SCORE)

    @classmethod
    def from_json(cls, doc: Any, defs: Sequence[AttributeDef] | None = None) -> ProjectContext:
        """``{"attr": value}`` or ``{"attr": {"value": value, "score": n}}``."""
        if not isinstance(doc, dict):
            raise ProcLineError("E_SCHEMA", "context must be a JSON object")
        by_name = {d.name: d for d in defs or ()}
        values: dict[str, Value] = {}
        scores: dict[str, int] = {}
        for attr, raw in sorted(doc.items()):
            if isinstance(raw, dict):
                if set(raw) - {"value", "score"} or "value" not in raw:
                    raise ProcLineError("E_SCHEMA", f"context.{attr}: expected keys value and optional score")
                score = raw.get("score", DEFAULT_SCORE)
                if not isinstance(score, int) or isinstance(score, bool) or not 1 <= score <= 9:
                    raise ProcLineError("E_SCHEMA", f"context.{attr}.score must be an integer in 1..9")
                scores[attr] = score
                raw = raw["value"]
            if by_name:
                if attr not in by_name:
                    raise ProcLineError("E_UNDECLARED", f"context attribute {attr!r} is not declared")
                values[attr] = canonical_value(by_name[attr], raw)
            elif isinstance(raw, list):
                values[attr] = frozenset(str(v) for v in raw)
            elif isinstance(raw, (str, int, float, bool)):
                values[attr] = raw.lower() if isinstance(raw, str) else raw  # type: ignore[assignment]
            else:
                raise ProcLineError("E_SCHEMA", f"context.{attr}: unsupported value {raw!r}")
        return cls(values, scores)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for attr in sorted(self.values):
            value = self.values[attr]
            value = sorted(value) if isinstance(value, frozenset) else value
            out[attr] = {"value": value, "score": self.scores[attr]} if attr in self.scores else value
        return out


# -- evaluation --------------------------------------------------------------


def _as_bool(v: Any) -> bool | None:
    if isinstance(v, bool):
        return v
    if isinstance(v, str):
        folded = v.casefold()
        if folded in TRUE_WORDS:
            return True
        if folded in FALSE_WORDS:
            return False
    return None


def _as_number(v: Any) -> int | float | None:
    if isinstance(v, bool):
        return None
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str):
        if INT_RE.fullmatch(v.strip()):
            return int(v)
        if FLOAT_RE.fullmatch(v.strip()):
            return float(v)
    return None


def _equal(actual: Any, expected: Any) -> bool:
    if isinstance(actual, frozenset):
        return any(_equal(member, expected) for member in actual)
    if isinstance(actual, bool) or isinstance(expected, bool):
        return _as_bool(actual) is not None and _as_bool(actual) == _as_bool(expected)
    if isinstance(actual, str) and isinstance(expected, str):
        return actual.casefold() == expected.casefold()
    a, b = _as_number(actual), _as_number(expected)
    if a is not None and b is not None:
        return a == b
    return str(actual).casefold() == str(expected).casefold()


def _compare(actual: Any, op: str, expected: Any) -> bool:
    if op == "==":
        return _equal(actual, expected)
    if op == "!=":
        return not _equal(actual, expected)
    a, b = _as_number(actual), _as_number(expected)
    if a is None or b is None:
        raise ProcLineError("E_SCALE", f"ordered comparison needs numbers, got {actual!r} {op} {expected!r}")
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _values_of(ctx: ProjectContext | Mapping[str, Value]) -> Mapping[str, Value]:
    return ctx.values if isinstance(ctx, ProjectContext) else ctx


def eval_condition(cond: Condition | None, ctx: ProjectContext | Mapping[str, Value]) -> bool:
    """Two-valued evaluation. Every referenced attribute must be bound, even
    where short-circuiting would skip it (E_UNBOUND)."""
    values = _values_of(ctx)
    missing = sorted(condition_attributes(cond) - set(values))
    if missing:
        raise ProcLineError("E_UNBOUND", f"context does not bind {', '.join(missing)}", attributes=missing)
    return _eval(cond, values)


def _eval(cond: Condition | None, values: Mapping[str, Value]) -> bool:
    if cond is None:
        return True
    if isinstance(cond, Comparison):
        return _compare(values[cond.attribute], cond.op, cond.value)
    if isinstance(cond, Membership):
        return any(_equal(values[cond.attribute], v) for v in cond.values)
    if isinstance(cond, And):
        return all(_eval(c, values) for c in cond.operands)
    return any(_eval(c, values) for c in cond.operands)


def governing_score(rule: Rule, ctx: ProjectContext) -> int:
    attrs = condition_attributes(rule.condition)
    return max((ctx.score(a) for a in attrs), default=ALWAYS_SCORE)


# -- parsing -----------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # word, string, op, punct, end
    text: str
    col: int


def _tokenize(text: str, line: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RuleParseError(line, pos + 1, "token expected", text[pos])
        kind = m.lastgroup
        assert kind is not None
        if kind == "comment":
            break
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.rstrip("\n")) + 1))
    return toks


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


class _Parser:
    def __init__(self, toks: list[_Tok], line: int, defs: Mapping[str, AttributeDef] | None) -> None:
        self.toks = toks
        self.i = 0
        self.line = line
        self.defs = defs

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: str) -> RuleParseError:
        return RuleParseError(self.line, self.tok.col, expected, self.tok.text)

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def take(self, kind: str, text: str | None = None, expected: str | None = None) -> _Tok:
        if not self.at(kind, text):
            raise self.fail(expected or f"{text or kind} expected")
        tok = self.tok
        self.i += 1
        return tok

    def end(self) -> None:
        if not self.at("end"):
            raise self.fail("end of line expected")

    # rule := ID ":" ["if" cond "then"] action ("," action)*
    def rule(self) -> Rule:
        rid = self.take("word", expected="rule id expected").text
        self.take("punct", ":", "':' expected")
        cond = None
        if self.at("word", "if"):
            self.i += 1
            cond = self.cond()
            self.take("word", "then", "'then' expected")
        actions = [self.action()]
        while self.at("punct", ","):
            self.i += 1
            actions.append(self.action())
        self.end()
        return Rule(rid, cond, tuple(actions), self.line)

    def cond(self) -> Condition:
        parts = [self.conj()]
        while self.at("word", "or"):
            self.i += 1
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> Condition:
        parts = [self.atom()]
        while self.at("word", "and"):
            self.i += 1
            parts.append(self.atom())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def atom(self) -> Condition:
        if self.at("punct", "("):
            self.i += 1
            inner = self.cond()
            self.take("punct", ")", "')' expected")
            return inner
        if not self.at("word") or self.tok.text in RESERVED:
            raise self.fail("condition expected")
        attr_tok = self.take("word")
        attr = attr_tok.text
        defn = self._declared(attr, attr_tok)
        if self.at("word", "in"):
            self.i += 1
            self.take("punct", "{", "'{' expected")
            values = [self._value(defn, "==")]
            while self.at("punct", ","):
                self.i += 1
                values.append(self._value(defn, "=="))
            self.take("punct", "}", "'}' expected")
            return Membership(attr, frozenset(values))
        if not self.at("op"):
            raise self.fail("comparison operator expected")
        op_tok = self.take("op")
        if defn is not None and op_tok.text in ORDERED_OPS and defn.scale != "ordinal":
            raise RuleParseError(self.line, op_tok.col, f"ordinal attribute expected for {op_tok.text}", attr)
        return Comparison(attr, op_tok.text, self._value(defn, op_tok.text))

    def _declared(self, attr: str, tok: _Tok) -> AttributeDef | None:
        if self.defs is None:
            return None
        if attr not in self.defs:
            raise ProcLineError(
                "E_UNDECLARED", f"line {self.line}, col {tok.col}: unknown attribute {attr!r}", line=self.line
            )
        return self.defs[attr]

    def _literal(self) -> tuple[Any, _Tok]:
        if self.at("string"):
            tok = self.take("string")
            return _unquote(tok.text), tok
        if self.at("word") and self.tok.text not in RESERVED:
            tok = self.take("word")
            if INT_RE.fullmatch(tok.text):
                return int(tok.text), tok
            if FLOAT_RE.fullmatch(tok.text):
                return float(tok.text), tok
            return tok.text, tok
        raise self.fail("value expected")

    def _value(self, defn: AttributeDef | None, op: str) -> Value:
        raw, tok = self._literal()
        if defn is None:
            return raw
        try:
            if defn.scale == "id_set":
                # comparisons against a set attribute test single members
                members = canonical_value(defn, str(raw))
                if len(members) != 1:  # type: ignore[arg-type]
                    raise ProcLineError("E_SCALE", f"{raw!r} is not a single {defn.name} id")
                return next(iter(members))  # type: ignore[call-overload]
            return canonical_value(defn, raw if defn.scale == "ordinal" else str(raw))
        except ProcLineError as exc:
            raise ProcLineError("E_SCALE", f"line {self.line}, col {tok.col}: {exc.message}", line=self.line) from None

    def _element(self) -> str:
        if self.at("string"):
            return _unquote(self.take("string").text)
        return self.take("word", expected="element id expected").text

    def action(self) -> Action:
        if not self.at("word"):
            raise self.fail("action expected")
        verb = self.tok.text
        if verb not in ("include", "exclude", "resolve", "set"):
            raise self.fail("action expected")
        self.i += 1
        self.take("punct", "(", "'(' expected")
        if verb in ("include", "exclude"):
            ids = [self._element()]
            while self.at("punct", ","):
                self.i += 1
                ids.append(self._element())
            self.take("punct", ")", "')' expected")
            return Include(tuple(ids)) if verb == "include" else Exclude(tuple(ids))
        if verb == "resolve":
            target = self.take("word", expected="variation point id expected").text
            self.take("punct", ")", "')' expected")
            return Resolve(target)
        name_tok = self.tok
        if not self.at("word") or not PARAM_RE.fullmatch(name_tok.text):
            raise self.fail("parameter name expected")
        self.i += 1
        self.take("punct", ",", "',' expected")
        value, _ = self._literal()
        self.take("punct", ")", "')' expected")
        return SetParam(name_tok.text, value)


def _def_map(defs: Iterable[AttributeDef] | None) -> dict[str, AttributeDef] | None:
    return None if defs is None else {d.name: d for d in defs}


def parse_rules(text: str, defs: Iterable[AttributeDef] | None = None) -> RuleSet:
    """Parse rule text. With ``defs`` given, attributes must be declared and
    literals are coerced onto the attribute scales; without, literals are kept
    as written."""
    dmap = _def_map(defs)
    rules: list[Rule] = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokenize(raw, lineno)
        if toks[0].kind == "end":
            continue
        rule = _Parser(toks, lineno, dmap).rule()
        if rule.id in seen:
            raise ProcLineError(
                "E_DUP_RULE", f"line {lineno}: rule {rule.id} already defined on line {seen[rule.id]}", line=lineno
            )
        seen[rule.id] = lineno
        rules.append(rule)
    return RuleSet(tuple(rules))


def parse_condition(text: str, defs: Iterable[AttributeDef] | None = None) -> Condition:
    """Parse a bare condition, as used in capability mappings and constraints."""
    parser = _Parser(_tokenize(text, 1), 1, _def_map(defs))
    cond = parser.cond()
    parser.end()
    return cond


# -- printing ----------------------------------------------------------------


def _fmt_word(text: str) -> str:
    if WORD_RE.fullmatch(text) and text not in RESERVED and not INT_RE.fullmatch(text) and not FLOAT_RE.fullmatch(text):
        return text
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fmt_value(v: Any) -> str:
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (int, float)):
        return repr(v)
    return _fmt_word(str(v))


def _value_sort_key(v: Any) -> tuple[str, str]:
    return (type(v).__name__, _fmt_value(v))


def print_condition(cond: Condition) -> str:
    if isinstance(cond, Comparison):
        return f"{cond.attribute} {cond.op} {_fmt_value(cond.value)}"
    if isinstance(cond, Membership):
        inner = ", ".join(_fmt_value(v) for v in sorted(cond.values, key=_value_sort_key))
        return f"{cond.attribute} in {{{inner}}}"
    if isinstance(cond, And):
        # nested groups keep their parentheses so reparsing gives the same tree
        return " and ".join(
            f"({print_condition(c)})" if isinstance(c, (And, Or)) else print_condition(c) for c in cond.operands
        )
    return " or ".join(f"({print_condition(c)})" if isinstance(c, Or) else print_condition(c) for c in cond.operands)


def _fmt_action(action: Action) -> str:
    if isinstance(action, Include):
        return f"include({', '.join(map(_fmt_word, action.elements))})"
    if isinstance(action, Exclude):
        return f"exclude({', '.join(map(_fmt_word, action.elements))})"
    if isinstance(action, Resolve):
        return f"resolve({action.target})"
    return f"set({action.name}, {_fmt_value(action.value)})"


def print_rule(rule: Rule) -> str:
    head = f"{rule.id}: "
    if rule.condition is not None:
        head += f"if {print_condition(rule.condition)} then "
    return head + ", ".join(_fmt_action(a) for a in rule.actions)


def print_rules(ruleset: RuleSet) -> str:
    return "".join(print_rule(r) + "\n" for r in ruleset.rules)
