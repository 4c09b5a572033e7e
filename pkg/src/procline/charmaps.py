"""Product, project and process characterization maps.

Maps are read from long-format CSV (one row per entity/attribute pair) with a
header line ``entity,kind,attribute,value,likelihood,damage``. Attribute
definitions come from a JSON sidecar::

    [{"name": "complexity", "scale": {"ordinal": [1, 3]}, "applies_to": "product"},
     {"name": "collaboration_type", "scale": {"nominal": ["National", "International"]},
      "applies_to": "project"},
     {"name": "stable_requirements", "scale": "boolean", "applies_to": "product"},
     {"name": "supplier", "scale": "id_set", "applies_to": "project"}]
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, Literal, Union

from procline.errors import ProcLineError
from procline.procmodel import ID_RE, Finding, parse_json

MapKind = Literal["product", "project", "process"]
MAP_KINDS: tuple[str, ...] = ("product", "project", "process")
ENTITY_KINDS: tuple[str, ...] = ("existing", "future", "potential")
SCALES: tuple[str, ...] = ("nominal", "ordinal", "boolean", "id_set")
HEADER = ["entity", "kind", "attribute", "value", "likelihood", "damage"]

PRIORITY_MIN, PRIORITY_MAX = 1, 3
DEFAULT_PRIORITY = 2

TRUE_WORDS = frozenset({"yes", "true"})
FALSE_WORDS = frozenset({"no", "false"})

Value = Union[str, int, bool, frozenset]


@dataclass(frozen=True)
class AttributeDef:
    name: str
    scale: Literal["nominal", "ordinal", "boolean", "id_set"]
    applies_to: MapKind
    values: tuple[str, ...] = ()
    min: int | None = None
    max: int | None = None

    def __post_init__(self) -> None:
        if not ID_RE.fullmatch(self.name):
            raise ProcLineError("E_SCHEMA", f"invalid attribute name {self.name!r}")
        if self.scale not in SCALES:
            raise ProcLineError("E_SCHEMA", f"{self.name}: unknown scale {self.scale!r}")
        if self.applies_to not in MAP_KINDS:
            raise ProcLineError("E_SCHEMA", f"{self.name}: applies_to must be one of {list(MAP_KINDS)}")
        if self.scale == "nominal":
            folded = [v.strip().lower() for v in self.values]
            if not folded or len(set(folded)) != len(folded) or "" in folded:
                raise ProcLineError("E_SCHEMA", f"{self.name}: nominal values must be non-empty and unique")
            object.__setattr__(self, "values", tuple(folded))
        if self.scale == "ordinal":
            if not isinstance(self.min, int) or not isinstance(self.max, int) or self.min >= self.max:
                raise ProcLineError("E_SCHEMA", f"{self.name}: ordinal scale needs integers min < max")

    def domain(self) -> tuple[Value, ...] | None:
        """Every admissible value, or None for id_set (open domain)."""
        if self.scale == "nominal":
            return self.values
        if self.scale == "ordinal":
            assert self.min is not None and self.max is not None
            return tuple(range(self.min, self.max + 1))
        if self.scale == "boolean":
            return (False, True)
        return None


def canonical_value(defn: AttributeDef, raw: Any) -> Value:
    """Coerce a CSV cell or JSON value onto the attribute's scale (E_SCALE)."""

    def bad() -> ProcLineError:
        return ProcLineError("E_SCALE", f"{raw!r} is not a valid {defn.scale} value for {defn.name}")

    if isinstance(raw, str):
        raw = raw.strip()
    if defn.scale == "nominal":
        if not isinstance(raw, str) or raw.lower() not in defn.values:
            raise bad()
        return raw.lower()
    if defn.scale == "ordinal":
        if isinstance(raw, bool):
            raise bad()
        if isinstance(raw, str):
            try:
                raw = int(raw)
            except ValueError:
                raise bad() from None
        if not isinstance(raw, int) or not defn.min <= raw <= defn.max:  # type: ignore[operator]
            raise bad()
        return raw
    if defn.scale == "boolean":
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, str) and raw.lower() in TRUE_WORDS:
            return True
        if isinstance(raw, str) and raw.lower() in FALSE_WORDS:
            return False
        raise bad()
    # id_set
    if isinstance(raw, str):
        parts = [p.strip() for p in raw.split(";")]
    elif isinstance(raw, (list, tuple, set, frozenset)):
        parts = [str(p).strip() for p in raw]
    else:
        raise bad()
    if not parts or not all(ID_RE.fullmatch(p) for p in parts):
        raise bad()
    return frozenset(parts)


def format_value(defn: AttributeDef, value: Value) -> str:
    if defn.scale == "boolean":
        return "yes" if value else "no"
    if defn.scale == "id_set":
        return ";".join(sorted(value))  # type: ignore[arg-type]
    return str(value)


def json_value(value: Value) -> Any:
    if isinstance(value, frozenset):
        return sorted(value)
    return value


@dataclass(frozen=True)
class EntityRecord:
    entity_id: str
    entity_kind: Literal["existing", "future", "potential"]
    map_kind: MapKind


@dataclass(frozen=True)
class CharacterizationEntry:
    entity_id: str
    attribute: str
    value: Value
    likelihood: int = DEFAULT_PRIORITY
    damage: int = DEFAULT_PRIORITY


@dataclass(frozen=True)
class CharacterizationMap:
    map_kind: MapKind
    attributes: tuple[AttributeDef, ...] = ()
    entities: tuple[EntityRecord, ...] = ()
    entries: tuple[CharacterizationEntry, ...] = ()
    warnings: tuple[Finding, ...] = field(default=(), compare=False)

    def attribute(self, name: str) -> AttributeDef:
        for defn in self.attributes:
            if defn.name == name:
                return defn
        raise ProcLineError("E_UNDECLARED", f"attribute {name!r} is not declared for {self.map_kind} maps")

    def entity_ids(self) -> tuple[str, ...]:
        return tuple(e.entity_id for e in self.entities)

    def entries_for(self, entity_id: str) -> tuple[CharacterizationEntry, ...]:
        return tuple(e for e in self.entries if e.entity_id == entity_id)


def priority_score(entry: CharacterizationEntry) -> int:
    return entry.likelihood * entry.damage


def lookup(cmap: CharacterizationMap, entity_id: str, attribute: str) -> Value | None:
    cmap.attribute(attribute)
    for entry in cmap.entries:
        if entry.entity_id == entity_id and entry.attribute == attribute:
            return entry.value
    return None


def parse_attribute_defs(doc: Any) -> tuple[AttributeDef, ...]:
    if not isinstance(doc, list):
        raise ProcLineError("E_SCHEMA", "attribute definitions must be a JSON array")
    defs = []
    for i, raw in enumerate(doc):
        if not isinstance(raw, dict) or set(raw) != {"name", "scale", "applies_to"}:
            raise ProcLineError("E_SCHEMA", f"attribute[{i}] must have exactly the keys name, scale, applies_to")
        scale = raw["scale"]
        if isinstance(scale, str):
            defs.append(AttributeDef(raw["name"], scale, raw["applies_to"]))  # type: ignore[arg-type]
        elif isinstance(scale, dict) and len(scale) == 1 and "nominal" in scale and isinstance(scale["nominal"], list):
            defs.append(AttributeDef(raw["name"], "nominal", raw["applies_to"], tuple(map(str, scale["nominal"]))))
        elif isinstance(scale, dict) and len(scale) == 1 and "ordinal" in scale:
            bounds = scale["ordinal"]
            if not isinstance(bounds, list) or len(bounds) != 2:
                raise ProcLineError("E_SCHEMA", f"attribute[{i}]: ordinal scale is [min, max]")
            defs.append(AttributeDef(raw["name"], "ordinal", raw["applies_to"], (), bounds[0], bounds[1]))
        else:
            raise ProcLineError("E_SCHEMA", f"attribute[{i}]: unrecognised scale {scale!r}")
    names = [d.name for d in defs]
    if len(set(names)) != len(names):
        raise ProcLineError("E_SCHEMA", "duplicate attribute names")
    return tuple(defs)


def load_attribute_defs(text: str) -> tuple[AttributeDef, ...]:
    return parse_attribute_defs(parse_json(text))


def attribute_defs_to_json(defs: Iterable[AttributeDef]) -> list[dict[str, Any]]:
    out = []
    for d in sorted(defs, key=lambda d: d.name):
        if d.scale == "nominal":
            scale: Any = {"nominal": list(d.values)}
        elif d.scale == "ordinal":
            scale = {"ordinal": [d.min, d.max]}
        else:
            scale = d.scale
        out.append({"name": d.name, "scale": scale, "applies_to": d.applies_to})
    return out


def _priority(cell: str, line: int, column: str, warnings: list[Finding], entity: str) -> int:
    cell = cell.strip()
    if not cell:
        warnings.append(Finding("W_DEFAULT_PRIORITY", entity, f"line {line}: {column} missing, using {DEFAULT_PRIORITY}"))
        return DEFAULT_PRIORITY
    try:
        value = int(cell)
    except ValueError:
        raise ProcLineError("E_CSV", f"line {line}: {column} {cell!r} is not an integer") from None
    if not PRIORITY_MIN <= value <= PRIORITY_MAX:
        raise ProcLineError("E_SCALE", f"line {line}: {column} {value} outside {PRIORITY_MIN}..{PRIORITY_MAX}")
    return value


def load_map(csv_text: str, defs: Sequence[AttributeDef], map_kind: MapKind | None = None) -> CharacterizationMap:
    """Parse one long-format characterization map.

    ``map_kind`` is inferred from the first row's attribute when omitted.
    """
    by_name = {d.name: d for d in defs}
    try:
        rows = list(csv.reader(io.StringIO(csv_text.lstrip("\ufeff")), strict=True))
    except csv.Error as exc:
        raise ProcLineError("E_CSV", f"malformed CSV: {exc}") from None
    numbered = [(i + 1, row) for i, row in enumerate(rows) if row and any(c.strip() for c in row)]

    if numbered:
        line, header = numbered[0]
        if [c.strip() for c in header] != HEADER:
            raise ProcLineError("E_CSV", f"line {line}: header must be {','.join(HEADER)}")
        numbered = numbered[1:]

    if map_kind is None:
        if numbered and len(numbered[0][1]) == len(HEADER):
            first = numbered[0][1][2].strip()
            if first not in by_name:
                raise ProcLineError("E_UNDECLARED", f"line {numbered[0][0]}: unknown attribute {first!r}")
            map_kind = by_name[first].applies_to
        else:
            kinds = {d.applies_to for d in defs}
            map_kind = kinds.pop() if len(kinds) == 1 else "product"
    declared = tuple(sorted((d for d in defs if d.applies_to == map_kind), key=lambda d: d.name))
    declared_names = {d.name for d in declared}

    warnings: list[Finding] = []
    kinds_seen: dict[str, str] = {}
    entries: dict[tuple[str, str], CharacterizationEntry] = {}
    for line, row in numbered:
        if len(row) != len(HEADER):
            raise ProcLineError("E_CSV", f"line {line}: expected {len(HEADER)} fields, got {len(row)}")
        entity, kind, attribute, raw, likelihood, damage = (c.strip() for c in row)
        if not ID_RE.fullmatch(entity):
            raise ProcLineError("E_CSV", f"line {line}: invalid entity id {entity!r}")
        kind = kind.lower()
        if kind not in ENTITY_KINDS:
            raise ProcLineError("E_CSV", f"line {line}: entity kind must be one of {list(ENTITY_KINDS)}")
        if kinds_seen.setdefault(entity, kind) != kind:
            raise ProcLineError("E_CSV", f"line {line}: entity {entity} listed as both {kinds_seen[entity]} and {kind}")
        if attribute not in declared_names:
            where = f" (declared for {by_name[attribute].applies_to} maps)" if attribute in by_name else ""
            raise ProcLineError("E_UNDECLARED", f"line {line}: attribute {attribute!r} not declared for {map_kind} maps{where}")
        if (entity, attribute) in entries:
            raise ProcLineError("E_DUP", f"line {line}: duplicate entry for {entity}/{attribute}")
        try:
            value = canonical_value(by_name[attribute], raw)
        except ProcLineError as exc:
            raise ProcLineError("E_SCALE", f"line {line}: {exc.message}") from None
        entries[(entity, attribute)] = CharacterizationEntry(
            entity,
            attribute,
            value,
            _priority(likelihood, line, "likelihood", warnings, entity),
            _priority(damage, line, "damage", warnings, entity),
        )

    entities = tuple(EntityRecord(e, k, map_kind) for e, k in sorted(kinds_seen.items()))  # type: ignore[arg-type]
    return CharacterizationMap(
        map_kind, declared, entities, tuple(entries[k] for k in sorted(entries)), tuple(warnings)
    )


def print_map(cmap: CharacterizationMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    kinds = {e.entity_id: e.entity_kind for e in cmap.entities}
    for entry in sorted(cmap.entries, key=lambda e: (e.entity_id, e.attribute)):
        defn = cmap.attribute(entry.attribute)
        writer.writerow(
            [
                entry.entity_id,
                kinds[entry.entity_id],
                entry.attribute,
                format_value(defn, entry.value),
                entry.likelihood,
                entry.damage,
            ]
        )
    return buf.getvalue()
