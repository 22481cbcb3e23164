"""Relational schema model and its JSON file format.

A schema file maps each database to::

    {"tables": [{"name": ..., "columns": [{"name": ..., "type": ...,
                 "primary_key": bool}, ...]}, ...],
     "foreign_keys": [["table.column", "table.column"], ...]}

Identifiers are case-insensitive and stored lowercase.  Column types come
from a closed set.  Names colliding with SQL keywords are rejected so that
rendered queries always re-tokenize unambiguously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

COLUMN_TYPES = ("number", "text", "time", "boolean", "others")

# Keywords of the canonical SQL subset plus the literal placeholder.
RESERVED_WORDS = frozenset(
    """select distinct from join on where and or not in like between
    group by having order asc desc limit union intersect except
    max min count sum avg value""".split()
)


class SchemaError(ValueError):
    """Raised for ill-formed schema definitions."""


@dataclass(frozen=True)
class Column:
    name: str
    type: str
    table: int  # index into Schema.tables
    primary_key: bool = False


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[int, ...]  # indices into Schema.columns


@dataclass(frozen=True)
class Schema:
    db_id: str
    tables: tuple[Table, ...]
    columns: tuple[Column, ...]
    foreign_keys: tuple[tuple[int, int], ...]  # pairs of column indices

    def table_index(self, name: str) -> int | None:
        name = name.lower()
        for i, t in enumerate(self.tables):
            if t.name == name:
                return i
        return None

    def column_index(self, table: int, name: str) -> int | None:
        name = name.lower()
        for ci in self.tables[table].columns:
            if self.columns[ci].name == name:
                return ci
        return None

    def qualified_column(self, column: int) -> str:
        col = self.columns[column]
        return f"{self.tables[col.table].name}.{col.name}"


def _check_identifier(name: str, what: str) -> str:
    name = name.strip().lower()
    if not name or not name.replace("_", "").isalnum() or name[0].isdigit():
        raise SchemaError(f"invalid {what} name: {name!r}")
    if name in RESERVED_WORDS:
        raise SchemaError(f"{what} name {name!r} collides with a reserved word")
    return name


def schema_from_dict(db_id: str, obj: dict) -> Schema:
    """Build a validated Schema from its JSON representation."""
    if not obj.get("tables"):
        raise SchemaError(f"schema {db_id!r} has no tables")
    tables: list[Table] = []
    columns: list[Column] = []
    for ti, tdef in enumerate(obj["tables"]):
        tname = _check_identifier(tdef["name"], "table")
        if any(t.name == tname for t in tables):
            raise SchemaError(f"duplicate table name {tname!r}")
        col_ids = []
        for cdef in tdef.get("columns", []):
            cname = _check_identifier(cdef["name"], "column")
            ctype = cdef.get("type", "others")
            if ctype not in COLUMN_TYPES:
                raise SchemaError(f"unknown column type {ctype!r} for {tname}.{cname}")
            if any(columns[i].name == cname for i in col_ids):
                raise SchemaError(f"duplicate column {cname!r} in table {tname!r}")
            col_ids.append(len(columns))
            columns.append(Column(cname, ctype, ti, bool(cdef.get("primary_key", False))))
        if not col_ids:
            raise SchemaError(f"table {tname!r} has no columns")
        tables.append(Table(tname, tuple(col_ids)))

    schema = Schema(db_id, tuple(tables), tuple(columns), ())
    fks: list[tuple[int, int]] = []
    for pair in obj.get("foreign_keys", []):
        resolved = []
        for ref in pair:
            tname, _, cname = ref.lower().partition(".")
            ti = schema.table_index(tname)
            if ti is None:
                raise SchemaError(f"foreign key references unknown table {tname!r}")
            ci = schema.column_index(ti, cname)
            if ci is None:
                raise SchemaError(f"foreign key references unknown column {ref!r}")
            resolved.append(ci)
        fks.append((resolved[0], resolved[1]))
    return Schema(db_id, tuple(tables), tuple(columns), tuple(fks))


def load_schemas(path: str | Path) -> dict[str, Schema]:
    """Load a {db_id: schema} JSON file, preserving declaration order."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return {db_id: schema_from_dict(db_id, obj) for db_id, obj in raw.items()}


def schema_to_dict(schema: Schema) -> dict:
    return {
        "tables": [
            {
                "name": t.name,
                "columns": [
                    {
                        "name": schema.columns[ci].name,
                        "type": schema.columns[ci].type,
                        "primary_key": schema.columns[ci].primary_key,
                    }
                    for ci in t.columns
                ],
            }
            for t in schema.tables
        ],
        "foreign_keys": [
            [schema.qualified_column(a), schema.qualified_column(b)]
            for a, b in schema.foreign_keys
        ],
    }
