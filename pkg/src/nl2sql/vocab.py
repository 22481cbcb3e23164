"""Vocabularies: question/label tokens and the global table/column spaces.

The token vocabulary starts with stable reserved ids (padding, unknown,
the closed POS/dependency label sets, column-type literals) followed by
corpus tokens in first-occurrence order, so the same corpus always maps to
the same ids.  POS and dependency labels are namespaced (``pos:AUX`` vs
``dep:AUX``) so same-named labels from different families do not collide.

Selection heads and the decoder's action space are sized by corpus-global
table/column vocabularies keyed per schema object (``db.table`` and
``db.table.column``); per-example masks restrict them to one database.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .schema import Schema

PAD = "<pad>"
UNK = "<unk>"

POS_TAGS = (
    "ADJ", "ADV", "INTJ", "NOUN", "PROPN", "VERB",
    "ADP", "AUX", "CCONJ", "DET", "NUM",
)

DEP_TAGS = (
    "ACL", "ADVCL", "ADVMOD", "AMOD", "APPOS", "AUX", "CC", "CCOMP", "COMP",
    "CONJ", "COP", "CSUBJ", "DET", "IOBJ", "NMOD", "NSUBJ", "NUMMOD", "OBJ",
)

TYPE_LITERALS = ("number", "text", "time", "boolean", "others")


def pos_label(tag: str) -> str:
    return f"pos:{tag}"


def dep_label(tag: str) -> str:
    return f"dep:{tag}"


def type_label(name: str) -> str:
    return f"type:{name}"


def name_tokens(identifier: str) -> list[str]:
    """Split a table/column identifier into its name tokens."""
    return [t for t in identifier.lower().replace("_", " ").split() if t]


@dataclass
class Vocabulary:
    """Dense token -> id map with reserved ids up front."""

    ids: dict[str, int]

    @property
    def size(self) -> int:
        return len(self.ids)

    def lookup(self, token: str) -> int:
        return self.ids.get(token, self.ids[UNK])

    def __contains__(self, token: str) -> bool:
        return token in self.ids

    @classmethod
    def reserved(cls) -> "Vocabulary":
        vocab = cls({PAD: 0, UNK: 1})
        for tag in POS_TAGS:
            vocab._add(pos_label(tag))
        for tag in DEP_TAGS:
            vocab._add(dep_label(tag))
        for name in TYPE_LITERALS:
            vocab._add(type_label(name))
        return vocab

    def _add(self, token: str) -> int:
        if token not in self.ids:
            self.ids[token] = len(self.ids)
        return self.ids[token]


def build_vocab(annotations, schemas: dict[str, Schema]) -> Vocabulary:
    """Vocabulary over question tokens plus schema name tokens.

    Deterministic given iteration order of `annotations` and `schemas`.
    """
    items = list(annotations)
    if not items and not schemas:
        raise ValueError("empty corpus")
    vocab = Vocabulary.reserved()
    for ann in items:
        for tok in ann.tokens:
            vocab._add(tok.lower())
    for schema in schemas.values():
        for table in schema.tables:
            for tok in name_tokens(table.name):
                vocab._add(tok)
        for col in schema.columns:
            for tok in name_tokens(col.name):
                vocab._add(tok)
    return vocab


@dataclass
class SchemaVocabulary:
    """Global ids for every table and column across a corpus of schemas."""

    table_keys: list[str] = field(default_factory=list)
    column_keys: list[str] = field(default_factory=list)
    # db_id -> global ids in schema order
    db_tables: dict[str, list[int]] = field(default_factory=dict)
    db_columns: dict[str, list[int]] = field(default_factory=dict)
    column_table: list[int] = field(default_factory=list)  # column gid -> table gid

    @classmethod
    def build(cls, schemas: dict[str, Schema]) -> "SchemaVocabulary":
        sv = cls()
        for db_id, schema in schemas.items():
            t_gids = []
            for t in schema.tables:
                t_gids.append(len(sv.table_keys))
                sv.table_keys.append(f"{db_id}.{t.name}")
            c_gids = []
            for c in schema.columns:
                c_gids.append(len(sv.column_keys))
                sv.column_keys.append(f"{db_id}.{schema.tables[c.table].name}.{c.name}")
                sv.column_table.append(t_gids[c.table])
            sv.db_tables[db_id] = t_gids
            sv.db_columns[db_id] = c_gids
        return sv

    @property
    def n_tables(self) -> int:
        return len(self.table_keys)

    @property
    def n_columns(self) -> int:
        return len(self.column_keys)

    def table_gid(self, db_id: str, local: int) -> int:
        return self.db_tables[db_id][local]

    def column_gid(self, db_id: str, local: int) -> int:
        return self.db_columns[db_id][local]

    def table_local(self, db_id: str, gid: int) -> int:
        return self.db_tables[db_id].index(gid)

    def column_local(self, db_id: str, gid: int) -> int:
        return self.db_columns[db_id].index(gid)

    def to_json(self) -> dict:
        return {
            "table_keys": self.table_keys,
            "column_keys": self.column_keys,
            "db_tables": self.db_tables,
            "db_columns": self.db_columns,
            "column_table": self.column_table,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SchemaVocabulary":
        return cls(
            table_keys=list(obj["table_keys"]),
            column_keys=list(obj["column_keys"]),
            db_tables={k: list(v) for k, v in obj["db_tables"].items()},
            db_columns={k: list(v) for k, v in obj["db_columns"].items()},
            column_table=list(obj["column_table"]),
        )
