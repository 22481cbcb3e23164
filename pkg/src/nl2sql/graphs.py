"""Question and schema graphs consumed by the graph encoder.

Questions arrive pre-annotated (tokens, POS tags, dependency edges) in the
JSON form ``{"tokens": [...], "pos": [...], "deps": [[head, dep, "LABEL"],
...]}``; no tagging happens here.  The annotated question becomes a Levi
graph: every dependency edge turns into a relation node adjacent to its
head and dependent tokens, and every POS tag into a relation node adjacent
to its token, leaving an undirected, unlabeled graph.

The schema graph has one node per table, per column and per column type
present, with typed undirected edges (has-column, primary-key,
foreign-key, column-type).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schema import Schema
from .vocab import (
    DEP_TAGS,
    POS_TAGS,
    Vocabulary,
    dep_label,
    name_tokens,
    pos_label,
    type_label,
)


class AnnotationError(ValueError):
    """Raised for annotations that violate the closed tag sets or indexing."""


@dataclass
class QuestionAnnotation:
    tokens: list[str]
    pos_tags: list[str]
    dep_edges: list[tuple[int, int, str]]  # (head, dependent, label)

    def validate(self) -> None:
        if not self.tokens:
            raise AnnotationError("empty question")
        if len(self.pos_tags) != len(self.tokens):
            raise AnnotationError(
                f"{len(self.tokens)} tokens but {len(self.pos_tags)} POS tags"
            )
        for tag in self.pos_tags:
            if tag not in POS_TAGS:
                raise AnnotationError(f"unknown POS tag {tag!r}")
        n = len(self.tokens)
        for head, dep, label in self.dep_edges:
            if not (0 <= head < n and 0 <= dep < n):
                raise AnnotationError(f"dependency index out of range: {(head, dep)}")
            if label not in DEP_TAGS:
                raise AnnotationError(f"unknown dependency label {label!r}")

    def to_json(self) -> dict:
        return {
            "tokens": self.tokens,
            "pos": self.pos_tags,
            "deps": [[h, d, label] for h, d, label in self.dep_edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QuestionAnnotation":
        ann = cls(
            tokens=[str(t) for t in obj["tokens"]],
            pos_tags=[str(t) for t in obj["pos"]],
            dep_edges=[(int(h), int(d), str(label)) for h, d, label in obj["deps"]],
        )
        ann.validate()
        return ann


@dataclass
class QuestionGraph:
    """Levi graph: token nodes first, then POS nodes in token order, then
    dependency-relation nodes in edge order."""

    node_ids: np.ndarray  # vocabulary id per node
    edges: list[tuple[int, int]]  # undirected, unlabeled
    n_tokens: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)


def build_question_graph(ann: QuestionAnnotation, vocab: Vocabulary) -> QuestionGraph:
    ann.validate()
    n = len(ann.tokens)
    ids = [vocab.lookup(tok.lower()) for tok in ann.tokens]
    edges: list[tuple[int, int]] = []
    for i, tag in enumerate(ann.pos_tags):
        ids.append(vocab.lookup(pos_label(tag)))
        edges.append((i, n + i))
    for k, (head, dep, label) in enumerate(ann.dep_edges):
        node = 2 * n + k
        ids.append(vocab.lookup(dep_label(label)))
        edges.append((head, node))
        edges.append((dep, node))
    return QuestionGraph(np.array(ids, dtype=np.int64), edges, n)


# Edge types of the schema graph; id 0 is reserved for the self loops the
# attention layer adds internally.
SCHEMA_EDGE_TYPES = ("self", "has_column", "is_primary_key", "is_foreign_key",
                     "column_type")
_EDGE_TYPE_ID = {name: i for i, name in enumerate(SCHEMA_EDGE_TYPES)}


@dataclass
class SchemaGraph:
    """Typed schema graph: table nodes, then column nodes, then one node per
    distinct column type present."""

    node_tokens: list[list[str]]  # name tokens per node (for embedding)
    edges: list[tuple[int, int]]
    edge_types: list[int]
    n_tables: int
    n_columns: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_tokens)


def build_schema_graph(schema: Schema) -> SchemaGraph:
    n_t = len(schema.tables)
    n_c = len(schema.columns)
    node_tokens = [name_tokens(t.name) for t in schema.tables]
    node_tokens += [name_tokens(c.name) for c in schema.columns]

    type_node: dict[str, int] = {}
    for col in schema.columns:
        if col.type not in type_node:
            type_node[col.type] = n_t + n_c + len(type_node)
            node_tokens.append([type_label(col.type)])

    edges: list[tuple[int, int]] = []
    types: list[int] = []

    def link(a: int, b: int, kind: str) -> None:
        edges.append((a, b))
        types.append(_EDGE_TYPE_ID[kind])

    for ci, col in enumerate(schema.columns):
        if not 0 <= col.table < n_t:
            raise ValueError(f"column {col.name!r} references missing table")
        link(col.table, n_t + ci, "has_column")
        link(n_t + ci, type_node[col.type], "column_type")
        if col.primary_key:
            link(n_t + ci, col.table, "is_primary_key")
    for a, b in schema.foreign_keys:
        if not (0 <= a < n_c and 0 <= b < n_c):
            raise ValueError("foreign key references a missing column")
        link(n_t + a, n_t + b, "is_foreign_key")
    return SchemaGraph(node_tokens, edges, types, n_t, n_c)
