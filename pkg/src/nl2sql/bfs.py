"""BFS-canonical serialization of trees into adjacency-vector sequences.

A tree with nodes ordered breadth-first (children in their parent's
right-hand-side order) maps to one binary adjacency vector per non-root
node: the node at BFS position ``i`` (0-indexed) gets a vector of length
``min(i, M)`` over the previous ``min(i, M)`` positions, most recent last,
with a single 1 at its parent.  ``M`` is the window size; a parent farther
back than ``M`` positions cannot be represented and raises
:class:`WindowOverflowError`.

For the decoder the same vectors are embedded into fixed-width rows of
length ``M``, right-aligned (index ``M-1`` is the immediately preceding
position) and zero padded on the left; the root row is all zeros.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grammar import Ast, COLUMN_KIND, TABLE_KIND, VALUE_KIND


class WindowOverflowError(ValueError):
    """A parent lies outside the adjacency window."""


class SequenceError(ValueError):
    """An adjacency-vector sequence cannot encode a tree."""


@dataclass
class BfsSequence:
    """Adjacency vectors under BFS ordering; ``order[p]`` is the node at
    BFS position ``p`` and ``vectors[j]`` belongs to position ``j + 1``."""

    order: list[int]
    vectors: list[np.ndarray]
    window: int

    def to_json(self) -> list[list[int]]:
        return [[int(b) for b in vec] for vec in self.vectors]


def tree_bfs_order(children: Sequence[Sequence[int]], root: int) -> list[int]:
    order = []
    queue = deque([root])
    while queue:
        idx = queue.popleft()
        order.append(idx)
        queue.extend(children[idx])
    return order


def tree_to_sequence(
    children: Sequence[Sequence[int]], root: int, window: int
) -> BfsSequence:
    if window < 1:
        raise ValueError("window must be >= 1")
    order = tree_bfs_order(children, root)
    pos = {node: p for p, node in enumerate(order)}
    parent_pos: dict[int, int] = {}
    for node, kids in enumerate(children):
        for c in kids:
            parent_pos[pos[c]] = pos[node]
    vectors = []
    for i in range(1, len(order)):
        width = min(i, window)
        p = parent_pos[i]
        if i - p > window:
            raise WindowOverflowError(
                f"parent of BFS position {i} is {i - p} steps back (window {window})"
            )
        vec = np.zeros(width, dtype=np.int8)
        vec[width - (i - p)] = 1
        vectors.append(vec)
    return BfsSequence(order, vectors, window)


@dataclass
class TreeSkeleton:
    kinds: list
    children: list[list[int]]
    root: int = 0


def sequence_to_tree(seq: BfsSequence, kinds: Sequence | None = None) -> TreeSkeleton:
    """Rebuild the tree from adjacency vectors; node ids are BFS positions."""
    n = len(seq.vectors) + 1
    kinds = list(kinds) if kinds is not None else [None] * n
    if len(kinds) != n:
        raise SequenceError(f"{n} nodes but {len(kinds)} kinds")
    children: list[list[int]] = [[] for _ in range(n)]
    for j, vec in enumerate(seq.vectors):
        i = j + 1
        width = min(i, seq.window)
        if len(vec) != width:
            raise SequenceError(f"vector {j} has length {len(vec)}, expected {width}")
        ones = [k for k, b in enumerate(vec) if b == 1]
        if len(ones) != 1:
            raise SequenceError(f"vector {j} must have exactly one parent bit set")
        parent = i - (width - ones[0])
        children[parent].append(i)
    return TreeSkeleton(kinds, children, root=0)


# ---------------------------------------------------------------------------
# AST-level wrappers


def bfs_order(ast: Ast) -> list[int]:
    """BFS permutation over AST node indices, root first, children in
    right-hand-side order."""
    return tree_bfs_order([n.children for n in ast.nodes], ast.root)


def graph_to_sequence(ast: Ast, window: int) -> BfsSequence:
    return tree_to_sequence([n.children for n in ast.nodes], ast.root, window)


def padded_adjacency(seq: BfsSequence) -> np.ndarray:
    """Fixed-width (n, M) rows, right-aligned, zero padded; root row zero."""
    n = len(seq.order)
    out = np.zeros((n, seq.window), dtype=np.float64)
    for j, vec in enumerate(seq.vectors):
        out[j + 1, seq.window - len(vec):] = vec
    return out


# A grammar action in semantic form: ("rule", rule_id) | ("table", index)
# | ("column", index) | ("value",).
Action = tuple


@dataclass
class ActionTrace:
    """Per-BFS-position supervision: node kind, windowed adjacency row and
    the grammar action that expands the node."""

    kinds: list[str]
    adjacency: np.ndarray  # (n, window) float64
    actions: list[Action]
    window: int

    def __len__(self) -> int:
        return len(self.kinds)


def derive_trace(ast: Ast, window: int) -> ActionTrace:
    """Gold action trace of a complete AST in BFS order.

    Raises WindowOverflowError when any parent lies outside the window; such
    examples cannot be used as supervision.
    """
    seq = graph_to_sequence(ast, window)
    kinds: list[str] = []
    actions: list[Action] = []
    for idx in seq.order:
        node = ast.nodes[idx]
        kinds.append(node.kind)
        if node.kind == TABLE_KIND:
            actions.append(("table", node.table))
        elif node.kind == COLUMN_KIND:
            actions.append(("column", node.column))
        elif node.kind == VALUE_KIND:
            actions.append(("value",))
        else:
            actions.append(("rule", node.rule_id))
    return ActionTrace(kinds, padded_adjacency(seq), actions, window)
