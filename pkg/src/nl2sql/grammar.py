"""Context-free SQL grammar: rules, grammar actions, and typed ASTs.

The grammar-definition format is line oriented::

    Lhs := sym sym ...

Alternatives either repeat the Lhs on another line or use ``|`` inline; an
empty right-hand side denotes the empty expansion.  Keywords are quoted
(``'SELECT'``), the three terminal kinds are written ``<table_id>``,
``<column_id>`` and ``<value>``.  Rule ids are dense and follow declaration
order, so loading the same definition twice yields identical ids.

An AST node is either a nonterminal carrying the rule applied at it, whose
children mirror the rule's non-keyword right-hand symbols in order, or a
terminal carrying a table index, a column index, or the value placeholder.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .schema import Schema

# Symbol roles on a rule's right-hand side.
NONTERMINAL = "nt"
KEYWORD = "kw"
TERMINAL = "term"

TABLE_KIND = "table_id"
COLUMN_KIND = "column_id"
VALUE_KIND = "value"
TERMINAL_KINDS = (TABLE_KIND, COLUMN_KIND, VALUE_KIND)

# Aggregate keywords render with no space before their opening paren.
AGGREGATE_KEYWORDS = frozenset({"MAX", "MIN", "COUNT", "SUM", "AVG"})


class GrammarError(ValueError):
    """Raised for ill-formed grammar definitions or missing rules."""


class AstError(ValueError):
    """Raised when a tree violates the AST invariants."""


class Sym(NamedTuple):
    role: str  # NONTERMINAL | KEYWORD | TERMINAL
    text: str  # nonterminal name, keyword text, or terminal kind


@dataclass(frozen=True)
class GrammarRule:
    rule_id: int
    lhs: str
    rhs: tuple[Sym, ...]

    @property
    def child_kinds(self) -> tuple[str, ...]:
        """Kinds of the AST children this rule produces (keywords excluded)."""
        return tuple(s.text for s in self.rhs if s.role != KEYWORD)

    def __str__(self) -> str:
        parts = []
        for s in self.rhs:
            if s.role == KEYWORD:
                parts.append(f"'{s.text}'")
            elif s.role == TERMINAL:
                parts.append(f"<{s.text}>")
            else:
                parts.append(s.text)
        return f"{self.lhs} := {' '.join(parts)}"


def _parse_symbol(tok: str) -> Sym:
    if tok.startswith("'") and tok.endswith("'") and len(tok) >= 3:
        return Sym(KEYWORD, tok[1:-1])
    if tok.startswith("<") and tok.endswith(">"):
        kind = tok[1:-1]
        if kind not in TERMINAL_KINDS:
            raise GrammarError(f"unknown terminal kind {tok}")
        return Sym(TERMINAL, kind)
    if not tok.replace("_", "").isalnum():
        raise GrammarError(f"bad symbol {tok!r}")
    return Sym(NONTERMINAL, tok)


class Grammar:
    """An immutable rule table with dense ids and a fixed node-kind set."""

    def __init__(self, rules: list[tuple[str, tuple[Sym, ...]]]):
        if not rules:
            raise GrammarError("empty grammar")
        self.rules: list[GrammarRule] = []
        self.rules_by_lhs: dict[str, list[GrammarRule]] = {}
        self._index: dict[tuple[str, tuple[Sym, ...]], GrammarRule] = {}
        for lhs, rhs in rules:
            if (lhs, rhs) in self._index:
                raise GrammarError(f"duplicate rule: {lhs} := {rhs}")
            rule = GrammarRule(len(self.rules), lhs, rhs)
            self.rules.append(rule)
            self.rules_by_lhs.setdefault(lhs, []).append(rule)
            self._index[(lhs, rhs)] = rule
        for rule in self.rules:
            for sym in rule.rhs:
                if sym.role == NONTERMINAL and sym.text not in self.rules_by_lhs:
                    raise GrammarError(
                        f"undefined nonterminal {sym.text!r} in rule {rule}"
                    )
        self.start = self.rules[0].lhs
        self.nonterminals: tuple[str, ...] = tuple(self.rules_by_lhs)
        # Node-kind vocabulary: nonterminals in declaration order, then terminals.
        self.kinds: tuple[str, ...] = self.nonterminals + TERMINAL_KINDS
        self.kind_ids: dict[str, int] = {k: i for i, k in enumerate(self.kinds)}
        self._min_depth = self._compute_min_depths()

    def __len__(self) -> int:
        return len(self.rules)

    def rule(self, lhs: str, signature: str) -> GrammarRule:
        """Look up a rule by its textual right-hand side, e.g. ``"'WHERE' Cond"``."""
        rhs = tuple(_parse_symbol(t) for t in signature.split())
        try:
            return self._index[(lhs, rhs)]
        except KeyError:
            raise GrammarError(f"grammar has no rule {lhs} := {signature}") from None

    def _compute_min_depths(self) -> dict[str, int]:
        # Minimum derivation depth per nonterminal (terminals and keyword-only
        # expansions have depth 1), used to keep sampling within a budget.
        depth = {nt: None for nt in self.nonterminals}
        changed = True
        while changed:
            changed = False
            for rule in self.rules:
                ds = []
                for sym in rule.rhs:
                    if sym.role == TERMINAL:
                        ds.append(1)
                    elif sym.role == NONTERMINAL:
                        d = depth[sym.text]
                        if d is None:
                            break
                        ds.append(d)
                else:
                    cand = 1 + max(ds, default=0)
                    if depth[rule.lhs] is None or cand < depth[rule.lhs]:
                        depth[rule.lhs] = cand
                        changed = True
        missing = [nt for nt, d in depth.items() if d is None]
        if missing:
            raise GrammarError(f"nonterminals cannot terminate: {missing}")
        return depth

    def min_depth(self, kind: str) -> int:
        if kind in TERMINAL_KINDS:
            return 1
        return self._min_depth[kind]


def load_grammar(text: str) -> Grammar:
    """Parse a grammar definition; rule ids follow declaration order."""
    rules: list[tuple[str, tuple[Sym, ...]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":=" not in line:
            raise GrammarError(f"line {lineno}: expected 'Lhs := ...' in {line!r}")
        lhs_text, rhs_text = line.split(":=", 1)
        lhs = lhs_text.strip()
        if not lhs or not lhs.replace("_", "").isalnum():
            raise GrammarError(f"line {lineno}: bad left-hand side {lhs!r}")
        for alt in rhs_text.split("|"):
            try:
                rhs = tuple(_parse_symbol(tok) for tok in alt.split())
            except GrammarError as exc:
                raise GrammarError(f"line {lineno}: {exc}") from None
            rules.append((lhs, rhs))
    return Grammar(rules)


def default_grammar() -> Grammar:
    """The SQL grammar shipped with the package (cached)."""
    global _DEFAULT
    if _DEFAULT is None:
        text = (
            importlib.resources.files("nl2sql.data")
            .joinpath("sql.grammar")
            .read_text(encoding="utf-8")
        )
        _DEFAULT = load_grammar(text)
    return _DEFAULT


_DEFAULT: Grammar | None = None


# ---------------------------------------------------------------------------
# AST


@dataclass
class AstNode:
    kind: str
    rule_id: int | None = None  # nonterminals: applied rule
    table: int | None = None  # table_id terminals: index into schema.tables
    column: int | None = None  # column_id terminals: index into schema.columns
    children: list[int] = field(default_factory=list)

    @property
    def is_terminal(self) -> bool:
        return self.kind in TERMINAL_KINDS


@dataclass
class Ast:
    """A grammar-conformant SQL syntax tree bound to a grammar and schema."""

    grammar: Grammar
    schema: Schema
    nodes: list[AstNode]
    root: int = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def add(self, node: AstNode) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def children(self, idx: int) -> list[int]:
        return self.nodes[idx].children


def validate_ast(ast: Ast, require_complete: bool = True) -> None:
    """Check tree shape and per-node rule conformance; raise AstError if bad."""
    n = len(ast.nodes)
    if n == 0:
        raise AstError("empty AST")
    if not 0 <= ast.root < n:
        raise AstError("root index out of range")
    parent = [-1] * n
    for i, node in enumerate(ast.nodes):
        for c in node.children:
            if not 0 <= c < n:
                raise AstError(f"child index {c} out of range at node {i}")
            if parent[c] != -1:
                raise AstError(f"node {c} has more than one parent")
            parent[c] = i
    if parent[ast.root] != -1:
        raise AstError("root has a parent")
    # Reachability doubles as the cycle check for a parent-unique graph.
    seen = set()
    stack = [ast.root]
    while stack:
        i = stack.pop()
        if i in seen:
            raise AstError("cycle detected")
        seen.add(i)
        stack.extend(ast.nodes[i].children)
    if len(seen) != n:
        raise AstError("AST is not a single tree (unreachable nodes)")

    for i, node in enumerate(ast.nodes):
        if node.is_terminal:
            if node.children:
                raise AstError(f"terminal node {i} has children")
            if node.kind == TABLE_KIND:
                if node.table is None:
                    if require_complete:
                        raise AstError(f"table node {i} has no table bound")
                elif not 0 <= node.table < len(ast.schema.tables):
                    raise AstError(f"table index {node.table} invalid at node {i}")
            elif node.kind == COLUMN_KIND:
                if node.column is None:
                    if require_complete:
                        raise AstError(f"column node {i} has no column bound")
                elif not 0 <= node.column < len(ast.schema.columns):
                    raise AstError(f"column index {node.column} invalid at node {i}")
        else:
            if node.kind not in ast.grammar.rules_by_lhs:
                raise AstError(f"unknown node kind {node.kind!r}")
            if node.rule_id is None:
                if require_complete:
                    raise AstError(f"nonterminal node {i} has no applied rule")
                continue
            if not 0 <= node.rule_id < len(ast.grammar.rules):
                raise AstError(f"rule id {node.rule_id} out of range at node {i}")
            rule = ast.grammar.rules[node.rule_id]
            if rule.lhs != node.kind:
                raise AstError(
                    f"node {i} kind {node.kind!r} does not match rule lhs {rule.lhs!r}"
                )
            got = tuple(ast.nodes[c].kind for c in node.children)
            if got != rule.child_kinds:
                raise AstError(
                    f"node {i} children {got} do not match rule rhs {rule.child_kinds}"
                )


def ast_equal(a: Ast, b: Ast) -> bool:
    """Structural equality: kinds, applied rules and terminal payloads."""

    def eq(i: int, j: int) -> bool:
        na, nb = a.nodes[i], b.nodes[j]
        if (na.kind, na.rule_id, na.table, na.column) != (
            nb.kind,
            nb.rule_id,
            nb.table,
            nb.column,
        ):
            return False
        if len(na.children) != len(nb.children):
            return False
        return all(eq(ca, cb) for ca, cb in zip(na.children, nb.children))

    return eq(a.root, b.root)


def expand(ast: Ast, idx: int, rule: GrammarRule) -> list[int]:
    """Apply `rule` at node `idx`, creating its children; returns child ids."""
    node = ast.nodes[idx]
    if node.kind != rule.lhs:
        raise AstError(f"rule {rule} cannot expand a {node.kind!r} node")
    node.rule_id = rule.rule_id
    out = []
    for kind in rule.child_kinds:
        out.append(ast.add(AstNode(kind)))
    node.children = out
    return out


def sample_ast(
    grammar: Grammar,
    schema: Schema,
    rng: np.random.Generator,
    max_depth: int = 8,
) -> Ast:
    """Sample a complete AST by uniform choice over depth-feasible rules."""
    ast = Ast(grammar, schema, [AstNode(grammar.start)])

    def fill(idx: int, depth: int) -> None:
        node = ast.nodes[idx]
        if node.kind == TABLE_KIND:
            node.table = int(rng.integers(len(schema.tables)))
            return
        if node.kind == COLUMN_KIND:
            node.column = int(rng.integers(len(schema.columns)))
            return
        if node.kind == VALUE_KIND:
            return
        feasible = [
            r
            for r in grammar.rules_by_lhs[node.kind]
            if depth + max((grammar.min_depth(k) for k in r.child_kinds), default=0)
            <= max_depth
        ]
        if not feasible:
            raise AstError(
                f"no rule for {node.kind!r} fits within depth {max_depth}"
            )
        rule = feasible[int(rng.integers(len(feasible)))]
        for child in expand(ast, idx, rule):
            fill(child, depth + 1)

    fill(ast.root, 1)
    return ast
