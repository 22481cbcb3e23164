"""SQL text front end: parsing to ASTs, canonical rendering, exact match.

Canonical text uses uppercase keywords, lowercase identifiers, fully
qualified ``table.column`` references, a single space between tokens
(modulo punctuation) and the literal ``VALUE`` for the value placeholder.
``parse_sql`` accepts any casing, bare column names resolvable within the
statement's FROM tables, and arbitrary literal constants, which all
collapse onto the canonical form, so ``render_sql(parse_sql(s))`` is the
canonical form of ``s`` and a fixpoint of the round trip.

``exact_match`` compares ASTs after sorting the order-insensitive
components — select items, conjuncts under AND, and the FROM table set —
by their rendered text.
"""

from __future__ import annotations

import re
from typing import NamedTuple

from .grammar import (
    AGGREGATE_KEYWORDS,
    Ast,
    AstNode,
    COLUMN_KIND,
    Grammar,
    GrammarRule,
    KEYWORD,
    TABLE_KIND,
    VALUE_KIND,
    default_grammar,
    validate_ast,
)
from .schema import Schema


class ParseError(ValueError):
    """A SQL parse failure, carrying the offending token span."""

    def __init__(self, message: str, span: tuple[int, int] | None = None):
        self.span = span
        if span is not None:
            message = f"{message} (at characters {span[0]}..{span[1]})"
        super().__init__(message)


class Token(NamedTuple):
    kind: str  # NAME | NUMBER | STRING | OP | EOF
    text: str
    start: int
    end: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<string>'[^']*'|"[^"]*")
  | (?P<op><=|>=|!=|[=<>(),.*])
    """,
    re.VERBOSE,
)

_KEYWORDS = frozenset(
    """SELECT DISTINCT FROM JOIN ON WHERE AND OR NOT IN LIKE BETWEEN
    GROUP BY HAVING ORDER ASC DESC LIMIT UNION INTERSECT EXCEPT
    MAX MIN COUNT SUM AVG""".split()
)


def tokenize(sql: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(sql):
        m = _TOKEN_RE.match(sql, pos)
        if m is None:
            raise ParseError(f"unexpected character {sql[pos]!r}", (pos, pos + 1))
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        kind = m.lastgroup.upper()
        out.append(Token(kind, m.group(), m.start(), m.end()))
    out.append(Token("EOF", "", len(sql), len(sql)))
    return out


class _Parser:
    """Recursive-descent parser for the shipped SQL grammar subset."""

    def __init__(self, tokens: list[Token], grammar: Grammar, schema: Schema):
        self.tokens = tokens
        self.pos = 0
        self.grammar = grammar
        self.schema = schema
        self.ast = Ast(grammar, schema, [])

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "NAME" and tok.text.upper() in words

    def take(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == "NAME" and tok.text.upper() == word:
            return self.take()
        raise ParseError(f"expected {word}, found {tok.text or 'end of input'!r}",
                         (tok.start, tok.end))

    def expect_op(self, op: str) -> Token:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == op:
            return self.take()
        raise ParseError(f"expected {op!r}, found {tok.text or 'end of input'!r}",
                         (tok.start, tok.end))

    # -- node helpers -------------------------------------------------------

    def node(self, kind: str, signature: str, children: list[int]) -> int:
        rule = self.grammar.rule(kind, signature)
        idx = self.ast.add(AstNode(kind, rule_id=rule.rule_id, children=children))
        return idx

    def table_node(self, tok: Token) -> tuple[int, int]:
        ti = self.schema.table_index(tok.text)
        if ti is None:
            raise ParseError(f"unknown table {tok.text!r}", (tok.start, tok.end))
        return self.ast.add(AstNode(TABLE_KIND, table=ti)), ti

    def value_node(self) -> int:
        tok = self.peek()
        ok = tok.kind in ("NUMBER", "STRING") or (
            tok.kind == "NAME" and tok.text.upper() == "VALUE"
        )
        if not ok:
            raise ParseError(f"expected a literal value, found {tok.text!r}",
                             (tok.start, tok.end))
        self.take()
        return self.ast.add(AstNode(VALUE_KIND))

    # -- column references --------------------------------------------------

    def column_ref(self, scope: list[int] | None, pending: list | None) -> int:
        """Parse ``name`` or ``table.name``; bare names resolve in `scope`.

        When scope is not yet known (select list before FROM), bare refs are
        appended to `pending` as (node, token) and patched later.
        """
        tok = self.peek()
        if tok.kind != "NAME" or tok.text.upper() in _KEYWORDS:
            raise ParseError(f"expected a column reference, found {tok.text!r}",
                             (tok.start, tok.end))
        self.take()
        if self.peek().kind == "OP" and self.peek().text == ".":
            self.take()
            ctok = self.peek()
            if ctok.kind != "NAME":
                raise ParseError("expected a column name after '.'",
                                 (ctok.start, ctok.end))
            self.take()
            ti = self.schema.table_index(tok.text)
            if ti is None:
                raise ParseError(f"unknown table {tok.text!r}", (tok.start, tok.end))
            ci = self.schema.column_index(ti, ctok.text)
            if ci is None:
                raise ParseError(
                    f"table {tok.text!r} has no column {ctok.text!r}",
                    (ctok.start, ctok.end),
                )
            return self.ast.add(AstNode(COLUMN_KIND, column=ci))
        idx = self.ast.add(AstNode(COLUMN_KIND))
        if scope is None:
            pending.append((idx, tok))
        else:
            self.ast.nodes[idx].column = self.resolve_bare(tok, scope)
        return idx

    def resolve_bare(self, tok: Token, scope: list[int]) -> int:
        hits = []
        for ti in dict.fromkeys(scope):
            ci = self.schema.column_index(ti, tok.text)
            if ci is not None:
                hits.append(ci)
        if not hits:
            raise ParseError(f"cannot resolve column {tok.text!r}",
                             (tok.start, tok.end))
        if len(hits) > 1:
            raise ParseError(
                f"ambiguous column {tok.text!r}: qualify it with a table name",
                (tok.start, tok.end),
            )
        return hits[0]

    # -- grammar productions ------------------------------------------------

    def parse_root(self) -> int:
        q = self.parse_query()
        tok = self.peek()
        if tok.kind != "EOF":
            raise ParseError(f"unsupported construct {tok.text!r}",
                             (tok.start, tok.end))
        return self.node("Root", "Query", [q])

    def parse_query(self) -> int:
        s = self.parse_select_stmt()
        for word in ("UNION", "INTERSECT", "EXCEPT"):
            if self.at_keyword(word):
                self.take()
                rest = self.parse_query()
                return self.node("Query", f"SelectStmt '{word}' Query", [s, rest])
        return self.node("Query", "SelectStmt", [s])

    def parse_select_stmt(self) -> int:
        self.expect_keyword("SELECT")
        if self.at_keyword("DISTINCT"):
            self.take()
            distinct = self.node("Distinct", "'DISTINCT'", [])
        else:
            distinct = self.node("Distinct", "", [])

        pending: list[tuple[int, Token]] = []
        items = [self.parse_select_item(pending)]
        while self.peek().kind == "OP" and self.peek().text == ",":
            self.take()
            items.append(self.parse_select_item(pending))

        self.expect_keyword("FROM")
        ttok = self.peek()
        if ttok.kind != "NAME" or ttok.text.upper() in _KEYWORDS:
            raise ParseError(f"expected a table name, found {ttok.text!r}",
                             (ttok.start, ttok.end))
        self.take()
        first_table, ti = self.table_node(ttok)
        scope = [ti]

        join_parts: list[tuple[int, int, int]] = []
        while self.at_keyword("JOIN"):
            self.take()
            jtok = self.peek()
            if jtok.kind != "NAME" or jtok.text.upper() in _KEYWORDS:
                raise ParseError(f"expected a table name, found {jtok.text!r}",
                                 (jtok.start, jtok.end))
            self.take()
            jnode, ji = self.table_node(jtok)
            scope.append(ji)
            self.expect_keyword("ON")
            c1 = self.column_ref(scope, None)
            self.expect_op("=")
            c2 = self.column_ref(scope, None)
            join_parts.append((jnode, c1, c2))

        for idx, tok in pending:
            self.ast.nodes[idx].column = self.resolve_bare(tok, scope)

        joins = self.node("Joins", "", [])
        for jnode, c1, c2 in reversed(join_parts):
            joins = self.node(
                "Joins",
                "'JOIN' <table_id> 'ON' <column_id> '=' <column_id> Joins",
                [jnode, c1, c2, joins],
            )

        where = self.parse_where(scope)
        group = self.parse_group(scope)
        order = self.parse_order(scope)

        select_list = self.build_select_list(items)
        return self.node(
            "SelectStmt",
            "'SELECT' Distinct SelectList 'FROM' <table_id> Joins Where Group Order",
            [distinct, select_list, first_table, joins, where, group, order],
        )

    def build_select_list(self, items: list[int]) -> int:
        lst = self.node("SelectList", "SelectItem", [items[-1]])
        for item in reversed(items[:-1]):
            lst = self.node("SelectList", "SelectItem ',' SelectList", [item, lst])
        return lst

    def parse_select_item(self, pending: list) -> int:
        if self.at_keyword(*AGGREGATE_KEYWORDS) and self.peek(1).text == "(":
            agg = self.parse_agg_expr(None, pending)
            return self.node("SelectItem", "AggExpr", [agg])
        col = self.column_ref(None, pending)
        return self.node("SelectItem", "<column_id>", [col])

    def parse_agg_expr(self, scope: list[int] | None, pending: list | None) -> int:
        fn = self.take().text.upper()
        op = self.node("AggOp", f"'{fn}'", [])
        self.expect_op("(")
        if self.peek().kind == "OP" and self.peek().text == "*":
            self.take()
            arg = self.node("AggArg", "'*'", [])
        else:
            col = self.column_ref(scope, pending)
            arg = self.node("AggArg", "<column_id>", [col])
        self.expect_op(")")
        return self.node("AggExpr", "AggOp '(' AggArg ')'", [op, arg])

    def parse_where(self, scope: list[int]) -> int:
        if not self.at_keyword("WHERE"):
            return self.node("Where", "", [])
        self.take()
        cond = self.parse_cond(scope)
        return self.node("Where", "'WHERE' Cond", [cond])

    def parse_cond(self, scope: list[int]) -> int:
        left = self.parse_and_cond(scope)
        if self.at_keyword("OR"):
            self.take()
            rest = self.parse_cond(scope)
            return self.node("Cond", "AndCond 'OR' Cond", [left, rest])
        return self.node("Cond", "AndCond", [left])

    def parse_and_cond(self, scope: list[int]) -> int:
        pred = self.parse_pred(scope)
        if self.at_keyword("AND"):
            self.take()
            rest = self.parse_and_cond(scope)
            return self.node("AndCond", "Pred 'AND' AndCond", [pred, rest])
        return self.node("AndCond", "Pred", [pred])

    def parse_pred(self, scope: list[int]) -> int:
        if self.at_keyword("NOT"):
            self.take()
            inner = self.parse_pred(scope)
            return self.node("Pred", "'NOT' Pred", [inner])
        col = self.column_ref(scope, None)
        tok = self.peek()
        if self.at_keyword("LIKE"):
            self.take()
            val = self.value_node()
            return self.node("Pred", "<column_id> 'LIKE' <value>", [col, val])
        if self.at_keyword("IN"):
            self.take()
            self.expect_op("(")
            sub = self.parse_select_stmt()
            self.expect_op(")")
            return self.node("Pred", "<column_id> 'IN' '(' SelectStmt ')'", [col, sub])
        if self.at_keyword("BETWEEN"):
            self.take()
            lo = self.value_node()
            self.expect_keyword("AND")
            hi = self.value_node()
            return self.node(
                "Pred", "<column_id> 'BETWEEN' <value> 'AND' <value>", [col, lo, hi]
            )
        if tok.kind == "OP" and tok.text in ("=", "!=", "<", ">", "<=", ">="):
            self.take()
            cmp_op = self.node("CmpOp", f"'{tok.text}'", [])
            operand = self.parse_operand(scope)
            return self.node("Pred", "<column_id> CmpOp Operand", [col, cmp_op, operand])
        raise ParseError(f"expected a comparison operator, found {tok.text!r}",
                         (tok.start, tok.end))

    def parse_operand(self, scope: list[int]) -> int:
        tok = self.peek()
        if tok.kind == "OP" and tok.text == "(":
            self.take()
            sub = self.parse_select_stmt()
            self.expect_op(")")
            return self.node("Operand", "'(' SelectStmt ')'", [sub])
        val = self.value_node()
        return self.node("Operand", "<value>", [val])

    def parse_group(self, scope: list[int]) -> int:
        if not self.at_keyword("GROUP"):
            return self.node("Group", "", [])
        self.take()
        self.expect_keyword("BY")
        cols = [self.column_ref(scope, None)]
        while self.peek().kind == "OP" and self.peek().text == ",":
            self.take()
            cols.append(self.column_ref(scope, None))
        col_list = self.node("ColumnList", "<column_id>", [cols[-1]])
        for col in reversed(cols[:-1]):
            col_list = self.node(
                "ColumnList", "<column_id> ',' ColumnList", [col, col_list]
            )
        if self.at_keyword("HAVING"):
            self.take()
            agg = self.parse_agg_expr(scope, None)
            tok = self.peek()
            if not (tok.kind == "OP" and tok.text in ("=", "!=", "<", ">", "<=", ">=")):
                raise ParseError(
                    f"expected a comparison operator, found {tok.text!r}",
                    (tok.start, tok.end),
                )
            self.take()
            cmp_op = self.node("CmpOp", f"'{tok.text}'", [])
            val = self.value_node()
            having = self.node(
                "Having", "'HAVING' AggExpr CmpOp <value>", [agg, cmp_op, val]
            )
        else:
            having = self.node("Having", "", [])
        return self.node("Group", "'GROUP' 'BY' ColumnList Having", [col_list, having])

    def parse_order(self, scope: list[int]) -> int:
        if not self.at_keyword("ORDER"):
            return self.node("Order", "", [])
        self.take()
        self.expect_keyword("BY")
        if self.at_keyword(*AGGREGATE_KEYWORDS) and self.peek(1).text == "(":
            agg = self.parse_agg_expr(scope, None)
            item = self.node("OrderItem", "AggExpr", [agg])
        else:
            col = self.column_ref(scope, None)
            item = self.node("OrderItem", "<column_id>", [col])
        if self.at_keyword("DESC"):
            self.take()
            direction = self.node("Direction", "'DESC'", [])
        else:
            if self.at_keyword("ASC"):
                self.take()
            direction = self.node("Direction", "'ASC'", [])
        if self.at_keyword("LIMIT"):
            self.take()
            val = self.value_node()
            limit = self.node("Limit", "'LIMIT' <value>", [val])
        else:
            limit = self.node("Limit", "", [])
        return self.node("Order", "'ORDER' 'BY' OrderItem Direction Limit",
                         [item, direction, limit])


def parse_sql(sql: str, schema: Schema, grammar: Grammar | None = None) -> Ast:
    """Parse SQL text into a grammar-conformant AST bound to `schema`.

    Literal constants become the ``value`` placeholder terminal.
    """
    grammar = grammar or default_grammar()
    parser = _Parser(tokenize(sql), grammar, schema)
    root = parser.parse_root()
    parser.ast.root = root
    validate_ast(parser.ast)
    return parser.ast


# ---------------------------------------------------------------------------
# Rendering


def _subtree_tokens(ast: Ast, idx: int, out: list[str]) -> None:
    node = ast.nodes[idx]
    if node.kind == TABLE_KIND:
        out.append(ast.schema.tables[node.table].name)
        return
    if node.kind == COLUMN_KIND:
        out.append(ast.schema.qualified_column(node.column))
        return
    if node.kind == VALUE_KIND:
        out.append("VALUE")
        return
    rule = ast.grammar.rules[node.rule_id]
    child_iter = iter(node.children)
    for sym in rule.rhs:
        if sym.role == KEYWORD:
            out.append(sym.text)
        else:
            _subtree_tokens(ast, next(child_iter), out)


def _join_tokens(tokens: list[str]) -> str:
    parts: list[str] = []
    prev = None
    for tok in tokens:
        if prev is None:
            parts.append(tok)
        elif tok in (",", ")"):
            parts.append(tok)
        elif prev == "(":
            parts.append(tok)
        elif tok == "(" and prev in AGGREGATE_KEYWORDS:
            parts.append(tok)
        else:
            parts.append(" " + tok)
        prev = tok
    return "".join(parts)


def render_subtree(ast: Ast, idx: int) -> str:
    toks: list[str] = []
    _subtree_tokens(ast, idx, toks)
    return _join_tokens(toks)


def render_sql(ast: Ast) -> str:
    """Render canonical SQL text; raises AstError on incomplete trees."""
    validate_ast(ast)
    return render_subtree(ast, ast.root)


# ---------------------------------------------------------------------------
# Exact match


def canonicalize(ast: Ast) -> Ast:
    """Sort order-insensitive components (select items, AND conjuncts, FROM
    tables) by rendered text, bottom-up.  Returns a new AST."""
    grammar, schema = ast.grammar, ast.schema
    new = Ast(grammar, schema, [])

    def rule_of(idx: int) -> GrammarRule:
        return grammar.rules[ast.nodes[idx].rule_id]

    def mk(kind: str, signature: str, children: list[int]) -> int:
        rule = grammar.rule(kind, signature)
        return new.add(AstNode(kind, rule_id=rule.rule_id, children=children))

    def flatten(idx: int) -> list[int]:
        # Right-recursive spines: children are [head, ..., tail-spine?].
        node = ast.nodes[idx]
        items = [node.children[0]]
        if len(node.children) > 1:
            items.extend(flatten(node.children[-1]))
        return items

    def cp(idx: int) -> int:
        node = ast.nodes[idx]
        if node.is_terminal:
            return new.add(AstNode(node.kind, table=node.table, column=node.column))

        if node.kind == "SelectStmt":
            distinct, sel_list, table, joins, where, group, order = node.children
            new_distinct = cp(distinct)

            items = [cp(i) for i in flatten(sel_list)]
            items.sort(key=lambda i: render_subtree(new, i))
            lst = mk("SelectList", "SelectItem", [items[-1]])
            for item in reversed(items[:-1]):
                lst = mk("SelectList", "SelectItem ',' SelectList", [item, lst])

            tables = [cp(table)]
            conds: list[tuple[int, int]] = []
            j = joins
            while ast.nodes[j].children:
                t, c1, c2, j = ast.nodes[j].children
                tables.append(cp(t))
                conds.append((cp(c1), cp(c2)))
            tables.sort(key=lambda i: render_subtree(new, i))
            conds.sort(
                key=lambda p: render_subtree(new, p[0]) + " = " + render_subtree(new, p[1])
            )
            new_joins = mk("Joins", "", [])
            for t, (c1, c2) in reversed(list(zip(tables[1:], conds))):
                new_joins = mk(
                    "Joins",
                    "'JOIN' <table_id> 'ON' <column_id> '=' <column_id> Joins",
                    [t, c1, c2, new_joins],
                )

            rest = [cp(where), cp(group), cp(order)]
            return mk(
                "SelectStmt",
                "'SELECT' Distinct SelectList 'FROM' <table_id> Joins Where Group Order",
                [new_distinct, lst, tables[0], new_joins] + rest,
            )

        if node.kind == "AndCond":
            preds = [cp(i) for i in flatten(idx)]
            preds.sort(key=lambda i: render_subtree(new, i))
            out = mk("AndCond", "Pred", [preds[-1]])
            for pred in reversed(preds[:-1]):
                out = mk("AndCond", "Pred 'AND' AndCond", [pred, out])
            return out

        rule = rule_of(idx)
        children = [cp(c) for c in node.children]
        return new.add(AstNode(node.kind, rule_id=rule.rule_id, children=children))

    new.root = cp(ast.root)
    return new


def exact_match(a: Ast, b: Ast) -> bool:
    """True iff the two complete ASTs are equal after canonicalization."""
    validate_ast(a)
    validate_ast(b)
    from .grammar import ast_equal

    return ast_equal(canonicalize(a), canonicalize(b))
