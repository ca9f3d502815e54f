"""Lexer and recursive-descent parser for the supported SPARQL subset.

Accepted: PREFIX, SELECT with variables and COUNT aliases, WHERE with a basic
graph pattern, GROUP BY, HAVING with one count comparison, ORDER BY.
"""
import re
from typing import Dict, List, Optional, Tuple

from ply import lex

from app.core.errors import QuerySyntaxError, UnsupportedFeatureError
from app.core.vocabulary import PREFIXES, RDF_TYPE, XSD_INTEGER
from app.schemas.graph import Iri, Literal
from app.schemas.query import (
    COMPARISON_OPERATORS,
    Count,
    CountAlias,
    Having,
    OrderCondition,
    PatternTerm,
    SelectItem,
    SelectQuery,
    TriplePattern,
    Var,
)

KEYWORDS = {
    "PREFIX", "SELECT", "WHERE", "GROUP", "BY", "HAVING", "ORDER", "ASC", "DESC", "COUNT", "AS",
}
UNSUPPORTED_KEYWORDS = {
    "OPTIONAL", "FILTER", "UNION", "MINUS", "BIND", "VALUES", "SERVICE", "GRAPH", "LIMIT",
    "OFFSET", "DISTINCT", "REDUCED", "CONSTRUCT", "ASK", "DESCRIBE", "FROM", "NAMED", "BASE",
    "SUM", "AVG", "MIN", "MAX", "SAMPLE", "GROUP_CONCAT", "EXISTS", "NOT", "INSERT", "DELETE",
}
_STRING_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "'": "'", "\\": "\\"}


class SparqlLexer:
    tokens = (
        ["IRIREF", "PNAME", "VAR", "STRING", "INTEGER", "OPERATOR", "DTYPE", "A", "UNSUPPORTED"]
        + sorted(KEYWORDS)
    )
    literals = "{}().*,;"

    t_ignore = " \t\r"
    t_ignore_COMMENT = r"\#[^\n]*"

    def t_newline(self, t):
        r"\n+"
        t.lexer.lineno += len(t.value)

    def t_IRIREF(self, t):
        r"<[^<>\"{}|^`\\\s]*>"
        t.value = t.value[1:-1]
        return t

    def t_DTYPE(self, t):
        r"\^\^"
        return t

    def t_OPERATOR(self, t):
        r">=|<=|!=|=|<|>"
        return t

    def t_VAR(self, t):
        r"[?$][A-Za-z_][A-Za-z0-9_]*"
        t.value = t.value[1:]
        return t

    def t_STRING(self, t):
        r"\"(?:[^\"\\\n]|\\.)*\""
        t.value = re.sub(
            r"\\(u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8}|.)",
            lambda m: chr(int(m.group(1)[1:], 16)) if m.group(1)[0] in "uU" and len(m.group(1)) > 1
            else _STRING_ESCAPES.get(m.group(1), m.group(1)),
            t.value[1:-1],
        )
        return t

    def t_INTEGER(self, t):
        r"[+-]?[0-9]+"
        t.value = int(t.value)
        return t

    def t_PNAME(self, t):
        r"(?:[A-Za-z_][A-Za-z0-9_\-]*)?:[A-Za-z0-9_\-]*"
        return t

    def t_NAME(self, t):
        r"[A-Za-z_][A-Za-z0-9_]*"
        upper = t.value.upper()
        if t.value == "a":
            t.type = "A"
        elif upper in KEYWORDS:
            t.type = upper
        elif upper in UNSUPPORTED_KEYWORDS:
            t.type = "UNSUPPORTED"
            t.value = upper
        else:
            raise QuerySyntaxError(f"unexpected word '{t.value}'", t.lexer.lineno, self.column(t))
        return t

    def t_error(self, t):
        raise QuerySyntaxError(f"unexpected character {t.value[0]!r}", t.lexer.lineno, self.column(t))

    def __init__(self):
        self.lexer = lex.lex(module=self, errorlog=lex.NullLogger())
        self.data = ""

    def column(self, t) -> int:
        line_start = self.data.rfind("\n", 0, t.lexpos) + 1
        return t.lexpos - line_start + 1

    def tokenize(self, data: str) -> List[lex.LexToken]:
        self.data = data
        self.lexer.lineno = 1
        self.lexer.input(data)
        return list(iter(self.lexer.token, None))


class QueryParser:
    """Recursive descent over the token list produced by SparqlLexer"""

    def __init__(self, text: str):
        self.lexer = SparqlLexer()
        self.tokens = self.lexer.tokenize(text)
        self.pos = 0
        self.text = text
        self.declared: List[Tuple[str, str]] = []
        self.prefixes: Dict[str, str] = dict(PREFIXES)

    # --- token helpers --------------------------------------------------

    def _location(self, token=None) -> Tuple[int, int]:
        if token is None:
            lines = self.text.split("\n")
            return len(lines), len(lines[-1]) + 1
        return token.lineno, self.lexer.column(token)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def peek_type(self) -> Optional[str]:
        token = self.peek()
        return token.type if token is not None else None

    def error(self, message: str, token=None) -> QuerySyntaxError:
        token = token if token is not None else self.peek()
        if token is not None and token.type == "UNSUPPORTED":
            return UnsupportedFeatureError(token.value, *self._location(token))
        if token is not None and token.type in (",", ";"):
            return UnsupportedFeatureError(f"'{token.type}' (predicate/object lists)", *self._location(token))
        found = f"'{token.value}'" if token is not None else "end of query"
        return QuerySyntaxError(f"{message}, found {found}", *self._location(token))

    def expect(self, kind: str, message: Optional[str] = None):
        token = self.peek()
        if token is None or token.type != kind:
            raise self.error(message or f"expected {kind}")
        self.pos += 1
        return token

    def accept(self, kind: str):
        if self.peek_type() == kind:
            token = self.peek()
            self.pos += 1
            return token
        return None

    # --- grammar --------------------------------------------------------

    def parse(self) -> SelectQuery:
        while self.peek_type() == "PREFIX":
            self.prefix_declaration()
        self.expect("SELECT", "expected SELECT")
        select = self.select_clause()
        self.accept("WHERE")
        self.expect("{", "expected '{'")
        patterns = self.triple_patterns()
        self.expect("}", "expected '}'")

        group_by: Tuple[Var, ...] = ()
        if self.accept("GROUP"):
            self.expect("BY", "expected BY after GROUP")
            group_by = self.variables_list()
        having = None
        if self.peek_type() == "HAVING":
            having = self.having_clause()
        order_by: Tuple[OrderCondition, ...] = ()
        if self.accept("ORDER"):
            self.expect("BY", "expected BY after ORDER")
            order_by = self.order_conditions()
        if self.peek() is not None:
            raise self.error("expected end of query")

        query = SelectQuery(
            prefixes=tuple(self.declared),
            select=select,
            patterns=patterns,
            group_by=group_by,
            having=having,
            order_by=order_by,
        )
        self.check(query)
        return query

    def prefix_declaration(self) -> None:
        self.expect("PREFIX")
        name_token = self.expect("PNAME", "expected a prefix name like 'schema:'")
        name, _, local = name_token.value.partition(":")
        if local:
            raise self.error("prefix name must end with ':'", name_token)
        iri = self.expect("IRIREF", "expected <namespace IRI>").value
        self.prefixes[name] = iri
        self.declared = [(n, i) for n, i in self.declared if n != name] + [(name, iri)]

    def select_clause(self) -> Tuple[SelectItem, ...]:
        items: List[SelectItem] = []
        while True:
            if self.peek_type() == "VAR":
                items.append(Var(self.expect("VAR").value))
            elif self.peek_type() == "(":
                self.expect("(")
                count = self.count_expression()
                self.expect("AS", "expected AS")
                alias = Var(self.expect("VAR", "expected an alias variable").value)
                self.expect(")", "expected ')'")
                items.append(CountAlias(count, alias))
            else:
                break
        if not items:
            raise self.error("expected variables after SELECT")
        return tuple(items)

    def count_expression(self) -> Count:
        self.expect("COUNT", "expected COUNT")
        self.expect("(", "expected '('")
        if self.accept("*"):
            count = Count(None)
        else:
            count = Count(Var(self.expect("VAR", "expected a variable or '*'").value))
        self.expect(")", "expected ')'")
        return count

    def term(self, position: str) -> PatternTerm:
        token = self.peek()
        kind = self.peek_type()
        if kind == "VAR":
            self.pos += 1
            return Var(token.value)
        if kind == "IRIREF":
            self.pos += 1
            return self.make_iri(token.value, token)
        if kind == "PNAME":
            self.pos += 1
            return self.resolve(token)
        if kind == "A" and position == "predicate":
            self.pos += 1
            return Iri(RDF_TYPE)
        if kind == "STRING" and position == "object":
            self.pos += 1
            datatype = None
            if self.accept("DTYPE"):
                iri_token = self.peek()
                if self.accept("IRIREF"):
                    datatype = self.make_iri(iri_token.value, iri_token).value
                else:
                    datatype = self.resolve(self.expect("PNAME", "expected a datatype IRI")).value
            return Literal(token.value, datatype)
        if kind == "INTEGER" and position == "object":
            self.pos += 1
            return Literal(str(token.value), XSD_INTEGER)
        raise self.error(f"expected a {position}")

    def make_iri(self, value: str, token) -> Iri:
        try:
            return Iri(value)
        except ValueError:
            raise QuerySyntaxError(f"'{value}' is not an absolute IRI", *self._location(token))

    def resolve(self, token) -> Iri:
        name, _, local = token.value.partition(":")
        if name not in self.prefixes:
            raise QuerySyntaxError(f"unbound prefix '{name}:'", *self._location(token))
        return self.make_iri(self.prefixes[name] + local, token)

    def triple_patterns(self) -> Tuple[TriplePattern, ...]:
        patterns = []
        while self.peek_type() not in ("}", None):
            if self.peek_type() in ("UNSUPPORTED", "{"):
                raise self.error("expected a triple pattern")
            subject = self.term("subject")
            predicate = self.term("predicate")
            obj = self.term("object")
            patterns.append(TriplePattern(subject, predicate, obj))
            if not self.accept_dot():
                break
        return tuple(patterns)

    def accept_dot(self) -> bool:
        # '.' is lexed as a literal character
        return self.accept(".") is not None

    def variables_list(self) -> Tuple[Var, ...]:
        variables = []
        while self.peek_type() == "VAR":
            variables.append(Var(self.expect("VAR").value))
        if not variables:
            raise self.error("expected variables")
        return tuple(variables)

    def having_clause(self) -> Having:
        self.expect("HAVING")
        self.expect("(", "expected '(' after HAVING")
        count = self.count_expression()
        operator = self.expect("OPERATOR", "expected a comparison operator").value
        value = self.expect("INTEGER", "expected an integer constant").value
        self.expect(")", "expected ')'")
        if operator not in COMPARISON_OPERATORS:
            raise self.error(f"unknown operator {operator}")
        return Having(count, operator, value)

    def order_conditions(self) -> Tuple[OrderCondition, ...]:
        conditions = []
        while True:
            kind = self.peek_type()
            if kind in ("ASC", "DESC"):
                self.pos += 1
                self.expect("(", f"expected '(' after {kind}")
                expression = self.order_expression()
                self.expect(")", "expected ')'")
                conditions.append(OrderCondition(expression, descending=kind == "DESC"))
            elif kind in ("VAR", "COUNT"):
                conditions.append(OrderCondition(self.order_expression()))
            else:
                break
        if not conditions:
            raise self.error("expected an ORDER BY condition")
        return tuple(conditions)

    def order_expression(self):
        if self.peek_type() == "COUNT":
            return self.count_expression()
        return Var(self.expect("VAR", "expected a variable").value)

    # --- static checks --------------------------------------------------

    def check(self, query: SelectQuery) -> None:
        bound = {var for pattern in query.patterns for var in pattern.variables}
        aliases = {item.alias for item in query.select if isinstance(item, CountAlias)}
        for var in [item for item in query.select if isinstance(item, Var)] + list(query.group_by):
            if var not in bound:
                raise QuerySyntaxError(f"variable ?{var.name} does not occur in the WHERE clause", 1, 1)
        counted = [item.count.var for item in query.select if isinstance(item, CountAlias)]
        if query.having is not None:
            counted.append(query.having.count.var)
        for var in counted:
            if var is not None and var not in bound:
                raise QuerySyntaxError(f"counted variable ?{var.name} does not occur in the WHERE clause", 1, 1)
        if query.has_aggregates:
            for item in query.select:
                if isinstance(item, Var) and item not in query.group_by:
                    raise QuerySyntaxError(
                        f"?{item.name} is projected next to an aggregate but not grouped", 1, 1
                    )
        for condition in query.order_by:
            expression = condition.expression
            if isinstance(expression, Var) and expression not in bound | aliases:
                raise QuerySyntaxError(f"cannot order by unknown variable ?{expression.name}", 1, 1)


def parse_query(text: str) -> SelectQuery:
    return QueryParser(text).parse()
