"""SPARQL サブセットの構文木と結果テーブル"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import pandas as pd
from pydantic import Field, model_validator

from app.schemas.base import BaseSchema
from app.schemas.graph import Iri, Literal
from app.utils.files import PathLike, write_bytes

COMPARISON_OPERATORS = (">", ">=", "<", "<=", "=", "!=")


@dataclass(frozen=True)
class Var:
    name: str

    def to_sparql(self) -> str:
        return f"?{self.name}"


PatternTerm = Union[Var, Iri, Literal]


def _term_sparql(term: PatternTerm) -> str:
    if isinstance(term, Var):
        return term.to_sparql()
    if isinstance(term, Iri):
        return f"<{term.value}>"
    escaped = term.value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    escaped = escaped.replace("\r", "\\r").replace("\t", "\\t")
    if term.datatype is None:
        return f'"{escaped}"'
    return f'"{escaped}"^^<{term.datatype}>'


@dataclass(frozen=True)
class TriplePattern:
    subject: PatternTerm
    predicate: PatternTerm
    object: PatternTerm

    @property
    def variables(self) -> Tuple[Var, ...]:
        return tuple(t for t in (self.subject, self.predicate, self.object) if isinstance(t, Var))

    def to_sparql(self) -> str:
        return " ".join(_term_sparql(t) for t in (self.subject, self.predicate, self.object)) + " ."


@dataclass(frozen=True)
class Count:
    """count(?v), or count(*) when var is None"""

    var: Optional[Var] = None

    def to_sparql(self) -> str:
        return f"COUNT({self.var.to_sparql() if self.var else '*'})"


@dataclass(frozen=True)
class CountAlias:
    count: Count
    alias: Var

    def to_sparql(self) -> str:
        return f"({self.count.to_sparql()} AS {self.alias.to_sparql()})"


SelectItem = Union[Var, CountAlias]
OrderExpression = Union[Var, Count]


@dataclass(frozen=True)
class Having:
    count: Count
    operator: str
    value: int

    def holds(self, count: int) -> bool:
        return {
            ">": count > self.value,
            ">=": count >= self.value,
            "<": count < self.value,
            "<=": count <= self.value,
            "=": count == self.value,
            "!=": count != self.value,
        }[self.operator]

    def to_sparql(self) -> str:
        return f"HAVING ({self.count.to_sparql()} {self.operator} {self.value})"


@dataclass(frozen=True)
class OrderCondition:
    expression: OrderExpression
    descending: bool = False

    def to_sparql(self) -> str:
        return f"{'DESC' if self.descending else 'ASC'}({self.expression.to_sparql()})"


@dataclass(frozen=True)
class SelectQuery:
    prefixes: Tuple[Tuple[str, str], ...]
    select: Tuple[SelectItem, ...]
    patterns: Tuple[TriplePattern, ...]
    group_by: Tuple[Var, ...] = ()
    having: Optional[Having] = None
    order_by: Tuple[OrderCondition, ...] = ()

    @property
    def has_aggregates(self) -> bool:
        return self.having is not None or any(isinstance(item, CountAlias) for item in self.select)

    @property
    def columns(self) -> List[str]:
        return [item.name if isinstance(item, Var) else item.alias.name for item in self.select]

    def to_sparql(self) -> str:
        lines = [f"PREFIX {name}: <{iri}>" for name, iri in self.prefixes]
        lines.append("SELECT " + " ".join(item.to_sparql() for item in self.select) + " WHERE {")
        lines.extend(f"  {pattern.to_sparql()}" for pattern in self.patterns)
        lines.append("}")
        if self.group_by:
            lines.append("GROUP BY " + " ".join(var.to_sparql() for var in self.group_by))
        if self.having is not None:
            lines.append(self.having.to_sparql())
        if self.order_by:
            lines.append("ORDER BY " + " ".join(c.to_sparql() for c in self.order_by))
        return "\n".join(lines) + "\n"


Value = Union[int, str]


class ResultTable(BaseSchema):
    columns: List[str] = Field(default_factory=list, description="列名（? なし）")
    rows: List[Tuple[Value, ...]] = Field(default_factory=list, description="行")

    @model_validator(mode="after")
    def check_arity(self) -> "ResultTable":
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise ValueError(f"row {i} has {len(row)} values for {len(self.columns)} columns")
        return self

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([list(row) for row in self.rows], columns=self.columns)

    def to_csv(self) -> bytes:
        """Header row, minimal RFC-4180 quoting, CRLF line endings"""
        text = self.to_dataframe().to_csv(index=False, lineterminator="\r\n")
        return text.encode("utf-8")

    def write_csv(self, path: PathLike) -> Path:
        return write_bytes(path, self.to_csv())
