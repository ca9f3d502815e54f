"""Evaluating parsed queries against a TripleGraph"""
import logging
from collections import OrderedDict
from typing import Dict, List, Optional, Sequence, Tuple, Union

from app.schemas.graph import Iri, Literal, Term, TripleGraph
from app.schemas.query import Count, CountAlias, OrderCondition, ResultTable, SelectQuery, TriplePattern, Var
from app.services.sparql_parser import parse_query

logger = logging.getLogger(__name__)

Binding = Dict[Var, Term]


def _constant(term) -> Optional[Term]:
    return None if isinstance(term, Var) else term


def _estimate(graph: TripleGraph, pattern: TriplePattern, bound: set) -> int:
    # bound variables act as constants whose value is unknown at planning time
    subject = _constant(pattern.subject)
    predicate = _constant(pattern.predicate)
    obj = _constant(pattern.object)
    if isinstance(subject, Literal) or isinstance(predicate, Literal):
        return 0
    estimate = graph.estimate(subject, predicate, obj)
    n_bound = sum(1 for var in pattern.variables if var in bound)
    return estimate // (1 + 10 * n_bound)


def plan(graph: TripleGraph, patterns: Sequence[TriplePattern]) -> List[TriplePattern]:
    """Greedy join order: cheapest pattern first, preferring patterns connected to bound vars"""
    remaining = list(enumerate(patterns))
    ordered: List[TriplePattern] = []
    bound: set = set()
    while remaining:
        def cost(item: Tuple[int, TriplePattern]):
            index, pattern = item
            connected = not bound or any(var in bound for var in pattern.variables) or not pattern.variables
            return (not connected, _estimate(graph, pattern, bound), index)

        choice = min(remaining, key=cost)
        remaining.remove(choice)
        ordered.append(choice[1])
        bound.update(choice[1].variables)
    return ordered


def _substitute(term, binding: Binding) -> Optional[Term]:
    if isinstance(term, Var):
        return binding.get(term)
    return term


def _extend(binding: Binding, pattern: TriplePattern, values: Tuple[Term, Term, Term]) -> Optional[Binding]:
    extended = dict(binding)
    for term, value in zip((pattern.subject, pattern.predicate, pattern.object), values):
        if isinstance(term, Var):
            if term in extended and extended[term] != value:
                return None
            extended[term] = value
    return extended


def match_pattern(graph: TripleGraph, pattern: TriplePattern, binding: Binding) -> List[Binding]:
    subject = _substitute(pattern.subject, binding)
    predicate = _substitute(pattern.predicate, binding)
    obj = _substitute(pattern.object, binding)
    if not isinstance(subject, (Iri, type(None))) or not isinstance(predicate, (Iri, type(None))):
        return []
    results = []
    for triple in graph.match(subject, predicate, obj):
        extended = _extend(binding, pattern, (triple.subject, triple.predicate, triple.object))
        if extended is not None:
            results.append(extended)
    return results


def evaluate_bgp(graph: TripleGraph, patterns: Sequence[TriplePattern]) -> List[Binding]:
    bindings: List[Binding] = [{}]
    for pattern in plan(graph, patterns):
        bindings = [extended for binding in bindings for extended in match_pattern(graph, pattern, binding)]
        if not bindings:
            break
    return bindings


def term_value(term: Term) -> str:
    return term.value


def _count(count: Count, rows: Sequence[Binding]) -> int:
    if count.var is None:
        return len(rows)
    return sum(1 for row in rows if count.var in row)


def _solutions(query: SelectQuery, bindings: List[Binding]) -> List[Dict[object, Union[int, str]]]:
    """One dict per output row, keyed by Var and by Count expressions"""
    if not query.has_aggregates and not query.group_by:
        return [{var: term_value(term) for var, term in binding.items()} for binding in bindings]

    groups: "OrderedDict[Tuple, List[Binding]]" = OrderedDict()
    for binding in bindings:
        key = tuple(binding.get(var) for var in query.group_by)
        groups.setdefault(key, []).append(binding)
    if not groups and not query.group_by:
        # an aggregate over no solutions still yields one row
        groups[()] = []

    counts = [item.count for item in query.select if isinstance(item, CountAlias)]
    if query.having is not None:
        counts.append(query.having.count)
    counts.extend(c.expression for c in query.order_by if isinstance(c.expression, Count))

    solutions = []
    for key, rows in groups.items():
        if query.having is not None and not query.having.holds(_count(query.having.count, rows)):
            continue
        solution: Dict[object, Union[int, str]] = {
            var: term_value(term) for var, term in zip(query.group_by, key) if term is not None
        }
        for count in counts:
            solution[count] = _count(count, rows)
        for item in query.select:
            if isinstance(item, CountAlias):
                solution[item.alias] = solution[item.count]
        solutions.append(solution)
    return solutions


def _sort_key(value):
    # numbers before strings; missing values first
    if value is None:
        return (0, 0, "")
    if isinstance(value, int):
        return (1, value, "")
    return (2, 0, value)


def _order(rows: List[Tuple], solutions: List[Dict], conditions: Sequence[OrderCondition]) -> List[Tuple]:
    paired = list(zip(rows, solutions))
    # full-tuple tie-break first, then stable sorts from the last condition to the first
    paired.sort(key=lambda pair: tuple(_sort_key(value) for value in pair[0]))
    for condition in reversed(conditions):
        paired.sort(key=lambda pair: _sort_key(pair[1].get(condition.expression)), reverse=condition.descending)
    return [row for row, _ in paired]


def execute(query: SelectQuery, graph: TripleGraph) -> ResultTable:
    bindings = evaluate_bgp(graph, query.patterns)
    solutions = _solutions(query, bindings)
    keys = [item if isinstance(item, Var) else item.alias for item in query.select]
    rows = [tuple(solution.get(key, "") for key in keys) for solution in solutions]
    rows = _order(rows, solutions, query.order_by)
    logger.debug("Query matched %d bindings, %d rows", len(bindings), len(rows))
    return ResultTable(columns=query.columns, rows=rows)


def run_query(text: str, graph: TripleGraph) -> ResultTable:
    return execute(parse_query(text), graph)
