"""Tests for the SPARQL subset parser and the query executor"""
import random
from collections import defaultdict

import pytest

from app.core import vocabulary as v
from app.core.errors import QuerySyntaxError, UnsupportedFeatureError
from app.core.queries import MENTIONS_PER_YEAR, SOFTWARE_FREQUENCY_PER_YEAR
from app.schemas.graph import Iri, Literal, Triple, TripleGraph
from app.schemas.query import (
    Count,
    CountAlias,
    Having,
    OrderCondition,
    ResultTable,
    SelectQuery,
    TriplePattern,
    Var,
)
from app.services.query_executor import evaluate_bgp, execute, plan, run_query
from app.services.sparql_parser import parse_query

NAMES = ("SPSS", "Stata", "ImageJ", "R")
YEARS = ("2005", "2005", "2006", "2006", "2007", "2007")

QUERIES = [
    "SELECT ?s ?n WHERE { ?s schema:name ?n }",
    "SELECT ?s WHERE { ?s a schema:SoftwareApplication }",
    "SELECT ?p ?m WHERE { ?p schema:mentions ?m }",
    "SELECT ?p ?n WHERE { ?p schema:mentions ?m . ?m skg:software ?s . ?s schema:name ?n }",
    'SELECT ?m WHERE { ?m skg:software ?s . ?s schema:name "SPSS" }',
    "SELECT ?y ?n WHERE { ?p dc:date ?y . ?p schema:mentions ?m . ?m skg:software ?s . ?s schema:name ?n . }",
    'SELECT ?p WHERE { ?p dc:date "2006" }',
    "SELECT ?n (COUNT(?m) AS ?c) WHERE { ?m skg:software ?s . ?s schema:name ?n } GROUP BY ?n",
    "SELECT ?y (COUNT(*) AS ?c) WHERE { ?p dc:date ?y . ?p schema:mentions ?m } GROUP BY ?y",
    MENTIONS_PER_YEAR,
    SOFTWARE_FREQUENCY_PER_YEAR,
    "SELECT (COUNT(*) AS ?c) WHERE { ?s ?p ?o }",
    "SELECT ?s ?p ?o WHERE { ?s ?p ?o }",
    "SELECT ?a ?b WHERE { ?m1 skg:software ?a . ?m2 skg:software ?b . ?p schema:mentions ?m1 . ?p schema:mentions ?m2 }",
    'SELECT ?p WHERE { ?p schema:mentions ?m . ?m nif:isString "Stata" }',
    "SELECT ?n (COUNT(?p) AS ?c) WHERE { ?p schema:mentions ?m . ?m skg:software ?s . ?s schema:name ?n } "
    "GROUP BY ?n HAVING (COUNT(?p) >= 3)",
    "SELECT ?x WHERE { ?x schema:name ?x }",
    "SELECT ?o WHERE { <http://data.gesis.org/softwarekg/software/0> ?p ?o }",
    "SELECT ?p ?y WHERE { ?p dc:date ?y . ?p a schema:ScholarlyArticle }",
    "SELECT ?s (COUNT(?m) AS ?c) WHERE { ?m skg:software ?s } GROUP BY ?s HAVING (COUNT(?m) != 2)",
]


def small_graph(seed=0):
    rng = random.Random(seed)
    triples = []
    software = []
    for i, name in enumerate(NAMES):
        s = Iri(f"{v.SKG}software/{i}")
        software.append((s, name))
        triples += [Triple(s, Iri(v.RDF_TYPE), Iri(v.SOFTWARE)), Triple(s, Iri(v.NAME), Literal(name))]
    k = 0
    for i, year in enumerate(YEARS):
        p = Iri(f"{v.SKG}publication/{i}")
        triples += [Triple(p, Iri(v.RDF_TYPE), Iri(v.PUBLICATION)), Triple(p, Iri(v.DATE), Literal(year))]
        for _ in range(rng.randint(1, 3)):
            s, name = rng.choice(software)
            m = Iri(f"{v.SKG}mention/{k}")
            k += 1
            triples += [
                Triple(p, Iri(v.MENTIONS), m),
                Triple(m, Iri(v.SOFTWARE_LINK), s),
                Triple(m, Iri(v.IS_STRING), Literal(name)),
            ]
    return TripleGraph.of(triples)


def naive_bgp(graph, patterns):
    """Nested loops over every triple in the written pattern order"""
    bindings = [{}]
    for pattern in patterns:
        extended = []
        for binding in bindings:
            for triple in graph.triples:
                candidate = dict(binding)
                ok = True
                for term, value in zip(
                    (pattern.subject, pattern.predicate, pattern.object),
                    (triple.subject, triple.predicate, triple.object),
                ):
                    if isinstance(term, Var):
                        if candidate.setdefault(term, value) != value:
                            ok = False
                    elif term != value:
                        ok = False
                if ok:
                    extended.append(candidate)
        bindings = extended
    return bindings


def naive_rows(query, graph):
    bindings = naive_bgp(graph, query.patterns)
    if not query.has_aggregates and not query.group_by:
        rows = [tuple(b[item].value for item in query.select) for b in bindings]
        return sorted(rows, key=repr)
    groups = defaultdict(list)
    for b in bindings:
        groups[tuple(b[var] for var in query.group_by)].append(b)
    if not groups and not query.group_by:
        groups[()] = []

    def count(c, members):
        return len(members) if c.var is None else sum(1 for b in members if c.var in b)

    rows = []
    for key, members in groups.items():
        if query.having is not None and not query.having.holds(count(query.having.count, members)):
            continue
        row = []
        for item in query.select:
            if isinstance(item, Var):
                row.append(key[query.group_by.index(item)].value)
            else:
                row.append(count(item.count, members))
        rows.append(tuple(row))
    return sorted(rows, key=repr)


def test_frequency_query_parses_to_the_expected_tree():
    """Test the AST of the software-frequency-per-year query"""
    query = parse_query(SOFTWARE_FREQUENCY_PER_YEAR)
    s, n, m, p, y = (Var(name) for name in "snmpy")
    assert query == SelectQuery(
        prefixes=(("schema", v.SCHEMA),),
        select=(n, y, CountAlias(Count(n), Var("count"))),
        patterns=(
            TriplePattern(s, Iri(v.RDF_TYPE), Iri(v.SOFTWARE)),
            TriplePattern(s, Iri(v.NAME), n),
            TriplePattern(m, Iri(v.SOFTWARE_LINK), s),
            TriplePattern(p, Iri(v.MENTIONS), m),
            TriplePattern(p, Iri(v.DATE), y),
        ),
        group_by=(n, y),
        having=Having(Count(n), ">", 1),
        order_by=(OrderCondition(Var("count"), descending=True),),
    )


@pytest.mark.parametrize("text", QUERIES)
def test_printing_and_parsing_reach_a_fixed_point(text):
    """Test that a printed query parses back to the same tree"""
    query = parse_query(text)
    assert parse_query(query.to_sparql()) == query


def test_literals_and_escapes_are_parsed():
    """Test string, integer and typed literals in object position"""
    query = parse_query(
        'SELECT ?m WHERE { ?m nif:isString "say \\"hi\\"\\n" . ?m nif:beginIndex 12 . '
        '?m skg:isFree "true"^^<http://www.w3.org/2001/XMLSchema#boolean> }'
    )
    objects = [pattern.object for pattern in query.patterns]
    assert objects == [
        Literal('say "hi"\n'),
        Literal("12", v.XSD_INTEGER),
        Literal("true", v.XSD_BOOLEAN),
    ]
    assert parse_query(query.to_sparql()) == query


@pytest.mark.parametrize(
    "text, feature",
    [
        ("SELECT ?s WHERE { ?s ?p ?o . FILTER(?o) }", "FILTER"),
        ("SELECT ?s WHERE { ?s ?p ?o OPTIONAL { ?s ?p ?x } }", "OPTIONAL"),
        ("SELECT ?s WHERE { ?s ?p ?o } LIMIT 5", "LIMIT"),
        ("SELECT DISTINCT ?s WHERE { ?s ?p ?o }", "DISTINCT"),
    ],
)
def test_unsupported_keywords_are_named(text, feature):
    """Test that constructs outside the subset raise UnsupportedFeatureError"""
    with pytest.raises(UnsupportedFeatureError) as excinfo:
        parse_query(text)
    assert excinfo.value.feature == feature


@pytest.mark.parametrize(
    "text",
    [
        "SELECT ?s WHERE { ?s schema:name ?n , ?m }",
        "SELECT ?s WHERE { ?s schema:name ?n ; schema:url ?u }",
    ],
)
def test_predicate_and_object_lists_are_unsupported(text):
    """Test that ',' and ';' abbreviations are rejected"""
    with pytest.raises(UnsupportedFeatureError):
        parse_query(text)


@pytest.mark.parametrize(
    "text",
    [
        "SELECT ?s WHERE { ?s foo:bar ?o }",
        "SELECT ?s WHERE { ?s ?p ?o ",
        "SELECT ?s WHERE { ?x ?p ?o }",
        "SELECT ?s (COUNT(*) AS ?c) WHERE { ?s ?p ?o }",
        "SELECT ?s WHERE { ?s ?p ?o } ORDER BY ?z",
        "SELECT ?s WHERE { ?s frobnicate ?o }",
        "SELECT WHERE { ?s ?p ?o }",
    ],
)
def test_malformed_queries_are_rejected(text):
    """Test syntax and static errors"""
    with pytest.raises(QuerySyntaxError):
        parse_query(text)


def test_syntax_errors_carry_a_location():
    """Test line and column of a lexer error"""
    with pytest.raises(QuerySyntaxError) as excinfo:
        parse_query("SELECT ?s WHERE {\n  ?s ?p ?o ~\n}")
    assert (excinfo.value.line, excinfo.value.column) == (2, 12)


@pytest.mark.parametrize("seed", [0, 1])
def test_executor_matches_nested_loop_evaluation(seed):
    """Test all queries against the nested-loop reference evaluator"""
    graph = small_graph(seed)
    for text in QUERIES:
        query = parse_query(text)
        table = execute(query, graph)
        assert table.columns == query.columns
        assert sorted(table.rows, key=repr) == naive_rows(query, graph), text
        bindings = evaluate_bgp(graph, query.patterns)
        assert sorted(map(repr, map(sorted_items, bindings))) == sorted(
            map(repr, map(sorted_items, naive_bgp(graph, query.patterns)))
        )


def sorted_items(binding):
    return sorted(((var.name, repr(term)) for var, term in binding.items()))


def test_planner_starts_with_the_most_selective_pattern():
    """Test greedy join ordering"""
    graph = small_graph()
    broad = TriplePattern(Var("s"), Var("p"), Var("o"))
    narrow = TriplePattern(Var("s"), Iri(v.NAME), Literal("SPSS"))
    assert plan(graph, [broad, narrow]) == [narrow, broad]


def test_aggregate_over_no_solutions():
    """Test that an ungrouped count over nothing yields one zero row and a grouped one none"""
    graph = small_graph()
    assert run_query('SELECT (COUNT(*) AS ?c) WHERE { ?s schema:name "nope" }', graph).rows == [(0,)]
    assert run_query('SELECT ?s (COUNT(*) AS ?c) WHERE { ?s schema:name "nope" } GROUP BY ?s', graph).rows == []


def test_order_by_count_then_name():
    """Test ordering by a descending aggregate with ascending tie-breakers"""
    table = run_query(MENTIONS_PER_YEAR, small_graph())
    keys = [(-count, name, year) for name, year, count in table.rows]
    assert keys == sorted(keys)
    ascending = run_query("SELECT ?n WHERE { ?s schema:name ?n } ORDER BY ?n", small_graph())
    assert [row[0] for row in ascending.rows] == sorted(NAMES)


def test_result_csv_quoting():
    """Test header row, quoting and CRLF line endings"""
    table = ResultTable(columns=["n", "c"], rows=[("a,b", 1), ('say "x"', 2)])
    assert table.to_csv() == b'n,c\r\n"a,b",1\r\n"say ""x""",2\r\n'
