"""Canned analyses over the knowledge graph: usage per year, availability, successors"""
import logging
import re
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

from app.core import vocabulary as v
from app.core.errors import MissingEnrichmentError
from app.core.queries import MENTIONS_PER_KB_ID_AND_YEAR, MENTIONS_PER_SOFTWARE_AND_YEAR, MENTIONS_PER_YEAR
from app.schemas.disambiguation import SoftwareEnrichment
from app.schemas.graph import Iri, TripleGraph
from app.schemas.query import ResultTable
from app.services.disambiguation_service import lookup_enrichment
from app.services.query_executor import run_query

logger = logging.getLogger(__name__)

YEAR_RE = re.compile(r"^(\d{4})")

OPEN_SOURCE = "open_source"
FREE = "free"
COMMERCIAL = "commercial"
UNKNOWN = "unknown"
AVAILABILITY_BUCKETS = (COMMERCIAL, FREE, OPEN_SOURCE, UNKNOWN)


def year_of(date: str) -> Optional[int]:
    match = YEAR_RE.match(date)
    return int(match.group(1)) if match else None


def _counts_by_year(table: ResultTable, key_columns: Sequence[str]) -> Dict[Tuple, Dict[int, int]]:
    """Re-aggregate a (keys..., y, count) table on the year part of the date"""
    index = {name: i for i, name in enumerate(table.columns)}
    counts: Dict[Tuple, Dict[int, int]] = defaultdict(lambda: defaultdict(int))
    skipped = 0
    for row in table.rows:
        year = year_of(str(row[index["y"]]))
        if year is None:
            skipped += 1
            continue
        counts[tuple(row[index[k]] for k in key_columns)][year] += int(row[index["count"]])
    if skipped:
        logger.warning("%d result rows have no usable year", skipped)
    return counts


def mentions_per_year(g: TripleGraph, top_k: Optional[int] = None) -> ResultTable:
    """Mentions per software and year; with top_k only the k most mentioned per year"""
    counts = _counts_by_year(run_query(MENTIONS_PER_YEAR, g), ["n"])
    per_year: Dict[int, List[Tuple[str, int]]] = defaultdict(list)
    for (name,), years in counts.items():
        for year, count in years.items():
            per_year[year].append((name, count))

    rows = []
    for year in sorted(per_year):
        ranked = sorted(per_year[year], key=lambda item: (-item[1], item[0]))
        if top_k is not None:
            ranked = ranked[:top_k]
        rows.extend((name, year, count) for name, count in ranked)
    return ResultTable(columns=["software", "year", "count"], rows=rows)


def availability_bucket(enrichment: Optional[SoftwareEnrichment]) -> str:
    if enrichment is None:
        return UNKNOWN
    if enrichment.is_source_available:
        return OPEN_SOURCE
    if enrichment.is_free:
        return FREE
    if enrichment.is_free is False:
        return COMMERCIAL
    return UNKNOWN


def availability_trend(
    g: TripleGraph, enrichment: Optional[Dict[str, SoftwareEnrichment]]
) -> ResultTable:
    """Yearly mention counts of commercial, free and open-source software (absolute numbers)"""
    if not enrichment:
        raise MissingEnrichmentError()
    counts = _counts_by_year(run_query(MENTIONS_PER_SOFTWARE_AND_YEAR, g), ["s", "n"])

    buckets: Dict[int, Dict[str, int]] = defaultdict(lambda: dict.fromkeys(AVAILABILITY_BUCKETS, 0))
    for (software, name), years in counts.items():
        identifiers = g.objects(Iri(str(software)), Iri(v.IDENTIFIER))
        kb_id = identifiers[0].value if identifiers else None
        bucket = availability_bucket(lookup_enrichment(kb_id, str(name), enrichment))
        for year, count in years.items():
            buckets[year][bucket] += count

    rows = [
        (year, *(buckets[year][b] for b in AVAILABILITY_BUCKETS), sum(buckets[year].values()))
        for year in sorted(buckets)
    ]
    return ResultTable(columns=["year", *AVAILABILITY_BUCKETS, "total"], rows=rows)


def successor_analysis(g: TripleGraph, kb_replaced_by: Sequence[Tuple[str, str]]) -> ResultTable:
    """Yearly counts of each discontinued software next to its successor"""
    counts = _counts_by_year(run_query(MENTIONS_PER_KB_ID_AND_YEAR, g), ["id", "n"])
    by_id: Dict[str, Dict[int, int]] = defaultdict(lambda: defaultdict(int))
    names: Dict[str, str] = {}
    for (kb_id, name), years in counts.items():
        names.setdefault(str(kb_id), str(name))
        for year, count in years.items():
            by_id[str(kb_id)][year] += count

    rows = []
    for old_id, new_id in sorted(set(kb_replaced_by)):
        if old_id not in by_id and new_id not in by_id:
            continue
        old_counts, new_counts = by_id.get(old_id, {}), by_id.get(new_id, {})
        for year in sorted(set(old_counts) | set(new_counts)):
            rows.append((
                names.get(old_id, old_id),
                names.get(new_id, new_id),
                year,
                old_counts.get(year, 0),
                new_counts.get(year, 0),
            ))
    return ResultTable(
        columns=["predecessor", "successor", "year", "predecessor_count", "successor_count"],
        rows=rows,
    )

