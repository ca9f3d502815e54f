"""Canned queries used by the analyses"""

# Frequency of software mentions per year, names mentioned more than once
SOFTWARE_FREQUENCY_PER_YEAR = """PREFIX schema: <http://schema.org/>
SELECT ?n ?y (count(?n) as ?count) WHERE {
    ?s rdf:type schema:SoftwareApplication .
    ?s <http://schema.org/name> ?n .
    ?m <http://data.gesis.org/softwarekg/software> ?s .
    ?p <http://schema.org/mentions> ?m .
    ?p <http://purl.org/dc/elements/1.1/date> ?y .
}
GROUP BY ?n ?y
HAVING (count(?n) > 1)
ORDER by DESC(?count)
"""

MENTIONS_PER_YEAR = """SELECT ?n ?y (count(?m) AS ?count) WHERE {
    ?s a schema:SoftwareApplication .
    ?s schema:name ?n .
    ?m skg:software ?s .
    ?p schema:mentions ?m .
    ?p dc:date ?y .
}
GROUP BY ?n ?y
ORDER BY DESC(?count) ?n ?y
"""

MENTIONS_PER_KB_ID_AND_YEAR = """SELECT ?id ?n ?y (count(?m) AS ?count) WHERE {
    ?s a schema:SoftwareApplication .
    ?s schema:identifier ?id .
    ?s schema:name ?n .
    ?m skg:software ?s .
    ?p schema:mentions ?m .
    ?p dc:date ?y .
}
GROUP BY ?id ?n ?y
"""

MENTIONS_PER_SOFTWARE_AND_YEAR = """SELECT ?s ?n ?y (count(?m) AS ?count) WHERE {
    ?s a schema:SoftwareApplication .
    ?s schema:name ?n .
    ?m skg:software ?s .
    ?p schema:mentions ?m .
    ?p dc:date ?y .
}
GROUP BY ?s ?n ?y
"""
