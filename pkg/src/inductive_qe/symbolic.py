"""Exact set-theoretic query evaluation; ground truth for everything learned."""

from __future__ import annotations

from .queries import Anchor, And, DnfQuery, Not, Or, Proj, QueryGraph, validate


def project(kg, entities, relation):
    """S' = { e' | exists e in S with relation(e, e') }."""
    kg._check_relation(relation)
    out = set()
    for e in entities:
        out.update(kg.tails(e, relation))
    return frozenset(out)


def combine(op, sets):
    """Union or intersection of two or more entity sets."""
    if len(sets) < 2:
        raise ValueError(f"combine needs >= 2 sets, got {len(sets)}")
    if op == "union":
        return frozenset(frozenset.union(*map(frozenset, sets)))
    if op == "intersection":
        return frozenset(frozenset.intersection(*map(frozenset, sets)))
    raise ValueError(f"unknown set operation {op!r}")


def complement(kg, entities):
    """V minus S, against the evaluation graph's full entity set."""
    return frozenset(range(kg.n_entities)) - frozenset(entities)


def answer_set(kg, q):
    """Bottom-up set evaluation of a query's operator tree."""
    if isinstance(q, DnfQuery):
        sets = [answer_set(kg, QueryGraph(c)) for c in q.conjuncts]
        return sets[0] if len(sets) == 1 else combine("union", sets)
    validate(q)

    def ev(n):
        if isinstance(n, Anchor):
            kg._check_entity(n.entity)
            return frozenset((n.entity,))
        if isinstance(n, Proj):
            return project(kg, ev(n.source), n.relation)
        if isinstance(n, Not):
            return complement(kg, ev(n.source))
        sets = [ev(s) for s in n.sources]
        return combine("union" if isinstance(n, Or) else "intersection", sets)

    return ev(q.root)


def brute_force_answers(kg, q):
    """Independent oracle: test every entity against the logical definition.

    Walks the raw triple set directly (no indices), trying all
    intermediate-variable assignments by recursion.
    """
    triples = list(kg.triples)

    def sat(n, e):
        if isinstance(n, Anchor):
            return e == n.entity
        if isinstance(n, Proj):
            return any(t.tail == e and t.relation == n.relation and sat(n.source, t.head)
                       for t in triples)
        if isinstance(n, Not):
            return not sat(n.source, e)
        if isinstance(n, And):
            return all(sat(s, e) for s in n.sources)
        return any(sat(s, e) for s in n.sources)

    root = q.root if isinstance(q, QueryGraph) else q
    return frozenset(e for e in range(kg.n_entities) if sat(root, e))
