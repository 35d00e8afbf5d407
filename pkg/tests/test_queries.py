import numpy as np
import pytest

from inductive_qe.kg import KnowledgeGraph, Triple
from inductive_qe.queries import (Anchor, And, DnfQuery, Not, Or, Proj,
                                  QueryGraph, QueryValidationError, anchors,
                                  canonicalize, has_negation, instantiate,
                                  query_to_record, record_to_query, relations,
                                  shape_signature, to_dnf, validate,
                                  STRUCTURES)
from inductive_qe.symbolic import answer_set


def random_kg(rng, n=10, m=3, k=30):
    trips = {Triple(int(rng.integers(n)), int(rng.integers(m)), int(rng.integers(n)))
             for _ in range(k)}
    return KnowledgeGraph(n, m, trips)


def random_query(rng, tag, n=10, m=3):
    na, nr = STRUCTURES[tag]
    return instantiate(tag, [int(rng.integers(n)) for _ in range(na)],
                       [int(rng.integers(m)) for _ in range(nr)])


def test_instantiate_1p_shape():
    q = instantiate("1p", [3], [1])
    assert q.root == Proj(1, Anchor(3))
    assert q.tag == "1p"


def test_instantiate_2i_shape():
    q = instantiate("2i", [1, 2], [0, 1])
    assert isinstance(q.root, And)
    assert len(q.root.sources) == 2
    assert all(isinstance(s, Proj) and isinstance(s.source, Anchor)
               for s in q.root.sources)


def test_instantiate_arity_error():
    with pytest.raises(ValueError, match="2p expects 1 anchors and 2 relations"):
        instantiate("2p", [0], [1])


def test_instantiate_unknown_tag():
    with pytest.raises(ValueError, match="unknown query structure"):
        instantiate("4p", [0], [1])


def test_validate_3i_ok():
    validate(instantiate("3i", [0, 1, 2], [0, 1, 2]))


def test_validate_cycle():
    p = Proj(0, None)
    p.source = p
    with pytest.raises(QueryValidationError, match="cycle"):
        validate(QueryGraph(p))


def test_validate_operator_arity():
    with pytest.raises(QueryValidationError, match=">= 2"):
        validate(QueryGraph(And([Anchor(0)])))


def test_anchor_and_relation_order():
    q = instantiate("pi", [5, 7], [2, 0, 1])
    assert anchors(q) == [5, 7]
    assert relations(q) == [2, 0, 1]


def test_to_dnf_2u():
    dnf = to_dnf(instantiate("2u", [0, 1], [0, 1]))
    assert len(dnf.conjuncts) == 2
    assert all(shape_signature(c) == "P(e)" for c in dnf.conjuncts)


def test_to_dnf_up():
    dnf = to_dnf(instantiate("up", [0, 1], [0, 1, 2]))
    assert len(dnf.conjuncts) == 2
    assert all(shape_signature(c) == "P(P(e))" for c in dnf.conjuncts)


def test_to_dnf_2i_single_conjunct():
    q = instantiate("2i", [0, 1], [0, 1])
    dnf = to_dnf(q)
    assert len(dnf.conjuncts) == 1
    assert dnf.conjuncts[0] == q.root


def test_to_dnf_idempotent():
    rng = np.random.default_rng(1)
    for tag in STRUCTURES:
        q = random_query(rng, tag)
        once = to_dnf(q)
        assert to_dnf(once) == once


def test_dnf_preserves_semantics():
    rng = np.random.default_rng(2)
    for _ in range(30):
        kg = random_kg(rng)
        for tag in STRUCTURES:
            q = random_query(rng, tag)
            assert answer_set(kg, to_dnf(q)) == answer_set(kg, q)


def test_canonicalize_sorts_symmetric_branches():
    a = QueryGraph(And([Proj(1, Anchor(9)), Proj(0, Anchor(2))]), tag="2i")
    b = QueryGraph(And([Proj(0, Anchor(2)), Proj(1, Anchor(9))]), tag="2i")
    assert canonicalize(a) == canonicalize(b)


def test_canonicalize_preserves_positional_round_trip():
    # asymmetric structures must keep the branch that carries each anchor
    # aligned with the anchor list
    rng = np.random.default_rng(3)
    for tag in STRUCTURES:
        for _ in range(20):
            q = random_query(rng, tag)
            assert instantiate(tag, anchors(q), relations(q)) == q


def test_negation_representable_but_not_instantiable():
    q = QueryGraph(Not(Proj(0, Anchor(1))))
    validate(q)
    assert has_negation(q)
    assert not has_negation(instantiate("2u", [0, 1], [0, 1]))


def test_dnf_negated_union_de_morgan():
    q = QueryGraph(Not(Or([Proj(0, Anchor(0)), Proj(1, Anchor(1))])))
    dnf = to_dnf(q)
    assert len(dnf.conjuncts) == 1
    assert isinstance(dnf.conjuncts[0], And)
    assert all(isinstance(s, Not) for s in dnf.conjuncts[0].sources)


def test_record_round_trip():
    rng = np.random.default_rng(4)
    for tag in STRUCTURES:
        q = random_query(rng, tag)
        rec = query_to_record(q, answers={1, 2}, qclass="ES")
        assert rec["class"] == "ES" and rec["answers"] == [1, 2]
        assert record_to_query(rec) == q
