import numpy as np
import pytest

from inductive_qe.queries import STRUCTURES, canonicalize, instantiate
from inductive_qe.tokens import (Token, TokenParseError, TokenSequence,
                                 Vocabulary, check_brackets, parse, serialize,
                                 vocab_ids)


def random_query(rng, tag, n=20, m=5):
    na, nr = STRUCTURES[tag]
    return instantiate(tag, [int(rng.integers(n)) for _ in range(na)],
                       [int(rng.integers(m)) for _ in range(nr)])


def test_golden_1p():
    seq = serialize(instantiate("1p", [3], [0]))
    assert seq.text() == "[BCK_L0] [ENT] [r_0] [MASK] [BCK_R0] [ENT]"


def test_golden_2p():
    seq = serialize(instantiate("2p", [3], [1, 2]))
    assert seq.text() == \
        "[BCK_L0] [ENT] [r_1] [MASK] [r_2] [MASK] [BCK_R0] [ENT]"


def test_golden_2i():
    seq = serialize(instantiate("2i", [0, 1], [0, 1]))
    assert seq.text() == ("[BCK_L1] [BCK_L0] [ENT] [r_0] [MASK] [BCK_R0] "
                          "[BCK_L0] [ENT] [r_1] [MASK] [BCK_R0] "
                          "[INT] [MASK] [BCK_R1] [ENT]")


def test_sequence_invariants():
    rng = np.random.default_rng(0)
    for tag in STRUCTURES:
        for _ in range(10):
            q = random_query(rng, tag)
            seq = serialize(q)
            check_brackets(seq)
            ent_positions = [i for i, t in enumerate(seq.tokens)
                             if t.kind == "ENT"]
            assert seq.tokens[-1].kind == "ENT"
            assert seq.anchor_positions == ent_positions[:-1]
            assert seq.answer_position == len(seq.tokens) - 1
            assert len(ent_positions) == len(seq.anchor_entities) + 1


def test_round_trip_all_structures():
    rng = np.random.default_rng(1)
    for tag in STRUCTURES:
        for _ in range(20):
            q = random_query(rng, tag)
            back = parse(serialize(q))
            assert back == canonicalize(q)
            assert back.tag == tag


def test_parse_missing_final_ent():
    seq = serialize(instantiate("1p", [0], [0]))
    broken = TokenSequence(seq.tokens[:-1], seq.anchor_positions,
                           seq.answer_position, seq.anchor_entities)
    with pytest.raises(TokenParseError):
        parse(broken)


def test_parse_depth_mismatch():
    seq = serialize(instantiate("1p", [0], [0]))
    toks = list(seq.tokens)
    toks[-2] = Token("BCK_R", 1)
    with pytest.raises(TokenParseError, match="depth mismatch"):
        parse(TokenSequence(toks, seq.anchor_positions, seq.answer_position,
                            seq.anchor_entities))


def test_parse_trailing_tokens():
    seq = serialize(instantiate("1p", [0], [0]))
    toks = list(seq.tokens) + [Token("ENT")]
    with pytest.raises(TokenParseError, match="trailing"):
        parse(TokenSequence(toks, seq.anchor_positions, seq.answer_position,
                            seq.anchor_entities))


def test_check_brackets_detects_unbalanced():
    seq = serialize(instantiate("2i", [0, 1], [0, 1]))
    toks = [t for t in seq.tokens if not (t.kind == "BCK_R" and t.value == 1)]
    with pytest.raises(TokenParseError, match="unclosed"):
        check_brackets(TokenSequence(toks, [], len(toks) - 1, [0, 1]))


def test_injectivity():
    # distinct canonicalized (structure, anchors, relations) tuples must
    # yield distinct (token text, anchor entity list) pairs
    rng = np.random.default_rng(2)
    seen = {}
    for tag in STRUCTURES:
        for _ in range(40):
            q = random_query(rng, tag)
            seq = serialize(q)
            rendered = (seq.text(), tuple(seq.anchor_entities))
            ident = (q.tag, repr(q.root))
            assert seen.setdefault(rendered, ident) == ident


def test_vocab_distinct_and_total():
    v = Vocabulary(n_relations=7, max_depth=4)
    seq = serialize(instantiate("pi", [0, 1], [3, 5, 6]))
    ids = vocab_ids(seq, v)
    assert len(ids) == len(seq.tokens)
    assert v.id_of(Token("REL", 3)) != v.id_of(Token("REL", 5))
    all_ids = [v.id_of(Token("ENT")), v.id_of(Token("MASK")),
               v.id_of(Token("INT")), v.id_of(Token("UNI")),
               v.id_of(Token("NEG"))]
    all_ids += [v.id_of(Token("BCK_L", d)) for d in range(5)]
    all_ids += [v.id_of(Token("BCK_R", d)) for d in range(5)]
    all_ids += [v.id_of(Token("REL", r)) for r in range(7)]
    assert len(set(all_ids)) == len(all_ids) == v.size


def test_vocab_unknown_relation_errors():
    v = Vocabulary(n_relations=3)
    with pytest.raises(ValueError, match="unknown relation"):
        v.id_of(Token("REL", 9))


def test_vocab_depth_limit():
    v = Vocabulary(n_relations=3, max_depth=1)
    with pytest.raises(ValueError, match="depth"):
        v.id_of(Token("BCK_L", 2))


def test_identical_queries_identical_ids():
    v = Vocabulary(n_relations=4)
    a = vocab_ids(serialize(instantiate("3i", [0, 1, 2], [1, 2, 3])), v)
    b = vocab_ids(serialize(instantiate("3i", [0, 1, 2], [1, 2, 3])), v)
    assert a == b
