import json
import warnings

import numpy as np
import pytest

from inductive_qe.bench import (EVAL_CLASSES, QueryRecord, build_benchmark,
                                classify, ground_queries, read_dataset,
                                read_split, split_inductive, write_dataset,
                                write_split)
from inductive_qe.kg import KnowledgeGraph, Triple
from inductive_qe.queries import STRUCTURES, anchors, instantiate, relations
from inductive_qe.symbolic import answer_set
from inductive_qe.synth import synth_kg


def dense_kg(n=40, m=3, seed=0):
    rng = np.random.default_rng(seed)
    trips = {Triple(int(rng.integers(n)), int(rng.integers(m)), int(rng.integers(n)))
             for _ in range(n * 6)}
    return KnowledgeGraph(n, m, trips)


def test_split_sizes_and_partition():
    kg = dense_kg(50)
    split = split_inductive(kg, 0.2, seed=3)
    assert len(split.v_test) == 10
    assert split.v_train | split.v_test == set(range(50))
    assert not (split.v_train & split.v_test)


def test_split_triple_assignment():
    kg = dense_kg()
    split = split_inductive(kg, 0.2, seed=1)
    for t in split.t_aux:
        assert t.head in split.v_test or t.tail in split.v_test
    for t in split.t_train:
        assert t.head not in split.v_test and t.tail not in split.v_test
    assert set(split.t_train) | set(split.t_aux) == set(kg.triples)


def test_split_deterministic():
    kg = dense_kg()
    assert split_inductive(kg, 0.2, seed=7).v_test == \
        split_inductive(kg, 0.2, seed=7).v_test


def test_split_bad_fraction():
    kg = dense_kg(5)
    with pytest.raises(ValueError):
        split_inductive(kg, 0.0, seed=0)
    with pytest.raises(ValueError):
        split_inductive(kg, 0.01, seed=0)  # rounds to zero emerging


def test_classify_all_four_classes():
    q2 = instantiate("2i", [0, 5], [0, 1])
    v_test = {5, 9}
    assert classify(instantiate("1p", [0], [0]), {1}, v_test) == "SS"
    assert classify(q2, {1}, v_test) == "ES"
    assert classify(instantiate("1p", [0], [0]), {9, 1}, v_test) == "SE"
    assert classify(q2, {9}, v_test) == "EE"
    with pytest.raises(ValueError):
        classify(q2, frozenset(), v_test)


def test_ground_train_mode_all_ss():
    kg = dense_kg()
    split = split_inductive(kg, 0.2, seed=2)
    train_kg = kg.restricted(split.t_train)
    recs = ground_queries(kg, split, "2p", 15, "train", seed=0,
                          train_kg=train_kg)
    assert recs
    for r in recs:
        assert r.qclass == "SS"
        assert r.answers == answer_set(train_kg, r.query)
        assert all(a not in split.v_test for a in anchors(r.query))
        assert all(a not in split.v_test for a in r.answers)


def test_ground_eval_mode_classes_and_answers():
    kg = dense_kg(60, seed=4)
    split = split_inductive(kg, 0.2, seed=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        recs = ground_queries(kg, split, "1p", 12, "eval", seed=0)
    assert recs
    seen_keys = set()
    for r in recs:
        assert r.qclass in EVAL_CLASSES
        assert r.qclass == classify(r.query, r.answers, split.v_test)
        assert r.answers == answer_set(kg, r.query)
        key = (tuple(anchors(r.query)), tuple(relations(r.query)))
        assert key not in seen_keys
        seen_keys.add(key)


def test_ground_answer_cap():
    kg = dense_kg(30, seed=5)
    split = split_inductive(kg, 0.2, seed=5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        recs = ground_queries(kg, split, "2u", 10, "eval", seed=1,
                              max_answers=6)
    for r in recs:
        assert 0 < len(r.answers) <= 6


def test_ground_exhaustion_warns_partial():
    kg = KnowledgeGraph(4, 1, {Triple(0, 0, 1)})
    split = split_inductive(kg, 0.25, seed=0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        recs = ground_queries(kg, split, "3i", 50, "eval", seed=0,
                              max_attempts=200)
        assert any("exhausted" in str(x.message) for x in w)
    assert len(recs) < 50


def test_train_answers_never_shrink_on_full_graph():
    kg = dense_kg(50, seed=6)
    split = split_inductive(kg, 0.2, seed=6)
    train_kg = kg.restricted(split.t_train)
    recs = ground_queries(kg, split, "2p", 10, "train", seed=3,
                          train_kg=train_kg)
    for r in recs:
        assert r.answers <= answer_set(kg, r.query)


def test_dataset_round_trip(tmp_path):
    kg = dense_kg(seed=7)
    split = split_inductive(kg, 0.2, seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        recs = ground_queries(kg, split, "pi", 8, "eval", seed=2)
    path = tmp_path / "test.jsonl"
    write_dataset(recs, path, "test")
    back = read_dataset(path)
    assert len(back) == len(recs)
    for a, b in zip(recs, back):
        assert a.query == b.query and a.answers == b.answers \
            and a.qclass == b.qclass


def test_eval_split_rejects_ss(tmp_path):
    rec = QueryRecord(instantiate("1p", [0], [0]), frozenset({1}), "SS")
    with pytest.raises(ValueError, match="not allowed"):
        write_dataset([rec], tmp_path / "valid.jsonl", "valid")
    write_dataset([rec], tmp_path / "train.jsonl", "train")  # fine


def test_empty_dataset_file_ok(tmp_path):
    path = tmp_path / "test.jsonl"
    write_dataset([], path, "test")
    assert read_dataset(path) == []


def test_split_file_round_trip(tmp_path):
    kg = dense_kg(seed=8)
    split = split_inductive(kg, 0.2, seed=8)
    write_split(split, tmp_path / "split.json")
    back = read_split(tmp_path / "split.json", kg)
    assert back.v_test == split.v_test
    assert back.t_train == split.t_train
    assert back.t_aux == split.t_aux


def test_split_file_wrong_graph(tmp_path):
    kg = dense_kg(seed=9)
    write_split(split_inductive(kg, 0.2, seed=9), tmp_path / "split.json")
    with pytest.raises(ValueError, match="does not match"):
        read_split(tmp_path / "split.json", dense_kg(41, seed=9))


def test_build_benchmark_structures_and_balance():
    kg = synth_kg(n_entities=120, n_relations=6, n_clusters=6, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        split, ds = build_benchmark(kg, 0.2, 0, train_per_structure=6,
                                    eval_per_structure=6)
    train_tags = {r.query.tag for r in ds["train"]}
    assert train_tags == set(STRUCTURES)
    assert all(r.qclass == "SS" for r in ds["train"])
    assert all(r.qclass in EVAL_CLASSES for r in ds["valid"] + ds["test"])


def test_synth_kg_deterministic():
    a = synth_kg(seed=3)
    b = synth_kg(seed=3)
    assert a.triples == b.triples
    assert a.n_entities == 300 and a.n_relations == 12
