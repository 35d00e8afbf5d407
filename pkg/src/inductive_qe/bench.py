"""Inductive benchmark construction: entity/triple splits, query grounding,
EE/ES/SE classification, and JSON-lines dataset files."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .kg import Triple
from .queries import STRUCTURES, instantiate, query_to_record, record_to_query
from .symbolic import answer_set

EVAL_CLASSES = ("EE", "ES", "SE")


@dataclass
class InductiveSplit:
    n_entities: int
    v_test: frozenset
    t_train: tuple
    t_aux: tuple
    fraction: float
    seed: int

    @property
    def v_train(self):
        return frozenset(range(self.n_entities)) - self.v_test


@dataclass
class QueryRecord:
    query: object
    answers: frozenset
    qclass: str


def split_inductive(kg, fraction=0.2, seed=0):
    """Mark round(fraction * |V|) random entities as emerging; every triple
    touching one becomes auxiliary, the rest train the model."""
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n_test = int(round(fraction * kg.n_entities))
    if n_test == 0 or n_test == kg.n_entities:
        raise ValueError(
            f"fraction {fraction} leaves an empty side for |V|={kg.n_entities}")
    rng = np.random.default_rng(seed)
    v_test = frozenset(int(e) for e in
                       rng.choice(kg.n_entities, size=n_test, replace=False))
    t_aux, t_train = [], []
    for t in sorted(kg.triples):
        (t_aux if (t.head in v_test or t.tail in v_test) else t_train).append(t)
    return InductiveSplit(n_entities=kg.n_entities, v_test=v_test,
                          t_train=tuple(t_train), t_aux=tuple(t_aux),
                          fraction=fraction, seed=seed)


def classify(q, answers, v_test):
    """EE/ES/SE/SS by whether any anchor / any answer is emerging."""
    if not answers:
        raise ValueError("cannot classify a query with an empty answer set")
    from .queries import anchors
    anchor_emerging = any(a in v_test for a in anchors(q))
    answer_emerging = any(v in v_test for v in answers)
    return ("E" if anchor_emerging else "S") + ("E" if answer_emerging else "S")


class _Grounder:
    """Backward sampler: pick an answer entity, then walk edges backwards so
    the grounded query is guaranteed nonempty."""

    def __init__(self, kg, rng):
        self.kg = kg
        self.rng = rng
        self.triples = sorted(kg.triples)

    def _in_edge(self, e):
        edges = self.kg.in_edges(e)
        if not edges:
            return None
        return edges[self.rng.integers(len(edges))]

    def _in_edges_distinct(self, e, k):
        edges = self.kg.in_edges(e)
        if len(edges) < k:
            return None
        idx = self.rng.choice(len(edges), size=k, replace=False)
        return [edges[i] for i in idx]

    def _random_edge(self):
        t = self.triples[self.rng.integers(len(self.triples))]
        return t.relation, t.head

    def propose(self, tag, target):
        e1 = self._in_edge
        if tag == "1p":
            ie = e1(target)
            return ie and instantiate(tag, [ie[1]], [ie[0]])
        if tag == "2p":
            ie2 = e1(target)
            if not ie2:
                return None
            ie1 = e1(ie2[1])
            return ie1 and instantiate(tag, [ie1[1]], [ie1[0], ie2[0]])
        if tag == "3p":
            ie3 = e1(target)
            ie2 = ie3 and e1(ie3[1])
            ie1 = ie2 and e1(ie2[1])
            return ie1 and instantiate(tag, [ie1[1]], [ie1[0], ie2[0], ie3[0]])
        if tag in ("2i", "3i"):
            k = 2 if tag == "2i" else 3
            edges = self._in_edges_distinct(target, k)
            return edges and instantiate(tag, [h for _, h in edges],
                                         [r for r, _ in edges])
        if tag == "pi":
            edges = self._in_edges_distinct(target, 2)
            if not edges:
                return None
            (r2, mid), (r3, a2) = edges
            ie1 = e1(mid)
            return ie1 and instantiate(tag, [ie1[1], a2], [ie1[0], r2, r3])
        if tag == "ip":
            ie3 = e1(target)
            if not ie3:
                return None
            edges = self._in_edges_distinct(ie3[1], 2)
            return edges and instantiate(
                tag, [edges[0][1], edges[1][1]],
                [edges[0][0], edges[1][0], ie3[0]])
        if tag == "2u":
            ie = e1(target)
            if not ie:
                return None
            r2, a2 = self._random_edge()
            return instantiate(tag, [ie[1], a2], [ie[0], r2])
        if tag == "up":
            ie2 = e1(target)
            ie1 = ie2 and e1(ie2[1])
            if not ie1:
                return None
            r2, a2 = self._random_edge()
            return instantiate(tag, [ie1[1], a2], [ie1[0], r2, ie2[0]])
        raise ValueError(f"unknown query structure {tag!r}")


def ground_queries(kg, split, structure, count, mode, seed,
                   train_kg=None, max_answers=100, max_attempts=None):
    """Sample `count` grounded queries of one structure.

    mode="train": grounded on the training graph, all entities seen (SS).
    mode="eval": grounded on the full graph; only EE/ES/SE records are kept,
    balanced across the three classes by quota.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown grounding mode {mode!r}")
    rng = np.random.default_rng(seed)
    if mode == "train":
        graph = train_kg if train_kg is not None else kg.restricted(split.t_train)
    else:
        graph = kg
    grounder = _Grounder(graph, rng)
    targets = [t.tail for t in grounder.triples]
    emerging_targets = [t for t in targets if t in split.v_test]
    max_attempts = max_attempts or (200 * count + 1000)

    quota = None
    if mode == "eval":
        base, extra = divmod(count, 3)
        quota = {c: base + (1 if i < extra else 0)
                 for i, c in enumerate(EVAL_CLASSES)}

    seen_keys = set()
    records = []
    attempts = 0
    while len(records) < count and attempts < max_attempts:
        attempts += 1
        if mode == "eval" and emerging_targets and rng.random() < 0.5:
            target = emerging_targets[rng.integers(len(emerging_targets))]
        else:
            target = targets[rng.integers(len(targets))]
        q = grounder.propose(structure, target)
        if q is None:
            continue
        key = (structure, tuple(_anchors(q)), tuple(_relations(q)))
        if key in seen_keys:
            continue
        answers = answer_set(graph, q)
        if not answers or len(answers) > max_answers:
            continue
        if mode == "train":
            records.append(QueryRecord(q, answers, "SS"))
            seen_keys.add(key)
        else:
            qclass = classify(q, answers, split.v_test)
            if qclass not in EVAL_CLASSES or quota[qclass] <= 0:
                continue
            quota[qclass] -= 1
            records.append(QueryRecord(q, answers, qclass))
            seen_keys.add(key)
    if len(records) < count:
        warnings.warn(
            f"grounding exhausted after {attempts} attempts: produced "
            f"{len(records)}/{count} {structure} queries ({mode} mode)")
    return records


def _anchors(q):
    from .queries import anchors
    return anchors(q)


def _relations(q):
    from .queries import relations
    return relations(q)


def build_benchmark(kg, fraction, seed, train_per_structure, eval_per_structure,
                    max_answers=100):
    """Full pipeline: split, then train/valid/test records for all nine
    structures. Returns (split, {"train": [...], "valid": [...], "test": [...]})."""
    split = split_inductive(kg, fraction, seed)
    train_kg = kg.restricted(split.t_train)
    datasets = {"train": [], "valid": [], "test": []}
    for i, tag in enumerate(sorted(STRUCTURES)):
        datasets["train"].extend(ground_queries(
            kg, split, tag, train_per_structure, "train", seed + 11 * i + 1,
            train_kg=train_kg, max_answers=max_answers))
        datasets["valid"].extend(ground_queries(
            kg, split, tag, eval_per_structure, "eval", seed + 11 * i + 5,
            max_answers=max_answers))
        datasets["test"].extend(ground_queries(
            kg, split, tag, eval_per_structure, "eval", seed + 11 * i + 9,
            max_answers=max_answers))
    return split, datasets


# -- files ---------------------------------------------------------------

def write_dataset(records, path, split_name):
    """JSON-lines dataset; evaluation splits must not contain SS records."""
    if split_name not in ("train", "valid", "test"):
        raise ValueError(f"unknown split {split_name!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            if split_name != "train" and rec.qclass not in EVAL_CLASSES:
                raise ValueError(
                    f"class {rec.qclass} record not allowed in {split_name} split")
            fh.write(json.dumps(query_to_record(rec.query, rec.answers,
                                                rec.qclass)) + "\n")


def read_dataset(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(QueryRecord(record_to_query(obj),
                                       frozenset(obj["answers"]),
                                       obj["class"]))
    return records


def write_split(split, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"fraction": split.fraction, "seed": split.seed,
                   "n_entities": split.n_entities,
                   "v_test": sorted(split.v_test)}, fh)


def read_split(path, kg):
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj["n_entities"] != kg.n_entities:
        raise ValueError("split file does not match this graph")
    v_test = frozenset(obj["v_test"])
    t_aux = tuple(t for t in sorted(kg.triples)
                  if t.head in v_test or t.tail in v_test)
    t_train = tuple(t for t in sorted(kg.triples)
                    if not (t.head in v_test or t.tail in v_test))
    return InductiveSplit(n_entities=kg.n_entities, v_test=v_test,
                          t_train=t_train, t_aux=t_aux,
                          fraction=obj["fraction"], seed=obj["seed"])
