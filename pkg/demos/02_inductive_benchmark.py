"""Walkthrough: constructing an inductive query-answering benchmark.

A fraction of the entities is held out as "emerging": they are invisible
during training, and at evaluation time queries are labeled by whether
their anchors / answers touch emerging entities (EE / ES / SE).

Run:  python3 demos/02_inductive_benchmark.py
"""

from collections import Counter

from inductive_qe import EVAL_CLASSES, build_benchmark, synth_kg

# deterministic clustered synthetic graph
kg = synth_kg(n_entities=300, n_relations=12, n_clusters=10, seed=0)
print(kg)

split, datasets = build_benchmark(kg, fraction=0.2, seed=0,
                                  train_per_structure=50,
                                  eval_per_structure=15)
print(f"\nemerging entities: {len(split.v_test)}  "
      f"(seen: {len(split.v_train)})")
print(f"training triples:  {len(split.t_train)}  "
      f"(auxiliary, eval-only: {len(split.t_aux)})")

# no training triple touches an emerging entity
assert all(t.head not in split.v_test and t.tail not in split.v_test
           for t in split.t_train)

for name in ("train", "valid", "test"):
    records = datasets[name]
    tags = Counter(r.query.tag for r in records)
    classes = Counter(r.qclass for r in records)
    print(f"\n{name}: {len(records)} queries")
    print("  structures:", dict(sorted(tags.items())))
    print("  classes:   ", dict(sorted(classes.items())))

# training queries are answerable on the training graph alone and involve
# only seen entities; evaluation queries carry one of the inductive classes
assert all(r.qclass == "SS" for r in datasets["train"])
assert all(r.qclass in EVAL_CLASSES for r in datasets["valid"])

rec = datasets["test"][0]
print(f"\nexample test record: tag={rec.query.tag} class={rec.qclass} "
      f"answers={sorted(rec.answers)[:8]}{'...' if len(rec.answers) > 8 else ''}")
