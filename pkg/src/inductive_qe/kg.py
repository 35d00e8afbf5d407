"""Knowledge graph storage: id spaces, triple set, adjacency and domain/range indices."""

from __future__ import annotations

from dataclasses import dataclass

OUT = "out"
IN = "in"


class KGFormatError(ValueError):
    """Raised for malformed triple files."""


@dataclass(frozen=True, order=True)
class Triple:
    head: int
    relation: int
    tail: int


class KnowledgeGraph:
    """Immutable triple store over dense integer ids.

    Indices kept alongside the triple set:
      fwd   : (head, relation) -> sorted tuple of tails
      nbr   : entity -> sorted list of (relation, neighbor, direction)
      dom   : relation -> frozenset of heads
      rng   : relation -> frozenset of tails

    Inverse edges are represented as index entries with direction=IN; the
    triple set itself is never augmented with inverse triples.
    """

    def __init__(self, n_entities, n_relations, triples,
                 entity_names=None, relation_names=None):
        triples = frozenset(
            t if isinstance(t, Triple) else Triple(*t) for t in triples
        )
        for t in triples:
            if not (0 <= t.head < n_entities and 0 <= t.tail < n_entities):
                raise ValueError(f"entity id out of range in {t}")
            if not (0 <= t.relation < n_relations):
                raise ValueError(f"relation id out of range in {t}")
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.triples = triples
        self.entity_names = list(entity_names) if entity_names is not None else [
            f"e{i}" for i in range(n_entities)]
        self.relation_names = list(relation_names) if relation_names is not None else [
            f"r{i}" for i in range(n_relations)]
        self._build_indices()

    def _build_indices(self):
        fwd = {}
        nbr = {}
        dom = {r: set() for r in range(self.n_relations)}
        rng = {r: set() for r in range(self.n_relations)}
        for t in self.triples:
            fwd.setdefault((t.head, t.relation), set()).add(t.tail)
            nbr.setdefault(t.head, set()).add((t.relation, t.tail, OUT))
            nbr.setdefault(t.tail, set()).add((t.relation, t.head, IN))
            dom[t.relation].add(t.head)
            rng[t.relation].add(t.tail)
        self.fwd = {k: tuple(sorted(v)) for k, v in fwd.items()}
        self.nbr = {e: sorted(v) for e, v in nbr.items()}
        self.dom = {r: frozenset(v) for r, v in dom.items()}
        self.rng = {r: frozenset(v) for r, v in rng.items()}

    # -- lookups ---------------------------------------------------------

    def _check_entity(self, e):
        if not (0 <= e < self.n_entities):
            raise ValueError(f"entity id {e} out of range [0, {self.n_entities})")

    def _check_relation(self, r):
        if not (0 <= r < self.n_relations):
            raise ValueError(f"relation id {r} out of range [0, {self.n_relations})")

    def neighbors(self, e):
        """All edges incident to `e`, both directions, in a stable order."""
        self._check_entity(e)
        return list(self.nbr.get(e, []))

    def relation_signature(self, r):
        """(domain, range) entity sets of relation `r`."""
        self._check_relation(r)
        return self.dom[r], self.rng[r]

    def tails(self, h, r):
        return self.fwd.get((h, r), ())

    def out_edges(self, e):
        self._check_entity(e)
        return [(r, other) for r, other, d in self.nbr.get(e, []) if d == OUT]

    def in_edges(self, e):
        self._check_entity(e)
        return [(r, other) for r, other, d in self.nbr.get(e, []) if d == IN]

    def restricted(self, triples):
        """A graph over the same id space containing only `triples`."""
        return KnowledgeGraph(self.n_entities, self.n_relations, triples,
                              self.entity_names, self.relation_names)

    def __repr__(self):
        return (f"KnowledgeGraph(|V|={self.n_entities}, |R|={self.n_relations}, "
                f"|T|={len(self.triples)})")


def load_triples(path):
    """Load a TSV triple file (`head\\trelation\\ttail` per line).

    Ids are assigned densely by first appearance, scanning head, relation,
    tail within each line.
    """
    ent_ids = {}
    rel_ids = {}
    triples = []

    def ent(name):
        if name not in ent_ids:
            ent_ids[name] = len(ent_ids)
        return ent_ids[name]

    def rel(name):
        if name not in rel_ids:
            rel_ids[name] = len(rel_ids)
        return rel_ids[name]

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise KGFormatError(
                    f"{path}:{lineno}: expected 3 tab-separated columns, got {len(parts)}")
            h, r, t = parts
            triples.append(Triple(ent(h), rel(r), ent(t)))
    if not triples:
        raise KGFormatError(f"{path}: empty triple file")
    return KnowledgeGraph(len(ent_ids), len(rel_ids), triples,
                          entity_names=list(ent_ids), relation_names=list(rel_ids))


def write_triples(kg, path):
    with open(path, "w", encoding="utf-8") as fh:
        for t in sorted(kg.triples):
            fh.write(f"{kg.entity_names[t.head]}\t{kg.relation_names[t.relation]}"
                     f"\t{kg.entity_names[t.tail]}\n")


def write_dicts(kg, out_dir):
    """Dump `entities.dict` / `relations.dict` as `id\\tname` files."""
    import os
    for fname, names in (("entities.dict", kg.entity_names),
                         ("relations.dict", kg.relation_names)):
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8") as fh:
            for i, name in enumerate(names):
                fh.write(f"{i}\t{name}\n")
