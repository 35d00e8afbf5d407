"""First-order query graphs: the nine supported structures, validation, DNF."""

from __future__ import annotations

from dataclasses import dataclass, field


class QueryValidationError(ValueError):
    pass


# Operator tree. The root is the answer node; anchors are the leaves.
# Negation is representable (the symbolic engine evaluates it) even though
# only the nine positive structures are constructible via instantiate().

@dataclass(eq=True)
class Anchor:
    entity: int


@dataclass(eq=True)
class Proj:
    relation: int
    source: object


@dataclass(eq=True)
class And:
    sources: list


@dataclass(eq=True)
class Or:
    sources: list


@dataclass(eq=True)
class Not:
    source: object


@dataclass(eq=True)
class QueryGraph:
    root: object
    tag: str | None = None


@dataclass(eq=True)
class DnfQuery:
    """Union-free conjuncts whose union is equivalent to the original query."""
    conjuncts: list
    tag: str | None = None


# tag -> (n_anchors, n_relations)
STRUCTURES = {
    "1p": (1, 1),
    "2p": (1, 2),
    "3p": (1, 3),
    "2i": (2, 2),
    "3i": (3, 3),
    "pi": (2, 3),
    "ip": (2, 3),
    "2u": (2, 2),
    "up": (2, 3),
}


def _build(tag, a, r):
    if tag == "1p":
        return Proj(r[0], Anchor(a[0]))
    if tag == "2p":
        return Proj(r[1], Proj(r[0], Anchor(a[0])))
    if tag == "3p":
        return Proj(r[2], Proj(r[1], Proj(r[0], Anchor(a[0]))))
    if tag == "2i":
        return And([Proj(r[0], Anchor(a[0])), Proj(r[1], Anchor(a[1]))])
    if tag == "3i":
        return And([Proj(r[0], Anchor(a[0])), Proj(r[1], Anchor(a[1])),
                    Proj(r[2], Anchor(a[2]))])
    if tag == "pi":
        return And([Proj(r[1], Proj(r[0], Anchor(a[0]))), Proj(r[2], Anchor(a[1]))])
    if tag == "ip":
        return Proj(r[2], And([Proj(r[0], Anchor(a[0])), Proj(r[1], Anchor(a[1]))]))
    if tag == "2u":
        return Or([Proj(r[0], Anchor(a[0])), Proj(r[1], Anchor(a[1]))])
    if tag == "up":
        return Proj(r[2], Or([Proj(r[0], Anchor(a[0])), Proj(r[1], Anchor(a[1]))]))
    raise ValueError(f"unknown query structure {tag!r}")


def instantiate(tag, anchors, relations):
    """Ground one of the nine canonical structures with concrete ids."""
    if tag not in STRUCTURES:
        raise ValueError(f"unknown query structure {tag!r}")
    na, nr = STRUCTURES[tag]
    if len(anchors) != na or len(relations) != nr:
        raise ValueError(
            f"structure {tag} expects {na} anchors and {nr} relations, "
            f"got {len(anchors)} and {len(relations)}")
    q = QueryGraph(_build(tag, list(anchors), list(relations)), tag=tag)
    return canonicalize(q)


def anchors(q):
    """Anchor entity ids in left-to-right traversal order."""
    out = []

    def walk(n):
        if isinstance(n, Anchor):
            out.append(n.entity)
        elif isinstance(n, (Proj, Not)):
            walk(n.source)
        else:
            for s in n.sources:
                walk(s)

    walk(q.root if isinstance(q, QueryGraph) else q)
    return out


def relations(q):
    """Relation ids in left-to-right traversal order."""
    out = []

    def walk(n):
        if isinstance(n, Proj):
            walk(n.source)
            out.append(n.relation)
        elif isinstance(n, Not):
            walk(n.source)
        elif isinstance(n, (And, Or)):
            for s in n.sources:
                walk(s)

    walk(q.root if isinstance(q, QueryGraph) else q)
    return out


def _branch_key(n):
    return (anchors(QueryGraph(n)), relations(QueryGraph(n)))


def shape_signature(n):
    """Structure of a subtree with concrete ids erased."""
    if isinstance(n, Anchor):
        return "e"
    if isinstance(n, Proj):
        return f"P({shape_signature(n.source)})"
    if isinstance(n, Not):
        return f"N({shape_signature(n.source)})"
    op = "I" if isinstance(n, And) else "U"
    return f"{op}({','.join(shape_signature(s) for s in n.sources)})"


def _sort_branches(branches):
    """Order branches by (anchors, relations), but only permute among
    branches of identical shape so that positional (tag, anchors, relations)
    round-trips stay valid for asymmetric structures like pi."""
    by_shape = {}
    for i, b in enumerate(branches):
        by_shape.setdefault(shape_signature(b), []).append(i)
    out = list(branches)
    for idxs in by_shape.values():
        ordered = sorted((branches[i] for i in idxs), key=_branch_key)
        for i, b in zip(idxs, ordered):
            out[i] = b
    return out


def canonicalize(q):
    """Sort interchangeable intersection/union branches deterministically."""

    def walk(n):
        if isinstance(n, Anchor):
            return Anchor(n.entity)
        if isinstance(n, Proj):
            return Proj(n.relation, walk(n.source))
        if isinstance(n, Not):
            return Not(walk(n.source))
        cls = type(n)
        return cls(_sort_branches([walk(s) for s in n.sources]))

    return QueryGraph(walk(q.root), tag=q.tag)


def validate(q):
    """Check acyclicity and operator arities; raises QueryValidationError."""
    on_path = set()

    def walk(n):
        if id(n) in on_path:
            raise QueryValidationError("cycle in query graph")
        on_path.add(id(n))
        if isinstance(n, Anchor):
            if n.entity < 0:
                raise QueryValidationError(f"negative anchor id {n.entity}")
        elif isinstance(n, Proj):
            if n.relation < 0:
                raise QueryValidationError(f"negative relation id {n.relation}")
            if n.source is None:
                raise QueryValidationError("projection with no source")
            walk(n.source)
        elif isinstance(n, Not):
            if n.source is None:
                raise QueryValidationError("negation with no source")
            walk(n.source)
        elif isinstance(n, (And, Or)):
            opname = "intersection" if isinstance(n, And) else "union"
            if len(n.sources) < 2:
                raise QueryValidationError(f"{opname} needs >= 2 sources, "
                                           f"got {len(n.sources)}")
            for s in n.sources:
                walk(s)
        else:
            raise QueryValidationError(f"unknown node type {type(n).__name__}")
        on_path.discard(id(n))

    walk(q.root)
    return q


def has_negation(q):
    def walk(n):
        if isinstance(n, Not):
            return True
        if isinstance(n, Proj):
            return walk(n.source)
        if isinstance(n, (And, Or)):
            return any(walk(s) for s in n.sources)
        return False
    return walk(q.root if isinstance(q, QueryGraph) else q)


def to_dnf(q):
    """Lift unions to the top level; each conjunct is union-free.

    Accepts a QueryGraph or an already-normalized DnfQuery (idempotent).
    """
    if isinstance(q, DnfQuery):
        roots = list(q.conjuncts)
        tag = q.tag
    else:
        validate(q)
        roots = [q.root]
        tag = q.tag

    def alts(n):
        if isinstance(n, Anchor):
            return [Anchor(n.entity)]
        if isinstance(n, Proj):
            return [Proj(n.relation, a) for a in alts(n.source)]
        if isinstance(n, Not):
            sub = alts(n.source)
            if len(sub) == 1:
                return [Not(sub[0])]
            # De Morgan: complement of a union is the intersection of complements
            return [And([Not(a) for a in sub])]
        if isinstance(n, Or):
            out = []
            for s in n.sources:
                out.extend(alts(s))
            return out
        # And: cartesian product of branch alternatives
        combos = [[]]
        for s in n.sources:
            combos = [c + [a] for c in combos for a in alts(s)]
        out = []
        for c in combos:
            out.append(c[0] if len(c) == 1 else And(_sort_branches(c)))
        return out

    conjuncts = []
    for r in roots:
        conjuncts.extend(alts(r))
    return DnfQuery(conjuncts, tag=tag)


# -- JSON-lines dataset encoding ----------------------------------------

def query_to_record(q, answers=None, qclass=None):
    rec = {"tag": q.tag, "anchors": anchors(q), "relations": relations(q)}
    if answers is not None:
        rec["answers"] = sorted(answers)
    if qclass is not None:
        rec["class"] = qclass
    return rec


def record_to_query(rec):
    return instantiate(rec["tag"], rec["anchors"], rec["relations"])
