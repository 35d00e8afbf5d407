"""Symbol-sequence serialization of queries and the prompt token vocabulary."""

from __future__ import annotations

from dataclasses import dataclass, field

from .queries import (Anchor, And, Not, Or, Proj, QueryGraph, STRUCTURES,
                      anchors as query_anchors, canonicalize, instantiate,
                      shape_signature, validate)

ENT = "ENT"
MASK = "MASK"
REL = "REL"
INT = "INT"
UNI = "UNI"
NEG = "NEG"
BCK_L = "BCK_L"
BCK_R = "BCK_R"


class SerializationError(ValueError):
    pass


class TokenParseError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str
    value: int = 0  # relation id for REL, bracket depth for BCK_L/BCK_R

    def text(self):
        if self.kind == REL:
            return f"[r_{self.value}]"
        if self.kind in (BCK_L, BCK_R):
            return f"[{self.kind}{self.value}]"
        return f"[{self.kind}]"


@dataclass
class TokenSequence:
    tokens: list
    anchor_positions: list
    answer_position: int
    anchor_entities: list  # bookkeeping; anchors in token-stream order

    def text(self):
        return " ".join(t.text() for t in self.tokens)

    def __len__(self):
        return len(self.tokens)


class Vocabulary:
    """Injective token -> integer id map; every relation gets its own slot."""

    def __init__(self, n_relations, max_depth=4):
        self.n_relations = n_relations
        self.max_depth = max_depth
        self._fixed = {ENT: 0, MASK: 1, INT: 2, UNI: 3, NEG: 4}
        self._l_base = 5
        self._r_base = 5 + (max_depth + 1)
        self._rel_base = 5 + 2 * (max_depth + 1)

    @property
    def size(self):
        return self._rel_base + self.n_relations

    def id_of(self, token):
        if token.kind in self._fixed:
            return self._fixed[token.kind]
        if token.kind in (BCK_L, BCK_R):
            if not (0 <= token.value <= self.max_depth):
                raise SerializationError(
                    f"bracket depth {token.value} exceeds vocabulary max {self.max_depth}")
            base = self._l_base if token.kind == BCK_L else self._r_base
            return base + token.value
        if token.kind == REL:
            if not (0 <= token.value < self.n_relations):
                raise SerializationError(f"unknown relation id {token.value}")
            return self._rel_base + token.value
        raise SerializationError(f"unknown token kind {token.kind!r}")


def vocab_ids(seq, vocab):
    return [vocab.id_of(t) for t in seq.tokens]


def serialize(q):
    """Render a query as its canonical symbol sequence.

    Grammar: an anchor chain is BCK_L(d) ENT (REL MASK | NEG MASK)* BCK_R(d);
    an n-ary operator wraps its branches one bracket level higher and appends
    its operator token plus a result MASK inside the outer brackets; a
    projection continuing from an operator result appends REL MASK after the
    closing bracket. A final ENT stands for the answer node.
    """
    q = canonicalize(validate(q))

    def render(n):
        # returns (tokens, max_bracket_depth, extendable_chain?)
        if isinstance(n, Anchor):
            return [Token(BCK_L, 0), Token(ENT), Token(BCK_R, 0)], 0, True
        if isinstance(n, (Proj, Not)):
            toks, depth, chain = render(n.source)
            step = ([Token(REL, n.relation), Token(MASK)] if isinstance(n, Proj)
                    else [Token(NEG), Token(MASK)])
            if chain:
                return toks[:-1] + step + [toks[-1]], depth, True
            return toks + step, depth, False
        op = Token(INT) if isinstance(n, And) else Token(UNI)
        parts, depth = [], 0
        for s in n.sources:
            toks, d, _ = render(s)
            parts.extend(toks)
            depth = max(depth, d)
        depth += 1
        toks = [Token(BCK_L, depth)] + parts + [op, Token(MASK), Token(BCK_R, depth)]
        return toks, depth, False

    toks, _, _ = render(q.root)
    toks = toks + [Token(ENT)]
    positions = [i for i, t in enumerate(toks) if t.kind == ENT]
    return TokenSequence(tokens=toks,
                         anchor_positions=positions[:-1],
                         answer_position=len(toks) - 1,
                         anchor_entities=query_anchors(q))


_SHAPE_TO_TAG = None


def _tag_for_shape(root):
    global _SHAPE_TO_TAG
    if _SHAPE_TO_TAG is None:
        _SHAPE_TO_TAG = {}
        for tag, (na, nr) in STRUCTURES.items():
            q = instantiate(tag, list(range(na)), list(range(nr)))
            _SHAPE_TO_TAG[shape_signature(q.root)] = tag
    return _SHAPE_TO_TAG.get(shape_signature(root))


def parse(seq):
    """Inverse of serialize(); anchor ids are taken from the sequence's
    bookkeeping fields in token-stream order."""
    toks = seq.tokens
    pos = 0
    anchor_iter = iter(seq.anchor_entities)

    def err(msg, at):
        raise TokenParseError(f"{msg} at position {at}")

    def peek():
        return toks[pos] if pos < len(toks) else None

    def take(kind=None):
        nonlocal pos
        t = peek()
        if t is None:
            err("unexpected end of sequence", pos)
        if kind is not None and t.kind != kind:
            err(f"expected [{kind}], found {t.text()}", pos)
        pos += 1
        return t

    def parse_operand():
        expr = parse_bracketed()
        while peek() is not None and peek().kind in (REL, NEG):
            t = take()
            take(MASK)
            expr = Proj(t.value, expr) if t.kind == REL else Not(expr)
        return expr

    def parse_bracketed():
        opening = take(BCK_L)
        t = peek()
        if t is None:
            err("unexpected end of sequence", pos)
        if t.kind == ENT:
            take(ENT)
            try:
                expr = Anchor(next(anchor_iter))
            except StopIteration:
                err("more anchor [ENT] tokens than anchor entities", pos - 1)
            while peek() is not None and peek().kind in (REL, NEG):
                step = take()
                take(MASK)
                expr = Proj(step.value, expr) if step.kind == REL else Not(expr)
        elif t.kind == BCK_L:
            branches = []
            while peek() is not None and peek().kind == BCK_L:
                branches.append(parse_operand())
            op = take()
            if op.kind not in (INT, UNI):
                err(f"expected [INT] or [UNI], found {op.text()}", pos - 1)
            if len(branches) < 2:
                err("operator needs >= 2 branches", pos - 1)
            take(MASK)
            expr = And(branches) if op.kind == INT else Or(branches)
        else:
            err(f"expected [ENT] or [{BCK_L}], found {t.text()}", pos)
        closing = take(BCK_R)
        if closing.value != opening.value:
            err(f"bracket depth mismatch: [{BCK_L}{opening.value}] closed by "
                f"{closing.text()}", pos - 1)
        return expr

    root = parse_operand()
    take(ENT)  # answer node
    if pos != len(toks):
        err(f"trailing token {toks[pos].text()}", pos)
    if next(anchor_iter, None) is not None:
        raise TokenParseError("unused anchor entities left over")
    q = canonicalize(QueryGraph(root))
    q.tag = _tag_for_shape(q.root)
    return q


def check_brackets(seq):
    """Bracket balance/nesting invariant: every depth's brackets pair up."""
    stack = []
    for i, t in enumerate(seq.tokens):
        if t.kind == BCK_L:
            stack.append((t.value, i))
        elif t.kind == BCK_R:
            if not stack or stack[-1][0] != t.value:
                raise TokenParseError(f"unbalanced bracket {t.text()} at position {i}")
            stack.pop()
    if stack:
        raise TokenParseError(f"unclosed bracket at position {stack[-1][1]}")
