"""Ranking, MRR, and per-structure / per-class evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .bench import EVAL_CLASSES
from .queries import STRUCTURES


@dataclass
class EvalProtocol:
    filtered: bool = True
    # "intersect": emerging answers only for SE queries; "difference" keeps
    # the seen answers instead.
    se_rule: str = "intersect"

    def answer_set(self, record, v_test):
        if record.qclass == "SE":
            if self.se_rule == "intersect":
                return frozenset(record.answers) & v_test
            if self.se_rule == "difference":
                return frozenset(record.answers) - v_test
            raise ValueError(f"unknown SE rule {self.se_rule!r}")
        return frozenset(record.answers)


def rank(distances):
    """Candidate permutation sorted by ascending distance; ties break toward
    the lower entity id (stable sort over ids already in order)."""
    distances = np.asarray(distances)
    return np.argsort(distances, kind="stable")


def mrr(ranking, answers, filtered=True):
    """Mean reciprocal rank of `answers` within a candidate permutation.

    With filtering, other answers ranked above each answer are removed
    before computing its rank.
    """
    answers = sorted(answers)
    if not answers:
        raise ValueError("empty answer set")
    pos = np.empty(len(ranking), dtype=np.int64)
    pos[ranking] = np.arange(len(ranking))
    raw = np.array([pos[a] + 1 for a in answers], dtype=np.int64)
    if filtered:
        order = np.argsort(raw)
        eff = raw.astype(float).copy()
        eff[order] = raw[order] - np.arange(len(raw))
        ranks = eff
    else:
        ranks = raw.astype(float)
    return float(np.mean(1.0 / ranks))


@dataclass
class EvalReport:
    cells: dict = field(default_factory=dict)  # (tag, class) -> (mean MRR, count)
    skipped: int = 0

    @property
    def tags(self):
        return sorted({t for t, _ in self.cells})

    def mrr_of(self, tag, qclass):
        return self.cells.get((tag, qclass), (None, 0))[0]

    def class_average(self, qclass):
        vals = [(m, c) for (t, cl), (m, c) in self.cells.items() if cl == qclass]
        total = sum(c for _, c in vals)
        if total == 0:
            return None
        return sum(m * c for m, c in vals) / total

    def overall_average(self):
        means = [self.class_average(c) for c in EVAL_CLASSES]
        means = [m for m in means if m is not None]
        return sum(means) / len(means) if means else None

    def _rows(self):
        rows = []
        for tag in sorted(STRUCTURES):
            if tag in self.tags:
                rows.append((tag, [self.mrr_of(tag, c) for c in EVAL_CLASSES]))
        rows.append(("avg", [self.class_average(c) for c in EVAL_CLASSES]))
        return rows

    def to_csv(self):
        def fmt(v):
            return "" if v is None else f"{v:.6f}"
        lines = ["structure," + ",".join(EVAL_CLASSES)]
        for tag, vals in self._rows():
            lines.append(tag + "," + ",".join(fmt(v) for v in vals))
        return "\n".join(lines) + "\n"

    def to_text(self):
        def fmt(v):
            return "   -  " if v is None else f"{v:6.4f}"
        lines = ["structure   " + "  ".join(f"{c:>6}" for c in EVAL_CLASSES)]
        for tag, vals in self._rows():
            lines.append(f"{tag:<10}  " + "  ".join(fmt(v) for v in vals))
        return "\n".join(lines) + "\n"


def evaluate(score_fn, records, v_test, protocol=None):
    """Aggregate MRR per (structure, class).

    `score_fn(record)` returns a distance per candidate entity (every entity
    of the full graph). Records whose protocol answer set is empty are
    skipped and counted, not scored as zero.
    """
    protocol = protocol or EvalProtocol()
    v_test = frozenset(v_test)
    sums = {}
    counts = {}
    skipped = 0
    for rec in records:
        if rec.qclass not in EVAL_CLASSES:
            raise ValueError(f"evaluation split contains class {rec.qclass}")
        answers = protocol.answer_set(rec, v_test)
        if not answers:
            skipped += 1
            continue
        order = rank(score_fn(rec))
        value = mrr(order, answers, filtered=protocol.filtered)
        key = (rec.query.tag, rec.qclass)
        sums[key] = sums.get(key, 0.0) + value
        counts[key] = counts.get(key, 0) + 1
    report = EvalReport(skipped=skipped)
    for key in sums:
        report.cells[key] = (sums[key] / counts[key], counts[key])
    return report


def model_scorer(model):
    """Distance function over all entities using the full inductive pipeline
    (prompt-weighted context aggregation for anchors and candidates)."""
    n = model.n_entities
    # parameters are fixed during evaluation, so the prompt-independent
    # exchange over all entity contexts is computed once up front
    with ad.no_grad():
        exchanged = model.exchange_contexts(
            [model.gather_context(e) for e in range(n)])

    def score(rec):
        with ad.no_grad():
            seq, O = model.prompt_for(rec.query)
            anchor_reprs = model.aggregate_rows(
                exchanged, list(seq.anchor_entities), O, seq.anchor_positions)
            qe = model.embed_query(rec.query, anchor_reprs)
            cands = model.aggregate_rows(exchanged, np.arange(n), O,
                                         [seq.answer_position] * n)
            return model.distance(qe, cands).data

    return score


def mean_baseline_scorer(model):
    """Same protocol with every entity represented by the plain mean of its
    seen neighbors' input embeddings (candidates are query-independent and
    cached)."""
    import warnings

    from .queries import anchors as query_anchors

    n = model.n_entities
    with ad.no_grad(), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cands = ad.Tensor(np.stack([model.baseline_mean(e).data
                                    for e in range(n)]))

    def score(rec):
        with ad.no_grad(), warnings.catch_warnings():
            warnings.simplefilter("ignore")
            anchor_reprs = ad.stack(
                [model.baseline_mean(e) for e in query_anchors(rec.query)],
                axis=0)
            qe = model.embed_query(rec.query, anchor_reprs)
            return model.distance(qe, cands).data

    return score


def analytic_random_mrr(n_candidates, answer_sizes, filtered=True):
    """Expected MRR (and std of the dataset mean) when the ranking is
    uniformly random; per-answer ranks treated as independent."""
    answer_sizes = list(answer_sizes)
    means, variances = [], []
    cache = {}
    for a in answer_sizes:
        n_eff = n_candidates - a + 1 if filtered else n_candidates
        if n_eff not in cache:
            inv = 1.0 / np.arange(1, n_eff + 1)
            e1 = inv.sum() / n_eff
            e2 = (inv * inv).sum() / n_eff
            cache[n_eff] = (e1, e2 - e1 * e1)
        e1, var1 = cache[n_eff]
        means.append(e1)
        variances.append(var1 / a)
    q = len(answer_sizes)
    return float(np.mean(means)), float(np.sqrt(np.sum(variances)) / q)
