"""Negative-sampling margin training of the inductive query model."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor, adam_step, backward, zero_grads
from .tokens import serialize, vocab_ids


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-4
    steps: int = 1000
    batch_size: int = 32
    negatives: int = 32
    margin: float = 24.0
    seed: int = 0
    weight_mode: str = "sqrt"  # "sqrt": sqrt(|V_q|) per-sample weight; "inv_sqrt" inverts it
    ckpt_every: int = 0        # 0: only final checkpoint
    log_path: str | None = None
    ckpt_path: str | None = None

    def __post_init__(self):
        if self.lr <= 0 or self.steps <= 0 or self.batch_size <= 0 \
                or self.negatives <= 0 or self.margin <= 0:
            raise ValueError("all training hyperparameters must be positive")
        if self.weight_mode not in ("sqrt", "inv_sqrt"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")


def sample_negatives(n_entities, answers, k, rng):
    """k uniform entities outside the answer set, without replacement."""
    candidates = np.setdiff1d(np.arange(n_entities), np.fromiter(answers, dtype=np.int64))
    if len(candidates) < k:
        raise ValueError(
            f"cannot draw {k} negatives from {len(candidates)} non-answers")
    return [int(e) for e in rng.choice(candidates, size=k, replace=False)]


def query_loss(model, qe, pos_vec, neg_vecs, margin):
    """-log s(margin - D(q,e)) - (1/k) sum log s(D(q,e'_i) - margin)."""
    gamma = Tensor(float(margin))
    d_pos = model.distance(qe, pos_vec)
    d_neg = model.distance(qe, neg_vecs)
    pos_term = ad.scale(ad.log_sigmoid(ad.sub(gamma, d_pos)), -1.0)
    neg_term = ad.scale(ad.reduce_mean(ad.log_sigmoid(ad.sub(d_neg, gamma))), -1.0)
    return ad.add(pos_term, neg_term)


def batch_loss(losses, answer_sizes, weight_mode="sqrt"):
    """Answer-set-size weighted sum of per-query losses."""
    if not losses:
        raise ValueError("empty batch")
    if len(losses) != len(answer_sizes):
        raise ValueError("losses and answer_sizes length mismatch")
    w = np.sqrt(np.asarray(answer_sizes, dtype=float))
    if weight_mode == "inv_sqrt":
        w = 1.0 / w
    stacked = ad.stack(losses, axis=0)
    return ad.reduce_sum(ad.mul(stacked, Tensor(w)))


def _batch_losses(model, picks, exchanged, row_of, margin):
    """Per-query losses with the entity aggregation batched across the step:
    prompts are encoded per query, then every (entity, prompt-position) pair
    in the batch goes through one aggregation call."""
    d = model.config.dim
    # identical token sequences (same structure + relations) share one
    # decoder pass; anchors only enter through the aggregation step
    uniq = {}
    for _, _, ids, _ in picks:
        uniq.setdefault(tuple(ids), len(uniq))
    O_b = model.encode_prompt_batch(list(uniq))
    rows, pvecs, offsets = [], [], [0]
    for rec, seq, ids, entities in picks:
        qi = uniq[tuple(ids)]
        positions = list(seq.anchor_positions) + \
            [seq.answer_position] * (len(entities) - len(seq.anchor_entities))
        pvecs.append(ad.slice_(O_b, (qi, np.asarray(positions, dtype=np.int64))))
        rows.extend(row_of[e] for e in entities)
        offsets.append(offsets[-1] + len(entities))
    reprs = model.aggregate_rows_pv(exchanged, rows, ad.concat(pvecs, axis=0))

    losses = []
    for (rec, seq, ids, entities), off in zip(picks, offsets):
        n_anchors = len(seq.anchor_entities)
        anchor_reprs = ad.slice_(reprs, slice(off, off + n_anchors))
        pos_vec = ad.reshape(ad.slice_(reprs, off + n_anchors), (d,))
        neg_vecs = ad.slice_(reprs,
                             slice(off + n_anchors + 1, off + len(entities)))
        qe = model.embed_query(rec.query, anchor_reprs)
        losses.append(query_loss(model, qe, pos_vec, neg_vecs, margin))
    return losses


def train(model, dataset, kg_train, config):
    """Adam training loop with the lr halved at the halfway point.

    Deterministic for a fixed seed on one thread. Returns the per-step list
    of (step, lr, mean query loss).
    """
    if not dataset:
        raise ValueError("empty training dataset")
    model.set_context_graph(kg_train)
    model.precompute_contexts(config.seed)
    cached = []
    for rec in dataset:
        seq = serialize(rec.query)
        cached.append((rec, seq, vocab_ids(seq, model.vocab),
                       sorted(rec.answers)))

    rng = np.random.default_rng(config.seed)
    adam = AdamState(lr=config.lr)
    log = []
    half = config.steps // 2
    for step in range(config.steps):
        adam.lr = config.lr if step < half else config.lr / 2
        idx = rng.choice(len(cached), size=min(config.batch_size, len(cached)),
                         replace=len(cached) < config.batch_size)
        picks, sizes = [], []
        for i in idx:
            rec, seq, ids, answers = cached[i]
            pos = int(answers[rng.integers(len(answers))])
            negs = sample_negatives(model.n_entities, rec.answers,
                                    config.negatives, rng)
            picks.append((rec, seq, ids,
                          list(seq.anchor_entities) + [pos] + negs))
            sizes.append(len(answers))
        # the attention exchange is prompt-independent, so entities shared
        # across the batch are exchanged once and reused by every query
        batch_entities = sorted({e for *_, ents in picks for e in ents})
        row_of = {e: j for j, e in enumerate(batch_entities)}
        with Tape() as tape:
            exchanged = model.exchange_contexts(
                [model.gather_context(e) for e in batch_entities])
            losses = _batch_losses(model, picks, exchanged, row_of,
                                   config.margin)
            total = batch_loss(losses, sizes, config.weight_mode)
            if not np.isfinite(total.data):
                raise TrainingDiverged(
                    f"non-finite loss at step {step}: per-query losses "
                    f"{[float(l.data) for l in losses]}")
            backward(total, tape)
        adam_step(model.params, adam)
        zero_grads(model.params)
        mean_loss = float(np.mean([l.data for l in losses]))
        log.append((step, adam.lr, mean_loss))
        if config.ckpt_every and config.ckpt_path and \
                (step + 1) % config.ckpt_every == 0:
            model.save(config.ckpt_path)
    if config.ckpt_path:
        model.save(config.ckpt_path)
    if config.log_path:
        with open(config.log_path, "w", encoding="utf-8") as fh:
            fh.write("step,lr,loss\n")
            for step, lr, loss in log:
                fh.write(f"{step},{lr},{loss}\n")
    return log
