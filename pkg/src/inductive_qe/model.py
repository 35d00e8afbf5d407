"""Prompt-aware inductive query embedding model.

Entity representations are always produced from context (projected one-hop
neighbors plus relation domain/range embeddings, exchanged through
self-attention and aggregated with prompt-derived weights), never by direct
lookup, so the path exercised at training time is the same one that handles
emerging entities at test time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, fields

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .kg import IN, OUT
from .queries import Anchor, And, Not, Or, Proj, QueryGraph, anchors as query_anchors, to_dnf
from .tokens import Vocabulary, serialize, vocab_ids


class UnsupportedOperatorError(ValueError):
    pass


@dataclass
class ModelConfig:
    dim: int = 64
    backbone: str = "gqe"  # "gqe" (points) | "q2b" (boxes)
    layers: int = 2
    heads: int = 4
    neighbor_cap: int = 32
    global_cap: int = 32
    max_seq: int = 64
    max_bracket_depth: int = 4
    normalize_weights: bool = False  # softmax over Eq-style raw dot weights
    use_prompt: bool = True          # False: uniform aggregation (ablation)
    use_global: bool = True
    use_exchange: bool = True
    box_inside_weight: float = 0.02
    init_scale: float = 0.25
    seed: int = 0

    def to_text(self):
        lines = ["# inductive-qe model config", "version = 1"]
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
        if kv.pop("version", "1") != "1":
            raise ValueError("unsupported model config version")
        kwargs = {}
        for f in fields(cls):
            if f.name in kv:
                raw = kv[f.name]
                if f.type == "bool" or isinstance(getattr(cls, f.name, None), bool):
                    kwargs[f.name] = raw.lower() in ("1", "true", "yes")
                elif f.type == "float" or isinstance(getattr(cls, f.name, None), float):
                    kwargs[f.name] = float(raw)
                elif f.type == "int" or isinstance(getattr(cls, f.name, None), int):
                    kwargs[f.name] = int(raw)
                else:
                    kwargs[f.name] = raw
        return cls(**kwargs)


@dataclass
class ContextBundle:
    """Index-level context of one entity (embedding rows resolved at forward
    time so the same bundle stays valid as parameters move)."""
    entity: int
    local_ent_rows: np.ndarray   # rows into the input embedding table
    local_rel_rows: np.ndarray   # rows into [rel; rel_inverse]
    local_pairs: list            # (relation, neighbor, direction) bookkeeping
    global_rows: np.ndarray      # rows into [domain; range]
    global_pairs: list           # (relation, direction)


@dataclass
class QueryEmbedding:
    kind: str        # "point" | "box"
    conjuncts: list  # per conjunct: center Tensor, or (center, offset) pair


class InductiveQueryModel:
    def __init__(self, n_entities, n_relations, v_train, config=None):
        self.config = config or ModelConfig()
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.v_train = frozenset(v_train)
        rows = sorted(self.v_train)
        self.ent_row = np.full(n_entities, -1, dtype=np.int64)
        for i, e in enumerate(rows):
            self.ent_row[e] = i
        self.n_train = len(rows)
        self.vocab = Vocabulary(n_relations, max_depth=self.config.max_bracket_depth)
        self.params = self._init_params()
        self.ctx_graph = None
        self._ctx_cache = {}

    # -- parameters ------------------------------------------------------

    def _init_params(self):
        cfg = self.config
        d = cfg.dim
        rng = np.random.default_rng(cfg.seed)

        def P(shape, scale):
            return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)

        def zeros(shape):
            return Tensor(np.zeros(shape), requires_grad=True)

        def ones(shape):
            return Tensor(np.ones(shape), requires_grad=True)

        emb = cfg.init_scale
        w = 1.0 / math.sqrt(d)
        p = {
            "ent_in": P((self.n_train, d), emb),
            "rel": P((self.n_relations, d), emb),
            "rel_inv": P((self.n_relations, d), emb),
            "dom": P((self.n_relations, d), emb),
            "rng": P((self.n_relations, d), emb),
            "wq_l": P((d, d), w), "wk_l": P((d, d), w), "wv_l": P((d, d), w),
            "wq_g": P((d, d), w), "wk_g": P((d, d), w), "wv_g": P((d, d), w),
            "tok_emb": P((self.vocab.size, d), 0.02),
            "pos_emb": P((cfg.max_seq, d), 0.02),
            "int_w": P((d, d), w), "int_b": zeros((d,)),
        }
        for i in range(cfg.layers):
            p[f"dec{i}_wq"] = P((d, d), w)
            p[f"dec{i}_wk"] = P((d, d), w)
            p[f"dec{i}_wv"] = P((d, d), w)
            p[f"dec{i}_wo"] = P((d, d), w)
            p[f"dec{i}_w1"] = P((d, 4 * d), w)
            p[f"dec{i}_b1"] = zeros((4 * d,))
            p[f"dec{i}_w2"] = P((4 * d, d), 1.0 / math.sqrt(4 * d))
            p[f"dec{i}_b2"] = zeros((d,))
            p[f"dec{i}_ln1_g"] = ones((d,))
            p[f"dec{i}_ln1_b"] = zeros((d,))
            p[f"dec{i}_ln2_g"] = ones((d,))
            p[f"dec{i}_ln2_b"] = zeros((d,))
        p["dec_lnf_g"] = ones((d,))
        p["dec_lnf_b"] = zeros((d,))
        if cfg.backbone == "q2b":
            p["rel_off"] = P((self.n_relations, d), emb)
            p["box_att_w1"] = P((d, d), w)
            p["box_att_b1"] = zeros((d,))
            p["box_att_w2"] = P((d, d), w)
            p["box_att_b2"] = zeros((d,))
            p["box_shrink_w"] = P((d, d), w)
            p["box_shrink_b"] = zeros((d,))
        return p

    # -- context ---------------------------------------------------------

    def set_context_graph(self, kg):
        """Graph whose edges supply entity contexts (training graph during
        training, the full graph at evaluation time)."""
        self.ctx_graph = kg
        self._ctx_cache = {}

    def gather_context(self, e, rng=None):
        """Seen one-hop neighbors (projected at forward time) plus
        domain/range rows of all incident relations."""
        if e in self._ctx_cache:
            return self._ctx_cache[e]
        kg = self.ctx_graph
        if kg is None:
            raise RuntimeError("no context graph set")
        cap = self.config.neighbor_cap
        seen = [(r, n, d) for r, n, d in kg.neighbors(e) if self.ent_row[n] >= 0]
        sampled = len(seen) > cap
        if sampled:
            rng = rng or np.random.default_rng(self.config.seed + e)
            idx = rng.choice(len(seen), size=cap, replace=False)
            seen = [seen[i] for i in sorted(idx)]
        glob = sorted({(r, d) for r, n, d in kg.neighbors(e)})
        if len(glob) > self.config.global_cap:
            glob = glob[: self.config.global_cap]
        R = self.n_relations
        ctx = ContextBundle(
            entity=e,
            local_ent_rows=np.array([self.ent_row[n] for _, n, _ in seen], dtype=np.int64),
            local_rel_rows=np.array([r + (R if d == IN else 0) for r, _, d in seen],
                                    dtype=np.int64),
            local_pairs=seen,
            global_rows=np.array([(r if d == IN else R + r) for r, d in glob],
                                 dtype=np.int64),
            global_pairs=glob,
        )
        if not sampled:
            self._ctx_cache[e] = ctx
        return ctx

    def precompute_contexts(self, seed=0):
        rng = np.random.default_rng(seed)
        for e in range(self.n_entities):
            if e not in self._ctx_cache:
                self._ctx_cache[e] = self.gather_context(e, rng)
        return self._ctx_cache

    def project_neighbor(self, e_vec, relation, direction):
        """Project a neighbor's input embedding toward the central entity."""
        table = self.params["rel_inv" if direction == IN else "rel"]
        return ad.add(e_vec, ad.slice_(table, relation))

    # -- attention exchange ---------------------------------------------

    def _exchange_batched(self, E, wq, wk, wv, mask):
        # E: (m, n, d); mask: (m, n) with 1 for real rows
        d = self.config.dim
        q = ad.matmul(E, self.params[wq])
        k = ad.matmul(E, self.params[wk])
        v = ad.matmul(E, self.params[wv])
        scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(d))
        neg = Tensor((1.0 - mask)[:, None, :] * -1e9)
        att = ad.softmax(ad.add(scores, neg), axis=-1)
        return ad.matmul(att, v)

    def exchange(self, E, which="local"):
        """Self-attention information exchange over one n x d context matrix."""
        if E.data.shape[0] == 0:
            return Tensor(np.zeros((0, self.config.dim)))
        suffix = "l" if which == "local" else "g"
        m = ad.reshape(E, (1,) + E.data.shape)
        out = self._exchange_batched(m, f"wq_{suffix}", f"wk_{suffix}", f"wv_{suffix}",
                                     np.ones((1, E.data.shape[0])))
        return ad.reshape(out, E.data.shape)

    # -- prompt decoder ---------------------------------------------------

    def encode_prompt_batch(self, sequences):
        """Masked self-attention decoder over several symbol sequences at
        once, right-padded to a common length. Padded positions only ever
        sit after real ones, so the causal mask keeps them out of every real
        position's attention; their outputs are garbage and must not be read.
        Returns a (B, T_max, d) Tensor."""
        cfg = self.config
        if not sequences:
            raise ValueError("empty sequence batch")
        lens = [len(s) for s in sequences]
        if min(lens) == 0:
            raise ValueError("empty token sequence")
        T = max(lens)
        if T > cfg.max_seq:
            raise ValueError(f"sequence length {T} exceeds max {cfg.max_seq}")
        ids = np.zeros((len(sequences), T), dtype=np.int64)
        for i, s in enumerate(sequences):
            ids[i, :len(s)] = s
        if ids.min() < 0 or ids.max() >= self.vocab.size:
            raise ValueError("token id outside vocabulary")
        d, H = cfg.dim, cfg.heads
        dh = d // H
        p = self.params
        x = ad.add(ad.gather(p["tok_emb"], ids), ad.slice_(p["pos_emb"], slice(0, T)))
        causal = Tensor(np.triu(np.full((T, T), -1e9), k=1))

        def ln(t, g, b):
            return ad.add(ad.mul(ad.layer_norm(t), p[g]), p[b])

        B = len(sequences)
        for i in range(cfg.layers):
            h = ln(x, f"dec{i}_ln1_g", f"dec{i}_ln1_b")

            def heads(w):
                t = ad.reshape(ad.matmul(h, p[w]), (B, T, H, dh))
                return ad.transpose(t, (0, 2, 1, 3))

            q, k, v = heads(f"dec{i}_wq"), heads(f"dec{i}_wk"), heads(f"dec{i}_wv")
            scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(dh))
            att = ad.softmax(ad.add(scores, causal), axis=-1)
            av = ad.matmul(att, v)                       # (B, H, T, dh)
            av = ad.reshape(ad.transpose(av, (0, 2, 1, 3)), (B, T, d))
            x = ad.add(x, ad.matmul(av, p[f"dec{i}_wo"]))
            h2 = ln(x, f"dec{i}_ln2_g", f"dec{i}_ln2_b")
            ff = ad.add(ad.matmul(ad.relu(
                ad.add(ad.matmul(h2, p[f"dec{i}_w1"]), p[f"dec{i}_b1"])),
                p[f"dec{i}_w2"]), p[f"dec{i}_b2"])
            x = ad.add(x, ff)
        return ln(x, "dec_lnf_g", "dec_lnf_b")

    def encode_prompt(self, token_ids):
        """Decoder output for a single symbol sequence: (T, d)."""
        out = self.encode_prompt_batch([list(token_ids)])
        return ad.reshape(out, out.data.shape[1:])

    def prompt_for(self, q):
        seq = serialize(q)
        return seq, self.encode_prompt(vocab_ids(seq, self.vocab))

    # -- aggregation ------------------------------------------------------

    def exchange_contexts(self, ctxs):
        """Pad a batch of context bundles and run the attention exchange once.

        The result is prompt-independent, so it can be shared by every query
        that touches these entities within one tape.
        """
        cfg = self.config
        m = len(ctxs)
        capL = max(1, max(len(c.local_ent_rows) for c in ctxs))
        capG = max(1, max(len(c.global_rows) for c in ctxs))
        nb_ent = np.zeros((m, capL), dtype=np.int64)
        nb_rel = np.zeros((m, capL), dtype=np.int64)
        maskL = np.zeros((m, capL))
        gl = np.zeros((m, capG), dtype=np.int64)
        maskG = np.zeros((m, capG))
        for i, c in enumerate(ctxs):
            nL, nG = len(c.local_ent_rows), len(c.global_rows)
            nb_ent[i, :nL] = c.local_ent_rows
            nb_rel[i, :nL] = c.local_rel_rows
            maskL[i, :nL] = 1.0
            gl[i, :nG] = c.global_rows
            maskG[i, :nG] = 1.0
            if nL == 0 and (nG == 0 or not cfg.use_global):
                warnings.warn(f"entity {c.entity} has no usable context; "
                              "representation falls back to the zero vector")
        if not cfg.use_global:
            maskG = np.zeros_like(maskG)

        p = self.params
        relcat = ad.concat([p["rel"], p["rel_inv"]], axis=0)
        domrng = ad.concat([p["dom"], p["rng"]], axis=0)
        E_L = ad.add(ad.gather(p["ent_in"], nb_ent), ad.gather(relcat, nb_rel))
        E_G = ad.gather(domrng, gl)
        if cfg.use_exchange:
            E_Lx = self._exchange_batched(E_L, "wq_l", "wk_l", "wv_l", maskL)
            E_Gx = self._exchange_batched(E_G, "wq_g", "wk_g", "wv_g", maskG)
        else:
            E_Lx, E_Gx = E_L, E_G
        return E_Lx, E_Gx, maskL, maskG

    def aggregate_rows(self, exchanged, rows, O, positions):
        """Prompt-weighted aggregation of pre-exchanged context rows."""
        pvec = ad.slice_(O, np.asarray(positions, dtype=np.int64))
        return self.aggregate_rows_pv(exchanged, rows, pvec)

    def aggregate_rows_pv(self, exchanged, rows, pvec):
        """As aggregate_rows, but with the per-entity prompt vectors already
        gathered into an (m, d) Tensor (possibly from several prompts)."""
        cfg = self.config
        d = cfg.dim
        rows = np.asarray(rows, dtype=np.int64)
        m = len(rows)
        E_Lall, E_Gall, maskLall, maskGall = exchanged
        E_Lx = ad.slice_(E_Lall, rows)
        E_Gx = ad.slice_(E_Gall, rows)
        maskL = maskLall[rows]
        maskG = maskGall[rows]

        pvec = ad.reshape(pvec, (m, 1, d))

        def side(Ex, mask):
            if cfg.use_prompt:
                alpha = ad.reduce_sum(ad.mul(Ex, pvec), axis=-1)  # (m, n)
                if cfg.normalize_weights:
                    alpha = ad.mul(ad.softmax(
                        ad.add(alpha, Tensor((mask - 1.0) * 1e9)), axis=-1),
                        Tensor(mask))
                else:
                    alpha = ad.mul(alpha, Tensor(mask))
            else:
                counts = np.maximum(mask.sum(axis=1, keepdims=True), 1.0)
                alpha = Tensor(mask / counts)
            return ad.reduce_sum(
                ad.mul(ad.reshape(alpha, alpha.data.shape + (1,)), Ex), axis=1)

        e_L = side(E_Lx, maskL)
        e_G = side(E_Gx, maskG)
        presL = (maskL.sum(axis=1, keepdims=True) > 0).astype(float)
        presG = (maskG.sum(axis=1, keepdims=True) > 0).astype(float)
        denom = np.maximum(presL + presG, 1.0)
        total = ad.add(ad.mul(e_L, Tensor(presL)), ad.mul(e_G, Tensor(presG)))
        return ad.mul(total, Tensor(1.0 / denom))

    def _aggregate(self, ctxs, O, positions):
        """One-shot context aggregation for a batch of entities."""
        return self.aggregate_rows(self.exchange_contexts(ctxs),
                                   np.arange(len(ctxs)), O, positions)

    def aggregate_anchor(self, ctx, O, anchor_pos):
        if not (0 <= anchor_pos < O.data.shape[0]):
            raise ValueError(f"prompt position {anchor_pos} out of range")
        out = self._aggregate([ctx], O, [anchor_pos])
        return ad.reshape(out, (self.config.dim,))

    def entity_reprs(self, entities, O, positions, rng=None):
        """Context-pipeline representations of several entities under one
        prompt; `positions` pairs each entity with its prompt token."""
        ctxs = [self.gather_context(e, rng) for e in entities]
        return self._aggregate(ctxs, O, positions)

    # -- baselines --------------------------------------------------------

    def baseline_mean(self, e):
        """Plain mean of seen-neighbor input embeddings; no projection,
        no attention, no prompt."""
        kg = self.ctx_graph
        rows = sorted({self.ent_row[n] for _, n, _ in kg.neighbors(e)
                       if self.ent_row[n] >= 0})
        if not rows:
            warnings.warn(f"entity {e} has no seen neighbors; mean baseline "
                          "falls back to the zero vector")
            return Tensor(np.zeros(self.config.dim))
        return ad.reduce_mean(ad.gather(self.params["ent_in"],
                                        np.array(rows, dtype=np.int64)), axis=0)

    def baseline_feature(self, kg_train, kg_full, e_emerging):
        """Input embedding of the seen entity sharing the most
        (relation, neighbor, direction) features with the emerging entity."""
        target = set(kg_full.neighbors(e_emerging))
        best, best_overlap = None, 0
        for e in sorted(self.v_train):
            overlap = len(target.intersection(kg_train.neighbors(e)))
            if overlap > best_overlap:
                best, best_overlap = e, overlap
        if best is None:
            warnings.warn(f"entity {e_emerging} shares no features with any "
                          "seen entity; feature baseline returns zero")
            return Tensor(np.zeros(self.config.dim))
        return ad.slice_(self.params["ent_in"], int(self.ent_row[best]))

    # -- query embedding --------------------------------------------------

    def embed_query(self, q, anchor_reprs):
        """Fold a (negation-free, DNF-normalized) query into its embedding.

        `anchor_reprs` is an (n_anchors, d) Tensor, rows in the query's
        anchor traversal order.
        """
        ents = query_anchors(q)
        row_of = {}
        for i, e in enumerate(ents):
            row_of.setdefault(e, i)
        dnf = to_dnf(q) if isinstance(q, QueryGraph) else q
        p = self.params
        d = self.config.dim

        def anchor_vec(e):
            return ad.reshape(ad.slice_(anchor_reprs, row_of[e]), (d,))

        def point(n):
            if isinstance(n, Anchor):
                return anchor_vec(n.entity)
            if isinstance(n, Proj):
                return ad.add(point(n.source), ad.slice_(p["rel"], n.relation))
            if isinstance(n, Not):
                raise UnsupportedOperatorError(
                    "the learned backbones handle only positive queries")
            if isinstance(n, Or):
                raise UnsupportedOperatorError("query must be DNF-normalized")
            branches = ad.stack([point(s) for s in n.sources], axis=0)
            mn = ad.reduce_min(branches, axis=0)
            return ad.add(ad.matmul(mn, p["int_w"]), p["int_b"])

        def box(n):
            if isinstance(n, Anchor):
                return anchor_vec(n.entity), Tensor(np.zeros(d))
            if isinstance(n, Proj):
                c, o = box(n.source)
                c = ad.add(c, ad.slice_(p["rel"], n.relation))
                o = ad.add(o, ad.softplus(ad.slice_(p["rel_off"], n.relation)))
                return c, o
            if isinstance(n, Not):
                raise UnsupportedOperatorError(
                    "the learned backbones handle only positive queries")
            if isinstance(n, Or):
                raise UnsupportedOperatorError("query must be DNF-normalized")
            pairs = [box(s) for s in n.sources]
            C = ad.stack([c for c, _ in pairs], axis=0)   # (k, d)
            Off = ad.stack([o for _, o in pairs], axis=0)
            scores = ad.add(ad.matmul(ad.relu(
                ad.add(ad.matmul(C, p["box_att_w1"]), p["box_att_b1"])),
                p["box_att_w2"]), p["box_att_b2"])
            att = ad.softmax(scores, axis=0)              # dimension-wise
            center = ad.reduce_sum(ad.mul(att, C), axis=0)
            shrink = ad.sigmoid(ad.add(
                ad.matmul(ad.reduce_mean(Off, axis=0), p["box_shrink_w"]),
                p["box_shrink_b"]))
            offset = ad.mul(ad.reduce_min(Off, axis=0), shrink)
            return center, offset

        fold = point if self.config.backbone == "gqe" else box
        return QueryEmbedding(
            kind="point" if self.config.backbone == "gqe" else "box",
            conjuncts=[fold(c) for c in dnf.conjuncts])

    def distance(self, qe, e):
        """Distance from a query embedding to entity vector(s) (d,) or (N, d);
        DNF embeddings score as the minimum over conjuncts."""
        dists = []
        for conj in qe.conjuncts:
            if qe.kind == "point":
                dists.append(ad.l1_distance(e, conj))
            else:
                c, o = conj
                diff = ad.abs_(ad.sub(e, c))
                outside = ad.reduce_sum(ad.relu(ad.sub(diff, o)), axis=-1)
                inside = ad.reduce_sum(ad.minimum(diff, o), axis=-1)
                dists.append(ad.add(outside, ad.scale(inside, self.config.box_inside_weight)))
        out = dists[0]
        for other in dists[1:]:
            out = ad.minimum(out, other)
        return out

    # -- persistence ------------------------------------------------------

    def save(self, ckpt_path, config_path=None):
        ad.save_checkpoint(self.params, ckpt_path)
        if config_path:
            with open(config_path, "w", encoding="utf-8") as fh:
                fh.write(self.config.to_text())

    def load_params(self, ckpt_path):
        loaded = ad.load_checkpoint(ckpt_path)
        missing = set(self.params) - set(loaded)
        if missing:
            raise ValueError(f"checkpoint missing tensors: {sorted(missing)}")
        for name in self.params:
            if self.params[name].data.shape != loaded[name].data.shape:
                raise ValueError(f"shape mismatch for {name}")
            self.params[name] = loaded[name]
