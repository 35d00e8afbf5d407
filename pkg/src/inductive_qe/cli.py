"""Batch-oriented command line front end: `iqe <subcommand> ...`."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import bench, evaluation, kg as kgmod, synth, tokens, training
from .model import InductiveQueryModel, ModelConfig
from .queries import instantiate
from .symbolic import answer_set


def _int_list(text):
    return [int(x) for x in text.split(",") if x != ""]


def _load_config_file(path):
    overlay = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            overlay[key.strip().replace("-", "_")] = value.strip()
    return overlay


def _apply_config(args, parser_defaults):
    """Overlay `key = value` config-file entries; explicit flags win."""
    if not getattr(args, "config", None):
        return
    overlay = _load_config_file(args.config)
    for key, raw in overlay.items():
        if key not in parser_defaults:
            raise ValueError(f"unknown config key {key!r}")
        default = parser_defaults[key]
        if getattr(args, key) != default:
            continue  # flag was given explicitly
        if isinstance(default, bool):
            value = raw.lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            value = int(raw)
        elif isinstance(default, float):
            value = float(raw)
        else:
            value = raw
        setattr(args, key, value)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iqe",
        description="Inductive logical query answering over knowledge graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-kg", help="generate the deterministic synthetic KG")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--entities", type=int, default=300, help="number of entities")
    p.add_argument("--relations", type=int, default=12, help="number of relations")
    p.add_argument("--clusters", type=int, default=10, help="number of entity clusters")
    p.add_argument("--out-degree", type=int, default=2,
                   help="edges per (entity, active relation)")
    p.add_argument("--seed", type=int, default=0, help="generator seed")

    p = sub.add_parser("build-bench", help="build an inductive query benchmark")
    p.add_argument("--triples", required=True, help="TSV triple file")
    p.add_argument("--fraction", type=float, default=0.2,
                   help="fraction of entities held out as emerging")
    p.add_argument("--seed", type=int, default=0, help="split/sampling seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-count", type=int, default=100,
                   help="training queries per structure")
    p.add_argument("--eval-count", type=int, default=30,
                   help="valid/test queries per structure per split")
    p.add_argument("--max-answers", type=int, default=100,
                   help="reject queries with more answers than this")
    p.add_argument("--config", default=None, help="key = value config file")

    p = sub.add_parser("ground", help="evaluate one query symbolically")
    p.add_argument("--triples", required=True, help="TSV triple file")
    p.add_argument("--tag", required=True, help="query structure (1p..up)")
    p.add_argument("--anchors", required=True, type=_int_list,
                   help="comma-separated anchor entity ids")
    p.add_argument("--relations", required=True, type=_int_list,
                   help="comma-separated relation ids")

    p = sub.add_parser("serialize", help="print a query's token sequence")
    p.add_argument("--tag", required=True, help="query structure (1p..up)")
    p.add_argument("--anchors", required=True, type=_int_list,
                   help="comma-separated anchor entity ids")
    p.add_argument("--relations", required=True, type=_int_list,
                   help="comma-separated relation ids")

    p = sub.add_parser("train", help="train the inductive query model")
    p.add_argument("--triples", required=True, help="TSV triple file")
    p.add_argument("--data", required=True,
                   help="benchmark directory (split.json + train.jsonl)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, default=1000, help="training steps")
    p.add_argument("--dim", type=int, default=64, help="embedding dimension")
    p.add_argument("--backbone", default="gqe", choices=("gqe", "q2b"),
                   help="query embedding backbone")
    p.add_argument("--lr", type=float, default=1e-4, help="learning rate")
    p.add_argument("--batch-size", type=int, default=32, help="queries per step")
    p.add_argument("--negatives", type=int, default=32,
                   help="negative samples per query")
    p.add_argument("--margin", type=float, default=24.0, help="loss margin")
    p.add_argument("--neighbor-cap", type=int, default=32,
                   help="max sampled neighbors per entity")
    p.add_argument("--weight-mode", default="sqrt", choices=("sqrt", "inv_sqrt"),
                   help="per-sample batch weight")
    p.add_argument("--no-prompt", action="store_true",
                   help="ablation: uniform aggregation weights")
    p.add_argument("--ckpt-every", type=int, default=0,
                   help="checkpoint period in steps (0: final only)")
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--config", default=None, help="key = value config file")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a query dataset")
    p.add_argument("--triples", required=True, help="TSV triple file")
    p.add_argument("--split", required=True, help="split.json from build-bench")
    p.add_argument("--checkpoint", required=True, help="model checkpoint")
    p.add_argument("--model-config", required=True, help="model config file")
    p.add_argument("--test", required=True, help="evaluation jsonl dataset")
    p.add_argument("--out", default=None, help="CSV report path (default stdout)")
    p.add_argument("--scorer", default="model", choices=("model", "mean"),
                   help="full model or the mean-of-neighbors baseline")
    p.add_argument("--unfiltered", action="store_true",
                   help="disable filtered ranking")
    p.add_argument("--se-rule", default="intersect",
                   choices=("intersect", "difference"),
                   help="answer-set rule for SE queries")
    p.add_argument("--context-seed", type=int, default=0,
                   help="neighbor sampling seed for evaluation contexts")

    p = sub.add_parser("gradcheck", help="run the finite-difference suite")
    p.add_argument("--seed", type=int, default=0, help="randomization seed")
    p.add_argument("--tolerance", type=float, default=1e-4,
                   help="max allowed relative error")

    return parser


def _cmd_synth_kg(args):
    graph = synth.synth_kg(n_entities=args.entities, n_relations=args.relations,
                           n_clusters=args.clusters, out_degree=args.out_degree,
                           seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    kgmod.write_triples(graph, os.path.join(args.out, "triples.tsv"))
    kgmod.write_dicts(graph, args.out)
    print(f"wrote {graph!r} to {args.out}", file=sys.stderr)
    return 0


def _cmd_build_bench(args):
    graph = kgmod.load_triples(args.triples)
    split, datasets = bench.build_benchmark(
        graph, args.fraction, args.seed,
        train_per_structure=args.train_count,
        eval_per_structure=args.eval_count,
        max_answers=args.max_answers)
    os.makedirs(args.out, exist_ok=True)
    bench.write_split(split, os.path.join(args.out, "split.json"))
    for name in ("train", "valid", "test"):
        bench.write_dataset(datasets[name],
                            os.path.join(args.out, f"{name}.jsonl"), name)
        print(f"{name}: {len(datasets[name])} queries", file=sys.stderr)
    return 0


def _cmd_ground(args):
    graph = kgmod.load_triples(args.triples)
    q = instantiate(args.tag, args.anchors, args.relations)
    answers = answer_set(graph, q)
    print(" ".join(str(a) for a in sorted(answers)))
    return 0


def _cmd_serialize(args):
    q = instantiate(args.tag, args.anchors, args.relations)
    print(tokens.serialize(q).text())
    return 0


def _cmd_train(args):
    graph = kgmod.load_triples(args.triples)
    split = bench.read_split(os.path.join(args.data, "split.json"), graph)
    dataset = bench.read_dataset(os.path.join(args.data, "train.jsonl"))
    os.makedirs(args.out, exist_ok=True)
    mcfg = ModelConfig(dim=args.dim, backbone=args.backbone,
                       neighbor_cap=args.neighbor_cap,
                       use_prompt=not args.no_prompt, seed=args.seed)
    model = InductiveQueryModel(graph.n_entities, graph.n_relations,
                                split.v_train, mcfg)
    tcfg = training.TrainConfig(
        lr=args.lr, steps=args.steps, batch_size=args.batch_size,
        negatives=args.negatives, margin=args.margin, seed=args.seed,
        weight_mode=args.weight_mode, ckpt_every=args.ckpt_every,
        log_path=os.path.join(args.out, "train_log.csv"),
        ckpt_path=os.path.join(args.out, "model.ckpt"))
    kg_train = graph.restricted(split.t_train)
    log = training.train(model, dataset, kg_train, tcfg)
    model.save(os.path.join(args.out, "model.ckpt"),
               os.path.join(args.out, "model.cfg"))
    print(f"final mean loss {log[-1][2]:.4f} after {len(log)} steps",
          file=sys.stderr)
    return 0


def _cmd_eval(args):
    graph = kgmod.load_triples(args.triples)
    split = bench.read_split(args.split, graph)
    with open(args.model_config, encoding="utf-8") as fh:
        mcfg = ModelConfig.from_text(fh.read())
    model = InductiveQueryModel(graph.n_entities, graph.n_relations,
                                split.v_train, mcfg)
    model.load_params(args.checkpoint)
    model.set_context_graph(graph)
    model.precompute_contexts(args.context_seed)
    records = bench.read_dataset(args.test)
    scorer = (evaluation.model_scorer(model) if args.scorer == "model"
              else evaluation.mean_baseline_scorer(model))
    protocol = evaluation.EvalProtocol(filtered=not args.unfiltered,
                                       se_rule=args.se_rule)
    report = evaluation.evaluate(scorer, records, split.v_test, protocol)
    csv = report.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv)
    else:
        print(csv, end="")
    print(report.to_text(), file=sys.stderr)
    return 0


def _cmd_gradcheck(args):
    from .gradcheck import primitive_suite
    failures = 0
    for name, err in primitive_suite(seed=args.seed):
        ok = err < args.tolerance
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {name:<20} max rel err {err:.3e}")
    return 0 if failures == 0 else 1


_COMMANDS = {
    "synth-kg": _cmd_synth_kg,
    "build-bench": _cmd_build_bench,
    "ground": _cmd_ground,
    "serialize": _cmd_serialize,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        sub_defaults = {}
        for action in parser._subparsers._group_actions[0].choices[args.command]._actions:
            if action.dest not in ("help",):
                sub_defaults[action.dest] = action.default
        try:
            _apply_config(args, sub_defaults)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime failure -> exit 1 with message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
