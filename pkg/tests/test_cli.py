import csv
import json
import warnings

import numpy as np
import pytest

from inductive_qe.cli import main
from inductive_qe.kg import load_triples, write_triples
from inductive_qe.queries import instantiate
from inductive_qe.symbolic import answer_set
from inductive_qe.synth import synth_kg


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_synth_kg_writes_files(tmp_path, capsys):
    out = tmp_path / "kg"
    code, _, err = run_cli(capsys, "synth-kg", "--out", str(out),
                           "--entities", "40", "--relations", "3",
                           "--clusters", "4", "--seed", "5")
    assert code == 0
    graph = load_triples(out / "triples.tsv")
    assert graph.n_entities == 40 and graph.n_relations == 3
    assert (out / "entities.dict").exists() and (out / "relations.dict").exists()
    # loading reassigns ids by first appearance, so compare by name
    def named(g):
        return {(g.entity_names[t.head], g.relation_names[t.relation],
                 g.entity_names[t.tail]) for t in g.triples}
    ref = synth_kg(n_entities=40, n_relations=3, n_clusters=4, seed=5)
    assert named(graph) == named(ref)


def _write_kg(tmp_path, seed=0):
    graph = synth_kg(n_entities=50, n_relations=4, n_clusters=4, seed=seed)
    path = tmp_path / "triples.tsv"
    write_triples(graph, path)
    return graph, path


def test_ground_matches_symbolic(tmp_path, capsys):
    graph, path = _write_kg(tmp_path)
    code, out, _ = run_cli(capsys, "ground", "--triples", str(path),
                           "--tag", "2p", "--anchors", "0",
                           "--relations", "0,1")
    assert code == 0
    got = [int(x) for x in out.split()]
    # the command answers over the graph as loaded from the file
    loaded = load_triples(path)
    expect = sorted(answer_set(loaded, instantiate("2p", [0], [0, 1])))
    assert got == expect


def test_serialize_golden(capsys):
    code, out, _ = run_cli(capsys, "serialize", "--tag", "1p",
                           "--anchors", "3", "--relations", "0")
    assert code == 0
    assert out.strip() == "[BCK_L0] [ENT] [r_0] [MASK] [BCK_R0] [ENT]"


def test_gradcheck_passes(capsys):
    code, out, _ = run_cli(capsys, "gradcheck", "--seed", "0")
    assert code == 0
    lines = [l for l in out.splitlines() if l]
    assert lines and all(l.startswith("PASS") for l in lines)


def test_gradcheck_fails_with_tight_tolerance(capsys):
    code, out, _ = run_cli(capsys, "gradcheck", "--seed", "0",
                           "--tolerance", "1e-300")
    assert code == 1
    assert any(l.startswith("FAIL") for l in out.splitlines())


def test_build_bench_artifacts(tmp_path, capsys):
    graph, path = _write_kg(tmp_path)
    out = tmp_path / "bench"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code, _, err = run_cli(capsys, "build-bench", "--triples", str(path),
                               "--out", str(out), "--train-count", "4",
                               "--eval-count", "2", "--seed", "1")
    assert code == 0
    assert (out / "split.json").exists()
    for name in ("train", "valid", "test"):
        assert (out / f"{name}.jsonl").exists()
        assert f"{name}:" in err
    split = json.loads((out / "split.json").read_text())
    assert split["n_entities"] == 50


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_required_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["ground", "--tag", "1p"])
    assert exc.value.code == 2


def test_bad_query_tag_exits_1(tmp_path, capsys):
    graph, path = _write_kg(tmp_path)
    code, _, err = run_cli(capsys, "ground", "--triples", str(path),
                           "--tag", "9z", "--anchors", "0", "--relations", "0")
    assert code == 1
    assert "error:" in err


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for flag in ("--steps", "--dim", "--lr", "--backbone", "--no-prompt"):
        assert flag in out


def _bench_dir(tmp_path):
    graph, path = _write_kg(tmp_path)
    out = tmp_path / "bench"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["build-bench", "--triples", str(path), "--out", str(out),
                     "--train-count", "4", "--eval-count", "2",
                     "--seed", "1"]) == 0
    return graph, path, out


def test_train_and_eval_smoke(tmp_path, capsys):
    graph, triples, bench_dir = _bench_dir(tmp_path)
    run_dir = tmp_path / "run"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code, _, err = run_cli(capsys, "train", "--triples", str(triples),
                               "--data", str(bench_dir), "--out", str(run_dir),
                               "--steps", "4", "--dim", "8",
                               "--batch-size", "4", "--negatives", "4",
                               "--lr", "1e-3", "--seed", "0")
    assert code == 0
    assert (run_dir / "model.ckpt").exists()
    assert (run_dir / "model.cfg").exists()
    log_lines = (run_dir / "train_log.csv").read_text().splitlines()
    assert log_lines[0] == "step,lr,loss" and len(log_lines) == 5
    assert "final mean loss" in err

    report_path = tmp_path / "report.csv"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code, _, err = run_cli(capsys, "eval", "--triples", str(triples),
                               "--split", str(bench_dir / "split.json"),
                               "--checkpoint", str(run_dir / "model.ckpt"),
                               "--model-config", str(run_dir / "model.cfg"),
                               "--test", str(bench_dir / "test.jsonl"),
                               "--out", str(report_path))
    assert code == 0
    rows = list(csv.reader(report_path.read_text().splitlines()))
    assert rows[0] == ["structure", "EE", "ES", "SE"]
    assert rows[-1][0] == "avg"
    assert "structure" in err  # text table mirrored to stderr


def test_eval_mean_baseline_to_stdout(tmp_path, capsys):
    graph, triples, bench_dir = _bench_dir(tmp_path)
    run_dir = tmp_path / "run"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["train", "--triples", str(triples), "--data",
                     str(bench_dir), "--out", str(run_dir), "--steps", "2",
                     "--dim", "8", "--batch-size", "2", "--negatives", "2",
                     "--lr", "1e-3"]) == 0
        capsys.readouterr()
        code, out, _ = run_cli(capsys, "eval", "--triples", str(triples),
                               "--split", str(bench_dir / "split.json"),
                               "--checkpoint", str(run_dir / "model.ckpt"),
                               "--model-config", str(run_dir / "model.cfg"),
                               "--test", str(bench_dir / "test.jsonl"),
                               "--scorer", "mean", "--unfiltered")
    assert code == 0
    assert out.startswith("structure,EE,ES,SE")


def test_config_file_overlay_and_flag_priority(tmp_path, capsys):
    graph, path = _write_kg(tmp_path)
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("train-count = 3\neval-count = 2\nseed = 9\n")
    out = tmp_path / "bench"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code, _, err = run_cli(capsys, "build-bench", "--triples", str(path),
                               "--out", str(out), "--config", str(cfg),
                               "--eval-count", "1")
    assert code == 0
    train = (out / "train.jsonl").read_text().splitlines()
    valid = (out / "valid.jsonl").read_text().splitlines()
    assert len(train) == 9 * 3  # from config file
    assert len(valid) <= 9 * 1  # explicit flag beats config


def test_config_file_unknown_key(tmp_path, capsys):
    graph, path = _write_kg(tmp_path)
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("no-such-option = 1\n")
    code, _, err = run_cli(capsys, "build-bench", "--triples", str(path),
                           "--out", str(tmp_path / "b"), "--config", str(cfg))
    assert code == 1
    assert "unknown config key" in err
