"""Acceptance suite: one test per criterion, one printed line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the PASS/FAIL lines.
"""

import io
import math
import os
import time

import numpy as np
import pytest

from spanparser import cli
from spanparser.decoder import brute_force_decode_scored, cky_decode_scored
from spanparser.encoder import EncoderConfig
from spanparser.evaluation import (bootstrap_significance, labeled_prf,
                                   relative_error_delta)
from spanparser.gradcheck import op_battery, pipeline_battery
from spanparser.model import load_model
from spanparser.scorer import ScoreChart, iter_spans
from spanparser.trees import (EMPTY, collapse_unaries, expand_unaries,
                              parse_bracketed, serialize, spans_to_tree,
                              tree_to_spans)
from spanparser.training import (LanguageSpec, SamplerConfig, TrainConfig,
                                 paired_delta_report, sample_language, train)
from spanparser.reporting import write_delta_report

import toylang
from conftest import TOY_TREEBANK


def report(name, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] {name}" + (f" ({detail})" if detail else "")
    print(line)
    assert passed, line


def random_chart(n, num_labels, rng):
    labels = [EMPTY] + [f"L{i}" for i in range(1, num_labels)]
    scores = np.zeros((n + 1, n + 1, num_labels))
    for i, j in iter_spans(n):
        scores[i, j, 1:] = rng.uniform(-1.0, 1.0, size=num_labels - 1)
    return ScoreChart(n, labels, scores)


def test_c01_decode_optimality():
    rng = np.random.default_rng(2024)
    t0 = time.time()
    trees_matched = 0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        L = int(rng.integers(2, 5))
        chart = random_chart(n, L, rng)
        cky_tree, cky_score = cky_decode_scored(chart)
        bf_tree, bf_score = brute_force_decode_scored(chart)
        assert cky_score == bf_score
        if cky_tree == bf_tree:
            trees_matched += 1
    elapsed = time.time() - t0
    report("decode optimality", elapsed < 30.0,
           f"200 charts, scores exact, {trees_matched}/200 trees identical, "
           f"{elapsed:.2f}s")


def test_c02_round_trip(fixture_lines):
    survived = 0
    for line in fixture_lines:
        (tree,) = parse_bracketed(line)
        collapsed = collapse_unaries(tree)
        leaves = [(leaf.word, leaf.pos_tag) for leaf in tree.leaves()]
        rebuilt = expand_unaries(spans_to_tree(tree_to_spans(collapsed), leaves))
        (reparsed,) = parse_bracketed(serialize(rebuilt))
        if rebuilt == tree and reparsed == tree:
            survived += 1
    report("tree round-trip", survived == len(fixture_lines),
           f"{survived}/{len(fixture_lines)} fixtures structurally identical")


def test_c03_gradient_battery():
    worst_ops = op_battery(draws=50, seed=0)
    worst = max(worst_ops.values())
    pipeline = pipeline_battery(draws=50, seed=0)
    ok = worst < 1e-4 and pipeline < 1e-4
    report("gradient battery", ok,
           f"worst op {worst:.2e}, pipeline {pipeline:.2e}, 50 draws each")


def test_c04_overfit(toy_treebank_path, tmp_path):
    t0 = time.time()
    config = TrainConfig(
        languages=[LanguageSpec("en", toy_treebank_path, toy_treebank_path)],
        out_dir=str(tmp_path / "overfit"),
        mode="mono",
        encoder=EncoderConfig(num_layers=2, d_model=64, num_heads=4, d_ff=256,
                              dropout=0.0, max_len=64),
        d_hidden=64,
        batch_size=10,  # one epoch per step over the 10 sentences
        epochs=300,
        eval_interval=10,
        seed=0,
        target_f1=100.0,
    )
    result = train(config)
    elapsed = time.time() - t0
    ok = result.best_mean == 100.0 and result.steps <= 300 and elapsed < 300.0
    report("overfit check", ok,
           f"train F1 {result.best_mean:.2f} after {result.steps} epochs, "
           f"{elapsed:.1f}s")


def test_c05_sampler_fidelity():
    scipy_stats = pytest.importorskip("scipy.stats")
    # Frozen high-precision value of 0.8^0.7 / (0.8^0.7 + 0.2^0.7).
    p_expected = 0.7252004253240047
    sampler = SamplerConfig((0.8, 0.2), exponent=0.7)
    assert sampler.probabilities()[0] == pytest.approx(p_expected, abs=1e-15)
    rng = np.random.default_rng(99)
    draws = 100_000
    hits = sum(sample_language(sampler, rng) == 0 for _ in range(draws))
    sigma = math.sqrt(p_expected * (1 - p_expected) / draws)
    within = abs(hits / draws - p_expected) < 3 * sigma

    chi_ok = True
    rng_cfg = np.random.default_rng(41)
    for trial in range(5):
        k = int(rng_cfg.integers(2, 6))
        raw = rng_cfg.uniform(0.1, 1.0, size=k)
        fractions = tuple(float(x) for x in raw / raw.sum())
        fractions = fractions[:-1] + (1.0 - sum(fractions[:-1]),)
        s = SamplerConfig(fractions, exponent=0.7)
        counts = np.zeros(k)
        r = np.random.default_rng([55, trial])
        for _ in range(draws):
            counts[sample_language(s, r)] += 1
        _, p = scipy_stats.chisquare(counts, s.probabilities() * draws)
        chi_ok = chi_ok and p > 0.01

    f = np.array([0.37, 0.21, 0.42])
    exact_limits = (
        (SamplerConfig(tuple(f), exponent=1.0).probabilities() == f).all()
        and (SamplerConfig(tuple(f), exponent=0.0).probabilities() == 1 / 3).all()
    )
    report("sampler fidelity", within and chi_ok and exact_limits,
           f"freq within 3 sigma, chi-square p>0.01 on 5 configs, limits exact")


@pytest.fixture(scope="module")
def acceptance_checkpoint(tmp_path_factory):
    base = tmp_path_factory.mktemp("accept_ckpt")
    toy = base / "toy.mrg"
    toy.write_text(TOY_TREEBANK, encoding="utf-8")
    config = TrainConfig(
        languages=[LanguageSpec("en", str(toy), str(toy))],
        out_dir=str(base / "run"), mode="mono",
        encoder=EncoderConfig(num_layers=1, d_model=16, num_heads=2, d_ff=32,
                              dropout=0.0, max_len=64),
        d_hidden=8, batch_size=10, epochs=30, eval_interval=15, seed=7,
        warmup_steps=0,
    )
    return train(config).checkpoint_path


def test_c06_ensemble_identity(acceptance_checkpoint, capsys, monkeypatch):
    sentences = "the cat sat\nbirds sing\na child reads a book\n"
    monkeypatch.setattr("sys.stdin", io.StringIO(sentences))
    assert cli.main(["parse", "--model", acceptance_checkpoint, "--lang", "en"]) == 0
    parse_out = capsys.readouterr().out
    monkeypatch.setattr("sys.stdin", io.StringIO(sentences))
    models = ",".join([acceptance_checkpoint] * 4)
    assert cli.main(["ensemble", "--models", models, "--lang", "en"]) == 0
    ensemble_out = capsys.readouterr().out
    report("ensemble identity", ensemble_out == parse_out and parse_out.strip(),
           f"4-copy ensemble byte-identical over {len(parse_out.splitlines())} lines")


def test_c07_joint_model_compactness(tmp_path):
    a = tmp_path / "a.mrg"
    b = tmp_path / "b.mrg"
    a.write_text("\n".join(toylang.language_a_train(count=8)) + "\n", encoding="utf-8")
    b.write_text("\n".join(toylang.language_b_train(count=6)) + "\n", encoding="utf-8")
    config = TrainConfig(
        languages=[LanguageSpec("aa", str(a)), LanguageSpec("bb", str(b))],
        out_dir=str(tmp_path / "joint"), mode="joint",
        encoder=EncoderConfig(num_layers=2, d_model=64, num_heads=4, d_ff=256,
                              dropout=0.0, max_len=64),
        d_hidden=8, batch_size=8, epochs=1, seed=0, warmup_steps=0,
    )
    result = train(config)
    model = load_model(result.checkpoint_path)
    prefixes = {name.split(".")[0] for name in model.all_params()}
    head_langs = {name.split(".")[1] for name in model.all_params()
                  if name.startswith("head.")}
    one_encoder_two_heads = prefixes == {"encoder", "head"} and \
        head_langs == {"aa", "bb"}
    shares = {lang: model.head_share(lang) for lang in ("aa", "bb")}
    ok = one_encoder_two_heads and all(s < 0.01 for s in shares.values())
    report("joint-model compactness", ok,
           f"1 encoder + 2 heads; shares {shares['aa']:.2%}, {shares['bb']:.2%}")


def test_c08_evaluation_oracle():
    gold = parse_bracketed("(TOP (S (NP (NN a) (NN b)) (NN c)))")
    pred = parse_bracketed("(TOP (S (NN a) (VP (NN b) (NN c))))")
    half = labeled_prf(gold, pred)
    exact_50 = (half.precision, half.recall, half.f1) == (50.0, 50.0, 50.0)
    full = labeled_prf(gold, gold)
    exact_100 = full.f1 == 100.0 and full.exact_match == 100.0
    red = relative_error_delta(91.40, 91.12)
    red_ok = round(red, 2) == 3.26
    report("evaluation oracle", exact_50 and exact_100 and red_ok,
           f"P=R=F1=50.00 on the 2-bracket pair; self-eval 100.00; "
           f"rel-delta(91.40, 91.12)={red:+.2f}%")


def test_c09_bootstrap_sanity():
    gold_lines, b_lines = [], []
    for i in range(50):
        gold_lines.append(f"(TOP (S (NP (NN a{i}) (NN b{i})) (NN c{i})))")
        b_lines.append(f"(TOP (S (NN a{i}) (VP (NN b{i}) (NN c{i}))))")
    gold = parse_bracketed("\n".join(gold_lines))
    pred_b = parse_bracketed("\n".join(b_lines))
    same = bootstrap_significance(gold, gold, gold, resamples=1000, seed=4)
    dominant_1 = bootstrap_significance(gold, gold, pred_b, resamples=10000, seed=4)
    dominant_2 = bootstrap_significance(gold, gold, pred_b, resamples=10000, seed=4)
    ok = (same.p_value == 1.0 and dominant_1.p_value < 0.05
          and dominant_1.p_value == dominant_2.p_value)
    report("bootstrap sanity", ok,
           f"identical p={same.p_value:.3f}; dominant p={dominant_1.p_value:.4f} "
           f"(deterministic under seed)")


def test_c10_joint_vs_mono_toy(tmp_path):
    def dump(name, lines):
        p = tmp_path / name
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(p)

    a_train = dump("a_train.mrg", toylang.language_a_train())
    a_dev = dump("a_dev.mrg", toylang.language_a_dev())
    b_train = dump("b_train.mrg", toylang.language_b_train())
    b_dev = dump("b_dev.mrg", toylang.language_b_dev())

    def encoder():
        return EncoderConfig(num_layers=2, d_model=48, num_heads=2, d_ff=96,
                             dropout=0.0, max_len=64)

    mono_a = train(TrainConfig(
        languages=[LanguageSpec("aa", a_train, a_dev)],
        out_dir=str(tmp_path / "mono_a"), mode="mono", encoder=encoder(),
        d_hidden=32, batch_size=16, epochs=100, eval_interval=20, seed=1,
        warmup_steps=20))
    mono_b = train(TrainConfig(
        languages=[LanguageSpec("bb", b_train, b_dev)],
        out_dir=str(tmp_path / "mono_b"), mode="mono", encoder=encoder(),
        d_hidden=32, batch_size=10, epochs=300, eval_interval=20, seed=1,
        warmup_steps=20))
    joint = train(TrainConfig(
        languages=[LanguageSpec("aa", a_train, a_dev),
                   LanguageSpec("bb", b_train, b_dev)],
        out_dir=str(tmp_path / "joint"), mode="joint", encoder=encoder(),
        d_hidden=32, batch_size=16, epochs=100, eval_interval=20, seed=1,
        warmup_steps=20))

    mono = {"aa": mono_a.best_dev["aa"], "bb": mono_b.best_dev["bb"]}
    paired = {("aa", "bb"): joint.best_dev["aa"], ("bb", "aa"): joint.best_dev["bb"]}
    delta_report = paired_delta_report(mono, paired, ["aa", "bb"])
    tsv, png = write_delta_report(delta_report, str(tmp_path / "report"))

    b_delta = joint.best_dev["bb"] - mono["bb"]
    artifacts_ok = (os.path.getsize(tsv) > 0 and os.path.getsize(png) > 0)
    with open(tsv, encoding="utf-8") as fh:
        header = fh.readline().split("\t")
    table_ok = header[0] == "tested" and "best_aux" in header[-1]
    report("joint-vs-mono toy experiment",
           b_delta >= 0.0 and artifacts_ok and table_ok,
           f"low-resource B: mono {mono['bb']:.2f} -> joint "
           f"{joint.best_dev['bb']:.2f} ({b_delta:+.2f}); delta table + heatmap "
           f"written")
