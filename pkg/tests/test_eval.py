import csv
import json
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attrval.eval import (
    MetricsReport,
    PRPoint,
    System,
    confidence_from_logprobs,
    dominance,
    evaluate,
    latency_bench,
    macro_scores,
    pair_set_metrics,
    pr_curve,
    score_pair,
    score_pairs,
    score_predictions,
    write_csv,
)
from attrval.eval.metrics import normalize_attribute
from attrval.models import ModelConfig, Seq2SeqModel, Seq2SeqRecord
from attrval.text import Vocab, build_rescorer_target, target_tokens
from attrval.types import AVPair, DataError, ProductExample

from conftest import HEADPHONE_WORDS, headphone_full, headphone_labeled

A, B, C = AVPair("a", (0,)), AVPair("b", (1,)), AVPair("c", (2,))


def oracle_prf(pred, gold):
    """Brute-force list matching, written independently of the implementation."""
    remaining = list(gold)
    correct = 0
    for p in pred:
        for i, g in enumerate(remaining):
            if g.attribute == p.attribute and sorted(g.value_indices) == sorted(p.value_indices):
                correct += 1
                del remaining[i]
                break
    if len(pred) == 0:
        prec = 1.0 if len(gold) == 0 else 0.0
    else:
        prec = correct / len(pred)
    rec = 1.0 if len(gold) == 0 else correct / len(gold)
    f = 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)
    return prec, rec, f


pair_st = st.builds(lambda a, s, n: AVPair(a, tuple(range(s, s + n))),
                    st.sampled_from(["a", "b", "c"]), st.integers(0, 4), st.integers(1, 2))


class TestPairSetMetrics:
    def test_exact(self):
        assert pair_set_metrics([A, B], [A, B]) == (1.0, 1.0, 1.0)

    def test_half(self):
        assert pair_set_metrics([A, B], [A, C]) == (0.5, 0.5, 0.5)

    def test_index_set_must_match(self):
        assert pair_set_metrics([AVPair("a", (4, 5))], [AVPair("a", (4,))]) == (0.0, 0.0, 0.0)

    def test_conventions(self):
        assert pair_set_metrics([], []) == (1.0, 1.0, 1.0)
        assert pair_set_metrics([], [A]) == (0.0, 0.0, 0.0)
        assert pair_set_metrics([A], []) == (0.0, 1.0, 0.0)

    def test_synonym_map(self):
        assert normalize_attribute(" Model  No. ", {"model no.": "model number"}) == "model number"
        syn = {"colour": "color"}
        assert pair_set_metrics([AVPair("colour", (0,))], [AVPair("color", (0,))], syn) == (1.0, 1.0, 1.0)
        assert pair_set_metrics([AVPair("colour", (0,))], [AVPair("color", (0,))]) == (0.0, 0.0, 0.0)

    @settings(max_examples=300)
    @given(st.lists(pair_st, max_size=5), st.lists(pair_st, max_size=5), st.randoms())
    def test_matches_oracle_and_permutation(self, pred, gold, rnd):
        got = pair_set_metrics(pred, gold)
        assert got == pytest.approx(oracle_prf(pred, gold))
        p2, g2 = list(pred), list(gold)
        rnd.shuffle(p2)
        rnd.shuffle(g2)
        assert pair_set_metrics(p2, g2) == got


def dataset_of(golds, n_words=6):
    return [ProductExample(tuple(f"w{i}" for i in range(n_words)), (), tuple(g)) for g in golds]


class TestMacro:
    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.lists(pair_st, max_size=3), st.lists(pair_st, max_size=3)), min_size=1,
                    max_size=8))
    def test_macro_bounds_and_oracle(self, rows):
        preds = [p for p, _ in rows]
        golds = [g for _, g in rows]
        s = macro_scores(preds, golds)
        per = [oracle_prf(p, g) for p, g in rows]
        assert s["f1"] == pytest.approx(np.mean([x[2] for x in per]))
        assert s["precision"] == pytest.approx(np.mean([x[0] for x in per]))
        assert 0.0 <= s["f1"] <= 1.0
        exact = all(sorted(map(repr, p)) == sorted(map(repr, g)) for p, g in rows)
        assert (s["f1"] == 1.0) == exact
        P, R = s["precision"], s["recall"]
        assert s["f1_of_means"] == pytest.approx(0 if P + R == 0 else 2 * P * R / (P + R))

    def test_report_fields(self):
        data = dataset_of([[A], [A, B]] + [[A]] * 2, n_words=10)
        rep = score_predictions(data, [[A], [A], [], [A, C]], malformed=[0, 1, 0, 2], long_threshold=9)
        assert rep.n_examples == 4 and rep.malformed == 3
        assert rep.n_gold == 5 and rep.n_predicted == 4 and rep.n_correct == 3
        assert rep.slices["long_names"]["n_examples"] == 4
        assert json.loads(rep.dumps())["n_examples"] == 4

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score_predictions(dataset_of([[A]]), [])


class ScriptedSystem(System):
    name = "scripted"

    def __init__(self, fn):
        self.fn = fn

    def predict(self, names):
        return [self.fn(n) for n in names], [0] * len(names)


class TestEvaluate:
    @pytest.fixture
    def data(self):
        ex1 = ProductExample(tuple(HEADPHONE_WORDS), tuple(headphone_labeled()), tuple(headphone_full()))
        ex2 = ProductExample(tuple("abcdefghij"), (), (AVPair("x", (0, 1)),))
        ex3 = ProductExample(("p", "q"), (AVPair("y", (1,)),), None)
        return [ex1, ex2, ex3]

    def test_gold_copier(self, data):
        gold = {ex.words: list(ex.gold) for ex in data}
        rep = evaluate(ScriptedSystem(lambda n: gold[tuple(n)]), data)
        assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)

    def test_nothing_predictor(self, data):
        rep = evaluate(ScriptedSystem(lambda n: []), data)
        assert rep.recall == 0.0 and rep.tagged_ratio == 0.0

    def test_tag_everything(self, data):
        rep = evaluate(ScriptedSystem(lambda n: [AVPair("all", tuple(range(len(n))))]), data)
        assert rep.tagged_ratio >= 0.99
        assert rep.slices["long_names"]["tagged_ratio"] >= 0.99
        assert rep.slices["long_names"]["n_examples"] == 1

    def test_observed_used_without_oracle(self, data):
        rep = evaluate(ScriptedSystem(lambda n: [AVPair("y", (1,))] if tuple(n) == ("p", "q") else []), data[2:])
        assert rep.f1 == 1.0

    def test_empty(self):
        with pytest.raises(DataError):
            evaluate(ScriptedSystem(lambda n: []), [])


@pytest.fixture(scope="module")
def rescorer():
    vocab = Vocab.build(HEADPHONE_WORDS + ["color", "brand"])
    cfg = ModelConfig(d_model=16, n_heads=2, n_encoder_layers=1, n_decoder_layers=1, d_ff=32, max_len=32)
    return Seq2SeqModel.create("rescorer", cfg, vocab, seed=0)


class TestRescore:
    def test_target_format(self):
        assert build_rescorer_target("color", "raging red") == "color: raging red"

    def test_certain_model_scores_one(self):
        assert confidence_from_logprobs(np.zeros(5)) == 1.0

    def test_uniform_model_scores_one_over_v(self, rescorer):
        saved = {k: rescorer.params[k].data.copy() for k in ("out.w", "out.b")}
        try:
            rescorer.params["out.w"].data[:] = 0
            rescorer.params["out.b"].data[:] = 0
            conf = score_pair(rescorer, HEADPHONE_WORDS, AVPair("color", (4, 5)))
            assert conf == pytest.approx(1.0 / len(rescorer.vocab), rel=1e-5)
        finally:
            for k, v in saved.items():
                rescorer.params[k].data[:] = v

    def test_higher_probability_scores_higher(self, rescorer):
        saved = {k: rescorer.params[k].data.copy() for k in ("out.w", "out.b")}
        try:
            rescorer.params["out.w"].data[:] = 0
            rescorer.params["out.b"].data[:] = 0
            rescorer.params["out.b"].data[rescorer.vocab.index["red"]] = 3.0
            red, boat = score_pairs(rescorer, [(HEADPHONE_WORDS, AVPair("color", (5,))),
                                               (HEADPHONE_WORDS, AVPair("color", (0,)))])
            assert red > boat
        finally:
            for k, v in saved.items():
                rescorer.params[k].data[:] = v

    @given(st.lists(st.lists(st.floats(-30, 30), min_size=3, max_size=3), min_size=1, max_size=6),
           st.data())
    def test_confidence_in_unit_interval(self, logits, data):
        z = np.array(logits)
        logp = z - z.max(axis=1, keepdims=True)
        logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
        picks = [data.draw(st.integers(0, 2)) for _ in range(len(z))]
        c = confidence_from_logprobs(logp[np.arange(len(z)), picks])
        assert 0.0 < c <= 1.0

    def test_logprobs_include_eos(self, rescorer):
        tgt = target_tokens("color: red")
        conf = score_pair(rescorer, HEADPHONE_WORDS, AVPair("color", (5,)))
        rec = Seq2SeqRecord(rescorer.vocab.encode(HEADPHONE_WORDS), rescorer.vocab.encode(tgt))
        [lp] = rescorer.token_logprobs(rescorer.collate([rec]))
        assert len(lp) == len(tgt) + 1
        assert conf == pytest.approx(math.exp(lp.mean()))


scored_st = st.lists(st.lists(st.tuples(pair_st, st.floats(0, 1)), max_size=4), min_size=1, max_size=6)


class TestPRCurve:
    def test_zero_threshold_equals_unthresholded(self):
        data = dataset_of([[A, B], [C], []])
        preds = [[A], [C, B], [A]]
        scored = [[(p, 0.3) for p in ps] for ps in preds]
        curve = pr_curve(scored, data, 5)
        rep = score_predictions(data, preds)
        assert curve[0].threshold == 0.0
        assert (curve[0].precision, curve[0].recall) == (rep.precision, rep.recall)
        assert [pt.threshold for pt in curve] == [0.0, 0.25, 0.5, 0.75, 1.0]

    def test_threshold_one_keeps_only_certain(self):
        data = dataset_of([[A, B]])
        curve = pr_curve([[(A, 1.0), (B, 0.999)]], data, 2)
        assert curve[-1].recall == 0.5 and curve[-1].precision == 1.0

    def test_needs_two_thresholds(self):
        with pytest.raises(ValueError):
            pr_curve([[]], dataset_of([[]]), 1)

    @settings(max_examples=200)
    @given(scored_st, st.integers(2, 30))
    def test_recall_nonincreasing(self, scored, n):
        golds = [[A, B]] * len(scored)
        curve = pr_curve(scored, dataset_of(golds), n)
        recalls = [pt.recall for pt in curve]
        assert all(b <= a for a, b in zip(recalls, recalls[1:]))

    def test_dominance(self):
        hi = [PRPoint(0, 0.9, 0.8), PRPoint(1, 1.0, 0.2)]
        lo = [PRPoint(0, 0.5, 0.6), PRPoint(1, 0.7, 0.1)]
        assert dominance(hi, lo) == 1.0
        assert dominance(lo, hi) < 0.5

    def test_csv(self, tmp_path):
        path = write_csv([PRPoint(0.0, 0.5, 0.25)], tmp_path / "pr.csv")
        rows = list(csv.reader(open(path)))
        assert rows[0] == ["threshold", "precision", "recall"]
        assert [float(x) for x in rows[1]] == [0.0, 0.5, 0.25]


class SleepSystem(System):
    name = "sleep"

    def predict(self, names):
        time.sleep(0.002)
        return [[] for _ in names], [0] * len(names)


class TestLatency:
    def test_errors(self):
        with pytest.raises(ValueError):
            latency_bench(SleepSystem(), [])
        with pytest.raises(ValueError):
            latency_bench(SleepSystem(), [["a"]] * 10)

    def test_report_and_stability(self):
        queries = [["a", "b"]] * 100
        r1 = latency_bench(SleepSystem(), queries, warmup=5)
        r2 = latency_bench(SleepSystem(), queries, warmup=5)
        assert r1["n_queries"] == 100 and r1["hardware"]
        assert r1["started"] <= r1["finished"]
        assert abs(r1["mean_ms"] - r2["mean_ms"]) / r1["mean_ms"] < 0.2


def test_report_is_a_dataclass_round_trip():
    rep = score_predictions(dataset_of([[A]]), [[A]])
    assert MetricsReport(**json.loads(rep.dumps())) == rep
