import json
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import attrval.pipeline as pl
from attrval.corpus import CatalogGrammar, default_grammar, generate_catalog, partial_labeling, stats
from attrval.models import ModelConfig, load_model
from attrval.pipeline import (
    TrainingDiverged,
    TrainPlan,
    assemble_pairs,
    bootstrap,
    build_vocab,
    create_model,
    fit,
    gentoc_infer,
    gentoc_infer_batch,
    make_records,
    make_value_pruning_examples,
    train,
)
from attrval.types import AVPair, ProductExample

from conftest import HEADPHONE_WORDS, headphone_full, headphone_labeled

SMALL = ModelConfig(d_model=32, n_heads=2, n_encoder_layers=1, n_decoder_layers=1, d_ff=64, max_len=32,
                    dropout=0.0)


def headphone_example(full=True):
    return ProductExample(tuple(HEADPHONE_WORDS), tuple(headphone_labeled()), tuple(headphone_full()) if full else None)


def contains(words, value):
    n = len(value)
    return any(list(words[i:i + n]) == list(value) for i in range(len(words) - n + 1))


class TestValuePruning:
    def test_headphone_prune_brand(self):
        negs = make_value_pruning_examples([headphone_example()], 1.0, 0)
        got = {(n.attribute, " ".join(n.words)) for n in negs}
        assert ("brand", "rockerz 255 pro raging red bluetooth neckband") in got
        assert ("color", "boat rockerz 255 pro bluetooth neckband") in got
        assert len(negs) == 3

    def test_rate_zero(self):
        assert make_value_pruning_examples([headphone_example()], 0.0, 0) == []

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            make_value_pruning_examples([headphone_example()], 1.5, 0)

    def test_single_word_name_skipped(self):
        ex = ProductExample(("boat",), (AVPair("brand", (0,)),))
        assert make_value_pruning_examples([ex], 1.0, 0) == []

    def test_same_attribute_twice_skipped(self):
        ex = ProductExample(("red", "x", "blue"), (AVPair("color", (0,)), AVPair("color", (2,))))
        assert make_value_pruning_examples([ex], 1.0, 0) == []

    def test_repeated_value_skipped(self):
        ex = ProductExample(("red", "x", "red"), (AVPair("color", (0,)),))
        assert make_value_pruning_examples([ex], 1.0, 0) == []

    def test_rate_fraction(self):
        data = generate_catalog(default_grammar(), 300, 2)
        n = sum(len(ex.observed_pairs) for ex in data)
        negs = make_value_pruning_examples(data, 0.3, 0)
        assert len(negs) <= round(0.3 * n)
        assert len(negs) >= 0.8 * round(0.3 * n)
        assert negs == make_value_pruning_examples(data, 0.3, 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 1.0))
    def test_negatives_never_contain_value(self, seed, rate):
        data = partial_labeling(generate_catalog(default_grammar(), 40, seed), 0.6, seed)
        # oracle: every legal (attribute, pruned name) together with the value it removed
        legal = {}
        for ex in data:
            for p in ex.observed_pairs:
                rest = tuple(w for i, w in enumerate(ex.words) if i not in p.value_indices)
                legal.setdefault((p.attribute, rest), []).append(p.value(ex.words).split())
        for neg in make_value_pruning_examples(data, rate, seed):
            values = legal[(neg.attribute, neg.words)]
            assert neg.words and not all(contains(neg.words, v) for v in values)


class TestAssemble:
    def test_drop_empty_and_claims(self):
        pairs = assemble_pairs(["brand", "color", "size", "color2"], [[0], [4, 5], [], [5, 6]])
        assert pairs == [AVPair("brand", (0,)), AVPair("color", (4, 5)), AVPair("color2", (6,))]

    def test_empty(self):
        assert assemble_pairs([], []) == []

    @given(st.lists(st.tuples(st.sampled_from("abcdef"), st.sets(st.integers(0, 9))), max_size=8))
    def test_invariants(self, items):
        attrs = [a for a, _ in items]
        values = [sorted(v) for _, v in items]
        pairs = assemble_pairs(attrs, values)
        seen = set()
        for p in pairs:
            assert p.value_indices
            assert not seen & set(p.value_indices)
            seen |= set(p.value_indices)
        order = [attrs.index(p.attribute) for p in pairs]
        assert order == sorted(order) or len(set(attrs)) < len(attrs)


class FakeStage:
    """Stand-in stage functions with scripted outputs."""

    def __init__(self, attrs, values):
        self.attrs, self.values = attrs, values

    def decode(self, model, names):
        return [list(self.attrs.get(tuple(n), [])) for n in names]

    def tag(self, model, queries):
        return [list(self.values.get((a, tuple(w)), [])) for a, w in queries]


@pytest.fixture
def fake(monkeypatch):
    def install(attrs, values):
        f = FakeStage(attrs, values)
        monkeypatch.setattr(pl, "genae_decode_batch", f.decode)
        monkeypatch.setattr(pl, "tocve_predict_batch", f.tag)
        monkeypatch.setattr(pl, "check_compatible", lambda *m: None)
        return f
    return install


# the scripted stages only need the tagger's input limit
TAGGER = SimpleNamespace(config=ModelConfig(max_len=16))


class TestInferWithScriptedStages:
    def test_attribute_without_value_is_dropped(self, fake):
        w = tuple(HEADPHONE_WORDS)
        fake({w: ["brand", "size", "brand", "color"]}, {("brand", w): [0], ("color", w): [4, 5]})
        assert gentoc_infer(w, None, TAGGER) == [AVPair("brand", (0,)), AVPair("color", (4, 5))]

    def test_empty_stage_one(self, fake):
        fake({}, {})
        assert gentoc_infer(("a", "b"), None, TAGGER) == []

    def test_attribute_too_long_for_tagger_is_dropped(self, fake, monkeypatch):
        w = ("acme", "red", "kettle")
        long_attr = " ".join(["very"] * 14)
        f = fake({w: [long_attr, "color"]}, {("color", w): [1], (long_attr, w): [0]})
        asked = []
        tag = f.tag
        monkeypatch.setattr(pl, "tocve_predict_batch", lambda model, queries: asked.extend(queries) or tag(model, queries))
        assert gentoc_infer(w, None, TAGGER) == [AVPair("color", (1,))]
        assert [a for a, _ in asked] == ["color"]

    def test_bootstrap_replaces_labels(self, fake):
        w = tuple(HEADPHONE_WORDS)
        other = ("acme", "colour", "red")
        fake({w: ["connectivity"], other: ["color"]},
             {("connectivity", w): [6], ("color", other): [2]})
        data = [headphone_example(),
                ProductExample(other, (AVPair("colour", (2,)), AVPair("brand", (0,))), None)]
        out, summary = bootstrap(data, None, TAGGER)
        assert out[0].observed_pairs == (AVPair("connectivity", (6,)),)
        assert out[0].full_pairs == data[0].full_pairs
        assert out[1].observed_pairs == (AVPair("color", (2,)),)
        assert summary["before"] == stats(data) and summary["after"] == stats(out)
        assert summary["after"]["n_attributes"] <= summary["before"]["n_attributes"]


class TestTrainPlan:
    def test_json_round_trip(self, tmp_path):
        plan = TrainPlan("tocve", dataset="d.jsonl", config=SMALL, epochs=3, vp_rate=0.2)
        p = tmp_path / "plan.json"
        p.write_text(json.dumps(plan.to_json()))
        assert TrainPlan.load(p) == plan

    @pytest.mark.parametrize("bad", [{"model_kind": "nope"}, {"model_kind": "genae", "epochs": 0},
                                     {"model_kind": "tocve", "vp_rate": 1.2},
                                     {"model_kind": "genae", "extra_field": 1}])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            TrainPlan.from_json(bad)

    def test_no_dataset(self):
        with pytest.raises(ValueError):
            train(TrainPlan("genae"))


@pytest.fixture(scope="module")
def data():
    return generate_catalog(default_grammar(), 30, 8)


class TestTraining:
    def test_fixture_convergence(self):
        data = generate_catalog(default_grammar(), 10, 3)
        plan = TrainPlan("tocave", config=SMALL, epochs=200, batch_size=10, warmup_steps=10, lr=3e-3)
        hist = train(plan, data).extra["loss_history"]
        assert hist[-1] < 0.1 * hist[0]

    @pytest.mark.parametrize("kind", ["genae", "tocve", "genave", "tocave", "rescorer"])
    def test_deterministic_checkpoints(self, kind, data, tmp_path):
        plan = TrainPlan(kind, config=SMALL, epochs=2, batch_size=8)
        a = train(plan, data, out=tmp_path / "a.ckpt")
        train(plan, data, out=tmp_path / "b.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
        assert len(a.extra["loss_history"]) == 2

    def test_divergence_aborts(self, data):
        plan = TrainPlan("genae", config=SMALL, epochs=1)
        model = create_model(plan, build_vocab(data), data)
        model.params["tok_emb"].data[:] = np.nan
        with pytest.raises(TrainingDiverged, match="genae"):
            fit(model, make_records(model, data, plan), plan)

    def test_vocab_ignores_hidden_labels(self):
        ex = ProductExample(("acme", "red"), (), (AVPair("secret attr", (1,)),))
        assert "secret" not in build_vocab([ex])

    def test_tocve_records_include_negatives(self, data):
        plan = TrainPlan("tocve", config=SMALL, vp_rate=1.0)
        model = create_model(plan, build_vocab(data), data)
        recs = make_records(model, data, plan)
        n_pos = sum(len(ex.observed_pairs) for ex in data)
        assert len(recs) > n_pos
        assert all(sum(r.labels) == 0 for r in recs[n_pos:])


def test_headphone_unlabeled_attributes_recovered(tmp_path):
    """Connectivity and headphone type are never labeled on the headphone name but are elsewhere."""
    heads = CatalogGrammar((default_grammar().categories[0],))
    data = partial_labeling(generate_catalog(heads, 600, 5, synonyms=False), 0.5, 5)
    data = [ex for ex in data if ex.words != tuple(HEADPHONE_WORDS)] + [headphone_example()]
    cfg = dict(config=SMALL, epochs=25, batch_size=32, warmup_steps=20, lr=3e-3)
    vocab = build_vocab(data)
    genae = train(TrainPlan("genae", **cfg), data, vocab=vocab, out=tmp_path / "g.ckpt")
    tocve = train(TrainPlan("tocve", **cfg), data, vocab=vocab, out=tmp_path / "t.ckpt")
    pred = gentoc_infer(HEADPHONE_WORDS, load_model(tmp_path / "g.ckpt"), load_model(tmp_path / "t.ckpt"))
    assert set(pred) == set(headphone_full())
    assert gentoc_infer_batch([HEADPHONE_WORDS], genae, tocve) == [pred]
