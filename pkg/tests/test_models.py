import numpy as np
import pytest

from attrval import numerics as nx
from attrval.corpus import default_grammar, generate_catalog
from attrval.models import (
    IncompatibleCheckpoints,
    ModelConfig,
    Seq2SeqModel,
    Seq2SeqRecord,
    TaggerModel,
    check_compatible,
    genae_decode,
    genae_decode_batch,
    genae_encode,
    genae_loss,
    genave_decode,
    ground_values,
    labels_to_pairs,
    load_model,
    tocave_predict,
    tocve_loss,
    tocve_predict,
    tocve_record,
)
from attrval.models.layers import Ctx
from attrval.models.seq2seq import _DecoderCache
from attrval.pipeline import TrainPlan, build_vocab, train
from attrval.text import Vocab, all_true_mask, build_genae_target, build_marker_mask
from attrval.types import AVPair, ProductExample

from conftest import HEADPHONE_WORDS, headphone_full, headphone_labeled

SMALL = dict(d_model=32, n_heads=2, n_encoder_layers=1, n_decoder_layers=1, d_ff=64, max_len=32, dropout=0.0)


def small_cfg(**kw):
    return ModelConfig(**{**SMALL, **kw})


@pytest.fixture(scope="module")
def vocab():
    words = HEADPHONE_WORDS + ["brand", "model", "name", "color", "connectivity", "headphone", "type"]
    return Vocab.build(words)


@pytest.fixture(scope="module")
def genae(vocab):
    return Seq2SeqModel.create("genae", small_cfg(), vocab, seed=3)


@pytest.fixture(scope="module")
def fixture_data():
    return generate_catalog(default_grammar(), 10, 4)


class TestMarker:
    def test_single_shared_vector(self, genae):
        assert genae.params["marker"].shape == (genae.config.d_model,)
        assert sum(1 for k in genae.params if "marker" in k) == 1

    def test_additivity(self, genae):
        m = genae.params["marker"].data
        mask = build_marker_mask(8, headphone_labeled())
        on = genae_encode(genae, HEADPHONE_WORDS, mask)
        off = genae_encode(genae, HEADPHONE_WORDS, np.zeros(8, bool))
        diff = on - off
        np.testing.assert_allclose(diff[mask], np.broadcast_to(m, (6, m.size)), atol=1e-6)
        assert np.all(diff[~mask] == 0)
        full = genae_encode(genae, HEADPHONE_WORDS, all_true_mask(8)) - off
        np.testing.assert_allclose(full, np.broadcast_to(m, (8, m.size)), atol=1e-6)

    def test_all_false_equals_marker_free(self, genae, vocab):
        src = np.array([vocab.encode(HEADPHONE_WORDS)])
        with nx.no_grad():
            h = genae.encode(Ctx(genae.params, genae.config), src, np.zeros(src.shape, bool), None).data[0]
        assert np.array_equal(genae_encode(genae, HEADPHONE_WORDS, np.zeros(8, bool)), h)

    def test_mask_length_mismatch(self, genae):
        with pytest.raises(ValueError):
            genae_encode(genae, HEADPHONE_WORDS, np.ones(3, bool))

    def test_disabled_marker_ignores_mask(self, vocab):
        m = Seq2SeqModel.create("genae", small_cfg(marker_enabled=False), vocab, seed=3)
        assert "marker" not in m.params
        a = genae_encode(m, HEADPHONE_WORDS, all_true_mask(8))
        b = genae_encode(m, HEADPHONE_WORDS, np.zeros(8, bool))
        assert np.array_equal(a, b)
        target = "brand,model name,color"
        la = genae_loss(m, HEADPHONE_WORDS, all_true_mask(8), target).item()
        lb = genae_loss(m, HEADPHONE_WORDS, np.zeros(8, bool), target).item()
        assert la == lb

    def test_before_norm_is_positionwise(self, vocab):
        genae = Seq2SeqModel.create("genae", small_cfg(marker_after_norm=False), vocab, seed=3)
        mask = build_marker_mask(8, headphone_labeled())
        diff = genae_encode(genae, HEADPHONE_WORDS, mask) - genae_encode(genae, HEADPHONE_WORDS, np.zeros(8, bool))
        assert np.all(diff[~mask] == 0)
        assert not np.allclose(diff[mask], genae.params["marker"].data)


class TestGenAELoss:
    def test_marker_gradient(self, genae):
        for p in genae.params.values():
            p.grad = None
        loss = genae_loss(genae, HEADPHONE_WORDS, np.zeros(8, bool), "brand,color")
        nx.backward(loss)
        assert np.all(genae.params["marker"].grad == 0)
        for p in genae.params.values():
            p.grad = None
        nx.backward(genae_loss(genae, HEADPHONE_WORDS, build_marker_mask(8, headphone_labeled()), "brand,color"))
        assert np.abs(genae.params["marker"].grad).sum() > 0
        for p in genae.params.values():
            p.grad = None

    def test_empty_target_is_eos_only(self, genae):
        loss = genae_loss(genae, HEADPHONE_WORDS, np.zeros(8, bool), "")
        assert np.isfinite(loss.item())
        rec = genae.collate([Seq2SeqRecord(genae.vocab.encode(HEADPHONE_WORDS), [], None)])
        assert rec.tgt_in.tolist() == [[genae.vocab.bos_id]]
        assert rec.tgt_out.tolist() == [[genae.vocab.eos_id]]

    def test_target_too_long(self, genae):
        with pytest.raises(ValueError, match="max_len"):
            genae_loss(genae, HEADPHONE_WORDS, np.zeros(8, bool), ",".join(["brand"] * 40))

    def test_loss_decreases_on_fixture(self, fixture_data):
        plan = TrainPlan("genae", config=small_cfg(), epochs=50, batch_size=10, warmup_steps=5)
        m = train(plan, fixture_data)
        hist = m.extra["loss_history"]
        assert hist[-1] < hist[0]


class TestDecoding:
    def test_untrained_decode_terminates(self, genae):
        out = genae_decode(genae, HEADPHONE_WORDS)
        assert isinstance(out, list)
        ids = genae.greedy([genae.vocab.encode(HEADPHONE_WORDS)], [all_true_mask(8)])[0]
        assert len(ids) <= genae.config.max_len - 1

    def test_random_params_terminate(self, vocab):
        for seed in range(3):
            m = Seq2SeqModel.create("genave", small_cfg(max_len=12), vocab, seed=seed)
            pairs, _ = genave_decode(m, HEADPHONE_WORDS[:5])
            assert all(isinstance(p, AVPair) for p in pairs)

    def test_cached_steps_match_full_decoder(self, genae, vocab):
        rng = np.random.default_rng(0)
        src = np.array([vocab.encode(HEADPHONE_WORDS)] * 3)
        pad = np.zeros(src.shape, bool)
        pad[1, 6:] = True
        tgt = rng.integers(5, len(vocab), size=(3, 6))
        tgt[:, 0] = vocab.bos_id
        with nx.no_grad():
            ctx = Ctx(genae.params, genae.config)
            mem = genae.encode(ctx, src, pad, np.ones(src.shape, bool))
            full = genae.decode_logits(ctx, mem, pad, tgt).data
            cache = _DecoderCache(ctx, mem, pad)
            for t in range(6):
                np.testing.assert_allclose(cache.step(tgt[:, t], t), full[:, t], atol=1e-4)

    def test_batched_decode_matches_single(self, genae):
        names = [HEADPHONE_WORDS, HEADPHONE_WORDS[:3], HEADPHONE_WORDS[2:]]
        assert genae_decode_batch(genae, names) == [genae_decode(genae, n) for n in names]


class TestToCVE:
    def test_headphone_color_targets(self, vocab):
        m = TaggerModel.create("tocve", small_cfg(), vocab, seed=0)
        rec = tocve_record(m, "color", HEADPHONE_WORDS, (4, 5))
        assert rec.labels[2:] == [0, 0, 0, 0, 1, 1, 0, 0]
        assert rec.weights == [0.0, 0.0] + [1.0] * 8

    def test_pruned_example_all_no(self, vocab):
        m = TaggerModel.create("tocve", small_cfg(), vocab, seed=0)
        rec = tocve_record(m, "brand", HEADPHONE_WORDS[1:], ())
        assert sum(rec.labels) == 0

    def test_head_is_binary_and_no_marker(self, vocab):
        m = TaggerModel.create("tocve", small_cfg(), vocab, seed=0)
        assert m.params["head.w"].shape[1] == 2 and "marker" not in m.params

    def test_prefix_logits_do_not_affect_loss(self, vocab):
        m = TaggerModel.create("tocve", small_cfg(), vocab, seed=0)
        batch = m.collate([tocve_record(m, "model name", HEADPHONE_WORDS, (1, 2, 3))])
        rng = np.random.default_rng(0)
        z = rng.normal(size=batch.ids.shape + (2,)).astype(np.float32)
        base = m.loss_from_logits(nx.Tensor(z), batch).item()
        z2 = z.copy()
        z2[:, :3] += rng.normal(size=(1, 3, 2)).astype(np.float32) * 10
        assert m.loss_from_logits(nx.Tensor(z2), batch).item() == base

    def test_range_error(self, vocab):
        m = TaggerModel.create("tocve", small_cfg(), vocab, seed=0)
        with pytest.raises(ValueError):
            tocve_loss(m, "color", HEADPHONE_WORDS, (8,))


class TestToCAVE:
    def test_merge_rule(self):
        pairs = labels_to_pairs(["brand", "O", "color", "color"])
        assert pairs == [AVPair("brand", (0,)), AVPair("color", (2, 3))]
        assert labels_to_pairs(["O", "O"]) == []

    def test_closed_label_set(self, vocab):
        m = TaggerModel.create("tocave", small_cfg(), vocab, seed=0, labels=["color", "brand"])
        assert m.labels == ["O", "brand", "color"]
        assert m.params["head.w"].shape[1] == 3
        assert all(p.attribute in m.labels for p in tocave_predict(m, HEADPHONE_WORDS))

    def test_needs_labels(self, vocab):
        with pytest.raises(ValueError):
            TaggerModel.create("tocave", small_cfg(), vocab, seed=0)


class TestGrounding:
    def test_leftmost_unused(self):
        words = ["red", "x", "red"]
        pairs, dropped = ground_values(words, [("a", "red"), ("b", "red"), ("c", "blue")])
        assert pairs == [AVPair("a", (0,)), AVPair("b", (2,))]
        assert dropped == 1


@pytest.fixture(scope="module")
def data():
    ex = ProductExample(tuple(HEADPHONE_WORDS), tuple(headphone_full()), tuple(headphone_full()))
    return [ex] + generate_catalog(default_grammar(), 9, 11)


class TestConvergence:
    def test_genae_memorizes(self, data):
        plan = TrainPlan("genae", config=small_cfg(), epochs=200, batch_size=10, warmup_steps=10, lr=3e-3)
        m = train(plan, data)
        hist = m.extra["loss_history"]
        assert hist[-1] < 0.1 * hist[0]
        hits = [genae_decode(m, ex.words) == build_genae_target(ex.observed_pairs).split(",") for ex in data]
        assert np.mean(hits) >= 0.95

    def test_tocve_memorizes(self, data):
        plan = TrainPlan("tocve", config=small_cfg(), epochs=200, batch_size=16, warmup_steps=10, lr=3e-3)
        m = train(plan, data)
        queries = [(p.attribute, ex, p) for ex in data for p in ex.observed_pairs]
        hits = [tocve_predict(m, a, ex.words) == list(p.value_indices) for a, ex, p in queries]
        assert np.mean(hits) >= 0.95


class TestCheckpoints:
    def test_save_load_predicts_identically(self, genae, tmp_path):
        genae.save(tmp_path / "g.ckpt")
        back = load_model(tmp_path / "g.ckpt")
        assert back.kind == "genae" and back.vocab == genae.vocab
        assert back.config == genae.config
        assert genae_decode(back, HEADPHONE_WORDS) == genae_decode(genae, HEADPHONE_WORDS)

    def test_incompatible_vocab(self, genae):
        other = TaggerModel.create("tocve", small_cfg(), Vocab.build(["zzz"]), seed=0)
        with pytest.raises(IncompatibleCheckpoints):
            check_compatible(genae, other)

    def test_manifest_records_ablation(self, fixture_data, tmp_path):
        plan = TrainPlan("genae", config=small_cfg(), epochs=1, marker_enabled=False)
        train(plan, fixture_data, out=tmp_path / "g.ckpt")
        m = load_model(tmp_path / "g.ckpt")
        assert m.config.marker_enabled is False
        assert m.extra["plan"]["marker_enabled"] is False
        assert build_vocab(fixture_data) == m.vocab
