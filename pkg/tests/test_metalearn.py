import numpy as np
import pytest
from numpy.testing import assert_array_equal

from protoalign import metalearn as ml
from protoalign import probe
from protoalign import tensorcore as tc
from protoalign.treebank import ConceptVocab, LabeledDataset, Provenance


def blob_dataset(rng, means, sigma, n_sentences, tokens, language,
                 rotation=None, split="train"):
    k, n = means.shape
    total = n_sentences * tokens
    labels = rng.integers(0, k, total).astype(np.int64)
    x = means[labels] + sigma * rng.normal(size=(total, n))
    if rotation is not None:
        x = x @ rotation
    counts = np.bincount(labels, minlength=k)
    vocab = ConceptVocab(tuple(f"C{i:02d}" for i in range(k)),
                         tuple(int(c) for c in counts))
    return LabeledDataset(x, labels, vocab, Provenance(language, "POS", split),
                          np.repeat(np.arange(n_sentences), tokens),
                          tuple(f"{language}-{split}-{i}" for i in range(n_sentences)))


def haar(dim, rng):
    a = rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


@pytest.fixture(scope="module")
def world():
    """Small synthetic multi-language setup shared across tests."""
    rng = np.random.default_rng(0)
    k, n, m = 6, 12, 4
    means = 3.0 * rng.normal(size=(k, n)) / np.sqrt(n) * np.sqrt(n)
    source = blob_dataset(np.random.default_rng(1), means, 0.25, 80, 6, "src")
    dev = blob_dataset(np.random.default_rng(2), means, 0.25, 20, 6, "src",
                       split="dev")
    _, source_ps, _ = probe.train_probe(
        source, dev, probe.ProbeConfig(m=m, epochs=8, seed=3))
    rotations = {f"l{i}": haar(n, np.random.default_rng(10 + i))
                 for i in range(3)}
    train = {"src": source}
    for lang, rot in rotations.items():
        train[lang] = blob_dataset(np.random.default_rng(20 + hash(lang) % 7),
                                   means, 0.25, 80, 6, lang, rotation=rot)
    held_rot = haar(n, np.random.default_rng(99))
    held_train = blob_dataset(np.random.default_rng(5), means, 0.25, 80, 6,
                              "held", rotation=held_rot)
    held_test = blob_dataset(np.random.default_rng(6), means, 0.25, 40, 6,
                             "held", rotation=held_rot, split="test")
    cfg = ml.MetaConfig(h=24, m=m, epochs=6,
                        episodes_per_language_per_epoch=10, n_query=10,
                        n_support_choices=(5, 10), lr=1e-3, seed=4)
    model = ml.meta_train_fewshot(train, source_ps, cfg)
    return {"model": model, "source_ps": source_ps, "train": train,
            "held_train": held_train, "held_test": held_test, "cfg": cfg,
            "means": means, "m": m, "n": n}


class TestFewshotTraining:
    def test_source_prototypes_frozen(self, world):
        before = world["source_ps"].prototypes.copy()
        assert_array_equal(world["model"].source_prototypes.prototypes, before)

    def test_g_registered_per_language(self, world):
        assert sorted(world["model"].g_per_language) == \
            ["l0", "l1", "l2", "src"]

    def test_training_language_beats_chance(self, world):
        ds = world["train"]["l0"]
        acc = ml.evaluate_meta_accuracy(world["model"], ds, language="l0")
        assert acc > 2.0 / len(world["source_ps"].vocab)

    def test_dimension_mismatch_rejected(self, world):
        cfg = ml.MetaConfig(h=8, m=world["m"] + 1, epochs=1,
                            episodes_per_language_per_epoch=1,
                            n_query=5, n_support_choices=(5,))
        with pytest.raises(ml.MetaError):
            ml.meta_train_fewshot(world["train"], world["source_ps"], cfg)

    def test_language_without_shared_concepts_excluded(self, world):
        rng = np.random.default_rng(33)
        odd = blob_dataset(rng, np.zeros((2, world["n"])), 1.0, 30, 4, "odd")
        odd = LabeledDataset(odd.features, odd.labels,
                             ConceptVocab(("X1", "X2"), odd.vocab.counts),
                             odd.provenance, odd.sentence_index,
                             odd.sentence_ids)
        cfg = ml.MetaConfig(h=8, m=world["m"], epochs=1,
                            episodes_per_language_per_epoch=2, n_query=5,
                            n_support_choices=(5,), seed=1)
        model = ml.meta_train_fewshot(
            {"src": world["train"]["src"], "odd": odd},
            world["source_ps"], cfg)
        assert "odd" not in model.g_per_language


class TestAdaptation:
    def test_adapt_does_not_touch_projector(self, world):
        model = world["model"]
        before = {k: v.copy() for k, v in model.f_phi.parameters().items()}
        support, _ = ml.holdout_split_for_testonly(world["held_train"], 20,
                                                   seed=0)
        ml.fewshot_adapt(model, support,
                         ml.AdaptConfig(epochs=5, lr=1e-2, seed=1))
        for k, v in model.f_phi.parameters().items():
            assert_array_equal(v, before[k])

    def test_empty_support_rejected(self, world):
        empty = LabeledDataset(
            np.zeros((0, world["n"])), np.zeros(0, dtype=np.int64),
            world["source_ps"].vocab, Provenance("x", "POS", "train"),
            np.zeros(0, dtype=np.int64), ())
        with pytest.raises(ml.MetaError):
            ml.fewshot_adapt(world["model"], empty, ml.AdaptConfig())

    def test_adaptation_deterministic(self, world):
        support, _ = ml.holdout_split_for_testonly(world["held_train"], 20,
                                                   seed=2)
        cfg = ml.AdaptConfig(epochs=5, lr=1e-2, seed=7)
        g1 = ml.fewshot_adapt(world["model"], support, cfg)
        g2 = ml.fewshot_adapt(world["model"], support, cfg)
        assert_array_equal(g1.weight, g2.weight)
        assert_array_equal(g1.bias, g2.bias)

    def test_adaptation_improves_over_identity(self, world):
        model = world["model"]
        support, _ = ml.holdout_split_for_testonly(world["held_train"], 40,
                                                   seed=3)
        g = ml.fewshot_adapt(model, support,
                             ml.AdaptConfig(epochs=60, lr=1e-2, seed=4))
        identity = tc.LinearMap.identity(world["m"])
        base = ml.evaluate_meta_accuracy(model, world["held_test"], g=identity)
        adapted = ml.evaluate_meta_accuracy(model, world["held_test"], g=g)
        assert adapted > base


class TestClassify:
    def test_prediction_is_argmin_distance(self, world):
        model = world["model"]
        x = world["train"]["l1"].features[5]
        pred, probs = ml.meta_classify(model, "l1", x)
        z, _ = tc.mlp_forward(model.f_phi, x[None, :], train=False)
        u = tc.linear_apply(model.g_per_language["l1"], z)[0]
        d2 = np.sum((model.source_prototypes.prototypes - u) ** 2, axis=1)
        assert pred == np.argmin(d2)
        assert abs(probs.sum() - 1.0) < 1e-12

    def test_missing_language_is_error(self, world):
        with pytest.raises(ml.MetaError):
            ml.meta_classify(world["model"], "nope",
                             world["held_test"].features[0])

    def test_matches_probe_when_projector_reproduces_transform(self, world):
        # f(x) = relu(Ax) - relu(-Ax) = Ax exactly, g = identity: the
        # meta classifier must agree with the probe classifier everywhere
        ps = world["source_ps"]
        a = ps.transform.weight
        m, n = a.shape
        f_phi = ml.Mlp2(
            tc.LinearMap(np.vstack([a, -a]), np.zeros(2 * m)),
            tc.LinearMap(np.hstack([np.eye(m), -np.eye(m)]), np.zeros(m)),
            dropout_p=0.0)
        model = ml.MetaModel(f_phi, {"src": tc.LinearMap.identity(m)},
                             None, ps, "fewshot")
        for x in world["train"]["src"].features[:50]:
            meta_pred, _ = ml.meta_classify(model, "src", x)
            probe_pred, _ = probe.classify(ps, x)
            assert meta_pred == probe_pred


class TestZeroshot:
    def test_zeroshot_training_and_transfer(self, world):
        # near-identity languages: zero-shot must beat chance clearly
        rng = np.random.default_rng(50)
        means = world["means"]
        n = world["n"]
        train = {"src": world["train"]["src"]}
        for i in range(2):
            q = haar(n, np.random.default_rng(60 + i))
            theta = 0.1
            rot = (1 - theta) * np.eye(n) + theta * q
            u, _, vt = np.linalg.svd(rot)
            rot = u @ vt
            train[f"near{i}"] = blob_dataset(
                np.random.default_rng(70 + i), means, 0.25, 60, 6, f"near{i}",
                rotation=rot)
        cfg = ml.MetaConfig(h=24, m=world["m"], epochs=6,
                            episodes_per_language_per_epoch=10, n_query=10,
                            n_support_choices=(5, 10), seed=8)
        model = ml.meta_train_zeroshot(train, world["source_ps"], cfg)
        assert model.mode == "zeroshot"
        assert model.h_omega is not None
        acc = ml.evaluate_meta_accuracy(model, world["train"]["src"])
        assert acc > 0.8

    def test_zeroshot_mode_requires_h(self, world):
        with pytest.raises(ml.MetaError):
            ml.MetaModel(world["model"].f_phi, {}, None,
                         world["source_ps"], "zeroshot")


class TestGeneralization:
    def test_deterministic_given_seed(self, world):
        kwargs = dict(n_support_values=[10], runs=2, seed=5,
                      adapt_cfg=ml.AdaptConfig(epochs=3, lr=1e-2))
        r1 = ml.evaluate_generalization(world["model"], world["held_train"],
                                        world["held_test"], **kwargs)
        r2 = ml.evaluate_generalization(world["model"], world["held_train"],
                                        world["held_test"], **kwargs)
        assert r1 == r2

    def test_n_zero_rejected_for_fewshot(self, world):
        with pytest.raises(ml.MetaError):
            ml.evaluate_generalization(world["model"], world["held_train"],
                                       world["held_test"], [0], 1, 0)

    def test_holdout_used_without_training_split(self, world):
        res = ml.evaluate_generalization(
            world["model"], None, world["held_test"], [5], 2, seed=3,
            adapt_cfg=ml.AdaptConfig(epochs=3, lr=1e-2))
        assert len(res[5]) == 2

    def test_unseen_concepts_count_as_errors(self, world):
        ds = world["held_test"]
        renamed = LabeledDataset(ds.features, ds.labels,
                                 ConceptVocab(tuple("Z" + n for n in ds.vocab.names),
                                              ds.vocab.counts),
                                 ds.provenance, ds.sentence_index,
                                 ds.sentence_ids)
        support, _ = ml.holdout_split_for_testonly(world["held_train"], 10, 0)
        g = ml.fewshot_adapt(world["model"], support,
                             ml.AdaptConfig(epochs=2, lr=1e-2))
        assert ml.evaluate_meta_accuracy(world["model"], renamed, g=g) == 0.0


class TestIclAlign:
    def make_episode(self, rng, means, language="en"):
        demos = blob_dataset(rng, means, 0.2, 12, 5, language)
        queries = blob_dataset(rng, means, 0.2, 12, 5, language)
        return ml.IclEpisode(language, demos, queries)

    def test_training_improves_matching(self):
        rng = np.random.default_rng(80)
        k, n = 5, 10
        means = 2.5 * rng.normal(size=(k, n)) / np.sqrt(n) * np.sqrt(n)
        episodes = [self.make_episode(np.random.default_rng(81 + i), means)
                    for i in range(4)]
        cfg = ml.IclAlignConfig(hidden=16, epochs=120, lr=1e-2, seed=9)
        model = ml.icl_align_train(episodes, cfg)
        assert model.mode == "icl-align"
        probe_ep = self.make_episode(np.random.default_rng(99), means)
        protos, vocab = ml._episode_prototypes(probe_ep.demonstrations)
        acc = ml.evaluate_meta_accuracy(model, probe_ep.queries,
                                        prototypes=protos,
                                        concept_names=vocab.names)
        assert acc > 0.5

    def test_empty_episode_list_rejected(self):
        with pytest.raises(ml.MetaError):
            ml.icl_align_train([], ml.IclAlignConfig())

    def test_classification_needs_prototypes(self):
        rng = np.random.default_rng(90)
        means = np.eye(3, 6) * 3
        episodes = [self.make_episode(rng, means)]
        model = ml.icl_align_train(
            episodes, ml.IclAlignConfig(hidden=8, epochs=1, seed=1))
        with pytest.raises(ml.MetaError):
            ml.meta_classify(model, None, np.zeros(6))


class TestSerialization:
    def test_fewshot_round_trip(self, world, tmp_path):
        path = tmp_path / "model.meta"
        ml.save_meta_model(path, world["model"])
        loaded = ml.load_meta_model(path)
        assert loaded.mode == "fewshot"
        assert sorted(loaded.g_per_language) == \
            sorted(world["model"].g_per_language)
        for k, v in world["model"].f_phi.parameters().items():
            assert_array_equal(loaded.f_phi.parameters()[k], v)
        assert_array_equal(loaded.source_prototypes.prototypes,
                           world["model"].source_prototypes.prototypes)
        g = tc.LinearMap.identity(world["m"])
        acc1 = ml.evaluate_meta_accuracy(world["model"], world["held_test"], g=g)
        acc2 = ml.evaluate_meta_accuracy(loaded, world["held_test"], g=g)
        assert acc1 == acc2
