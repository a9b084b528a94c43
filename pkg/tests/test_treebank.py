import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from protoalign import treebank as tb
from protoalign.featurestore import FeatureStore, Manifest


def conllu_row(i, form, upos, head, deprel):
    return "\t".join([str(i), form, "_", upos, "_", "_", str(head), deprel,
                      "_", "_"])


TWO_TOKEN = "\n".join([
    conllu_row(1, "The", "DET", 2, "det"),
    conllu_row(2, "cat", "NOUN", 0, "root"),
    "",
])


def store_for(sentences, vectors, language="en"):
    mats = [np.asarray(v, dtype=np.float32) for v in vectors]
    n_dim = mats[0].shape[1]
    manifest = Manifest(language=language, model_name="m", layer=7,
                        treebank_file="t.conllu", n_sentences=len(mats),
                        n_dim=n_dim, content_checksum=0, pooling="mean")
    return FeatureStore(n_dim, mats, manifest)


class TestParse:
    def test_two_token_sentence(self):
        (sent,) = tb.parse_conllu(TWO_TOKEN)
        assert [t.upos for t in sent.tokens] == ["DET", "NOUN"]
        assert [t.head for t in sent.tokens] == [1, None]
        assert [t.deprel for t in sent.tokens] == ["det", "root"]
        assert [t.form for t in sent.tokens] == ["The", "cat"]

    def test_multiword_range_skipped(self):
        text = "\n".join([
            "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_",
            conllu_row(1, "do", "AUX", 0, "root"),
            conllu_row(2, "n't", "PART", 1, "advmod"),
            "",
        ])
        (sent,) = tb.parse_conllu(text)
        assert [t.form for t in sent.tokens] == ["do", "n't"]

    def test_empty_node_skipped(self):
        text = "\n".join([
            conllu_row(1, "hi", "INTJ", 0, "root"),
            "1.1\tghost\t_\tX\t_\t_\t_\t_\t_\t_",
            "",
        ])
        (sent,) = tb.parse_conllu(text)
        assert len(sent.tokens) == 1

    def test_deprel_subtype_stripped(self):
        text = "\n".join([
            conllu_row(1, "was", "AUX", 2, "aux:pass"),
            conllu_row(2, "seen", "VERB", 0, "root"),
            "",
        ])
        (sent,) = tb.parse_conllu(text)
        assert sent.tokens[0].deprel == "aux"

    def test_subtype_stripping_against_inventory_oracle(self):
        # oracle: everything after the first ':' goes, base label remains
        labels = ["nsubj:pass", "acl:relcl", "compound:prt", "obl:tmod",
                  "nsubj", "flat:name", "cc:preconj", "det:predet"]
        rows = []
        for i, lab in enumerate(labels, start=1):
            head = 0 if i == 1 else 1
            rows.append(conllu_row(i, f"w{i}", "X", head, lab))
        (sent,) = tb.parse_conllu("\n".join(rows) + "\n")
        expected = [lab.split(":")[0] for lab in labels]
        assert [t.deprel for t in sent.tokens] == expected

    def test_malformed_column_count(self):
        with pytest.raises(tb.ConlluError, match="line 1"):
            tb.parse_conllu("1\tonly\tthree\n")

    def test_non_integer_head(self):
        bad = conllu_row(1, "x", "X", "he", "dep").replace("\the\t", "\tzz\t")
        text = "\t".join(["1", "x", "_", "X", "_", "_", "zz", "dep", "_", "_"])
        with pytest.raises(tb.ConlluError, match="HEAD"):
            tb.parse_conllu(text + "\n")

    def test_head_out_of_range(self):
        with pytest.raises(tb.ConlluError, match="out of range"):
            tb.parse_conllu(conllu_row(1, "x", "X", 5, "dep") + "\n")

    def test_crlf_tolerated(self):
        (sent,) = tb.parse_conllu(TWO_TOKEN.replace("\n", "\r\n"))
        assert len(sent.tokens) == 2

    def test_sent_id_comment(self):
        text = "# sent_id = train-42\n" + TWO_TOKEN
        (sent,) = tb.parse_conllu(text)
        assert sent.sentence_id == "train-42"

    def test_round_trip(self):
        text = "\n".join([
            "# sent_id = a",
            conllu_row(1, "Il", "PRON", 2, "nsubj"),
            conllu_row(2, "pleut", "VERB", 0, "root"),
            "",
            "# sent_id = b",
            conllu_row(1, "Oui", "INTJ", 0, "root"),
            "",
        ])
        parsed = tb.parse_conllu(text)
        again = tb.parse_conllu(tb.to_conllu(parsed))
        assert again == parsed


class TestDatasets:
    def simple(self):
        # head token "cat" carries [1, 2], dependent "The" carries [0.5, 1]
        text = "\n".join([
            conllu_row(1, "The", "DET", 2, "det"),
            conllu_row(2, "cat", "NOUN", 0, "root"),
            "",
            conllu_row(1, "Run", "VERB", 0, "root"),
            "",
        ])
        sentences = tb.parse_conllu(text)
        store = store_for(sentences, [[[0.5, 1.0], [1.0, 2.0]], [[3.0, 4.0]]])
        return sentences, store

    def test_pos_dataset(self):
        sentences, store = self.simple()
        ds = tb.build_pos_dataset(sentences, store)
        assert ds.n_samples == 3
        assert ds.vocab.names == ("DET", "NOUN", "VERB")
        assert_allclose(ds.features[0], [0.5, 1.0])
        assert list(ds.label_names()) == ["DET", "NOUN", "VERB"]
        assert_array_equal(ds.sentence_index, [0, 0, 1])
        assert ds.features.dtype == np.float64

    def test_rel_dataset_head_minus_dep(self):
        sentences, store = self.simple()
        ds = tb.build_rel_dataset(sentences, store)
        # only the det arc remains; root arcs are excluded by default
        assert ds.n_samples == 1
        assert_allclose(ds.features[0], [0.5, 1.0])  # h_head - h_dep
        assert ds.vocab.names == ("det",)

    def test_rel_equal_vectors_give_zero(self):
        text = "\n".join([conllu_row(1, "a", "X", 2, "dep"),
                          conllu_row(2, "b", "X", 0, "root"), ""])
        sentences = tb.parse_conllu(text)
        store = store_for(sentences, [[[2.0, 2.0], [2.0, 2.0]]])
        ds = tb.build_rel_dataset(sentences, store)
        assert_array_equal(ds.features[0], [0.0, 0.0])

    def test_rel_count_equals_tokens_with_integer_head(self):
        rng = np.random.default_rng(0)
        rows, mats = [], []
        sentences_text = []
        for s in range(3):
            n = int(rng.integers(2, 6))
            lines = []
            for i in range(1, n + 1):
                head = 0 if i == 1 else int(rng.integers(1, i))
                lines.append(conllu_row(i, f"w{i}", "X", head,
                                        "root" if head == 0 else "dep"))
            sentences_text.append("\n".join(lines))
            mats.append(rng.normal(size=(n, 4)))
        sentences = tb.parse_conllu("\n\n".join(sentences_text) + "\n")
        store = store_for(sentences, mats)
        ds = tb.build_rel_dataset(sentences, store)
        expected = sum(1 for sent in sentences for t in sent.tokens
                       if t.head is not None)
        assert ds.n_samples == expected

    def test_rel_include_root_uses_sentence_mean(self):
        sentences, store = self.simple()
        ds = tb.build_rel_dataset(sentences, store, include_root=True)
        assert ds.n_samples == 3
        mean0 = np.mean([[0.5, 1.0], [1.0, 2.0]], axis=0)
        root_row = ds.features[list(ds.label_names()).index("root")]
        assert_allclose(root_row, mean0 - np.array([1.0, 2.0]))

    def test_alignment_error_names_sentence(self):
        sentences, _ = self.simple()
        bad_store = store_for(sentences, [[[1.0, 2.0]], [[3.0, 4.0]]])
        with pytest.raises(tb.AlignmentError, match="s0"):
            tb.build_pos_dataset(sentences, bad_store)


class TestFilterRare:
    def dataset(self, counts):
        names = sorted(counts)
        labels = []
        for i, n in enumerate(names):
            labels += [i] * counts[n]
        labels = np.asarray(labels, dtype=np.int64)
        features = np.arange(len(labels) * 2, dtype=np.float64).reshape(-1, 2)
        vocab = tb.ConceptVocab(tuple(names),
                                tuple(counts[n] for n in names))
        sent = np.zeros(len(labels), dtype=np.int64)
        return tb.LabeledDataset(features, labels, vocab,
                                 tb.Provenance("en", "POS", "train"),
                                 sent, ("s0",))

    def test_threshold_boundary(self):
        ds = self.dataset({"A": 19, "B": 20})
        out, vocab = tb.filter_rare_concepts(ds, 20)
        assert vocab.names == ("B",)
        assert out.n_samples == 20

    def test_zero_threshold_is_identity(self):
        ds = self.dataset({"A": 3, "B": 5})
        out, vocab = tb.filter_rare_concepts(ds, 0)
        assert vocab.names == ds.vocab.names
        assert_array_equal(out.labels, ds.labels)
        assert_array_equal(out.features, ds.features)

    def test_mixed_counts(self):
        ds = self.dataset({"A": 5, "B": 25, "C": 100})
        out, vocab = tb.filter_rare_concepts(ds, 20)
        assert vocab.names == ("B", "C")
        assert out.n_samples == 125
        assert set(out.label_names()) == {"B", "C"}

    def test_idempotent(self):
        ds = self.dataset({"A": 5, "B": 25, "C": 100})
        once, v1 = tb.filter_rare_concepts(ds, 20)
        twice, v2 = tb.filter_rare_concepts(once, 20)
        assert v1 == v2
        assert_array_equal(once.labels, twice.labels)
        assert_array_equal(once.features, twice.features)


class TestEpisodes:
    def grouped_dataset(self, n_sentences=20, tokens=3, seed=0):
        rng = np.random.default_rng(seed)
        n = n_sentences * tokens
        labels = rng.integers(0, 3, n).astype(np.int64)
        counts = np.bincount(labels, minlength=3)
        vocab = tb.ConceptVocab(("A", "B", "C"), tuple(int(c) for c in counts))
        return tb.LabeledDataset(
            rng.normal(size=(n, 4)), labels, vocab,
            tb.Provenance("en", "POS", "train"),
            np.repeat(np.arange(n_sentences), tokens),
            tuple(f"s{i}" for i in range(n_sentences)))

    def test_support_query_disjoint_and_sized(self):
        ds = self.grouped_dataset()
        for seed in range(20):
            ep = tb.sample_support_query(ds, 5, 7, seed=seed)
            assert ep.support.n_sentences == 5
            assert ep.query.n_sentences == 7
            assert not (set(ep.support.sentence_ids)
                        & set(ep.query.sentence_ids))

    def test_deterministic_given_seed(self):
        ds = self.grouped_dataset()
        e1 = tb.sample_support_query(ds, 4, 6, seed=9)
        e2 = tb.sample_support_query(ds, 4, 6, seed=9)
        assert e1.support.sentence_ids == e2.support.sentence_ids
        assert_array_equal(e1.query.features, e2.query.features)

    def test_insufficient_sentences(self):
        ds = self.grouped_dataset(n_sentences=8)
        with pytest.raises(tb.SamplingError, match="8"):
            tb.sample_support_query(ds, 5, 5, seed=0)

    def test_holdout_split_covers_everything(self):
        ds = self.grouped_dataset(n_sentences=10)
        support, rest = tb.holdout_split_for_testonly(ds, 3, seed=1)
        assert support.n_sentences == 3
        assert rest.n_sentences == 7
        assert set(support.sentence_ids) | set(rest.sentence_ids) == \
            set(ds.sentence_ids)
        assert not set(support.sentence_ids) & set(rest.sentence_ids)

    def test_restrict_to_vocab_keeps_sentences(self):
        ds = self.grouped_dataset()
        sub = tb.restrict_to_vocab(ds, tb.ConceptVocab(("A",), (1,)))
        assert sub.n_sentences == ds.n_sentences
        assert set(sub.label_names()) <= {"A"}
        assert sub.n_samples == int(np.sum(ds.labels == 0))
