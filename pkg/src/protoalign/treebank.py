"""CoNLL-U parsing and labeled-dataset construction.

Sentences pair with feature stores to build (vector, concept) datasets for
word classes (UPOS) and grammatical relations (deprel), and supply the
sentence-level support/query sampling used by episodic training.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .featurestore import FeatureStore, get_sentence

__all__ = [
    "Token",
    "Sentence",
    "ConceptVocab",
    "Provenance",
    "LabeledDataset",
    "Episode",
    "parse_conllu",
    "to_conllu",
    "build_pos_dataset",
    "build_rel_dataset",
    "filter_rare_concepts",
    "restrict_to_vocab",
    "subset_sentences",
    "sample_support_query",
    "holdout_split_for_testonly",
    "ConlluError",
    "AlignmentError",
    "SamplingError",
]


class ConlluError(ValueError):
    """Malformed CoNLL-U input; message carries the 1-based line number."""


class AlignmentError(ValueError):
    """Treebank and feature store disagree; message names the sentence."""


class SamplingError(ValueError):
    """Not enough sentences for the requested episode."""


@dataclass(frozen=True)
class Token:
    form: str
    upos: str
    head: int | None  # 0-based index of the head token, None for ROOT
    deprel: str


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    sentence_id: str

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError(f"sentence {self.sentence_id!r} has no tokens")
        for t in self.tokens:
            if t.head is not None and not 0 <= t.head < len(self.tokens):
                raise ValueError(
                    f"sentence {self.sentence_id!r}: head index {t.head} out of range")

    def __len__(self) -> int:
        return len(self.tokens)


def parse_conllu(text: str) -> list[Sentence]:
    """Parse a CoNLL-U document into sentences.

    Multiword-token ranges ("1-2") and empty nodes ("3.1") are skipped,
    comments start with '#', and deprel subtypes after ':' are stripped.
    Only the ID, FORM, UPOS, HEAD and DEPREL columns are retained.
    """
    sentences: list[Sentence] = []
    rows: list[tuple[str, str, int, str, int]] = []  # form, upos, head1, deprel, line
    sent_id: str | None = None

    def flush():
        nonlocal rows, sent_id
        if not rows:
            sent_id = None
            return
        n = len(rows)
        tokens = []
        for form, upos, head1, deprel, lineno in rows:
            head = None if head1 == 0 else head1 - 1
            if head is not None and not 0 <= head < n:
                raise ConlluError(f"line {lineno}: HEAD {head1} out of range for "
                                  f"a {n}-token sentence")
            tokens.append(Token(form, upos, head, deprel))
        sid = sent_id if sent_id is not None else f"s{len(sentences)}"
        sentences.append(Sentence(tuple(tokens), sid))
        rows = []
        sent_id = None

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line == "":
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("sent_id") and "=" in body:
                sent_id = body.split("=", 1)[1].strip()
            continue
        fields = line.split("\t")
        if len(fields) != 10:
            raise ConlluError(f"line {lineno}: expected 10 columns, got {len(fields)}")
        tid = fields[0]
        if "-" in tid or "." in tid:
            continue  # multiword ranges and empty nodes
        try:
            int(tid)
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer ID {tid!r}") from None
        try:
            head1 = int(fields[6])
        except ValueError:
            raise ConlluError(f"line {lineno}: non-integer HEAD {fields[6]!r}") from None
        deprel = fields[7].split(":", 1)[0]
        rows.append((fields[1], fields[3], head1, deprel, lineno))
    flush()
    return sentences


def to_conllu(sentences: list[Sentence]) -> str:
    """Serialize sentences back to CoNLL-U (unused columns become '_')."""
    blocks = []
    for sent in sentences:
        lines = [f"# sent_id = {sent.sentence_id}"]
        for i, t in enumerate(sent.tokens, start=1):
            head1 = 0 if t.head is None else t.head + 1
            lines.append("\t".join([str(i), t.form, "_", t.upos, "_", "_",
                                    str(head1), t.deprel, "_", "_"]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class ConceptVocab:
    """Deterministically ordered concept names with sample counts."""

    names: tuple[str, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("concept names must be unique")
        if list(self.names) != sorted(self.names):
            raise ValueError("concept names must be in lexicographic order")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @staticmethod
    def from_labels(labels) -> "ConceptVocab":
        counter = Counter(labels)
        names = tuple(sorted(counter))
        return ConceptVocab(names, tuple(counter[n] for n in names))


@dataclass(frozen=True)
class Provenance:
    language: str
    task: str  # POS | REL
    split: str  # train | dev | test


@dataclass(frozen=True)
class LabeledDataset:
    """Feature/label pairs with a concept vocabulary and sentence grouping."""

    features: np.ndarray  # (N, n) float64
    labels: np.ndarray  # (N,) int64
    vocab: ConceptVocab
    provenance: Provenance
    sentence_index: np.ndarray  # (N,) int64, ordinal of the owning sentence
    sentence_ids: tuple[str, ...]

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels length mismatch")
        if self.labels.size and int(self.labels.max()) >= len(self.vocab):
            raise ValueError("label id out of vocab range")
        if self.sentence_index.shape[0] != self.labels.shape[0]:
            raise ValueError("sentence_index length mismatch")

    @property
    def n_samples(self) -> int:
        return int(self.features.shape[0])

    @property
    def n_dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_sentences(self) -> int:
        return len(self.sentence_ids)

    def label_names(self) -> np.ndarray:
        return np.asarray(self.vocab.names, dtype=object)[self.labels]


def _assemble(feature_rows, label_names, sent_index, sentence_ids, provenance):
    vocab = ConceptVocab.from_labels(label_names)
    name_to_id = {n: i for i, n in enumerate(vocab.names)}
    labels = np.asarray([name_to_id[n] for n in label_names], dtype=np.int64)
    features = (np.vstack(feature_rows).astype(np.float64)
                if feature_rows else np.zeros((0, 0)))
    return LabeledDataset(features, labels, vocab, provenance,
                          np.asarray(sent_index, dtype=np.int64),
                          tuple(sentence_ids))


def _check_alignment(sentences, store: FeatureStore):
    if len(sentences) != store.n_sentences:
        raise AlignmentError(
            f"treebank has {len(sentences)} sentences, store has {store.n_sentences}")
    for i, sent in enumerate(sentences):
        mat = get_sentence(store, i)
        if mat.shape[0] != len(sent.tokens):
            raise AlignmentError(
                f"sentence {sent.sentence_id!r}: {len(sent.tokens)} tokens in "
                f"treebank, {mat.shape[0]} vectors in store")


def build_pos_dataset(sentences, store: FeatureStore,
                      split: str = "train") -> LabeledDataset:
    """One (word vector, UPOS) pair per token, sentence order preserved."""
    _check_alignment(sentences, store)
    rows, names, sent_index = [], [], []
    for i, sent in enumerate(sentences):
        mat = get_sentence(store, i).astype(np.float64)
        for j, tok in enumerate(sent.tokens):
            rows.append(mat[j])
            names.append(tok.upos)
            sent_index.append(i)
    return _assemble(rows, names, sent_index,
                     [s.sentence_id for s in sentences],
                     Provenance(store.manifest.language, "POS", split))


def build_rel_dataset(sentences, store: FeatureStore, split: str = "train",
                      include_root: bool = False) -> LabeledDataset:
    """One (h_head - h_dep, deprel) pair per dependent token.

    Root arcs have no real head representation and are excluded by default;
    with include_root=True the sentence-mean vector stands in for the ROOT
    pseudo-node.
    """
    _check_alignment(sentences, store)
    rows, names, sent_index = [], [], []
    for i, sent in enumerate(sentences):
        mat = get_sentence(store, i).astype(np.float64)
        mean = mat.mean(axis=0) if include_root else None
        for j, tok in enumerate(sent.tokens):
            if tok.head is None:
                if not include_root:
                    continue
                rows.append(mean - mat[j])
            else:
                rows.append(mat[tok.head] - mat[j])
            names.append(tok.deprel)
            sent_index.append(i)
    return _assemble(rows, names, sent_index,
                     [s.sentence_id for s in sentences],
                     Provenance(store.manifest.language, "REL", split))


def filter_rare_concepts(ds: LabeledDataset,
                         min_count: int = 20) -> tuple[LabeledDataset, ConceptVocab]:
    """Drop concepts with fewer than min_count samples and re-index labels."""
    counts = np.bincount(ds.labels, minlength=len(ds.vocab))
    kept_ids = [k for k in range(len(ds.vocab)) if counts[k] >= min_count]
    kept_names = tuple(ds.vocab.names[k] for k in kept_ids)
    vocab = ConceptVocab(kept_names, tuple(int(counts[k]) for k in kept_ids))
    remap = -np.ones(len(ds.vocab), dtype=np.int64)
    for new, old in enumerate(kept_ids):
        remap[old] = new
    keep = remap[ds.labels] >= 0
    out = LabeledDataset(ds.features[keep], remap[ds.labels[keep]], vocab,
                         ds.provenance, ds.sentence_index[keep], ds.sentence_ids)
    return out, vocab


def restrict_to_vocab(ds: LabeledDataset, vocab: ConceptVocab) -> LabeledDataset:
    """Re-index labels against the given vocab, dropping absent concepts.

    Sentence grouping is preserved: sentences stay listed even when all of
    their samples were dropped.
    """
    target = {n: i for i, n in enumerate(vocab.names)}
    remap = np.asarray([target.get(n, -1) for n in ds.vocab.names], dtype=np.int64)
    mapped = remap[ds.labels]
    keep = mapped >= 0
    return LabeledDataset(ds.features[keep], mapped[keep], vocab, ds.provenance,
                          ds.sentence_index[keep], ds.sentence_ids)


def subset_sentences(ds: LabeledDataset, ordinals) -> LabeledDataset:
    """Dataset restricted to the given sentence ordinals (re-numbered)."""
    ordinals = [int(o) for o in ordinals]
    remap = {o: i for i, o in enumerate(ordinals)}
    keep = np.isin(ds.sentence_index, ordinals)
    new_index = np.asarray([remap[int(o)] for o in ds.sentence_index[keep]],
                           dtype=np.int64)
    return LabeledDataset(ds.features[keep], ds.labels[keep], ds.vocab,
                          ds.provenance, new_index,
                          tuple(ds.sentence_ids[o] for o in ordinals))


@dataclass(frozen=True)
class Episode:
    support: LabeledDataset
    query: LabeledDataset
    n_support_sentences: int
    n_query_sentences: int

    def __post_init__(self):
        overlap = set(self.support.sentence_ids) & set(self.query.sentence_ids)
        if overlap:
            raise ValueError(f"support and query share sentences: {sorted(overlap)}")


def sample_support_query(ds: LabeledDataset, n_support: int, n_query: int = 30,
                         seed: int = 0) -> Episode:
    """Sample disjoint support/query sentence sets without replacement."""
    total = ds.n_sentences
    if n_support + n_query > total:
        raise SamplingError(
            f"need {n_support}+{n_query} sentences, only {total} available")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(total)
    support = sorted(perm[:n_support].tolist())
    query = sorted(perm[n_support:n_support + n_query].tolist())
    return Episode(subset_sentences(ds, support), subset_sentences(ds, query),
                   n_support, n_query)


def holdout_split_for_testonly(ds: LabeledDataset, n_support: int,
                               seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """Support sampled from a test-only treebank; evaluate on the remainder."""
    total = ds.n_sentences
    if n_support >= total:
        raise SamplingError(
            f"need fewer than {total} support sentences, got {n_support}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(total)
    support = sorted(perm[:n_support].tolist())
    remainder = sorted(perm[n_support:].tolist())
    return subset_sentences(ds, support), subset_sentences(ds, remainder)
