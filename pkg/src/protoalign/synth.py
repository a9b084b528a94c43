"""Synthetic multi-language corpora for desk-scale verification.

Concept clusters are Gaussian blobs around seeded random means. The source
language draws samples directly; every other language draws from the same
distribution and applies a per-language map: a Haar-random orthogonal
matrix, a rotation with all plane angles bounded (modeling nearly aligned
spaces), or a completely independent concept geometry for null-case tests.
Each language/split is emitted as a CoNLL-U file plus a matching PCFS
feature store.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .featurestore import FeatureStore, Manifest, write_store
from .tensorcore import derive_rng
from .treebank import Sentence, Token, to_conllu

__all__ = [
    "SyntheticSpec",
    "ROTATION_KINDS",
    "concept_names",
    "haar_orthogonal",
    "bounded_rotation",
    "generate_corpus",
]

ROTATION_KINDS = ("orthogonal-random", "near-identity", "independent")

SPLITS = ("train", "dev", "test")


@dataclass
class SyntheticSpec:
    """Generator settings.

    Concept means are Gaussian with per-concept scales spaced geometrically
    between radius_min and radius_max; differing concept norms give the
    inter-prototype distances a realistic dynamic range, and the ratio of
    the smallest separations to cluster_spread leaves enough class overlap
    to anchor the probe's learned geometry in the data.
    """

    n_concepts: int = 17
    n_dim: int = 64
    n_languages: int = 5
    rotation: str = "orthogonal-random"
    angle_bound_deg: float = 15.0
    cluster_spread: float = 0.3
    radius_min: float = 1.2
    radius_max: float = 3.9
    sentences_per_language: int = 500
    tokens_per_sentence: int = 24
    dev_sentences: int | None = None
    test_sentences: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.n_concepts < 2:
            raise ValueError("need at least 2 concepts")
        if self.cluster_spread <= 0:
            raise ValueError("cluster_spread must be positive")
        if not 0 < self.radius_min <= self.radius_max:
            raise ValueError("need 0 < radius_min <= radius_max")
        if self.rotation not in ROTATION_KINDS:
            raise ValueError(f"rotation must be one of {ROTATION_KINDS}")
        if self.n_languages < 1 or self.n_dim < 2:
            raise ValueError("need at least 1 language and 2 dimensions")
        if self.sentences_per_language < 1 or self.tokens_per_sentence < 1:
            raise ValueError("sentence and token counts must be positive")

    def split_sizes(self) -> dict[str, int]:
        train = self.sentences_per_language
        dev = self.dev_sentences if self.dev_sentences is not None \
            else max(30, train // 5)
        test = self.test_sentences if self.test_sentences is not None \
            else max(60, train // 4)
        return {"train": train, "dev": dev, "test": test}


def concept_names(n: int) -> list[str]:
    width = len(str(n))
    return [f"C{i + 1:0{width}d}" for i in range(n)]


def haar_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-fixed QR."""
    a = rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def bounded_rotation(dim: int, bound_deg: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Rotation whose plane angles are all within the given bound.

    Built as Q B Q^T where Q is Haar orthogonal and B is block-diagonal with
    2x2 rotations through angles drawn uniformly from [-bound, +bound].
    """
    q = haar_orthogonal(dim, rng)
    block = np.eye(dim)
    bound = np.deg2rad(bound_deg)
    for p in range(dim // 2):
        theta = rng.uniform(-bound, bound)
        c, s = np.cos(theta), np.sin(theta)
        i, j = 2 * p, 2 * p + 1
        block[i, i] = c
        block[i, j] = -s
        block[j, i] = s
        block[j, j] = c
    return q @ block @ q.T


def _draw_means(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    # concept scales are shuffled per draw so that independently drawn
    # geometries share no structure at all, not even the radius assignment
    radii = rng.permutation(
        np.geomspace(spec.radius_min, spec.radius_max, spec.n_concepts))
    g = rng.normal(size=(spec.n_concepts, spec.n_dim))
    return radii[:, None] * g / np.sqrt(spec.n_dim)


def _language_map(spec: SyntheticSpec, lang_index: int) -> np.ndarray:
    if lang_index == 0 or spec.rotation == "independent":
        return np.eye(spec.n_dim)
    rng = derive_rng(spec.seed, 10, lang_index)
    if spec.rotation == "orthogonal-random":
        return haar_orthogonal(spec.n_dim, rng)
    return bounded_rotation(spec.n_dim, spec.angle_bound_deg, rng)


def _language_means(spec: SyntheticSpec, lang_index: int,
                    base_means: np.ndarray) -> np.ndarray:
    if spec.rotation == "independent" and lang_index > 0:
        return _draw_means(spec, derive_rng(spec.seed, 11, lang_index))
    return base_means


def _make_split(spec, lang, lang_index, split, split_index, n_sentences,
                means, rotation, names):
    rng = derive_rng(spec.seed, 12, lang_index, split_index)
    t = spec.tokens_per_sentence
    labels = rng.integers(0, spec.n_concepts, size=(n_sentences, t))
    noise = rng.normal(size=(n_sentences, t, spec.n_dim))
    x = (means[labels] + spec.cluster_spread * noise) @ rotation
    sentences = []
    matrices = []
    for i in range(n_sentences):
        tokens = []
        for j in range(t):
            name = names[labels[i, j]]
            head = None if j == 0 else 0
            deprel = "root" if j == 0 else "dep"
            tokens.append(Token(f"{name.lower()}w{j}", name, head, deprel))
        sentences.append(Sentence(tuple(tokens), f"{lang}-{split}-{i:05d}"))
        matrices.append(x[i].astype("<f4"))
    return sentences, matrices


def generate_corpus(spec: SyntheticSpec, out_dir) -> dict:
    """Write treebanks and feature stores; returns {language: {split: paths}}."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = concept_names(spec.n_concepts)
    base_means = _draw_means(spec, derive_rng(spec.seed, 0))
    sizes = spec.split_sizes()
    layout: dict = {}
    for lang_index in range(spec.n_languages):
        lang = f"syn{lang_index}"
        rotation = _language_map(spec, lang_index)
        means = _language_means(spec, lang_index, base_means)
        layout[lang] = {}
        for split_index, split in enumerate(SPLITS):
            sentences, matrices = _make_split(
                spec, lang, lang_index, split, split_index, sizes[split],
                means, rotation, names)
            conllu_path = out / f"{lang}_{split}.conllu"
            conllu_path.write_text(to_conllu(sentences), encoding="utf-8")
            store_path = out / f"{lang}_{split}.pcfs"
            manifest = Manifest(language=lang, model_name="synthetic-gaussian",
                                layer=0, treebank_file=conllu_path.name,
                                n_sentences=len(sentences), n_dim=spec.n_dim,
                                content_checksum=0, pooling="none")
            write_store(FeatureStore(spec.n_dim, matrices, manifest), store_path)
            layout[lang][split] = {"treebank": str(conllu_path),
                                   "store": str(store_path)}
    return layout
