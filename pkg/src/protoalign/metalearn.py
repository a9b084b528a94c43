"""Episodic meta-learning of cross-lingual alignment functions.

A shared nonlinear projector is meta-trained over per-language episodes
against frozen source-language prototypes. Few-shot mode pairs it with a
per-language affine map adapted from support sentences; zero-shot mode
learns a unified-prototype map instead; the in-context variant matches
query representations directly to demonstration-derived prototypes with no
prototype map at all.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .probe import PrototypeSet, class_means
from .tensorcore import (AdamConfig, AdamState, LinearMap, Mlp2, adam_step,
                         derive_rng, derive_seed, linear_apply, load_params,
                         mlp_backward, mlp_forward, proto_logits, proto_nll,
                         save_params, softmax)
from .treebank import (ConceptVocab, LabeledDataset,
                       holdout_split_for_testonly, restrict_to_vocab,
                       sample_support_query)

logger = logging.getLogger(__name__)

__all__ = [
    "MetaConfig",
    "AdaptConfig",
    "IclAlignConfig",
    "IclEpisode",
    "MetaModel",
    "meta_train_fewshot",
    "meta_train_zeroshot",
    "fewshot_adapt",
    "meta_classify",
    "evaluate_meta_accuracy",
    "evaluate_generalization",
    "icl_align_train",
    "save_meta_model",
    "load_meta_model",
    "MetaError",
]

MODES = ("fewshot", "zeroshot", "icl-align")


class MetaError(ValueError):
    pass


@dataclass
class MetaConfig:
    h: int = 256
    m: int = 32
    epochs: int = 50
    episodes_per_language_per_epoch: int = 50
    n_query: int = 30
    lr: float = 5e-5
    # learning rate of the per-language maps (and the unified-prototype map):
    # these must converge within episodes so the shared projector absorbs
    # only language-agnostic structure; mirrors the test-time adaptation rate
    g_lr: float = 5e-3
    wd: float = 1e-4
    dropout: float = 0.33
    seed: int = 0
    n_support_choices: tuple[int, ...] = (10, 30, 50)
    # "semi-orthogonal" starts the projector as a scaled isometry-like
    # linear map (relu(Qx) - relu(-Qx) = Qx), the flattest-spectrum prior
    # for a language-agnostic dimension reducer; "random" is the plain
    # uniform init
    projector_init: str = "semi-orthogonal"


@dataclass
class AdaptConfig:
    """Budget for learning a fresh per-language map from support examples."""

    epochs: int = 100
    lr: float = 5e-3
    batch: int = 8
    wd: float = 0.0
    seed: int = 0


@dataclass
class IclAlignConfig:
    hidden: int = 512
    epochs: int = 100
    episodes_per_language_per_epoch: int = 10
    lr: float = 5e-4
    wd: float = 1e-4
    dropout: float = 0.33
    seed: int = 0
    # demonstration prototypes live in the input space, so the natural
    # starting point is the identity function (when hidden >= 2n)
    projector_init: str = "identity"


@dataclass(frozen=True)
class IclEpisode:
    """Demonstration-contextualized episode for the in-context variant."""

    language: str
    demonstrations: LabeledDataset
    queries: LabeledDataset


@dataclass
class MetaModel:
    f_phi: Mlp2
    g_per_language: dict[str, LinearMap]
    h_omega: LinearMap | None
    source_prototypes: PrototypeSet | None
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise MetaError(f"unknown mode {self.mode!r}")
        if self.mode == "zeroshot" and self.h_omega is None:
            raise MetaError("zeroshot mode requires the unified-prototype map")
        if self.mode in ("fewshot", "zeroshot") and self.source_prototypes is None:
            raise MetaError(f"{self.mode} mode requires source prototypes")


def _prepare_languages(datasets, vocab: ConceptVocab):
    """Restrict every language to the source concepts; drop empty languages."""
    prepared = {}
    for lang in sorted(datasets):
        restricted = restrict_to_vocab(datasets[lang], vocab)
        if restricted.n_samples == 0:
            logger.warning("language %s has no samples for any source concept; "
                           "excluded from meta-training", lang)
            continue
        prepared[lang] = restricted
    if not prepared:
        raise MetaError("no language shares concepts with the source")
    return prepared


def _check_dims(prepared, source_ps: PrototypeSet, cfg):
    dims = {ds.n_dim for ds in prepared.values()}
    if len(dims) != 1:
        raise MetaError(f"languages disagree on feature dimension: {sorted(dims)}")
    (n,) = dims
    if n != source_ps.transform.in_dim:
        raise MetaError(
            f"feature dimension {n} does not match the source probe "
            f"({source_ps.transform.in_dim})")
    m = source_ps.prototypes.shape[1]
    if cfg.m != m:
        raise MetaError(f"cfg.m={cfg.m} but source prototypes live in {m} dims")
    return n, m


def _g_step(g: LinearMap, z: np.ndarray, golds: np.ndarray,
            prototypes: np.ndarray, state: AdamState) -> float:
    u = linear_apply(g, z)
    loss, du, _ = proto_nll(u, prototypes, golds)
    grads = {"weight": du.T @ z, "bias": du.sum(axis=0)}
    adam_step(g.parameters(), grads, state)
    return loss


def _init_projector(cfg: MetaConfig, n: int, prepared: dict,
                    prototypes: np.ndarray, out_dim: int | None = None) -> Mlp2:
    """Build the shared projector per cfg.projector_init.

    The semi-orthogonal start embeds a scaled isometry-like map through the
    ReLU pair trick; the scale matches projected feature norms to prototype
    norms so the distance softmax starts in a responsive regime. Falls back
    to the random init when the hidden layer cannot hold the paired rows.
    """
    m = out_dim if out_dim is not None else prototypes.shape[1]
    rng = derive_rng(cfg.seed, 0)
    if cfg.projector_init not in ("semi-orthogonal", "random"):
        raise MetaError(f"unknown projector_init {cfg.projector_init!r}")
    if cfg.projector_init == "random" or cfg.h < 2 * m:
        if cfg.projector_init == "semi-orthogonal":
            logger.warning("hidden width %d < 2*%d; using the random "
                           "projector init", cfg.h, m)
        return Mlp2.create(n, cfg.h, m, rng, cfg.dropout)
    gauss = rng.normal(size=(n, n))
    qmat, rmat = np.linalg.qr(gauss)
    q = (qmat * np.sign(np.diag(rmat)))[:m]
    sample = np.vstack([prepared[lang].features[:512]
                        for lang in sorted(prepared)])
    projected_ms = float(np.mean(np.sum((sample @ q.T) ** 2, axis=1)))
    proto_ms = float(np.mean(np.sum(prototypes ** 2, axis=1)))
    scale = np.sqrt(proto_ms / projected_ms) if projected_ms > 0 else 1.0
    w1 = 0.01 * rng.uniform(-1.0, 1.0, size=(cfg.h, n)) / np.sqrt(n)
    w1[:m] = q
    w1[m:2 * m] = -q
    w2 = np.zeros((m, cfg.h))
    w2[:, :m] = scale * np.eye(m)
    w2[:, m:2 * m] = -scale * np.eye(m)
    return Mlp2(LinearMap(w1, np.zeros(cfg.h)),
                LinearMap(w2, np.zeros(m)), cfg.dropout)


def meta_train_fewshot(datasets: dict[str, LabeledDataset],
                       source_ps: PrototypeSet, cfg: MetaConfig) -> MetaModel:
    """Train the shared projector and per-language maps episodically.

    Every episode first updates the episode language's map on the support
    NLL (mirroring test-time adaptation), then updates the projector and
    the map jointly on the query NLL. The projector persists across
    languages; maps persist per language; source prototypes stay frozen.
    """
    prepared = _prepare_languages(datasets, source_ps.vocab)
    n, m = _check_dims(prepared, source_ps, cfg)
    prototypes = source_ps.prototypes
    langs = sorted(prepared)
    f_phi = _init_projector(cfg, n, prepared, prototypes)
    g_maps = {lang: LinearMap.identity(m) for lang in langs}
    adam_f = AdamState.create(f_phi.parameters(),
                              AdamConfig(cfg.lr, weight_decay=cfg.wd))
    adam_g = {lang: AdamState.create(g_maps[lang].parameters(),
                                     AdamConfig(cfg.g_lr, weight_decay=cfg.wd))
              for lang in langs}
    for epoch in range(cfg.epochs):
        for li, lang in enumerate(langs):
            ds = prepared[lang]
            g = g_maps[lang]
            for e in range(cfg.episodes_per_language_per_epoch):
                pick_rng = derive_rng(cfg.seed, 1, epoch, li, e)
                n_support = int(pick_rng.choice(cfg.n_support_choices))
                episode = sample_support_query(
                    ds, n_support, cfg.n_query,
                    seed=derive_seed(cfg.seed, 2, epoch, li, e))
                dropout_rng = derive_rng(cfg.seed, 3, epoch, li, e)
                sup = episode.support
                if sup.n_samples > 0:
                    z, _ = mlp_forward(f_phi, sup.features, train=False)
                    _g_step(g, z, sup.labels, prototypes, adam_g[lang])
                qry = episode.query
                if qry.n_samples > 0:
                    z, cache = mlp_forward(f_phi, qry.features, train=True,
                                           rng=dropout_rng)
                    u = linear_apply(g, z)
                    _, du, _ = proto_nll(u, prototypes, qry.labels)
                    g_grads = {"weight": du.T @ z, "bias": du.sum(axis=0)}
                    dz = du @ g.weight
                    f_grads, _ = mlp_backward(f_phi, cache, dz)
                    adam_step(f_phi.parameters(), f_grads, adam_f)
                    adam_step(g.parameters(), g_grads, adam_g[lang])
    return MetaModel(f_phi, g_maps, None, source_ps, "fewshot")


def meta_train_zeroshot(datasets: dict[str, LabeledDataset],
                        source_ps: PrototypeSet, cfg: MetaConfig) -> MetaModel:
    """Jointly learn the projector and the unified-prototype map.

    Classification matches projected samples against transformed source
    prototypes; there are no per-language parameters. The episodic sampler
    is reused for consistency with few-shot training: each episode takes one
    update on the support batch and one on the query batch.
    """
    prepared = _prepare_languages(datasets, source_ps.vocab)
    n, m = _check_dims(prepared, source_ps, cfg)
    base = source_ps.prototypes
    langs = sorted(prepared)
    f_phi = _init_projector(cfg, n, prepared, base)
    h_omega = LinearMap.identity(m)
    adam_f = AdamState.create(f_phi.parameters(),
                              AdamConfig(cfg.lr, weight_decay=cfg.wd))
    adam_h = AdamState.create(h_omega.parameters(),
                              AdamConfig(cfg.g_lr, weight_decay=cfg.wd))

    def step(batch: LabeledDataset, dropout_rng):
        if batch.n_samples == 0:
            return
        z, cache = mlp_forward(f_phi, batch.features, train=True,
                               rng=dropout_rng)
        unified = linear_apply(h_omega, base)
        _, dz, dproto = proto_nll(z, unified, batch.labels)
        f_grads, _ = mlp_backward(f_phi, cache, dz)
        adam_step(f_phi.parameters(), f_grads, adam_f)
        adam_step(h_omega.parameters(),
                  {"weight": dproto.T @ base, "bias": dproto.sum(axis=0)},
                  adam_h)

    for epoch in range(cfg.epochs):
        for li, lang in enumerate(langs):
            ds = prepared[lang]
            for e in range(cfg.episodes_per_language_per_epoch):
                pick_rng = derive_rng(cfg.seed, 1, epoch, li, e)
                n_support = int(pick_rng.choice(cfg.n_support_choices))
                episode = sample_support_query(
                    ds, n_support, cfg.n_query,
                    seed=derive_seed(cfg.seed, 2, epoch, li, e))
                step(episode.support, derive_rng(cfg.seed, 3, epoch, li, e))
                step(episode.query, derive_rng(cfg.seed, 4, epoch, li, e))
    return MetaModel(f_phi, {}, h_omega, source_ps, "zeroshot")


def fewshot_adapt(model: MetaModel, support: LabeledDataset,
                  adapt_cfg: AdaptConfig) -> LinearMap:
    """Learn a fresh per-language map from support examples.

    The projector stays frozen (support projections are computed once, in
    eval mode); an identity-initialized affine map is trained by minibatch
    Adam on the prototype NLL for the configured number of passes.
    """
    if model.mode != "fewshot":
        raise MetaError(f"adaptation requires fewshot mode, got {model.mode!r}")
    if support.n_samples == 0:
        raise MetaError("few-shot adaptation requires at least one support example")
    prototypes = model.source_prototypes.prototypes
    if support.labels.max() >= prototypes.shape[0]:
        raise MetaError("support labels must index source concepts")
    z_all, _ = mlp_forward(model.f_phi, support.features, train=False)
    g = LinearMap.identity(prototypes.shape[1])
    state = AdamState.create(g.parameters(),
                             AdamConfig(adapt_cfg.lr, weight_decay=adapt_cfg.wd))
    rng = derive_rng(adapt_cfg.seed, 0)
    for _ in range(adapt_cfg.epochs):
        perm = rng.permutation(support.n_samples)
        for start in range(0, len(perm), adapt_cfg.batch):
            idx = perm[start:start + adapt_cfg.batch]
            _g_step(g, z_all[idx], support.labels[idx], prototypes, state)
    return g


def _effective_scores(model: MetaModel, features: np.ndarray,
                      language: str | None = None,
                      g: LinearMap | None = None,
                      prototypes: np.ndarray | None = None):
    """(projected points, effective prototypes) for the model's mode."""
    z, _ = mlp_forward(model.f_phi, features, train=False)
    if model.mode == "fewshot":
        if g is None:
            if language is None or language not in model.g_per_language:
                raise MetaError(f"no adapted map for language {language!r}")
            g = model.g_per_language[language]
        return linear_apply(g, z), model.source_prototypes.prototypes
    if model.mode == "zeroshot":
        return z, linear_apply(model.h_omega, model.source_prototypes.prototypes)
    if prototypes is None:
        raise MetaError("icl-align classification needs demonstration prototypes")
    return z, np.asarray(prototypes, dtype=np.float64)


def meta_classify(model: MetaModel, language: str | None, x: np.ndarray,
                  prototypes: np.ndarray | None = None):
    """Predicted concept id and probabilities for a single vector."""
    u, protos = _effective_scores(model, np.atleast_2d(x), language=language,
                                  prototypes=prototypes)
    probs = softmax(proto_logits(u[0], protos))
    return int(np.argmax(probs)), probs


def evaluate_meta_accuracy(model: MetaModel, ds: LabeledDataset,
                           language: str | None = None,
                           g: LinearMap | None = None,
                           prototypes: np.ndarray | None = None,
                           concept_names: tuple[str, ...] | None = None,
                           unseen_policy: str = "misclassified") -> float:
    """Accuracy over a dataset; gold concepts outside the model's vocabulary
    count as errors under the default policy."""
    if unseen_policy not in ("misclassified", "skip"):
        raise MetaError(f"unknown unseen_policy {unseen_policy!r}")
    if ds.n_samples == 0:
        raise MetaError("cannot evaluate on an empty dataset")
    if concept_names is None:
        concept_names = model.source_prototypes.vocab.names
    name_to_id = {n: i for i, n in enumerate(concept_names)}
    gold = np.asarray([name_to_id.get(n, -1) for n in ds.vocab.names],
                      dtype=np.int64)[ds.labels]
    u, protos = _effective_scores(model, ds.features, language=language, g=g,
                                  prototypes=prototypes)
    d2 = (np.sum(u * u, axis=1)[:, None] - 2.0 * u @ protos.T
          + np.sum(protos * protos, axis=1)[None, :])
    pred = np.argmin(d2, axis=1)
    if unseen_policy == "skip":
        keep = gold >= 0
        if not keep.any():
            raise MetaError("no samples left after skipping unseen concepts")
        return float(np.mean(pred[keep] == gold[keep]))
    return float(np.mean(pred == gold))


def evaluate_generalization(model: MetaModel, train_ds: LabeledDataset | None,
                            test_ds: LabeledDataset, n_support_values,
                            runs: int, seed: int,
                            adapt_cfg: AdaptConfig | None = None) -> dict:
    """Per-run accuracies for each support-set size.

    For each run and N > 0, N support sentences are sampled (from the
    training split, or held out from the test split when no training data
    exists), the model adapts in few-shot mode or skips adaptation in
    zero-shot mode, and accuracy is measured on the evaluation split.
    """
    if adapt_cfg is None:
        adapt_cfg = AdaptConfig()
    vocab = model.source_prototypes.vocab
    results: dict[int, list[float]] = {}
    for ni, n_support in enumerate(sorted(int(v) for v in n_support_values)):
        accs = []
        for run in range(runs):
            run_seed = derive_seed(seed, ni, run)
            if n_support == 0:
                if model.mode == "fewshot":
                    raise MetaError("few-shot mode requires support examples "
                                    "(n_support = 0)")
                accs.append(evaluate_meta_accuracy(model, test_ds))
                continue
            if train_ds is not None:
                support_raw, _ = holdout_split_for_testonly(
                    train_ds, n_support, seed=run_seed)
                eval_ds = test_ds
            else:
                support_raw, eval_ds = holdout_split_for_testonly(
                    test_ds, n_support, seed=run_seed)
            if model.mode == "fewshot":
                support = restrict_to_vocab(support_raw, vocab)
                if support.n_samples == 0:
                    raise MetaError("support shares no concepts with the source")
                cfg_run = AdaptConfig(epochs=adapt_cfg.epochs, lr=adapt_cfg.lr,
                                      batch=adapt_cfg.batch, wd=adapt_cfg.wd,
                                      seed=derive_seed(seed, ni, run, 1))
                g = fewshot_adapt(model, support, cfg_run)
                accs.append(evaluate_meta_accuracy(model, eval_ds, g=g))
            else:
                accs.append(evaluate_meta_accuracy(model, eval_ds))
        results[n_support] = accs
    return results


def _episode_prototypes(demos: LabeledDataset):
    """Per-concept means of demonstration representations (identity map)."""
    if demos.n_samples == 0:
        raise MetaError("episode demonstrations are empty")
    vocab = ConceptVocab.from_labels(list(demos.label_names()))
    restricted = restrict_to_vocab(demos, vocab)
    return class_means(restricted), vocab


def icl_align_train(episodes: list[IclEpisode], cfg: IclAlignConfig) -> MetaModel:
    """Train the projector against demonstration-derived prototypes.

    Each episode's prototypes are the per-concept means of its demonstration
    representations (no transform applied); the projector learns to move
    query representations toward them and transfers across contexts
    unchanged at test time.
    """
    if not episodes:
        raise MetaError("need at least one training episode")
    dims = {ep.demonstrations.n_dim for ep in episodes}
    if len(dims) != 1:
        raise MetaError(f"episodes disagree on feature dimension: {sorted(dims)}")
    (n,) = dims
    if cfg.projector_init not in ("identity", "random"):
        raise MetaError(f"unknown projector_init {cfg.projector_init!r}")
    if cfg.projector_init == "identity" and cfg.hidden >= 2 * n:
        rng = derive_rng(cfg.seed, 0)
        w1 = 0.01 * rng.uniform(-1.0, 1.0, size=(cfg.hidden, n)) / np.sqrt(n)
        w1[:n] = np.eye(n)
        w1[n:2 * n] = -np.eye(n)
        w2 = np.zeros((n, cfg.hidden))
        w2[:, :n] = np.eye(n)
        w2[:, n:2 * n] = -np.eye(n)
        f_phi = Mlp2(LinearMap(w1, np.zeros(cfg.hidden)),
                     LinearMap(w2, np.zeros(n)), cfg.dropout)
    else:
        f_phi = Mlp2.create(n, cfg.hidden, n, derive_rng(cfg.seed, 0),
                            cfg.dropout)
    adam = AdamState.create(f_phi.parameters(),
                            AdamConfig(cfg.lr, weight_decay=cfg.wd))
    order_rng = derive_rng(cfg.seed, 1)
    for epoch in range(cfg.epochs):
        for idx in order_rng.permutation(len(episodes)):
            ep = episodes[int(idx)]
            prototypes, vocab = _episode_prototypes(ep.demonstrations)
            queries = restrict_to_vocab(ep.queries, vocab)
            if queries.n_samples == 0:
                continue
            dropout_rng = derive_rng(cfg.seed, 2, epoch, int(idx))
            z, cache = mlp_forward(f_phi, queries.features, train=True,
                                   rng=dropout_rng)
            _, dz, _ = proto_nll(z, prototypes, queries.labels)
            f_grads, _ = mlp_backward(f_phi, cache, dz)
            adam_step(f_phi.parameters(), f_grads, adam)
    return MetaModel(f_phi, {}, None, None, "icl-align")


# ---------------------------------------------------------------------------
# serialization


def save_meta_model(path, model: MetaModel) -> None:
    """Tensorcore parameter format with a JSON index of per-language maps."""
    arrays = {f"f.{k}": v for k, v in model.f_phi.parameters().items()}
    for lang in sorted(model.g_per_language):
        for k, v in model.g_per_language[lang].parameters().items():
            arrays[f"g.{lang}.{k}"] = v
    if model.h_omega is not None:
        for k, v in model.h_omega.parameters().items():
            arrays[f"h.{k}"] = v
    meta = {
        "kind": "meta-model",
        "mode": model.mode,
        "dropout": model.f_phi.dropout_p,
        "languages": sorted(model.g_per_language),
        "has_h": model.h_omega is not None,
    }
    if model.source_prototypes is not None:
        ps = model.source_prototypes
        arrays["source.transform.weight"] = ps.transform.weight
        arrays["source.class_means"] = ps.class_means
        meta["source_vocab"] = {"names": list(ps.vocab.names),
                                "counts": list(ps.vocab.counts)}
    save_params(path, arrays, meta)


def load_meta_model(path) -> MetaModel:
    arrays, meta = load_params(path)
    if meta.get("kind") != "meta-model":
        raise MetaError(f"{path!r} is not a meta-model artifact")
    f_phi = Mlp2(LinearMap(arrays["f.layer1.weight"], arrays["f.layer1.bias"]),
                 LinearMap(arrays["f.layer2.weight"], arrays["f.layer2.bias"]),
                 meta["dropout"])
    g_maps = {lang: LinearMap(arrays[f"g.{lang}.weight"],
                              arrays[f"g.{lang}.bias"])
              for lang in meta["languages"]}
    h_omega = None
    if meta["has_h"]:
        h_omega = LinearMap(arrays["h.weight"], arrays["h.bias"])
    source = None
    if "source_vocab" in meta:
        vocab = ConceptVocab(tuple(meta["source_vocab"]["names"]),
                             tuple(meta["source_vocab"]["counts"]))
        transform = LinearMap(arrays["source.transform.weight"])
        means = arrays["source.class_means"]
        source = PrototypeSet(transform, means, means @ transform.weight.T,
                              vocab)
    return MetaModel(f_phi, g_maps, h_omega, source, meta["mode"])
