"""Linear prototype probe.

Learns a linear transformation of representation space in which each
concept is summarized by the mean of its projected samples, and classifies
by softmax over negative squared distances to those prototypes. Because the
transform is linear, prototypes equal the transform applied to raw class
means, so means are computed once and prototypes follow the transform
analytically at every step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tensorcore import (AdamConfig, AdamState, LinearMap, adam_step,
                         derive_rng, load_params, proto_logits, proto_nll,
                         save_params, softmax)
from .treebank import ConceptVocab, LabeledDataset

__all__ = [
    "ProbeConfig",
    "PrototypeSet",
    "class_means",
    "compute_prototypes",
    "train_probe",
    "classify",
    "evaluate_accuracy",
    "save_probe",
    "load_probe",
    "ProbeError",
]


class ProbeError(ValueError):
    pass


@dataclass
class ProbeConfig:
    m: int
    lr: float = 1e-4
    wd: float = 1e-6
    batch: int = 8
    epochs: int = 20
    seed: int = 0
    # weights start at init_scale * Uniform(-1/sqrt(n), +1/sqrt(n)); a small
    # init keeps the learned geometry data-determined instead of carrying
    # random-projection noise from the starting point
    init_scale: float = 0.1


@dataclass
class PrototypeSet:
    """Projected class prototypes plus the raw class means they come from.

    Invariant: prototypes == class_means @ transform.weight.T row for row.
    """

    transform: LinearMap
    class_means: np.ndarray  # (K, n)
    prototypes: np.ndarray  # (K, m)
    vocab: ConceptVocab

    def __post_init__(self):
        expected = self.class_means @ self.transform.weight.T
        if not np.allclose(self.prototypes, expected, atol=1e-10, rtol=0.0):
            raise ProbeError("prototypes deviate from transformed class means")

    @property
    def n_concepts(self) -> int:
        return len(self.vocab)

    def restricted_to(self, names) -> "PrototypeSet":
        """Rows for the given concept names, in the given order."""
        ids = [self.vocab.index(n) for n in names]
        counts = tuple(self.vocab.counts[i] for i in ids)
        vocab = ConceptVocab(tuple(names), counts)
        return PrototypeSet(self.transform, self.class_means[ids],
                            self.prototypes[ids], vocab)


def class_means(ds: LabeledDataset) -> np.ndarray:
    """Per-concept mean of raw features, rows ordered like the vocab."""
    k = len(ds.vocab)
    counts = np.bincount(ds.labels, minlength=k)
    empty = [ds.vocab.names[i] for i in range(k) if counts[i] == 0]
    if empty:
        raise ProbeError(f"concepts with no samples: {empty}")
    sums = np.zeros((k, ds.n_dim))
    np.add.at(sums, ds.labels, ds.features)
    return sums / counts[:, None]


def compute_prototypes(transform: LinearMap, ds: LabeledDataset) -> PrototypeSet:
    means = class_means(ds)
    return PrototypeSet(transform, means, means @ transform.weight.T, ds.vocab)


def train_probe(train: LabeledDataset, dev: LabeledDataset, cfg: ProbeConfig):
    """Minibatch Adam on the prototype NLL; keeps the best-dev-accuracy epoch.

    Class means are fixed from the full training set; the gradient flows
    through both the projected samples and the prototypes. Ties on dev
    accuracy keep the earliest epoch. Returns (transform, prototype set,
    per-epoch history).
    """
    if train.n_samples == 0:
        raise ProbeError("empty training set")
    mu = class_means(train)
    n = train.n_dim
    rng_init = derive_rng(cfg.seed, 0)
    transform = LinearMap.init_uniform(cfg.m, n, rng_init, bias=False)
    transform.weight *= cfg.init_scale
    weight = transform.weight
    state = AdamState.create({"weight": weight},
                             AdamConfig(lr=cfg.lr, weight_decay=cfg.wd))
    shuffle_rng = derive_rng(cfg.seed, 1)
    x_all = train.features
    y_all = train.labels
    best_acc, best_epoch, best_weight = -1.0, -1, weight.copy()
    history = []
    for epoch in range(1, cfg.epochs + 1):
        perm = shuffle_rng.permutation(train.n_samples)
        total = 0.0
        for start in range(0, len(perm), cfg.batch):
            idx = perm[start:start + cfg.batch]
            x = x_all[idx]
            y = y_all[idx]
            z = x @ weight.T
            protos = mu @ weight.T
            loss, dz, dproto = proto_nll(z, protos, y)
            grad = dz.T @ x + dproto.T @ mu
            adam_step({"weight": weight}, {"weight": grad}, state)
            total += loss * len(idx)
        train_loss = total / train.n_samples
        ps = PrototypeSet(LinearMap(weight.copy()), mu, mu @ weight.T, train.vocab)
        dev_acc = evaluate_accuracy(ps, dev)
        history.append({"epoch": epoch, "train_loss": train_loss,
                        "dev_accuracy": dev_acc})
        if dev_acc > best_acc:
            best_acc, best_epoch, best_weight = dev_acc, epoch, weight.copy()
    best = LinearMap(best_weight)
    return best, PrototypeSet(best, mu, mu @ best.weight.T, train.vocab), history


def classify(ps: PrototypeSet, x: np.ndarray):
    """Predicted concept id and the K class probabilities for one vector."""
    z = np.asarray(x, dtype=np.float64) @ ps.transform.weight.T
    probs = softmax(proto_logits(z, ps.prototypes))
    return int(np.argmax(probs)), probs


def _predict_ids(ps: PrototypeSet, features: np.ndarray) -> np.ndarray:
    z = features @ ps.transform.weight.T
    d2 = (np.sum(z * z, axis=1)[:, None]
          - 2.0 * z @ ps.prototypes.T
          + np.sum(ps.prototypes * ps.prototypes, axis=1)[None, :])
    return np.argmin(d2, axis=1)


def evaluate_accuracy(ps: PrototypeSet, ds: LabeledDataset,
                      unseen_policy: str = "misclassified") -> float:
    """Fraction of samples whose nearest prototype is the gold concept.

    Samples whose gold concept is absent from the prototype vocabulary are
    counted as errors under the default "misclassified" policy, or dropped
    under "skip".
    """
    if unseen_policy not in ("misclassified", "skip"):
        raise ProbeError(f"unknown unseen_policy {unseen_policy!r}")
    if ds.n_samples == 0:
        raise ProbeError("cannot evaluate on an empty dataset")
    name_to_id = {n: i for i, n in enumerate(ps.vocab.names)}
    gold = np.asarray([name_to_id.get(n, -1) for n in ds.vocab.names],
                      dtype=np.int64)[ds.labels]
    if unseen_policy == "skip":
        keep = gold >= 0
        if not keep.any():
            raise ProbeError("no samples left after skipping unseen concepts")
        pred = _predict_ids(ps, ds.features[keep])
        return float(np.mean(pred == gold[keep]))
    pred = _predict_ids(ps, ds.features)
    return float(np.mean(pred == gold))


def save_probe(path, ps: PrototypeSet) -> None:
    """Parameters in the tensorcore format plus the vocab as JSON."""
    save_params(path,
                {"transform.weight": ps.transform.weight,
                 "class_means": ps.class_means},
                meta={"kind": "probe",
                      "m": ps.transform.out_dim,
                      "n": ps.transform.in_dim})
    vocab_doc = {"names": list(ps.vocab.names), "counts": list(ps.vocab.counts)}
    with open(str(path) + ".vocab.json", "w", encoding="utf-8") as f:
        json.dump(vocab_doc, f, sort_keys=True, indent=2)
        f.write("\n")


def load_probe(path) -> PrototypeSet:
    arrays, meta = load_params(path)
    if meta.get("kind") != "probe":
        raise ProbeError(f"{path!r} is not a probe artifact")
    with open(str(path) + ".vocab.json", "r", encoding="utf-8") as f:
        vocab_doc = json.load(f)
    vocab = ConceptVocab(tuple(vocab_doc["names"]), tuple(vocab_doc["counts"]))
    transform = LinearMap(arrays["transform.weight"])
    means = arrays["class_means"]
    return PrototypeSet(transform, means, means @ transform.weight.T, vocab)
