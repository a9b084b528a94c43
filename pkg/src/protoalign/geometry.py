"""Alignability between two languages' prototype configurations.

Representational similarity analysis (rank correlation of inter-prototype
squared-distance matrices), Procrustes explained variance, three randomized
baselines (prototype permutation, random sample per concept, fully random
samples), and a Wilcoxon signed-rank test with an exact tie-aware null
distribution for small n.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .probe import PrototypeSet
from .tensorcore import derive_seed
from .treebank import LabeledDataset

__all__ = [
    "DissimilarityMatrix",
    "StatTestResult",
    "BaselineResult",
    "AlignabilityReport",
    "dissimilarity_matrix",
    "average_ranks",
    "spearman",
    "rsa",
    "procrustes_alignability",
    "baseline_distribution",
    "wilcoxon_signed_rank",
    "alignability_report",
    "GeometryError",
    "DegenerateError",
    "UndefinedCorrelationError",
    "BASELINE_KINDS",
    "METRICS",
]

BASELINE_KINDS = ("RP", "RC", "RS")
METRICS = ("rsa", "procrustes")

EXACT_WILCOXON_MAX_N = 50


class GeometryError(ValueError):
    pass


class DegenerateError(GeometryError):
    """All points identical; no geometry to compare."""


class UndefinedCorrelationError(GeometryError):
    """Zero rank variance; the correlation is undefined."""


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Symmetric zero-diagonal matrix of squared inter-prototype distances."""

    values: np.ndarray  # (K, K)
    names: tuple[str, ...]

    def __post_init__(self):
        v = self.values
        if v.shape[0] != v.shape[1] or v.shape[0] != len(self.names):
            raise GeometryError("dissimilarity matrix shape mismatch")
        if not np.allclose(v, v.T):
            raise GeometryError("dissimilarity matrix must be symmetric")

    @property
    def n_concepts(self) -> int:
        return len(self.names)

    def lower_triangle(self) -> np.ndarray:
        i, j = np.tril_indices(self.n_concepts, k=-1)
        return self.values[i, j]


def dissimilarity_matrix(ps: PrototypeSet) -> DissimilarityMatrix:
    p = ps.prototypes
    diff = p[:, None, :] - p[None, :, :]
    m = np.sum(diff * diff, axis=-1)
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 0.0)
    return DissimilarityMatrix(m, ps.vocab.names)


def _pairwise_sq(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    m = np.sum(diff * diff, axis=-1)
    m = 0.5 * (m + m.T)
    np.fill_diagonal(m, 0.0)
    return m


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1; tied values receive the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    _, inverse, counts = np.unique(values, return_inverse=True,
                                   return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts
    mean_rank = (starts + ends - 1) / 2.0 + 1.0
    return mean_rank[inverse]


def spearman(xs, ys) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise GeometryError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if len(xs) < 3:
        raise GeometryError(f"need at least 3 values, got {len(xs)}")
    rx = average_ranks(xs)
    ry = average_ranks(ys)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sx2 = float(dx @ dx)
    sy2 = float(dy @ dy)
    if sx2 == 0.0 or sy2 == 0.0:
        raise UndefinedCorrelationError("zero rank variance")
    return float((dx @ dy) / math.sqrt(sx2 * sy2))


def rsa(m1: DissimilarityMatrix, m2: DissimilarityMatrix) -> float:
    """Rank correlation between strictly-lower-triangle dissimilarities."""
    if m1.names != m2.names:
        raise GeometryError("dissimilarity matrices use different concept orders")
    if m1.n_concepts < 3:
        raise GeometryError("RSA needs at least 3 shared concepts")
    return spearman(m1.lower_triangle(), m2.lower_triangle())


def _rsa_points(p1: np.ndarray, p2: np.ndarray) -> float:
    k = p1.shape[0]
    i, j = np.tril_indices(k, k=-1)
    return spearman(_pairwise_sq(p1)[i, j], _pairwise_sq(p2)[i, j])


def procrustes_alignability(p1: np.ndarray, p2: np.ndarray) -> float:
    """Explained variance of the best orthogonal-plus-dilation fit of p2 to p1.

    Both configurations are centered and scaled to unit Frobenius norm, the
    optimal orthogonal map comes from the SVD of p1^T p2 together with the
    optimal dilation, and the returned value is the per-column coefficient
    of determination of the transformed p2 predicting p1, uniformly averaged
    over columns.
    """
    a = np.array(p1, dtype=np.float64)
    b = np.array(p2, dtype=np.float64)
    if a.shape != b.shape:
        raise GeometryError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or a.shape[0] < 2:
        raise GeometryError("need at least 2 points")
    a -= a.mean(axis=0)
    b -= b.mean(axis=0)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateError("all points identical in one configuration")
    a /= norm_a
    b /= norm_b
    u, s, vt = np.linalg.svd(a.T @ b)
    rot = u @ vt
    fitted = (b @ rot.T) * s.sum()
    ss_res = np.sum((a - fitted) ** 2, axis=0)
    ss_tot = np.sum(a * a, axis=0)
    r2 = np.empty_like(ss_tot)
    nonzero = ss_tot > 0.0
    r2[nonzero] = 1.0 - ss_res[nonzero] / ss_tot[nonzero]
    r2[~nonzero] = np.where(ss_res[~nonzero] < 1e-15, 1.0, 0.0)
    return float(r2.mean())


# ---------------------------------------------------------------------------
# randomized baselines


def _metric_value(metric: str, p1: np.ndarray, p2: np.ndarray) -> float:
    if metric == "rsa":
        return _rsa_points(p1, p2)
    if metric == "procrustes":
        return procrustes_alignability(p1, p2)
    raise GeometryError(f"unknown metric {metric!r}")


def baseline_distribution(kind: str, ps1: PrototypeSet, ps2: PrototypeSet,
                          ds2: LabeledDataset, metric: str,
                          n_trials: int = 100, seed: int = 0) -> np.ndarray:
    """Null alignability values from randomized deformations of language 2.

    RP permutes prototype rows (uniform over all permutations, identity
    included), RC replaces each concept's prototype with one random sample
    of that concept projected by language 2's transform, and RS substitutes
    K projected samples drawn uniformly from the whole dataset.
    """
    if kind not in BASELINE_KINDS:
        raise GeometryError(f"unknown baseline kind {kind!r}")
    if metric not in METRICS:
        raise GeometryError(f"unknown metric {metric!r}")
    rng = np.random.default_rng(seed)
    p1 = ps1.prototypes
    k = ps2.prototypes.shape[0]
    if kind == "RC":
        ds_ids = {n: i for i, n in enumerate(ds2.vocab.names)}
        concept_rows = []
        for name in ps2.vocab.names:
            if name not in ds_ids:
                raise GeometryError(f"concept {name!r} absent from the dataset")
            rows = np.flatnonzero(ds2.labels == ds_ids[name])
            if rows.size == 0:
                raise GeometryError(f"concept {name!r} has no samples")
            concept_rows.append(rows)
    values = np.empty(n_trials)
    weight_t = ps2.transform.weight.T
    for t in range(n_trials):
        if kind == "RP":
            p2 = ps2.prototypes[rng.permutation(k)]
        elif kind == "RC":
            picks = [rows[rng.integers(rows.size)] for rows in concept_rows]
            p2 = ds2.features[picks] @ weight_t
        else:  # RS
            if ds2.n_samples < k:
                raise GeometryError(
                    f"RS needs at least {k} samples, got {ds2.n_samples}")
            picks = rng.choice(ds2.n_samples, size=k, replace=False)
            p2 = ds2.features[picks] @ weight_t
        values[t] = _metric_value(metric, p1, p2)
    return values


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test


@dataclass(frozen=True)
class StatTestResult:
    statistic: float  # W = min(W+, W-)
    p_value: float
    n_effective: int
    method: str  # "exact" | "normal-approx"


def _signed_rank_counts(ranks2: np.ndarray) -> np.ndarray:
    """Counts of sign assignments per achievable doubled rank sum.

    ranks2 holds doubled average ranks (integers). Counts are exact: they
    never exceed 2**n <= 2**50, within float64's exact-integer range.
    """
    total = int(ranks2.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[:total + 1 - r]
        dist += shifted
    return dist


def wilcoxon_signed_rank(observed: float, baseline,
                         alternative: str = "two-sided") -> StatTestResult:
    """Signed-rank test of the differences baseline_i - observed.

    Zero differences are dropped and ties get average ranks. For n <= 50 the
    p-value is exact, from the full null distribution of the positive rank
    sum (dynamic programming over doubled ranks); beyond that a normal
    approximation with tie correction is used. The reported statistic is
    W = min(W+, W-). ``alternative`` is "two-sided" (default), or "less" /
    "greater" for one-sided tests of the differences' location.
    """
    if alternative not in ("two-sided", "less", "greater"):
        raise GeometryError(f"unknown alternative {alternative!r}")
    d = np.asarray(baseline, dtype=np.float64) - float(observed)
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        return StatTestResult(0.0, 1.0, 0, "exact")
    ranks = average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= EXACT_WILCOXON_MAX_N:
        ranks2 = np.rint(ranks * 2.0).astype(np.int64)
        dist = _signed_rank_counts(ranks2)
        total = 2.0 ** n
        wp2 = int(round(w_plus * 2.0))
        cdf_le = dist[:wp2 + 1].sum() / total
        cdf_ge = dist[wp2:].sum() / total
        if alternative == "two-sided":
            p = min(1.0, 2.0 * min(cdf_le, cdf_ge))
        elif alternative == "less":
            p = cdf_le
        else:
            p = cdf_ge
        return StatTestResult(w, float(p), n, "exact")
    # normal approximation with tie correction
    _, counts = np.unique(np.abs(d), return_counts=True)
    mu = n * (n + 1) / 4.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(counts**3 - counts) / 48.0
    sigma = math.sqrt(sigma2)

    def phi(z):
        return 0.5 * math.erfc(-z / math.sqrt(2.0))

    if alternative == "two-sided":
        z = (w - mu) / sigma
        p = min(1.0, 2.0 * phi(z))
    elif alternative == "less":
        p = phi((w_plus - mu) / sigma)
    else:
        p = phi((w_minus - mu) / sigma)
    return StatTestResult(w, float(p), n, "normal-approx")


# ---------------------------------------------------------------------------
# per-language-pair report


@dataclass(frozen=True)
class BaselineResult:
    values: np.ndarray
    test: StatTestResult


@dataclass(frozen=True)
class AlignabilityReport:
    languages: tuple[str, str]
    concepts: tuple[str, ...]
    rsa_rho: float
    procrustes_ev: float
    baselines: dict  # metric -> kind -> BaselineResult

    def to_json(self) -> str:
        doc = {
            "languages": list(self.languages),
            "concepts": list(self.concepts),
            "rsa_rho": self.rsa_rho,
            "procrustes_ev": self.procrustes_ev,
            "baselines": {
                metric: {
                    kind: {
                        "values": [float(v) for v in res.values],
                        "w": res.test.statistic,
                        "p_value": res.test.p_value,
                        "n_effective": res.test.n_effective,
                        "method": res.test.method,
                    }
                    for kind, res in kinds.items()
                }
                for metric, kinds in self.baselines.items()
            },
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "AlignabilityReport":
        doc = json.loads(text)
        baselines = {
            metric: {
                kind: BaselineResult(
                    np.asarray(res["values"], dtype=np.float64),
                    StatTestResult(res["w"], res["p_value"],
                                   res["n_effective"], res["method"]))
                for kind, res in kinds.items()
            }
            for metric, kinds in doc["baselines"].items()
        }
        return AlignabilityReport(tuple(doc["languages"]),
                                  tuple(doc["concepts"]),
                                  doc["rsa_rho"], doc["procrustes_ev"],
                                  baselines)


def alignability_report(languages, ps1: PrototypeSet, ps2: PrototypeSet,
                        ds2: LabeledDataset, n_trials: int = 100,
                        seed: int = 0) -> AlignabilityReport:
    """Full alignability suite on the shared-concept intersection.

    Both prototype sets are restricted to the concepts they share (each side
    is assumed to be rare-filtered already) and reordered consistently, after
    which RSA, Procrustes, all three baselines for both metrics, and the
    Wilcoxon test per baseline are computed.
    """
    shared = sorted(set(ps1.vocab.names) & set(ps2.vocab.names))
    if len(shared) < 3:
        raise GeometryError(
            f"need at least 3 shared concepts, got {len(shared)}")
    r1 = ps1.restricted_to(shared)
    r2 = ps2.restricted_to(shared)
    rho = rsa(dissimilarity_matrix(r1), dissimilarity_matrix(r2))
    ev = procrustes_alignability(r1.prototypes, r2.prototypes)
    observed = {"rsa": rho, "procrustes": ev}
    baselines: dict = {}
    for mi, metric in enumerate(METRICS):
        baselines[metric] = {}
        for ki, kind in enumerate(BASELINE_KINDS):
            values = baseline_distribution(
                kind, r1, r2, ds2, metric, n_trials=n_trials,
                seed=derive_seed(seed, mi, ki))
            test = wilcoxon_signed_rank(observed[metric], values)
            baselines[metric][kind] = BaselineResult(values, test)
    return AlignabilityReport(tuple(languages), tuple(shared), rho, ev,
                              baselines)
