"""The statistical toolbox on small worked examples.

Spearman rank correlation with ties, the exact tie-aware Wilcoxon
signed-rank test, and Procrustes explained variance between point
configurations.
"""

import numpy as np

from protoalign import geometry

# Spearman: monotone agreement, reversal, and ties
print("spearman([1,2,3], [10,20,30]) =",
      geometry.spearman([1, 2, 3], [10, 20, 30]))
print("spearman([1,2,3], [3,2,1])   =",
      geometry.spearman([1, 2, 3], [3, 2, 1]))
print("spearman([1,2,2,4], [1,3,2,4]) =",
      f"{geometry.spearman([1, 2, 2, 4], [1, 3, 2, 4]):.4f}")

# Wilcoxon: 43 same-sign differences give the smallest possible exact
# two-sided p at that sample size, 2 * 2**-43
result = geometry.wilcoxon_signed_rank(0.0, np.linspace(0.1, 0.9, 43))
print(f"\nwilcoxon, n=43 same-sign: W={result.statistic} "
      f"p={result.p_value:.3e} ({result.method})")

result = geometry.wilcoxon_signed_rank(0.0, [1.0, -1.0, 2.0, -2.0])
print(f"wilcoxon, symmetric diffs: p={result.p_value}")

# Procrustes: rotations and scalings are free, real shape change is not
rng = np.random.default_rng(0)
points = rng.normal(size=(8, 3))
rotation, _ = np.linalg.qr(rng.normal(size=(3, 3)))
print(f"\nprocrustes ev, rotated copy:  "
      f"{geometry.procrustes_alignability(points, points @ rotation):.6f}")
print(f"procrustes ev, scaled copy:   "
      f"{geometry.procrustes_alignability(points, 3.0 * points):.6f}")
noisy = points + 0.4 * rng.normal(size=points.shape)
print(f"procrustes ev, noisy copy:    "
      f"{geometry.procrustes_alignability(points, noisy):.6f}")
