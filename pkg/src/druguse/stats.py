"""Descriptive and inferential statistics used throughout the pipeline.

Conventions:

* standard deviations and covariances divide by N (population form),
  consistently with every other module;
* confidence intervals are normal-approximation intervals,
  mean +/- 1.96 * sd / sqrt(n);
* the separation score between two groups is
  z = |mean_a - mean_b| / (sd_a + sd_b), reported together with the
  normal upper tail mass P = 100 * Phi(z), interpreted as the percent of
  a balanced mixture correctly split by the best threshold when both
  groups are Gaussian with equal spread;
* mean comparisons use Welch's unequal-variance t-test (this is the one
  place where unbiased variances appear, inside the test statistic);
* information measures use base-2 logarithms of integer count ratios so
  that independent tables give exactly 0 and a self-informative
  attribute gives exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .quantify import norm_cdf

CI_Z = 1.96

__all__ = [
    "Descriptives",
    "describe",
    "pcc",
    "correlation_matrix",
    "entropy",
    "rig",
    "SeparationResult",
    "separation",
    "mean_diff_test",
    "multiple_testing",
    "condition_number",
]


@dataclass
class Descriptives:
    """Sample size, location, spread, and CI endpoints of one column."""

    n: int
    mean: float
    sd: float
    ci_low: float
    ci_high: float


def describe(values) -> Descriptives:
    """Mean, population SD, and 95% normal CI of a sample.

    Raises ValueError for samples with fewer than two observations.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        x = x.ravel()
    n = x.size
    if n < 2:
        raise ValueError("describe needs at least 2 observations, got %d" % n)
    mean = float(x.mean())
    sd = float(np.sqrt(((x - mean) ** 2).mean()))
    half = CI_Z * sd / math.sqrt(n)
    return Descriptives(n=n, mean=mean, sd=sd,
                        ci_low=mean - half, ci_high=mean + half)


def pcc(x, y):
    """Pearson correlation coefficient with a two-sided p-value.

    The p-value comes from the exact null distribution of the t statistic
    t = r * sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of freedom.
    Perfect correlation gives p = 0. Constant inputs raise ValueError.
    """
    a = np.asarray(x, dtype=float).ravel()
    b = np.asarray(y, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError("pcc inputs differ in length")
    n = a.size
    if n < 3:
        raise ValueError("pcc needs at least 3 observations, got %d" % n)
    da = a - a.mean()
    db = b - b.mean()
    va = float((da * da).mean())
    vb = float((db * db).mean())
    if va <= 0.0 or vb <= 0.0:
        raise ValueError("pcc is undefined for a constant input")
    r = float((da * db).mean() / math.sqrt(va * vb))
    r = max(-1.0, min(1.0, r))
    if 1.0 - r * r <= 0.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * float(scipy.stats.t.sf(abs(t), n - 2))
    return r, p


def correlation_matrix(data) -> np.ndarray:
    """Pearson correlation matrix of the columns of ``data``."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("correlation_matrix needs a 2-D sample")
    centered = x - x.mean(axis=0)
    sd = np.sqrt((centered ** 2).mean(axis=0))
    if np.any(sd <= 0.0):
        raise ValueError("constant column at index %d"
                         % int(np.argmin(sd)))
    z = centered / sd
    return (z.T @ z) / x.shape[0]


def entropy(labels) -> float:
    """Shannon entropy (bits) of a label sample."""
    _, counts = np.unique(np.asarray(labels), return_counts=True)
    n = int(counts.sum())
    if n == 0:
        raise ValueError("entropy of an empty sample")
    return float(sum((c / n) * math.log2(n / c) for c in counts))


def rig(y, x) -> float:
    """Relative information gain of ``y`` given ``x``.

    I(X; Y) / H(Y), computed from the contingency table of the two label
    columns. The ratio is clamped into [0, 1]; a constant ``y`` raises
    ValueError since H(Y) = 0 leaves the ratio undefined.
    """
    ya = np.asarray(y)
    xa = np.asarray(x)
    if ya.shape != xa.shape or ya.ndim != 1:
        raise ValueError("rig needs two aligned 1-D label columns")
    _, yi = np.unique(ya, return_inverse=True)
    _, xi = np.unique(xa, return_inverse=True)
    r = int(xi.max()) + 1
    c = int(yi.max()) + 1
    table = np.zeros((r, c), dtype=np.int64)
    np.add.at(table, (xi, yi), 1)
    n = int(table.sum())
    row = table.sum(axis=1)
    col = table.sum(axis=0)

    h = 0.0
    for j in range(c):
        if col[j] > 0:
            h += (col[j] / n) * math.log2(n / col[j])
    if h == 0.0:
        raise ValueError("rig is undefined for a constant target")

    gain = 0.0
    for i in range(r):
        for j in range(c):
            nij = int(table[i, j])
            if nij > 0:
                gain += (nij / n) * math.log2(
                    (nij * n) / (int(row[i]) * int(col[j])))
    return float(max(0.0, min(1.0, gain / h)))


@dataclass
class SeparationResult:
    """Separation score between two samples and its normal tail mass."""

    z: float
    p_percent: float


def separation(a, b) -> SeparationResult:
    """Distribution separation z = |mean_a - mean_b| / (sd_a + sd_b).

    ``p_percent`` is 100 * Phi(z). Raises ValueError when both samples
    have zero spread.
    """
    da = describe(a)
    db = describe(b)
    denom = da.sd + db.sd
    if denom <= 0.0:
        raise ValueError("separation is undefined for two constant samples")
    z = abs(da.mean - db.mean) / denom
    return SeparationResult(z=z, p_percent=100.0 * float(norm_cdf(z)))


def mean_diff_test(a, b) -> float:
    """Two-sided Welch t-test p-value for a difference in means."""
    xa = np.asarray(a, dtype=float).ravel()
    xb = np.asarray(b, dtype=float).ravel()
    na, nb = xa.size, xb.size
    if na < 2 or nb < 2:
        raise ValueError("mean_diff_test needs at least 2 observations per side")
    va = float(xa.var(ddof=1))
    vb = float(xb.var(ddof=1))
    se2 = va / na + vb / nb
    if se2 <= 0.0:
        return 0.0 if xa.mean() != xb.mean() else 1.0
    t = (float(xa.mean()) - float(xb.mean())) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return 2.0 * float(scipy.stats.t.sf(abs(t), df))


def multiple_testing(pvalues, level, method="bonferroni") -> np.ndarray:
    """Boolean significance mask under a multiple-testing correction.

    ``bonferroni`` keeps tests with p * m <= level. ``bh`` applies the
    Benjamini-Hochberg step-up rule at false discovery rate ``level``:
    with order statistics p_(1) <= ... <= p_(m), find the largest k with
    p_(k) <= k * level / m and keep every test at or below p_(k).
    """
    p = np.asarray(pvalues, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("multiple_testing needs a non-empty p-value vector")
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("p-values out of [0, 1]")
    m = p.size
    if method == "bonferroni":
        return p * m <= level
    if method == "bh":
        order = np.argsort(p, kind="stable")
        ranked = p[order]
        thresh = level * np.arange(1, m + 1) / m
        passing = np.nonzero(ranked <= thresh)[0]
        if passing.size == 0:
            return np.zeros(m, dtype=bool)
        cutoff = ranked[passing[-1]]
        return p <= cutoff
    raise ValueError("unknown correction method %r" % (method,))


def condition_number(data, tol=1e-12) -> float:
    """Condition number of the attribute correlation matrix.

    Raises ValueError("singular correlation matrix") when the smallest
    eigenvalue does not exceed ``tol``.
    """
    corr = correlation_matrix(data)
    evals = np.linalg.eigvalsh(corr)
    lo = float(evals[0])
    hi = float(evals[-1])
    if lo <= tol:
        raise ValueError("singular correlation matrix")
    return hi / lo
