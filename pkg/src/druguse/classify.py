"""Binary classifiers for user/non-user prediction.

Every fitter takes a feature matrix ``x`` of shape (n, p) and a boolean
target ``y`` (True marks a user) and returns a model object with a
``predict(x) -> bool array`` method; probabilistic models also expose
``posterior(x)``, the user-class probability. The decision rule is
"user iff posterior > 0.5" everywhere, so exact ties resolve to
non-user. The one exception is the linear discriminant, whose cut point
is placed where training sensitivity and specificity balance.

Families:

* one-attribute threshold rules (:func:`one_feature_classifier`) and
  ROC summaries (:func:`roc`);
* Fisher's linear discriminant (:func:`fit_lda`);
* logistic regression with inverse-class-fraction weights fitted by
  damped Newton iterations (:func:`fit_logreg`);
* kernel-weighted k-nearest-neighbour variants, including local Fisher
  re-ranking and a Mahalanobis-whitened form (:func:`knn_predict`);
* decision trees over entropy / Gini / DKM impurities with optional
  oblique Fisher-direction splits (:func:`fit_tree`), and bagged forests
  of such trees (:func:`fit_forest`);
* a two-Gaussian generative model with an adjustable user-prior
  multiplier (:func:`fit_gaussian_mixture`);
* kernel density estimates with per-point adaptive radius
  (:func:`fit_pdfe`);
* naive Bayes with automatic categorical/Gaussian column handling
  (:func:`fit_naive_bayes`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammainc

log = logging.getLogger(__name__)

EPS_GAIN = 1e-12
RIDGE_SCALE = 1e-8

__all__ = [
    "OneFeatureResult",
    "one_feature_classifier",
    "RocCurve",
    "roc",
    "LinearDiscriminantModel",
    "fit_lda",
    "LogisticRegressionModel",
    "fit_logreg",
    "KnnConfig",
    "KnnModel",
    "fit_knn",
    "knn_predict",
    "kernel_function",
    "kernel_normalizer",
    "KERNELS",
    "TreeNode",
    "DecisionTreeModel",
    "fit_tree",
    "split_gain",
    "tree_signature",
    "IMPURITIES",
    "RandomForestModel",
    "fit_forest",
    "GaussianPairModel",
    "fit_gaussian_mixture",
    "PdfeModel",
    "fit_pdfe",
    "NaiveBayesModel",
    "fit_naive_bayes",
]


# ---------------------------------------------------------------------------
# shared helpers


def _as_xy(x, y):
    xa = np.asarray(x, dtype=float)
    if xa.ndim == 1:
        xa = xa.reshape(-1, 1)
    ya = np.asarray(y, dtype=bool).ravel()
    if xa.shape[0] != ya.size:
        raise ValueError("feature matrix and target disagree on rows")
    if xa.shape[0] == 0:
        raise ValueError("empty training set")
    if ya.all() or not ya.any():
        raise ValueError("training data contains a single class")
    return xa, ya


def _class_cov(rows: np.ndarray) -> np.ndarray:
    centered = rows - rows.mean(axis=0)
    return (centered.T @ centered) / rows.shape[0]


def _solve_with_ridge(matrix: np.ndarray, rhs: np.ndarray, context: str):
    """Solve a symmetric system, retrying once with a small ridge."""
    try:
        sol = np.linalg.solve(matrix, rhs)
        if np.all(np.isfinite(sol)):
            return sol
    except np.linalg.LinAlgError:
        pass
    dim = matrix.shape[0]
    ridge = RIDGE_SCALE * max(float(np.trace(matrix)), 1.0) / dim
    log.warning("%s: singular matrix, retrying with ridge %.3g", context, ridge)
    try:
        sol = np.linalg.solve(matrix + ridge * np.eye(dim), rhs)
    except np.linalg.LinAlgError:
        raise ValueError("%s: matrix is singular even after ridge" % context)
    if not np.all(np.isfinite(sol)):
        raise ValueError("%s: matrix is singular even after ridge" % context)
    return sol


# ---------------------------------------------------------------------------
# one-attribute threshold rules and ROC


@dataclass
class OneFeatureResult:
    """Best single-attribute threshold rule.

    ``threshold`` is reported in the "score <= threshold" convention: it
    is the largest observed value on the lower side of the cut, so for
    integer-valued attributes it is an integer. ``user_side`` says which
    side of the cut is classified as a user. ``midpoint`` keeps the raw
    separating value halfway between the neighbouring observations.
    """

    threshold: float
    midpoint: float
    user_side: str
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def sn(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fn)

    @property
    def sp(self) -> float:
        return 100.0 * self.tn / (self.tn + self.fp)

    def predict(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=float)
        if self.user_side == "greater":
            return s > self.threshold
        return s <= self.threshold


def one_feature_classifier(scores, labels) -> OneFeatureResult:
    """Scan all threshold rules on one attribute.

    Every midpoint between consecutive distinct observed values is tried
    in both orientations; the winner maximizes min(Sn, Sp), with ties
    broken by larger Sn + Sp, then by the lower cut, with the
    "user above threshold" orientation preferred last.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if s.size != y.size:
        raise ValueError("scores and labels disagree on length")
    n_user = int(y.sum())
    n_non = int(y.size - n_user)
    if n_user == 0 or n_non == 0:
        raise ValueError("training data contains a single class")

    order = np.argsort(s, kind="stable")
    ss = s[order]
    ys = y[order]
    distinct = np.nonzero(np.diff(ss) > 0)[0]
    if distinct.size == 0:
        raise ValueError("attribute is constant, no threshold separates it")

    cum_user = np.cumsum(ys)
    # users at or below each candidate cut (cut sits after index i)
    below_user = cum_user[distinct]
    below_total = distinct + 1
    below_non = below_total - below_user

    best = None
    for side in ("greater", "less"):
        if side == "greater":
            tp = n_user - below_user
            fn = below_user
            tn = below_non
            fp = n_non - below_non
        else:
            tp = below_user
            fn = n_user - below_user
            tn = n_non - below_non
            fp = below_non
        sn = tp / n_user
        sp = tn / n_non
        lo = np.minimum(sn, sp)
        hi = sn + sp
        for pos in range(distinct.size):
            i = distinct[pos]
            key = (lo[pos], hi[pos], -ss[i], side == "greater")
            if best is None or key > best[0]:
                best = (key, i, side,
                        int(tp[pos]), int(tn[pos]), int(fp[pos]), int(fn[pos]))

    _, i, side, tp, tn, fp, fn = best
    return OneFeatureResult(
        threshold=float(ss[i]),
        midpoint=float((ss[i] + ss[i + 1]) / 2.0),
        user_side=side,
        tp=tp, tn=tn, fp=fp, fn=fn)


@dataclass
class RocCurve:
    """ROC sweep of a score column against boolean labels."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def gini(self) -> float:
        return 2.0 * self.auc - 1.0


def roc(scores, labels) -> RocCurve:
    """ROC curve for the rule "user iff score > threshold".

    Thresholds sweep from above the maximum score down to below the
    minimum, so the curve runs from (0, 0) to (1, 1); the area under it
    is the trapezoid integral.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if s.size != y.size or s.size == 0:
        raise ValueError("scores and labels disagree on length")
    n_user = int(y.sum())
    n_non = int(y.size - n_user)
    if n_user == 0 or n_non == 0:
        raise ValueError("roc needs both classes")

    order = np.argsort(-s, kind="stable")
    ys = y[order]
    sd = s[order]
    tp = np.cumsum(ys)
    fp = np.cumsum(~ys)
    # keep only the last point of each tied-score block
    keep = np.nonzero(np.diff(sd) < 0)[0]
    tpr = np.concatenate(([0.0], tp[keep] / n_user, [1.0]))
    fpr = np.concatenate(([0.0], fp[keep] / n_non, [1.0]))
    thresholds = np.concatenate(([math.inf], sd[keep], [-math.inf]))
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


# ---------------------------------------------------------------------------
# linear discriminant


@dataclass
class LinearDiscriminantModel:
    """Linear rule: user iff weights . x > threshold."""

    weights: np.ndarray
    threshold: float

    def decision_value(self, x) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        return xa @ self.weights - self.threshold

    def predict(self, x) -> np.ndarray:
        return self.decision_value(x) > 0.0

    def normalized(self) -> "LinearDiscriminantModel":
        """Rescale so the weight vector has unit Euclidean norm."""
        scale = float(np.linalg.norm(self.weights))
        if scale == 0.0:
            raise ValueError("cannot normalize a zero weight vector")
        return LinearDiscriminantModel(weights=self.weights / scale,
                                       threshold=self.threshold / scale)


def fit_lda(x, y) -> LinearDiscriminantModel:
    """Fisher's linear discriminant with a balanced cut point.

    The direction is (S_user + S_non)^-1 (mean_user - mean_non) with
    population class covariances; the threshold is then chosen among
    midpoints of the projected training scores to make sensitivity and
    specificity as equal as possible (ties prefer the larger of the two,
    then the lower cut).
    """
    xa, ya = _as_xy(x, y)
    users = xa[ya]
    nons = xa[~ya]
    delta = users.mean(axis=0) - nons.mean(axis=0)
    if float(np.abs(delta).max()) == 0.0:
        raise ValueError("degenerate discriminant: the class means coincide")
    pooled = _class_cov(users) + _class_cov(nons)
    w = _solve_with_ridge(pooled, delta, "linear discriminant")

    proj = xa @ w
    order = np.argsort(proj, kind="stable")
    ps = proj[order]
    ys = ya[order]
    n_user = int(ya.sum())
    n_non = ya.size - n_user

    cum_user = np.cumsum(ys)
    distinct = np.nonzero(np.diff(ps) > 0)[0]
    candidates = np.concatenate(
        ([ps[0] - 1.0], (ps[distinct] + ps[distinct + 1]) / 2.0))
    below_user = np.concatenate(([0], cum_user[distinct]))
    below_total = np.concatenate(([0], distinct + 1))

    sn = (n_user - below_user) / n_user
    sp = (below_total - below_user) / n_non
    # lexicographic max of (-|sn-sp|, min(sn, sp), -theta); candidates are
    # strictly increasing, so the winner is unique
    order = np.lexsort((-candidates, np.minimum(sn, sp), -np.abs(sn - sp)))
    return LinearDiscriminantModel(weights=w,
                                   threshold=float(candidates[order[-1]]))


# ---------------------------------------------------------------------------
# logistic regression


@dataclass
class LogisticRegressionModel:
    """Log-odds-linear model: log(P_user / P_non) = weights . x + bias."""

    weights: np.ndarray
    bias: float
    converged: bool
    iterations: int

    def log_odds(self, x) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        return xa @ self.weights + self.bias

    def posterior(self, x) -> np.ndarray:
        lo = self.log_odds(x)
        out = np.empty_like(lo)
        pos = lo >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-lo[pos]))
        ez = np.exp(lo[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def predict(self, x) -> np.ndarray:
        return self.posterior(x) > 0.5


def _logreg_loglik(theta, xb, ya, v):
    lo = xb @ theta
    # log(1 + exp(lo)) evaluated stably on both tails
    soft = np.where(lo > 0, lo + np.log1p(np.exp(-np.abs(lo))),
                    np.log1p(np.exp(-np.abs(lo))))
    return float(np.sum(v * (np.where(ya, lo, 0.0) - soft)))


def fit_logreg(x, y, balanced=True, max_iter=200, tol=1e-8) -> LogisticRegressionModel:
    """Weighted logistic regression by damped Newton iterations.

    With ``balanced`` each example carries weight N / n_class, so both
    classes contribute equally to the likelihood. Iterations stop when
    the gradient norm falls below ``tol``; failure to converge within
    ``max_iter`` steps raises ValueError reporting the final gradient
    norm.
    """
    xa, ya = _as_xy(x, y)
    n, p = xa.shape
    xb = np.hstack([xa, np.ones((n, 1))])
    if balanced:
        n_user = int(ya.sum())
        v = np.where(ya, n / n_user, n / (n - n_user)).astype(float)
    else:
        v = np.ones(n)

    theta = np.zeros(p + 1)
    loglik = _logreg_loglik(theta, xb, ya, v)
    grad_norm = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lo = xb @ theta
        prob = np.where(lo >= 0, 1.0 / (1.0 + np.exp(-np.clip(lo, 0, None))),
                        np.exp(np.clip(lo, None, 0)) /
                        (1.0 + np.exp(np.clip(lo, None, 0))))
        grad = xb.T @ (v * (ya - prob))
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < tol:
            converged = True
            break
        curv = v * prob * (1.0 - prob)
        hess = xb.T @ (xb * curv[:, None])
        hess += (RIDGE_SCALE * max(float(np.trace(hess)), 1.0) /
                 hess.shape[0]) * np.eye(p + 1)
        step = np.linalg.solve(hess, grad)
        # damping: halve the step until the likelihood stops decreasing
        t = 1.0
        for _ in range(40):
            cand = theta + t * step
            cand_ll = _logreg_loglik(cand, xb, ya, v)
            if math.isfinite(cand_ll) and cand_ll >= loglik - 1e-12:
                break
            t /= 2.0
        theta = theta + t * step
        loglik = _logreg_loglik(theta, xb, ya, v)
        if not math.isfinite(loglik):
            raise ValueError(
                "logistic regression diverged; gradient norm %.3g" % grad_norm)
    if not converged:
        raise ValueError(
            "logistic regression did not converge in %d iterations; "
            "gradient norm %.3g" % (max_iter, grad_norm))
    return LogisticRegressionModel(weights=theta[:p], bias=float(theta[p]),
                                   converged=converged, iterations=it)


# ---------------------------------------------------------------------------
# kernels


def _epanechnikov(u):
    return 0.75 * (1.0 - u * u)


def _uniform(u):
    return np.full_like(np.asarray(u, dtype=float), 0.5)


def _triangular(u):
    return 1.0 - u


def _gaussian(u):
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


KERNELS = {
    "epanechnikov": _epanechnikov,
    "uniform": _uniform,
    "triangular": _triangular,
    "gaussian": _gaussian,
}


def kernel_function(name: str):
    """Look up a kernel profile K(u) defined on u in [0, 1]."""
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError("unknown kernel %r; choose from %s"
                         % (name, sorted(KERNELS)))


def _radial_moment(name: str, dim: int) -> float:
    """integral_0^1 K(r) r^(dim-1) dr for each kernel profile."""
    d = dim
    if name == "epanechnikov":
        return 1.5 / (d * (d + 2))
    if name == "uniform":
        return 0.5 / d
    if name == "triangular":
        return 1.0 / (d * (d + 1))
    if name == "gaussian":
        half = d / 2.0
        return (2.0 ** (half - 1.0) * math.gamma(half) *
                float(gammainc(half, 0.5)) / math.sqrt(2.0 * math.pi))
    raise ValueError("unknown kernel %r" % (name,))


def kernel_normalizer(name: str, dim: int) -> float:
    """Mass of K(||v||) over the unit ball in ``dim`` dimensions.

    Dividing kernel sums by this constant (and by radius^dim) turns them
    into density estimates that integrate to one.
    """
    if dim < 1:
        raise ValueError("dimension must be positive")
    surface = 2.0 * math.pi ** (dim / 2.0) / math.gamma(dim / 2.0)
    return surface * _radial_moment(name, dim)


# ---------------------------------------------------------------------------
# k nearest neighbours


@dataclass(frozen=True)
class KnnConfig:
    """Configuration of the kernel-weighted nearest-neighbour rule.

    ``variant`` selects the distance used to pick and weight the final
    ``k`` neighbours: "euclidean" plain distances, "fisher" re-ranks the
    ``k_fisher`` euclidean neighbours along a locally fitted discriminant
    direction, "adaptive" whitens the space by the pooled within-class
    covariance first. ``user_weight`` multiplies user contributions to
    the membership sums.
    """

    k: int = 5
    k_fisher: int | None = None
    variant: str = "euclidean"
    kernel: str = "epanechnikov"
    user_weight: float = 1.0

    def __post_init__(self):
        if not 1 <= self.k <= 30:
            raise ValueError("k out of range [1, 30]: %r" % (self.k,))
        if self.k_fisher is not None and self.k_fisher < self.k:
            raise ValueError("k_fisher must be at least k")
        if self.variant not in ("euclidean", "fisher", "adaptive"):
            raise ValueError("unknown variant %r" % (self.variant,))
        if self.kernel not in KERNELS:
            raise ValueError("unknown kernel %r" % (self.kernel,))
        if not 0.01 <= self.user_weight <= 5.0:
            raise ValueError("user_weight out of range [0.01, 5.0]: %r"
                             % (self.user_weight,))


@dataclass
class KnnModel:
    """Training set plus configuration; prediction is deferred."""

    train_x: np.ndarray
    train_y: np.ndarray
    config: KnnConfig
    whiten: np.ndarray | None = None

    def posterior(self, x) -> np.ndarray:
        _, risk = _knn_run(self, np.atleast_2d(np.asarray(x, dtype=float)))
        return risk

    def predict(self, x) -> np.ndarray:
        pred, _ = _knn_run(self, np.atleast_2d(np.asarray(x, dtype=float)))
        return pred


def fit_knn(x, y, config: KnnConfig | None = None) -> KnnModel:
    xa, ya = _as_xy(x, y)
    cfg = config or KnnConfig()
    if cfg.k > xa.shape[0] - 1:
        raise ValueError("k=%d exceeds the number of available neighbours"
                         % cfg.k)
    whiten = None
    if cfg.variant == "adaptive":
        users = xa[ya]
        nons = xa[~ya]
        pooled = (users.shape[0] * _class_cov(users) +
                  nons.shape[0] * _class_cov(nons)) / xa.shape[0]
        evals, evecs = np.linalg.eigh(pooled)
        floor = RIDGE_SCALE * max(float(evals[-1]), 1.0)
        evals = np.maximum(evals, floor)
        whiten = evecs @ np.diag(1.0 / np.sqrt(evals)) @ evecs.T
    return KnnModel(train_x=xa, train_y=ya, config=cfg, whiten=whiten)


def knn_predict(train_x, train_y, test_x, config: KnnConfig | None = None):
    """Classify ``test_x`` by kernel-weighted nearest neighbours.

    Returns ``(labels, risk)`` where ``risk`` is the user membership
    share. Membership of each class is the kernel-weighted sum over the
    selected neighbours, with distances rescaled by the distance to the
    farthest selected neighbour; user contributions are multiplied by
    ``config.user_weight``. Zero total membership falls back to a
    weighted majority vote; exact ties go to non-user.
    """
    model = fit_knn(train_x, train_y, config)
    return _knn_run(model, np.atleast_2d(np.asarray(test_x, dtype=float)))


def _knn_memberships(dists, neigh_y, kernel, user_weight, diameter):
    """Kernel-weighted class memberships of one neighbourhood."""
    d = float(dists.max())
    if d <= 0.0:
        d = max(1e-9 * diameter, 1e-300)
    weights = kernel(np.minimum(dists / d, 1.0))
    m_user = float(weights[neigh_y].sum()) * user_weight
    m_non = float(weights[~neigh_y].sum())
    return m_user, m_non


def _knn_run(model: KnnModel, test: np.ndarray):
    cfg = model.config
    xa, ya = model.train_x, model.train_y
    kern = kernel_function(cfg.kernel)
    if model.whiten is not None:
        xa = xa @ model.whiten
        test = test @ model.whiten
    spread = xa.max(axis=0) - xa.min(axis=0)
    diameter = float(np.linalg.norm(spread))

    dmat = cdist(test, xa)
    n_test = test.shape[0]
    risk = np.empty(n_test)
    pred = np.empty(n_test, dtype=bool)
    k = cfg.k
    k_f = cfg.k_fisher or k
    local_fisher = cfg.variant == "fisher" and k_f > k

    for i in range(n_test):
        order = np.argsort(dmat[i], kind="stable")
        if local_fisher:
            pool = order[:k_f]
            pool_y = ya[pool]
            if pool_y.any() and not pool_y.all():
                pts = xa[pool]
                cov = _class_cov(pts)
                delta = pts[pool_y].mean(axis=0) - pts[~pool_y].mean(axis=0)
                try:
                    direction = _solve_with_ridge(cov, delta, "local discriminant")
                except ValueError:
                    direction = None
            else:
                direction = None
            if direction is not None:
                along = np.abs((pts - test[i]) @ direction)
                sub = np.argsort(along, kind="stable")[:k]
                sel = pool[sub]
                dists = along[sub]
            else:
                sel = order[:k]
                dists = dmat[i, sel]
        else:
            sel = order[:k]
            dists = dmat[i, sel]

        m_user, m_non = _knn_memberships(dists, ya[sel], kern,
                                         cfg.user_weight, diameter)
        total = m_user + m_non
        if total <= 0.0:
            m_user = float(ya[sel].sum()) * cfg.user_weight
            m_non = float((~ya[sel]).sum())
            total = m_user + m_non
        risk[i] = m_user / total
        pred[i] = risk[i] > 0.5
    return pred, risk


# ---------------------------------------------------------------------------
# decision trees


def _impurity_entropy(f: np.ndarray) -> float:
    out = 0.0
    for v in f:
        if v > 0.0:
            out -= v * math.log2(v)
    return out


def _impurity_gini(f: np.ndarray) -> float:
    return 1.0 - float((f * f).sum())


def _impurity_dkm(f: np.ndarray) -> float:
    return 2.0 * math.sqrt(float(f[0]) * float(f[1]))


IMPURITIES = {
    "entropy": _impurity_entropy,
    "gini": _impurity_gini,
    "dkm": _impurity_dkm,
}


def _impurity_vec(base: str, w_non: np.ndarray, w_user: np.ndarray):
    """Vectorized impurity over arrays of weighted class masses."""
    total = w_non + w_user
    f1 = np.divide(w_non, total, out=np.zeros_like(total), where=total > 0)
    f2 = np.divide(w_user, total, out=np.zeros_like(total), where=total > 0)
    if base == "gini":
        return 1.0 - f1 * f1 - f2 * f2
    if base == "dkm":
        return 2.0 * np.sqrt(f1 * f2)
    if base == "entropy":
        out = np.zeros_like(f1)
        m1 = f1 > 0
        m2 = f2 > 0
        out[m1] -= f1[m1] * np.log2(f1[m1])
        out[m2] -= f2[m2] * np.log2(f2[m2])
        return out
    raise ValueError("unknown impurity %r; choose from %s"
                     % (base, sorted(IMPURITIES)))


def split_gain(children_labels, base="gini", user_weight=1.0) -> float:
    """Impurity gain of splitting the pooled parent into the given children.

    ``children_labels`` is a sequence of boolean label arrays; the parent
    is their concatenation. Class weights (1 for non-users,
    ``user_weight`` for users) multiply the class frequencies, and child
    nodes are weighted by their share of the weighted parent mass.
    """
    if base not in IMPURITIES:
        raise ValueError("unknown impurity %r; choose from %s"
                         % (base, sorted(IMPURITIES)))
    imp = IMPURITIES[base]

    def node(labels):
        yb = np.asarray(labels, dtype=bool)
        w_user = user_weight * float(yb.sum())
        w_non = float((~yb).sum())
        mass = w_user + w_non
        if mass == 0.0:
            return 0.0, 0.0
        return mass, imp(np.array([w_non / mass, w_user / mass]))

    parent = np.concatenate([np.asarray(c, dtype=bool) for c in children_labels])
    parent_mass, parent_imp = node(parent)
    if parent_mass == 0.0:
        raise ValueError("split_gain on an empty parent")
    child_term = 0.0
    for child in children_labels:
        mass, impurity = node(child)
        child_term += (mass / parent_mass) * impurity
    return parent_imp - child_term


@dataclass
class TreeNode:
    """One node of a decision tree; leaves have no children.

    Internal nodes test either one attribute (``feature``) or a linear
    score (``direction``); values at or below ``threshold`` go left.
    """

    label: bool
    n_non: int
    n_user: int
    feature: int | None = None
    direction: np.ndarray | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class DecisionTreeModel:
    """Fitted tree plus the settings it was grown with."""

    root: TreeNode
    base: str
    min_leaf: int
    user_weight: float

    def predict(self, x) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty(xa.shape[0], dtype=bool)
        for i, row in enumerate(xa):
            node = self.root
            while not node.is_leaf:
                if node.feature is not None:
                    value = row[node.feature]
                else:
                    value = float(row @ node.direction)
                node = node.left if value <= node.threshold else node.right
            out[i] = node.label
        return out

    def leaf_count(self) -> int:
        def walk(node):
            if node.is_leaf:
                return 1
            return walk(node.left) + walk(node.right)
        return walk(self.root)


def _node_label(n_non: int, n_user: int, user_weight: float) -> bool:
    return user_weight * n_user > n_non


def _best_axis_split(xa, ya, feats, base, min_leaf, user_weight):
    """Best single-attribute split: (gain, feature, threshold) or None."""
    n = ya.size
    total_user = user_weight * float(ya.sum())
    total_non = float(n - ya.sum())
    total_mass = total_user + total_non
    best = None
    for j in feats:
        col = xa[:, j]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        ys = ya[order]
        cuts = np.nonzero(np.diff(cs) > 0)[0]
        if cuts.size == 0:
            continue
        left_n = cuts + 1
        raw_ok = (left_n >= min_leaf) & (n - left_n >= min_leaf)
        cuts = cuts[raw_ok]
        if cuts.size == 0:
            continue
        cum_user = np.cumsum(ys)
        lu = user_weight * cum_user[cuts]
        ln = (cuts + 1.0) - cum_user[cuts]
        ru = total_user - lu
        rn = total_non - ln
        left_mass = lu + ln
        right_mass = ru + rn
        child = (left_mass * _impurity_vec(base, ln, lu) +
                 right_mass * _impurity_vec(base, rn, ru)) / total_mass
        gains = -child  # parent impurity is constant per node
        pos = int(np.argmax(gains))
        cand_gain = float(gains[pos])
        threshold = float((cs[cuts[pos]] + cs[cuts[pos] + 1]) / 2.0)
        key = (cand_gain, -j, -threshold)
        if best is None or key > best[0]:
            best = (key, float(cand_gain), int(j), threshold)
    if best is None:
        return None
    _, gain_rel, j, threshold = best
    parent_f = np.array([total_non / total_mass, total_user / total_mass])
    gain = IMPURITIES[base](parent_f) + gain_rel
    return gain, j, threshold


def _best_fisher_split(xa, ya, base, min_leaf, user_weight):
    """Best split along the node's local discriminant direction."""
    if not ya.any() or ya.all():
        return None
    users = xa[ya]
    nons = xa[~ya]
    delta = users.mean(axis=0) - nons.mean(axis=0)
    if float(np.abs(delta).max()) == 0.0:
        return None
    pooled = _class_cov(users) + _class_cov(nons)
    try:
        direction = _solve_with_ridge(pooled, delta, "tree discriminant")
    except ValueError:
        return None
    proj = xa @ direction
    res = _best_axis_split(proj.reshape(-1, 1), ya, [0], base,
                           min_leaf, user_weight)
    if res is None:
        return None
    gain, _, threshold = res
    return gain, direction, threshold


def _grow_tree(xa, ya, depth, *, base, min_leaf, user_weight, max_depth,
               fisher_splits, rng, n_candidate_features):
    n_user = int(ya.sum())
    n_non = int(ya.size - n_user)
    label = _node_label(n_non, n_user, user_weight)
    node = TreeNode(label=label, n_non=n_non, n_user=n_user)
    if (n_user == 0 or n_non == 0 or ya.size < 2 * min_leaf or
            (max_depth is not None and depth >= max_depth)):
        return node

    p = xa.shape[1]
    if n_candidate_features is not None and n_candidate_features < p:
        feats = np.sort(rng.choice(p, size=n_candidate_features,
                                   replace=False))
    else:
        feats = np.arange(p)

    axis = _best_axis_split(xa, ya, feats, base, min_leaf, user_weight)
    choice = None
    if axis is not None and axis[0] > EPS_GAIN:
        choice = ("axis", axis[0], axis[1], axis[2])
    if fisher_splits:
        oblique = _best_fisher_split(xa, ya, base, min_leaf, user_weight)
        if oblique is not None and oblique[0] > EPS_GAIN:
            if choice is None or oblique[0] > choice[1] + EPS_GAIN:
                choice = ("fisher", oblique[0], oblique[1], oblique[2])
    if choice is None:
        return node

    kind, _, what, threshold = choice
    if kind == "axis":
        node.feature = what
        values = xa[:, what]
    else:
        node.direction = what
        values = xa @ what
    node.threshold = threshold
    mask = values <= threshold
    common = dict(base=base, min_leaf=min_leaf, user_weight=user_weight,
                  max_depth=max_depth, fisher_splits=fisher_splits, rng=rng,
                  n_candidate_features=n_candidate_features)
    node.left = _grow_tree(xa[mask], ya[mask], depth + 1, **common)
    node.right = _grow_tree(xa[~mask], ya[~mask], depth + 1, **common)
    return node


def fit_tree(x, y, *, base="gini", min_leaf=3, user_weight=1.0,
             max_depth=None, fisher_splits=False, rng=None,
             n_candidate_features=None) -> DecisionTreeModel:
    """Grow a binary decision tree by greedy impurity-gain splits.

    Split candidates are midpoints between consecutive distinct values
    of each attribute (plus, with ``fisher_splits``, cuts along the
    node's local discriminant direction, used only when strictly better
    than every attribute cut). Gains weight class frequencies by
    (1, ``user_weight``); ``min_leaf`` bounds raw, unweighted child
    sizes. Ties prefer the lowest attribute index, then the lowest
    threshold. Leaves predict the weighted majority, ties to non-user.
    """
    xa, ya = _as_xy(x, y)
    if base not in IMPURITIES:
        raise ValueError("unknown impurity %r; choose from %s"
                         % (base, sorted(IMPURITIES)))
    if min_leaf < 1:
        raise ValueError("min_leaf must be positive")
    if n_candidate_features is not None and rng is None:
        rng = np.random.default_rng(0)
    root = _grow_tree(xa, ya, 0, base=base, min_leaf=min_leaf,
                      user_weight=user_weight, max_depth=max_depth,
                      fisher_splits=fisher_splits, rng=rng,
                      n_candidate_features=n_candidate_features)
    return DecisionTreeModel(root=root, base=base, min_leaf=min_leaf,
                             user_weight=user_weight)


def tree_signature(model: DecisionTreeModel):
    """Hashable structural summary used to compare tree shapes."""
    def walk(node):
        if node.is_leaf:
            return ("leaf", bool(node.label))
        if node.feature is not None:
            head = ("attr", int(node.feature), round(float(node.threshold), 9))
        else:
            head = ("dir", tuple(round(float(v), 9) for v in node.direction),
                    round(float(node.threshold), 9))
        return (head, walk(node.left), walk(node.right))
    return walk(model.root)


@dataclass
class RandomForestModel:
    """Bagged decision trees with per-node attribute subsampling."""

    trees: list
    seed: int

    def vote_fractions(self, x) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        votes = np.zeros(xa.shape[0])
        for tree in self.trees:
            votes += tree.predict(xa)
        frac_user = votes / len(self.trees)
        return np.column_stack([1.0 - frac_user, frac_user])

    def posterior(self, x) -> np.ndarray:
        return self.vote_fractions(x)[:, 1]

    def predict(self, x) -> np.ndarray:
        return self.posterior(x) > 0.5


def fit_forest(x, y, n_trees=100, *, seed=0, base="gini", min_leaf=3,
               user_weight=1.0, max_depth=None, bootstrap=True,
               n_candidate_features="sqrt") -> RandomForestModel:
    """Fit a forest of trees on bootstrap resamples.

    Tree randomness derives from spawns of a single 64-bit seed, so the
    forest is reproducible. ``n_candidate_features`` may be an integer,
    "sqrt", or None (all attributes). Prediction averages unit votes;
    the tie at exactly half the votes goes to non-user.
    """
    xa, ya = _as_xy(x, y)
    if n_trees < 1:
        raise ValueError("n_trees must be positive")
    p = xa.shape[1]
    if n_candidate_features == "sqrt":
        m = max(1, int(round(math.sqrt(p))))
    else:
        m = n_candidate_features
    if m is not None and not 1 <= m <= p:
        raise ValueError("n_candidate_features out of range: %r" % (m,))

    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        if bootstrap:
            rows = rng.integers(0, xa.shape[0], xa.shape[0])
            bx, by = xa[rows], ya[rows]
            if by.all() or not by.any():
                # degenerate resample: fall back to the full sample
                bx, by = xa, ya
        else:
            bx, by = xa, ya
        trees.append(fit_tree(bx, by, base=base, min_leaf=min_leaf,
                              user_weight=user_weight, max_depth=max_depth,
                              rng=rng, n_candidate_features=m))
    return RandomForestModel(trees=trees, seed=seed)


# ---------------------------------------------------------------------------
# Gaussian pair model


@dataclass
class GaussianPairModel:
    """One Gaussian per class with proportional (adjustable) priors."""

    mean_user: np.ndarray
    mean_non: np.ndarray
    cov_user: np.ndarray
    cov_non: np.ndarray
    n_user: int
    n_non: int
    prior_multiplier: float
    _chol_user: np.ndarray = field(repr=False, default=None)
    _chol_non: np.ndarray = field(repr=False, default=None)

    def _log_density(self, x, mean, chol):
        diff = x - mean
        z = np.linalg.solve(chol, diff.T).T
        quad = (z * z).sum(axis=1)
        logdet = 2.0 * float(np.log(np.diag(chol)).sum())
        dim = mean.size
        return -0.5 * (dim * math.log(2.0 * math.pi) + logdet + quad)

    def log_odds(self, x) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        lu = self._log_density(xa, self.mean_user, self._chol_user)
        ln = self._log_density(xa, self.mean_non, self._chol_non)
        return math.log(self.n_user / self.n_non) + lu - ln

    def posterior(self, x) -> np.ndarray:
        # sigmoid of the shifted log odds, evaluated without overflow
        t = self.log_odds(x) + math.log(self.prior_multiplier)
        out = np.empty_like(t)
        pos = t >= 0.0
        out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
        e = np.exp(t[~pos])
        out[~pos] = e / (1.0 + e)
        return out

    def predict(self, x) -> np.ndarray:
        return self.posterior(x) > 0.5


def _class_gaussian(rows: np.ndarray, name: str):
    if rows.shape[0] < 2:
        raise ValueError("the %s class has fewer than 2 rows" % name)
    mean = rows.mean(axis=0)
    cov = _class_cov(rows)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        dim = cov.shape[0]
        ridge = RIDGE_SCALE * max(float(np.trace(cov)), 1.0) / dim
        log.warning("gaussian model: %s covariance singular, ridge %.3g",
                    name, ridge)
        try:
            chol = np.linalg.cholesky(cov + ridge * np.eye(dim))
        except np.linalg.LinAlgError:
            raise ValueError("covariance of the %s class is singular" % name)
    return mean, cov, chol


def fit_gaussian_mixture(x, y, prior_multiplier=1.0) -> GaussianPairModel:
    """Fit one Gaussian per class; classify by posterior odds.

    Priors are the class proportions, with the user prior additionally
    multiplied by ``prior_multiplier`` (so a multiplier of 2 exactly
    doubles the posterior odds everywhere).
    """
    xa, ya = _as_xy(x, y)
    if prior_multiplier <= 0.0:
        raise ValueError("prior_multiplier must be positive")
    mean_u, cov_u, chol_u = _class_gaussian(xa[ya], "user")
    mean_n, cov_n, chol_n = _class_gaussian(xa[~ya], "non-user")
    return GaussianPairModel(
        mean_user=mean_u, mean_non=mean_n, cov_user=cov_u, cov_non=cov_n,
        n_user=int(ya.sum()), n_non=int((~ya).sum()),
        prior_multiplier=float(prior_multiplier),
        _chol_user=chol_u, _chol_non=chol_n)


# ---------------------------------------------------------------------------
# adaptive kernel density classifier


@dataclass
class PdfeModel:
    """Per-class kernel density estimates with adaptive radii.

    Every training point carries its own radius, the distance to its
    k-th nearest neighbour within its class (k-th distinct positive
    distance when duplicates are present). Each kernel bump is
    normalized to unit mass, so the class estimate divided by the class
    size is a genuine density and the prior-weighted class densities
    integrate to the class proportions.
    """

    train_user: np.ndarray
    train_non: np.ndarray
    radii_user: np.ndarray
    radii_non: np.ndarray
    k: int
    kernel: str

    def class_density(self, x, user: bool, with_prior: bool = False) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        train = self.train_user if user else self.train_non
        radii = self.radii_user if user else self.radii_non
        kern = kernel_function(self.kernel)
        dim = train.shape[1]
        norm = kernel_normalizer(self.kernel, dim)
        dmat = cdist(xa, train)
        u = dmat / radii
        bump = np.where(u <= 1.0, kern(np.minimum(u, 1.0)), 0.0)
        out = (bump / (norm * radii ** dim)).sum(axis=1) / train.shape[0]
        if with_prior:
            n = self.train_user.shape[0] + self.train_non.shape[0]
            out = out * (train.shape[0] / n)
        return out

    def posterior(self, x) -> np.ndarray:
        n_u = self.train_user.shape[0]
        n_n = self.train_non.shape[0]
        du = self.class_density(x, True, with_prior=True)
        dn = self.class_density(x, False, with_prior=True)
        total = du + dn
        out = np.full(du.shape, n_u / (n_u + n_n))
        ok = total > 0.0
        out[ok] = du[ok] / total[ok]
        return out

    def predict(self, x) -> np.ndarray:
        return self.posterior(x) > 0.5


def _pdfe_radii(rows: np.ndarray, k: int, diameter: float) -> np.ndarray:
    """Distance from each row to its k-th distinct in-class neighbour."""
    dmat = cdist(rows, rows)
    radii = np.empty(rows.shape[0])
    for j in range(rows.shape[0]):
        others = np.delete(dmat[j], j)
        positive = np.unique(others[others > 0.0])
        if positive.size == 0:
            radii[j] = max(1e-9 * diameter, 1e-300)
        else:
            radii[j] = float(positive[min(k, positive.size) - 1])
    return radii


def fit_pdfe(x, y, k=5, kernel="epanechnikov") -> PdfeModel:
    """Adaptive kernel density classifier.

    ``k`` controls the per-point radius (distance to the k-th distinct
    neighbour within the point's class); each class must have at least
    ``k`` rows.
    """
    xa, ya = _as_xy(x, y)
    if k < 1:
        raise ValueError("k must be positive")
    if kernel not in KERNELS:
        raise ValueError("unknown kernel %r; choose from %s"
                         % (kernel, sorted(KERNELS)))
    n_user = int(ya.sum())
    n_non = int((~ya).sum())
    if n_user < k:
        raise ValueError("the user class has %d rows, fewer than k=%d"
                         % (n_user, k))
    if n_non < k:
        raise ValueError("the non-user class has %d rows, fewer than k=%d"
                         % (n_non, k))
    spread = xa.max(axis=0) - xa.min(axis=0)
    diameter = float(np.linalg.norm(spread))
    users = xa[ya]
    nons = xa[~ya]
    return PdfeModel(train_user=users, train_non=nons,
                     radii_user=_pdfe_radii(users, k, diameter),
                     radii_non=_pdfe_radii(nons, k, diameter),
                     k=k, kernel=kernel)


# ---------------------------------------------------------------------------
# naive Bayes


@dataclass
class NaiveBayesModel:
    """Independent per-attribute model: categorical or Gaussian columns.

    Columns with at most 20 distinct training values are treated as
    categorical with add-one smoothing; wider columns get per-class
    Gaussians with population variances.
    """

    columns: list
    log_prior_user: float
    log_prior_non: float

    def _column_loglik(self, spec, values, user: bool):
        side = "user" if user else "non"
        if spec["kind"] == "categorical":
            table = spec[side]
            default = spec[side + "_unseen"]
            return np.array([table.get(float(v), default) for v in values])
        mean = spec[side + "_mean"]
        var = spec[side + "_var"]
        return -0.5 * (np.log(2.0 * math.pi * var) +
                       (values - mean) ** 2 / var)

    def log_odds(self, x) -> np.ndarray:
        xa = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(xa.shape[0], self.log_prior_user - self.log_prior_non)
        for j, spec in enumerate(self.columns):
            out += self._column_loglik(spec, xa[:, j], True)
            out -= self._column_loglik(spec, xa[:, j], False)
        return out

    def posterior(self, x) -> np.ndarray:
        lo = self.log_odds(x)
        out = np.empty_like(lo)
        pos = lo >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-lo[pos]))
        ez = np.exp(lo[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out

    def predict(self, x) -> np.ndarray:
        return self.posterior(x) > 0.5


CATEGORICAL_LIMIT = 20


def fit_naive_bayes(x, y) -> NaiveBayesModel:
    """Naive Bayes with automatic column typing.

    A column showing at most 20 distinct values in training is modelled
    as categorical via smoothed frequencies (count + 1) / (n_class + V)
    with V distinct values, so unseen categories keep positive mass;
    otherwise the column gets per-class Gaussian likelihoods.
    """
    xa, ya = _as_xy(x, y)
    n_user = int(ya.sum())
    n_non = int((~ya).sum())
    columns = []
    for j in range(xa.shape[1]):
        col = xa[:, j]
        distinct = np.unique(col)
        if distinct.size <= CATEGORICAL_LIMIT:
            v = distinct.size
            spec = {"kind": "categorical"}
            for side, mask, n_c in (("user", ya, n_user), ("non", ~ya, n_non)):
                vals, counts = np.unique(col[mask], return_counts=True)
                table = {float(val): math.log((int(c) + 1) / (n_c + v))
                         for val, c in zip(vals, counts)}
                spec[side] = table
                spec[side + "_unseen"] = math.log(1.0 / (n_c + v))
            columns.append(spec)
        else:
            overall_var = float(col.var())
            spec = {"kind": "gaussian"}
            for side, mask in (("user", ya), ("non", ~ya)):
                rows = col[mask]
                mean = float(rows.mean())
                var = float(((rows - mean) ** 2).mean())
                floor = max(1e-12 * max(overall_var, 1.0), 1e-300)
                spec[side + "_mean"] = mean
                spec[side + "_var"] = max(var, floor)
            columns.append(spec)
    n = n_user + n_non
    return NaiveBayesModel(columns=columns,
                           log_prior_user=math.log(n_user / n),
                           log_prior_non=math.log(n_non / n))
