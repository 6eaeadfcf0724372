"""Principal component analysis and input-feature ranking.

Three ranking techniques are provided on top of a shared PCA routine:

* principal variables: iteratively pick the attribute whose regression
  predictions explain the most residual variance, then deflate;
* double Kaiser selection: repeatedly drop the attribute whose largest
  loading over the Kaiser-retained components is smallest, while any
  attribute stays at or below the 1/sqrt(n) triviality bound;
* thresholding sparse PCA: grow sparse components by zeroing small
  loadings, deflate, and restart after discarding attributes that are
  zero in every accepted component.

All covariances use the 1/N convention. Eigenvector signs are fixed so
that the largest-magnitude coordinate of each component is positive,
which keeps rankings reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS = 1e-12

__all__ = [
    "PcaResult",
    "FeatureRanking",
    "SparsePcaResult",
    "pca",
    "principal_variables",
    "double_kaiser",
    "sparse_pca",
]


def _as_matrix(data) -> np.ndarray:
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-D data matrix, got shape %r" % (x.shape,))
    return x


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Flip each component so its largest-|coordinate| entry is positive."""
    out = components.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


@dataclass
class PcaResult:
    """Eigendecomposition of a sample covariance matrix.

    Attributes
    ----------
    eigenvalues : ndarray
        Sorted in descending order; sums to the covariance trace.
    components : ndarray
        Row i is the unit eigenvector paired with ``eigenvalues[i]``.
    retained : int
        Number of components whose eigenvalue strictly exceeds the mean
        eigenvalue (Kaiser's rule; for a correlation input this is the
        familiar "eigenvalue above 1" cut).
    mean : ndarray
        Column means subtracted before the decomposition.
    """

    eigenvalues: np.ndarray
    components: np.ndarray
    retained: int
    mean: np.ndarray

    @property
    def total_variance(self) -> float:
        return float(self.eigenvalues.sum())

    def fvu(self, k: int) -> float:
        """Fraction of variance left unexplained by the leading k-plane."""
        total = self.total_variance
        if total <= 0.0:
            return 0.0
        return float(self.eigenvalues[k:].sum()) / total

    def transform(self, data) -> np.ndarray:
        """Project rows onto all components (centered coordinates)."""
        x = _as_matrix(data)
        return (x - self.mean) @ self.components.T


def pca(data) -> PcaResult:
    """Eigendecomposition of the sample covariance (1/N convention).

    Parameters
    ----------
    data : array-like, shape (n_rows, n_attrs)
        Input rows; columns are centered internally.

    Raises
    ------
    ValueError
        If fewer than two rows are supplied.
    """
    x = _as_matrix(data)
    if x.shape[0] < 2:
        raise ValueError("pca needs at least 2 rows, got %d" % x.shape[0])
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    components = _fix_signs(evecs[:, order].T)
    retained = int(np.sum(evals > evals.mean())) if evals.size else 0
    return PcaResult(eigenvalues=evals, components=components,
                     retained=retained, mean=mean)


def _first_pc(xc: np.ndarray, support: np.ndarray) -> tuple[np.ndarray, float]:
    """Leading eigenpair of the covariance restricted to `support` columns.

    Returns the eigenvector embedded in the full coordinate space with
    exact zeros outside the support, and the explained variance.
    """
    sub = xc[:, support]
    cov = (sub.T @ sub) / xc.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    lam = float(evals[-1])
    w_sub = evecs[:, -1]
    j = int(np.argmax(np.abs(w_sub)))
    if w_sub[j] < 0:
        w_sub = -w_sub
    w = np.zeros(xc.shape[1])
    w[support] = w_sub
    return w, max(lam, 0.0)


@dataclass
class FeatureRanking:
    """Ordering of attributes produced by a ranking method.

    ``order`` holds attribute names from best to worst. ``fve`` and
    ``cfve`` are per-step fractions of explained variance where the
    method defines them (principal variables); otherwise they are empty.
    ``removed`` lists attributes screened out as trivial, most trivial
    first (double Kaiser).
    """

    method: str
    order: list
    fve: list = field(default_factory=list)
    cfve: list = field(default_factory=list)
    removed: list = field(default_factory=list)


def _names_for(n: int, names) -> list:
    if names is None:
        return list(range(n))
    names = list(names)
    if len(names) != n:
        raise ValueError("got %d names for %d attributes" % (len(names), n))
    return names


def principal_variables(data, names=None) -> FeatureRanking:
    """Rank attributes by iterative best-single-regressor selection.

    At every step each remaining attribute is used as the sole regressor
    for all residual columns; the attribute explaining the most residual
    variance (smallest fraction of variance unexplained) is selected and
    its predictions are subtracted from the table. FVE values are
    reported against the total variance of the original data, so the
    cumulative FVE reaches 1 once every attribute has been selected.

    Raises
    ------
    ValueError
        If fewer than two attributes are given or a column is constant.
    """
    x = _as_matrix(data)
    n_rows, n_attrs = x.shape
    if n_attrs < 2:
        raise ValueError("principal_variables needs at least 2 attributes")
    labels = _names_for(n_attrs, names)
    xc = x - x.mean(axis=0)
    col_ss = (xc ** 2).sum(axis=0)
    total_ss = float(col_ss.sum())
    if np.any(col_ss <= EPS * max(total_ss, 1.0)):
        bad = labels[int(np.argmin(col_ss))]
        raise ValueError("constant column %r has zero variance" % (bad,))

    resid = xc.copy()
    remaining = list(range(n_attrs))
    order, fves = [], []
    for _ in range(n_attrs):
        best_j = -1
        best_expl = -1.0
        for j in remaining:
            rj = resid[:, j]
            denom = float(rj @ rj)
            if denom <= EPS * total_ss:
                expl = 0.0
            else:
                cross = resid.T @ rj
                expl = float((cross ** 2).sum()) / denom
            if expl > best_expl + EPS * total_ss or best_j < 0:
                best_expl = expl
                best_j = j
        rj = resid[:, best_j]
        denom = float(rj @ rj)
        if denom > EPS * total_ss:
            beta = (resid.T @ rj) / denom
            resid = resid - np.outer(rj, beta)
            fves.append(best_expl / total_ss)
        else:
            fves.append(0.0)
        order.append(best_j)
        remaining.remove(best_j)

    cfve = list(np.cumsum(fves))
    return FeatureRanking(method="principal-variables",
                          order=[labels[j] for j in order],
                          fve=fves, cfve=cfve)


def double_kaiser(data, names=None) -> FeatureRanking:
    """Screen attributes by their largest loading on retained components.

    Each pass runs PCA, keeps the Kaiser-retained components, and scores
    attribute i by gamma_i, the largest absolute loading it has in any
    retained component. Attributes with gamma_i <= 1/sqrt(n) are trivial
    (boundary inclusive); the smallest-gamma attribute is removed and the
    pass repeats. Survivors are ranked by their final gamma, removed
    attributes sit below them in reverse removal order, so the full
    ordering runs best to most trivial.
    """
    x = _as_matrix(data)
    n_attrs = x.shape[1]
    labels = _names_for(n_attrs, names)
    if n_attrs == 1:
        return FeatureRanking(method="double-kaiser", order=list(labels))

    active = list(range(n_attrs))
    removed = []
    gamma = np.ones(len(active))
    while len(active) > 1:
        res = pca(x[:, active])
        if res.retained == 0:
            # every eigenvalue equals the mean, no informative components
            gamma = np.ones(len(active))
            break
        loadings = res.components[: res.retained]
        gamma = np.abs(loadings).max(axis=0)
        bound = 1.0 / np.sqrt(len(active))
        if not np.any(gamma <= bound):
            break
        drop_local = int(np.argmin(gamma))
        removed.append(active.pop(drop_local))
        gamma = np.delete(gamma, drop_local)

    # stable sort keeps the lower attribute index first on ties
    keep_sorted = [active[i] for i in np.argsort(-gamma, kind="stable")]
    order = keep_sorted + list(reversed(removed))
    return FeatureRanking(method="double-kaiser",
                          order=[labels[j] for j in order],
                          removed=[labels[j] for j in removed])


@dataclass
class SparsePcaResult:
    """Outcome of the thresholding sparse-PCA screen.

    ``trivial`` lists attributes discarded across all restarts.
    ``retained`` lists the surviving attributes, and ``components`` holds
    the accepted sparse components over those attributes (row per
    component, exact zeros at thresholded coordinates). ``explained``
    gives each component's variance in the final pass and ``kaiser_bound``
    the acceptance bound h = s^2 / n of that pass.
    """

    trivial: list
    retained: list
    components: np.ndarray
    explained: list
    kaiser_bound: float


def sparse_pca(data, names=None) -> SparsePcaResult:
    """Thresholding sparse PCA with trivial-attribute elimination.

    One pass works on the centered data restricted to the currently
    active attributes. Components are found in descending-variance order;
    a component is accepted while its full-space variance stays at or
    above h = s^2 / n (total variance over attribute count). Inside each
    accepted component, coordinates with |w| <= 1/sqrt(n) are zeroed one
    at a time, the leading component being recomputed on the shrinking
    support after every zeroing. The data is then deflated by the sparse
    component and the search continues. When the search stops, attributes
    that are zero in every accepted component of the pass are dropped and
    the whole procedure restarts on the survivors; with no such
    attributes the procedure terminates.
    """
    x = _as_matrix(data)
    n_attrs = x.shape[1]
    if n_attrs < 2:
        raise ValueError("sparse_pca needs at least 2 attributes")
    labels = _names_for(n_attrs, names)

    active = list(range(n_attrs))
    trivial_all = []
    components: list[np.ndarray] = []
    explained: list[float] = []
    bound_h = 0.0
    while True:
        sub = x[:, active]
        xc = sub - sub.mean(axis=0)
        n_act = len(active)
        total_var = float((xc ** 2).sum()) / xc.shape[0]
        bound_h = total_var / n_act
        coord_bound = 1.0 / np.sqrt(n_act)

        resid = xc.copy()
        components = []
        explained = []
        full = np.arange(n_act)
        while True:
            w, lam = _first_pc(resid, full)
            if lam < bound_h:
                break
            support = full.copy()
            while support.size > 1:
                w_sup = w[support]
                k = int(np.argmin(np.abs(w_sup)))
                if abs(w_sup[k]) > coord_bound:
                    break
                support = np.delete(support, k)
                w, lam = _first_pc(resid, support)
            components.append(w)
            explained.append(lam)
            resid = resid - np.outer(resid @ w, w)

        if components:
            stack = np.vstack(components)
            dead = np.all(stack == 0.0, axis=0)
        else:
            # nothing informative found; treat every attribute as kept
            dead = np.zeros(n_act, dtype=bool)
        if not dead.any() or n_act - int(dead.sum()) < 2:
            break
        for idx in np.nonzero(dead)[0]:
            trivial_all.append(active[idx])
        active = [a for i, a in enumerate(active) if not dead[i]]

    comp_matrix = np.vstack(components) if components else np.zeros((0, len(active)))
    return SparsePcaResult(
        trivial=[labels[j] for j in trivial_all],
        retained=[labels[j] for j in active],
        components=comp_matrix,
        explained=explained,
        kaiser_bound=bound_h,
    )
