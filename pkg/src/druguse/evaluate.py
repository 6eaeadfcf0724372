"""Model evaluation: confusion reports, leave-one-out CV, model search,
and decision stability under resampling.

A *fitter* is any callable ``fitter(x, y) -> model`` whose result has a
``predict(x) -> bool array`` method. Fitters that accept a ``seed``
keyword are reseeded per fold from the pair (global seed, fold index),
so cross-validation of randomized models is reproducible and folds are
independent of evaluation order.

Selection follows the admissibility rule used throughout: a classifier
qualifies only when both sensitivity and specificity reach 50%, the
winner maximizes min(Sn, Sp), and ties fall to the larger Sn + Sp, then
to family name and attribute subset order.
"""

from __future__ import annotations

import inspect
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classify import DecisionTreeModel, tree_signature

__all__ = [
    "EvalReport",
    "report_from_predictions",
    "whole_sample",
    "LoocvResult",
    "loocv",
    "select_best",
    "SearchResult",
    "subset_search",
    "StabilityResult",
    "stability",
    "default_grids",
]


@dataclass
class EvalReport:
    """Confusion counts of one evaluation run.

    ``mode`` records how predictions were obtained ("whole-sample" or
    "loocv"); ``context`` is free-form metadata such as the drug, the
    recency rule, the classifier family, and the attribute subset.
    """

    tp: int
    tn: int
    fp: int
    fn: int
    mode: str = "whole-sample"
    context: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def sn(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fn)

    @property
    def sp(self) -> float:
        return 100.0 * self.tn / (self.tn + self.fp)

    @property
    def accuracy(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.n


def report_from_predictions(y_true, y_pred, mode="whole-sample",
                            context=None) -> EvalReport:
    yt = np.asarray(y_true, dtype=bool).ravel()
    yp = np.asarray(y_pred, dtype=bool).ravel()
    if yt.size != yp.size or yt.size == 0:
        raise ValueError("labels and predictions disagree on length")
    return EvalReport(
        tp=int(np.sum(yt & yp)), tn=int(np.sum(~yt & ~yp)),
        fp=int(np.sum(~yt & yp)), fn=int(np.sum(yt & ~yp)),
        mode=mode, context=dict(context or {}))


def _accepts_seed(fitter) -> bool:
    try:
        params = inspect.signature(fitter).parameters
    except (TypeError, ValueError):
        return False
    return "seed" in params


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence((seed, fold)).generate_state(1)[0])


def whole_sample(fitter, x, y, context=None, seed=0) -> EvalReport:
    """Fit on the full sample and evaluate on the same sample."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=bool).ravel()
    if _accepts_seed(fitter):
        model = fitter(xa, ya, seed=seed)
    else:
        model = fitter(xa, ya)
    return report_from_predictions(ya, model.predict(xa),
                                   mode="whole-sample", context=context)


@dataclass
class LoocvResult:
    """Held-out predictions of a leave-one-out run."""

    report: EvalReport
    predictions: np.ndarray
    models: list | None = None


def loocv(fitter, x, y, *, seed=0, threads=1, keep_models=False,
          context=None) -> LoocvResult:
    """Leave-one-out cross-validation.

    Each fold drops one example, refits, and classifies the dropped
    example; the confusion report aggregates the n held-out predictions.
    A failure inside a fold is re-raised with the fold index attached.
    With ``keep_models`` the per-fold models are returned as well (in
    fold order), which :func:`stability` uses to probe decision changes.
    """
    xa = np.asarray(x, dtype=float)
    if xa.ndim == 1:
        xa = xa.reshape(-1, 1)
    ya = np.asarray(y, dtype=bool).ravel()
    n = ya.size
    if xa.shape[0] != n:
        raise ValueError("feature matrix and target disagree on rows")
    pass_seed = _accepts_seed(fitter)

    def run_fold(i: int):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        try:
            if pass_seed:
                model = fitter(xa[mask], ya[mask], seed=_fold_seed(seed, i))
            else:
                model = fitter(xa[mask], ya[mask])
            pred = bool(np.asarray(model.predict(xa[i:i + 1])).ravel()[0])
        except Exception as exc:
            raise RuntimeError("fold %d failed: %s" % (i, exc)) from exc
        return pred, (model if keep_models else None)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_fold, range(n)))
    else:
        results = [run_fold(i) for i in range(n)]

    predictions = np.array([r[0] for r in results], dtype=bool)
    models = [r[1] for r in results] if keep_models else None
    report = report_from_predictions(ya, predictions, mode="loocv",
                                     context=context)
    return LoocvResult(report=report, predictions=predictions, models=models)


def _selection_key(report: EvalReport):
    family = str(report.context.get("family", ""))
    subset = tuple(map(str, report.context.get("subset", ())))
    return (-min(report.sn, report.sp), -(report.sn + report.sp),
            family, subset)


def select_best(reports) -> EvalReport:
    """Pick the admissible report with the best worst-side performance.

    Only reports with Sn >= 50 and Sp >= 50 qualify; among them the
    winner maximizes min(Sn, Sp), ties resolved by the larger Sn + Sp,
    then by classifier family name and attribute subset order. Raises
    ValueError("no admissible classifier") when nothing qualifies.
    """
    admissible = [r for r in reports if r.sn >= 50.0 and r.sp >= 50.0]
    if not admissible:
        raise ValueError("no admissible classifier")
    return min(admissible, key=_selection_key)


@dataclass
class SearchResult:
    """Outcome of a subset search; ``partial`` marks a budget stop."""

    best: EvalReport | None
    reports: list
    partial: bool
    evaluated: int
    elapsed: float


def subset_search(x, y, names, families, *, budget=None, seed=0,
                  threads=1, use_loocv=True) -> SearchResult:
    """Exhaustive search over attribute subsets and classifier families.

    ``families`` maps a family name to a fitter taking the restricted
    feature matrix. All non-empty subsets of ``names`` (at most 20
    attributes) are enumerated by size and then by position. When the
    time ``budget`` (seconds) runs out, the search stops early and the
    result is flagged partial. Subset evaluation uses leave-one-out CV
    unless ``use_loocv`` is switched off (whole-sample reports then).
    """
    xa = np.asarray(x, dtype=float)
    names = list(names)
    if xa.ndim != 2 or xa.shape[1] != len(names):
        raise ValueError("attribute names disagree with the feature matrix")
    if len(names) > 20:
        raise ValueError("subset search pool limited to 20 attributes, got %d"
                         % len(names))
    started = time.monotonic()
    reports = []
    partial = False
    evaluated = 0

    outer = [
        (size, combo)
        for size in range(1, len(names) + 1)
        for combo in itertools.combinations(range(len(names)), size)
    ]
    for _, combo in outer:
        if budget is not None and time.monotonic() - started > budget:
            partial = True
            break
        sub_x = xa[:, combo]
        subset = tuple(names[j] for j in combo)
        for family, fitter in sorted(families.items()):
            context = {"family": family, "subset": subset}
            try:
                if use_loocv:
                    rep = loocv(fitter, sub_x, y, seed=seed, threads=threads,
                                context=context).report
                else:
                    rep = whole_sample(fitter, sub_x, y, context=context,
                                       seed=seed)
            except (ValueError, RuntimeError):
                continue
            evaluated += 1
            reports.append(rep)
        if budget is not None and time.monotonic() - started > budget:
            partial = True
            break

    try:
        best = select_best(reports)
    except ValueError:
        best = None
    reports.sort(key=_selection_key)
    return SearchResult(best=best, reports=reports, partial=partial,
                        evaluated=evaluated,
                        elapsed=time.monotonic() - started)


@dataclass
class StabilityResult:
    """How often held-out refits overturn the base model's decisions.

    An example counts as unstable in a direction when at least one of
    the n leave-one-out models classifies it differently from the model
    fitted on the full sample. Percentages of lost positives
    (``tp_to_fn``, ``fp_to_tn``) are relative to the base model's
    positive calls; gained positives (``fn_to_tp``, ``tn_to_fp``) are
    relative to its negative calls.
    """

    tp_to_fn_count: int
    fn_to_tp_count: int
    fp_to_tn_count: int
    tn_to_fp_count: int
    base_positive: int
    base_negative: int
    structural_changes: int | None = None

    @property
    def tp_to_fn(self) -> float:
        return 100.0 * self.tp_to_fn_count / self.base_positive

    @property
    def fn_to_tp(self) -> float:
        return 100.0 * self.fn_to_tp_count / self.base_negative

    @property
    def fp_to_tn(self) -> float:
        return 100.0 * self.fp_to_tn_count / self.base_positive

    @property
    def tn_to_fp(self) -> float:
        return 100.0 * self.tn_to_fp_count / self.base_negative


def stability(fitter, x, y, *, seed=0, threads=1) -> StabilityResult:
    """Decision stability of a fitter under leave-one-out refits.

    Fits the base model on the full sample, then has every fold model
    classify the complete sample; an example flips when any fold model
    disagrees with the base prediction for it. For decision trees the
    number of fold models whose structure differs from the base tree is
    reported as ``structural_changes``.
    """
    xa = np.asarray(x, dtype=float)
    if xa.ndim == 1:
        xa = xa.reshape(-1, 1)
    ya = np.asarray(y, dtype=bool).ravel()
    if _accepts_seed(fitter):
        base = fitter(xa, ya, seed=seed)
    else:
        base = fitter(xa, ya)
    base_pred = np.asarray(base.predict(xa), dtype=bool).ravel()

    res = loocv(fitter, xa, ya, seed=seed, threads=threads, keep_models=True)
    ever_user = base_pred.copy()
    ever_non = ~base_pred
    structural = 0
    base_sig = None
    if isinstance(base, DecisionTreeModel):
        base_sig = tree_signature(base)
    for model in res.models:
        pred = np.asarray(model.predict(xa), dtype=bool).ravel()
        ever_user |= pred
        ever_non |= ~pred
        if base_sig is not None and tree_signature(model) != base_sig:
            structural += 1

    lost = base_pred & ever_non      # called user by base, dropped by a fold
    gained = ~base_pred & ever_user  # called non-user by base, raised by a fold
    return StabilityResult(
        tp_to_fn_count=int(np.sum(lost & ya)),
        fn_to_tp_count=int(np.sum(gained & ya)),
        fp_to_tn_count=int(np.sum(lost & ~ya)),
        tn_to_fp_count=int(np.sum(gained & ~ya)),
        base_positive=int(base_pred.sum()),
        base_negative=int((~base_pred).sum()),
        structural_changes=structural if base_sig is not None else None)


def default_grids() -> dict:
    """Hyper-parameter grids used by the search command.

    Neighbour counts run from 1 to 30, leaf-size bounds from 3 to 30,
    class weights over a 25-point logarithmic grid between 0.01 and 5,
    and trees try all three impurity bases.
    """
    return {
        "knn": {
            "k": list(range(1, 31)),
            "kernel": ["epanechnikov", "uniform", "triangular", "gaussian"],
            "user_weight": list(np.geomspace(0.01, 5.0, 25)),
            "variant": ["euclidean", "fisher", "adaptive"],
        },
        "tree": {
            "base": ["entropy", "gini", "dkm"],
            "min_leaf": list(range(3, 31)),
            "user_weight": list(np.geomspace(0.01, 5.0, 25)),
        },
        "forest": {
            "n_trees": [10, 30, 100],
            "min_leaf": list(range(3, 31)),
            "user_weight": list(np.geomspace(0.01, 5.0, 25)),
        },
        "gaussian": {
            "prior_multiplier": list(np.geomspace(0.01, 5.0, 25)),
        },
        "pdfe": {
            "k": list(range(5, 31)),
            "kernel": ["epanechnikov", "uniform", "triangular", "gaussian"],
        },
    }
