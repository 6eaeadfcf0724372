"""Pairwise usage-correlation graphs and cross-user contrast reports.

Binary user/non-user vectors (one per substance, one recency rule)
correlate pairwise; each undirected edge carries a Pearson coefficient
with its p-value and a strength band, and each ordered pair carries a
relative information gain. Groups of mutually correlated substances
("pleiades") ship as fixed reference sets with a data-driven check
that flags within-group pairs whose correlation falls below the
medium band.

:func:`contrast_users` compares the users of two drugs trait by
trait: descriptive statistics for all users of each drug and for their
union, a z-score separating the smaller set from the union, a Welch
test between the two user sets, and a single-feature threshold rule
trained only on exclusive users (respondents using exactly one of the
two drugs). Joint users are never counted as errors of that rule.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .classify import OneFeatureResult, one_feature_classifier
from .dataset import GROUPS, label_users
from .stats import Descriptives, describe, mean_diff_test, pcc, rig, separation

log = logging.getLogger(__name__)

__all__ = [
    "BAND_CUTS",
    "BAND_NAMES",
    "PccEdge",
    "UsageCorrelationGraph",
    "TraitContrast",
    "CrossUserContrast",
    "PleiadReport",
    "band_of",
    "build_graph",
    "rig_asymmetry",
    "pleiad_report",
    "contrast_users",
    "export_edges",
    "export_rigs",
    "pcc_dot",
    "rig_dot",
]

# |r| cut points (weak/medium, medium/strong, strong/very strong)
BAND_CUTS = {
    "decade": (0.40, 0.45, 0.50),
    "year": (0.35, 0.40, 0.50),
}
BAND_NAMES = ("weak", "medium", "strong", "very strong")
_BAND_RANK = {name: i for i, name in enumerate(BAND_NAMES)}


def band_of(r: float, cuts) -> str:
    """Assign a strength band to a correlation; boundaries are half-open."""
    mag = abs(float(r))
    lo, mid, hi = cuts
    if mag < lo:
        return "weak"
    if mag < mid:
        return "medium"
    if mag < hi:
        return "strong"
    return "very strong"


@dataclass(frozen=True)
class PccEdge:
    r: float
    p: float
    band: str


@dataclass
class UsageCorrelationGraph:
    """All pairwise correlations between binary usage vectors.

    ``edges`` maps sorted drug-name pairs to :class:`PccEdge`;
    ``rigs`` maps ``(target, source)`` to the relative information
    gain about the target's usage given the source's.
    """

    rule: str
    drugs: list
    edges: dict
    rigs: dict
    band_cuts: tuple
    non_paper_bands: bool = False

    def edge(self, a: str, b: str) -> PccEdge:
        key = (a, b) if a <= b else (b, a)
        if key not in self.edges:
            raise KeyError("no edge between %r and %r" % (a, b))
        return self.edges[key]

    def rig(self, target: str, source: str) -> float:
        key = (target, source)
        if key not in self.rigs:
            raise KeyError("no directed pair (%r | %r)" % (target, source))
        return self.rigs[key]


def build_graph(label_vectors, band_cuts=None) -> UsageCorrelationGraph:
    """Correlate every pair of usage label vectors.

    ``label_vectors`` is a list of :class:`~druguse.dataset.LabelVector`
    sharing one recency rule. Band cut points default to the rule's
    published values; the month and week rules have no published cuts,
    so the decade cuts are reused (flagged, overridable via
    ``band_cuts``). A constant usage column raises ValueError naming
    the drug.
    """
    if len(label_vectors) < 2:
        raise ValueError("need at least two usage vectors")
    rules = {vec.rule for vec in label_vectors}
    if len(rules) != 1:
        raise ValueError("mixed recency rules: %s" % sorted(rules))
    rule = rules.pop()

    non_paper = False
    if band_cuts is None:
        if rule in BAND_CUTS:
            band_cuts = BAND_CUTS[rule]
        else:
            band_cuts = BAND_CUTS["decade"]
            non_paper = True
            log.warning("no published band cuts for the %r rule; "
                        "reusing the decade cuts %s", rule, band_cuts)
    band_cuts = tuple(float(c) for c in band_cuts)
    if not (0 < band_cuts[0] <= band_cuts[1] <= band_cuts[2]):
        raise ValueError("band cuts must be increasing and positive: %s"
                         % (band_cuts,))

    drugs = [vec.drug_or_group for vec in label_vectors]
    if len(set(drugs)) != len(drugs):
        raise ValueError("duplicate drugs in label vectors")
    vectors = {}
    for vec in label_vectors:
        column = np.asarray(vec.labels, dtype=float)
        if np.all(column == column[0]):
            raise ValueError("constant usage column for %r under the %r rule"
                             % (vec.drug_or_group, rule))
        vectors[vec.drug_or_group] = column

    edges = {}
    rigs = {}
    for i, a in enumerate(drugs):
        for b in drugs[i + 1:]:
            key = (a, b) if a <= b else (b, a)
            r, p = pcc(vectors[a], vectors[b])
            edges[key] = PccEdge(r=r, p=p, band=band_of(r, band_cuts))
    for target in drugs:
        for source in drugs:
            if target != source:
                rigs[(target, source)] = rig(vectors[target], vectors[source])

    return UsageCorrelationGraph(rule=rule, drugs=list(drugs), edges=edges,
                                 rigs=rigs, band_cuts=band_cuts,
                                 non_paper_bands=non_paper)


def rig_asymmetry(graph: UsageCorrelationGraph, a: str, b: str) -> str:
    """Classify a pair's information gains as symmetric or not.

    The pair is ``approximately-symmetric`` when the relative gap
    ``|RIG(A|B) - RIG(B|A)| / min(RIG(A|B), RIG(B|A))`` is below 0.2,
    otherwise ``asymmetric``. Both gains must be positive.
    """
    ab = graph.rig(a, b)
    ba = graph.rig(b, a)
    smaller = min(ab, ba)
    if smaller <= 0.0:
        raise ValueError("asymmetry is undefined when a gain is zero "
                         "(%r|%r=%g, %r|%r=%g)" % (a, b, ab, b, a, ba))
    gap = abs(ab - ba) / smaller
    return "approximately-symmetric" if gap < 0.2 else "asymmetric"


@dataclass
class PleiadReport:
    """Named drug groups with a within-group correlation check."""

    rule: str
    pleiades: dict
    intersections: dict
    pair_bands: dict

    def flagged_pairs(self, name: str):
        return [row for row in self.pair_bands[name] if row[4]]


_PLEIAD_NAMES = ("heroinPl", "ecstasyPl", "benzoPl")


def pleiad_report(graph: UsageCorrelationGraph) -> PleiadReport:
    """Report the named pleiades against a correlation graph.

    Membership is fixed (the groups are named findings, not rediscovered
    from the data); the graph supplies a verification pass that lists
    every within-group pair's correlation band and flags pairs falling
    below ``medium``. Intended for decade or year graphs.
    """
    if graph.rule not in ("decade", "year"):
        log.warning("pleiad check against a %r-rule graph; the groups were "
                    "defined on decade/year correlations", graph.rule)
    pleiades = {name: set(GROUPS[name].members) for name in _PLEIAD_NAMES}
    intersections = {}
    for i, a in enumerate(_PLEIAD_NAMES):
        for b in _PLEIAD_NAMES[i + 1:]:
            intersections[(a, b)] = pleiades[a] & pleiades[b]
    pair_bands = {}
    for name, members in pleiades.items():
        ordered = sorted(members)
        rows = []
        for i, a in enumerate(ordered):
            for b in ordered[i + 1:]:
                edge = graph.edge(a, b)
                flagged = _BAND_RANK[edge.band] < _BAND_RANK["medium"]
                rows.append((a, b, edge.r, edge.band, flagged))
        pair_bands[name] = rows
    return PleiadReport(rule=graph.rule, pleiades=pleiades,
                        intersections=intersections, pair_bands=pair_bands)


@dataclass
class TraitContrast:
    """One trait's contribution to a two-drug user contrast."""

    trait: str
    a_users: Descriptives
    b_users: Descriptives
    union: Descriptives
    z: float
    p_percent: float
    welch_p: float
    rule_result: OneFeatureResult

    @property
    def theta(self) -> float:
        return self.rule_result.threshold

    @property
    def ter(self) -> float:
        """Percent of exclusive A-users the threshold rule recognizes."""
        return self.rule_result.sn

    @property
    def thr(self) -> float:
        """Percent of exclusive B-users the threshold rule recognizes."""
        return self.rule_result.sp


@dataclass
class CrossUserContrast:
    """Trait-by-trait comparison of two drugs' user populations."""

    drug_a: str
    drug_b: str
    rule: str
    n_a_only: int
    n_b_only: int
    n_both: int
    traits: list

    @property
    def n_union(self) -> int:
        return self.n_a_only + self.n_b_only + self.n_both

    def trait(self, name: str) -> TraitContrast:
        for row in self.traits:
            if row.trait == name:
                return row
        raise KeyError("no trait %r in the contrast" % (name,))


def contrast_users(table, records, drug_a: str, drug_b: str, rule: str,
                   traits=None) -> CrossUserContrast:
    """Contrast the user populations of two drugs trait by trait.

    For each trait: descriptives over all A-users, all B-users, and
    their union; z separating the B-users from the union (with its
    percent confidence); a Welch test between the two full user sets;
    and the best single-feature threshold rule fitted on exclusive
    users only (label = uses A but not B), whose sensitivity and
    specificity are the exclusive recognition rates. Respondents using
    both drugs appear in both descriptive columns and are excluded
    from the threshold rule, so they can never be counted as errors.
    """
    labels_a = label_users(records, drug_a, rule).labels
    labels_b = label_users(records, drug_b, rule).labels
    union = labels_a | labels_b
    both = labels_a & labels_b
    a_only = labels_a & ~labels_b
    b_only = labels_b & ~labels_a
    if not a_only.any() or not b_only.any():
        raise ValueError(
            "no exclusive users to contrast (%s-only: %d, %s-only: %d)"
            % (drug_a, int(a_only.sum()), drug_b, int(b_only.sum())))

    if traits is None:
        traits = [n for n in table.names
                  if table.kinds[n] != "nominal-raw"]
    rows = []
    exclusive = a_only | b_only
    for name in traits:
        values = table.matrix([name])[:, 0]
        sep = separation(values[labels_b], values[union])
        welch = mean_diff_test(values[labels_a], values[labels_b])
        fit = one_feature_classifier(values[exclusive], a_only[exclusive])
        rows.append(TraitContrast(
            trait=name,
            a_users=describe(values[labels_a]),
            b_users=describe(values[labels_b]),
            union=describe(values[union]),
            z=sep.z,
            p_percent=sep.p_percent,
            welch_p=welch,
            rule_result=fit))
    return CrossUserContrast(drug_a=drug_a, drug_b=drug_b, rule=rule,
                             n_a_only=int(a_only.sum()),
                             n_b_only=int(b_only.sum()),
                             n_both=int(both.sum()),
                             traits=rows)


def export_edges(graph: UsageCorrelationGraph, path) -> None:
    """Write the undirected edges as CSV (drugA, drugB, r, p, band)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["drugA", "drugB", "r", "p", "band"])
        for (a, b), edge in sorted(graph.edges.items()):
            writer.writerow([a, b, repr(float(edge.r)), repr(float(edge.p)),
                             edge.band])


def export_rigs(graph: UsageCorrelationGraph, path) -> None:
    """Write the directed gains as CSV (target, source, rig)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["target", "source", "rig"])
        for (target, source), value in sorted(graph.rigs.items()):
            writer.writerow([target, source, repr(float(value))])


def _dot_name(drug: str) -> str:
    return '"%s"' % drug.replace('"', r"\"")


def pcc_dot(graph: UsageCorrelationGraph, min_band: str = "medium") -> str:
    """Render the stronger correlations as an undirected DOT graph."""
    if min_band not in _BAND_RANK:
        raise ValueError("unknown band %r; choose from %s"
                         % (min_band, list(BAND_NAMES)))
    cutoff = _BAND_RANK[min_band]
    lines = ["graph usage_correlations {"]
    for drug in graph.drugs:
        lines.append("  %s;" % _dot_name(drug))
    for (a, b), edge in sorted(graph.edges.items()):
        if _BAND_RANK[edge.band] >= cutoff:
            lines.append('  %s -- %s [label="%.3f"];'
                         % (_dot_name(a), _dot_name(b), edge.r))
    lines.append("}")
    return "\n".join(lines) + "\n"


def rig_dot(graph: UsageCorrelationGraph, min_rig: float = 0.1) -> str:
    """Render directed information gains at or above a cutoff as DOT."""
    lines = ["digraph usage_information_gain {"]
    for drug in graph.drugs:
        lines.append("  %s;" % _dot_name(drug))
    for (target, source), value in sorted(graph.rigs.items()):
        if value >= min_rig:
            lines.append('  %s -> %s [label="%.3f"];'
                         % (_dot_name(source), _dot_name(target), value))
    lines.append("}")
    return "\n".join(lines) + "\n"
