"""Command-line pipeline: ingest, quantify, analyze, classify, report.

Every subcommand reads the survey CSV (raw categorical or
pre-quantified), writes its tables as CSV plus a Markdown rendering,
and drops a ``manifest.json`` naming the input files (with SHA-256
digests), the seed, and the package version. Timestamps live only in
the manifest, so rerunning a command with the same config and seed
reproduces the data artifacts byte for byte.

Exit codes: 0 success, 1 usage or config error, 2 data error,
3 verification failure (``report --verify``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import classify, dataset, evaluate, maps, pleiades, quantify, rank, stats

try:
    from importlib.metadata import version as _dist_version
    VERSION = _dist_version("druguse")
except Exception:  # pragma: no cover - metadata missing in odd installs
    VERSION = "unknown"

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3

RULES = ("decade", "year", "month", "week")


class DataError(Exception):
    """Problem with input data; mapped to exit code 2."""


class ConfigError(ValueError):
    """Config schema violation; mapped to exit code 1."""


# ---------------------------------------------------------------------------
# config handling


_LIST_FIELDS = {
    "targets": str,
    "attributes": str,
    "families": str,
    "axes": str,
    "band_cuts": float,
}
_SCALAR_FIELDS = {
    "data": str,
    "raw_data": str,
    "out": str,
    "seed": int,
    "threads": int,
    "rule": str,
    "target": str,
    "versus": str,
    "level": float,
    "rows": int,
    "cols": int,
    "resolution": int,
    "family": str,
    "budget": float,
    "knn_k": int,
    "knn_variant": str,
    "kernel": str,
    "min_leaf": int,
    "user_weight": float,
    "tree_base": str,
    "prior_multiplier": float,
    "pdfe_k": int,
    "n_trees": int,
    "dot_min_band": str,
    "dot_min_rig": float,
}


def _type_ok(value, kind) -> bool:
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, kind)


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be an object")
    for key, value in cfg.items():
        if key in _LIST_FIELDS:
            kind = _LIST_FIELDS[key]
            if not isinstance(value, list):
                raise ConfigError("config: field '%s' must be a list" % key)
            for i, item in enumerate(value):
                if not _type_ok(item, kind):
                    raise ConfigError(
                        "config: field '%s[%d]' must be %s"
                        % (key, i, kind.__name__))
        elif key in _SCALAR_FIELDS:
            kind = _SCALAR_FIELDS[key]
            if not _type_ok(value, kind):
                raise ConfigError("config: field '%s' must be %s"
                                  % (key, kind.__name__))
        else:
            raise ConfigError("config: unknown field '%s'" % key)
    if "seed" in cfg and not (0 <= cfg["seed"] < 2 ** 64):
        raise ConfigError("config: field 'seed' must fit in 64 bits")
    if "rule" in cfg and cfg["rule"] not in RULES:
        raise ConfigError("config: field 'rule' must be one of %s"
                          % (RULES,))
    if "band_cuts" in cfg and len(cfg["band_cuts"]) != 3:
        raise ConfigError("config: field 'band_cuts' needs exactly 3 values")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as handle:
            cfg = json.load(handle)
    except OSError as exc:
        raise ConfigError("config: %s" % exc)
    except json.JSONDecodeError as exc:
        raise ConfigError("config: %s is not valid JSON (%s)" % (path, exc))
    return validate_config(cfg)


def _opt(args, cfg, name, default=None):
    """Resolve an option: CLI flag beats config beats default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in cfg:
        return cfg[name]
    return default


# ---------------------------------------------------------------------------
# artifacts: tables and manifests


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _md_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if math.isnan(f):
            return ""
        return "%.3f" % f
    return str(value)


def write_table(out_dir: Path, stem: str, header, rows):
    """Write one table as <stem>.csv (full precision) and <stem>.md."""
    csv_path = out_dir / ("%s.csv" % stem)
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    md_path = out_dir / ("%s.md" % stem)
    with open(md_path, "w", encoding="utf-8") as handle:
        handle.write("| " + " | ".join(str(h) for h in header) + " |\n")
        handle.write("|" + "|".join(" --- " for _ in header) + "|\n")
        for row in rows:
            handle.write("| " + " | ".join(_md_cell(v) for v in row) + " |\n")
    return [csv_path.name, md_path.name]


def _write_json(out_dir: Path, name: str, payload) -> str:
    path = out_dir / name
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path.name


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, command: str, inputs, artifacts,
                    seed, parameters=None) -> None:
    payload = {
        "command": command,
        "version": VERSION,
        "created": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "inputs": inputs,
        "artifacts": sorted(artifacts),
        "parameters": parameters or {},
    }
    _write_json(out_dir, "manifest.json", payload)


def _out_dir(args, cfg, command: str) -> Path:
    out = Path(_opt(args, cfg, "out", "druguse-out-%s" % command))
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# data loading and quantification


def _load_data(path):
    if path is None:
        raise DataError("no dataset given: pass --data or set it in the "
                        "config")
    try:
        table, records = dataset.load_table(path)
    except OSError as exc:
        raise DataError(str(exc))
    except ValueError as exc:
        raise DataError(str(exc))
    return table, records, {"path": str(path), "sha256": _sha256(path)}


_AGE_ORDER = ["18-24", "25-34", "35-44", "45-54", "55-64", "65+", "65-100"]
_EDU_ORDER = [
    "Left school before 16 years",
    "Left school at 16 years",
    "Left school at 17 years",
    "Left school at 18 years",
    "Some college or university, no certificate or degree",
    "Professional certificate/ diploma",
    "Professional certificate/diploma",
    "University degree",
    "Masters degree",
    "Doctorate degree",
]


def _ordinal_order(name: str, observed) -> list:
    """Deterministic category order for a raw ordinal or binary column."""
    observed = sorted(set(str(v) for v in observed))
    if name == "Age":
        base = _AGE_ORDER
    elif name == "Edu":
        base = _EDU_ORDER
    elif name == "Gndr":
        males = [v for v in observed if v.lower().startswith("m")]
        females = [v for v in observed if v.lower().startswith("f")]
        leftover = [v for v in observed if v not in males + females]
        if leftover or len(males) > 1 or len(females) > 1:
            raise DataError("cannot order gender labels %s" % observed)
        return males + females
    else:
        return observed
    order = [c for c in base if c in observed]
    leftover = [v for v in observed if v not in order]
    if leftover:
        raise DataError("unknown %s categories: %s" % (name, leftover))
    return order


def quantify_table(table: dataset.FeatureTable):
    """Replace every raw attribute column with a real-valued one.

    Ordered columns (trait scores, age and education bands, gender) get
    latent-normal bin values; the two unordered columns (country,
    ethnicity) are quantified by projecting their category centroids in
    the space of the already-numeric attributes. Returns the new table
    plus a JSON-ready list of category-to-value maps.
    """
    columns = {}
    kinds = {}
    entries = []
    deferred = []
    for name in table.names:
        kind = table.kinds[name]
        values = table.columns[name]
        if kind == "quantified-real":
            columns[name] = np.asarray(values, dtype=float)
            kinds[name] = "quantified-real"
            continue
        if kind == "nominal-raw" and name in ("Country", "Ethnicity"):
            deferred.append(name)
            continue
        if values.dtype == object:
            order = _ordinal_order(name, values)
            labels = [str(v) for v in values]
        else:
            numeric = np.asarray(values, dtype=float)
            order = sorted(set(numeric.tolist()))
            labels = numeric.tolist()
        mapping, transformed = quantify.quantize_ordinal_column(labels, order)
        columns[name] = transformed
        kinds[name] = "quantified-real"
        entries.append(quantify.quantization_map_entry(
            name, list(mapping), [mapping[c] for c in mapping]))

    numeric_names = [n for n in table.names if n in columns]
    numeric_matrix = np.column_stack([columns[n] for n in numeric_names])
    for name in deferred:
        labels = [str(v) for v in table.columns[name]]
        nq = quantify.catpca_quantize(labels, numeric_matrix)
        columns[name] = np.array([nq.mapping[v] for v in labels])
        kinds[name] = "quantified-real"
        entries.append(quantify.quantization_map_entry(
            name, list(nq.mapping), [nq.mapping[c] for c in nq.mapping]))

    out = dataset.FeatureTable(ids=list(table.ids), names=list(table.names),
                               kinds=kinds, columns=columns)
    return out, entries


def ensure_quantified(table: dataset.FeatureTable):
    """Quantify the table unless every attribute is already numeric."""
    if all(k == "quantified-real" for k in table.kinds.values()):
        return table, []
    quantified, entries = quantify_table(table)
    log.info("quantified %d raw attribute columns", len(entries))
    return quantified, entries


def _labels_for(records, target: str, rule: str) -> dataset.LabelVector:
    try:
        if target in dataset.GROUPS:
            return dataset.label_group(records, target, rule)
        return dataset.label_users(records, target, rule)
    except ValueError as exc:
        raise DataError(str(exc))


def _numeric_names(table) -> list:
    return [n for n in table.names if table.kinds[n] != "nominal-raw"
            and table.columns[n].dtype != object]


def _matrix(table, names) -> np.ndarray:
    try:
        return table.matrix(names)
    except (KeyError, ValueError) as exc:
        raise DataError(str(exc))


ALL_TARGETS = list(dataset.DRUGS) + list(dataset.GROUPS)


# ---------------------------------------------------------------------------
# classifier families


FAMILY_ALIASES = {
    "lda": "linear-discriminant",
    "ld": "linear-discriminant",
    "lr": "logistic-regression",
    "knn": "nearest-neighbours",
    "dt": "decision-tree",
    "rf": "random-forest",
    "gm": "gaussian-mixture",
    "pdfe": "density-estimate",
    "nb": "naive-bayes",
}


def family_fitters(cfg: dict) -> dict:
    """Fitters for every classifier family, configured from ``cfg``."""
    try:
        knn_config = classify.KnnConfig(
            k=cfg.get("knn_k", 5),
            variant=cfg.get("knn_variant", "euclidean"),
            kernel=cfg.get("kernel", "epanechnikov"),
            user_weight=cfg.get("user_weight", 1.0))
    except ValueError as exc:
        raise ConfigError("config: %s" % exc)
    tree_base = cfg.get("tree_base", "gini")
    min_leaf = cfg.get("min_leaf", 3)
    user_weight = cfg.get("user_weight", 1.0)

    def fit_knn(x, y):
        return classify.fit_knn(x, y, knn_config)

    def fit_tree(x, y):
        return classify.fit_tree(x, y, base=tree_base, min_leaf=min_leaf,
                                 user_weight=user_weight)

    def fit_forest(x, y, seed=0):
        return classify.fit_forest(
            x, y, n_trees=cfg.get("n_trees", 100), seed=seed, base=tree_base,
            min_leaf=min_leaf, user_weight=user_weight)

    def fit_gm(x, y):
        return classify.fit_gaussian_mixture(
            x, y, prior_multiplier=cfg.get("prior_multiplier", 1.0))

    def fit_pdfe(x, y):
        return classify.fit_pdfe(x, y, k=cfg.get("pdfe_k", 5),
                                 kernel=cfg.get("kernel", "epanechnikov"))

    return {
        "linear-discriminant": classify.fit_lda,
        "logistic-regression": classify.fit_logreg,
        "nearest-neighbours": fit_knn,
        "decision-tree": fit_tree,
        "random-forest": fit_forest,
        "gaussian-mixture": fit_gm,
        "density-estimate": fit_pdfe,
        "naive-bayes": classify.fit_naive_bayes,
    }


def _resolve_family(name: str) -> str:
    canonical = FAMILY_ALIASES.get(name.lower(), name.lower())
    if canonical not in family_fitters({}):
        raise ConfigError("unknown classifier family %r; choose from %s"
                          % (name, sorted(family_fitters({}))))
    return canonical


def _tree_node_dict(node, names):
    if node.is_leaf:
        return {"label": bool(node.label), "n_non": node.n_non,
                "n_user": node.n_user}
    out = {
        "threshold": node.threshold,
        "n_non": node.n_non,
        "n_user": node.n_user,
        "left": _tree_node_dict(node.left, names),
        "right": _tree_node_dict(node.right, names),
    }
    if node.feature is not None:
        out["feature"] = (names[node.feature] if names else node.feature)
    if node.direction is not None:
        out["direction"] = [float(v) for v in np.asarray(node.direction)]
    return out


def serialize_model(model, attribute_names=None) -> dict:
    """JSON-ready description of a fitted model (family tag + params)."""
    names = list(attribute_names) if attribute_names else None
    if isinstance(model, classify.LinearDiscriminantModel):
        return {"family": "linear-discriminant",
                "attributes": names,
                "coefficients": [float(w) for w in model.weights],
                "threshold": float(model.threshold)}
    if isinstance(model, classify.LogisticRegressionModel):
        return {"family": "logistic-regression",
                "attributes": names,
                "weights": [float(w) for w in model.weights],
                "bias": float(model.bias),
                "iterations": model.iterations}
    if isinstance(model, classify.DecisionTreeModel):
        return {"family": "decision-tree", "attributes": names,
                "base": model.base, "min_leaf": model.min_leaf,
                "user_weight": model.user_weight,
                "root": _tree_node_dict(model.root, names)}
    if isinstance(model, classify.RandomForestModel):
        return {"family": "random-forest", "attributes": names,
                "seed": model.seed, "n_trees": len(model.trees),
                "trees": [_tree_node_dict(t.root, names)
                          for t in model.trees]}
    if isinstance(model, classify.GaussianPairModel):
        return {"family": "gaussian-mixture", "attributes": names,
                "mean_user": [float(v) for v in model.mean_user],
                "mean_non": [float(v) for v in model.mean_non],
                "cov_user": np.asarray(model.cov_user).tolist(),
                "cov_non": np.asarray(model.cov_non).tolist(),
                "n_user": model.n_user, "n_non": model.n_non,
                "prior_multiplier": model.prior_multiplier}
    if isinstance(model, classify.KnnModel):
        cfg = model.config
        return {"family": "nearest-neighbours", "attributes": names,
                "k": cfg.k, "k_fisher": cfg.k_fisher, "variant": cfg.variant,
                "kernel": cfg.kernel, "user_weight": cfg.user_weight,
                "n_train": int(model.train_y.size),
                "note": "training data not embedded"}
    if isinstance(model, classify.PdfeModel):
        return {"family": "density-estimate", "attributes": names,
                "k": model.k, "kernel": model.kernel,
                "n_user": int(model.train_user.shape[0]),
                "n_non": int(model.train_non.shape[0]),
                "note": "training data not embedded"}
    if isinstance(model, classify.NaiveBayesModel):
        return {"family": "naive-bayes", "attributes": names,
                "log_prior_user": model.log_prior_user,
                "log_prior_non": model.log_prior_non,
                "n_columns": len(model.columns)}
    if isinstance(model, classify.OneFeatureResult):
        return {"family": "one-attribute-threshold",
                "attributes": names,
                "threshold": model.threshold, "midpoint": model.midpoint,
                "user_side": model.user_side,
                "tp": model.tp, "tn": model.tn,
                "fp": model.fp, "fn": model.fn}
    raise DataError("cannot serialize model type %s" % type(model).__name__)


def _report_dict(report: evaluate.EvalReport) -> dict:
    return {"mode": report.mode, "tp": report.tp, "tn": report.tn,
            "fp": report.fp, "fn": report.fn,
            "sn": report.sn, "sp": report.sp,
            "accuracy": report.accuracy,
            "context": {k: (list(v) if isinstance(v, tuple) else v)
                        for k, v in report.context.items()}}


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cfg) -> int:
    out = _out_dir(args, cfg, "ingest")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    artifacts = []

    report = dataset.validate(records)
    if args.drop_invalid and report.semeron_claims:
        table, records, dropped = dataset.drop_invalid(table, records)
        print("dropped %d rows claiming the fictitious control substance"
              % len(dropped))
        report = dataset.validate(records)

    header = ["target"]
    for rule in RULES:
        header += ["%s_users" % rule, "%s_fraction" % rule]
    rows = []
    for target in ALL_TARGETS:
        row = [target]
        for rule in RULES:
            vec = _labels_for(records, target, rule)
            row += [vec.user_count, round(100.0 * vec.user_fraction, 2)]
        rows.append(row)
    artifacts += write_table(out, "user_counts", header, rows)

    vectors = [_labels_for(records, drug, rule)
               for drug in dataset.DRUGS for rule in RULES]
    dataset.export_labels(vectors, table.ids, out / "labels.csv")
    artifacts.append("labels.csv")

    artifacts.append(_write_json(out, "validation.json", {
        "n_rows": report.n_rows,
        "semeron_claims": report.semeron_claims,
        "semeron_ids": report.semeron_ids,
        "histograms": report.histograms,
    }))
    _write_manifest(out, "ingest", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0))
    print("ingested %d rows; %d respondents claim the fictitious substance"
          % (report.n_rows, report.semeron_claims))
    return EXIT_OK


def cmd_quantize(args, cfg) -> int:
    out = _out_dir(args, cfg, "quantize")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    quantified, entries = ensure_quantified(table)
    if not entries:
        print("attributes are already quantified; writing them through")
    dataset.save_table(quantified, records, out / "quantified.csv")
    artifacts = ["quantified.csv",
                 _write_json(out, "quantization_map.json", entries)]
    _write_manifest(out, "quantize", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0))
    print("wrote %s with %d quantified columns"
          % (out / "quantified.csv", len(quantified.names)))
    return EXIT_OK


_NAN = float("nan")


def _d_cells(d) -> list:
    if d is None:
        return [0, _NAN, _NAN, _NAN, _NAN]
    return [d.n, d.mean, d.sd, d.ci_low, d.ci_high]


def _describe_rows(table, labels: np.ndarray, names) -> list:
    rows = []
    for name in names:
        values = table.matrix([name])[:, 0]
        users = values[labels]
        nons = values[~labels]

        def _try(func, *parts):
            try:
                return func(*parts)
            except ValueError:
                return None
        du = _try(stats.describe, users)
        dn = _try(stats.describe, nons)
        da = _try(stats.describe, values)
        sep = _try(stats.separation, users, nons)
        welch = _try(stats.mean_diff_test, users, nons)
        try:
            rule = classify.one_feature_classifier(values, labels)
            theta, side = rule.threshold, rule.user_side
            sn, sp = rule.sn, rule.sp
        except ValueError:
            theta, side, sn, sp = _NAN, "", _NAN, _NAN
        rows.append(
            [name] + _d_cells(du) + _d_cells(dn) + _d_cells(da)
            + [theta, side, sn, sp,
               sep.z if sep else _NAN,
               sep.p_percent if sep else _NAN,
               welch if welch is not None else _NAN])
    return rows


_DESCRIBE_HEADER = [
    "attribute",
    "n_users", "mean_users", "sd_users", "ci_low_users", "ci_high_users",
    "n_non", "mean_non", "sd_non", "ci_low_non", "ci_high_non",
    "n_all", "mean_all", "sd_all", "ci_low_all", "ci_high_all",
    "threshold", "user_side", "sn", "sp", "z", "p_percent", "welch_p",
]


def cmd_describe(args, cfg) -> int:
    out = _out_dir(args, cfg, "describe")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    target = _opt(args, cfg, "target", "illicit")
    rule = _opt(args, cfg, "rule", "decade")
    vec = _labels_for(records, target, rule)
    names = _opt(args, cfg, "attributes") or _numeric_names(table)
    rows = _describe_rows(table, vec.labels, names)
    stem = "describe_%s_%s" % (target.replace(" ", "_"), rule)
    artifacts = write_table(out, stem, _DESCRIBE_HEADER, rows)
    _write_manifest(out, "describe", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0),
                    {"target": target, "rule": rule})
    print("described %d attributes for %s/%s (%d users, %d non-users)"
          % (len(rows), target, rule, vec.user_count,
             len(records) - vec.user_count))
    return EXIT_OK


def _usage_graph(records, rule: str, band_cuts=None):
    vectors = [dataset.label_users(records, drug, rule)
               for drug in dataset.DRUGS]
    return pleiades.build_graph(vectors, band_cuts=band_cuts)


def cmd_correlate(args, cfg) -> int:
    out = _out_dir(args, cfg, "correlate")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    rule = _opt(args, cfg, "rule", "decade")
    level = _opt(args, cfg, "level", 0.05)
    artifacts = []

    names = _opt(args, cfg, "attributes") or _numeric_names(table)
    matrix = _matrix(table, names)
    rows = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            r, p = stats.pcc(matrix[:, i], matrix[:, j])
            rows.append([names[i], names[j], r, p])
    artifacts += write_table(out, "attribute_pcc",
                             ["a", "b", "r", "p"], rows)

    graph = _usage_graph(records, rule)
    pleiades.export_edges(graph, out / "usage_edges.csv")
    pleiades.export_rigs(graph, out / "usage_rigs.csv")
    artifacts += ["usage_edges.csv", "usage_rigs.csv"]
    for name, text in (("usage_graph.dot",
                        pleiades.pcc_dot(graph,
                                         _opt(args, cfg, "dot_min_band",
                                              "medium"))),
                       ("usage_rig.dot",
                        pleiades.rig_dot(graph,
                                         _opt(args, cfg, "dot_min_rig",
                                              0.1)))):
        with open(out / name, "w", encoding="utf-8") as handle:
            handle.write(text)
        artifacts.append(name)

    pvals = [graph.edges[key].p for key in sorted(graph.edges)]
    bonf = stats.multiple_testing(pvals, level, "bonferroni")
    bh = stats.multiple_testing(pvals, level, "bh")
    artifacts.append(_write_json(out, "significance.json", {
        "rule": rule,
        "level": level,
        "pairs": len(pvals),
        "bonferroni_significant": int(np.sum(bonf)),
        "bh_significant": int(np.sum(bh)),
    }))
    _write_manifest(out, "correlate", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0),
                    {"rule": rule, "level": level})
    print("correlated %d attribute pairs and %d usage pairs (%s rule)"
          % (len(rows), len(pvals), rule))
    return EXIT_OK


def cmd_rank(args, cfg) -> int:
    out = _out_dir(args, cfg, "rank")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    quantified, _ = ensure_quantified(table)
    names = _opt(args, cfg, "attributes") or [
        n for n in dataset.TEN_ATTRIBUTES if n in quantified.names]
    matrix = _matrix(quantified, names)
    artifacts = []

    res = rank.pca(matrix)
    rows = [[i + 1, float(v), float(v) / res.total_variance,
             1 if i < res.retained else 0]
            for i, v in enumerate(res.eigenvalues)]
    artifacts += write_table(out, "components",
                             ["component", "eigenvalue", "fve", "retained"],
                             rows)

    pv = rank.principal_variables(matrix, names)
    rows = [[i + 1, name, pv.fve[i], pv.cfve[i]]
            for i, name in enumerate(pv.order)]
    artifacts += write_table(out, "principal_variables",
                             ["step", "attribute", "fve", "cumulative_fve"],
                             rows)

    dk = rank.double_kaiser(matrix, names)
    rows = [[i + 1, name] for i, name in enumerate(dk.order)]
    rows += [["removed", name] for name in dk.removed]
    artifacts += write_table(out, "double_kaiser", ["rank", "attribute"],
                             rows)

    sp = rank.sparse_pca(matrix, names)
    rows = []
    for ci in range(sp.components.shape[0]):
        for ai, name in enumerate(sp.retained):
            rows.append([ci + 1, name, float(sp.components[ci, ai]),
                         sp.explained[ci]])
    artifacts += write_table(out, "sparse_components",
                             ["component", "attribute", "loading",
                              "explained"], rows)
    artifacts.append(_write_json(out, "sparse_summary.json", {
        "trivial": sp.trivial,
        "retained": sp.retained,
        "kaiser_bound": sp.kaiser_bound,
    }))

    condition = {}
    trait_names = [n for n in dataset.TRAITS if n in quantified.names]
    if len(trait_names) == len(dataset.TRAITS):
        condition["traits7"] = stats.condition_number(
            _matrix(quantified, trait_names))
    condition["attributes%d" % len(names)] = stats.condition_number(matrix)
    artifacts.append(_write_json(out, "condition.json", condition))

    _write_manifest(out, "rank", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0), {"attributes": names})
    print("ranked %d attributes; %d components retained"
          % (len(names), res.retained))
    return EXIT_OK


def _fit_context(args, cfg):
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    quantified, _ = ensure_quantified(table)
    target = _opt(args, cfg, "target")
    if target is None:
        raise DataError("no target given: pass --target")
    rule = _opt(args, cfg, "rule", "decade")
    vec = _labels_for(records, target, rule)
    names = _opt(args, cfg, "attributes") or [
        n for n in dataset.TEN_ATTRIBUTES if n in quantified.names]
    matrix = _matrix(quantified, names)
    return quantified, records, input_info, target, rule, vec, names, matrix


def cmd_train(args, cfg) -> int:
    out = _out_dir(args, cfg, "train")
    (quantified, _records, input_info, target, rule, vec, names,
     matrix) = _fit_context(args, cfg)
    family = _resolve_family(_opt(args, cfg, "family", "linear-discriminant"))
    seed = _opt(args, cfg, "seed", 0)
    fitter = family_fitters(cfg)[family]
    report = evaluate.whole_sample(
        fitter, matrix, vec.labels, seed=seed,
        context={"family": family, "target": target, "rule": rule})
    if evaluate._accepts_seed(fitter):
        model = fitter(matrix, vec.labels, seed=seed)
    else:
        model = fitter(matrix, vec.labels)
    artifacts = [
        _write_json(out, "report.json", _report_dict(report)),
        _write_json(out, "model.json", serialize_model(model, names)),
    ]
    _write_manifest(out, "train", [input_info], artifacts, seed,
                    {"family": family, "target": target, "rule": rule,
                     "attributes": names})
    print("%s on %s/%s: whole-sample Sn %.2f, Sp %.2f"
          % (family, target, rule, report.sn, report.sp))
    return EXIT_OK


def cmd_loocv(args, cfg) -> int:
    out = _out_dir(args, cfg, "loocv")
    (quantified, _records, input_info, target, rule, vec, names,
     matrix) = _fit_context(args, cfg)
    family = _resolve_family(_opt(args, cfg, "family", "linear-discriminant"))
    seed = _opt(args, cfg, "seed", 0)
    threads = _opt(args, cfg, "threads", 1)
    fitter = family_fitters(cfg)[family]
    try:
        result = evaluate.loocv(
            fitter, matrix, vec.labels, seed=seed, threads=threads,
            context={"family": family, "target": target, "rule": rule})
    except RuntimeError as exc:
        raise DataError(str(exc))
    rows = [[rid, int(bool(t)), int(bool(p))]
            for rid, t, p in zip(quantified.ids, vec.labels,
                                 result.predictions)]
    artifacts = write_table(out, "predictions",
                            ["respondent_id", "label", "prediction"], rows)
    artifacts.append(_write_json(out, "report.json",
                                 _report_dict(result.report)))
    _write_manifest(out, "loocv", [input_info], artifacts, seed,
                    {"family": family, "target": target, "rule": rule,
                     "attributes": names, "threads": threads})
    print("%s on %s/%s: LOOCV Sn %.2f, Sp %.2f"
          % (family, target, rule, result.report.sn, result.report.sp))
    return EXIT_OK


def cmd_search(args, cfg) -> int:
    out = _out_dir(args, cfg, "search")
    (quantified, _records, input_info, target, rule, vec, names,
     matrix) = _fit_context(args, cfg)
    seed = _opt(args, cfg, "seed", 0)
    threads = _opt(args, cfg, "threads", 1)
    budget = _opt(args, cfg, "budget")
    wanted = _opt(args, cfg, "families") or ["linear-discriminant"]
    fitters = family_fitters(cfg)
    families = {}
    for name in wanted:
        canonical = _resolve_family(name)
        families[canonical] = fitters[canonical]

    result = evaluate.subset_search(
        matrix, vec.labels, names, families, budget=budget, seed=seed,
        threads=threads)
    rows = []
    for report in result.reports:
        subset = set(report.context.get("subset", ()))
        rows.append([report.context.get("family", "")]
                    + [1 if n in subset else 0 for n in names]
                    + [report.sn, report.sp, report.sn + report.sp])
    artifacts = write_table(out, "search_results",
                            ["family"] + names + ["sn", "sp", "sum"], rows)
    artifacts.append(_write_json(out, "search_summary.json", {
        "target": target, "rule": rule, "evaluated": result.evaluated,
        "partial": result.partial, "elapsed": result.elapsed,
        "best": _report_dict(result.best) if result.best else None,
    }))
    _write_manifest(out, "search", [input_info], artifacts, seed,
                    {"target": target, "rule": rule, "families": wanted,
                     "attributes": names, "budget": budget})
    if result.best is None:
        print("no admissible classifier", file=sys.stderr)
        return EXIT_DATA
    best = result.best
    print("best: %s on %s (Sn %.2f, Sp %.2f)%s"
          % (best.context.get("family"),
             "+".join(best.context.get("subset", ())),
             best.sn, best.sp,
             " [partial search]" if result.partial else ""))
    return EXIT_OK


def cmd_ldtable(args, cfg) -> int:
    out = _out_dir(args, cfg, "ldtable")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    quantified, _ = ensure_quantified(table)
    target = _opt(args, cfg, "target")
    targets = _opt(args, cfg, "targets") or (
        [target] if target else ["cannabis", "ecstasy", "heroin"])
    rule = getattr(args, "rule", None) or cfg.get("rule")
    rules = [rule] if rule else list(RULES)
    names = _opt(args, cfg, "attributes") or [
        n for n in dataset.TEN_ATTRIBUTES if n in quantified.names]
    matrix = _matrix(quantified, names)
    seed = _opt(args, cfg, "seed", 0)
    threads = _opt(args, cfg, "threads", 1)

    header = (["target", "rule"] + ["c_%s" % n for n in names]
              + ["threshold"] + ["sd_%s" % n for n in names]
              + ["whole_sn", "whole_sp", "loocv_sn", "loocv_sp"])
    rows = []
    for tgt in targets:
        for rl in rules:
            vec = _labels_for(records, tgt, rl)
            try:
                model = classify.fit_lda(matrix, vec.labels).normalized()
                result = evaluate.loocv(classify.fit_lda, matrix, vec.labels,
                                        seed=seed, threads=threads,
                                        keep_models=True)
            except (ValueError, RuntimeError) as exc:
                log.warning("skipping %s/%s: %s", tgt, rl, exc)
                continue
            whole = evaluate.report_from_predictions(
                vec.labels, model.predict(matrix))
            fold_weights = np.vstack(
                [m.normalized().weights for m in result.models])
            sds = fold_weights.std(axis=0)
            rows.append([tgt, rl]
                        + [float(w) for w in model.weights]
                        + [float(model.threshold)]
                        + [float(s) for s in sds]
                        + [whole.sn, whole.sp,
                           result.report.sn, result.report.sp])
    artifacts = write_table(out, "ld_coefficients", header, rows)
    _write_manifest(out, "ldtable", [input_info], artifacts, seed,
                    {"targets": targets, "rules": rules, "attributes": names})
    print("fitted linear discriminants for %d target/rule pairs" % len(rows))
    return EXIT_OK


def cmd_pleiades(args, cfg) -> int:
    out = _out_dir(args, cfg, "pleiades")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    rule = _opt(args, cfg, "rule", "decade")
    cuts = _opt(args, cfg, "band_cuts")
    graph = _usage_graph(records, rule, band_cuts=cuts)
    report = pleiades.pleiad_report(graph)
    artifacts = []
    pleiades.export_edges(graph, out / "usage_edges.csv")
    pleiades.export_rigs(graph, out / "usage_rigs.csv")
    artifacts += ["usage_edges.csv", "usage_rigs.csv"]

    rows = []
    flagged = 0
    for name in sorted(report.pair_bands):
        for a, b, r, band, flag in report.pair_bands[name]:
            rows.append([name, a, b, r, band, 1 if flag else 0])
            flagged += int(flag)
    artifacts += write_table(out, "pleiad_pairs",
                             ["pleiad", "a", "b", "r", "band", "flagged"],
                             rows)
    artifacts.append(_write_json(out, "pleiades.json", {
        "rule": report.rule,
        "memberships": {k: sorted(v) for k, v in report.pleiades.items()},
        "intersections": {"%s&%s" % k: sorted(v)
                          for k, v in report.intersections.items()},
        "non_paper_bands": graph.non_paper_bands,
    }))
    _write_manifest(out, "pleiades", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0), {"rule": rule})
    print("pleiad report (%s rule): %d within-group pairs, %d below medium"
          % (rule, len(rows), flagged))
    return EXIT_OK


_CONTRAST_HEADER = [
    "trait",
    "n_a", "mean_a", "sd_a", "ci_low_a", "ci_high_a",
    "n_b", "mean_b", "sd_b", "ci_low_b", "ci_high_b",
    "n_union", "mean_union", "sd_union", "ci_low_union", "ci_high_union",
    "z", "p_percent", "welch_p", "threshold", "ter", "thr",
]


def cmd_contrast(args, cfg) -> int:
    out = _out_dir(args, cfg, "contrast")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    drug_a = _opt(args, cfg, "target", "ecstasy")
    drug_b = _opt(args, cfg, "versus", "heroin")
    rule = _opt(args, cfg, "rule", "decade")
    traits = _opt(args, cfg, "attributes") or _numeric_names(table)
    try:
        contrast = pleiades.contrast_users(table, records, drug_a, drug_b,
                                           rule, traits=traits)
    except ValueError as exc:
        raise DataError(str(exc))
    rows = []
    for tc in contrast.traits:
        rows.append([
            tc.trait,
            tc.a_users.n, tc.a_users.mean, tc.a_users.sd,
            tc.a_users.ci_low, tc.a_users.ci_high,
            tc.b_users.n, tc.b_users.mean, tc.b_users.sd,
            tc.b_users.ci_low, tc.b_users.ci_high,
            tc.union.n, tc.union.mean, tc.union.sd,
            tc.union.ci_low, tc.union.ci_high,
            tc.z, tc.p_percent, tc.welch_p, tc.theta, tc.ter, tc.thr,
        ])
    stem = "contrast_%s_vs_%s_%s" % (drug_a.replace(" ", "_"),
                                     drug_b.replace(" ", "_"), rule)
    artifacts = write_table(out, stem, _CONTRAST_HEADER, rows)
    artifacts.append(_write_json(out, "venn.json", {
        "drug_a": drug_a, "drug_b": drug_b, "rule": rule,
        "a_only": contrast.n_a_only, "b_only": contrast.n_b_only,
        "both": contrast.n_both, "union": contrast.n_union,
    }))
    _write_manifest(out, "contrast", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0),
                    {"target": drug_a, "versus": drug_b, "rule": rule})
    print("contrasted %s vs %s (%s rule): %d/%d exclusive users, %d joint"
          % (drug_a, drug_b, rule, contrast.n_a_only, contrast.n_b_only,
             contrast.n_both))
    return EXIT_OK


def cmd_elasticmap(args, cfg) -> int:
    out = _out_dir(args, cfg, "elasticmap")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    quantified, _ = ensure_quantified(table)
    names = _opt(args, cfg, "attributes") or [
        n for n in dataset.TEN_ATTRIBUTES if n in quantified.names]
    matrix = _matrix(quantified, names)
    rows_n = _opt(args, cfg, "rows", 16)
    cols_n = _opt(args, cfg, "cols", 16)
    resolution = _opt(args, cfg, "resolution", 100)
    grid = maps.build_grid(matrix, rows_n, cols_n)
    fit = maps.fit_map(matrix, grid)
    coords = maps.project(matrix, fit)
    artifacts = []

    node_rows = [[k, float(grid.internal[k, 0]), float(grid.internal[k, 1])]
                 + [float(v) for v in fit.nodes[k]]
                 for k in range(grid.n_nodes)]
    artifacts += write_table(out, "nodes",
                             ["node", "internal_row", "internal_col"]
                             + ["pos_%s" % n for n in names], node_rows)
    proj_rows = [[rid, float(c[0]), float(c[1]), int(h)]
                 for rid, c, h in zip(quantified.ids, coords, fit.hosts)]
    artifacts += write_table(out, "projections",
                             ["respondent_id", "row_coord", "col_coord",
                              "host_node"], proj_rows)
    energy_rows = [[rec.epoch, rec.iteration, rec.stretch, rec.bend,
                    rec.data_term, rec.edge_term, rec.rib_term, rec.total]
                   for rec in fit.trace]
    artifacts += write_table(out, "energy",
                             ["epoch", "iteration", "stretch", "bend",
                              "data_term", "edge_term", "rib_term", "total"],
                             energy_rows)

    density = maps.color(fit, matrix, values=None, resolution=resolution)
    maps.export_raster_csv(density, out / "density_raster.csv")
    maps.export_raster_npy(density, out / "density_raster.npy")
    artifacts += ["density_raster.csv", "density_raster.npy",
                  "density_raster.json"]

    target = _opt(args, cfg, "target")
    if target:
        rule = _opt(args, cfg, "rule", "decade")
        vec = _labels_for(records, target, rule)
        share = maps.color(fit, matrix, values=vec.labels.astype(float),
                           resolution=resolution)
        maps.export_raster_csv(share, out / "user_share_raster.csv")
        maps.export_raster_npy(share, out / "user_share_raster.npy")
        artifacts += ["user_share_raster.csv", "user_share_raster.npy",
                      "user_share_raster.json"]

    _write_manifest(out, "elasticmap", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0),
                    {"rows": rows_n, "cols": cols_n, "attributes": names,
                     "resolution": resolution, "target": target})
    final = fit.trace[-1].total if fit.trace else float("nan")
    print("fitted %dx%d map (final energy %.4g, %sconverged)"
          % (rows_n, cols_n, final, "" if fit.converged else "NOT "))
    return EXIT_OK


def cmd_riskmap(args, cfg) -> int:
    out = _out_dir(args, cfg, "riskmap")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    quantified, _ = ensure_quantified(table)
    target = _opt(args, cfg, "target")
    if target is None:
        raise DataError("no target given: pass --target")
    rule = _opt(args, cfg, "rule", "decade")
    axes = _opt(args, cfg, "axes") or ["Age", "SS"]
    if len(axes) not in (1, 2):
        raise DataError("risk maps take one or two axes, got %d" % len(axes))
    resolution = _opt(args, cfg, "resolution", 16)
    vec = _labels_for(records, target, rule)
    coords = _matrix(quantified, axes)
    try:
        surface = maps.risk_surface(coords, vec.labels,
                                    resolution=resolution)
    except ValueError as exc:
        raise DataError(str(exc))
    artifacts = []
    if surface.ys is None:
        rows = [[float(x), float(r)] for x, r in zip(surface.xs,
                                                     surface.rho)]
        artifacts += write_table(out, "risk_profile",
                                 [axes[0], "user_probability"], rows)
    else:
        raster = surface.to_raster()
        maps.export_raster_csv(raster, out / "risk_raster.csv")
        maps.export_raster_npy(raster, out / "risk_raster.npy")
        artifacts += ["risk_raster.csv", "risk_raster.npy",
                      "risk_raster.json"]
    artifacts.append(_write_json(out, "risk_model.json",
                                 serialize_model(surface.model, axes)))
    _write_manifest(out, "riskmap", [input_info], artifacts,
                    _opt(args, cfg, "seed", 0),
                    {"target": target, "rule": rule, "axes": axes,
                     "resolution": resolution})
    print("risk surface for %s/%s over %s (%d users, %d non-users)"
          % (target, rule, "x".join(axes), surface.model.n_user,
             surface.model.n_non))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bundled report and verification


# Published benchmark values used by `report --verify`: user counts per
# substance under the four recency rules, and per named drug group.
PUBLISHED_USER_COUNTS = {
    "alcohol": (1817, 1749, 1551, 1264),
    "amphetamines": (679, 436, 238, 163),
    "amyl nitrite": (370, 133, 41, 17),
    "benzodiazepines": (769, 535, 299, 179),
    "cannabis": (1265, 999, 788, 648),
    "chocolate": (1850, 1840, 1786, 1490),
    "cocaine": (687, 417, 159, 60),
    "caffeine": (1848, 1824, 1764, 1658),
    "crack": (191, 79, 20, 11),
    "ecstasy": (751, 517, 240, 84),
    "heroin": (212, 118, 53, 29),
    "ketamine": (350, 208, 79, 37),
    "legal highs": (762, 564, 241, 131),
    "LSD": (557, 380, 166, 69),
    "methadone": (417, 320, 171, 121),
    "magic mushrooms": (694, 434, 159, 44),
    "nicotine": (1264, 1060, 875, 767),
    "VSA": (230, 95, 34, 21),
}
PUBLISHED_GROUP_COUNTS = {
    "heroinPl": (832, 585, 309, 184),
    "ecstasyPl": (1317, 1089, 921, 792),
    "benzoPl": (1089, 830, 528, 363),
}


def _check_counts(records):
    mismatches = []
    for target, expected in list(PUBLISHED_USER_COUNTS.items()) + \
            list(PUBLISHED_GROUP_COUNTS.items()):
        for rule, want in zip(RULES, expected):
            got = _labels_for(records, target, rule).user_count
            if got != want:
                mismatches.append("%s/%s: %d != %d"
                                  % (target, rule, got, want))
    if mismatches:
        return ("fail", "%d mismatches, first: %s"
                % (len(mismatches), mismatches[0]))
    return ("pass", "all 21 targets x 4 rules exact")


def _check_trait_pcc(table):
    for name in ("N", "E"):
        if name not in table.names:
            return ("skip", "trait columns N and E not present")
    n = table.matrix(["N"])[:, 0]
    e = table.matrix(["E"])[:, 0]
    r, _ = stats.pcc(n, e)
    if abs(r - (-0.432)) <= 0.005:
        return ("pass", "N-E r = %.4f" % r)
    return ("fail", "N-E r = %.4f, expected -0.432 +- 0.005" % r)


def _check_usage_pcc(records):
    graph = _usage_graph(records, "decade")
    problems = []
    for a, b, want in (("cannabis", "nicotine", 0.533),
                       ("LSD", "magic mushrooms", 0.680)):
        got = graph.edge(a, b).r
        if abs(got - want) > 0.005:
            problems.append("%s-%s r = %.4f != %.3f" % (a, b, got, want))
    pvals = [graph.edges[key].p for key in sorted(graph.edges)]
    n_bonf = int(np.sum(stats.multiple_testing(pvals, 0.05, "bonferroni")))
    n_bh = int(np.sum(stats.multiple_testing(pvals, 0.05, "bh")))
    if n_bonf != 115:
        problems.append("bonferroni count %d != 115" % n_bonf)
    if n_bh != 127:
        problems.append("bh count %d != 127" % n_bh)
    if problems:
        return ("fail", "; ".join(problems))
    return ("pass", "spot correlations and 115/127 significance counts")


def _check_condition(table):
    quantified, entries = ensure_quantified(table)
    tol = 0.01 if not entries else 0.05
    problems = []
    traits = [n for n in dataset.TRAITS if n in quantified.names]
    tens = [n for n in dataset.TEN_ATTRIBUTES if n in quantified.names]
    if len(traits) == len(dataset.TRAITS):
        kappa = stats.condition_number(quantified.matrix(traits))
        if abs(kappa - 6.628) > tol:
            problems.append("7-trait kappa %.3f != 6.628 +- %.2f"
                            % (kappa, tol))
    if len(tens) == len(dataset.TEN_ATTRIBUTES):
        kappa = stats.condition_number(quantified.matrix(tens))
        if abs(kappa - 7.945) > tol:
            problems.append("10-attribute kappa %.3f != 7.945 +- %.2f"
                            % (kappa, tol))
    if problems:
        return ("fail", "; ".join(problems))
    return ("pass", "condition numbers within +- %.2f" % tol)


def _check_raw_describe(table, records):
    vec = dataset.label_group(records, "illicit", "decade")
    problems = []
    n_col = table.matrix(["N"])[:, 0]
    d_all = stats.describe(n_col)
    if abs(d_all.mean - 23.92) > 0.01 or abs(d_all.sd - 9.14) > 0.01:
        problems.append("N total %.3f/%.3f != 23.92/9.14"
                        % (d_all.mean, d_all.sd))
    ss = table.matrix(["SS"])[:, 0]
    d_users = stats.describe(ss[vec.labels])
    if abs(d_users.mean - 6.15) > 0.01 or abs(d_users.sd - 2.55) > 0.01:
        problems.append("SS users %.3f/%.3f != 6.15/2.55"
                        % (d_users.mean, d_users.sd))
    for name, theta, sn, sp in (("SS", 4, 63, 74), ("O", 32, 63, 67)):
        rule = classify.one_feature_classifier(
            table.matrix([name])[:, 0], vec.labels)
        if rule.threshold != theta:
            problems.append("%s threshold %.0f != %d"
                            % (name, rule.threshold, theta))
        if abs(rule.sn - sn) > 1.0 or abs(rule.sp - sp) > 1.0:
            problems.append("%s Sn/Sp %.1f/%.1f != %d/%d"
                            % (name, rule.sn, rule.sp, sn, sp))
    if problems:
        return ("fail", "; ".join(problems))
    return ("pass", "descriptives and single-attribute rules")


def _check_raw_contrast(table, records):
    contrast = pleiades.contrast_users(table, records, "ecstasy", "heroin",
                                       "decade", traits=["N"])
    tc = contrast.trait("N")
    problems = []
    if tc.theta != 27:
        problems.append("threshold %.0f != 27" % tc.theta)
    if abs(tc.ter - 65) > 1.0 or abs(tc.thr - 61) > 1.0:
        problems.append("TER/THR %.1f/%.1f != 65/61" % (tc.ter, tc.thr))
    if abs(tc.a_users.mean - 25.06) > 0.01:
        problems.append("mean over ecstasy users %.3f != 25.06"
                        % tc.a_users.mean)
    if abs(tc.b_users.mean - 28.06) > 0.01:
        problems.append("mean over heroin users %.3f != 28.06"
                        % tc.b_users.mean)
    if abs(tc.z - 0.154) > 0.002:
        problems.append("z %.4f != 0.154 +- 0.002" % tc.z)
    if problems:
        return ("fail", "; ".join(problems))
    return ("pass", "cross-user contrast on trait N")


def cmd_report(args, cfg) -> int:
    out = _out_dir(args, cfg, "report")
    table, records, input_info = _load_data(_opt(args, cfg, "data"))
    inputs = [input_info]
    raw_path = _opt(args, cfg, "raw_data")
    raw_table = raw_records = None
    if raw_path:
        raw_table, raw_records, raw_info = _load_data(raw_path)
        inputs.append(raw_info)
    seed = _opt(args, cfg, "seed", 0)
    artifacts = []

    header = ["target"]
    for rule in RULES:
        header += ["%s_users" % rule, "%s_fraction" % rule]
    rows = []
    for target in ALL_TARGETS:
        row = [target]
        for rule in RULES:
            vec = _labels_for(records, target, rule)
            row += [vec.user_count, round(100.0 * vec.user_fraction, 2)]
        rows.append(row)
    artifacts += write_table(out, "user_counts", header, rows)

    vec = _labels_for(records, "illicit", "decade")
    artifacts += write_table(out, "describe_illicit_decade",
                             _DESCRIBE_HEADER,
                             _describe_rows(table, vec.labels,
                                            _numeric_names(table)))

    graph = _usage_graph(records, "decade")
    pleiades.export_edges(graph, out / "usage_edges.csv")
    artifacts.append("usage_edges.csv")
    preport = pleiades.pleiad_report(graph)
    artifacts.append(_write_json(out, "pleiades.json", {
        "rule": preport.rule,
        "memberships": {k: sorted(v) for k, v in preport.pleiades.items()},
        "intersections": {"%s&%s" % k: sorted(v)
                          for k, v in preport.intersections.items()},
    }))

    if not args.verify:
        _write_manifest(out, "report", inputs, artifacts, seed)
        print("report bundle written to %s" % out)
        return EXIT_OK

    checks = [
        ("label-counts", _check_counts(records)),
        ("trait-correlation", _check_trait_pcc(table)),
        ("usage-correlations", _check_usage_pcc(records)),
        ("condition-numbers", _check_condition(table)),
    ]
    if raw_table is not None:
        checks.append(("raw-descriptives",
                       _check_raw_describe(raw_table, raw_records)))
        checks.append(("raw-contrast",
                       _check_raw_contrast(raw_table, raw_records)))
    else:
        reason = "raw categorical export not provided (--raw-data)"
        checks.append(("raw-descriptives", ("skip", reason)))
        checks.append(("raw-contrast", ("skip", reason)))

    failed = 0
    lines = []
    for name, (status, detail) in checks:
        lines.append({"check": name, "status": status, "detail": detail})
        print("%s %s: %s" % (status.upper(), name, detail))
        failed += int(status == "fail")
    artifacts.append(_write_json(out, "verification.json", lines))
    _write_manifest(out, "report", inputs, artifacts, seed,
                    {"verify": True})
    if failed:
        print("%d verification check(s) failed" % failed, file=sys.stderr)
        return EXIT_VERIFY
    print("all verification checks passed (skips listed above)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# wiring


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map usage errors to exit code 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "%s: error: %s\n" % (self.prog, message))


def _add_common(sub):
    sub.add_argument("--data", help="survey CSV (raw or pre-quantified)")
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--seed", type=int, help="global random seed")
    sub.add_argument("--threads", type=int, help="worker threads")
    sub.add_argument("--rule", choices=RULES, help="recency rule")
    sub.add_argument("--target", help="drug or drug-group name")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="druguse",
                     description="survey analysis and classification "
                                 "pipeline")
    parser.add_argument("--version", action="version", version=VERSION)
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress to stderr")
    subs = parser.add_subparsers(dest="command", metavar="subcommand")

    specs = {
        "ingest": "load, validate, and label the survey",
        "quantize": "replace raw categories with numeric values",
        "describe": "per-attribute user/non-user statistics",
        "correlate": "attribute and usage correlation tables",
        "rank": "attribute ranking and condition numbers",
        "train": "fit one classifier on the whole sample",
        "loocv": "leave-one-out evaluation of one classifier",
        "search": "attribute-subset search across families",
        "ldtable": "linear discriminant coefficient tables",
        "pleiades": "drug-group correlation report",
        "contrast": "trait contrast between two drugs' users",
        "elasticmap": "elastic-map projection and rasters",
        "riskmap": "bi-Gaussian risk surface",
        "report": "bundle the main tables (--verify checks goldens)",
    }
    parsers = {}
    for name, help_text in specs.items():
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        parsers[name] = sub

    parsers["ingest"].add_argument("--drop-invalid", action="store_true",
                                   help="drop fictitious-substance claims")
    parsers["search"].add_argument("--families", nargs="+",
                                   help="classifier families to try")
    parsers["search"].add_argument("--budget", type=float,
                                   help="time budget in seconds")
    parsers["ldtable"].add_argument("--targets", nargs="+",
                                    help="drugs/groups to tabulate")
    parsers["contrast"].add_argument("--versus",
                                     help="second drug of the contrast")
    parsers["train"].add_argument("--family", help="classifier family")
    parsers["loocv"].add_argument("--family", help="classifier family")
    parsers["elasticmap"].add_argument("--rows", type=int)
    parsers["elasticmap"].add_argument("--cols", type=int)
    parsers["elasticmap"].add_argument("--resolution", type=int)
    parsers["riskmap"].add_argument("--axes", nargs="+",
                                    help="one or two attribute names")
    parsers["riskmap"].add_argument("--resolution", type=int)
    for name in ("describe", "correlate", "rank", "train", "loocv",
                 "search", "ldtable", "contrast", "elasticmap"):
        parsers[name].add_argument("--attributes", nargs="+",
                                   help="attribute columns to use")
    parsers["report"].add_argument("--raw-data", dest="raw_data",
                                   help="raw categorical export for the "
                                        "raw-scale golden checks")
    parsers["report"].add_argument("--verify", action="store_true",
                                   help="check published benchmark values; "
                                        "exit 3 on failure")
    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "quantize": cmd_quantize,
    "describe": cmd_describe,
    "correlate": cmd_correlate,
    "rank": cmd_rank,
    "train": cmd_train,
    "loocv": cmd_loocv,
    "search": cmd_search,
    "ldtable": cmd_ldtable,
    "pleiades": cmd_pleiades,
    "contrast": cmd_contrast,
    "elasticmap": cmd_elasticmap,
    "riskmap": cmd_riskmap,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config) if args.config else {}
        seed = _opt(args, cfg, "seed", 0)
        if not (0 <= seed < 2 ** 64):
            raise ConfigError("config: field 'seed' must fit in 64 bits")
        return _HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
