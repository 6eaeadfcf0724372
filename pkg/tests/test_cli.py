"""End-to-end checks of the command-line pipeline.

Each test drives ``cli.main`` in-process against a synthetic survey
whose substance columns are generated from known boolean masks, so
user counts, venn sizes, and descriptive statistics can be recomputed
independently with numpy. These tests pin the artifact contracts
(CSV + Markdown table pairs, manifest layout, byte-identical reruns)
and the exit-code mapping; numeric behavior of the underlying
routines has its own per-module suites.
"""

import csv
import hashlib
import json
import math

import numpy as np
import pytest

from druguse import cli, dataset

TRAITS = ["Age", "Edu", "N", "E", "O", "A", "C", "Imp", "SS", "Gndr"]
N_ROWS = 60
RULE_CUT = {"decade": 2, "year": 3, "month": 4, "week": 5}
ALL_TARGETS = list(dataset.DRUGS) + list(dataset.GROUPS)


# ---------------------------------------------------------------------------
# synthetic survey: usage built from masks the tests can recompute


def survey_arrays(n=N_ROWS, seed=11):
    """Trait columns plus per-drug recency classes with planted structure."""
    rng = np.random.default_rng(seed)
    traits = {name: np.round(rng.normal(0.0, 1.0, n), 6) for name in TRAITS}
    users = {}
    # cannabis use follows SS + O so classifiers have a real signal
    latent = traits["SS"] + traits["O"] + 0.6 * rng.normal(size=n)
    users["cannabis"] = latent > np.median(latent)
    ecstasy = np.zeros(n, dtype=bool)
    ecstasy[:20] = True
    heroin = np.zeros(n, dtype=bool)
    heroin[15:27] = True
    users["ecstasy"] = ecstasy
    users["heroin"] = heroin
    rest = [d for d in dataset.DRUGS if d not in users]
    for i, drug in enumerate(rest):
        users[drug] = (np.arange(n) + i) % 4 == 0
    idx = np.arange(n)
    classes = {}
    for drug in dataset.DRUGS:
        classes[drug] = np.where(users[drug], 2 + idx % 5, idx % 2)
    # keep the last ten rows free of every illicit substance so broad
    # group targets retain non-users as well
    clean = idx >= n - 10
    for drug in dataset.GROUPS["illicit"].members:
        classes[drug] = np.where(clean, idx % 2, classes[drug])
    return traits, classes


def survey_text(traits, classes, claims=()):
    header = ["ID"] + TRAITS + list(dataset.DRUGS) + [dataset.SEMERON]
    lines = [",".join(header)]
    n = len(traits[TRAITS[0]])
    for i in range(n):
        row = ["r%02d" % (i + 1)]
        row += [repr(float(traits[t][i])) for t in TRAITS]
        row += ["CL%d" % classes[d][i] for d in dataset.DRUGS]
        row.append("CL2" if i in claims else "CL0")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def user_mask(classes, target, rule):
    cut = RULE_CUT[rule]
    if target in dataset.GROUPS:
        mask = np.zeros(N_ROWS, dtype=bool)
        for member in dataset.GROUPS[target].members:
            mask |= classes[member] >= cut
        return mask
    return classes[target] >= cut


@pytest.fixture(scope="module")
def arrays():
    return survey_arrays()


@pytest.fixture(scope="module")
def survey_csv(arrays, tmp_path_factory):
    traits, classes = arrays
    path = tmp_path_factory.mktemp("cli-data") / "survey.csv"
    path.write_text(survey_text(traits, classes), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def claims_csv(arrays, tmp_path_factory):
    traits, classes = arrays
    path = tmp_path_factory.mktemp("cli-claims") / "survey_claims.csv"
    path.write_text(survey_text(traits, classes, claims=(3, 7)),
                    encoding="utf-8")
    return path


RAW_TEXT = """\
ID,Age,N,Country,cannabis,heroin,semeron
x01,18-24,10,UK,CL3,CL2,CL0
x02,18-24,11,UK,CL0,CL2,CL0
x03,18-24,12,UK,CL3,CL2,CL0
x04,18-24,13,UK,CL0,CL0,CL0
x05,18-24,14,UK,CL3,CL0,CL0
x06,25-34,15,UK,CL0,CL0,CL0
x07,25-34,16,USA,CL3,CL0,CL0
x08,25-34,17,USA,CL0,CL0,CL0
x09,25-34,18,USA,CL3,CL0,CL0
x10,35-44,19,USA,CL0,CL0,CL0
x11,35-44,20,Other,CL3,CL0,CL0
x12,35-44,21,Other,CL0,CL0,CL0
"""


@pytest.fixture(scope="module")
def raw_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli-raw") / "raw.csv"
    path.write_text(RAW_TEXT, encoding="utf-8")
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    return rows[0], rows[1:]


def read_json(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


# ---------------------------------------------------------------------------
# exit codes and argument plumbing


def test_no_subcommand_prints_usage(capsys):
    assert cli.main([]) == 1
    assert "usage:" in capsys.readouterr().err


def test_unknown_subcommand_is_a_usage_error(capsys):
    assert cli.main(["frobnicate"]) == 1
    assert "error" in capsys.readouterr().err


def test_version_flag_exits_cleanly(capsys):
    assert cli.main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == cli.VERSION


def test_missing_data_is_a_data_error(tmp_path, capsys):
    code = cli.main(["describe", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "no dataset given" in capsys.readouterr().err


def test_nonexistent_data_file_is_a_data_error(tmp_path, capsys):
    code = cli.main(["describe", "--data", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path / "o")])
    assert code == 2


def test_train_without_target_is_a_data_error(survey_csv, tmp_path, capsys):
    code = cli.main(["train", "--data", str(survey_csv),
                     "--out", str(tmp_path / "o")])
    assert code == 2
    assert "no target given" in capsys.readouterr().err


def test_unknown_family_is_a_usage_error(survey_csv, tmp_path, capsys):
    code = cli.main(["train", "--data", str(survey_csv), "--target",
                     "cannabis", "--family", "perceptron",
                     "--out", str(tmp_path / "o")])
    assert code == 1
    assert "unknown classifier family" in capsys.readouterr().err


def test_unknown_target_is_a_data_error(survey_csv, tmp_path, capsys):
    code = cli.main(["describe", "--data", str(survey_csv),
                     "--target", "zubrowka", "--out", str(tmp_path / "o")])
    assert code == 2
    assert "unknown drug" in capsys.readouterr().err


def test_oversized_seed_is_a_usage_error(survey_csv, tmp_path, capsys):
    code = cli.main(["ingest", "--data", str(survey_csv),
                     "--seed", str(2 ** 64), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "64 bits" in capsys.readouterr().err


def test_riskmap_rejects_three_axes(survey_csv, tmp_path, capsys):
    code = cli.main(["riskmap", "--data", str(survey_csv), "--target",
                     "cannabis", "--axes", "N", "E", "O",
                     "--out", str(tmp_path / "o")])
    assert code == 2
    assert "one or two axes" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# config file handling


def test_config_schema_violations():
    with pytest.raises(cli.ConfigError, match="unknown field"):
        cli.validate_config({"bogus": 1})
    with pytest.raises(cli.ConfigError, match="must be int"):
        cli.validate_config({"seed": "zero"})
    with pytest.raises(cli.ConfigError, match="must be a list"):
        cli.validate_config({"attributes": "SS"})
    with pytest.raises(cli.ConfigError, match=r"'attributes\[1\]'"):
        cli.validate_config({"attributes": ["SS", 3]})
    with pytest.raises(cli.ConfigError, match="rule"):
        cli.validate_config({"rule": "century"})
    with pytest.raises(cli.ConfigError, match="exactly 3"):
        cli.validate_config({"band_cuts": [0.4, 0.5]})
    with pytest.raises(cli.ConfigError, match="64 bits"):
        cli.validate_config({"seed": -1})
    with pytest.raises(cli.ConfigError, match="top level"):
        cli.validate_config(["seed"])
    # booleans must not pass as ints or floats
    with pytest.raises(cli.ConfigError, match="must be int"):
        cli.validate_config({"threads": True})


def test_bad_config_files_are_usage_errors(survey_csv, tmp_path, capsys):
    bad_json = tmp_path / "broken.json"
    bad_json.write_text("{not json", encoding="utf-8")
    code = cli.main(["ingest", "--data", str(survey_csv),
                     "--config", str(bad_json),
                     "--out", str(tmp_path / "o1")])
    assert code == 1
    assert "not valid JSON" in capsys.readouterr().err

    bad_field = tmp_path / "field.json"
    bad_field.write_text(json.dumps({"grid": 5}), encoding="utf-8")
    code = cli.main(["ingest", "--data", str(survey_csv),
                     "--config", str(bad_field),
                     "--out", str(tmp_path / "o2")])
    assert code == 1
    assert "unknown field" in capsys.readouterr().err

    code = cli.main(["ingest", "--data", str(survey_csv),
                     "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "o3")])
    assert code == 1


def test_flags_override_config(survey_csv, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "data": str(survey_csv), "target": "cannabis", "rule": "year",
    }), encoding="utf-8")
    out = tmp_path / "out"
    code = cli.main(["describe", "--config", str(config), "--rule", "month",
                     "--out", str(out)])
    assert code == 0
    # target came from the config, the rule from the flag
    assert (out / "describe_cannabis_month.csv").exists()
    assert not (out / "describe_cannabis_year.csv").exists()


def test_config_alone_can_supply_the_dataset(survey_csv, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"data": str(survey_csv)}),
                      encoding="utf-8")
    out = tmp_path / "out"
    assert cli.main(["describe", "--config", str(config),
                     "--out", str(out)]) == 0
    assert (out / "describe_illicit_decade.csv").exists()


# ---------------------------------------------------------------------------
# ingest


def test_ingest_counts_match_the_planted_masks(arrays, survey_csv, tmp_path):
    _, classes = arrays
    out = tmp_path / "out"
    assert cli.main(["ingest", "--data", str(survey_csv), "--seed", "7",
                     "--out", str(out)]) == 0

    header, rows = read_csv(out / "user_counts.csv")
    assert header[0] == "target"
    assert len(rows) == len(ALL_TARGETS)
    by_target = {row[0]: row[1:] for row in rows}
    for target in ALL_TARGETS:
        cells = by_target[target]
        for k, rule in enumerate(("decade", "year", "month", "week")):
            want = int(np.sum(user_mask(classes, target, rule)))
            assert int(cells[2 * k]) == want
            assert float(cells[2 * k + 1]) == round(100.0 * want / N_ROWS, 2)
        counts = [int(cells[2 * k]) for k in range(4)]
        assert counts[0] >= counts[1] >= counts[2] >= counts[3]

    header, rows = read_csv(out / "labels.csv")
    assert header == ["respondent_id", "drug", "rule", "label"]
    assert len(rows) == len(dataset.DRUGS) * 4 * N_ROWS

    validation = read_json(out / "validation.json")
    assert validation["n_rows"] == N_ROWS
    assert validation["semeron_claims"] == 0
    assert validation["semeron_ids"] == []


def test_ingest_manifest_records_inputs_and_artifacts(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["ingest", "--data", str(survey_csv), "--seed", "7",
                     "--out", str(out)]) == 0
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "ingest"
    assert manifest["version"] == cli.VERSION
    assert manifest["seed"] == 7
    assert "T" in manifest["created"]
    digest = hashlib.sha256(survey_csv.read_bytes()).hexdigest()
    assert manifest["inputs"] == [{"path": str(survey_csv),
                                   "sha256": digest}]
    assert manifest["artifacts"] == sorted(manifest["artifacts"])
    on_disk = sorted(p.name for p in out.iterdir()
                     if p.name != "manifest.json")
    assert manifest["artifacts"] == on_disk


def test_ingest_drop_invalid_removes_claimants(claims_csv, tmp_path, capsys):
    out = tmp_path / "kept"
    assert cli.main(["ingest", "--data", str(claims_csv),
                     "--out", str(out)]) == 0
    capsys.readouterr()
    validation = read_json(out / "validation.json")
    assert validation["semeron_claims"] == 2
    assert validation["semeron_ids"] == ["r04", "r08"]

    out2 = tmp_path / "dropped"
    assert cli.main(["ingest", "--data", str(claims_csv), "--drop-invalid",
                     "--out", str(out2)]) == 0
    stdout = capsys.readouterr().out
    assert "dropped 2 rows" in stdout
    validation = read_json(out2 / "validation.json")
    assert validation["semeron_claims"] == 0
    assert validation["n_rows"] == N_ROWS - 2
    _, rows = read_csv(out2 / "labels.csv")
    assert len(rows) == len(dataset.DRUGS) * 4 * (N_ROWS - 2)


# ---------------------------------------------------------------------------
# quantize


def test_quantize_passes_numeric_data_through(survey_csv, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["quantize", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    assert "already quantified" in capsys.readouterr().out
    assert read_json(out / "quantization_map.json") == []
    header, rows = read_csv(out / "quantified.csv")
    assert len(rows) == N_ROWS


def test_quantize_raw_columns_then_roundtrip(raw_csv, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["quantize", "--data", str(raw_csv),
                     "--out", str(out)]) == 0
    entries = read_json(out / "quantization_map.json")
    assert {e["attribute"] for e in entries} == {"Age", "N", "Country"}
    age = next(e for e in entries if e["attribute"] == "Age")
    assert [c["label"] for c in age["categories"]] == \
        ["18-24", "25-34", "35-44"]
    assert all(math.isfinite(c["value"]) for e in entries
               for c in e["categories"])

    # the written table must reload as fully quantified
    out2 = tmp_path / "again"
    capsys.readouterr()
    assert cli.main(["quantize", "--data", str(out / "quantified.csv"),
                     "--out", str(out2)]) == 0
    assert "already quantified" in capsys.readouterr().out
    assert read_json(out2 / "quantization_map.json") == []


# ---------------------------------------------------------------------------
# describe


def test_describe_statistics_match_numpy(arrays, survey_csv, tmp_path):
    traits, classes = arrays
    out = tmp_path / "out"
    assert cli.main(["describe", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "describe_illicit_decade.csv")
    assert header == cli._DESCRIBE_HEADER
    assert [row[0] for row in rows] == TRAITS

    labels = user_mask(classes, "illicit", "decade")
    ss_row = dict(zip(header, next(r for r in rows if r[0] == "SS")))
    assert int(ss_row["n_users"]) == int(labels.sum())
    assert math.isclose(float(ss_row["mean_users"]),
                        float(np.mean(traits["SS"][labels])), rel_tol=1e-9)
    assert math.isclose(float(ss_row["mean_non"]),
                        float(np.mean(traits["SS"][~labels])), rel_tol=1e-9)
    assert math.isclose(float(ss_row["mean_all"]),
                        float(np.mean(traits["SS"])), rel_tol=1e-9)
    assert ss_row["user_side"] in ("greater", "less")
    assert 0.0 <= float(ss_row["sn"]) <= 100.0

    with open(out / "describe_illicit_decade.md", encoding="utf-8") as handle:
        md_lines = handle.read().splitlines()
    assert len(md_lines) == len(rows) + 2


def test_describe_stem_replaces_spaces(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["describe", "--data", str(survey_csv),
                     "--target", "legal highs", "--rule", "year",
                     "--out", str(out)]) == 0
    assert (out / "describe_legal_highs_year.csv").exists()


# ---------------------------------------------------------------------------
# correlate and rank


def test_correlate_pairs_and_significance(arrays, survey_csv, tmp_path):
    traits, _ = arrays
    out = tmp_path / "out"
    assert cli.main(["correlate", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "attribute_pcc.csv")
    assert header == ["a", "b", "r", "p"]
    assert len(rows) == 45  # C(10, 2) trait pairs
    ne = next(r for r in rows if r[0] == "N" and r[1] == "E")
    want = float(np.corrcoef(traits["N"], traits["E"])[0, 1])
    assert math.isclose(float(ne[2]), want, rel_tol=0, abs_tol=1e-12)

    header, rows = read_csv(out / "usage_edges.csv")
    assert header == ["drugA", "drugB", "r", "p", "band"]
    assert len(rows) == 153  # C(18, 2) drug pairs
    _, rig_rows = read_csv(out / "usage_rigs.csv")
    assert len(rig_rows) == 18 * 17

    sig = read_json(out / "significance.json")
    assert sig["pairs"] == 153
    assert 0 <= sig["bonferroni_significant"] <= sig["bh_significant"] <= 153

    dot = (out / "usage_graph.dot").read_text(encoding="utf-8")
    assert dot.startswith("graph")
    rig_dot = (out / "usage_rig.dot").read_text(encoding="utf-8")
    assert rig_dot.startswith("digraph")


def test_rank_artifacts(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["rank", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "components.csv")
    assert header == ["component", "eigenvalue", "fve", "retained"]
    assert len(rows) == 10
    assert math.isclose(sum(float(r[2]) for r in rows), 1.0, rel_tol=1e-9)
    assert all(r[3] in ("0", "1") for r in rows)

    _, pv_rows = read_csv(out / "principal_variables.csv")
    assert len(pv_rows) == 10
    assert math.isclose(float(pv_rows[-1][3]), 1.0, rel_tol=1e-9)

    condition = read_json(out / "condition.json")
    assert set(condition) == {"traits7", "attributes10"}
    assert all(v >= 1.0 for v in condition.values())
    summary = read_json(out / "sparse_summary.json")
    assert set(summary) == {"trivial", "retained", "kaiser_bound"}


# ---------------------------------------------------------------------------
# train / loocv / search / ldtable


def test_train_writes_model_and_report(arrays, survey_csv, tmp_path):
    _, classes = arrays
    out = tmp_path / "out"
    assert cli.main(["train", "--data", str(survey_csv), "--target",
                     "cannabis", "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["mode"] == "whole-sample"
    assert report["context"]["family"] == "linear-discriminant"
    assert report["tp"] + report["tn"] + report["fp"] + report["fn"] == N_ROWS
    users = int(user_mask(classes, "cannabis", "decade").sum())
    assert report["tp"] + report["fn"] == users

    model = read_json(out / "model.json")
    assert model["family"] == "linear-discriminant"
    assert model["attributes"] == TRAITS
    assert len(model["coefficients"]) == 10
    assert math.isfinite(model["threshold"])


def test_train_resolves_family_aliases(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["train", "--data", str(survey_csv), "--target",
                     "cannabis", "--family", "dt", "--out", str(out)]) == 0
    model = read_json(out / "model.json")
    assert model["family"] == "decision-tree"
    assert "root" in model


def test_loocv_reruns_are_byte_identical(arrays, survey_csv, tmp_path):
    _, classes = arrays
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert cli.main(["loocv", "--data", str(survey_csv), "--target",
                         "cannabis", "--seed", "42",
                         "--out", str(out)]) == 0
    for name in ("predictions.csv", "predictions.md", "report.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    manifests = [read_json(out / "manifest.json") for out in outs]
    for manifest in manifests:
        manifest.pop("created")
    assert manifests[0] == manifests[1]

    header, rows = read_csv(outs[0] / "predictions.csv")
    assert header == ["respondent_id", "label", "prediction"]
    assert len(rows) == N_ROWS
    truth = user_mask(classes, "cannabis", "decade")
    assert [int(r[1]) for r in rows] == [int(v) for v in truth]
    report = read_json(outs[0] / "report.json")
    assert report["mode"] == "loocv"
    assert report["tp"] + report["fn"] == int(truth.sum())


def test_loocv_reads_family_settings_from_config(survey_csv, tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"n_trees": 5, "min_leaf": 5}),
                      encoding="utf-8")
    out = tmp_path / "out"
    assert cli.main(["loocv", "--data", str(survey_csv), "--target",
                     "cannabis", "--family", "rf", "--config", str(config),
                     "--seed", "3", "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["context"]["family"] == "random-forest"


def test_search_finds_an_admissible_subset(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["search", "--data", str(survey_csv), "--target",
                     "cannabis", "--attributes", "SS", "O", "N",
                     "--families", "lda", "knn", "--seed", "1",
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "search_results.csv")
    assert header == ["family", "SS", "O", "N", "sn", "sp", "sum"]
    assert len(rows) == 14  # 7 subsets x 2 families
    summary = read_json(out / "search_summary.json")
    assert summary["evaluated"] == 14
    assert summary["partial"] is False
    best = summary["best"]
    assert best is not None
    assert min(best["sn"], best["sp"]) >= 50.0
    assert best["context"]["family"] in ("linear-discriminant",
                                         "nearest-neighbours")
    assert set(best["context"]["subset"]) <= {"SS", "O", "N"}


def test_search_with_zero_budget_reports_no_winner(survey_csv, tmp_path,
                                                   capsys):
    out = tmp_path / "out"
    code = cli.main(["search", "--data", str(survey_csv), "--target",
                     "cannabis", "--attributes", "SS", "O",
                     "--budget", "0", "--out", str(out)])
    assert code == 2
    assert "no admissible classifier" in capsys.readouterr().err
    summary = read_json(out / "search_summary.json")
    assert summary["partial"] is True
    assert summary["evaluated"] == 0
    assert summary["best"] is None


def test_ldtable_rows_are_unit_normalized(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["ldtable", "--data", str(survey_csv), "--targets",
                     "cannabis", "--rule", "decade",
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "ld_coefficients.csv")
    assert header == (["target", "rule"] + ["c_%s" % n for n in TRAITS]
                      + ["threshold"] + ["sd_%s" % n for n in TRAITS]
                      + ["whole_sn", "whole_sp", "loocv_sn", "loocv_sp"])
    assert len(rows) == 1
    row = dict(zip(header, rows[0]))
    assert row["target"] == "cannabis"
    norm = sum(float(row["c_%s" % n]) ** 2 for n in TRAITS)
    assert math.isclose(norm, 1.0, rel_tol=1e-9)
    assert all(float(row["sd_%s" % n]) >= 0.0 for n in TRAITS)
    for col in ("whole_sn", "whole_sp", "loocv_sn", "loocv_sp"):
        assert 0.0 <= float(row[col]) <= 100.0


# ---------------------------------------------------------------------------
# pleiades / contrast


def test_pleiades_reports_all_group_pairs(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["pleiades", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "pleiad_pairs.csv")
    assert header == ["pleiad", "a", "b", "r", "band", "flagged"]
    # C(4,2) + C(8,2) + C(4,2) pairs over the three named pleiades
    assert len(rows) == 6 + 28 + 6
    payload = read_json(out / "pleiades.json")
    assert set(payload["memberships"]) == {"heroinPl", "ecstasyPl",
                                           "benzoPl"}
    assert payload["non_paper_bands"] is False
    for name, members in payload["memberships"].items():
        assert members == sorted(dataset.GROUPS[name].members)


def test_pleiades_month_rule_flags_borrowed_cuts(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["pleiades", "--data", str(survey_csv), "--rule",
                     "month", "--out", str(out)]) == 0
    assert read_json(out / "pleiades.json")["non_paper_bands"] is True


def test_contrast_venn_matches_planted_masks(arrays, survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["contrast", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    venn = read_json(out / "venn.json")
    # ecstasy users are rows 0..19, heroin users rows 15..26
    assert venn == {"drug_a": "ecstasy", "drug_b": "heroin",
                    "rule": "decade", "a_only": 15, "b_only": 7,
                    "both": 5, "union": 27}
    header, rows = read_csv(out / "contrast_ecstasy_vs_heroin_decade.csv")
    assert header == cli._CONTRAST_HEADER
    assert [row[0] for row in rows] == TRAITS
    # descriptive columns cover every user of each drug, joint included
    n_col = dict(zip(header, next(r for r in rows if r[0] == "N")))
    assert int(n_col["n_a"]) == 20
    assert int(n_col["n_b"]) == 12
    assert int(n_col["n_union"]) == 27
    assert 0.0 <= float(n_col["ter"]) <= 100.0
    assert 0.0 <= float(n_col["thr"]) <= 100.0


# ---------------------------------------------------------------------------
# elastic maps and risk maps


def test_elasticmap_artifacts(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["elasticmap", "--data", str(survey_csv),
                     "--rows", "3", "--cols", "3", "--resolution", "10",
                     "--target", "cannabis", "--out", str(out)]) == 0
    _, node_rows = read_csv(out / "nodes.csv")
    assert len(node_rows) == 9
    header, proj_rows = read_csv(out / "projections.csv")
    assert header == ["respondent_id", "row_coord", "col_coord", "host_node"]
    assert len(proj_rows) == N_ROWS
    for row in proj_rows:
        assert 0.0 <= float(row[1]) <= 2.0
        assert 0.0 <= float(row[2]) <= 2.0
        assert 0 <= int(row[3]) < 9

    _, energy_rows = read_csv(out / "energy.csv")
    assert energy_rows
    assert all(math.isfinite(float(r[-1])) for r in energy_rows)

    density = np.load(out / "density_raster.npy")
    assert density.shape == (10, 10)
    share = np.load(out / "user_share_raster.npy")
    assert share.shape == (10, 10)
    finite = share[np.isfinite(share)]
    assert finite.size
    assert np.all((finite >= 0.0) & (finite <= 1.0))
    sidecar = read_json(out / "density_raster.json")
    assert sidecar["kind"] == "density"


def test_riskmap_two_axes_writes_raster(arrays, survey_csv, tmp_path):
    _, classes = arrays
    out = tmp_path / "out"
    assert cli.main(["riskmap", "--data", str(survey_csv), "--target",
                     "cannabis", "--resolution", "8", "--out",
                     str(out)]) == 0
    raster = np.load(out / "risk_raster.npy")
    assert raster.shape == (8, 8)
    assert np.all((raster >= 0.0) & (raster <= 1.0))
    model = read_json(out / "risk_model.json")
    assert model["family"] == "gaussian-mixture"
    assert model["attributes"] == ["Age", "SS"]
    assert model["n_user"] == int(user_mask(classes, "cannabis",
                                            "decade").sum())


def test_riskmap_one_axis_writes_profile(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["riskmap", "--data", str(survey_csv), "--target",
                     "cannabis", "--axes", "SS", "--resolution", "9",
                     "--out", str(out)]) == 0
    header, rows = read_csv(out / "risk_profile.csv")
    assert header == ["SS", "user_probability"]
    assert len(rows) == 9
    assert all(0.0 <= float(r[1]) <= 1.0 for r in rows)
    assert not (out / "risk_raster.npy").exists()


# ---------------------------------------------------------------------------
# report bundle and verification


def test_report_bundles_the_main_tables(survey_csv, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["report", "--data", str(survey_csv),
                     "--out", str(out)]) == 0
    for name in ("user_counts.csv", "user_counts.md",
                 "describe_illicit_decade.csv", "usage_edges.csv",
                 "pleiades.json", "manifest.json"):
        assert (out / name).exists()
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "report"


def test_report_verify_fails_on_synthetic_data(survey_csv, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["report", "--data", str(survey_csv), "--verify",
                     "--out", str(out)])
    assert code == 3
    captured = capsys.readouterr()
    assert "FAIL label-counts" in captured.out
    assert "verification check(s) failed" in captured.err
    checks = {c["check"]: c["status"]
              for c in read_json(out / "verification.json")}
    assert checks["label-counts"] == "fail"
    # raw-scale checks are skipped, not failed, without the raw export
    assert checks["raw-descriptives"] == "skip"
    assert checks["raw-contrast"] == "skip"


# ---------------------------------------------------------------------------
# table writer cell formats


def test_write_table_cell_formats(tmp_path):
    names = cli.write_table(tmp_path, "cells",
                            ["flag", "count", "value", "gap", "text"],
                            [[True, 3, 1.5, float("nan"), "x"]])
    assert names == ["cells.csv", "cells.md"]
    csv_text = (tmp_path / "cells.csv").read_text(encoding="utf-8")
    assert csv_text.splitlines()[1] == "1,3,1.5,nan,x"
    md_text = (tmp_path / "cells.md").read_text(encoding="utf-8")
    assert md_text.splitlines()[2] == "| 1 | 3 | 1.500 |  | x |"
