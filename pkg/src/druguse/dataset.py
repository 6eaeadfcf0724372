"""Survey data ingestion, validation, and user/non-user labelling.

The survey records, for each respondent, twelve personal attributes
(age band, education, five personality traits, impulsivity, sensation
seeking, gender, country, ethnicity) and an ordinal recency-of-use
class for 18 substances plus the fictitious control substance
"Semeron". Recency classes:

====  =========================
CL0   never used
CL1   used over a decade ago
CL2   used in the last decade
CL3   used in the last year
CL4   used in the last month
CL5   used in the last week
CL6   used in the last day
====  =========================

Binary user/non-user labels follow four nested recency rules: decade
(CL2 and above), year (CL3+), month (CL4+), and week (CL5+).

Two file variants are accepted: the raw categorical export (header
mandatory) and the pre-quantified export whose attribute columns are
already real-valued. The pre-quantified file is also accepted without a
header when its column count matches the canonical public layout (ID,
Age, Gender, Education, Country, Ethnicity, Nscore, Escore, Oscore,
Ascore, Cscore, Impulsive, SS, then the drug columns). Loaded tables
round-trip bit-exactly through :func:`save_table`.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "RECENCY_RULES",
    "DRUGS",
    "SEMERON",
    "ATTRIBUTES",
    "TRAITS",
    "TEN_ATTRIBUTES",
    "DUMMY_ORDERS",
    "DrugGroup",
    "GROUPS",
    "UsageRecord",
    "FeatureTable",
    "LabelVector",
    "ValidationReport",
    "normalize_recency",
    "load_table",
    "load_raw",
    "save_table",
    "label_users",
    "label_group",
    "validate",
    "drop_invalid",
    "export_labels",
]

# rule name -> minimum recency class that still counts as a user
RECENCY_RULES = {"decade": 2, "year": 3, "month": 4, "week": 5}

DRUGS = [
    "alcohol", "amphetamines", "amyl nitrite", "benzodiazepines",
    "caffeine", "cannabis", "chocolate", "cocaine", "crack", "ecstasy",
    "heroin", "ketamine", "legal highs", "LSD", "methadone",
    "magic mushrooms", "nicotine", "VSA",
]
SEMERON = "semeron"

ATTRIBUTES = ["Age", "Edu", "N", "E", "O", "A", "C", "Imp", "SS",
              "Gndr", "Country", "Ethnicity"]
TRAITS = ["N", "E", "O", "A", "C", "Imp", "SS"]
TEN_ATTRIBUTES = ["Age", "Edu", "N", "E", "O", "A", "C", "Imp", "SS", "Gndr"]

# category orders used for indicator (dummy) coding of the two nominal
# attributes, ordered by descending population share
DUMMY_ORDERS = {
    "Country": ["UK", "Canada", "USA", "Other", "Australia",
                "Republic of Ireland", "New Zealand"],
    "Ethnicity": ["Mixed-White/Asian", "White", "Other",
                  "Mixed-White/Black", "Asian", "Black",
                  "Mixed-Black/Asian"],
}


@dataclass(frozen=True)
class DrugGroup:
    """A named union of drugs; a respondent using any member is a user."""

    name: str
    members: tuple

    def __post_init__(self):
        unknown = [m for m in self.members if m not in DRUGS]
        if unknown:
            raise ValueError("unknown drugs in group %r: %r"
                             % (self.name, unknown))


GROUPS = {
    "heroinPl": DrugGroup("heroinPl",
                          ("crack", "cocaine", "methadone", "heroin")),
    "ecstasyPl": DrugGroup("ecstasyPl",
                           ("amphetamines", "cannabis", "cocaine", "ketamine",
                            "LSD", "magic mushrooms", "legal highs",
                            "ecstasy")),
    "benzoPl": DrugGroup("benzoPl",
                         ("methadone", "amphetamines", "cocaine",
                          "benzodiazepines")),
    # every substance surveyed except the four legal ones
    # (alcohol, chocolate, caffeine, nicotine)
    "illicit": DrugGroup("illicit",
                         ("amphetamines", "amyl nitrite", "benzodiazepines",
                          "cannabis", "cocaine", "crack", "ecstasy", "heroin",
                          "ketamine", "legal highs", "LSD", "methadone",
                          "magic mushrooms", "VSA")),
}


@dataclass
class UsageRecord:
    """One respondent's recency class (0-6) per substance."""

    respondent_id: str
    usage: dict


@dataclass
class FeatureTable:
    """Attribute columns with per-column kind tags.

    Kinds: ``quantified-real`` (finite floats), ``ordinal-raw``
    (integer-valued scores or ordered bands), ``nominal-raw``
    (unordered labels). Numeric kinds store float arrays, raw kinds
    store string arrays.
    """

    ids: list
    names: list
    kinds: dict
    columns: dict

    @property
    def n_rows(self) -> int:
        return len(self.ids)

    def matrix(self, names) -> np.ndarray:
        """Stack numeric columns into an (n, len(names)) float matrix."""
        cols = []
        for name in names:
            if name not in self.columns:
                raise KeyError("unknown attribute %r" % (name,))
            if self.kinds[name] == "nominal-raw":
                raise ValueError("attribute %r is nominal; quantify it first"
                                 % (name,))
            cols.append(np.asarray(self.columns[name], dtype=float))
        return np.column_stack(cols)


@dataclass
class LabelVector:
    """Boolean user labels for one drug or group under one rule."""

    drug_or_group: str
    rule: str
    labels: np.ndarray

    @property
    def user_count(self) -> int:
        return int(self.labels.sum())

    @property
    def user_fraction(self) -> float:
        return float(self.labels.mean())


@dataclass
class ValidationReport:
    """Dataset sanity summary: control-substance claims and histograms."""

    n_rows: int
    semeron_claims: int
    semeron_ids: list
    histograms: dict = field(repr=False)


_VERBOSE_RECENCY = {
    "never used": 0,
    "used over a decade ago": 1,
    "used in last decade": 2,
    "used in the last decade": 2,
    "used in last year": 3,
    "used in the last year": 3,
    "used in last month": 4,
    "used in the last month": 4,
    "used in last week": 5,
    "used in the last week": 5,
    "used in last day": 6,
    "used in the last day": 6,
}


def normalize_recency(token: str) -> int:
    """Map a recency cell (CL code or verbose label) to its class 0-6."""
    text = str(token).strip()
    compact = text.upper()
    if compact.startswith("CL") and len(compact) == 3 and compact[2].isdigit():
        value = int(compact[2])
        if 0 <= value <= 6:
            return value
        raise ValueError("unknown recency token %r" % (text,))
    verbose = text.lower()
    if verbose in _VERBOSE_RECENCY:
        return _VERBOSE_RECENCY[verbose]
    raise ValueError("unknown recency token %r" % (text,))


# column-header aliases for both public file variants
_HEADER_ALIASES = {
    "id": "ID",
    "age": "Age",
    "gender": "Gndr", "gndr": "Gndr",
    "education": "Edu", "edu": "Edu",
    "country": "Country",
    "ethnicity": "Ethnicity",
    "nscore": "N", "n": "N",
    "escore": "E", "e": "E",
    "oscore": "O", "o": "O",
    "ascore": "A", "a": "A",
    "cscore": "C", "c": "C",
    "impulsive": "Imp", "impulsiveness": "Imp", "imp": "Imp",
    "ss": "SS", "sensation": "SS", "ssscore": "SS",
    "alcohol": "alcohol",
    "amphet": "amphetamines", "amphetamines": "amphetamines",
    "amyl": "amyl nitrite", "amyl nitrite": "amyl nitrite",
    "benzos": "benzodiazepines", "benzodiazepines": "benzodiazepines",
    "caff": "caffeine", "caffeine": "caffeine",
    "cannabis": "cannabis",
    "choc": "chocolate", "chocolate": "chocolate",
    "coke": "cocaine", "cocaine": "cocaine",
    "crack": "crack",
    "ecstasy": "ecstasy",
    "heroin": "heroin",
    "ketamine": "ketamine",
    "legalh": "legal highs", "legal highs": "legal highs",
    "lsd": "LSD",
    "meth": "methadone", "methadone": "methadone",
    "mushrooms": "magic mushrooms", "magic mushrooms": "magic mushrooms",
    "mmushrooms": "magic mushrooms",
    "nicotine": "nicotine",
    "semer": SEMERON, "semeron": SEMERON,
    "vsa": "VSA",
}

# headerless fallback: the canonical public column order
_CANONICAL_LAYOUT = [
    "ID", "Age", "Gndr", "Edu", "Country", "Ethnicity",
    "N", "E", "O", "A", "C", "Imp", "SS",
    "alcohol", "amphetamines", "amyl nitrite", "benzodiazepines",
    "caffeine", "cannabis", "chocolate", "cocaine", "crack", "ecstasy",
    "heroin", "ketamine", "legal highs", "LSD", "methadone",
    "magic mushrooms", "nicotine", SEMERON, "VSA",
]


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=1)
                if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValueError("%s: empty file" % (path,))
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise ValueError("%s: malformed row at line %d (%d cells, "
                             "expected %d)" % (path, lineno, len(row), width))
    return rows


def _match_header(cells) -> list | None:
    """Resolve a header row to canonical names, or None if it is data."""
    resolved = []
    hits = 0
    for cell in cells:
        key = cell.strip().lower()
        if key in _HEADER_ALIASES:
            resolved.append(_HEADER_ALIASES[key])
            hits += 1
        else:
            resolved.append(cell.strip())
    # a genuine header resolves nearly everywhere; a data row almost nowhere
    if hits >= max(2, len(cells) // 2):
        return resolved
    return None


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _sniff_kind(values) -> str:
    """Classify a raw column: quantified-real, ordinal-raw, or nominal-raw."""
    numeric = all(_is_float(v) for v in values)
    if numeric:
        floats = [float(v) for v in values]
        if all(v == int(v) for v in floats):
            return "ordinal-raw"
        return "quantified-real"
    return "nominal-raw"


def load_table(path, require_header: bool = False):
    """Load either public file variant.

    Returns ``(FeatureTable, list of UsageRecord)``. A header row is
    recognized by its column names; without one the file must match the
    canonical 32-column public layout. Malformed rows and unknown
    recency tokens raise ValueError naming the line or token.
    """
    rows = _read_rows(path)
    names = _match_header(rows[0][1])
    if names is not None:
        data_rows = rows[1:]
    else:
        if require_header:
            raise ValueError("%s: header row is mandatory" % (path,))
        if len(rows[0][1]) != len(_CANONICAL_LAYOUT):
            raise ValueError(
                "%s: no header and %d columns; the headerless form must "
                "match the %d-column public layout"
                % (path, len(rows[0][1]), len(_CANONICAL_LAYOUT)))
        names = list(_CANONICAL_LAYOUT)
        data_rows = rows
        log.info("%s: headerless file, assuming the public column layout",
                 path)

    drug_cols = [n for n in names if n in DRUGS or n == SEMERON]
    attr_cols = [n for n in names if n in ATTRIBUTES]
    seen = set()
    for n in names:
        if n in seen:
            raise ValueError("%s: duplicate column %r" % (path, n))
        seen.add(n)
    unknown = [n for n in names
               if n not in DRUGS and n != SEMERON
               and n not in ATTRIBUTES and n != "ID"]
    if unknown:
        log.warning("%s: ignoring unrecognized columns %s", path, unknown)

    raw = {n: [] for n in names}
    ids = []
    for lineno, row in data_rows:
        for name, cell in zip(names, row):
            raw[name].append(cell.strip())
    if "ID" in raw:
        ids = list(raw["ID"])
    else:
        ids = [str(i + 1) for i in range(len(data_rows))]

    columns = {}
    kinds = {}
    for name in attr_cols:
        kind = _sniff_kind(raw[name]) if raw[name] else "quantified-real"
        if kind == "nominal-raw":
            columns[name] = np.array(raw[name], dtype=object)
        else:
            columns[name] = np.array([float(v) for v in raw[name]])
        kinds[name] = kind

    # age/education bands in the raw export are ordered but not numeric
    for name in ("Age", "Edu", "Country", "Ethnicity", "Gndr"):
        if name in raw and name in kinds and kinds[name] == "nominal-raw":
            if name in ("Age", "Edu"):
                kinds[name] = "ordinal-raw"

    usage = {}
    for name in drug_cols:
        classes = []
        for offset, cell in enumerate(raw[name]):
            try:
                classes.append(normalize_recency(cell))
            except ValueError as exc:
                lineno = data_rows[offset][0]
                raise ValueError("%s: line %d, column %r: %s"
                                 % (path, lineno, name, exc)) from exc
        usage[name] = classes

    records = []
    for i, rid in enumerate(ids):
        records.append(UsageRecord(
            respondent_id=rid,
            usage={drug: usage[drug][i] for drug in drug_cols}))

    table = FeatureTable(ids=ids, names=attr_cols, kinds=kinds,
                         columns=columns)
    log.info("%s: %d rows, %d attribute columns, %d substance columns",
             path, table.n_rows, len(attr_cols), len(drug_cols))
    return table, records


def load_raw(path):
    """Load the raw categorical export; the header row is mandatory."""
    return load_table(path, require_header=True)


def save_table(table: FeatureTable, records, path) -> None:
    """Write a table + usage records back to CSV (bit-exact round-trip).

    Floats are rendered with ``repr`` so they reparse to identical
    values; recency classes are written as CL codes.
    """
    drug_cols = sorted(records[0].usage) if records else []
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["ID"] + list(table.names) + drug_cols)
        for i, rid in enumerate(table.ids):
            row = [rid]
            for name in table.names:
                value = table.columns[name][i]
                if table.kinds[name] in ("quantified-real",):
                    row.append(repr(float(value)))
                elif isinstance(value, float):
                    row.append(repr(value))
                else:
                    row.append(str(value))
            for drug in drug_cols:
                row.append("CL%d" % records[i].usage[drug])
            writer.writerow(row)


def label_users(records, drug: str, rule: str) -> LabelVector:
    """Binary user labels for one drug under one recency rule."""
    if rule not in RECENCY_RULES:
        raise ValueError("unknown recency rule %r; choose from %s"
                         % (rule, sorted(RECENCY_RULES)))
    if not records:
        raise ValueError("no records")
    if drug not in records[0].usage:
        raise ValueError("unknown drug %r; known: %s"
                         % (drug, sorted(records[0].usage)))
    cut = RECENCY_RULES[rule]
    labels = np.array([r.usage[drug] >= cut for r in records])
    return LabelVector(drug_or_group=drug, rule=rule, labels=labels)


def label_group(records, group, rule: str) -> LabelVector:
    """Binary labels for a drug group: user of any member drug."""
    if isinstance(group, str):
        if group not in GROUPS:
            raise ValueError("unknown group %r; known: %s"
                             % (group, sorted(GROUPS)))
        group = GROUPS[group]
    labels = np.zeros(len(records), dtype=bool)
    for member in group.members:
        labels |= label_users(records, member, rule).labels
    return LabelVector(drug_or_group=group.name, rule=rule, labels=labels)


def validate(records) -> ValidationReport:
    """Check for fictitious-substance claims and build class histograms."""
    semeron_ids = [r.respondent_id for r in records
                   if r.usage.get(SEMERON, 0) > 0]
    histograms = {}
    if records:
        for drug in records[0].usage:
            counts = [0] * 7
            for r in records:
                counts[r.usage[drug]] += 1
            histograms[drug] = counts
    return ValidationReport(n_rows=len(records),
                            semeron_claims=len(semeron_ids),
                            semeron_ids=semeron_ids,
                            histograms=histograms)


def drop_invalid(table: FeatureTable, records):
    """Remove rows claiming use of the fictitious control substance.

    Returns ``(table, records, dropped_ids)``; the removal is logged so
    cleaning is never silent.
    """
    report = validate(records)
    if not report.semeron_claims:
        return table, records, []
    bad = set(report.semeron_ids)
    keep = [i for i, rid in enumerate(table.ids) if rid not in bad]
    idx = np.array(keep, dtype=int)
    new_table = FeatureTable(
        ids=[table.ids[i] for i in keep],
        names=list(table.names),
        kinds=dict(table.kinds),
        columns={name: table.columns[name][idx] for name in table.names})
    new_records = [records[i] for i in keep]
    log.warning("dropped %d rows claiming the fictitious substance: %s",
                len(bad), sorted(bad))
    return new_table, new_records, sorted(bad)


def export_labels(vectors, ids, path) -> None:
    """Write label vectors as CSV rows (respondent_id, drug, rule, label)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["respondent_id", "drug", "rule", "label"])
        for vec in vectors:
            for rid, flag in zip(ids, vec.labels):
                writer.writerow([rid, vec.drug_or_group, vec.rule,
                                 int(bool(flag))])
