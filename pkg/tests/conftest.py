"""Shared fixtures.

Synthetic fixtures always run. Tests against the published survey
numbers need the real file, which is not bundled; they locate it via
the environment variables ``DRUGUSE_DATASET`` (quantified variant,
numeric trait scores) and ``DRUGUSE_DATASET_RAW`` (categorical export),
or by scanning ``data/`` next to the package root. Without a matching
file those tests skip with a message naming the expected location.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from druguse import dataset

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = ROOT / "data"

_cache: dict = {}


def _candidate_paths():
    paths = []
    for var in ("DRUGUSE_DATASET", "DRUGUSE_DATASET_RAW"):
        value = os.environ.get(var)
        if value:
            paths.append((var, Path(value)))
    if DATA_DIR.is_dir():
        for p in sorted(DATA_DIR.iterdir()):
            if p.suffix.lower() in (".csv", ".data") and p.is_file():
                paths.append(("data/", p))
    return paths


def _is_quantified(table) -> bool:
    return all(table.kinds.get(t) == "quantified-real" for t in dataset.TRAITS)


def _load_published(want_quantified: bool):
    """Return (table, records, path) for the requested variant or None."""
    key = "quantified" if want_quantified else "raw"
    if key in _cache:
        return _cache[key]
    found = None
    for origin, path in _candidate_paths():
        if not path.exists():
            raise pytest.UsageError(
                "%s names %s, which does not exist" % (origin, path))
        try:
            table, records = dataset.load_table(path)
        except ValueError as exc:
            raise pytest.UsageError("cannot load %s: %s" % (path, exc))
        if table.n_rows < 100:
            continue  # not the survey file
        if _is_quantified(table) == want_quantified:
            found = (table, records, path)
            break
    _cache[key] = found
    return found


def require_published(want_quantified: bool = True):
    found = _load_published(want_quantified)
    if found is None:
        variant = "quantified" if want_quantified else "raw categorical"
        var = "DRUGUSE_DATASET" if want_quantified else "DRUGUSE_DATASET_RAW"
        pytest.skip("published survey file (%s variant) not found; set %s "
                    "or drop the CSV into %s" % (variant, var, DATA_DIR))
    return found


@pytest.fixture(scope="session")
def published():
    """(table, records, path) of the quantified published file."""
    return require_published(True)


@pytest.fixture(scope="session")
def published_raw():
    """(table, records, path) of the raw categorical published file."""
    return require_published(False)


@pytest.fixture(scope="session")
def published_records():
    """Usage records from whichever published variant is available."""
    for want in (True, False):
        found = _load_published(want)
        if found is not None:
            return found[1]
    pytest.skip("no published survey file found; set DRUGUSE_DATASET or "
                "DRUGUSE_DATASET_RAW or drop the CSV into %s" % DATA_DIR)


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)


def two_blobs(rng, n=120, d=3, shift=1.5, user_share=0.4, seed_shift=0):
    """Separable synthetic (x, y) with boolean labels."""
    local = np.random.default_rng(rng.integers(2 ** 32) + seed_shift)
    y = local.random(n) < user_share
    if not y.any():
        y[0] = True
    if y.all():
        y[0] = False
    x = local.normal(size=(n, d))
    x[y] += shift
    return x, y


def labels_for(records, target: str, rule: str) -> np.ndarray:
    if target in dataset.GROUPS:
        return dataset.label_group(records, dataset.GROUPS[target], rule).labels
    return dataset.label_users(records, target, rule).labels
