"""Feature ranking: PCA spectra, regressor selection, sparse screens.

The PCA oracle is the singular value decomposition of the centered data
(a different algorithm than the eigendecomposition used inside); the
regressor-selection oracle is a four-row design whose every step can be
done by hand; the screening tests plant an attribute of microscopic
variance and expect it to be flagged.
"""

import numpy as np
import pytest
import scipy.linalg

from druguse import rank


def svd_spectrum(x):
    """Eigenvalues of the 1/N covariance via SVD of the centered data."""
    xc = x - x.mean(axis=0)
    s = scipy.linalg.svd(xc, compute_uv=False)
    out = np.zeros(x.shape[1])
    out[: s.size] = s ** 2 / x.shape[0]
    return np.sort(out)[::-1]


# ---------------------------------------------------------------------------
# pca


def test_pca_spectrum_matches_svd(rng):
    x = rng.normal(size=(80, 6)) @ np.diag([3.0, 2.0, 1.5, 1.0, 0.5, 0.1])
    res = rank.pca(x)
    assert np.allclose(res.eigenvalues, svd_spectrum(x), atol=1e-10)
    assert res.total_variance == pytest.approx(
        float(((x - x.mean(0)) ** 2).mean(0).sum()), rel=1e-12)


def test_pca_components_are_orthonormal_and_signed(rng):
    x = rng.normal(size=(50, 4))
    res = rank.pca(x)
    assert np.allclose(res.components @ res.components.T, np.eye(4),
                       atol=1e-10)
    for row in res.components:
        assert row[int(np.argmax(np.abs(row)))] > 0


def test_pca_fvu_equals_reconstruction_error(rng):
    """The k-plane's unexplained fraction must match the actual residual
    of projecting the data onto the leading k components."""
    x = rng.normal(size=(60, 5)) * np.array([2.0, 1.5, 1.0, 0.7, 0.2])
    res = rank.pca(x)
    xc = x - x.mean(axis=0)
    total = float((xc ** 2).sum())
    for k in range(6):
        w = res.components[:k]
        recon = xc @ w.T @ w
        expect = float(((xc - recon) ** 2).sum()) / total
        assert res.fvu(k) == pytest.approx(expect, abs=1e-10)


def test_pca_kaiser_count_matches_the_mean_rule(rng):
    x = rng.normal(size=(100, 5)) * np.array([3.0, 2.0, 0.5, 0.3, 0.1])
    res = rank.pca(x)
    spectrum = svd_spectrum(x)
    assert res.retained == int(np.sum(spectrum > spectrum.mean()))
    assert 1 <= res.retained < 5


def test_pca_transform_centers(rng):
    x = rng.normal(loc=5.0, size=(40, 3))
    res = rank.pca(x)
    proj = res.transform(x)
    assert proj.shape == (40, 3)
    assert np.allclose(proj.mean(axis=0), 0.0, atol=1e-10)
    # projecting the mean row alone gives the origin
    assert np.allclose(res.transform(res.mean.reshape(1, -1)), 0.0,
                       atol=1e-10)


def test_pca_needs_rows():
    with pytest.raises(ValueError, match="at least 2 rows"):
        rank.pca(np.ones((1, 3)))


# ---------------------------------------------------------------------------
# principal variables


def test_principal_variables_hand_worked_case():
    """Four rows, three columns with c = a + b and a twice b's scale.

    Step 1 compares explained sums 16, 4, and 16.8, so c wins with
    16.8/20 of the variance; the residuals of a and b then coincide up
    to sign and a wins the tie; b ends with nothing left.
    """
    a = np.array([2.0, -2.0, 0.0, 0.0])
    b = np.array([0.0, 0.0, 1.0, -1.0])
    x = np.column_stack([a, b, a + b])
    res = rank.principal_variables(x, names=["a", "b", "c"])
    assert res.order == ["c", "a", "b"]
    assert res.fve == pytest.approx([0.84, 0.16, 0.0], abs=1e-12)
    assert res.cfve == pytest.approx([0.84, 1.0, 1.0], abs=1e-12)


def test_principal_variables_full_cfve_reaches_one(rng):
    x = rng.normal(size=(70, 5))
    res = rank.principal_variables(x)
    assert sorted(res.order) == [0, 1, 2, 3, 4]
    assert np.all(np.diff(res.cfve) >= -1e-12)
    assert res.cfve[-1] == pytest.approx(1.0, abs=1e-9)
    assert all(f >= -1e-12 for f in res.fve)


def test_principal_variables_prefers_the_shared_driver(rng):
    z = rng.normal(size=300)
    x = np.column_stack([
        z + 0.01 * rng.normal(size=300),
        z + 0.3 * rng.normal(size=300),
        z + 0.3 * rng.normal(size=300),
        rng.normal(size=300),
    ])
    res = rank.principal_variables(x, names=["driver", "echo1", "echo2",
                                             "noise"])
    assert res.order[0] == "driver"
    assert res.order[-1] in ("noise", "echo1", "echo2")


def test_principal_variables_rejects_constants():
    x = np.column_stack([np.ones(10), np.arange(10.0)])
    with pytest.raises(ValueError, match="constant column"):
        rank.principal_variables(x, names=["flat", "ramp"])
    with pytest.raises(ValueError, match="at least 2"):
        rank.principal_variables(np.ones((10, 1)))


# ---------------------------------------------------------------------------
# double Kaiser screen


def _block_plus_noise(rng, n=200, tiny=1e-4):
    z = rng.normal(size=n)
    cols = [z + 0.2 * rng.normal(size=n) for _ in range(4)]
    cols.append(tiny * rng.normal(size=n))
    return np.column_stack(cols)


def test_double_kaiser_drops_the_negligible_attribute_first(rng):
    x = _block_plus_noise(rng)
    names = ["b1", "b2", "b3", "b4", "tiny"]
    res = rank.double_kaiser(x, names=names)
    # the screen may keep thinning the exchangeable block (its loadings sit
    # exactly at the triviality bound), but the planted attribute must be
    # the first to go and must rank last
    assert res.removed[0] == "tiny"
    assert res.order[-1] == "tiny"
    assert sorted(res.order) == sorted(names)


def test_double_kaiser_first_pass_gamma_matches_svd(rng):
    """Survivor ranking must follow the largest absolute loadings of the
    Kaiser-retained components, recomputed here from scratch."""
    x = rng.normal(size=(150, 4)) * np.array([2.0, 1.0, 0.8, 0.6])
    x[:, 2] += x[:, 0]
    res = rank.double_kaiser(x, names=["p", "q", "r", "s"])
    if res.removed:
        pytest.skip("screen removed an attribute; ranking covered elsewhere")
    xc = x - x.mean(axis=0)
    u, s, vt = scipy.linalg.svd(xc, full_matrices=False)
    evals = s ** 2 / x.shape[0]
    k = int(np.sum(evals > evals.mean()))
    gamma = np.abs(vt[:k]).max(axis=0)
    expect = [["p", "q", "r", "s"][j] for j in np.argsort(-gamma,
                                                          kind="stable")]
    assert res.order == expect


def test_double_kaiser_keeps_two_strong_blocks(rng):
    """Two near-duplicated signal pairs retain two components, and every
    attribute loads about 0.7 on one of them, far above the 0.5 bound,
    so nothing is screened out."""
    za, zb = rng.normal(size=(2, 400))
    x = np.column_stack([za, za + 0.05 * rng.normal(size=400),
                         zb, zb + 0.05 * rng.normal(size=400)])
    res = rank.double_kaiser(x)
    assert res.removed == []
    assert len(res.order) == 4


def test_double_kaiser_single_attribute():
    res = rank.double_kaiser(np.arange(10.0).reshape(-1, 1), names=["only"])
    assert res.order == ["only"]
    assert res.removed == []


# ---------------------------------------------------------------------------
# sparse pca


def test_sparse_pca_zeroes_are_exact_and_bounded(rng):
    x = _block_plus_noise(rng, n=300, tiny=1e-5)
    res = rank.sparse_pca(x, names=["b1", "b2", "b3", "b4", "tiny"])
    assert "tiny" in res.trivial
    assert sorted(res.trivial + res.retained) == sorted(
        ["b1", "b2", "b3", "b4", "tiny"])
    n_act = len(res.retained)
    for row, lam in zip(res.components, res.explained):
        assert np.linalg.norm(row) == pytest.approx(1.0, abs=1e-9)
        support = np.abs(row) > 0
        assert support.any()
        if support.sum() > 1:
            assert np.all(np.abs(row[support]) > 1.0 / np.sqrt(n_act))
        assert lam >= res.kaiser_bound - 1e-12


def test_sparse_pca_on_a_clean_two_block_design(rng):
    za, zb = rng.normal(size=(2, 400))
    x = np.column_stack([za, za + 0.05 * rng.normal(size=400),
                         zb, zb + 0.05 * rng.normal(size=400)])
    res = rank.sparse_pca(x, names=["a1", "a2", "b1", "b2"])
    assert res.trivial == []
    assert res.retained == ["a1", "a2", "b1", "b2"]
    assert len(res.explained) >= 1
    # every accepted component clears the acceptance bound
    assert min(res.explained) >= res.kaiser_bound - 1e-12


def test_sparse_pca_needs_two_attributes():
    with pytest.raises(ValueError, match="at least 2"):
        rank.sparse_pca(np.ones((5, 1)))
