import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from maskrefine.errors import DataError
from maskrefine.metrics import (FPR_GRID, RocCurve, SDR_CAP_DB, auc, averaged_roc,
                                ideal_binary_mask, roc, sdr, si_snr, write_roc_csv)


def brute_auc(scores, labels):
    """Mann-Whitney oracle: P(score_pos > score_neg) + 0.5 P(tie)."""
    pos, neg = scores[labels == 1], scores[labels == 0]
    diff = pos[:, None] - neg[None, :]
    return (np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size


def vertical_tpr(curve, x):
    """Oracle: TPR at FPR x, taking the top of any vertical segment and
    interpolating linearly along sloped segments."""
    f, t = curve.fpr, curve.tpr
    i = np.nonzero(f <= x)[0][-1]
    if f[i] == x or i == len(f) - 1:
        return t[i]
    return t[i] + (t[i + 1] - t[i]) * (x - f[i]) / (f[i + 1] - f[i])


def test_ibm_examples():
    assert ideal_binary_mask(np.array([1.0]), np.array([0.0]))[0] == 1
    assert ideal_binary_mask(np.array([1.0 + 1j]), np.array([1j - 1]))[0] == 0
    assert ideal_binary_mask(np.array([2.0]), np.array([1.0]))[0] == 1
    assert ideal_binary_mask(np.array([2.0]), np.array([1.0]), threshold_db=7.0)[0] == 0


def test_roc_trivial_classifiers(rng):
    labels = (rng.uniform(size=500) < 0.3).astype(int)
    perfect = roc(labels.astype(float), labels)
    assert auc(perfect) == 1.0
    assert np.any((perfect.fpr == 0) & (perfect.tpr == 1))
    flat = roc(np.full(500, 0.5), labels)
    assert auc(flat) == 0.5 and len(flat.fpr) == 3
    assert auc(roc(1.0 - labels, labels)) == 0.0


def test_roc_endpoints_and_sentinels(rng):
    c = roc(rng.uniform(size=50), rng.integers(0, 2, 50) | np.eye(1, 50, 0, dtype=int)[0])
    assert (c.fpr[0], c.tpr[0], c.fpr[-1], c.tpr[-1]) == (0, 0, 1, 1)
    assert c.thresholds[0] == np.inf and c.thresholds[-1] == -np.inf
    assert c.points.shape == (len(c.fpr), 2)


def test_roc_single_class_rejected():
    with pytest.raises(DataError):
        roc(np.array([0.1, 0.2]), np.array([1, 1]))
    with pytest.raises(DataError):
        roc(np.array([0.1, 0.2]), np.array([1, 0, 1]))


def test_random_mask_auc_is_half():
    rng = np.random.default_rng(7)
    a = auc(roc(rng.uniform(size=10000), rng.integers(0, 2, 10000)))
    assert abs(a - 0.5) <= 0.02


labelled = st.integers(2, 60).flatmap(lambda n: st.tuples(
    hnp.arrays(float, n, elements=st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.7, 1.0])),
    hnp.arrays(np.int8, n, elements=st.integers(0, 1)).filter(lambda l: 0 < l.sum() < len(l))))


@settings(max_examples=150)
@given(labelled)
def test_auc_matches_mann_whitney(data):
    scores, labels = data
    assert auc(roc(scores, labels)) == pytest.approx(brute_auc(scores, labels), abs=1e-12)


@settings(max_examples=100)
@given(labelled)
def test_roc_monotone_and_complement(data):
    scores, labels = data
    c = roc(scores, labels)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)
    assert auc(c) + auc(roc(1.0 - scores, labels)) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=100)
@given(labelled)
def test_auc_invariant_to_monotone_transform(data):
    scores, labels = data
    assert auc(roc(np.exp(3 * scores) - 7, labels)) == pytest.approx(auc(roc(scores, labels)), abs=1e-12)


def test_averaged_roc_examples(rng):
    labels = (rng.uniform(size=400) < 0.4).astype(int)
    c = roc(rng.uniform(size=400), labels)
    single = averaged_roc([c])
    assert len(single.fpr) == len(FPR_GRID) + 1
    assert np.allclose(single.tpr[1:], [vertical_tpr(c, x) for x in FPR_GRID], atol=1e-12)
    assert np.array_equal(averaged_roc([c, c]).tpr, single.tpr)
    assert abs(auc(single) - auc(c)) < 0.01


def test_averaged_perfect_and_flat():
    perfect = RocCurve(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 1.0]), np.array([np.inf, 1, -np.inf]))
    flat = RocCurve(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([np.inf, -np.inf]))
    assert auc(averaged_roc([perfect, flat])) == pytest.approx(0.75, abs=0.01)
    # the vertical segment at FPR = 0 resolves to its top
    assert averaged_roc([perfect]).tpr[1] == 1.0


def test_averaged_roc_needs_curves():
    with pytest.raises(DataError):
        averaged_roc([])


def test_si_snr_examples(rng):
    ref = rng.standard_normal(4000)
    assert si_snr(ref, ref) == SDR_CAP_DB
    assert si_snr(3 * ref, ref) == SDR_CAP_DB
    noise = rng.standard_normal(4000)
    noise -= noise.mean()
    r0 = ref - ref.mean()
    noise -= r0 * (noise @ r0) / (r0 @ r0)
    noise *= np.linalg.norm(r0) / np.linalg.norm(noise)
    assert si_snr(r0 + noise, r0) == pytest.approx(0.0, abs=1e-9)
    assert sdr is si_snr


@settings(max_examples=50)
@given(st.integers(0, 2 ** 31), st.floats(1e-3, 1e3))
def test_si_snr_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    ref, est = rng.standard_normal(500), rng.standard_normal(500)
    est = est + ref
    assert si_snr(scale * est, ref) == pytest.approx(si_snr(est, ref), abs=1e-9)


def test_si_snr_against_closed_form(rng):
    ref = rng.standard_normal(1000)
    ref -= ref.mean()
    e = rng.standard_normal(1000)
    e -= e.mean()
    e -= ref * (e @ ref) / (ref @ ref)
    est = 2.0 * ref + 0.5 * e
    expected = 10 * np.log10(4 * (ref @ ref) / (0.25 * (e @ e)))
    assert si_snr(est, ref) == pytest.approx(expected, abs=1e-9)


def test_si_snr_errors():
    with pytest.raises(DataError):
        si_snr(np.ones(3), np.zeros(3) + 2.0)   # constant reference is zero after de-meaning
    with pytest.raises(DataError):
        si_snr(np.ones(3), np.ones(4))


def test_si_snr_negative_cap(rng):
    ref = rng.standard_normal(100)
    assert si_snr(np.zeros(100), ref) == -SDR_CAP_DB


def test_write_roc_csv(tmp_path):
    c = RocCurve(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.75, 1.0]), np.zeros(3))
    write_roc_csv(tmp_path / "r.csv", c)
    assert (tmp_path / "r.csv").read_text() == "fpr,tpr\n0.0,0.0\n0.5,0.75\n1.0,1.0\n"


@settings(max_examples=60)
@given(labelled)
def test_averaged_roc_matches_vertical_oracle(data):
    c = roc(*data)
    avg = averaged_roc([c])
    assert np.allclose(avg.tpr[1:], [vertical_tpr(c, x) for x in FPR_GRID], atol=1e-12)
    # the grid curve never lies above the exact area by more than one grid step
    assert auc(avg) == pytest.approx(auc(c), abs=2e-3)
