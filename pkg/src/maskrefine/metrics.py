"""Mask accuracy (ROC/AUC against ideal binary masks) and SI-SNR."""
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "RocCurve",
    "ideal_binary_mask",
    "roc",
    "auc",
    "averaged_roc",
    "sdr",
    "si_snr",
    "SDR_CAP_DB",
    "write_roc_csv",
]

SDR_CAP_DB = 100.0
FPR_GRID = np.linspace(0.0, 1.0, 1001)


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self):
        return np.stack([self.fpr, self.tpr], axis=1)


def ideal_binary_mask(s, n, threshold_db=0.0):
    """1 where the local SNR |s|^2/|n|^2 exceeds ``threshold_db`` (strictly)."""
    ps = np.abs(np.asarray(getattr(s, "bins", s))) ** 2
    pn = np.abs(np.asarray(getattr(n, "bins", n))) ** 2
    return (ps > 10.0 ** (threshold_db / 10.0) * pn).astype(np.int8)


def roc(mask, labels):
    """ROC over every distinct mask value used as a '>= threshold' decision,
    with +inf and -inf sentinel thresholds at the ends."""
    scores = np.asarray(mask, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if scores.shape != y.shape:
        raise DataError(f"mask and labels differ in size: {scores.size} vs {y.size}")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("labels must contain both positives and negatives")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    fpr = np.r_[0.0, fp / n_neg, 1.0]
    tpr = np.r_[0.0, tp / n_pos, 1.0]
    thr = np.r_[np.inf, s[ends], -np.inf]
    return RocCurve(fpr, tpr, thr)


def auc(curve):
    """Trapezoidal area under the curve."""
    f, t = curve.fpr, curve.tpr
    return float(np.sum(np.diff(f) * (t[1:] + t[:-1]) * 0.5))


def _resample(curve, grid):
    """TPR of a piecewise-linear ROC at each grid FPR; on a vertical segment
    the top value is taken."""
    f, t = curve.fpr, curve.tpr
    i = np.searchsorted(f, grid, side="right") - 1
    j = np.minimum(i + 1, len(f) - 1)
    span = f[j] - f[i]
    frac = np.zeros_like(grid, dtype=np.float64)
    np.divide(grid - f[i], span, out=frac, where=span > 0)
    return t[i] + frac * (t[j] - t[i])


def averaged_roc(curves):
    """Vertical average of TPR on a 1001-point FPR grid; (0, 0) is prepended."""
    curves = list(curves)
    if not curves:
        raise DataError("averaged_roc needs at least one curve")
    tpr = np.mean([_resample(c, FPR_GRID) for c in curves], axis=0)
    return RocCurve(np.r_[0.0, FPR_GRID], np.r_[0.0, tpr], np.full(FPR_GRID.size + 1, np.nan))


def si_snr(estimate, reference):
    """Scale-invariant SNR in dB of zero-mean signals, capped at 100 dB."""
    est = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64).ravel()
    ref = np.asarray(getattr(reference, "samples", reference), dtype=np.float64).ravel()
    if est.shape != ref.shape:
        raise DataError(f"estimate and reference lengths differ: {est.size} vs {ref.size}")
    est = est - est.mean()
    ref = ref - ref.mean()
    energy = np.dot(ref, ref)
    if energy <= 0:
        raise DataError("reference signal is zero")
    target = np.dot(est, ref) / energy * ref
    resid = est - target
    num, den = np.dot(target, target), np.dot(resid, resid)
    if num <= den * 10.0 ** (-SDR_CAP_DB / 10.0):
        # includes an all-zero estimate: nothing of the reference is present
        return -SDR_CAP_DB
    if den <= num * 10.0 ** (-SDR_CAP_DB / 10.0):
        return SDR_CAP_DB
    return float(10.0 * np.log10(num / den))


sdr = si_snr


def write_roc_csv(path, curve):
    with open(path, "w") as fh:
        fh.write("fpr,tpr\n")
        for f, t in zip(curve.fpr, curve.tpr):
            fh.write(f"{float(f)!r},{float(t)!r}\n")
