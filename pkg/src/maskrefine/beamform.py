"""Mask-driven multi-channel Wiener filtering.

The filter is an MVDR beamformer steered by the principal eigenvector of the
speech covariance, followed by a sqrt(lambda_s / (lambda_s + lambda_n))
post-gain per T-F bin.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, NumericalError

__all__ = [
    "SecondOrderStats",
    "BeamformerBank",
    "compute_sos",
    "steering_vector",
    "mvdr_weights",
    "mwf_weights",
    "apply_filter",
    "subarray_fuse",
    "band_split_bin",
]


def _hermitian(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


@dataclass(frozen=True)
class SecondOrderStats:
    """Per-frequency F x M x M noise, mixture and speech covariances."""

    Phi_n: np.ndarray
    Phi_y: np.ndarray
    Phi_s: np.ndarray


@dataclass(frozen=True)
class BeamformerBank:
    """r: F x M steering vectors; w_mvdr: F x M; gain: T x F post-filter."""

    r: np.ndarray
    w_mvdr: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        for a in (self.r, self.w_mvdr, self.gain):
            a.setflags(write=False)

    @property
    def w(self):
        """Full T x F x M weights (MVDR part times post-gain)."""
        return self.gain[:, :, None] * self.w_mvdr[None, :, :]


def _weighted_mean_cov(y, lam, name):
    mass = lam.sum(axis=0)
    if np.any(mass <= 0):
        bad = np.nonzero(mass <= 0)[0].tolist()
        raise DataError(f"{name} mask is all-zero at frequency bin(s) {bad}")
    return _hermitian(kernels.weighted_covariance(y, lam) / mass[:, None, None])


def compute_sos(y, lambda_s, lambda_n):
    """Mask-weighted noise and mixture covariances; Phi_s = Phi_y - Phi_n."""
    y = np.asarray(getattr(y, "bins", y), dtype=np.complex128)
    lambda_s = np.asarray(lambda_s, dtype=np.float64)
    lambda_n = np.asarray(lambda_n, dtype=np.float64)
    if lambda_s.shape != y.shape[:2] or lambda_n.shape != y.shape[:2]:
        raise DataError("mask shape does not match T x F of the observations")
    phi_n = _weighted_mean_cov(y, lambda_n, "noise")
    phi_y = _weighted_mean_cov(y, lambda_s, "speech")
    return SecondOrderStats(phi_n, phi_y, phi_y - phi_n)


def steering_vector(Phi_s, reference_channel=0):
    """Principal eigenvector of each (possibly indefinite) Hermitian matrix,
    scaled so that its reference entry is exactly 1."""
    Phi_s = np.asarray(Phi_s)
    single = Phi_s.ndim == 2
    P = Phi_s[None] if single else Phi_s
    _, vecs = np.linalg.eigh(_hermitian(P))
    u = vecs[..., :, -1]
    ref = u[:, reference_channel]
    tiny = np.abs(ref) < 1e-12 * np.linalg.norm(u, axis=-1)
    if np.any(tiny):
        raise NumericalError(
            f"steering vector undefined at reference at frequency bin(s) {np.nonzero(tiny)[0].tolist()}"
        )
    r = u / ref[:, None]
    r[:, reference_channel] = 1.0
    return r[0] if single else r


def mvdr_weights(Phi_n, r, loading=1e-6):
    """Phi_n^-1 r / (r^H Phi_n^-1 r) per frequency, with diagonal loading
    ``loading * tr(Phi_n)/M`` on Phi_n (0 disables it)."""
    Phi_n = np.asarray(Phi_n, dtype=np.complex128)
    r = np.asarray(r, dtype=np.complex128)
    single = Phi_n.ndim == 2
    if single:
        Phi_n, r = Phi_n[None], r[None]
    M = Phi_n.shape[-1]
    if loading:
        tr = np.trace(Phi_n, axis1=-2, axis2=-1).real
        Phi_n = Phi_n + (loading * tr / M)[:, None, None] * np.eye(M)
    try:
        num = np.linalg.solve(Phi_n, r[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise NumericalError("noise covariance singular after diagonal loading") from None
    den = np.einsum("fm,fm->f", r.conj(), num)
    if np.any(~(den.real > 0)) or not np.all(np.isfinite(den)):
        bad = np.nonzero(~(den.real > 0))[0].tolist()
        raise NumericalError(f"non-positive MVDR denominator at frequency bin(s) {bad}")
    w = num / den.real[:, None]
    return w[0] if single else w


def mwf_weights(stats, r, lambda_s, lambda_n, loading=1e-6, gain_floor=0.0):
    """Build the BeamformerBank for given statistics and refined masks."""
    w_mvdr = mvdr_weights(stats.Phi_n, r, loading)
    lambda_s = np.asarray(lambda_s, dtype=np.float64)
    total = lambda_s + np.asarray(lambda_n, dtype=np.float64)
    ratio = np.zeros_like(lambda_s)
    np.divide(lambda_s, total, out=ratio, where=total > 0)
    gain = np.clip(np.sqrt(ratio), 0.0, 1.0)
    if gain_floor > 0:
        gain = np.maximum(gain, min(gain_floor, 1.0))
    return BeamformerBank(np.array(r), w_mvdr, gain)


def apply_filter(y, bank):
    """s_hat(t, f) = w(t, f)^H y(t, f); returns T x F."""
    y = np.asarray(getattr(y, "bins", y))
    if y.shape[1:] != bank.w_mvdr.shape or y.shape[:2] != bank.gain.shape:
        raise DataError("filter bank shape does not match the observations")
    return bank.gain * np.einsum("fm,tfm->tf", bank.w_mvdr.conj(), y)


def band_split_bin(fft_size, sample_rate, band_split_hz):
    """First bin whose centre frequency is >= ``band_split_hz``."""
    return int(np.ceil(band_split_hz * fft_size / sample_rate))


def subarray_fuse(pipeline_fn, y_full, geometry, band_split_hz=1000.0, fft_size=512,
                  sample_rate=16000):
    """Run ``pipeline_fn`` on the small and large sub-arrays and stitch the
    results along frequency: bins below ``band_split_hz`` come from the small
    sub-array, the rest from the large one.

    ``pipeline_fn(y_sub, channels)`` receives the T x F x M_sub observations
    and the sub-array channel indices, and returns a T x F array or a tuple of
    arrays whose second axis is frequency. The tuple structure is kept.
    """
    small = getattr(geometry, "small_subarray", None)
    large = getattr(geometry, "large_subarray", None)
    if not small or not large:
        raise DataError("array geometry does not declare small/large sub-arrays")
    y_full = np.asarray(getattr(y_full, "bins", y_full))
    k = band_split_bin(fft_size, sample_rate, band_split_hz)
    lo = pipeline_fn(y_full[:, :, list(small)], tuple(small))
    hi = pipeline_fn(y_full[:, :, list(large)], tuple(large))

    def stitch(a, b):
        out = np.array(b, copy=True)
        out[:, :k] = a[:, :k]
        return out

    if isinstance(lo, tuple):
        return tuple(stitch(a, b) for a, b in zip(lo, hi))
    return stitch(lo, hi)
