"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public functions dispatch at call time (see ``_accel.use_numba``), so the
``MASKREFINE_DISABLE_NUMBA`` environment flag can be flipped between calls.
Both variants evaluate the same formulas in the same summation order.
"""
import math

import numpy as np

from ._accel import njit, use_numba

__all__ = [
    "weighted_covariance",
    "quadratic_form",
    "image_source_accumulate",
    "KERNELS",
]


# --------------------------------------------------------------------------
# weighted spatial covariance:  out[f] = sum_t w[t, f] * y[t, f] y[t, f]^H
# --------------------------------------------------------------------------

def _weighted_covariance_numpy(y, w):
    return np.einsum("tf,tfm,tfn->fmn", w, y, y.conj())


@njit
def _weighted_covariance_numba(y, w):
    T, F, M = y.shape
    out = np.zeros((F, M, M), dtype=np.complex128)
    for f in range(F):
        for t in range(T):
            wt = w[t, f]
            if wt == 0.0:
                continue
            for m in range(M):
                ym = wt * y[t, f, m]
                for n in range(M):
                    out[f, m, n] += ym * y[t, f, n].conjugate()
    return out


def weighted_covariance(y, w):
    """Mask-weighted sum of outer products.

    Arguments: (T frames, F bins, M channels)
        y: complex, T x F x M
        w: real, T x F
    Return:
        F x M x M complex, not normalised
    """
    y = np.ascontiguousarray(y, dtype=np.complex128)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if use_numba():
        return _weighted_covariance_numba(y, w)
    return _weighted_covariance_numpy(y, w)


# --------------------------------------------------------------------------
# per-bin Hermitian quadratic form:  out[t, f] = Re(y[t, f]^H A[f] y[t, f])
# --------------------------------------------------------------------------

def _quadratic_form_numpy(y, a):
    return np.einsum("tfm,fmn,tfn->tf", y.conj(), a, y).real


@njit
def _quadratic_form_numba(y, a):
    T, F, M = y.shape
    out = np.zeros((T, F), dtype=np.float64)
    for t in range(T):
        for f in range(F):
            acc = 0.0 + 0.0j
            for m in range(M):
                ym = y[t, f, m].conjugate()
                for n in range(M):
                    acc += ym * a[f, m, n] * y[t, f, n]
            out[t, f] = acc.real
    return out


def quadratic_form(y, a):
    """Re(y^H A y) for every (t, f); y is T x F x M, A is F x M x M."""
    y = np.ascontiguousarray(y, dtype=np.complex128)
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if use_numba():
        return _quadratic_form_numba(y, a)
    return _quadratic_form_numpy(y, a)


# --------------------------------------------------------------------------
# image-source accumulation with windowed-sinc fractional delays
# --------------------------------------------------------------------------

def _image_source_numpy(images, orders, mics, beta, fs, c, length, half_width):
    n_mics = mics.shape[0]
    h = np.zeros((n_mics, length))
    offsets = np.arange(-half_width, half_width + 1)
    gain = beta ** orders
    for m in range(n_mics):
        d = np.sqrt(((images - mics[m]) ** 2).sum(axis=1))
        delay = d * fs / c
        centre = np.floor(delay + 0.5)
        keep = (centre - half_width < length) & (gain > 0.0)
        delay, centre, amp = delay[keep], centre[keep], gain[keep] / (4.0 * math.pi * d[keep])
        idx = centre[:, None] + offsets[None, :]
        tau = idx - delay[:, None]
        x = math.pi * tau
        safe = np.where(tau == 0.0, 1.0, x)
        sinc = np.where(tau == 0.0, 1.0, np.sin(x) / safe)
        win = 0.5 * (1.0 + np.cos(x / (half_width + 1)))
        vals = amp[:, None] * sinc * win
        inside = (idx >= 0) & (idx < length)
        h[m] = np.bincount(idx[inside].astype(np.int64), weights=vals[inside], minlength=length)
    return h


@njit
def _image_source_numba(images, orders, mics, beta, fs, c, length, half_width):
    n_mics = mics.shape[0]
    n_img = images.shape[0]
    h = np.zeros((n_mics, length))
    for m in range(n_mics):
        for i in range(n_img):
            g = beta ** orders[i]
            if g <= 0.0:
                continue
            dx = images[i, 0] - mics[m, 0]
            dy = images[i, 1] - mics[m, 1]
            dz = images[i, 2] - mics[m, 2]
            d = math.sqrt(dx * dx + dy * dy + dz * dz)
            delay = d * fs / c
            centre = math.floor(delay + 0.5)
            if centre - half_width >= length:
                continue
            amp = g / (4.0 * math.pi * d)
            for k in range(-half_width, half_width + 1):
                n = int(centre) + k
                if n < 0 or n >= length:
                    continue
                tau = n - delay
                x = math.pi * tau
                s = 1.0 if tau == 0.0 else math.sin(x) / x
                win = 0.5 * (1.0 + math.cos(x / (half_width + 1)))
                h[m, n] += amp * s * win
    return h


def image_source_accumulate(images, orders, mics, beta, fs, c, length, half_width=8):
    """Sum image contributions into per-microphone impulse responses.

    Arguments:
        images: I x 3 image-source positions [m]
        orders: I reflection counts (float)
        mics: M x 3 microphone positions [m]
        beta: uniform wall reflection coefficient
    Return:
        M x length real impulse responses
    """
    images = np.ascontiguousarray(images, dtype=np.float64)
    orders = np.ascontiguousarray(orders, dtype=np.float64)
    mics = np.ascontiguousarray(mics, dtype=np.float64)
    args = (images, orders, mics, float(beta), float(fs), float(c), int(length), int(half_width))
    if use_numba():
        return _image_source_numba(*args)
    return _image_source_numpy(*args)


# name -> (numpy implementation, numba implementation); used by the benchmark
KERNELS = {
    "weighted_covariance": (_weighted_covariance_numpy, _weighted_covariance_numba),
    "quadratic_form": (_quadratic_form_numpy, _quadratic_form_numba),
    "image_source_accumulate": (_image_source_numpy, _image_source_numba),
}
