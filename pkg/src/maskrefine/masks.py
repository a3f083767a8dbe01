"""Mask ingestion: complex-mask filtering, energetic real masks, median
pooling, oracle/corrupted masks and the MCMF mask file format.

Masks are plain numpy arrays shaped T x F x M (per channel) or T x F (pooled).
"""
import struct

import numpy as np

from .errors import DataError

__all__ = [
    "apply_complex_mask",
    "energetic_mask",
    "median_pool",
    "complement_mask",
    "oracle_mask",
    "corrupt_mask",
    "read_mask_file",
    "write_mask_file",
    "MCMF_MAGIC",
]

MCMF_MAGIC = b"MCMF"
MCMF_VERSION = 1
_HEADER = struct.Struct("<4sBBHIII")

CLIP = 1e-6


def _bins(x):
    return getattr(x, "bins", x)


def _same_shape(a, b, what):
    if a.shape != b.shape:
        raise DataError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def apply_complex_mask(y, H):
    """Source estimate xi = H * y (full complex product).

    ``y`` may be a Spectrogram or an array; the result has the same kind.
    """
    yb = _bins(y)
    H = np.asarray(H)
    _same_shape(yb, H, "apply_complex_mask")
    xi = H * yb
    return y.with_bins(xi) if hasattr(y, "with_bins") else xi


def energetic_mask(y, xi):
    """|xi|^2 / (|y - xi|^2 + |xi|^2), with 0 where both terms vanish."""
    yb, xb = np.asarray(_bins(y)), np.asarray(_bins(xi))
    _same_shape(yb, xb, "energetic_mask")
    num = np.abs(xb) ** 2
    den = np.abs(yb - xb) ** 2 + num
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def median_pool(gammas):
    """Per-bin median across the channel (last) axis.

    For even channel counts this is the midpoint of the two central values,
    which is what ``np.median`` computes.
    """
    g = np.asarray(gammas, dtype=np.float64)
    if g.ndim == 2:
        return g.copy()
    if g.shape[-1] < 1:
        raise DataError("median_pool needs at least one channel")
    return np.median(g, axis=-1)


def complement_mask(alpha_s):
    return 1.0 - np.asarray(alpha_s, dtype=np.float64)


def oracle_mask(s, n):
    """Ideal ratio mask |s|^2 / (|s|^2 + |n|^2); 0 where both are silent."""
    sb, nb = np.asarray(_bins(s)), np.asarray(_bins(n))
    _same_shape(sb, nb, "oracle_mask")
    ps, pn = np.abs(sb) ** 2, np.abs(nb) ** 2
    out = np.zeros(ps.shape)
    np.divide(ps, ps + pn, out=out, where=(ps + pn) > 0)
    return out


def corrupt_mask(gamma, noise_level, seed):
    """Perturb a [0, 1] mask with Gaussian noise of std ``noise_level`` in the
    logit domain. Inputs are clipped to [1e-6, 1 - 1e-6] first."""
    if noise_level < 0:
        raise DataError("noise_level must be non-negative")
    g = np.clip(np.asarray(gamma, dtype=np.float64), CLIP, 1.0 - CLIP)
    rng = np.random.default_rng(seed)
    logit = np.log(g) - np.log1p(-g)
    logit = logit + noise_level * rng.standard_normal(g.shape)
    return 1.0 / (1.0 + np.exp(-logit))


# --------------------------------------------------------------------------
# MCMF file format
# --------------------------------------------------------------------------

def write_mask_file(path, mask):
    """Write a real or complex mask (T x F or T x F x M) as MCMF."""
    m = np.asarray(mask)
    if m.ndim == 2:
        m = m[:, :, None]
    if m.ndim != 3:
        raise DataError(f"mask must be T x F or T x F x M, got shape {m.shape}")
    if np.iscomplexobj(m):
        dtype_code = 1
        payload = np.empty(m.shape + (2,), dtype="<f4")
        payload[..., 0] = m.real
        payload[..., 1] = m.imag
    else:
        dtype_code = 0
        payload = m.astype("<f4")
    header = _HEADER.pack(MCMF_MAGIC, MCMF_VERSION, dtype_code, 0, *m.shape)
    with open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(payload).tobytes())


def read_mask_file(path):
    """Read an MCMF file; returns a T x F x M float32 or complex64 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != MCMF_MAGIC:
        raise DataError(f"{path}: not an MCMF file")
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    _, version, dtype_code, reserved, T, F, M = _HEADER.unpack_from(raw)
    if version != MCMF_VERSION:
        raise DataError(f"{path}: unsupported MCMF version {version}")
    if dtype_code not in (0, 1):
        raise DataError(f"{path}: unknown MCMF dtype code {dtype_code}")
    if reserved != 0:
        raise DataError(f"{path}: reserved header bytes must be zero")
    if min(T, F, M) == 0:
        raise DataError(f"{path}: zero dimension in header ({T} x {F} x {M})")
    n_floats = T * F * M * (2 if dtype_code else 1)
    if n_floats * 4 > 2 ** 63 - 1:
        raise DataError(f"{path}: dimension overflow ({T} x {F} x {M})")
    body = raw[_HEADER.size:]
    if len(body) < n_floats * 4:
        raise DataError(f"{path}: truncated payload ({len(body)} of {n_floats * 4} bytes)")
    if len(body) > n_floats * 4:
        raise DataError(f"{path}: {len(body) - n_floats * 4} unexpected trailing bytes")
    data = np.frombuffer(body, dtype="<f4")
    if dtype_code:
        data = data.reshape(T, F, M, 2)
        out = np.empty((T, F, M), dtype=np.complex64)
        out.real = data[..., 0]
        out.imag = data[..., 1]
        return out
    return data.reshape(T, F, M).astype(np.float32)
