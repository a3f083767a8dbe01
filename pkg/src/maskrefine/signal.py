"""STFT analysis/synthesis and WAV file I/O."""
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "Waveform",
    "Spectrogram",
    "hann_periodic",
    "stft",
    "istft",
    "interior_slice",
    "read_wav",
    "write_wav",
]


@dataclass(frozen=True)
class Waveform:
    """Multichannel time signal; ``samples`` is M x N float64."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise DataError(f"waveform samples must be 1-D or 2-D, got {x.ndim}-D")
        if self.sample_rate <= 0:
            raise DataError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]


@dataclass(frozen=True)
class Spectrogram:
    """One-sided complex STFT, ``bins`` is T x F x M."""

    bins: np.ndarray
    fft_size: int
    hop: int
    window_length: int
    sample_rate: int

    def __post_init__(self):
        b = np.asarray(self.bins)
        if b.ndim == 2:
            b = b[:, :, None]
        if b.ndim != 3:
            raise DataError(f"spectrogram bins must be T x F x M, got shape {b.shape}")
        if b.shape[1] != self.fft_size // 2 + 1:
            raise DataError(
                f"spectrogram has {b.shape[1]} bins, expected {self.fft_size // 2 + 1} "
                f"for fft_size={self.fft_size}"
            )
        object.__setattr__(self, "bins", b.astype(np.complex128, copy=False))

    @property
    def shape(self):
        return self.bins.shape

    @property
    def n_frames(self):
        return self.bins.shape[0]

    def with_bins(self, bins):
        return Spectrogram(bins, self.fft_size, self.hop, self.window_length, self.sample_rate)

    def frequencies(self):
        return np.arange(self.fft_size // 2 + 1) * self.sample_rate / self.fft_size


def hann_periodic(n):
    """DFT-even Hann window; sums to a constant at 50% overlap."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _check_params(fft_size, window_length, hop):
    if window_length > fft_size:
        raise DataError(f"window_length {window_length} exceeds fft_size {fft_size}")
    if window_length % 2 or hop != window_length // 2:
        raise DataError("hop must be half of an even window_length")


def stft(w, fft_size=512, window_length=512, hop=256):
    """Frame, window and FFT every channel of ``w``.

    Frames are left-aligned with no edge padding:
    T = floor((N - window_length) / hop) + 1.
    """
    _check_params(fft_size, window_length, hop)
    x = w.samples
    n = x.shape[1]
    if n < window_length:
        raise DataError(f"input too short: {n} samples < window of {window_length}")
    frames = np.lib.stride_tricks.sliding_window_view(x, window_length, axis=1)[:, ::hop]
    spec = np.fft.rfft(frames * hann_periodic(window_length), n=fft_size, axis=-1)
    return Spectrogram(np.transpose(spec, (1, 2, 0)), fft_size, hop, window_length, w.sample_rate)


def istft(spec):
    """Weighted overlap-add synthesis normalised by the summed squared window.

    Output length is (T - 1) * hop + window_length. Samples not covered by two
    frames are only approximately reconstructed; see ``interior_slice``.
    """
    _check_params(spec.fft_size, spec.window_length, spec.hop)
    T, F, M = spec.bins.shape
    L, hop = spec.window_length, spec.hop
    win = hann_periodic(L)
    frames = np.fft.irfft(spec.bins, n=spec.fft_size, axis=1)[:, :L, :] * win[None, :, None]
    n_out = (T - 1) * hop + L
    out = np.zeros((n_out, M))
    norm = np.zeros(n_out)
    for t in range(T):
        out[t * hop:t * hop + L] += frames[t]
        norm[t * hop:t * hop + L] += win ** 2
    nz = norm > 1e-8
    out[nz] /= norm[nz, None]
    out[~nz] = 0.0
    return Waveform(out.T, spec.sample_rate)


def interior_slice(n_frames, window_length, hop):
    """Samples covered by two analysis frames (exact reconstruction region)."""
    return slice(hop, (n_frames - 1) * hop + window_length - hop)


# --------------------------------------------------------------------------
# WAV (RIFF) I/O: 16-bit PCM and 32-bit IEEE float
# --------------------------------------------------------------------------

_PCM, _FLOAT, _EXTENSIBLE = 1, 3, 0xFFFE


def read_wav(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise DataError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4:pos + 8])
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise DataError(f"{path}: malformed fmt chunk")
            tag, channels, rate, _, _, bits = struct.unpack("<HHIIHH", body[:16])
            if tag == _EXTENSIBLE:
                if len(body) < 26:
                    raise DataError(f"{path}: malformed extensible fmt chunk")
                (tag,) = struct.unpack("<H", body[24:26])
            fmt = (tag, channels, rate, bits)
        elif cid == b"data":
            if fmt is None:
                raise DataError(f"{path}: data chunk before fmt chunk")
            if len(body) < size:
                raise DataError(f"{path}: unexpected end of WAV data")
            return _decode(path, body, *fmt)
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise DataError(f"{path}: missing fmt chunk")
    raise DataError(f"{path}: unexpected end of WAV data")


def _decode(path, body, tag, channels, rate, bits):
    if channels < 1 or rate < 1:
        raise DataError(f"{path}: malformed header ({channels} channels, {rate} Hz)")
    if tag == _PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif tag == _FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise DataError(f"{path}: unsupported codec (format tag {tag}, {bits} bits)")
    frame = dtype.itemsize * channels
    if len(body) % frame:
        raise DataError(f"{path}: unexpected end of WAV data")
    data = np.frombuffer(body, dtype=dtype).reshape(-1, channels).T
    return Waveform(data.astype(np.float64) * scale, rate)


def write_wav(path, w, subtype="float32"):
    """Write ``w`` as 32-bit float (default) or 16-bit PCM (``subtype="pcm16"``)."""
    x = w.samples
    if subtype == "float32":
        tag, bits = _FLOAT, 32
        payload = np.ascontiguousarray(x.T, dtype="<f4").tobytes()
    elif subtype == "pcm16":
        tag, bits = _PCM, 16
        q = np.clip(np.round(x.T * 32768.0), -32768, 32767)
        payload = np.ascontiguousarray(q, dtype="<i2").tobytes()
    else:
        raise DataError(f"unsupported WAV subtype {subtype!r}")
    channels = x.shape[0]
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, int(w.sample_rate),
                      int(w.sample_rate) * block, block, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if tag == _FLOAT:
        chunks += b"fact" + struct.pack("<II", 4, x.shape[1])
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)
