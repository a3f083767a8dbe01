"""End-to-end enhancement: priors -> refinement -> filtering.

Three filter modes, each with or without CGMM refinement:

* ``crm``: single-channel complex mask at the reference microphone. Without
  refinement this is the DNN mask itself; with refinement the refined
  posterior is applied as a real ratio mask.
* ``sc``: single-channel real Wiener gain sqrt(mask) at the reference mic.
* ``mc``: MVDR beamformer plus sqrt(mask) post-gain.
"""
from dataclasses import dataclass, replace

import numpy as np

from .beamform import apply_filter, compute_sos, mwf_weights, steering_vector, subarray_fuse
from .cgmm import CgmmConfig, refine
from .errors import DataError
from .masks import median_pool
from .roomsim import nested_array_geometry

__all__ = ["PipelineConfig", "MODES", "VARIANTS", "process", "mc_filter"]

MODES = ("crm", "sc", "mc")
VARIANTS = tuple((mode, flag) for mode in MODES for flag in (False, True))


@dataclass(frozen=True)
class PipelineConfig:
    fft_size: int = 512
    window_ms: float = 32.0
    hop_fraction: float = 0.5
    em_iterations: int = 20
    rank1: bool = False
    loading: float = 1e-6
    reference_channel: int = 0
    gain_floor: float = 0.0
    band_split_hz: float = 1000.0
    subarray: bool = True

    def window_length(self, sample_rate):
        return int(round(self.window_ms * 1e-3 * sample_rate))

    def hop(self, sample_rate):
        return int(round(self.window_length(sample_rate) * self.hop_fraction))

    def stft_params(self, sample_rate):
        return dict(fft_size=self.fft_size, window_length=self.window_length(sample_rate),
                    hop=self.hop(sample_rate))

    @property
    def cgmm(self):
        return CgmmConfig(iterations=self.em_iterations, rank1=self.rank1, loading=self.loading)

    def replace(self, **kw):
        return replace(self, **kw)


def mc_filter(y, lambda_s, lambda_n, config, reference_channel=0):
    """Multi-channel Wiener filter output (T x F) for given masks."""
    stats = compute_sos(y, lambda_s, lambda_n)
    r = steering_vector(stats.Phi_s, reference_channel)
    bank = mwf_weights(stats, r, lambda_s, lambda_n, config.loading, config.gain_floor)
    return apply_filter(y, bank)


def process(y, prior, config=None, geometry=None, variants=VARIANTS, crm_mask=None,
            sample_rate=16000):
    """Run the requested (mode, refined) variants on one recording.

    Arguments:
        y: T x F x M observations (array or Spectrogram)
        prior: per-channel speech masks T x F x M, or a pooled T x F mask
        crm_mask: T x F complex mask at the reference channel (``crm`` mode)
    Return:
        dict with ``alpha_s`` and, when refinement ran, ``lambda_s`` (both
        T x F, fused across sub-arrays), ``loglik`` (summed over sub-arrays)
        and one T x F output spectrum per requested variant.
    """
    config = config or PipelineConfig()
    y = np.asarray(getattr(y, "bins", y), dtype=np.complex128)
    prior = np.asarray(prior, dtype=np.float64)
    T, F, M = y.shape
    if prior.shape[:2] != (T, F) or (prior.ndim == 3 and prior.shape[2] != M):
        raise DataError(f"mask shape {prior.shape} does not match observations {y.shape}")
    ref = config.reference_channel
    if not 0 <= ref < M:
        raise DataError(f"reference channel {ref} out of range for {M} channels")
    variants = tuple(variants)
    want_refine = any(flag for _, flag in variants)
    mc_flags = [flag for mode, flag in variants if mode == "mc"]
    logliks = []

    def band(y_sub, channels):
        if ref not in channels:
            raise DataError(f"reference channel {ref} is not part of sub-array {channels}")
        local_ref = channels.index(ref)
        p = prior[:, :, list(channels)] if prior.ndim == 3 else prior
        alpha_s = median_pool(p)
        outs = [alpha_s]
        lam_s = alpha_s
        if want_refine:
            state = refine(y_sub, alpha_s, config.cgmm)
            logliks.append(np.asarray(state.loglik))
            lam_s = np.array(state.lambda_s)
            outs.append(lam_s)
        for flag in mc_flags:
            if flag:
                outs.append(mc_filter(y_sub, lam_s, 1.0 - lam_s, config, local_ref))
            else:
                outs.append(mc_filter(y_sub, alpha_s, 1.0 - alpha_s, config, local_ref))
        return tuple(outs)

    if config.subarray:
        geometry = geometry or nested_array_geometry()
        if geometry.n_mics != M:
            raise DataError(f"array geometry has {geometry.n_mics} elements but input has {M} "
                            "channels; use --subarray off for other arrays")
        fused = subarray_fuse(band, y, geometry, config.band_split_hz, config.fft_size,
                              sample_rate)
    else:
        fused = band(y, tuple(range(M)))

    fused = list(fused)
    result = {"alpha_s": fused.pop(0)}
    if want_refine:
        result["lambda_s"] = fused.pop(0)
        result["loglik"] = np.sum(logliks, axis=0)
    y_ref = y[:, :, ref]
    for mode, flag in variants:
        mask = result["lambda_s"] if flag else result["alpha_s"]
        if mode == "mc":
            out = fused.pop(0)
        elif mode == "sc":
            out = np.sqrt(mask) * y_ref
        elif mode == "crm":
            if flag:
                out = mask * y_ref
            else:
                if crm_mask is None:
                    raise DataError("crm mode needs a complex mask at the reference channel")
                out = np.asarray(crm_mask) * y_ref
        else:
            raise DataError(f"unknown mode {mode!r}")
        result[(mode, flag)] = out
    return result
