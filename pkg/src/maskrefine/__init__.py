"""maskrefine: CGMM refinement of DNN time-frequency masks and mask-driven
multichannel Wiener filtering, with a small image-source simulator for
desk-scale evaluation."""
from .errors import DataError, MaskRefineError, NumericalError
from .signal import Spectrogram, Waveform, istft, read_wav, stft, write_wav
from .masks import (
    apply_complex_mask,
    corrupt_mask,
    energetic_mask,
    median_pool,
    oracle_mask,
    read_mask_file,
    write_mask_file,
)
from .cgmm import CgmmConfig, CgmmState, refine
from .beamform import compute_sos, mwf_weights, steering_vector, apply_filter, subarray_fuse
from .pipeline import PipelineConfig, process
from .metrics import auc, averaged_roc, ideal_binary_mask, roc, si_snr

__version__ = "0.1.0"
