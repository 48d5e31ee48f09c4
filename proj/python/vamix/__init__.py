"""Time-frequency mask remixing: STFT analysis, source masks, remixing and evaluation."""

from ._vamix import (
    DEFAULT_ALPHA,
    SAMPLE_RATE,
    Mask,
    MaskKind,
    MaskSet,
    StftParams,
    VamixError,
    bss_eval,
    corrupt_binary_mask,
    ideal_binary_masks,
    ideal_ratio_masks,
    istft,
    random_binary_mask,
    read_mask_set,
    read_wav,
    remix,
    sdr,
    separate_and_add,
    separate_source,
    slider_to_gain,
    smooth_cbm,
    smooth_zlbm,
    smoothing_gain,
    snr_to_reference,
    stft,
    synthetic_pair,
    write_mask_set,
    write_wav,
)

__all__ = [name for name in dir() if not name.startswith("_")]
