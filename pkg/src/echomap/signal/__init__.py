"""Time-domain conditioning, impact detection and spectral analysis."""

from .filters import DEFAULT_CUTOFF_HZ, low_pass_filter, lowpass_kernel
from .io import read_wav, write_wav
from .mel import mel_segments
from .segmentation import detect_soi, segment_intervals
from .spectral import band_energy, classify_region, dft, dft_bins, fd, psd
from .types import (
    AudioTrace,
    IntervalSegmentation,
    MelSegment,
    RegionLabel,
    SignalOfInterest,
    Spectrum,
)

__all__ = [
    "AudioTrace",
    "DEFAULT_CUTOFF_HZ",
    "IntervalSegmentation",
    "MelSegment",
    "RegionLabel",
    "SignalOfInterest",
    "Spectrum",
    "band_energy",
    "classify_region",
    "detect_soi",
    "dft",
    "dft_bins",
    "fd",
    "low_pass_filter",
    "lowpass_kernel",
    "mel_segments",
    "psd",
    "read_wav",
    "segment_intervals",
    "write_wav",
]
