"""Fixed-size log-mel patches cut from a signal of interest."""

from __future__ import annotations

import numpy as np

from .._validation import check_positive
from .types import MEL_BANDS, MEL_FRAMES, MelSegment, SignalOfInterest

FMIN_HZ = 0.0
FMAX_HZ = 2000.0
WIN_LENGTH = 1024
HOP_LENGTH = 256
N_FFT = 4096
SEGMENT_HOP = 20
FLOOR_DB = -80.0


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_band_centers(n_mels: int = MEL_BANDS, fmin: float = FMIN_HZ, fmax: float = FMAX_HZ) -> np.ndarray:
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    return edges[1:-1]


def mel_filterbank(
    sample_rate: float,
    n_fft: int = N_FFT,
    n_mels: int = MEL_BANDS,
    fmin: float = FMIN_HZ,
    fmax: float = FMAX_HZ,
) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape ``(n_mels, n_fft // 2 + 1)``.

    Each triangle is scaled to unit area so wide high-frequency bands do not
    collect more power than narrow low ones.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lower) / (center - lower)
    falling = (upper - bins) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return weights * (2.0 / (upper - lower))


def power_spectrogram(samples, win_length: int = WIN_LENGTH, hop: int = HOP_LENGTH, n_fft: int = N_FFT) -> np.ndarray:
    """Hann-windowed STFT power, shape ``(n_fft // 2 + 1, n_frames)``; no centre padding."""
    x = np.asarray(samples, dtype=float)
    if x.size < win_length:
        return np.zeros((n_fft // 2 + 1, 0))
    frames = np.lib.stride_tricks.sliding_window_view(x, win_length)[::hop]
    spec = np.fft.rfft(frames * np.hanning(win_length), n_fft, axis=1)
    return (np.abs(spec) ** 2).T


def log_relative(power: np.ndarray, floor_db: float = FLOOR_DB) -> np.ndarray:
    """dB relative to the patch maximum, floored; an all-zero patch is all floor."""
    peak = power.max() if power.size else 0.0
    if peak <= 0:
        return np.full(power.shape, floor_db)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak)
    return np.maximum(db, floor_db)


def mel_segments(
    soi: SignalOfInterest,
    sample_rate: float | None = None,
    segment_hop: int = SEGMENT_HOP,
    floor_db: float = FLOOR_DB,
) -> list[MelSegment]:
    """Cut 60x41 log-mel patches from ``soi``; empty if it is too short for one."""
    fs = check_positive(soi.sample_rate if sample_rate is None else sample_rate, "sample_rate")
    power = power_spectrogram(soi.magnitudes)
    if power.shape[1] < MEL_FRAMES:
        return []
    mel_power = mel_filterbank(fs) @ power
    segments = []
    for start in range(0, mel_power.shape[1] - MEL_FRAMES + 1, segment_hop):
        patch = mel_power[:, start : start + MEL_FRAMES]
        segments.append(MelSegment(log_relative(patch, floor_db), source_soi_index=0))
    return segments
