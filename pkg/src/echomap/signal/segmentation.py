"""Locating impacts in a long recording.

Two passes: a coarse screen over fixed-length intervals that keeps only the
stretches holding taps (and drops outlier noise bursts), then the precise
onset rule that crops one fixed-length signal of interest per impact.
"""

from __future__ import annotations

import warnings

import numpy as np

from .._validation import check_positive
from .types import AudioTrace, IntervalSegmentation, SignalOfInterest

DEFAULT_INTERVAL_S = 0.75
DEFAULT_RELEVANCE = 0.5
DEFAULT_OUTLIER_SIGMA = 3.0
# floor on the spread used by the outlier test, in full-scale units; saturated
# taps all peak at 1.0 and would otherwise reject each other on rounding noise
DEFAULT_MIN_SPREAD = 0.01

SOI_THRESHOLD = 0.999
SOI_PRE_S = 0.01
SOI_POST_S = 0.3


def _interval_maxima(samples: np.ndarray, n: int) -> np.ndarray:
    starts = np.arange(0, samples.size, n)
    return np.maximum.reduceat(np.abs(samples), starts)


def segment_intervals(
    trace: AudioTrace,
    interval_length: float = DEFAULT_INTERVAL_S,
    relevance_threshold: float = DEFAULT_RELEVANCE,
    outlier_sigma: float = DEFAULT_OUTLIER_SIGMA,
    min_spread: float = DEFAULT_MIN_SPREAD,
) -> IntervalSegmentation:
    """Split ``trace`` into intervals, keep the loud ones, pad and merge them.

    Each interval whose peak magnitude exceeds ``relevance_threshold`` is
    widened by one interval on both sides (clamped to the trace). Overlapping
    padded runs merge into one region. A region is rejected as a noise burst
    when its peak exceeds ``mean + outlier_sigma * std`` of the peaks of the
    *other* regions; leaving the candidate out of its own statistics is what
    lets a single burst among a handful of taps be detected at all.
    """
    interval_length = check_positive(interval_length, "interval_length")
    check_positive(relevance_threshold, "relevance_threshold", allow_zero=True)
    n = max(int(round(interval_length * trace.sample_rate)), 1)
    samples = trace.samples
    if samples.size < n:
        message = f"trace ({trace.duration:.3f} s) is shorter than one interval ({interval_length} s)"
        warnings.warn(message, stacklevel=2)
        return IntervalSegmentation(interval_length, n, warning=message)

    maxima = _interval_maxima(samples, n)
    last = maxima.size - 1
    runs: list[list[int]] = []
    for i in np.flatnonzero(maxima > relevance_threshold):
        lo, hi = max(i - 1, 0), min(i + 1, last)
        if runs and lo <= runs[-1][1]:
            runs[-1][1] = max(runs[-1][1], hi)
        else:
            runs.append([lo, hi])

    regions = [(lo * n, min((hi + 1) * n, samples.size)) for lo, hi in runs]
    peaks = np.array([np.max(np.abs(samples[a:b])) for a, b in regions])
    keep, rejected = [], []
    for k, (a, b) in enumerate(regions):
        others = np.delete(peaks, k)
        if others.size >= 2:
            limit = others.mean() + outlier_sigma * max(others.std(), min_spread)
            if peaks[k] > limit:
                rejected.append((a, b, f"peak {peaks[k]:.4f} exceeds {outlier_sigma:g}-sigma limit {limit:.4f}"))
                continue
        keep.append((a, b))
    return IntervalSegmentation(interval_length, n, keep, rejected)


def detect_soi(
    trace: AudioTrace,
    threshold: float = SOI_THRESHOLD,
    pre: float = SOI_PRE_S,
    post: float = SOI_POST_S,
    normalize: bool = False,
    regions: list[tuple[int, int]] | None = None,
) -> list[SignalOfInterest]:
    """Crop ``[t_start - pre, t_start + post]`` around every impact onset.

    ``t_start`` is the first sample whose magnitude is over ``threshold``.
    Magnitudes are in full-scale units unless ``normalize`` rescales the
    trace by its peak first. After a detection the next full window is
    skipped so a single ringing impact yields one SOI. ``regions`` restricts
    the onset search to half-open sample ranges (the windows themselves are
    still cut from the whole trace).
    """
    magnitude = np.abs(trace.samples)
    if normalize:
        peak = magnitude.max()
        if peak > 0:
            magnitude = magnitude / peak
    fs = trace.sample_rate
    pre_n = int(round(pre * fs))
    post_n = int(round(post * fs))
    window = pre_n + post_n + 1
    if regions is None:
        regions = [(0, magnitude.size)]

    hits = np.flatnonzero(magnitude > threshold)
    onsets = []
    next_allowed = -1
    for start, stop in sorted(regions):
        pos = np.searchsorted(hits, max(start, next_allowed))
        while pos < hits.size and hits[pos] < stop:
            i = int(hits[pos])
            onsets.append(i)
            next_allowed = i + window
            pos = np.searchsorted(hits, next_allowed)

    sois = []
    for i in onsets:
        a, b = i - pre_n, i + post_n + 1
        clipped = a < 0 or b > magnitude.size
        a, b = max(a, 0), min(b, magnitude.size)
        sois.append(
            SignalOfInterest(
                times=trace.start_time + np.arange(a, b) / fs,
                magnitudes=trace.samples[a:b],
                t_start=trace.start_time + i / fs,
                sample_rate=fs,
                clipped=clipped,
            )
        )
    return sois
