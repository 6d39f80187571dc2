"""Value types passed between the acoustic processing stages."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .._validation import InvalidParameterError, InvalidShapeError

MEL_BANDS = 60
MEL_FRAMES = 41


class RegionLabel(str, Enum):
    NORMAL = "NORMAL"
    SUBSURFACE_OBJECT = "SUBSURFACE_OBJECT"


def _readonly(arr: np.ndarray) -> np.ndarray:
    # a view keeps the caller's array writable and avoids a copy
    view = arr.view()
    view.setflags(write=False)
    return view


@dataclass(frozen=True)
class AudioTrace:
    """Mono microphone samples in full-scale units.

    ``start_time`` is the wall-clock time of sample 0 in seconds; every time
    reported downstream (SOI starts, pose lookups) lives on that clock.
    """

    samples: np.ndarray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidShapeError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise InvalidParameterError("samples must be finite")
        if np.max(np.abs(samples)) > 1.0 + 1e-9:
            raise InvalidParameterError("samples must be normalized to [-1, 1]")
        if not self.sample_rate > 0:
            raise InvalidParameterError(f"sample_rate must be > 0, got {self.sample_rate}")
        object.__setattr__(self, "samples", _readonly(samples))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "start_time", float(self.start_time))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    def slice(self, start: int, stop: int) -> AudioTrace:
        """Sub-trace over sample indices ``[start, stop)`` keeping the clock."""
        start = max(int(start), 0)
        stop = min(int(stop), self.samples.size)
        return AudioTrace(
            self.samples[start:stop], self.sample_rate, self.start_time + start / self.sample_rate
        )


@dataclass(frozen=True)
class SignalOfInterest:
    times: np.ndarray
    magnitudes: np.ndarray
    t_start: float
    sample_rate: float
    clipped: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        mags = np.asarray(self.magnitudes, dtype=float)
        if times.ndim != 1 or times.shape != mags.shape:
            raise InvalidShapeError("times and magnitudes must be 1-D arrays of equal length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise InvalidParameterError("times must be strictly increasing")
        object.__setattr__(self, "times", _readonly(times))
        object.__setattr__(self, "magnitudes", _readonly(mags))

    def __len__(self) -> int:
        return self.times.size

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0]) if self.times.size else 0.0


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        mags = np.asarray(self.magnitudes, dtype=float)
        if freqs.ndim != 1 or freqs.shape != mags.shape or freqs.size == 0:
            raise InvalidShapeError("frequencies and magnitudes must be non-empty 1-D arrays of equal length")
        if np.any(mags < 0):
            raise InvalidParameterError("magnitudes must be non-negative")
        if freqs.size > 1:
            steps = np.diff(freqs)
            if np.any(steps < 0):
                raise InvalidParameterError("frequencies must be nondecreasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
                raise InvalidParameterError("frequency bins must be uniformly spaced")
        object.__setattr__(self, "frequencies", _readonly(freqs))
        object.__setattr__(self, "magnitudes", _readonly(mags))

    @property
    def bin_width(self) -> float:
        if self.frequencies.size < 2:
            return 0.0
        return float(self.frequencies[1] - self.frequencies[0])

    def scaled(self, factor: float) -> Spectrum:
        return Spectrum(self.frequencies, self.magnitudes * factor)


@dataclass(frozen=True)
class MelSegment:
    values: np.ndarray
    source_soi_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (MEL_BANDS, MEL_FRAMES):
            raise InvalidShapeError(f"mel segment must be {MEL_BANDS}x{MEL_FRAMES}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("mel segment values must be finite")
        object.__setattr__(self, "values", _readonly(values))


@dataclass(frozen=True)
class IntervalSegmentation:
    """Result of coarse interval screening.

    Intervals are half-open sample-index ranges ``(start, stop)`` after padding
    and merging; rejected entries carry the reason as a third element.
    """

    interval_length: float
    interval_samples: int
    relevant_intervals: list[tuple[int, int]] = field(default_factory=list)
    rejected_intervals: list[tuple[int, int, str]] = field(default_factory=list)
    warning: str | None = None
