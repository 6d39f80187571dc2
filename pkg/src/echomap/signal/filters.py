"""Linear-phase low-pass conditioning of raw microphone traces."""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import oaconvolve

from .._validation import InvalidParameterError, check_positive
from .types import AudioTrace

DEFAULT_CUTOFF_HZ = 2000.0
# kernel length in units of sample_rate / cutoff
ORDER_FACTOR = 4.0


def lowpass_kernel(sample_rate: float, cutoff: float) -> np.ndarray:
    """Hamming-windowed sinc kernel with unit DC gain and odd length.

    The tap count is ``ceil(4 * sample_rate / cutoff)`` bumped to the next odd
    integer so the kernel is symmetric about a whole sample.
    """
    sample_rate = check_positive(sample_rate, "sample_rate")
    cutoff = check_positive(cutoff, "cutoff")
    if cutoff >= sample_rate / 2:
        raise InvalidParameterError(
            f"cutoff {cutoff} Hz must be below the Nyquist frequency {sample_rate / 2} Hz"
        )
    numtaps = math.ceil(ORDER_FACTOR * sample_rate / cutoff)
    if numtaps % 2 == 0:
        numtaps += 1
    m = np.arange(numtaps) - (numtaps - 1) / 2
    normalized = 2.0 * cutoff / sample_rate
    kernel = normalized * np.sinc(normalized * m) * np.hamming(numtaps)
    return kernel / kernel.sum()


def low_pass_filter(trace: AudioTrace, cutoff: float = DEFAULT_CUTOFF_HZ) -> AudioTrace:
    """Zero-phase FIR low-pass; output has the input's length and clock.

    The symmetric kernel is centred on each output sample, which removes the
    group delay. Results are clipped back to full scale because ringing on
    saturated input can overshoot 1.0 by a fraction of a percent.
    """
    kernel = lowpass_kernel(trace.sample_rate, cutoff)
    if not np.any(trace.samples):
        return AudioTrace(np.zeros(len(trace)), trace.sample_rate, trace.start_time)
    filtered = oaconvolve(trace.samples, kernel, mode="same")
    np.clip(filtered, -1.0, 1.0, out=filtered)
    return AudioTrace(filtered, trace.sample_rate, trace.start_time)
