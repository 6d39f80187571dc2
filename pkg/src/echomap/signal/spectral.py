"""DFT magnitude spectra and the two scalar energy summaries built on them.

PSD is the area under the magnitude spectrum; FD weights every bin by its
frequency so that equal-area spectra with energy in different bands separate.
"""

from __future__ import annotations

import numpy as np

from .._validation import InvalidParameterError, check_positive
from .types import RegionLabel, SignalOfInterest, Spectrum

# relative tolerance on sample spacing before a SOI counts as non-uniform
SPACING_RTOL = 1e-6
# midpoint of the pipe / no-pipe class means for the default synthetic survey
# (44.1 kHz, 2 kHz low-pass, 0.31 s SOIs); recalibrate for other recordings
DEFAULT_FD_THRESHOLD = 1.21e7


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def dft_bins(samples, n_fft: int | None = None) -> np.ndarray:
    """Complex DFT bins ``X_k = sum_n x(n) exp(-2j pi k n / N)`` for k in 0..N-1.

    ``samples`` is zero-padded to ``n_fft`` (default: next power of two).
    """
    x = np.asarray(samples, dtype=float)
    n = next_pow2(x.size) if n_fft is None else int(n_fft)
    if n < x.size:
        raise InvalidParameterError(f"n_fft={n} is shorter than the signal ({x.size})")
    return np.fft.fft(x, n)


def dft(soi: SignalOfInterest, onesided: bool = True) -> Spectrum:
    """Magnitude spectrum of a SOI on the zero-padded power-of-two grid.

    With ``onesided`` only bins ``0..N/2`` are kept (the rest mirror them for
    real input); frequencies are ``k * sample_rate / N`` in Hz.
    """
    if len(soi) == 0:
        raise InvalidParameterError("cannot transform an empty SOI")
    times = soi.times
    if times.size > 1:
        steps = np.diff(times)
        expected = 1.0 / soi.sample_rate
        # epoch-scale clocks lose resolution; allow a few ulps of the timestamps
        tolerance = SPACING_RTOL * expected + 4 * np.spacing(np.max(np.abs(times)))
        if np.max(np.abs(steps - expected)) > tolerance:
            raise InvalidParameterError("SOI samples are not uniformly spaced in time")
    n = next_pow2(len(soi))
    if onesided:
        bins = np.fft.rfft(soi.magnitudes, n)
        freqs = np.arange(bins.size) * soi.sample_rate / n
    else:
        bins = np.fft.fft(soi.magnitudes, n)
        freqs = np.arange(n) * soi.sample_rate / n
    return Spectrum(freqs, np.abs(bins))


def psd(spectrum: Spectrum) -> float:
    """Riemann-sum area ``sum_i x_i * df`` with the bin width applied to every bin."""
    return float(np.sum(spectrum.magnitudes) * spectrum.bin_width)


def fd(spectrum: Spectrum) -> float:
    """Frequency density ``sum_i x_i * f_i``."""
    return float(np.dot(spectrum.magnitudes, spectrum.frequencies))


def band_energy(spectrum: Spectrum, low: float, high: float) -> float:
    """Sum of squared magnitudes for bins with ``low <= f <= high``."""
    mask = (spectrum.frequencies >= low) & (spectrum.frequencies <= high)
    return float(np.sum(spectrum.magnitudes[mask] ** 2))


def classify_region(fd_value: float, threshold: float) -> RegionLabel:
    """Low FD means absorbed energy, i.e. something buried below the tap.

    A value exactly at the threshold is ``NORMAL``.
    """
    threshold = check_positive(threshold, "threshold")
    if fd_value < threshold:
        return RegionLabel.SUBSURFACE_OBJECT
    return RegionLabel.NORMAL
