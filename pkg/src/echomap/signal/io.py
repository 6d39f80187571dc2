"""WAV ingestion and CSV export for traces, spectra and per-SOI reports."""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .._validation import InvalidParameterError
from .types import AudioTrace, Spectrum

PCM16_SCALE = 32768.0


class WavFormatError(ValueError):
    pass


def read_wav(path, start_time: float = 0.0) -> AudioTrace:
    """Load a 16-bit PCM or 32-bit float WAV as a full-scale mono trace.

    Multi-channel files keep channel 0 and emit a warning.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (FileNotFoundError, PermissionError, IsADirectoryError):
        raise
    except (ValueError, OSError) as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.ndim == 2:
        warnings.warn(f"{path} has {data.shape[1]} channels; using channel 0", stacklevel=2)
        data = data[:, 0]
    if data.dtype == np.int16:
        samples = data.astype(float) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")
    if samples.size == 0:
        raise WavFormatError(f"{path}: no samples")
    try:
        return AudioTrace(np.clip(samples, -1.0, 1.0), rate, start_time)
    except InvalidParameterError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc


def write_wav(path, trace: AudioTrace, fmt: str = "pcm16") -> Path:
    path = Path(path)
    if fmt == "pcm16":
        data = np.clip(np.round(trace.samples * PCM16_SCALE), -32768, 32767).astype(np.int16)
    elif fmt == "float32":
        data = trace.samples.astype(np.float32)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    rate = int(round(trace.sample_rate))
    if rate != trace.sample_rate:
        raise InvalidParameterError("WAV requires an integer sample rate")
    wavfile.write(path, rate, data)
    return path


def write_spectrum_csv(path, spectrum: Spectrum) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_hz", "magnitude"])
        for f, x in zip(spectrum.frequencies, spectrum.magnitudes):
            writer.writerow([repr(float(f)), repr(float(x))])
    return path


def read_spectrum_csv(path) -> Spectrum:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Spectrum(data[:, 0], data[:, 1])


REPORT_FIELDS = ["soi_index", "t_start", "fd", "psd", "label"]


def write_soi_report(path, rows) -> Path:
    """``rows`` are mappings with the ``soi_index,t_start,fd,psd,label`` keys."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    "soi_index": int(row["soi_index"]),
                    "t_start": repr(float(row["t_start"])),
                    "fd": repr(float(row["fd"])),
                    "psd": repr(float(row["psd"])),
                    "label": str(getattr(row["label"], "value", row["label"])),
                }
            )
    return path


def read_soi_report(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "soi_index": int(row["soi_index"]),
                    "t_start": float(row["t_start"]),
                    "fd": float(row["fd"]),
                    "psd": float(row["psd"]),
                    "label": row["label"],
                }
            )
        return rows
