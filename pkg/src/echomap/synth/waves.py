"""Synthetic impact responses.

A tap is a short saturated strike followed by the slab response: an
exponentially damped echo at ``wave_speed / (2 depth)`` and a few damped
low-frequency body modes. A pipe underneath soaks up the body modes and
reflects only part of the echo, which is what pushes FD down over pipes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._validation import InvalidParameterError, check_fraction, check_positive
from ..signal.types import AudioTrace


@dataclass(frozen=True)
class WaveConfig:
    sample_rate: float = 44100.0
    wave_speed: float = 500.0
    noise_std: float = 0.0
    # strike pulse
    pre_roll: float = 0.02
    strike_gain: float = 1.25
    strike_core: float = 0.0025
    strike_ramp: float = 0.0004
    # echo
    echo_amplitude: float = 0.5
    damping: float = 0.03
    pipe_reflectivity: float = 0.6
    # body modes
    body_frequencies: tuple = (230.0, 340.0, 450.0)
    body_amplitudes: tuple = (0.2, 0.2, 0.2)
    body_damping: float = 0.006
    absorption: float = 0.3
    # per-tap relative amplitude jitter
    jitter: float = 0.0
    duration: float = 0.5

    def __post_init__(self):
        for name in ("sample_rate", "wave_speed", "strike_gain", "strike_core", "strike_ramp",
                     "damping", "body_damping", "duration"):
            check_positive(getattr(self, name), name)
        for name in ("noise_std", "pre_roll", "echo_amplitude"):
            check_positive(getattr(self, name), name, allow_zero=True)
        for name in ("absorption", "pipe_reflectivity", "jitter"):
            check_fraction(getattr(self, name), name)
        if len(self.body_frequencies) != len(self.body_amplitudes):
            raise InvalidParameterError("body_frequencies and body_amplitudes differ in length")
        object.__setattr__(self, "body_frequencies", tuple(float(f) for f in self.body_frequencies))
        object.__setattr__(self, "body_amplitudes", tuple(float(a) for a in self.body_amplitudes))

    def echo_frequency(self, depth: float) -> float:
        return self.wave_speed / (2.0 * depth)


def strike_envelope(config: WaveConfig) -> np.ndarray:
    fs = config.sample_rate
    ramp = max(int(round(config.strike_ramp * fs)), 1)
    core = max(int(round(config.strike_core * fs)), 1)
    rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
    return config.strike_gain * np.concatenate([rise, np.ones(core), rise[::-1]])


def impact_response(has_pipe: bool, depth: float, config: WaveConfig, n: int, rng=None) -> np.ndarray:
    """Noise-free slab response of ``n`` samples starting at the end of the strike."""
    t = np.arange(n) / config.sample_rate
    scale = np.ones(1 + len(config.body_frequencies))
    if rng is not None and config.jitter > 0:
        scale = 1.0 + config.jitter * rng.uniform(-1.0, 1.0, scale.size)
    echo = config.echo_amplitude * scale[0] * (config.pipe_reflectivity if has_pipe else 1.0)
    out = echo * np.exp(-t / config.damping) * np.sin(2 * np.pi * config.echo_frequency(depth) * t)
    body_gain = config.absorption if has_pipe else 1.0
    decay = np.exp(-t / config.body_damping)
    for k, (f, a) in enumerate(zip(config.body_frequencies, config.body_amplitudes)):
        out += body_gain * a * scale[k + 1] * decay * np.sin(2 * np.pi * f * t)
    return out


def impact_samples(has_pipe: bool, depth: float, config: WaveConfig, n: int, rng=None) -> np.ndarray:
    """Unclipped, noise-free tap of ``n`` samples with the strike starting at ``pre_roll``."""
    if not depth > 0:
        raise InvalidParameterError(f"depth must be > 0, got {depth!r}")
    x = np.zeros(n)
    i0 = int(round(config.pre_roll * config.sample_rate))
    pulse = strike_envelope(config)
    stop = min(i0 + pulse.size, n)
    x[i0:stop] = pulse[: stop - i0]
    if stop < n:
        x[stop:] += impact_response(has_pipe, depth, config, n - stop, rng)
    return x


def generate_impact_wave(has_pipe: bool, depth: float, config: WaveConfig | None = None,
                         seed: int = 0) -> AudioTrace:
    """One isolated tap. Without a pipe ``depth`` is the slab thickness.

    The strike saturates, so the peak magnitude is exactly 1 after clipping.
    """
    config = config or WaveConfig()
    n = int(round(config.duration * config.sample_rate))
    rng = np.random.default_rng(seed)
    x = impact_samples(has_pipe, depth, config, n, rng)
    if config.noise_std > 0:
        x += rng.normal(0.0, config.noise_std, n)
    return AudioTrace(np.clip(x, -1.0, 1.0), config.sample_rate)


@dataclass(frozen=True)
class WavePair:
    """Matched pipe / no-pipe taps sharing depth and seed."""

    depth: float
    seed: int
    pipe: AudioTrace = field(repr=False)
    no_pipe: AudioTrace = field(repr=False)


def wave_pair(depth: float, config: WaveConfig | None = None, seed: int = 0) -> WavePair:
    return WavePair(depth, seed, generate_impact_wave(True, depth, config, seed),
                    generate_impact_wave(False, depth, config, seed))
