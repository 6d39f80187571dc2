"""Layered pipeline settings: built-in defaults, then a config file, then flags."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from ._validation import InvalidParameterError, check_fraction, check_positive
from .imaging.backproject import DEFAULT_BAND_HZ
from .imaging.sync import GROUP_DISTANCE_M, SYNC_TOLERANCE_S
from .inference.train import DEFAULT_BATCH, DEFAULT_LR
from .signal.filters import DEFAULT_CUTOFF_HZ
from .signal.mel import SEGMENT_HOP
from .signal.segmentation import DEFAULT_INTERVAL_S, DEFAULT_RELEVANCE
from .signal.spectral import DEFAULT_FD_THRESHOLD

CONFIG_ENV = "ECHOMAP_CONFIG"
PRESETS = ("default", "paper", "five-tap", "no-pipe")
RADIUS_SOURCES = ("spectral", "model")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # signal
    cutoff_hz: float = DEFAULT_CUTOFF_HZ
    interval_length: float = DEFAULT_INTERVAL_S
    relevance_threshold: float = DEFAULT_RELEVANCE
    fd_threshold: float = DEFAULT_FD_THRESHOLD
    segment_hop: int = SEGMENT_HOP
    # synthetic survey
    preset: str = "default"
    noise_std: float | None = None
    wav_format: str = "pcm16"
    # imaging
    wave_speed: float = 500.0
    band_low_hz: float = DEFAULT_BAND_HZ[0]
    band_high_hz: float = DEFAULT_BAND_HZ[1]
    grid_res: float = 0.01
    shell_tol: float | None = None
    target_fraction: float = 0.8
    voxel_export_fraction: float = 0.5
    radius_source: str = "spectral"
    sync_tolerance: float = SYNC_TOLERANCE_S
    group_distance: float = GROUP_DISTANCE_M
    tap_offset: tuple = (0.0, 0.0, 0.0)
    # model
    w0: float = 1.0
    w1: float = 1.0
    learning_rate: float = DEFAULT_LR
    batch_size: int = DEFAULT_BATCH
    epochs: int = 10
    test_fraction: float = 0.2
    depth_supervision: str = "pipe"
    channels: tuple = (128, 128)
    kernels: tuple = (5, 3)

    def __post_init__(self):
        for name in ("cutoff_hz", "interval_length", "fd_threshold", "wave_speed", "grid_res",
                     "sync_tolerance", "group_distance", "band_high_hz"):
            check_positive(getattr(self, name), name)
        for name in ("relevance_threshold", "band_low_hz", "w0", "w1", "learning_rate"):
            check_positive(getattr(self, name), name, allow_zero=True)
        for name in ("target_fraction", "voxel_export_fraction", "test_fraction"):
            check_fraction(getattr(self, name), name)
        if self.shell_tol is not None:
            check_positive(self.shell_tol, "shell_tol", allow_zero=True)
        if self.noise_std is not None:
            check_positive(self.noise_std, "noise_std", allow_zero=True)
        if self.band_low_hz >= self.band_high_hz:
            raise InvalidParameterError("band_low_hz must be below band_high_hz")
        if self.preset not in PRESETS:
            raise InvalidParameterError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.radius_source not in RADIUS_SOURCES:
            raise InvalidParameterError(f"radius_source must be one of {RADIUS_SOURCES}")
        if self.wav_format not in ("pcm16", "float32"):
            raise InvalidParameterError("wav_format must be 'pcm16' or 'float32'")
        if self.depth_supervision not in ("pipe", "all"):
            raise InvalidParameterError("depth_supervision must be 'pipe' or 'all'")
        for name in ("segment_hop", "batch_size", "epochs", "seed"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if name in ("epochs", "seed") else 1):
                raise InvalidParameterError(f"{name} must be a non-negative integer, got {v!r}")
        object.__setattr__(self, "tap_offset", tuple(float(v) for v in self.tap_offset))
        object.__setattr__(self, "channels", tuple(int(v) for v in self.channels))
        object.__setattr__(self, "kernels", tuple(int(v) for v in self.kernels))
        if len(self.tap_offset) != 3:
            raise InvalidParameterError("tap_offset must be a 3-vector")

    @property
    def band(self) -> tuple[float, float]:
        return (self.band_low_hz, self.band_high_hz)

    def to_dict(self) -> dict:
        return asdict(self)


def _read_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix.lower() in (".yaml", ".yml"):
        try:
            import yaml
        except ImportError as exc:  # pragma: no cover
            raise ConfigError("YAML configs need the 'pyyaml' package") from exc
        data = yaml.safe_load(text) or {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def load_config(path=None, overrides: dict | None = None, env=None) -> PipelineConfig:
    """Defaults, then ``path`` (or ``$ECHOMAP_CONFIG``), then ``overrides`` that are not None."""
    env = os.environ if env is None else env
    path = path or env.get(CONFIG_ENV) or None
    values = {}
    if path:
        values.update(_read_file(path))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    known = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return replace(PipelineConfig(), **values)
    except (InvalidParameterError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
