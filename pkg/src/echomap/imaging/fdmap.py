"""3-D FD map: one point per measurement, coloured by normalised FD."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..signal.spectral import classify_region
from ..signal.types import RegionLabel

FD_MAP_FIELDS = ["x", "y", "z", "fd", "fd_normalized", "label"]


@dataclass(frozen=True)
class FdMapPoint:
    position: np.ndarray
    fd: float
    fd_normalized: float
    label: RegionLabel

    def __post_init__(self):
        if not 0.0 <= self.fd_normalized <= 1.0:
            raise ValueError(f"fd_normalized must lie in [0, 1], got {self.fd_normalized}")


def normalize_fd(values) -> np.ndarray:
    """Min-max scale; a single value (or all equal) maps to 1.0."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return v
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.ones_like(v)
    return np.clip((v - lo) / (hi - lo), 0.0, 1.0)


def register_fd_map(measurements: list, threshold: float) -> list[FdMapPoint]:
    if not measurements:
        return []
    values = np.array([m.fd_value for m in measurements])
    scaled = normalize_fd(values)
    return [
        FdMapPoint(np.asarray(m.position, dtype=float), float(v), float(s), classify_region(v, threshold))
        for m, v, s in zip(measurements, values, scaled)
    ]


def write_fd_map_csv(path, points: list[FdMapPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FD_MAP_FIELDS)
        for p in points:
            w.writerow([*(repr(float(c)) for c in p.position), repr(p.fd), repr(p.fd_normalized), p.label.value])


def read_fd_map_csv(path) -> list[FdMapPoint]:
    with open(path, newline="") as fh:
        return [
            FdMapPoint(np.array([float(r["x"]), float(r["y"]), float(r["z"])]), float(r["fd"]),
                       float(r["fd_normalized"]), RegionLabel(r["label"]))
            for r in csv.DictReader(fh)
        ]


def write_points_ply(path, positions, intensity, comment: str | None = None) -> None:
    """ASCII PLY point cloud; ``intensity`` in [0, 1] becomes a grey level (dark = small)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    grey = np.round(255 * np.clip(np.asarray(intensity, dtype=float), 0.0, 1.0)).astype(int)
    lines = ["ply", "format ascii 1.0"]
    if comment:
        lines.append(f"comment {comment}")
    lines += [
        f"element vertex {len(positions)}",
        "property float x", "property float y", "property float z",
        "property uchar red", "property uchar green", "property uchar blue",
        "end_header",
    ]
    for (x, y, z), g in zip(positions, grey):
        lines.append(f"{x:.6f} {y:.6f} {z:.6f} {g} {g} {g}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_points_ply(path) -> tuple[np.ndarray, np.ndarray]:
    """Positions and grey levels from an ASCII PLY written by ``write_points_ply``."""
    with open(path) as fh:
        text = fh.read().splitlines()
    end = text.index("end_header")
    n = next(int(line.split()[2]) for line in text[:end] if line.startswith("element vertex"))
    rows = np.array([[float(v) for v in line.split()] for line in text[end + 1 : end + 1 + n]]).reshape(-1, 6)
    return rows[:, :3], rows[:, 3].astype(int)


def write_fd_map_ply(path, points: list[FdMapPoint]) -> None:
    write_points_ply(path, [p.position for p in points], [p.fd_normalized for p in points], "fd map")
