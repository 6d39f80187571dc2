"""Shell back-projection: every tap votes for the voxels at its echo radius.

Each tap group draws a half-shell of radius ``r`` below the surface around
its centroid; voxels where many shells cross mark a reflector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .._validation import InvalidParameterError, check_fraction, check_positive
from ..signal.types import Spectrum
from .fdmap import write_points_ply

DEFAULT_BAND_HZ = (100.0, 2000.0)
DEFAULT_NORMAL = (0.0, 0.0, -1.0)
CONCRETE_WAVE_SPEED = 4000.0


class NoPeakError(ValueError):
    """The spectrum has no strict maximum inside the search band."""


@dataclass
class VoxelGrid:
    origin: np.ndarray
    resolution: float
    dims: tuple
    scores: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.resolution = check_positive(self.resolution, "resolution")
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise InvalidParameterError(f"dims must be three positive integers, got {self.dims}")
        if self.scores is None:
            self.scores = np.zeros(self.dims)
        self.scores = np.asarray(self.scores, dtype=float)
        if self.scores.shape != self.dims:
            raise InvalidParameterError(f"scores shape {self.scores.shape} does not match dims {self.dims}")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise InvalidParameterError("scores must be finite and non-negative")

    @classmethod
    def covering(cls, lower, upper, resolution: float) -> VoxelGrid:
        """Smallest grid anchored at ``lower`` whose voxels cover the box up to ``upper``."""
        lower, upper = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
        dims = np.maximum(np.ceil((upper - lower) / resolution - 1e-9).astype(int), 1)
        return cls(lower, resolution, tuple(dims))

    def empty_like(self) -> VoxelGrid:
        return VoxelGrid(self.origin.copy(), self.resolution, self.dims)

    def axis_centers(self, axis: int, lo: int = 0, hi: int | None = None) -> np.ndarray:
        hi = self.dims[axis] if hi is None else hi
        return self.origin[axis] + (np.arange(lo, hi) + 0.5) * self.resolution

    def center(self, index) -> np.ndarray:
        return self.origin + (np.asarray(index, dtype=float) + 0.5) * self.resolution

    def centers(self, indices) -> np.ndarray:
        return self.origin + (np.asarray(indices, dtype=float).reshape(-1, 3) + 0.5) * self.resolution

    @property
    def half_diagonal(self) -> float:
        return 0.5 * self.resolution * np.sqrt(3.0)

    def argmax_index(self) -> tuple:
        """Index of the maximum score.

        Binary shells tie over a plateau; ties resolve to the tied voxel
        nearest the plateau's centroid (then lowest flat index), so the answer
        does not drift to a plateau corner.
        """
        tied = np.argwhere(self.scores == self.scores.max())
        if len(tied) == 1:
            return tuple(int(v) for v in tied[0])
        d2 = np.sum((tied - tied.mean(axis=0)) ** 2, axis=1)
        return tuple(int(v) for v in tied[int(np.argmin(d2))])

    def argmax_center(self) -> np.ndarray:
        return self.center(self.argmax_index())


def estimate_radius(spectrum: Spectrum, wave_speed: float, band=DEFAULT_BAND_HZ) -> float:
    """Echo radius ``wave_speed / (2 f_peak)`` from the strongest bin in ``band``."""
    wave_speed = check_positive(wave_speed, "wave_speed")
    f, mag = spectrum.frequencies, spectrum.magnitudes
    mask = (f >= band[0]) & (f <= band[1]) & (f > 0)
    if not np.any(mask):
        raise NoPeakError(f"no spectral bins inside {band} Hz")
    m = mag[mask]
    top = m.max()
    if top <= 0 or top == m.min() or np.count_nonzero(m == top) > 1:
        raise NoPeakError("spectrum has no strict maximum inside the search band")
    f_peak = f[mask][int(np.argmax(m))]
    return wave_speed / (2.0 * f_peak)


def radius_bin_tolerance(radius: float, bin_width: float, wave_speed: float) -> float:
    """Radius error caused by half a frequency bin at ``radius``."""
    return radius * radius * bin_width / wave_speed


def _points(tap_groups) -> np.ndarray:
    pts = [np.asarray(getattr(g, "centroid", g), dtype=float) for g in tap_groups]
    return np.array(pts, dtype=float).reshape(-1, 3)


def back_project(tap_groups, radii, grid: VoxelGrid, shell_tolerance: float, weighting: str = "binary",
                 normal=DEFAULT_NORMAL) -> VoxelGrid:
    """Accumulate one half-shell per tap group into a copy of ``grid``.

    ``tap_groups`` may be TapGroups (their centroid is used) or 3-D points.
    Binary weighting adds 1 to each voxel whose centre lies within
    ``shell_tolerance`` plus half the voxel diagonal of the sphere and
    strictly on the ``normal`` side of the centre. Gaussian weighting adds
    ``exp(-d^2 / 2 sigma^2)`` over the same support, ``sigma = shell_tolerance``.
    """
    if weighting not in ("binary", "gaussian"):
        raise InvalidParameterError(f"unknown weighting {weighting!r}")
    shell_tolerance = check_positive(shell_tolerance, "shell_tolerance", allow_zero=weighting == "binary")
    centres = _points(tap_groups)
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if radii.size != len(centres):
        raise InvalidParameterError(f"{len(centres)} tap groups but {radii.size} radii")
    if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
        raise InvalidParameterError("radii must be positive and finite")
    out = VoxelGrid(grid.origin.copy(), grid.resolution, grid.dims, grid.scores.copy())
    res = grid.resolution
    reach = shell_tolerance + grid.half_diagonal
    nx, ny, nz = (float(v) for v in normal)
    for p, r in zip(centres, radii):
        lo = np.floor((p - r - reach - grid.origin) / res).astype(int) - 1
        hi = np.ceil((p + r + reach - grid.origin) / res).astype(int) + 1
        lo = np.clip(lo, 0, grid.dims)
        hi = np.clip(hi, 0, grid.dims)
        if np.any(hi <= lo):
            continue
        dx = grid.axis_centers(0, lo[0], hi[0]) - p[0]
        dy = grid.axis_centers(1, lo[1], hi[1]) - p[1]
        dz = grid.axis_centers(2, lo[2], hi[2]) - p[2]
        DX, DY, DZ = dx[:, None, None], dy[None, :, None], dz[None, None, :]
        side = DX * nx + DY * ny + DZ * nz > 0.0
        dev = np.abs(np.sqrt(DX * DX + DY * DY + DZ * DZ) - r)
        hit = side & (dev <= reach)
        view = out.scores[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]]
        if weighting == "binary":
            view += hit
        else:
            view += np.where(hit, np.exp(-(dev**2) / (2.0 * shell_tolerance**2)), 0.0)
    return out


def extract_targets(grid: VoxelGrid, score_threshold_fraction: float = 0.8) -> list[np.ndarray]:
    """Centroids of 26-connected clusters of voxels scoring at least ``fraction * max``.

    Clusters are ordered by their peak score, strongest first.
    """
    frac = check_fraction(score_threshold_fraction, "score_threshold_fraction")
    top = grid.scores.max()
    if top <= 0:
        return []
    mask = grid.scores >= frac * top
    labels, n = ndimage.label(mask, structure=np.ones((3, 3, 3), dtype=int))
    clusters = []
    for lab in range(1, n + 1):
        idx = np.argwhere(labels == lab)
        clusters.append((-grid.scores[labels == lab].max(), lab, grid.centers(idx).mean(axis=0)))
    clusters.sort(key=lambda c: (c[0], c[1]))
    return [c[2] for c in clusters]


def write_voxel_ply(path, grid: VoxelGrid, score_threshold_fraction: float = 0.5) -> int:
    """Export voxels scoring at least ``fraction * max`` plus a JSON sidecar; returns the count."""
    top = grid.scores.max()
    if top > 0:
        idx = np.argwhere(grid.scores >= score_threshold_fraction * top)
        values = grid.scores[tuple(idx.T)] / top
    else:
        idx, values = np.zeros((0, 3), dtype=int), np.zeros(0)
    write_points_ply(path, grid.centers(idx), values, "back-projection voxels")
    meta = {
        "origin": [float(v) for v in grid.origin],
        "resolution": float(grid.resolution),
        "dims": list(grid.dims),
        "max_score": float(top),
        "score_threshold_fraction": float(score_threshold_fraction),
        "exported_voxels": int(len(idx)),
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return int(len(idx))
