"""Slow reference implementations used to check the fast paths.

Nothing here shares code with the module it checks.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ORACLE_N = 8192
_ROW_BLOCK = 256


def naive_dft_oracle(samples) -> np.ndarray:
    """Direct evaluation of ``S_k = sum_n x_n exp(-2j pi k n / N)`` for every k.

    The twiddles come from a table indexed by ``(k * n) mod N`` so that large
    arguments never reach ``exp``; rows are summed block by block to bound
    memory. Cost is O(N^2).
    """
    x = np.asarray(samples, dtype=complex).reshape(-1)
    N = x.size
    if N == 0:
        return x
    if N > MAX_ORACLE_N:
        raise ValueError(f"oracle is O(N^2); N={N} exceeds {MAX_ORACLE_N}")
    table = np.exp(-2j * np.pi * np.arange(N) / N)
    n = np.arange(N, dtype=np.int64)
    out = np.empty(N, dtype=complex)
    for k0 in range(0, N, _ROW_BLOCK):
        k = np.arange(k0, min(k0 + _ROW_BLOCK, N), dtype=np.int64)
        out[k] = table[np.outer(k, n) % N] @ x
    return out


def naive_dft_loop(samples) -> list[complex]:
    """The literal double loop; only for very small N."""
    x = [complex(v) for v in samples]
    N = len(x)
    return [sum(x[n] * complex(math.cos(-2 * math.pi * k * n / N), math.sin(-2 * math.pi * k * n / N))
                for n in range(N)) for k in range(N)]


def brute_force_backproject_oracle(tap_groups, radii, grid, shell_tolerance: float,
                                   normal=(0.0, 0.0, -1.0)):
    """Binary shell scores for every voxel of ``grid``, one voxel at a time.

    Returns a new grid holding ``grid.scores`` plus the votes.

    Voxel (i, j, k) has centre ``origin + (index + 0.5) * resolution``. It
    scores one per tap when its centre distance to the tap is within
    ``shell_tolerance`` plus half the voxel diagonal of the radius, and it
    lies strictly on the ``normal`` side of the tap.
    """
    from ..imaging.backproject import VoxelGrid

    nx, ny, nz = grid.dims
    ox, oy, oz = (float(v) for v in grid.origin)
    res = float(grid.resolution)
    nxn, nyn, nzn = (float(v) for v in normal)
    reach = float(shell_tolerance) + 0.5 * res * math.sqrt(3.0)
    scores = np.array(grid.scores, dtype=float)
    points = [np.asarray(getattr(g, "centroid", g), dtype=float) for g in tap_groups]
    for (px, py, pz), r in zip(points, radii):
        r = float(r)
        for i in range(nx):
            dx = (ox + (i + 0.5) * res) - px
            for j in range(ny):
                dy = (oy + (j + 0.5) * res) - py
                for k in range(nz):
                    dz = (oz + (k + 0.5) * res) - pz
                    if dx * nxn + dy * nyn + dz * nzn <= 0.0:
                        continue
                    if abs(math.sqrt(dx * dx + dy * dy + dz * dz) - r) <= reach:
                        scores[i, j, k] += 1.0
    return VoxelGrid(grid.origin.copy(), res, grid.dims, scores)
