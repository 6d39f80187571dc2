"""Pose-synchronised FD maps and shell back-projection."""

from .backproject import (
    NoPeakError,
    VoxelGrid,
    back_project,
    estimate_radius,
    extract_targets,
    radius_bin_tolerance,
    write_voxel_ply,
)
from .fdmap import FdMapPoint, register_fd_map, write_fd_map_csv, write_fd_map_ply
from .sync import Measurement, SyncResult, TapGroup, sync_measurements

__all__ = [
    "FdMapPoint",
    "Measurement",
    "NoPeakError",
    "SyncResult",
    "TapGroup",
    "VoxelGrid",
    "back_project",
    "estimate_radius",
    "extract_targets",
    "radius_bin_tolerance",
    "register_fd_map",
    "sync_measurements",
    "write_fd_map_csv",
    "write_fd_map_ply",
    "write_voxel_ply",
]
