"""SE(3) algebra, keyframe graphs and Levenberg-Marquardt refinement."""

from .camera import BehindCameraError, CameraModel, project_pinhole
from .graph import Edge, Keyframe, PoseGraph, add_keyframe
from .io import read_graph, read_trajectory_csv, write_graph, write_trajectory_csv
from .optimize import linearize, lm_step, optimize, optimize_report, total_residual
from .se3 import SE3Transform, chain, compose, invert
from .trajectory import PoseTrajectory

__all__ = [
    "BehindCameraError",
    "CameraModel",
    "Edge",
    "Keyframe",
    "PoseGraph",
    "PoseTrajectory",
    "SE3Transform",
    "add_keyframe",
    "chain",
    "compose",
    "invert",
    "linearize",
    "lm_step",
    "optimize",
    "optimize_report",
    "project_pinhole",
    "read_graph",
    "read_trajectory_csv",
    "total_residual",
    "write_graph",
    "write_trajectory_csv",
]
