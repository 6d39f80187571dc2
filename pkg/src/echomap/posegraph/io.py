"""Text formats for trajectories and pose graphs."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .graph import PoseGraph
from .se3 import SE3Transform
from .trajectory import PoseTrajectory

TRAJECTORY_FIELDS = ["timestamp", "x", "y", "z", "qw", "qx", "qy", "qz"]


class GraphFormatError(ValueError):
    pass


def write_trajectory_csv(path, trajectory: PoseTrajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_FIELDS)
        for t, p, q in zip(trajectory.timestamps, trajectory.positions, trajectory.quaternions):
            w.writerow([repr(float(v)) for v in (t, *p, *q)])


def read_trajectory_csv(path) -> PoseTrajectory:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRAJECTORY_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise GraphFormatError(f"{path}: trajectory CSV is missing columns {sorted(missing)}")
        try:
            rows = [[float(r[k]) for k in TRAJECTORY_FIELDS] for r in reader]
        except (TypeError, ValueError) as exc:
            raise GraphFormatError(f"{path}: non-numeric trajectory entry") from exc
    if not rows:
        raise GraphFormatError(f"{path}: trajectory CSV has no rows")
    a = np.array(rows)
    return PoseTrajectory(a[:, 0], a[:, 1:4], a[:, 4:8])


def _pose_fields(T: SE3Transform) -> list[str]:
    return [repr(float(v)) for v in (*T.translation, *T.quaternion())]


def write_graph(path, graph: PoseGraph) -> None:
    """``VERTEX id x y z qw qx qy qz`` and ``EDGE i j x y z qw qx qy qz`` + 21 information entries."""
    iu = np.triu_indices(6)
    lines = []
    for v in graph.vertices:
        lines.append(" ".join(["VERTEX", str(v.id), *_pose_fields(v.pose)]))
    for e in graph.edges:
        info = [repr(float(x)) for x in e.information[iu]]
        lines.append(" ".join(["EDGE", str(e.i), str(e.j), *_pose_fields(e.measured), *info]))
    Path(path).write_text("\n".join(lines) + "\n")


def _pose(values) -> SE3Transform:
    x, y, z, qw, qx, qy, qz = values
    q = np.array([qw, qx, qy, qz])
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise GraphFormatError("zero quaternion")
    return SE3Transform.from_quaternion([x, y, z], q / norm)


def read_graph(path) -> PoseGraph:
    """Parse a graph file; edges without information entries get identity weights."""
    graph = PoseGraph()
    iu = np.triu_indices(6)
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "VERTEX" and len(parts) == 9:
                graph.add_vertex(_pose([float(v) for v in parts[2:9]]), vertex_id=int(parts[1]))
            elif parts[0] == "EDGE" and len(parts) in (10, 31):
                info = np.eye(6)
                if len(parts) == 31:
                    info = np.zeros((6, 6))
                    info[iu] = [float(v) for v in parts[10:31]]
                    info = info + np.triu(info, 1).T
                graph.add_edge(int(parts[1]), int(parts[2]), _pose([float(v) for v in parts[3:10]]), info)
            else:
                raise GraphFormatError(f"unrecognised record {parts[0]!r} with {len(parts)} fields")
        except (ValueError, KeyError) as exc:
            raise GraphFormatError(f"{path}:{lineno}: {exc}") from exc
    return graph
