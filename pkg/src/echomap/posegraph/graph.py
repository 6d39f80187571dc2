"""Keyframe pose graph: vertices are world-from-keyframe poses, edges relative measurements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .._validation import check_positive
from .se3 import SE3Transform, compose, invert


@dataclass(frozen=True)
class Keyframe:
    id: int
    pose: SE3Transform
    timestamp: float = 0.0


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    measured: SE3Transform
    information: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self):
        info = np.array(self.information, dtype=float).reshape(6, 6)
        if not np.allclose(info, info.T, atol=1e-12):
            raise ValueError("information matrix must be symmetric")
        if np.min(np.linalg.eigvalsh(info)) <= 0:
            raise ValueError("information matrix must be positive definite")
        object.__setattr__(self, "information", info)


@dataclass
class PoseGraph:
    vertices: list[Keyframe] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)

    def index_of(self, vertex_id: int) -> int:
        for k, v in enumerate(self.vertices):
            if v.id == vertex_id:
                return k
        raise KeyError(f"no vertex with id {vertex_id}")

    def add_vertex(self, pose: SE3Transform, timestamp: float = 0.0, vertex_id: int | None = None) -> Keyframe:
        if vertex_id is None:
            vertex_id = self.vertices[-1].id + 1 if self.vertices else 0
        if self.vertices and vertex_id <= self.vertices[-1].id:
            raise ValueError("vertex ids must increase")
        if self.vertices and timestamp < self.vertices[-1].timestamp:
            raise ValueError("keyframe timestamps must not decrease")
        kf = Keyframe(int(vertex_id), pose, float(timestamp))
        self.vertices.append(kf)
        return kf

    def add_edge(self, i: int, j: int, measured: SE3Transform, information=None) -> Edge:
        self.index_of(i)
        self.index_of(j)
        edge = Edge(i, j, measured, np.eye(6) if information is None else information)
        self.edges.append(edge)
        return edge

    def add_odometry_edge(self, i: int, j: int, information=None) -> Edge:
        """Edge whose measurement is the current relative pose between ``i`` and ``j``."""
        Ti = self.vertices[self.index_of(i)].pose
        Tj = self.vertices[self.index_of(j)].pose
        return self.add_edge(i, j, compose(invert(Ti), Tj), information)

    def poses(self) -> list[SE3Transform]:
        return [v.pose for v in self.vertices]

    def with_poses(self, poses) -> PoseGraph:
        vertices = [Keyframe(v.id, p, v.timestamp) for v, p in zip(self.vertices, poses)]
        return PoseGraph(vertices, list(self.edges))

    def is_connected(self) -> bool:
        n = len(self.vertices)
        if n <= 1:
            return True
        rows = [self.index_of(e.i) for e in self.edges]
        cols = [self.index_of(e.j) for e in self.edges]
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        count, _ = connected_components(adj, directed=False)
        return count == 1


def add_keyframe(graph: PoseGraph, pose: SE3Transform, timestamp: float, motion_threshold: float) -> bool:
    """Append ``pose`` if it moved or turned more than ``motion_threshold`` since the last keyframe.

    The same number bounds translation (meters) and rotation (radians).
    The first pose is always inserted.
    """
    motion_threshold = check_positive(motion_threshold, "motion_threshold")
    if not graph.vertices:
        graph.add_vertex(pose, timestamp)
        return True
    delta = compose(invert(graph.vertices[-1].pose), pose)
    if np.linalg.norm(delta.translation) > motion_threshold or delta.rotation_angle() > motion_threshold:
        graph.add_vertex(pose, timestamp)
        return True
    return False
