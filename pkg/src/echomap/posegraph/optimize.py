"""Levenberg-Marquardt refinement of a keyframe pose graph.

Each free vertex carries a 6-vector twist applied on the left,
``T <- exp(delta) T``. The first vertex is the gauge and never moves.
Edge error is ``log(Z^-1 T_i^-1 T_j)`` weighted by the edge information.
Damping is positive, ``(H + lambda I) delta = -g``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._validation import InvalidParameterError, NumericalFailureError, check_positive
from .graph import PoseGraph
from .se3 import SE3Transform, compose, inv_right_jacobian, invert

LAMBDA_INIT = 1e-3
LAMBDA_UP = 10.0
LAMBDA_DOWN = 10.0
LAMBDA_MAX = 1e16


def edge_error(graph: PoseGraph, edge, poses=None) -> np.ndarray:
    poses = graph.poses() if poses is None else poses
    Ti = poses[graph.index_of(edge.i)]
    Tj = poses[graph.index_of(edge.j)]
    return compose(invert(edge.measured), compose(invert(Ti), Tj)).log()


def total_residual(graph: PoseGraph, poses=None) -> float:
    poses = graph.poses() if poses is None else poses
    total = 0.0
    for edge in graph.edges:
        e = edge_error(graph, edge, poses)
        total += float(e @ edge.information @ e)
    return total


@dataclass
class Linearization:
    """Stacked Jacobian over free vertices, stacked errors and block-diagonal weights."""

    jacobian: np.ndarray
    errors: np.ndarray
    weights: np.ndarray

    @property
    def hessian(self) -> np.ndarray:
        return self.jacobian.T @ self.weights @ self.jacobian

    @property
    def gradient(self) -> np.ndarray:
        return self.jacobian.T @ self.weights @ self.errors


def linearize(graph: PoseGraph, poses=None) -> Linearization:
    if not graph.edges:
        raise InvalidParameterError("pose graph has no edges")
    poses = graph.poses() if poses is None else poses
    n_free = len(graph.vertices) - 1
    m = len(graph.edges)
    J = np.zeros((6 * m, 6 * n_free))
    e_all = np.zeros(6 * m)
    W = np.zeros((6 * m, 6 * m))
    for r, edge in enumerate(graph.edges):
        a, b = graph.index_of(edge.i), graph.index_of(edge.j)
        e = compose(invert(edge.measured), compose(invert(poses[a]), poses[b])).log()
        Jb = inv_right_jacobian(e) @ invert(poses[b]).adjoint()
        rows = slice(6 * r, 6 * r + 6)
        if b > 0:
            J[rows, 6 * (b - 1) : 6 * b] += Jb
        if a > 0:
            J[rows, 6 * (a - 1) : 6 * a] -= Jb
        e_all[rows] = e
        W[rows, rows] = edge.information
    return Linearization(J, e_all, W)


def apply_update(poses, delta) -> list[SE3Transform]:
    out = [poses[0]]
    for k, T in enumerate(poses[1:]):
        out.append(compose(SE3Transform.exp(delta[6 * k : 6 * k + 6]), T))
    return out


@dataclass
class LMStep:
    poses: list
    residual: float
    delta: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


def lm_step(graph: PoseGraph, lam: float, poses=None) -> LMStep:
    """One damped Gauss-Newton step from ``poses`` (default: the graph's vertices)."""
    lam = check_positive(lam, "lambda", allow_zero=True)
    poses = graph.poses() if poses is None else list(poses)
    lin = linearize(graph, poses)
    H, g = lin.hessian, lin.gradient
    A = H + lam * np.eye(H.shape[0])
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"damped Hessian is not positive definite at lambda={lam}") from exc
    if not np.all(np.isfinite(L)) or np.min(np.abs(np.diag(L))) ** 2 < 1e-14 * max(1.0, np.max(np.abs(A))):
        raise NumericalFailureError(f"damped Hessian is singular at lambda={lam}")
    delta = -np.linalg.solve(L.T, np.linalg.solve(L, g))
    new_poses = apply_update(poses, delta)
    return LMStep(new_poses, total_residual(graph, new_poses), delta, g, H)


@dataclass
class OptimizeReport:
    graph: PoseGraph
    residuals: list[float] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def optimize_report(
    graph: PoseGraph, max_iters: int = 100, tolerance: float = 1e-12, lambda_init: float = LAMBDA_INIT
) -> OptimizeReport:
    """Run LM and keep the accepted residual history.

    A rejected step leaves the poses alone and raises lambda; an accepted
    one lowers it. Stops when the relative drop of an accepted step falls
    below ``tolerance``, the residual hits zero, or ``max_iters`` runs out.
    """
    if not graph.edges:
        raise InvalidParameterError("pose graph has no edges")
    if not graph.is_connected():
        raise InvalidParameterError("pose graph is disconnected")
    tolerance = check_positive(tolerance, "tolerance", allow_zero=True)
    poses = graph.poses()
    current = total_residual(graph, poses)
    report = OptimizeReport(graph, [current], [])
    lam = float(lambda_init)
    for it in range(int(max_iters)):
        report.iterations = it + 1
        if current == 0.0:
            report.converged = True
            break
        try:
            step = lm_step(graph, lam, poses)
            ok = np.isfinite(step.residual) and step.residual < current
        except NumericalFailureError:
            ok = False
        report.lambdas.append(lam)
        if ok:
            rel = (current - step.residual) / current
            poses, current = step.poses, step.residual
            report.residuals.append(current)
            lam = max(lam / LAMBDA_DOWN, 0.0)
            if rel < tolerance:
                report.converged = True
                break
        else:
            lam = lam * LAMBDA_UP if lam > 0 else LAMBDA_INIT
            if lam > LAMBDA_MAX:
                # no descent direction left at any damping: a local minimum
                report.converged = True
                break
    report.graph = graph.with_poses(poses)
    return report


def optimize(graph: PoseGraph, max_iters: int = 100, tolerance: float = 1e-12) -> PoseGraph:
    """Return a new graph with refined poses; ``graph`` itself is untouched."""
    return optimize_report(graph, max_iters, tolerance).graph
