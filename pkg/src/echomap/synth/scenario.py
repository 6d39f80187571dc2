"""Desk-scale survey of a slab with buried pipes.

The robot visits tap locations along a lawnmower path, stops, waits for
``settle`` seconds, taps at the configured cadence, then drives to the next
stop. The output is one continuous recording, the matching pose trajectory
and per-location ground truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .._validation import InvalidParameterError, check_positive
from ..posegraph.trajectory import PoseTrajectory
from ..signal.types import AudioTrace
from .waves import WaveConfig, impact_samples


@dataclass(frozen=True)
class PipeSegment:
    """Straight pipe whose axis runs from ``a`` to ``b`` (x, y) at ``depth`` below the surface."""

    a: tuple
    b: tuple
    depth: float
    radius: float = 0.02

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        check_positive(self.depth, "pipe depth")
        check_positive(self.radius, "pipe radius")

    def axis(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([*self.a, -self.depth]), np.array([*self.b, -self.depth]))


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    s = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + s * ab)))


@dataclass(frozen=True)
class ScenarioConfig(WaveConfig):
    slab: tuple = (1.0, 1.0, 0.3)
    pipes: tuple = ()
    margin: float = 0.05
    row_spacing: float = 0.1
    tap_spacing: float = 0.1
    locations: tuple | None = None
    cadence: float = 0.5
    taps_per_location: int = 3
    total_impacts: int | None = None
    settle: float = 0.5
    tail: float = 0.5
    move_time: float = 1.0
    pose_rate: float = 20.0
    # lateral reach within which a pipe, not the slab floor, returns the echo
    pipe_footprint: float = 0.08
    seed: int = 0

    def __post_init__(self):
        super().__post_init__()
        pipes = tuple(p if isinstance(p, PipeSegment) else PipeSegment(**p) for p in self.pipes)
        object.__setattr__(self, "pipes", pipes)
        object.__setattr__(self, "slab", tuple(float(v) for v in self.slab))
        if len(self.slab) != 3:
            raise InvalidParameterError("slab must be (length_x, length_y, thickness)")
        for v in self.slab:
            check_positive(v, "slab dimension")
        for name in ("row_spacing", "tap_spacing", "cadence", "pose_rate", "move_time"):
            check_positive(getattr(self, name), name)
        for name in ("margin", "settle", "tail", "pipe_footprint"):
            check_positive(getattr(self, name), name, allow_zero=True)
        if self.tail < 0.3 + self.pre_roll:
            raise InvalidParameterError("tail must cover the 0.3 s response after the last tap")
        if self.taps_per_location < 1:
            raise InvalidParameterError("taps_per_location must be >= 1")
        Lx, Ly, T = self.slab
        for p in pipes:
            if p.depth + p.radius > T:
                raise InvalidParameterError(f"pipe at depth {p.depth} does not fit in a {T} m slab")
            for x, y in (p.a, p.b):
                if not (0 <= x <= Lx and 0 <= y <= Ly):
                    raise InvalidParameterError(f"pipe endpoint {(x, y)} lies outside the slab")
        if self.locations is not None:
            object.__setattr__(self, "locations", tuple(tuple(float(v) for v in xy) for xy in self.locations))
        n = len(self.tap_locations())
        if self.total_impacts is not None and self.total_impacts < n:
            raise InvalidParameterError("total_impacts is smaller than the number of locations")

    def tap_locations(self) -> np.ndarray:
        """(n, 3) tap points on the surface z = 0 in visiting order."""
        if self.locations is not None:
            xy = np.array(self.locations, dtype=float).reshape(-1, 2)
        else:
            Lx, Ly, _ = self.slab
            xs = self.margin + self.tap_spacing * np.arange(int(np.floor((Lx - 2 * self.margin) / self.tap_spacing + 1e-9)) + 1)
            ys = self.margin + self.row_spacing * np.arange(int(np.floor((Ly - 2 * self.margin) / self.row_spacing + 1e-9)) + 1)
            rows = [np.column_stack([xs if k % 2 == 0 else xs[::-1], np.full(xs.size, y)]) for k, y in enumerate(ys)]
            xy = np.vstack(rows)
        return np.column_stack([xy, np.zeros(len(xy))])

    def impacts_per_location(self) -> np.ndarray:
        """Impact counts; ``total_impacts`` spreads the remainder over the first stops."""
        n = len(self.tap_locations())
        if self.total_impacts is None:
            return np.full(n, self.taps_per_location, dtype=int)
        base, extra = divmod(self.total_impacts, n)
        counts = np.full(n, base, dtype=int)
        counts[:extra] += 1
        return counts


def paper_mirror_config(**overrides) -> ScenarioConfig:
    """126 stops on a 14 x 9 lawnmower grid, 406 impacts, three parallel pipes."""
    base = dict(
        slab=(1.4, 0.9, 0.3),
        pipes=(
            PipeSegment((0.25, 0.0), (0.25, 0.9), 0.15, 0.03),
            PipeSegment((0.65, 0.0), (0.65, 0.9), 0.25, 0.03),
            PipeSegment((1.05, 0.0), (1.05, 0.9), 0.2, 0.03),
        ),
        total_impacts=406,
        noise_std=0.02,
        jitter=0.05,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


FIVE_TAP_XS = (0.23, 0.265, 0.30, 0.335, 0.37)


def preset_config(name: str = "default", **overrides) -> ScenarioConfig:
    """Named surveys used by the command line.

    ``default`` is a 24-stop survey of a small slab over one pipe, ``no-pipe``
    the same slab without it, ``five-tap`` a single line of five taps across
    the pipe and ``paper`` the 126-stop mirror of the field run.
    """
    if name == "paper":
        return paper_mirror_config(**overrides)
    pipe = PipeSegment((0.3, 0.0), (0.3, 0.4), 0.15, 0.02)
    base = dict(slab=(0.6, 0.4, 0.3), pipes=(pipe,), noise_std=0.02)
    if name == "no-pipe":
        base["pipes"] = ()
    elif name == "five-tap":
        base.update(locations=tuple((x, 0.2) for x in FIVE_TAP_XS), taps_per_location=1)
    elif name != "default":
        raise InvalidParameterError(f"unknown preset {name!r}")
    base.update(overrides)
    return ScenarioConfig(**base)


@dataclass(frozen=True)
class GroundTruth:
    positions: np.ndarray
    has_pipe_below: np.ndarray
    nearest_pipe_distance: np.ndarray
    impacts: np.ndarray
    impact_times: list = field(repr=False)
    pipe_in_view: np.ndarray = None
    echo_depths: np.ndarray = None

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def total_impacts(self) -> int:
        return int(self.impacts.sum())

    @property
    def impact_labels(self) -> np.ndarray:
        """``has_pipe_below`` repeated once per impact, in emission order."""
        return np.repeat(self.has_pipe_below, self.impacts)

    @property
    def impact_depths(self) -> np.ndarray:
        return np.repeat(self.nearest_pipe_distance, self.impacts)


def pipe_geometry(config: ScenarioConfig, points) -> tuple[np.ndarray, np.ndarray]:
    """``has_pipe_below`` by the vertical-projection test and 3-D distance to the nearest pipe axis."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    below = np.zeros(len(points), dtype=int)
    nearest = np.full(len(points), np.inf)
    for p in config.pipes:
        a3, b3 = p.axis()
        for k, pt in enumerate(points):
            if point_segment_distance(pt[:2], p.a, p.b) <= p.radius:
                below[k] = 1
            nearest[k] = min(nearest[k], point_segment_distance(pt, a3, b3))
    return below, nearest


def echo_paths(config: ScenarioConfig, points) -> tuple[np.ndarray, np.ndarray]:
    """Which taps hear a pipe and from how far.

    A pipe is in view when the tap's horizontal distance to its projection
    is at most ``pipe_footprint`` (or the pipe radius, if larger). The echo
    then comes from the nearest pipe in view; otherwise from the slab floor.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    in_view = np.zeros(len(points), dtype=int)
    depth = np.full(len(points), config.slab[2])
    for p in config.pipes:
        a3, b3 = p.axis()
        reach = max(config.pipe_footprint, p.radius)
        for k, pt in enumerate(points):
            if point_segment_distance(pt[:2], p.a, p.b) <= reach:
                d = point_segment_distance(pt, a3, b3)
                depth[k] = d if not in_view[k] else min(depth[k], d)
                in_view[k] = 1
    return in_view, depth


def _tap_seed(seed: int, index: int) -> int:
    return (int(seed) ^ int(index)) & 0xFFFFFFFF


def generate_scenario(config: ScenarioConfig | None = None):
    """Returns ``(AudioTrace, PoseTrajectory, GroundTruth)``; a pure function of ``config``."""
    config = config or ScenarioConfig()
    fs = config.sample_rate
    dt_pose = 1.0 / config.pose_rate
    locations = config.tap_locations()
    counts = config.impacts_per_location()
    below, nearest = pipe_geometry(config, locations)
    in_view, depths = echo_paths(config, locations)

    # stop k: arrive, settle, tap every 1/cadence s, hold for the tail, then move
    knots_t, knots_p, impact_times = [], [], []
    t = 0.0
    for k, loc in enumerate(locations):
        if k > 0:
            t += config.move_time
        taps = t + config.settle + np.arange(counts[k]) / config.cadence
        impact_times.append(list(taps))
        leave = np.ceil((taps[-1] + config.tail) / dt_pose - 1e-9) * dt_pose
        knots_t += [t, leave]
        knots_p += [loc, loc]
        t = leave
    knots_t, knots_p = np.array(knots_t), np.array(knots_p)
    n_pose = int(round(knots_t[-1] / dt_pose)) + 1
    stamps = np.arange(n_pose) * dt_pose
    positions = np.column_stack([np.interp(stamps, knots_t, knots_p[:, a]) for a in range(3)])
    quats = np.tile([1.0, 0.0, 0.0, 0.0], (n_pose, 1))
    trajectory = PoseTrajectory(stamps, positions, quats)

    n_samples = int(round(stamps[-1] * fs))
    rng = np.random.default_rng(config.seed)
    x = rng.normal(0.0, config.noise_std, n_samples) if config.noise_std > 0 else np.zeros(n_samples)
    tap_len = int(round(config.duration * fs))
    pre = int(round(config.pre_roll * fs))
    index = 0
    for k in range(len(locations)):
        for t_tap in impact_times[k]:
            start = int(round(t_tap * fs)) - pre
            stop = min(start + tap_len, n_samples)
            tap_rng = np.random.default_rng(_tap_seed(config.seed, index))
            x[start:stop] += impact_samples(bool(in_view[k]), float(depths[k]), config, stop - start, tap_rng)
            index += 1
    np.clip(x, -1.0, 1.0, out=x)
    trace = AudioTrace(x, fs)
    truth = GroundTruth(locations, below, nearest, counts, impact_times, in_view, depths)
    return trace, trajectory, truth


GROUND_TRUTH_FIELDS = [
    "location", "x", "y", "z", "has_pipe_below", "nearest_pipe_distance",
    "impacts", "first_impact_time", "pipe_in_view", "echo_depth",
]


def write_ground_truth_csv(path, truth: GroundTruth) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GROUND_TRUTH_FIELDS)
        for k in range(len(truth)):
            x, y, z = truth.positions[k]
            w.writerow([k, repr(float(x)), repr(float(y)), repr(float(z)), int(truth.has_pipe_below[k]),
                        repr(float(truth.nearest_pipe_distance[k])), int(truth.impacts[k]),
                        repr(float(truth.impact_times[k][0])), int(truth.pipe_in_view[k]),
                        repr(float(truth.echo_depths[k]))])


def read_ground_truth_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({
            "location": int(r["location"]),
            "position": np.array([float(r["x"]), float(r["y"]), float(r["z"])]),
            "has_pipe_below": int(r["has_pipe_below"]),
            "nearest_pipe_distance": float(r["nearest_pipe_distance"]),
            "impacts": int(r["impacts"]),
            "first_impact_time": float(r["first_impact_time"]),
            "pipe_in_view": int(r["pipe_in_view"]),
            "echo_depth": float(r["echo_depth"]),
        })
    return out
