"""Discrete-time replay of a hand/gaze stream against one strategy.

Each tick computes a Decision, commands a non-preemptive point-to-point
robot (latest decision wins as the single pending target), and advances the
robot along straight polylines split at the partition plane.  Segment speed
is the free-space speed only when the segment midpoint is in free space, so
boundary-touching segments take the slower interior speed.  After the
stream ends the hand freezes and ticking continues until the robot reaches
the true endpoint or times out.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .predictor import TimedSample
from .scene import Region, SceneConfig, distance_to_sphere, region_of
from .strategies import (Decision, DecisionSource, StrategyKind,
                         StrategyParams, StrategyState)

DEFAULT_DT = 1.0 / 34.0
DEFAULT_V_FREE = 0.4  # m/s in free space
DEFAULT_V_INTERIOR = 0.25  # m/s inside the workspace
DEFAULT_TIMEOUT_S = 60.0


@dataclass(frozen=True)
class SimConfig:
    scene: SceneConfig
    params: StrategyParams = StrategyParams()
    dt: float = DEFAULT_DT
    v_free: float = DEFAULT_V_FREE
    v_interior: float = DEFAULT_V_INTERIOR
    timeout_s: float = DEFAULT_TIMEOUT_S
    # T_d rule: stable detection by default, first detection as a toggle
    first_detection: bool = False

    def __post_init__(self):
        if not (self.v_free > self.v_interior > 0):
            raise ValueError("speeds must satisfy v_free > v_interior > 0")
        if self.dt <= 0 or self.timeout_s <= 0:
            raise ValueError("dt and timeout must be positive")


@dataclass(frozen=True)
class RobotTrajectory:
    from_id: int
    to_id: int
    polyline: np.ndarray  # (k, 3) vertices, split at the plane
    speeds: np.ndarray  # (k-1,) per segment
    seg_lengths: np.ndarray

    @property
    def length(self) -> float:
        return float(np.sum(self.seg_lengths))

    @property
    def duration(self) -> float:
        return float(np.sum(self.seg_lengths / self.speeds))


def build_trajectory(a: int, b: int, scene: SceneConfig,
                     cfg: SimConfig) -> RobotTrajectory:
    """Straight path a→b, split where it crosses the partition plane.

    Sub-segment speed is v_free iff its midpoint classifies as free space;
    on-plane counts as interior, so a boundary-touching half still runs at
    the interior speed only when it actually lies on the interior side.
    """
    if a == b:
        raise ValueError("trajectory endpoints must differ")
    try:
        pa = scene.position_of(a)
        pb = scene.position_of(b)
    except KeyError as exc:
        raise ValueError(str(exc)) from exc
    sa = scene.plane.signed_distance(pa)
    sb = scene.plane.signed_distance(pb)
    verts = [pa]
    if (sa > 0) != (sb > 0) and sa != 0 and sb != 0:
        t = sa / (sa - sb)
        if 0 < t < 1:
            verts.append(pa + t * (pb - pa))
    verts.append(pb)
    poly = np.array(verts)
    speeds = np.empty(len(verts) - 1)
    lengths = np.empty(len(verts) - 1)
    for i in range(len(verts) - 1):
        mid = 0.5 * (poly[i] + poly[i + 1])
        free = region_of(mid, scene.plane) is Region.FREE_SPACE
        speeds[i] = cfg.v_free if free else cfg.v_interior
        lengths[i] = float(np.linalg.norm(poly[i + 1] - poly[i]))
    return RobotTrajectory(a, b, poly, speeds, lengths)


class RobotState:
    """Non-preemptive robot: one active trajectory, one pending target."""

    def __init__(self, at_id: int, scene: SceneConfig, cfg: SimConfig):
        self.scene = scene
        self.cfg = cfg
        self.location_id: int | None = at_id  # point id when idle
        self.position = scene.position_of(at_id).copy()
        self.traj: RobotTrajectory | None = None
        self.seg = 0
        self.seg_done = 0.0  # length covered on the current segment
        self.pending: int | None = None
        self.arrivals: list[tuple[float, int]] = []  # (t, point id)
        self.legs: list[tuple[float, int, int]] = []  # (t, from, to)
        self._cache: dict[tuple[int, int], RobotTrajectory] = {}

    @property
    def moving(self) -> bool:
        return self.traj is not None

    def _start(self, target: int, t: float) -> None:
        key = (self.location_id, target)
        if key not in self._cache:
            self._cache[key] = build_trajectory(key[0], key[1], self.scene,
                                                self.cfg)
        self.traj = self._cache[key]
        self.seg = 0
        self.seg_done = 0.0
        self.legs.append((t, key[0], key[1]))
        self.location_id = None

    def command(self, target: int, t: float) -> None:
        """Apply this tick's decision: start a leg when idle, otherwise
        overwrite the pending target (latest wins)."""
        if self.traj is None:
            if target != self.location_id:
                self._start(target, t)
        else:
            self.pending = target

    def advance(self, dt: float, t: float) -> float:
        """Move along the polyline for one tick; arrival consumes leftover
        time on the next pending leg.  Returns distance moved."""
        moved = 0.0
        remaining = dt
        while remaining > 0 and self.traj is not None:
            seg_len = self.traj.seg_lengths[self.seg]
            speed = self.traj.speeds[self.seg]
            left = seg_len - self.seg_done
            step = speed * remaining
            if step < left:
                self.seg_done += step
                moved += step
                frac = self.seg_done / seg_len
                self.position = ((1 - frac) * self.traj.polyline[self.seg]
                                 + frac * self.traj.polyline[self.seg + 1])
                remaining = 0.0
            else:
                moved += left
                remaining -= left / speed
                self.seg += 1
                self.seg_done = 0.0
                self.position = self.traj.polyline[self.seg].copy()
                if self.seg == len(self.traj.seg_lengths):
                    self._arrive(t)
        return moved

    def _arrive(self, t: float) -> None:
        self.location_id = self.traj.to_id
        self.arrivals.append((t, self.location_id))
        self.traj = None
        self.seg = 0
        self.seg_done = 0.0
        if self.pending is not None:
            target, self.pending = self.pending, None
            if target != self.location_id:
                self._start(target, t)


@dataclass
class RunLog:
    """Per-tick record of one simulated run plus robot event lists."""

    kind: StrategyKind
    start_id: int
    end_id: int
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    target: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    source: list[DecisionSource] = field(default_factory=list)
    robot_pos: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    robot_moving: np.ndarray = field(default_factory=lambda: np.empty(0, bool))
    d_h: np.ndarray = field(default_factory=lambda: np.empty(0))
    moved: np.ndarray = field(default_factory=lambda: np.empty(0))
    arrivals: list[tuple[float, int]] = field(default_factory=list)
    legs: list[tuple[float, int, int]] = field(default_factory=list)
    decision_records: list = field(default_factory=list)  # strategy log rows

    def __len__(self) -> int:
        return len(self.t)


RUN_LOG_HEADER = "t_s,decision_target,decision_source,robot_x,robot_y,robot_z,robot_state,d_h_m"


def run_log_rows(log: RunLog) -> list[str]:
    rows = []
    for i in range(len(log)):
        state = "moving" if log.robot_moving[i] else "idle"
        pos = ",".join(f"{v:.9g}" for v in log.robot_pos[i])
        rows.append(f"{log.t[i]:.9g},{log.target[i]},{log.source[i].value},"
                    f"{pos},{state},{log.d_h[i]:.9g}")
    return rows


@dataclass(frozen=True)
class RunMetrics:
    """Efficiency (T_d, T_r, D_r) and safety (SP_d, SP_r, D_h) figures."""

    t_d_s: float  # NaN when never detected
    t_r_s: float  # NaN when never reached
    d_r_m: float
    sp_d: int  # distinct safe-point ids in decisions
    sp_r: int  # distinct safe-point ids the robot visited
    d_h_m: float  # mean robot clearance from the human sphere
    detected: bool
    reached: bool


METRICS_HEADER = ("trajectory_id,strategy,T_d_s,T_r_s,D_r_m,"
                  "SP_d,SP_r,D_h_m,detected_flag,reached_flag")


def metrics_row(trajectory_id: str, kind: StrategyKind,
                m: RunMetrics) -> str:
    return (f"{trajectory_id},{kind.value},{m.t_d_s:.9g},{m.t_r_s:.9g},"
            f"{m.d_r_m:.9g},{m.sp_d},{m.sp_r},{m.d_h_m:.9g},"
            f"{int(m.detected)},{int(m.reached)}")


def compute_metrics(log: RunLog, true_end: int, scene: SceneConfig,
                    first_detection: bool = False) -> RunMetrics:
    """Reduce a run log to the six figures; times are relative to the
    stream start."""
    if len(log) == 0:
        raise ValueError("empty run log")
    t0 = float(log.t[0])
    hits = log.target == true_end
    if first_detection:
        idx = np.flatnonzero(hits)
        detected = idx.size > 0
        t_d = float(log.t[idx[0]] - t0) if detected else float("nan")
    else:
        # stable: the first hit never followed by a different decision
        misses = np.flatnonzero(~hits)
        cut = misses[-1] + 1 if misses.size else 0
        detected = cut < len(log)
        t_d = float(log.t[cut] - t0) if detected else float("nan")
    reach_ts = [t for (t, pid) in log.arrivals if pid == true_end]
    reached = bool(reach_ts)
    t_r = float(reach_ts[0] - t0) if reached else float("nan")
    safe_ids = {sp.id for sp in scene.safe_points}
    sp_d = len(safe_ids & set(int(x) for x in log.target))
    sp_r = len(safe_ids & {pid for (_, pid) in log.arrivals})
    return RunMetrics(t_d_s=t_d, t_r_s=t_r, d_r_m=float(np.sum(log.moved)),
                      sp_d=sp_d, sp_r=sp_r, d_h_m=float(np.mean(log.d_h)),
                      detected=detected, reached=reached)


def run(record, kind: StrategyKind, cfg: SimConfig
        ) -> tuple[RunMetrics, RunLog]:
    """Replay one trajectory record under one strategy.

    The robot starts idle at the record's start point.  During the stream
    the hand follows the recorded samples; afterwards it freezes at the
    last sample (zero velocity) while the robot finishes, up to the
    timeout.  Deterministic: same record, same output.
    """
    scene = cfg.scene
    rate_hz = 1.0 / cfg.dt
    state = StrategyState(kind, scene, cfg.params, rate_hz=rate_hz)
    robot = RobotState(record.start_id, scene, cfg)
    true_end = record.end_id
    if not scene.has_point(true_end):
        raise ValueError(f"unknown endpoint id {true_end}")

    ts, targets, sources = [], [], []
    positions, moving_flags, d_hs, moves = [], [], [], []

    def tick(sample: TimedSample) -> None:
        decision = state.step(sample)
        robot.command(decision.target_id, sample.t)
        moved = robot.advance(cfg.dt, sample.t)
        ts.append(sample.t)
        targets.append(decision.target_id)
        sources.append(decision.source)
        positions.append(robot.position.copy())
        moving_flags.append(robot.moving)
        d_hs.append(distance_to_sphere(robot.position, scene.human))
        moves.append(moved)

    for sample in record.samples:
        tick(sample)

    def reached_end() -> bool:
        return any(pid == true_end for (_, pid) in robot.arrivals)

    last = record.samples[-1]
    t_frozen = last.t
    max_post = int(np.ceil(cfg.timeout_s / cfg.dt))
    n_post = 0
    while not reached_end() and n_post < max_post:
        n_post += 1
        t_frozen += cfg.dt
        frozen = TimedSample(t_frozen, last.position,
                             np.zeros(3) if last.velocity is not None
                             else None,
                             gaze_origin=last.gaze_origin,
                             gaze_dir=last.gaze_dir)
        tick(frozen)

    log = RunLog(kind=kind, start_id=record.start_id, end_id=true_end,
                 t=np.array(ts), target=np.array(targets, dtype=int),
                 source=sources, robot_pos=np.array(positions),
                 robot_moving=np.array(moving_flags, dtype=bool),
                 d_h=np.array(d_hs), moved=np.array(moves),
                 arrivals=list(robot.arrivals), legs=list(robot.legs),
                 decision_records=list(state.log))
    metrics = compute_metrics(log, true_end, scene, cfg.first_detection)
    return metrics, log
