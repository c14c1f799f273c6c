"""Synthetic trajectory corpus, trajectory CSV I/O, and error metrics.

Hand motion is minimum-jerk point-to-point with an idle prefix, sampled on
the 34 Hz grid, with additive Gaussian position/velocity noise.  A synthetic
gaze ray from a fixed head position switches from the start point to the
target a configurable lead before the hand moves.  MAPE is computed on
per-axis displacement from the window start (raw coordinates cross zero;
displacement during motion does not), RMSE on raw values.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TrajectoryFormatError
from .predictor import DEFAULT_RATE_HZ, TimedSample
from .scene import GazeRay, SceneConfig

DEFAULT_NOISE_STD = 0.003  # m and m/s
DEFAULT_IDLE_S = 5.0
DEFAULT_GAZE_LEAD_S = 0.5
DEFAULT_PEAK_SPEED = 0.5  # m/s; min-jerk peak, sets duration = 1.875*d/peak
DEFAULT_HEAD_POSITION = (0.0, 0.42, 1.38)

# §-free canonical pair list: two long, three medium, two short
CORPUS_PAIRS = ((2, 11), (5, 18), (5, 11), (5, 15), (12, 15), (3, 4),
                (17, 16))

CSV_HEADER = ("t_s,hand_x_m,hand_y_m,hand_z_m,"
              "hand_vx_mps,hand_vy_mps,hand_vz_mps,"
              "gaze_ox_m,gaze_oy_m,gaze_oz_m,gaze_dx,gaze_dy,gaze_dz")
_HAND_COLS = 7  # t + position + velocity


@dataclass(frozen=True)
class GenParams:
    """Corpus generation knobs; the 0.003 noise constant lives here."""

    duration_s: float | None = None  # None: scale to distance via peak speed
    noise_std: float = DEFAULT_NOISE_STD
    gaze_lead_s: float = DEFAULT_GAZE_LEAD_S
    seed: int = 42
    idle_s: float = DEFAULT_IDLE_S
    rate_hz: float = DEFAULT_RATE_HZ
    head: tuple = DEFAULT_HEAD_POSITION
    peak_speed: float = DEFAULT_PEAK_SPEED

    def __post_init__(self):
        if self.duration_s is not None and self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.noise_std < 0:
            raise ValueError("noise std must be nonnegative")
        if self.gaze_lead_s < 0:
            raise ValueError("gaze lead must be nonnegative")
        if self.idle_s < 0:
            raise ValueError("idle prefix must be nonnegative")
        if self.rate_hz <= 0 or self.peak_speed <= 0:
            raise ValueError("rate and peak speed must be positive")


@dataclass(frozen=True)
class TrajectoryRecord:
    samples: tuple[TimedSample, ...]
    start_id: int
    end_id: int
    label: str = ""
    seed: int | None = None
    motion_start_s: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.samples:
            raise ValueError("record needs at least one sample")
        t = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("sample timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def has_gaze(self) -> bool:
        return all(s.has_gaze for s in self.samples)

    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.samples])

    def velocities(self) -> np.ndarray | None:
        if any(s.velocity is None for s in self.samples):
            return None
        return np.array([s.velocity for s in self.samples])


def min_jerk(a, b, T: float, rate: float = DEFAULT_RATE_HZ):
    """Minimum-jerk profile a→b sampled on the rate grid.

    The duration snaps to the nearest whole number of frames so the final
    sample lands exactly on ``b`` with zero velocity.  Returns (times,
    positions, velocities); peak speed is 1.875*|b-a|/T at the midpoint.
    """
    if T <= 0:
        raise ValueError("duration must be positive")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = max(1, round(T * rate))
    t_snap = n / rate
    tau = np.arange(n + 1) / n
    s = 10 * tau**3 - 15 * tau**4 + 6 * tau**5
    ds = (30 * tau**2 - 60 * tau**3 + 30 * tau**4) / t_snap
    delta = b - a
    pos = a + np.outer(s, delta)
    vel = np.outer(ds, delta)
    return np.arange(n + 1) / rate, pos, vel


def synth_gaze(samples, target, lead_s: float, *,
               head=DEFAULT_HEAD_POSITION, motion_start_s: float | None = None,
               start_point=None) -> list[TimedSample]:
    """Attach gaze rays: at ``target`` from (motion start − lead) onward,
    at ``start_point`` before that.

    ``motion_start_s`` defaults to the first timestamp and ``start_point``
    to the target, so plain motion-only sample lists gaze at the target
    throughout.
    """
    if lead_s < 0:
        raise ValueError("gaze lead must be nonnegative")
    head = np.asarray(head, dtype=float)
    target = np.asarray(target, dtype=float)
    samples = list(samples)
    if motion_start_s is None:
        motion_start_s = samples[0].t if samples else 0.0
    start_aim = (target if start_point is None
                 else np.asarray(start_point, dtype=float))
    switch = motion_start_s - lead_s
    out = []
    for s in samples:
        aim = target if s.t >= switch else start_aim
        ray = GazeRay.aimed_at(head, aim)
        out.append(TimedSample(s.t, s.position, s.velocity,
                               gaze_origin=ray.origin,
                               gaze_dir=ray.direction))
    return out


def _label_for(distance: float) -> str:
    if distance >= 0.8:
        return "long"
    if distance >= 0.5:
        return "medium"
    return "short"


def gen_trajectory(scene: SceneConfig, start_id: int, end_id: int,
                   params: GenParams = GenParams(), *,
                   rng: np.random.Generator | None = None
                   ) -> TrajectoryRecord:
    """One idle-prefixed noisy minimum-jerk record between two scene points.

    The first and last samples stay exactly on the named points (noise only
    in between), so records remain attributable to their endpoints.
    """
    try:
        pa = scene.position_of(start_id)
        pb = scene.position_of(end_id)
    except KeyError as exc:
        raise ValueError(str(exc)) from exc
    if start_id == end_id:
        raise ValueError("start and end must differ")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    d = float(np.linalg.norm(pb - pa))
    T = params.duration_s
    if T is None:
        T = 1.875 * d / params.peak_speed
    rate = params.rate_hz
    n_idle = round(params.idle_s * rate)
    motion_start = n_idle / rate
    t_m, pos_m, vel_m = min_jerk(pa, pb, T, rate)

    t = np.concatenate([np.arange(n_idle) / rate, t_m + motion_start])
    pos = np.vstack([np.tile(pa, (n_idle, 1)), pos_m])
    vel = np.vstack([np.zeros((n_idle, 3)), vel_m])
    if params.noise_std > 0:
        pos = pos + rng.normal(0.0, params.noise_std, pos.shape)
        vel = vel + rng.normal(0.0, params.noise_std, vel.shape)
        pos[0], pos[-1] = pa, pb  # keep endpoints exact
        vel[0], vel[-1] = 0.0, 0.0

    samples = [TimedSample(ti, pi, vi) for ti, pi, vi in zip(t, pos, vel)]
    samples = synth_gaze(samples, pb, params.gaze_lead_s, head=params.head,
                         motion_start_s=motion_start, start_point=pa)
    return TrajectoryRecord(tuple(samples), start_id, end_id,
                            label=_label_for(d), seed=params.seed,
                            motion_start_s=motion_start)


def gen_corpus(scene: SceneConfig, pairs=CORPUS_PAIRS,
               params: GenParams = GenParams()) -> list[TrajectoryRecord]:
    """Deterministic corpus over the point pairs; one record per pair.

    Each record draws from an independent stream keyed by (seed, index), so
    records can be generated in any order or in parallel.
    """
    records = []
    for idx, (a, b) in enumerate(pairs):
        rng = np.random.default_rng([params.seed, idx])
        records.append(gen_trajectory(scene, a, b, params, rng=rng))
    return records


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_csv(rec: TrajectoryRecord, path) -> None:
    """Write one record; floats keep full precision for exact round trips."""
    lines = [f"# start_id={rec.start_id}", f"# end_id={rec.end_id}"]
    if rec.seed is not None:
        lines.append(f"# seed={rec.seed}")
    if rec.label:
        lines.append(f"# label={rec.label}")
    if rec.motion_start_s is not None:
        lines.append(f"# motion_start_s={_fmt(rec.motion_start_s)}")
    lines.append(CSV_HEADER)
    for s in rec.samples:
        cells = [_fmt(s.t)] + [_fmt(v) for v in s.position]
        cells += ([_fmt(v) for v in s.velocity] if s.velocity is not None
                  else ["", "", ""])
        if s.has_gaze:
            cells += [_fmt(v) for v in s.gaze_origin]
            cells += [_fmt(v) for v in s.gaze_dir]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_float(cell: str, line_no: int, what: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise TrajectoryFormatError(f"bad {what} value {cell!r}",
                                    line=line_no) from None


def read_csv(path) -> TrajectoryRecord:
    """Parse a trajectory file; malformed rows carry their line number."""
    meta: dict[str, str] = {}
    header = None
    samples: list[TimedSample] = []
    last_t = None
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    meta[key.strip()] = val.strip()
                continue
            if header is None:
                header = line
                expected = CSV_HEADER.split(",")
                got = line.split(",")
                if got != expected and got != expected[:_HAND_COLS]:
                    raise TrajectoryFormatError(
                        "unrecognized column header", line=line_no)
                continue
            cells = line.split(",")
            if len(cells) not in (_HAND_COLS, len(CSV_HEADER.split(","))):
                raise TrajectoryFormatError(
                    f"expected {_HAND_COLS} or 13 columns, got {len(cells)}",
                    line=line_no)
            t = _parse_float(cells[0], line_no, "timestamp")
            if last_t is not None and t <= last_t:
                raise TrajectoryFormatError(
                    f"timestamp {t} not after {last_t}", line=line_no)
            last_t = t
            pos = [_parse_float(c, line_no, "position") for c in cells[1:4]]
            vel_cells = cells[4:7]
            vel = (None if all(c == "" for c in vel_cells)
                   else [_parse_float(c, line_no, "velocity")
                         for c in vel_cells])
            gaze_o = gaze_d = None
            if len(cells) > _HAND_COLS:
                gcells = cells[_HAND_COLS:]
                if not all(c == "" for c in gcells):
                    gaze_o = [_parse_float(c, line_no, "gaze origin")
                              for c in gcells[0:3]]
                    gaze_d = [_parse_float(c, line_no, "gaze direction")
                              for c in gcells[3:6]]
            try:
                samples.append(TimedSample(t, pos, vel, gaze_origin=gaze_o,
                                           gaze_dir=gaze_d))
            except ValueError as exc:
                raise TrajectoryFormatError(str(exc), line=line_no) from exc
    if header is None or not samples:
        raise TrajectoryFormatError("no data rows", line=0)
    for key in ("start_id", "end_id"):
        if key not in meta:
            raise TrajectoryFormatError(f"missing '# {key}=' comment", line=0)
    try:
        start_id = int(meta["start_id"])
        end_id = int(meta["end_id"])
    except ValueError:
        raise TrajectoryFormatError("point ids must be integers",
                                    line=0) from None
    seed = int(meta["seed"]) if "seed" in meta else None
    motion = (float(meta["motion_start_s"])
              if "motion_start_s" in meta else None)
    return TrajectoryRecord(tuple(samples), start_id, end_id,
                            label=meta.get("label", ""), seed=seed,
                            motion_start_s=motion)


def mape(pred, actual) -> float:
    """Mean absolute percentage error; zero denominators are dropped.

    A RuntimeWarning reports how many elements were excluded.  All-zero
    actuals yield NaN.
    """
    p = np.asarray(pred, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.shape != a.shape:
        raise ValueError("pred and actual must have equal lengths")
    if p.size == 0:
        raise ValueError("empty input")
    valid = a != 0
    n_excluded = int(np.sum(~valid))
    if n_excluded:
        warnings.warn(f"mape: excluded {n_excluded} zero-denominator "
                      "element(s)", RuntimeWarning, stacklevel=2)
    if not np.any(valid):
        return float("nan")
    return float(100.0 * np.mean(np.abs(p[valid] - a[valid])
                                 / np.abs(a[valid])))


def rmse(pred, actual) -> float:
    p = np.asarray(pred, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.shape != a.shape:
        raise ValueError("pred and actual must have equal lengths")
    if p.size == 0:
        raise ValueError("empty input")
    return float(np.sqrt(np.mean((p - a) ** 2)))
