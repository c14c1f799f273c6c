"""Six per-tick target-selection strategies.

STA/STB pick the interaction point nearest the real or predicted hand.
STC-STF add a safe-point fallback: when the (scaled) hand distance to the
candidate point is not under the threshold r, a via point on the partition
plane is selected instead.  STE/STF preselect the candidate by gaze.

Degraded-input fallbacks form a lattice: losing the prediction drops
STB→STA, STD→STC, STF→STE; losing the gaze candidate drops STE→STC and
STF→STD.  All threshold comparisons are strict, so boundary equality takes
the safer branch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NoCandidateError, OutOfOrderError
from .predictor import (DEFAULT_HORIZON_FRACTION, DEFAULT_RATE_HZ,
                        OnlinePredictor, TimedSample)
from .scene import GazeRay, SceneConfig, gaze_select


class StrategyKind(enum.Enum):
    STA = "STA"  # nearest to hand
    STB = "STB"  # nearest to GP prediction
    STC = "STC"  # hand threshold, safe-point fallback
    STD = "STD"  # STC + GP branch
    STE = "STE"  # gaze preselect, safe-point fallback
    STF = "STF"  # STE + GP branch

    @property
    def uses_gp(self) -> bool:
        return self in (StrategyKind.STB, StrategyKind.STD, StrategyKind.STF)

    @property
    def uses_gaze(self) -> bool:
        return self in (StrategyKind.STE, StrategyKind.STF)


class DecisionSource(enum.Enum):
    REAL_HAND = "real_hand"
    GP_PREDICTION = "gp_prediction"
    GAZE = "gaze"
    SAFE_POINT_FALLBACK = "safe_point_fallback"


@dataclass(frozen=True)
class StrategyParams:
    r: float = 0.2  # m, hand threshold
    alpha: float = 0.8  # scaling applied to every threshold distance
    window_s: float = 2.0
    horizon_fraction: float = DEFAULT_HORIZON_FRACTION
    # STC variant: aim the safe-point scan at the hand's nearest interaction
    # point instead of the hand itself
    safe_nn_to_point: bool = False

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise ValueError("threshold r must be positive")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")
        if self.window_s <= 0:
            raise ValueError("window must be positive")


@dataclass(frozen=True)
class Decision:
    target_id: int
    source: DecisionSource
    t: float


def sta_nn(hand, scene: SceneConfig, t: float = 0.0) -> Decision:
    """Interaction point nearest the real hand."""
    return Decision(scene.nearest_point(hand).id, DecisionSource.REAL_HAND,
                    float(t))


def stb_gp_nn(hand, pred_pos, scene: SceneConfig,
              t: float = 0.0) -> Decision:
    """Interaction point nearest the predicted hand; STA until ready."""
    if pred_pos is None:
        return sta_nn(hand, scene, t)
    return Decision(scene.nearest_point(pred_pos).id,
                    DecisionSource.GP_PREDICTION, float(t))


def stc_safe_nn(hand, scene: SceneConfig, r: float,
                safe_nn_to_point: bool = False, t: float = 0.0) -> Decision:
    """Nearest point when the hand is within r of it, else a safe point."""
    hand = np.asarray(hand, dtype=float)
    p = scene.nearest_point(hand)
    if float(np.linalg.norm(hand - p.pos)) < r:
        return Decision(p.id, DecisionSource.REAL_HAND, float(t))
    ref = p.pos if safe_nn_to_point else hand
    return Decision(scene.nearest_safe_point(ref).id,
                    DecisionSource.SAFE_POINT_FALLBACK, float(t))


def std_safe_gp_nn(hand, pred_pos, scene: SceneConfig,
                   params: StrategyParams, t: float = 0.0) -> Decision:
    """STC plus a GP branch; both checks scaled by alpha.

    The second check measures the predicted hand against the *real* hand's
    nearest point before switching to the predicted point.  The safe-point
    fallback scans around the point predicted by GP.
    """
    if pred_pos is None:
        return stc_safe_nn(hand, scene, params.r, params.safe_nn_to_point, t)
    hand = np.asarray(hand, dtype=float)
    pred_pos = np.asarray(pred_pos, dtype=float)
    p = scene.nearest_point(hand)
    if params.alpha * float(np.linalg.norm(hand - p.pos)) < params.r:
        return Decision(p.id, DecisionSource.REAL_HAND, float(t))
    p_hat = scene.nearest_point(pred_pos)
    if params.alpha * float(np.linalg.norm(pred_pos - p.pos)) < params.r:
        return Decision(p_hat.id, DecisionSource.GP_PREDICTION, float(t))
    return Decision(scene.nearest_safe_point(p_hat.pos).id,
                    DecisionSource.SAFE_POINT_FALLBACK, float(t))


def ste_gaze_safe_nn(hand, ray: GazeRay | None, scene: SceneConfig,
                     params: StrategyParams, t: float = 0.0) -> Decision:
    """Gaze preselects the candidate; hand distance gates it, else a safe
    point near the gazed point.  No usable gaze falls back to STC."""
    p_gz = _gaze_candidate(ray, scene)
    if p_gz is None:
        return stc_safe_nn(hand, scene, params.r, params.safe_nn_to_point, t)
    hand = np.asarray(hand, dtype=float)
    if params.alpha * float(np.linalg.norm(hand - p_gz.pos)) < params.r:
        return Decision(p_gz.id, DecisionSource.GAZE, float(t))
    return Decision(scene.nearest_safe_point(p_gz.pos).id,
                    DecisionSource.SAFE_POINT_FALLBACK, float(t))


def stf_gaze_safe_gp_nn(hand, pred_pos, ray: GazeRay | None,
                        scene: SceneConfig, params: StrategyParams,
                        t: float = 0.0) -> Decision:
    """Gaze gate first, then the GP branch, then a safe point near the
    GP-selected point.  Warm-up drops to STE; gaze loss drops to STD."""
    if pred_pos is None:
        return ste_gaze_safe_nn(hand, ray, scene, params, t)
    p_gz = _gaze_candidate(ray, scene)
    if p_gz is None:
        return std_safe_gp_nn(hand, pred_pos, scene, params, t)
    hand = np.asarray(hand, dtype=float)
    pred_pos = np.asarray(pred_pos, dtype=float)
    if params.alpha * float(np.linalg.norm(hand - p_gz.pos)) < params.r:
        return Decision(p_gz.id, DecisionSource.GAZE, float(t))
    p_gp = scene.nearest_point(pred_pos)
    if params.alpha * float(np.linalg.norm(pred_pos - p_gp.pos)) < params.r:
        return Decision(p_gp.id, DecisionSource.GP_PREDICTION, float(t))
    return Decision(scene.nearest_safe_point(p_gp.pos).id,
                    DecisionSource.SAFE_POINT_FALLBACK, float(t))


def _gaze_candidate(ray, scene):
    if ray is None:
        return None
    try:
        return gaze_select(ray, scene.points)
    except NoCandidateError:
        return None


@dataclass(frozen=True)
class DecisionRecord:
    """One decision-log row: the decision plus the inputs that produced it."""

    decision: Decision
    hand: np.ndarray
    predicted: np.ndarray | None


DECISION_LOG_HEADER = ("t_s,strategy,target_id,source,"
                       "hand_x,hand_y,hand_z,pred_x,pred_y,pred_z")


def decision_log_rows(records, kind: StrategyKind) -> list[str]:
    """CSV rows in the decision-log schema; pred columns empty when the
    predictor was not ready."""
    rows = []
    for rec in records:
        pred = (",," if rec.predicted is None
                else ",".join(f"{v:.9g}" for v in rec.predicted))
        hand = ",".join(f"{v:.9g}" for v in rec.hand)
        d = rec.decision
        rows.append(f"{d.t:.9g},{kind.value},{d.target_id},{d.source.value},"
                    f"{hand},{pred}")
    return rows


class StrategyState:
    """Per-stream dispatcher: pushes samples, trains when due, decides.

    One instance per (trajectory, strategy) run; samples must arrive in
    time order.
    """

    def __init__(self, kind: StrategyKind, scene: SceneConfig,
                 params: StrategyParams | None = None,
                 rate_hz: float = DEFAULT_RATE_HZ):
        self.kind = kind
        self.scene = scene
        self.params = params or StrategyParams()
        self.predictor: OnlinePredictor | None = None
        if kind.uses_gp:
            capacity = max(2, round(self.params.window_s * rate_hz))
            self.predictor = OnlinePredictor(
                capacity, self.params.horizon_fraction, rate_hz=rate_hz)
        self._last_t: float | None = None
        self.log: list[DecisionRecord] = []

    def step(self, sample: TimedSample) -> Decision:
        """Ingest one sample and emit this tick's decision."""
        if self._last_t is not None and sample.t <= self._last_t:
            raise OutOfOrderError(
                f"timestamp {sample.t} not after {self._last_t}")
        pred_pos = None
        if self.predictor is not None:
            self.predictor.push(sample)  # validates ordering again
            if self.predictor.ready:
                pred_pos = self.predictor.last_prediction.position_hat
        self._last_t = sample.t
        ray = (GazeRay(sample.gaze_origin, sample.gaze_dir)
               if sample.has_gaze else None)
        hand = sample.position
        t = sample.t
        kind, prm = self.kind, self.params
        if kind is StrategyKind.STA:
            decision = sta_nn(hand, self.scene, t)
        elif kind is StrategyKind.STB:
            decision = stb_gp_nn(hand, pred_pos, self.scene, t)
        elif kind is StrategyKind.STC:
            decision = stc_safe_nn(hand, self.scene, prm.r,
                                   prm.safe_nn_to_point, t)
        elif kind is StrategyKind.STD:
            decision = std_safe_gp_nn(hand, pred_pos, self.scene, prm, t)
        elif kind is StrategyKind.STE:
            decision = ste_gaze_safe_nn(hand, ray, self.scene, prm, t)
        elif kind is StrategyKind.STF:
            decision = stf_gaze_safe_gp_nn(hand, pred_pos, ray, self.scene,
                                           prm, t)
        else:  # pragma: no cover
            raise ValueError(f"unknown strategy {kind}")
        self.log.append(DecisionRecord(
            decision, hand.copy(),
            None if pred_pos is None else np.array(pred_pos)))
        return decision
