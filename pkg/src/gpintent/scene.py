"""Geometric world model: interaction points, safe points, partition plane,
human sphere, and gaze-ray scoring.

The workspace is split by a plane into an interior (user side, negative
half-space, low robot speed) and free space.  Interaction points live in the
interior; safe points sit on the plane and act as via points.  Gaze rays are
scored by lambda = perpendicular / along-ray distance, so the most gazed-at
point has the smallest score.
"""
from __future__ import annotations

import enum
import json
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import BehindUserError, NoCandidateError, SceneFormatError

INTERACTION_ID_RANGE = (1, 18)
SAFE_ID_RANGE = (20, 24)
PLANE_TOLERANCE = 1e-6  # m; safe points must sit on the plane this tightly


def _vec3(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


class Region(enum.Enum):
    INTERIOR = "interior"
    FREE_SPACE = "free_space"


@dataclass(frozen=True)
class InteractionPoint:
    id: int
    pos: np.ndarray

    def __post_init__(self):
        lo, hi = INTERACTION_ID_RANGE
        if not lo <= self.id <= hi:
            raise ValueError(f"interaction point id {self.id} outside "
                             f"[{lo},{hi}]")
        object.__setattr__(self, "pos", _vec3(self.pos, "pos"))


@dataclass(frozen=True)
class SafePoint:
    id: int
    pos: np.ndarray

    def __post_init__(self):
        lo, hi = SAFE_ID_RANGE
        if not lo <= self.id <= hi:
            raise ValueError(f"safe point id {self.id} outside [{lo},{hi}]")
        object.__setattr__(self, "pos", _vec3(self.pos, "pos"))


@dataclass(frozen=True)
class PartitionPlane:
    """Plane through ``point`` with unit ``normal``; interior is the
    negative half-space."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", _vec3(self.point, "point"))
        n = _vec3(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", n)

    def signed_distance(self, pos) -> float:
        return float((_vec3(pos, "pos") - self.point) @ self.normal)


@dataclass(frozen=True)
class HumanSphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class GazeRay:
    origin: np.ndarray
    direction: np.ndarray  # unit

    def __post_init__(self):
        object.__setattr__(self, "origin", _vec3(self.origin, "origin"))
        d = _vec3(self.direction, "direction")
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValueError("gaze direction must be unit length")
        object.__setattr__(self, "direction", d)

    @classmethod
    def aimed_at(cls, origin, target) -> "GazeRay":
        """Ray from ``origin`` through ``target`` (normalized here)."""
        origin = _vec3(origin, "origin")
        target = _vec3(target, "target")
        d = target - origin
        norm = np.linalg.norm(d)
        if norm == 0:
            raise ValueError("gaze target coincides with origin")
        return cls(origin, d / norm)


def nearest_point(pos, points: Sequence[InteractionPoint]) -> InteractionPoint:
    """Closest interaction point by Euclidean distance, ties to lowest id."""
    return _nearest(pos, points, "interaction points")


def nearest_safe_point(pos, sps: Sequence[SafePoint]) -> SafePoint:
    """Closest safe point, ties to lowest id."""
    return _nearest(pos, sps, "safe points")


def _nearest(pos, points, what):
    if not points:
        raise ValueError(f"no {what} to search")
    pos = _vec3(pos, "pos")
    best = None
    best_key = None
    for p in points:
        key = (float(np.linalg.norm(p.pos - pos)), p.id)
        if best_key is None or key < best_key:
            best, best_key = p, key
    return best


def gaze_score(ray: GazeRay, p) -> float:
    """lambda = l1 / L1: perpendicular over along-ray distance to ``p``.

    Zero means the point lies exactly on the ray; points behind the origin
    (along-ray projection <= 0) raise BehindUserError and callers treat the
    score as +inf.
    """
    rel = _vec3(p, "p") - ray.origin
    along = float(rel @ ray.direction)
    if along <= 0:
        raise BehindUserError("point is behind the user")
    perp = float(np.linalg.norm(rel - along * ray.direction))
    return perp / along


def gaze_select(ray: GazeRay,
                points: Sequence[InteractionPoint]) -> InteractionPoint:
    """Point with the smallest gaze score, ties to lowest id."""
    best = None
    best_key = None
    for p in points:
        try:
            lam = gaze_score(ray, p.pos)
        except BehindUserError:
            continue
        key = (lam, p.id)
        if best_key is None or key < best_key:
            best, best_key = p, key
    if best is None:
        raise NoCandidateError("every point is behind the user")
    return best


def region_of(pos, plane: PartitionPlane) -> Region:
    """Halfspace classification; exactly on the plane counts as interior."""
    return (Region.FREE_SPACE if plane.signed_distance(pos) > 0
            else Region.INTERIOR)


def distance_to_sphere(pos, s: HumanSphere) -> float:
    """Surface clearance, zero anywhere inside the sphere."""
    return max(0.0, float(np.linalg.norm(_vec3(pos, "pos") - s.center))
               - s.radius)


@dataclass(frozen=True)
class SceneConfig:
    """Immutable world model; all queries are pure."""

    points: tuple[InteractionPoint, ...]
    safe_points: tuple[SafePoint, ...]
    plane: PartitionPlane
    human: HumanSphere

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "safe_points", tuple(self.safe_points))
        if not self.points:
            raise ValueError("scene needs at least one interaction point")
        if not self.safe_points:
            raise ValueError("scene needs at least one safe point")
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate interaction point ids")
        sids = [sp.id for sp in self.safe_points]
        if len(set(sids)) != len(sids):
            raise ValueError("duplicate safe point ids")
        for sp in self.safe_points:
            if abs(self.plane.signed_distance(sp.pos)) > PLANE_TOLERANCE:
                raise ValueError(f"safe point {sp.id} is off the partition "
                                 "plane")

    def point(self, point_id: int) -> InteractionPoint | SafePoint:
        """Look up any point (interaction or safe) by id."""
        for p in self.points:
            if p.id == point_id:
                return p
        for sp in self.safe_points:
            if sp.id == point_id:
                return sp
        raise KeyError(f"no point with id {point_id}")

    def position_of(self, point_id: int) -> np.ndarray:
        return self.point(point_id).pos

    def has_point(self, point_id: int) -> bool:
        try:
            self.point(point_id)
            return True
        except KeyError:
            return False

    def nearest_point(self, pos) -> InteractionPoint:
        return nearest_point(pos, self.points)

    def nearest_safe_point(self, pos) -> SafePoint:
        return nearest_safe_point(pos, self.safe_points)

    def gaze_select(self, ray: GazeRay) -> InteractionPoint:
        return gaze_select(ray, self.points)

    def region_of(self, pos) -> Region:
        return region_of(pos, self.plane)

    def distance_to_sphere(self, pos) -> float:
        return distance_to_sphere(pos, self.human)

    def to_dict(self) -> dict:
        return {
            "points": [{"id": p.id, "x": p.pos[0], "y": p.pos[1],
                        "z": p.pos[2]} for p in self.points],
            "safe_points": [{"id": sp.id, "x": sp.pos[0], "y": sp.pos[1],
                             "z": sp.pos[2]} for sp in self.safe_points],
            "plane": {"px": self.plane.point[0], "py": self.plane.point[1],
                      "pz": self.plane.point[2], "nx": self.plane.normal[0],
                      "ny": self.plane.normal[1],
                      "nz": self.plane.normal[2]},
            "human": {"cx": self.human.center[0], "cy": self.human.center[1],
                      "cz": self.human.center[2],
                      "radius": self.human.radius},
        }


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise SceneFormatError(f"{where}: missing field '{key}'")
    return mapping[key]


def _num(mapping, key, where) -> float:
    v = _require(mapping, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SceneFormatError(f"{where}.{key}: expected a number")
    return float(v)


def scene_from_dict(doc: dict) -> SceneConfig:
    """Build and validate a scene from the JSON document structure."""
    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be a JSON object")
    plane_doc = _require(doc, "plane", "scene")
    normal = np.array([_num(plane_doc, k, "plane")
                       for k in ("nx", "ny", "nz")])
    norm = np.linalg.norm(normal)
    if norm == 0 or not np.all(np.isfinite(normal)):
        raise SceneFormatError("plane: normal must be nonzero and finite")
    human_doc = _require(doc, "human", "scene")
    try:
        plane = PartitionPlane(
            np.array([_num(plane_doc, k, "plane")
                      for k in ("px", "py", "pz")]),
            normal / norm)  # files may carry unnormalized normals
        human = HumanSphere(
            np.array([_num(human_doc, k, "human")
                      for k in ("cx", "cy", "cz")]),
            _num(human_doc, "radius", "human"))
        points = []
        for i, row in enumerate(_require(doc, "points", "scene")):
            where = f"points[{i}]"
            pid = _require(row, "id", where)
            if isinstance(pid, bool) or not isinstance(pid, int):
                raise SceneFormatError(f"{where}.id: expected an integer")
            points.append(InteractionPoint(pid, np.array(
                [_num(row, k, where) for k in ("x", "y", "z")])))
        sps = []
        for i, row in enumerate(_require(doc, "safe_points", "scene")):
            where = f"safe_points[{i}]"
            pid = _require(row, "id", where)
            if isinstance(pid, bool) or not isinstance(pid, int):
                raise SceneFormatError(f"{where}.id: expected an integer")
            sps.append(SafePoint(pid, np.array(
                [_num(row, k, where) for k in ("x", "y", "z")])))
        return SceneConfig(tuple(points), tuple(sps), plane, human)
    except SceneFormatError:
        raise
    except ValueError as exc:
        raise SceneFormatError(str(exc)) from exc


def load_scene(path) -> SceneConfig:
    """Read a scene JSON file; every structural problem raises
    SceneFormatError."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"invalid JSON: {exc}") from exc
    return scene_from_dict(doc)


def write_scene(scene: SceneConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# Default synthetic cockpit.  The partition plane is y = 0.8 with free space
# beyond it; the user leans over the bench from behind, so the head sphere
# floats high on the centreline just short of the plane.  Interaction points
# fill a 1.2 x 0.8 x 0.6 m box in the interior: low bench controls at the
# front, raised console wings left and right, and a rear row near the plane.
# Points 1, 7, 8 and 10 are raised thumbwheels that hang over the bench
# runs; 14 is an indicator lamp between the rear row and the right wing.
# The five safe points sit on the plane, evenly spaced laterally.
_DEFAULT_POINTS = {
    1: (0.5716, 0.3676, 1.1977),
    2: (0.54, 0.05, 1.20),
    3: (0.55, 0.10, 0.76),
    4: (0.59, 0.47, 0.76),
    5: (0.04, 0.08, 0.74),
    6: (0.58, 0.72, 1.24),
    7: (0.0608, 0.2358, 1.0216),
    8: (-0.466, 0.418, 1.112),
    9: (0.26, 0.08, 0.72),
    10: (-0.124, 0.257, 0.948),
    11: (0.12, 0.72, 0.94),
    12: (-0.46, 0.06, 1.08),
    13: (-0.58, 0.70, 1.18),
    14: (0.347, 0.631, 1.244),
    15: (-0.18, 0.70, 0.80),
    16: (-0.53, 0.47, 0.80),
    17: (-0.55, 0.10, 0.74),
    18: (0.56, 0.70, 0.96),
}
_DEFAULT_SAFE_POINTS = {
    20: (-0.60, 0.80, 1.26),
    21: (-0.30, 0.80, 1.26),
    22: (0.00, 0.80, 1.26),
    23: (0.30, 0.80, 1.26),
    24: (0.60, 0.80, 1.26),
}


def default_scene() -> SceneConfig:
    """The built-in cockpit layout used by the synthetic corpus."""
    return SceneConfig(
        points=tuple(InteractionPoint(i, np.array(p))
                     for i, p in sorted(_DEFAULT_POINTS.items())),
        safe_points=tuple(SafePoint(i, np.array(p))
                          for i, p in sorted(_DEFAULT_SAFE_POINTS.items())),
        plane=PartitionPlane(np.array([0.0, 0.8, 1.0]),
                             np.array([0.0, 1.0, 0.0])),
        human=HumanSphere(np.array([0.0, 0.46, 1.22]), 0.14),
    )
