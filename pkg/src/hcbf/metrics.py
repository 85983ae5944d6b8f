"""Episode metrics: tracking RMSE, clearances, relaxation peaks and interaction statistics.

``aggregate`` is a fold over step records through ``MetricsAccumulator``;
accumulators merge, so metrics of a concatenated log equal the merge of the
metrics of its pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROI_RULES = ("table1_or", "fig10_and")
_HULL_BUFFER = 4096


def relative_velocity(p_ee, p_h, v_ee, v_h) -> float:
    """Rate of change of the end-effector to obstacle distance; negative when closing."""
    d = np.asarray(p_ee, dtype=float) - np.asarray(p_h, dtype=float)
    n = math.sqrt(float(d @ d))
    if n <= 1e-12:
        raise ValueError("coincident points: relative velocity undefined")
    return float(d @ (np.asarray(v_ee, dtype=float) - np.asarray(v_h, dtype=float))) / n


def rmse(records, trajectory=None) -> float:
    """Root mean square end-effector position error over the log."""
    if not records:
        raise ValueError("empty log")
    sq = 0.0
    for r in records:
        p_d = r.p_d if trajectory is None else trajectory(r.t).p_d
        e = np.asarray(r.p_ee) - np.asarray(p_d)
        sq += float(e @ e)
    return math.sqrt(sq / len(records))


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices (Andrew's monotone chain), collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(poly) -> float:
    poly = np.asarray(poly, dtype=float)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def hull_area(points) -> float:
    return polygon_area(convex_hull(points)) if len(points) else 0.0


def in_roi(distance: float, v_rel: float, rule: str = "table1_or", roi_distance: float = 0.6) -> bool:
    if rule == "table1_or":
        return distance < roi_distance or v_rel < 0
    if rule == "fig10_and":
        return distance < roi_distance and v_rel < 0
    raise ValueError(f"unknown ROI rule {rule!r}")


@dataclass(frozen=True)
class RoiStats:
    mean_distance: float
    mean_v_rel: float
    hull_area: float
    ticks: int


@dataclass(frozen=True)
class ScenarioMetrics:
    rmse: float
    d_min: dict
    delta_max: dict
    roi_stats: dict            # id -> RoiStats, or None when no tick qualified
    violation: dict
    h_min: dict
    ticks: int
    emergency_ticks: int
    relaxing_ticks: int
    clamped_ticks: int
    undefined_v_rel_ticks: int
    roi_rule: str

    def to_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "d_min": dict(self.d_min),
            "h_min": dict(self.h_min),
            "delta_max": dict(self.delta_max),
            "violation": dict(self.violation),
            "roi_rule": self.roi_rule,
            "roi_stats": {k: None if s is None else {
                "mean_distance": s.mean_distance, "mean_v_rel": s.mean_v_rel,
                "hull_area": s.hull_area, "ticks": s.ticks} for k, s in self.roi_stats.items()},
            "ticks": self.ticks,
            "emergency_ticks": self.emergency_ticks,
            "relaxing_ticks": self.relaxing_ticks,
            "clamped_ticks": self.clamped_ticks,
            "undefined_v_rel_ticks": self.undefined_v_rel_ticks,
        }


@dataclass
class _ObstacleAcc:
    clearance: float = math.inf
    h_min: float = math.inf
    delta_max: float = 0.0
    violated: bool = False
    roi_n: int = 0
    roi_d: float = 0.0
    roi_v: float = 0.0
    hull_pts: list = field(default_factory=list)
    hull_limit: int = _HULL_BUFFER

    def compact(self):
        # keep only hull vertices once the buffer fills; the limit grows so that
        # point sets lying mostly on their hull are not re-scanned every tick
        if len(self.hull_pts) > self.hull_limit:
            self.hull_pts = [tuple(p) for p in convex_hull(self.hull_pts)]
            self.hull_limit = max(_HULL_BUFFER, 2 * len(self.hull_pts))

    def merge(self, other: "_ObstacleAcc") -> "_ObstacleAcc":
        out = _ObstacleAcc(
            clearance=min(self.clearance, other.clearance),
            h_min=min(self.h_min, other.h_min),
            delta_max=max(self.delta_max, other.delta_max),
            violated=self.violated or other.violated,
            roi_n=self.roi_n + other.roi_n,
            roi_d=self.roi_d + other.roi_d,
            roi_v=self.roi_v + other.roi_v,
            hull_pts=self.hull_pts + other.hull_pts,
        )
        out.compact()
        return out


class MetricsAccumulator:
    def __init__(self, roi_rule: str = "table1_or", roi_distance: float = 0.6, violation_tol: float = 1e-3):
        if roi_rule not in ROI_RULES:
            raise ValueError(f"unknown ROI rule {roi_rule!r}")
        self.roi_rule = roi_rule
        self.roi_distance = roi_distance
        self.violation_tol = violation_tol
        self.sq_err = 0.0
        self.ticks = 0
        self.emergency = 0
        self.relaxing = 0
        self.clamped = 0
        self.undefined = 0
        self.obstacles: dict[str, _ObstacleAcc] = {}

    def add(self, r) -> None:
        e = np.asarray(r.p_ee) - np.asarray(r.p_d)
        self.sq_err += float(e @ e)
        self.ticks += 1
        status = str(r.status)
        self.emergency += status == "Emergency"
        self.relaxing += status == "Relaxing"
        self.clamped += bool(r.clamped)
        for o in r.obstacles:
            acc = self.obstacles.setdefault(o.id, _ObstacleAcc())
            acc.clearance = min(acc.clearance, o.clearance)
            acc.h_min = min(acc.h_min, o.h_min)
            acc.delta_max = max(acc.delta_max, o.delta)
            acc.violated = acc.violated or o.h_min < -self.violation_tol
            if math.isnan(o.v_rel):
                self.undefined += 1
                continue
            if in_roi(o.distance, o.v_rel, self.roi_rule, self.roi_distance):
                acc.roi_n += 1
                acc.roi_d += o.distance
                acc.roi_v += o.v_rel
                acc.hull_pts.append((o.distance, o.v_rel))
                acc.compact()

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        if (self.roi_rule, self.roi_distance, self.violation_tol) != (
                other.roi_rule, other.roi_distance, other.violation_tol):
            raise ValueError("cannot merge accumulators with different settings")
        out = MetricsAccumulator(self.roi_rule, self.roi_distance, self.violation_tol)
        out.sq_err = self.sq_err + other.sq_err
        out.ticks = self.ticks + other.ticks
        out.emergency = self.emergency + other.emergency
        out.relaxing = self.relaxing + other.relaxing
        out.clamped = self.clamped + other.clamped
        out.undefined = self.undefined + other.undefined
        for k in list(self.obstacles) + [k for k in other.obstacles if k not in self.obstacles]:
            a, b = self.obstacles.get(k), other.obstacles.get(k)
            out.obstacles[k] = a.merge(b) if a and b else _ObstacleAcc().merge(a or b)
        return out

    def result(self) -> ScenarioMetrics:
        if self.ticks == 0:
            raise ValueError("empty log")
        roi = {}
        for k, a in self.obstacles.items():
            roi[k] = None if a.roi_n == 0 else RoiStats(
                a.roi_d / a.roi_n, a.roi_v / a.roi_n, hull_area(a.hull_pts), a.roi_n)
        return ScenarioMetrics(
            rmse=math.sqrt(self.sq_err / self.ticks),
            d_min={k: a.clearance for k, a in self.obstacles.items()},
            delta_max={k: a.delta_max for k, a in self.obstacles.items()},
            roi_stats=roi,
            violation={k: a.violated for k, a in self.obstacles.items()},
            h_min={k: a.h_min for k, a in self.obstacles.items()},
            ticks=self.ticks,
            emergency_ticks=self.emergency,
            relaxing_ticks=self.relaxing,
            clamped_ticks=self.clamped,
            undefined_v_rel_ticks=self.undefined,
            roi_rule=self.roi_rule,
        )


def accumulate(records, roi_rule="table1_or", roi_distance=0.6, violation_tol=1e-3) -> MetricsAccumulator:
    acc = MetricsAccumulator(roi_rule, roi_distance, violation_tol)
    for r in records:
        acc.add(r)
    return acc


def aggregate(records, config=None) -> ScenarioMetrics:
    """Fold a step log into ScenarioMetrics; settings come from the scenario config when given."""
    if not records:
        raise ValueError("empty log")
    if config is None:
        return accumulate(records).result()
    return accumulate(records, config.outputs.roi_rule, config.outputs.roi_distance,
                      config.sim.violation_tol).result()
