"""Lane geometry and planar helpers for the intersection world model.

Positions are 2D east/north coordinates in meters in a local frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from shapely.geometry import Point, Polygon


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class LaneGeometry:
    """A lane described by its centerline polyline and a corridor width.

    The corridor is the band of lateral offsets the lane claims: an object
    whose unsigned lateral offset exceeds ``width`` is outside the lane.
    """

    lane_id: str
    centerline: tuple[tuple[float, float], ...]
    width: float

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.centerline)
        object.__setattr__(self, "centerline", pts)
        if len(pts) < 2:
            raise GeometryError(f"lane {self.lane_id!r}: centerline needs >= 2 points")
        for p, q in zip(pts, pts[1:]):
            if p == q:
                raise GeometryError(
                    f"lane {self.lane_id!r}: consecutive centerline points coincide"
                )
        if self.width <= 0.0:
            raise GeometryError(f"lane {self.lane_id!r}: width must be positive")

    @cached_property
    def _segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        pts = np.asarray(self.centerline, dtype=float)
        starts = pts[:-1]
        deltas = pts[1:] - starts
        lengths = np.hypot(deltas[:, 0], deltas[:, 1])
        cum = np.concatenate(([0.0], np.cumsum(lengths)))
        return starts, deltas, lengths, cum

    @property
    def length(self) -> float:
        return float(self._segments[3][-1])

    def point_at(self, s: float) -> tuple[float, float]:
        """Centerline point at arc length s (clamped to the lane extent)."""
        starts, deltas, lengths, cum = self._segments
        s = min(max(s, 0.0), float(cum[-1]))
        idx = int(np.searchsorted(cum[1:-1], s, side="right"))
        t = (s - cum[idx]) / lengths[idx]
        p = starts[idx] + t * deltas[idx]
        return float(p[0]), float(p[1])

    def heading_at(self, s: float) -> tuple[float, float]:
        """Unit travel-direction vector at arc length s."""
        starts, deltas, lengths, cum = self._segments
        s = min(max(s, 0.0), float(cum[-1]))
        idx = int(np.searchsorted(cum[1:-1], s, side="right"))
        d = deltas[idx] / lengths[idx]
        return float(d[0]), float(d[1])


def arc_length_project(
    lane: LaneGeometry, point: Sequence[float]
) -> tuple[float, float]:
    """Project a point onto a lane centerline.

    Returns ``(s, d)``: arc length of the nearest centerline point and the
    signed lateral offset, positive to the left of the travel direction.
    """
    starts, deltas, lengths, cum = lane._segments
    p = np.asarray(point, dtype=float)
    rel = p - starts
    t = np.clip(
        (rel[:, 0] * deltas[:, 0] + rel[:, 1] * deltas[:, 1]) / lengths**2, 0.0, 1.0
    )
    feet = starts + t[:, None] * deltas
    residuals = p - feet
    dist2 = residuals[:, 0] ** 2 + residuals[:, 1] ** 2
    idx = int(np.argmin(dist2))
    s = float(cum[idx] + t[idx] * lengths[idx])
    # Sign: cross product of segment direction with the residual vector.
    cross = deltas[idx, 0] * residuals[idx, 1] - deltas[idx, 1] * residuals[idx, 0]
    d = math.copysign(math.sqrt(float(dist2[idx])), cross) if dist2[idx] > 0 else 0.0
    return s, d


@dataclass(frozen=True)
class IntersectionMap:
    """Lane set plus the RSU's field of view and optional blind spot."""

    lanes: tuple[LaneGeometry, ...]
    rsu_fov: tuple[tuple[float, float], ...]
    blind_spot: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "lanes", tuple(self.lanes))
        object.__setattr__(
            self, "rsu_fov", tuple((float(x), float(y)) for x, y in self.rsu_fov)
        )
        if self.blind_spot is not None:
            object.__setattr__(
                self,
                "blind_spot",
                tuple((float(x), float(y)) for x, y in self.blind_spot),
            )
        if not self.lanes:
            raise GeometryError("map needs at least one lane")
        ids = [lane.lane_id for lane in self.lanes]
        if len(set(ids)) != len(ids):
            raise GeometryError("lane ids must be unique")
        if not self._fov_polygon.is_simple or not self._fov_polygon.is_valid:
            raise GeometryError("rsu_fov polygon must be simple")
        if self.blind_spot is not None:
            blind = self._blind_polygon
            if not blind.is_simple or not blind.is_valid:
                raise GeometryError("blind_spot polygon must be simple")
            if not self._fov_polygon.contains(blind):
                raise GeometryError("blind_spot must lie inside rsu_fov")

    @cached_property
    def _fov_polygon(self) -> Polygon:
        return Polygon(self.rsu_fov)

    @cached_property
    def _blind_polygon(self) -> Optional[Polygon]:
        return Polygon(self.blind_spot) if self.blind_spot is not None else None

    def lane(self, lane_id: str) -> LaneGeometry:
        for lane in self.lanes:
            if lane.lane_id == lane_id:
                return lane
        raise GeometryError(f"unknown lane {lane_id!r}")

    def in_rsu_fov(self, point: Sequence[float]) -> bool:
        return self._fov_polygon.covers(Point(point[0], point[1]))

    def in_blind_spot(self, point: Sequence[float]) -> bool:
        if self._blind_polygon is None:
            return False
        return self._blind_polygon.covers(Point(point[0], point[1]))

    def rsu_observes(self, point: Sequence[float]) -> bool:
        return self.in_rsu_fov(point) and not self.in_blind_spot(point)

    def nearest_lane(self, point: Sequence[float]) -> tuple[LaneGeometry, float, float]:
        """Lane with the smallest unsigned lateral offset to the point."""
        best = None
        for lane in self.lanes:
            s, d = arc_length_project(lane, point)
            if best is None or abs(d) < abs(best[2]):
                best = (lane, s, d)
        return best


def cone_contains(
    apex: Sequence[float],
    heading: Sequence[float],
    point: Sequence[float],
    max_range: float,
    half_angle_rad: float,
) -> bool:
    """Membership test for a forward-facing sensor cone."""
    dx = point[0] - apex[0]
    dy = point[1] - apex[1]
    dist = math.hypot(dx, dy)
    if dist > max_range:
        return False
    if dist == 0.0:
        return True
    hn = math.hypot(heading[0], heading[1])
    if hn == 0.0:
        return False
    cos_angle = (dx * heading[0] + dy * heading[1]) / (dist * hn)
    return cos_angle >= math.cos(half_angle_rad)
