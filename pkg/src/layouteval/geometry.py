"""2D geometry kernels: angle arithmetic, bounding boxes, overlap, wall normals.

All angles are degrees, counterclockwise, 0 deg = +x. All lengths are meters.
Everything here is a pure function and safe to call from multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]


def normalize_angle_deg(angle: float) -> float:
    """Map any angle to [0, 360)."""
    a = math.fmod(angle, 360.0)
    if a < 0.0:
        a += 360.0
    if a >= 360.0:  # fmod can land exactly on 360.0 after the correction
        a -= 360.0
    return a + 0.0  # avoid -0.0


def angle_delta(alpha: float, beta: float) -> float:
    """Smallest angle between two orientations, in [0, 180].

    Computed as min((alpha - beta) mod 360, 360 - (alpha - beta) mod 360);
    symmetric in its arguments.
    """
    d = math.fmod(alpha - beta, 360.0)
    if d < 0.0:
        d += 360.0
    return min(d, 360.0 - d)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box [x_minus, x_plus] x [y_minus, y_plus]."""

    x_minus: float
    y_minus: float
    x_plus: float
    y_plus: float

    def __post_init__(self):
        if self.x_minus > self.x_plus or self.y_minus > self.y_plus:
            raise ValueError(f"inverted AABB: {self}")


@dataclass(frozen=True)
class Obb:
    """Oriented box: center, half extents along local axes, yaw in degrees."""

    cx: float
    cy: float
    half_w: float
    half_h: float
    yaw_deg: float

    def __post_init__(self):
        if self.half_w <= 0.0 or self.half_h <= 0.0:
            raise ValueError(f"non-positive half extents: {self}")


def obb_corners(obb: Obb) -> list[Point]:
    """Four corner vertices, counterclockwise: center + R(yaw) * (+-w/2, +-h/2)."""
    t = math.radians(obb.yaw_deg)
    c, s = math.cos(t), math.sin(t)
    corners = []
    for lx, ly in ((obb.half_w, obb.half_h), (-obb.half_w, obb.half_h),
                   (-obb.half_w, -obb.half_h), (obb.half_w, -obb.half_h)):
        corners.append((obb.cx + c * lx - s * ly, obb.cy + s * lx + c * ly))
    return corners


def aabb_of_corners(corners: list[Point]) -> Aabb:
    """Axis-aligned hull of a vertex set."""
    xs = [p[0] for p in corners]
    ys = [p[1] for p in corners]
    return Aabb(min(xs), min(ys), max(xs), max(ys))


def obb_aabb(obb: Obb) -> Aabb:
    """Axis-aligned hull of the rotated box."""
    return aabb_of_corners(obb_corners(obb))


def aabb_overlap_amount(a: Aabb, b: Aabb) -> float:
    """min(dx, dy) when both axis intersections are strictly positive, else 0.

    Touching boxes (zero-measure intersection) do not overlap.
    """
    dx = min(a.x_plus, b.x_plus) - max(a.x_minus, b.x_minus)
    dy = min(a.y_plus, b.y_plus) - max(a.y_minus, b.y_minus)
    if dx > 0.0 and dy > 0.0:
        return min(dx, dy)
    return 0.0


def _axes_of(obb: Obb) -> list[Point]:
    t = math.radians(obb.yaw_deg)
    c, s = math.cos(t), math.sin(t)
    # The two unique edge normals of the box; unit length by construction.
    return [(c, s), (-s, c)]


def sat_penetration(a: Obb, b: Obb) -> float:
    """Penetration depth under the separating axis theorem, 0 when disjoint.

    Candidate axes are the four edge normals of the two boxes. The returned
    amount is the minimum projected interval overlap across axes; a zero or
    negative overlap on any axis means the boxes are separated (touching
    counts as not overlapping, matching the AABB kernel's strict convention).
    """
    ca = obb_corners(a)
    cb = obb_corners(b)
    best = math.inf
    for ax, ay in _axes_of(a) + _axes_of(b):
        pa = [px * ax + py * ay for px, py in ca]
        pb = [px * ax + py * ay for px, py in cb]
        d = min(max(pa), max(pb)) - max(min(pa), min(pb))
        if d <= 0.0:
            return 0.0
        best = min(best, d)
    return best


def direction_to(frm: Point, to: Point) -> float:
    """Bearing from one point toward another, degrees in [0, 360)."""
    dx = to[0] - frm[0]
    dy = to[1] - frm[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("direction undefined for coincident points")
    return normalize_angle_deg(math.degrees(math.atan2(dy, dx)))


def point_segment_distance(p: Point, a: Point, b: Point) -> float:
    """Distance from a point to the closed segment a-b."""
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(apx, apy)
    t = (apx * abx + apy * aby) / denom
    t = max(0.0, min(1.0, t))
    return math.hypot(apx - t * abx, apy - t * aby)


def polygon_signed_area(polygon: list[Point]) -> float:
    """Shoelace area; positive for counterclockwise order."""
    area = 0.0
    n = len(polygon)
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        area += x0 * y1 - x1 * y0
    return area / 2.0


def polygon_centroid(polygon: list[Point]) -> Point:
    """Arithmetic mean of the polygon vertices."""
    n = len(polygon)
    return (sum(p[0] for p in polygon) / n, sum(p[1] for p in polygon) / n)


def nearest_wall(point: Point, polygon: list[Point]) -> tuple[float, float]:
    """Inward normal direction (degrees) and distance of the nearest wall edge.

    The polygon must be counterclockwise, so the inward normal of an edge is
    its direction rotated by +90 deg. Distance ties are broken by the lowest
    edge index; zero-length edges are skipped.
    """
    best: tuple[float, float] | None = None
    n = len(polygon)
    for i in range(n):
        a = polygon[i]
        b = polygon[(i + 1) % n]
        ex, ey = b[0] - a[0], b[1] - a[1]
        if ex == 0.0 and ey == 0.0:
            continue
        dist = point_segment_distance(point, a, b)
        if best is None or dist < best[1]:
            normal_deg = normalize_angle_deg(math.degrees(math.atan2(ex, -ey)))
            best = (normal_deg, dist)
    if best is None:
        raise ValueError("polygon has no non-degenerate edges")
    return best


def rect_polygon(x_min: float, y_min: float, x_max: float, y_max: float) -> list[Point]:
    """Rectangle as a counterclockwise 4-vertex polygon."""
    return [(x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)]
