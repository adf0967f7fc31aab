"""Point and box geometry kernels.

Boxes are oriented about the vertical (z) axis: the box-frame x extent is
the width ``w``, y is the length ``l``, z is the height ``h``. Corner
order is fixed as the lexicographic sign sequence over
(-w/2|+w/2, -l/2|+l/2, -h/2|+h/2) with minus first, so corner 0 is
(-w/2, -l/2, -h/2) and corner 7 is (+w/2, +l/2, +h/2) in the box frame.

All functions are pure; point sets are plain (N, 3) float arrays.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

_CORNER_SIGNS = np.array(list(itertools.product((-1.0, 1.0), repeat=3)))


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = theta - TWO_PI * np.floor((theta + np.pi) / TWO_PI)
    if wrapped <= -np.pi:
        wrapped += TWO_PI
    return float(wrapped)


def rotz(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: center (m), size (w, l, h) (m), heading (rad)."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    heading: float

    def __post_init__(self):
        if any(s <= 0 for s in self.size):
            raise ValueError(f"Box3D: size components must be positive, got {self.size}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "size", tuple(float(s) for s in self.size))
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @property
    def volume(self) -> float:
        w, l, h = self.size
        return w * l * h

    def corners(self) -> np.ndarray:
        """8 world-frame corners in the fixed lexicographic sign order."""
        half = 0.5 * np.asarray(self.size)
        local = _CORNER_SIGNS * half
        return local @ rotz(self.heading).T + np.asarray(self.center)

    def bev_corners(self) -> np.ndarray:
        """4 footprint corners (x, y), counterclockwise."""
        w, l, _ = self.size
        local = 0.5 * np.array([[-w, -l], [w, -l], [w, l], [-w, l]])
        c, s = np.cos(self.heading), np.sin(self.heading)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.asarray(self.center[:2])

    def translated(self, offset) -> "Box3D":
        return Box3D(tuple(np.asarray(self.center) + np.asarray(offset)), self.size, self.heading)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation about the vertical axis followed by a translation."""

    rotation: float
    translation: tuple[float, float, float]

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = pts @ rotz(self.rotation).T + np.asarray(self.translation)
        return out if np.ndim(points) > 1 else out[0]

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        t = self.apply(np.asarray(other.translation))
        return RigidTransform(wrap_angle(self.rotation + other.rotation), tuple(t))

    def inverse(self) -> "RigidTransform":
        r = -self.rotation
        t = -(rotz(r) @ np.asarray(self.translation))
        return RigidTransform(wrap_angle(r), tuple(t))

    def apply_box(self, box: Box3D) -> Box3D:
        return Box3D(
            tuple(self.apply(np.asarray(box.center))),
            box.size,
            wrap_angle(box.heading + self.rotation),
        )


def world_to_box_transform(ref: Box3D) -> RigidTransform:
    """Transform into the frame where ``ref`` sits at the origin, heading zero."""
    r = -ref.heading
    t = -(rotz(r) @ np.asarray(ref.center))
    return RigidTransform(r, tuple(t))


def canonicalize(points: np.ndarray, ref: Box3D) -> np.ndarray:
    return world_to_box_transform(ref).apply(points)


def decanonicalize(points: np.ndarray, ref: Box3D) -> np.ndarray:
    return world_to_box_transform(ref).inverse().apply(points)


def point_in_box(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Inclusive membership test; returns a bool per point."""
    local = canonicalize(np.atleast_2d(points), box)
    half = 0.5 * np.asarray(box.size)
    inside = np.all(np.abs(local) <= half + 1e-12, axis=1)
    return inside if np.ndim(points) > 1 else bool(inside[0])


def box_aware_distances(points: np.ndarray, box: Box3D) -> np.ndarray:
    """(N, 9) distances: column 0 to the center, columns 1-8 to the corners."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    anchors = np.vstack([np.asarray(box.center)[None, :], box.corners()])
    return np.linalg.norm(pts[:, None, :] - anchors[None, :, :], axis=2)


# -- rotated IoU / GIoU ---------------------------------------------------


def polygon_area(poly: np.ndarray) -> float:
    """Shoelace area of a simple polygon given as (K, 2) vertices."""
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` by convex ``clip`` (both CCW)."""
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        a = clip[i]
        b = clip[(i + 1) % n]
        edge = (b[0] - a[0], b[1] - a[1])
        inputs, output = output, []

        def inside(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= 0.0

        prev = inputs[-1]
        prev_in = inside(prev)
        for cur in inputs:
            cur_in = inside(cur)
            if cur_in != prev_in:
                # segment crosses the clip edge: add the intersection
                dx, dy = cur[0] - prev[0], cur[1] - prev[1]
                denom = edge[0] * dy - edge[1] * dx
                t = (edge[1] * (prev[0] - a[0]) - edge[0] * (prev[1] - a[1])) / denom
                output.append((prev[0] + t * dx, prev[1] + t * dy))
            if cur_in:
                output.append(cur)
            prev, prev_in = cur, cur_in
    return np.array(output) if output else np.zeros((0, 2))


def _overlap_1d(lo_a, hi_a, lo_b, hi_b) -> float:
    return max(0.0, min(hi_a, hi_b) - max(lo_a, lo_b))


def _intersection_volume(a: Box3D, b: Box3D) -> float:
    inter_bev = polygon_area(clip_polygon(a.bev_corners(), b.bev_corners()))
    inter_z = _overlap_1d(
        a.center[2] - a.size[2] / 2,
        a.center[2] + a.size[2] / 2,
        b.center[2] - b.size[2] / 2,
        b.center[2] + b.size[2] / 2,
    )
    return inter_bev * inter_z


def iou_giou_3d(a: Box3D, b: Box3D) -> tuple[float, float]:
    """Rotated-box (IoU, GIoU).

    IoU is the clipped-footprint area times the vertical overlap, over the
    union volume. GIoU subtracts the normalized slack of the smallest
    axis-aligned box enclosing both corner sets (not the rotated hull), so
    values live in (-1, 1].
    """
    inter = _intersection_volume(a, b)
    union = a.volume + b.volume - inter
    iou = inter / union if union > 0 else 0.0
    corners = np.vstack([a.corners(), b.corners()])
    extent = corners.max(axis=0) - corners.min(axis=0)
    enclosing = float(np.prod(extent))
    if enclosing <= 0:
        return iou, iou
    return iou, iou - (enclosing - union) / enclosing


def iou_3d(a: Box3D, b: Box3D) -> float:
    return iou_giou_3d(a, b)[0]


def giou_3d(a: Box3D, b: Box3D) -> float:
    return iou_giou_3d(a, b)[1]


def monte_carlo_iou(
    a: Box3D, b: Box3D, samples: int = 1_000_000, rng: np.random.Generator | None = None
) -> float:
    """IoU estimated by uniform sampling over the joint bounding region.

    Independent oracle for :func:`iou_3d`: it never touches the polygon
    clipping path, only per-point membership tests.
    """
    rng = rng or np.random.default_rng(0)
    corners = np.vstack([a.corners(), b.corners()])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    pts = rng.uniform(lo, hi, size=(samples, 3))
    in_a = point_in_box(pts, a)
    in_b = point_in_box(pts, b)
    n_union = np.count_nonzero(in_a | in_b)
    if n_union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / n_union


# -- sampling and neighborhoods -------------------------------------------


def farthest_point_sample(points: np.ndarray, k: int, start: int = 0) -> np.ndarray:
    """Greedy max-min selection of ``k`` indices; ties take the lowest index."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if k > n:
        raise ValueError(f"farthest_point_sample: k={k} exceeds point count {n}")
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = start
    dist = np.linalg.norm(pts - pts[start], axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(dist))
        chosen[i] = nxt
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return chosen


def ball_query(
    points: np.ndarray, centers: np.ndarray, radius: float, cap: int
) -> list[np.ndarray]:
    """Per-center point indices with distance strictly below ``radius``.

    Results are sorted by ascending distance and truncated to ``cap``. A
    center with no in-radius point gets its single nearest point instead,
    so neighborhoods are never empty.
    """
    if radius <= 0:
        raise ValueError(f"ball_query: radius must be positive, got {radius}")
    if cap < 1:
        raise ValueError(f"ball_query: cap must be >= 1, got {cap}")
    pts = np.asarray(points, dtype=np.float64)
    ctr = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    d = np.linalg.norm(ctr[:, None, :] - pts[None, :, :], axis=2)
    out = []
    for row in d:
        order = np.argsort(row, kind="stable")
        within = order[row[order] < radius][:cap]
        if len(within) == 0:
            within = order[:1]
        out.append(within)
    return out
