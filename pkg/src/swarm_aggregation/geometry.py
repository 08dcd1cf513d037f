"""Planar geometry primitives and the four aggregation metrics.

All metrics are evaluated on robot center points.  Point sets are accepted as
anything ``numpy.asarray`` turns into an ``(n, 2)`` float array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

# relative slack for point-in-disc tests during Welzl's algorithm
_IN_DISC_EPS = 1e-12
# robots closer than 2r + TOUCH_FRACTION*r count as touching
TOUCH_FRACTION = 0.1

# axial unit steps in counter-clockwise order starting at angle 0
HEX_DIRECTIONS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"disc radius must be >= 0, got {self.radius}")

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi * self.radius

    def contains(self, point, tol: float = 1e-9) -> bool:
        return math.hypot(point[0] - self.center[0], point[1] - self.center[1]) <= self.radius + tol


@dataclass(frozen=True)
class MetricsSample:
    """One evaluation of the aggregation metrics at ``time``.

    ``time`` is in seconds for the continuous simulator and in rounds for the
    lattice simulator.
    """

    time: float
    sed_circumference: float
    hull_perimeter: float
    dispersion: float
    cluster_fraction: float

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.time, self.sed_circumference, self.hull_perimeter,
                self.dispersion, self.cluster_fraction)


def as_points(points) -> np.ndarray:
    """Validate and convert a point collection to an ``(n, 2)`` float array."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("empty point set")
    pts = pts.reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise ValueError("point coordinates must be finite")
    return pts


# ---------------------------------------------------------------------------
# Smallest enclosing disc
# ---------------------------------------------------------------------------

def _in_disc(p, c) -> bool:
    return math.hypot(p[0] - c[0], p[1] - c[1]) <= c[2] * (1.0 + _IN_DISC_EPS) + 1e-15


def _diameter_disc(a, b):
    cx = (a[0] + b[0]) / 2.0
    cy = (a[1] + b[1]) / 2.0
    return (cx, cy, max(math.hypot(cx - a[0], cy - a[1]), math.hypot(cx - b[0], cy - b[1])))


def _circumdisc(a, b, c):
    # shift to the bounding-box center to limit cancellation
    ox = (min(a[0], b[0], c[0]) + max(a[0], b[0], c[0])) / 2.0
    oy = (min(a[1], b[1], c[1]) + max(a[1], b[1], c[1])) / 2.0
    ax, ay = a[0] - ox, a[1] - oy
    bx, by = b[0] - ox, b[1] - oy
    cx, cy = c[0] - ox, c[1] - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d
    y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d
    r = max(math.hypot(x - a[0], y - a[1]), math.hypot(x - b[0], y - b[1]),
            math.hypot(x - c[0], y - c[1]))
    return (x, y, r)


def _cross(ox, oy, ax, ay, bx, by) -> float:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _disc_two_boundary(points, p, q):
    base = _diameter_disc(p, q)
    left = right = None
    for s in points:
        if _in_disc(s, base):
            continue
        cr = _cross(p[0], p[1], q[0], q[1], s[0], s[1])
        c = _circumdisc(p, q, s)
        if c is None:
            continue
        side = _cross(p[0], p[1], q[0], q[1], c[0], c[1])
        if cr > 0.0 and (left is None or side > _cross(p[0], p[1], q[0], q[1], left[0], left[1])):
            left = c
        elif cr < 0.0 and (right is None or side < _cross(p[0], p[1], q[0], q[1], right[0], right[1])):
            right = c
    if left is None and right is None:
        return base
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _disc_one_boundary(points, p):
    c = (p[0], p[1], 0.0)
    for i, q in enumerate(points):
        if not _in_disc(q, c):
            if c[2] == 0.0:
                c = _diameter_disc(p, q)
            else:
                c = _disc_two_boundary(points[: i + 1], p, q)
    return c


def _small_disc(pts):
    # direct solution for at most three points
    if len(pts) == 1:
        return (pts[0][0], pts[0][1], 0.0)
    if len(pts) == 2:
        return _diameter_disc(pts[0], pts[1])
    best = None
    for i, j, k in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
        c = _diameter_disc(pts[i], pts[j])
        if _in_disc(pts[k], c) and (best is None or c[2] < best[2]):
            best = c
    if best is not None:
        return best
    c = _circumdisc(*pts)
    if c is None:  # collinear: farthest pair
        return max((_diameter_disc(pts[i], pts[j]) for i, j in ((0, 1), (0, 2), (1, 2))),
                   key=lambda d: d[2])
    return c


def smallest_enclosing_disc(points, rng: Optional[np.random.Generator] = None) -> Disc:
    """Smallest disc containing every point (randomized incremental Welzl).

    ``rng`` controls the insertion order; pass a seeded generator for
    reproducible tie-breaking.  With ``rng=None`` a fixed-seed generator is used.
    """
    pts = as_points(points)
    tuples = [(float(x), float(y)) for x, y in pts]
    if len(tuples) <= 3:
        x, y, r = _small_disc(tuples)
        return Disc((x, y), r)
    if rng is None:
        rng = np.random.default_rng(0)
    order = rng.permutation(len(tuples))
    shuffled = [tuples[k] for k in order]
    c = None
    for i, p in enumerate(shuffled):
        if c is None or not _in_disc(p, c):
            c = _disc_one_boundary(shuffled[: i + 1], p)
    return Disc((c[0], c[1]), c[2])


# ---------------------------------------------------------------------------
# Convex hull, dispersion, clusters
# ---------------------------------------------------------------------------

def convex_hull(points) -> np.ndarray:
    """Hull vertices in counter-clockwise order (Andrew's monotone chain).

    Collinear boundary points are dropped; a collinear input yields its two
    extreme points.
    """
    pts = as_points(points)
    uniq = sorted(set(map(tuple, pts.tolist())))
    if len(uniq) <= 2:
        return np.array(uniq, dtype=float)

    def half(seq):
        chain = []
        for p in seq:
            while len(chain) >= 2 and _cross(*chain[-2], *chain[-1], *p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(uniq)
    upper = half(reversed(uniq))
    return np.array(lower[:-1] + upper[:-1], dtype=float)


def convex_hull_perimeter(points) -> float:
    hull = convex_hull(points)
    if len(hull) < 2:
        return 0.0
    closed = np.vstack([hull, hull[:1]])
    return float(np.hypot(*np.diff(closed, axis=0).T).sum())


def dispersion(points) -> float:
    """Sum of Euclidean distances from each point to the centroid."""
    pts = as_points(points)
    centered = pts - pts.mean(axis=0)
    return float(np.hypot(centered[:, 0], centered[:, 1]).sum())


class UnionFind:
    """Disjoint sets with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, i: int, j: int) -> int:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return ri
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]
        return ri

    def largest(self) -> int:
        return max(self.size[i] for i in range(len(self.parent)) if self.parent[i] == i)


def contact_pairs(points, reach: float) -> list[tuple[int, int]]:
    pts = as_points(points)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    ii, jj = np.nonzero(np.triu(dist <= reach, k=1))
    return list(zip(ii.tolist(), jj.tolist()))


def cluster_fraction(points, robot_radius: float, touch_tolerance: Optional[float] = None) -> float:
    """Fraction of robots in the largest cluster of (nearly) touching discs.

    Two robots are connected when their centers are at most
    ``2 * robot_radius + touch_tolerance`` apart.  The tolerance defaults to
    a tenth of the radius.
    """
    if robot_radius <= 0:
        raise ValueError("robot_radius must be positive")
    if touch_tolerance is None:
        touch_tolerance = TOUCH_FRACTION * robot_radius
    if touch_tolerance < 0:
        raise ValueError("touch_tolerance must be non-negative")
    pts = as_points(points)
    uf = UnionFind(len(pts))
    for i, j in contact_pairs(pts, 2.0 * robot_radius + touch_tolerance):
        uf.union(i, j)
    return uf.largest() / len(pts)


# ---------------------------------------------------------------------------
# Hexagonal packing baseline
# ---------------------------------------------------------------------------

def hex_ring(k: int) -> list[tuple[int, int]]:
    """Axial coordinates of the ring at hex distance ``k`` from the origin."""
    if k == 0:
        return [(0, 0)]
    q, r = k * HEX_DIRECTIONS[4][0], k * HEX_DIRECTIONS[4][1]
    ring = []
    for dq, dr in HEX_DIRECTIONS:
        for _ in range(k):
            ring.append((q, r))
            q, r = q + dq, r + dr
    return ring


def axial_to_xy(q, r, spacing: float = 1.0):
    return (spacing * (q + r / 2.0), spacing * (r * math.sqrt(3.0) / 2.0))


@lru_cache(maxsize=None)
def _unit_hex_fill(n: int) -> tuple[tuple[float, float], ...]:
    chosen: list[tuple[float, float]] = []
    k = 0
    while len(chosen) < n:
        free = [axial_to_xy(q, r) for q, r in hex_ring(k)]
        while free and len(chosen) < n:
            def score(idx):
                return round(dispersion(chosen + [free[idx]]), 9), idx
            best = min(range(len(free)), key=score)
            chosen.append(free.pop(best))
        k += 1
    return tuple(chosen)


def hex_packing(n: int, spacing: float = 1.0) -> np.ndarray:
    """Greedy spiral fill of ``n`` hexagonally packed sites."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return spacing * np.array(_unit_hex_fill(n), dtype=float)


def min_dispersion_baseline(n: int, spacing: float) -> float:
    """Dispersion of the hexagonally packed reference arrangement of ``n`` robots.

    ``spacing`` is the center-to-center distance of touching robots.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    return dispersion(hex_packing(n, spacing))


# ---------------------------------------------------------------------------

def compute_metrics(points, robot_radius: float, time: float = 0.0,
                    touch_tolerance: Optional[float] = None,
                    rng: Optional[np.random.Generator] = None) -> MetricsSample:
    pts = as_points(points)
    sed = smallest_enclosing_disc(pts, rng)
    return MetricsSample(
        time=float(time),
        sed_circumference=sed.circumference,
        hull_perimeter=convex_hull_perimeter(pts),
        dispersion=dispersion(pts),
        cluster_fraction=cluster_fraction(pts, robot_radius, touch_tolerance),
    )
