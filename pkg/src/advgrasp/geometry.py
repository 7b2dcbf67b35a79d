"""Planar shapes, poses, and contact queries.

Conventions (used everywhere in this package):
  - single unit system: meters, kilograms, newtons, radians
  - polygons are convex, counter-clockwise vertex lists
  - non-convex objects are unions of convex parts with disjoint interiors
  - containment is closed (boundary points count as inside)
  - outward edge normal of a CCW polygon is the right-hand perpendicular
    of the edge direction

Tolerances are fixed: 1e-6 m for on-boundary checks, 1e-9 for unit-vector
normalization, 1e-12 slack on containment half-plane tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidShapeError

MIN_PART_AREA = 1e-9
BOUNDARY_TOL = 1e-6
CONTAIN_EPS = 1e-12


def wrap_angle(theta: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t < 0.0:
        t += 2.0 * math.pi
    return t - math.pi


@dataclass(frozen=True)
class Pose2:
    """Planar rigid pose; theta stored normalized to [-pi, pi)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Transform an (n, 2) point array from body frame to world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return np.asarray(pts, dtype=float) @ rot.T + np.array([self.x, self.y])


@dataclass(frozen=True)
class Contact:
    """Boundary contact: point on the surface plus outward unit normal."""

    point: tuple
    normal: tuple


def _part_signed_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _part_is_convex_ccw(verts: np.ndarray) -> bool:
    n = len(verts)
    e = np.roll(verts, -1, axis=0) - verts
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    return bool(np.all(cross >= -CONTAIN_EPS)) and n >= 3


@dataclass(frozen=True)
class ObjectShape:
    """Union of convex CCW polygons with friction and mass properties."""

    parts: tuple
    mu: float
    mass: float
    name: str = "object"

    def __post_init__(self):
        parts = tuple(np.array(p, dtype=float) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        self.validate()

    def validate(self) -> None:
        if len(self.parts) == 0:
            raise InvalidShapeError(f"{self.name}: no parts")
        if not (self.mu > 0.0):
            raise InvalidShapeError(f"{self.name}: mu must be > 0")
        if not (self.mass > 0.0):
            raise InvalidShapeError(f"{self.name}: mass must be > 0")
        for i, p in enumerate(self.parts):
            if p.ndim != 2 or p.shape[1] != 2 or len(p) < 3:
                raise InvalidShapeError(f"{self.name}: part {i} is not a vertex list")
            if not np.all(np.isfinite(p)):
                raise InvalidShapeError(f"{self.name}: part {i} has non-finite vertices")
            area = _part_signed_area(p)
            if area <= MIN_PART_AREA:
                raise InvalidShapeError(
                    f"{self.name}: part {i} degenerate or not CCW (signed area {area:g})"
                )
            if not _part_is_convex_ccw(p):
                raise InvalidShapeError(f"{self.name}: part {i} is not convex")

    @staticmethod
    def _unchecked(parts: tuple, mu: float, mass: float, name: str) -> "ObjectShape":
        """Internal constructor skipping validation (rigid transforms only)."""
        shape = object.__new__(ObjectShape)
        object.__setattr__(shape, "parts", parts)
        object.__setattr__(shape, "mu", mu)
        object.__setattr__(shape, "mass", mass)
        object.__setattr__(shape, "name", name)
        return shape

    def transformed(self, pose: Pose2) -> "ObjectShape":
        # rigid motion preserves convexity, winding, and areas
        return ObjectShape._unchecked(
            tuple(pose.apply(p) for p in self.parts), self.mu, self.mass, self.name)

    def edge_arrays(self) -> tuple:
        """(v0, edge, outward_normal, part_index) stacked over all edges,
        in (part, edge) order; cached on first use."""
        cached = self.__dict__.get("_edge_cache")
        if cached is not None:
            return cached
        v0s, edges, pidx = [], [], []
        for pi, part in enumerate(self.parts):
            nxt = np.roll(part, -1, axis=0)
            v0s.append(part)
            edges.append(nxt - part)
            pidx.append(np.full(len(part), pi))
        v0 = np.concatenate(v0s)
        e = np.concatenate(edges)
        lens = np.linalg.norm(e, axis=1)
        normals = np.stack([e[:, 1], -e[:, 0]], axis=1) / lens[:, None]
        cache = (v0, e, normals, np.concatenate(pidx))
        object.__setattr__(self, "_edge_cache", cache)
        return cache

    def bounding_box(self) -> tuple:
        allv = np.vstack(self.parts)
        return (
            (float(allv[:, 0].min()), float(allv[:, 1].min())),
            (float(allv[:, 0].max()), float(allv[:, 1].max())),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mu": self.mu,
            "mass": self.mass,
            "parts": [[[float(x), float(y)] for x, y in p] for p in self.parts],
        }

    @staticmethod
    def from_dict(d: dict) -> "ObjectShape":
        return ObjectShape(
            parts=tuple(np.array(p, dtype=float) for p in d["parts"]),
            mu=float(d["mu"]),
            mass=float(d["mass"]),
            name=str(d["name"]),
        )


def load_object(path: str) -> ObjectShape:
    """Load an object JSON file: {name, mu, mass, parts}."""
    with open(path, "r", encoding="utf-8") as f:
        return ObjectShape.from_dict(json.load(f))


def contains_points(shape: ObjectShape, pts: np.ndarray) -> np.ndarray:
    """Vectorized closed containment test for an (n, 2) point array."""
    pts = np.asarray(pts, dtype=float)
    inside = np.zeros(len(pts), dtype=bool)
    for part in shape.parts:
        edges = np.roll(part, -1, axis=0) - part
        # point is inside a CCW convex polygon iff left of (or on) every edge
        rel = pts[:, None, :] - part[None, :, :]
        cross = edges[None, :, 0] * rel[:, :, 1] - edges[None, :, 1] * rel[:, :, 0]
        inside |= np.all(cross >= -CONTAIN_EPS, axis=1)
    return inside


def contains(shape: ObjectShape, p: Sequence[float]) -> bool:
    """Closed containment test for a single point."""
    return bool(contains_points(shape, np.asarray(p, dtype=float)[None, :])[0])


def segment_contact(
    shape: ObjectShape,
    origin: Sequence[float],
    direction: Sequence[float],
    max_t: float,
) -> Optional[Contact]:
    """Nearest boundary hit of the segment origin + t*direction, t in (0, max_t].

    Ties are broken by smallest t, then lowest part index, then lowest edge
    index. Returns None when the segment never crosses the boundary.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    if abs(float(np.linalg.norm(d)) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if not max_t > 0.0:
        raise ValueError("max_t must be positive")

    v0, e, normals, _ = shape.edge_arrays()
    denom = d[0] * e[:, 1] - d[1] * e[:, 0]
    parallel = np.abs(denom) < 1e-15  # endpoint hits caught by adjacent edges
    denom = np.where(parallel, 1.0, denom)
    rel = v0 - o
    t = (rel[:, 0] * e[:, 1] - rel[:, 1] * e[:, 0]) / denom
    s = (rel[:, 0] * d[1] - rel[:, 1] * d[0]) / denom
    valid = (~parallel & (t > 0.0) & (t <= max_t)
             & (s >= -1e-12) & (s <= 1.0 + 1e-12))
    if not valid.any():
        return None
    t = np.where(valid, t, np.inf)
    idx = int(np.argmin(t))  # first occurrence: lowest (part, edge) on ties
    point = o + t[idx] * d
    normal = normals[idx]
    return Contact(point=(float(point[0]), float(point[1])),
                   normal=(float(normal[0]), float(normal[1])))


def centroid(shape: ObjectShape) -> tuple:
    """Area-weighted centroid of the part union (disjoint interiors assumed)."""
    total_a = 0.0
    acc = np.zeros(2)
    for part in shape.parts:
        x, y = part[:, 0], part[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = 0.5 * float(np.sum(cross))
        cx = float(np.sum((x + xn) * cross)) / (6.0 * a)
        cy = float(np.sum((y + yn) * cross)) / (6.0 * a)
        acc += a * np.array([cx, cy])
        total_a += a
    c = acc / total_a
    return (float(c[0]), float(c[1]))


def area(shape: ObjectShape) -> float:
    """Total area of the part union."""
    return float(sum(_part_signed_area(p) for p in shape.parts))
