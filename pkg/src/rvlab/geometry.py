"""Planar convex polygon functionals used by the set moduli and the set pipeline.

Vertices are expected in counter-clockwise hull order as produced by
:class:`rvlab.core.Polytope`.
"""

import math

import numpy as np

DEFAULT_DIRECTIONS = 720


def direction_grid(n=DEFAULT_DIRECTIONS):
    theta = 2.0 * np.pi * np.arange(n) / n
    return theta, np.stack([np.cos(theta), np.sin(theta)], axis=1)


def support_function(vertices, directions):
    """h_K(u) = max over vertices of <u, v> for each row u of ``directions``."""
    return np.max(np.asarray(directions) @ np.asarray(vertices).T, axis=1)


def steiner_point(vertices, n=DEFAULT_DIRECTIONS):
    """Steiner point by the periodic trapezoid rule over ``n`` directions.

    s(K) = (1/pi) * integral over the circle of h_K(u) u du.
    """
    _, u = direction_grid(n)
    h = support_function(vertices, u)
    return (2.0 * np.pi / n) * (h @ u) / np.pi


def exterior_angles(vertices):
    """Exterior angle at each hull vertex; they sum to 2 pi."""
    v = np.asarray(vertices, dtype=float)
    if len(v) == 1:
        return np.array([2.0 * np.pi])
    if len(v) == 2:
        return np.array([np.pi, np.pi])
    e_in = v - np.roll(v, 1, axis=0)
    e_out = np.roll(v, -1, axis=0) - v
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = np.sum(e_in * e_out, axis=1)
    return np.arctan2(cross, dot)


def steiner_point_exact(vertices):
    """Closed form for polygons: vertices weighted by exterior angle / (2 pi)."""
    w = exterior_angles(vertices) / (2.0 * np.pi)
    return w @ np.asarray(vertices, dtype=float)


def mean_width(vertices, n=DEFAULT_DIRECTIONS):
    """(1 / (2 pi)) * integral of h_K over the circle, trapezoid rule."""
    _, u = direction_grid(n)
    return float(np.mean(support_function(vertices, u)))


def perimeter(vertices):
    v = np.asarray(vertices)
    if len(v) < 2:
        return 0.0
    if len(v) == 2:
        return 2.0 * float(np.linalg.norm(v[1] - v[0]))
    return float(np.sum(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)))


def area(vertices):
    v = np.asarray(vertices)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def exact_mean_width(vertices):
    """Closed form of :func:`mean_width` for a polygon: perimeter / (2 pi)."""
    return perimeter(vertices) / (2.0 * math.pi)


def _segment_distance(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    s = min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + s * ab)))


def contains(vertices, p, tol=1e-9):
    """Point-in-convex-polygon test with absolute tolerance ``tol``."""
    v = np.asarray(vertices)
    p = np.asarray(p, dtype=float)
    if len(v) == 1:
        return bool(np.linalg.norm(p - v[0]) <= tol)
    if len(v) == 2:
        return _segment_distance(p, v[0], v[1]) <= tol
    e = np.roll(v, -1, axis=0) - v
    w = p - v
    cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
    scale = np.linalg.norm(e, axis=1)
    return bool(np.all(cross >= -tol * scale))


def distance_to_origin(vertices):
    """inf over K of |x|; zero when the origin lies in K."""
    v = np.asarray(vertices)
    origin = np.zeros(v.shape[1])
    if v.shape[1] == 2 and len(v) >= 3 and contains(v, origin, tol=0.0):
        return 0.0
    if len(v) == 1:
        return float(np.linalg.norm(v[0]))
    if v.shape[1] != 2:
        raise NotImplementedError("distance to origin implemented for planar sets")
    edges = [(v[i], v[(i + 1) % len(v)]) for i in range(len(v) if len(v) > 2 else 1)]
    return min(_segment_distance(origin, a, b) for a, b in edges)


def inscribed_radius(vertices):
    """Largest r with the centred disc B_r(0) inside K; 0 if the origin is not interior."""
    v = np.asarray(vertices)
    if len(v) < 3:
        return 0.0
    e = np.roll(v, -1, axis=0) - v
    # signed distance from origin to each edge line, positive inside (ccw order)
    cross = e[:, 0] * (-v[:, 1]) - e[:, 1] * (-v[:, 0])
    d = cross / np.linalg.norm(e, axis=1)
    return max(0.0, float(d.min()))


def sup_norm(vertices):
    return float(np.max(np.linalg.norm(np.asarray(vertices), axis=1)))


def regular_polygon(n, radius=1.0, center=(0.0, 0.0)):
    theta = 2.0 * np.pi * np.arange(n) / n
    return np.stack(
        [center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta)], axis=1
    )
