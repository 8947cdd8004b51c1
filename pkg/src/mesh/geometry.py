"""Element geometry: measures, sub-simplex splits, face classification and quadrature."""

import enum
import itertools
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.errors import MeshValidationError
from src.mesh.spatial_mesh import Element, Face
from src.quadrature.rules import (
    QuadratureRule, gauss_legendre, map_simplex_rule, simplex_rule, tensor_rule
)

GEOMETRY_TOLERANCE = 1e-12


class FaceClass(enum.Enum):
    INFLOW = "inflow"
    OUTFLOW = "outflow"


@dataclass(frozen=True)
class ElementMetrics:
    """
    Size measures of a polytopic element.

    Attributes:
        measure: Area (d=2) or volume (d=3)
        diameter: Largest vertex-to-vertex distance
        h_perp: Smallest over faces of the largest apex-to-face-plane distance
        centroid: Centre of mass
        convex: Whether the element is convex
    """
    measure: float
    diameter: float
    h_perp: float
    centroid: np.ndarray
    convex: bool


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def polygon_signed_area(points: np.ndarray) -> float:
    rolled = np.roll(points, -1, axis=0)
    return 0.5 * float(np.sum(_cross2(points, rolled)))


def polygon_centroid(points: np.ndarray) -> np.ndarray:
    rolled = np.roll(points, -1, axis=0)
    cross = _cross2(points, rolled)
    area = 0.5 * float(np.sum(cross))
    return np.sum((points + rolled) * cross[:, None], axis=0) / (6.0 * area)


def is_convex_polygon(points: np.ndarray) -> bool:
    edges = np.roll(points, -1, axis=0) - points
    turns = _cross2(edges, np.roll(edges, -1, axis=0))
    scale = float(np.max(np.abs(edges))) ** 2
    return bool(np.all(turns >= -GEOMETRY_TOLERANCE * scale))


def _orientation(a: np.ndarray, b: np.ndarray, c: np.ndarray, tol: float) -> int:
    value = float(_cross2(b - a, c - a))
    if value > tol:
        return 1
    if value < -tol:
        return -1
    return 0


def _on_segment(a: np.ndarray, b: np.ndarray, p: np.ndarray, tol: float) -> bool:
    return (min(a[0], b[0]) - tol <= p[0] <= max(a[0], b[0]) + tol and
            min(a[1], b[1]) - tol <= p[1] <= max(a[1], b[1]) + tol)


def segments_intersect(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> bool:
    """True when closed segments ab and cd share at least one point."""
    scale = max(float(np.max(np.abs(np.array([a, b, c, d])))), 1.0)
    tol = GEOMETRY_TOLERANCE * scale * scale
    o1, o2 = _orientation(a, b, c, tol), _orientation(a, b, d, tol)
    o3, o4 = _orientation(c, d, a, tol), _orientation(c, d, b, tol)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and _on_segment(a, b, c, tol)) or (o2 == 0 and _on_segment(a, b, d, tol)) or
            (o3 == 0 and _on_segment(c, d, a, tol)) or (o4 == 0 and _on_segment(c, d, b, tol)))


def is_self_intersecting(points: np.ndarray) -> bool:
    """Check a closed polygon loop for crossings between non-adjacent edges."""
    n = points.shape[0]
    if n < 4:
        return False
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if segments_intersect(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n]):
                return True
    return False


def _point_in_triangle(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> bool:
    d1 = _cross2(b - a, p - a)
    d2 = _cross2(c - b, p - b)
    d3 = _cross2(a - c, p - c)
    return bool(d1 >= 0.0 and d2 >= 0.0 and d3 >= 0.0)


def ear_clip(points: np.ndarray) -> List[np.ndarray]:
    """Triangulate a simple counter-clockwise polygon by ear clipping."""
    remaining = list(range(points.shape[0]))
    triangles: List[np.ndarray] = []
    guard = 0
    while len(remaining) > 3:
        n = len(remaining)
        clipped = False
        for k in range(n):
            i_prev, i, i_next = remaining[k - 1], remaining[k], remaining[(k + 1) % n]
            a, b, c = points[i_prev], points[i], points[i_next]
            if _cross2(b - a, c - b) <= 0.0:
                continue
            others = [points[m] for m in remaining if m not in (i_prev, i, i_next)]
            if any(_point_in_triangle(p, a, b, c) for p in others):
                continue
            triangles.append(np.array([a, b, c]))
            remaining.pop(k)
            clipped = True
            break
        guard += 1
        if not clipped or guard > points.shape[0]:
            raise MeshValidationError("Ear clipping failed; polygon is not simple")
    triangles.append(points[remaining])
    return triangles


def _oriented_face_normal(element: Element, local: int) -> Tuple[np.ndarray, np.ndarray]:
    pts = element.face_coordinates(local)
    centre = element.coordinates.mean(axis=0)
    if element.dimension == 2:
        edge = pts[1] - pts[0]
        normal = np.array([edge[1], -edge[0]]) / np.hypot(edge[0], edge[1])
        return normal, pts[0]
    rolled = np.roll(pts, -1, axis=0)
    normal = np.sum(np.cross(pts, rolled), axis=0)
    normal = normal / np.linalg.norm(normal)
    if np.dot(normal, pts.mean(axis=0) - centre) < 0.0:
        normal = -normal
    return normal, pts[0]


def _visible_from_edge(points: np.ndarray, edge: int, v: int) -> bool:
    n = points.shape[0]
    a, b = points[edge], points[(edge + 1) % n]
    apex = points[v]
    if _cross2(b - a, apex - a) <= 0.0:
        return False
    for i in range(n):
        p, q = points[i], points[(i + 1) % n]
        for end, end_index in ((a, edge), (b, (edge + 1) % n)):
            if i in (v, (v - 1) % n, end_index, (end_index - 1) % n):
                continue
            if segments_intersect(apex, end, p, q):
                return False
    return True


def subtriangulate(element: Element) -> List[np.ndarray]:
    """
    Split an element into simplices.

    Convex polygons are fanned from the centroid, non-convex ones are ear
    clipped, and polyhedra are fanned face-by-face from their vertex mean.

    Returns:
        List of (d+1, d) vertex arrays

    Raises:
        MeshValidationError: For self-intersecting polygons
    """
    points = element.coordinates
    if element.dimension == 2:
        if is_self_intersecting(points):
            raise MeshValidationError(f"Element {element.index} has a self-intersecting boundary")
        if is_convex_polygon(points):
            centre = polygon_centroid(points)
            rolled = np.roll(points, -1, axis=0)
            return [np.array([centre, a, b]) for a, b in zip(points, rolled)]
        return ear_clip(points)

    apex = points.mean(axis=0)
    tets = []
    for local in range(len(element.face_loops)):
        face = element.face_coordinates(local)
        centre = face.mean(axis=0)
        for a, b in zip(face, np.roll(face, -1, axis=0)):
            tets.append(np.array([apex, centre, a, b]))
    return tets


def _simplex_volume(simplex: np.ndarray) -> float:
    jac = simplex[1:] - simplex[0]
    return abs(float(np.linalg.det(jac))) / (2.0 if simplex.shape[1] == 2 else 6.0)


def element_metrics(element: Element) -> ElementMetrics:
    """
    Measure, diameter, h_perp and centroid of an element.

    Raises:
        MeshValidationError: For clockwise, degenerate or zero-measure elements
    """
    points = element.coordinates
    if points.shape[0] < element.dimension + 1:
        raise MeshValidationError(
            f"Element {element.index} is degenerate: {points.shape[0]} vertices in {element.dimension}D")
    diffs = points[:, None, :] - points[None, :, :]
    diameter = float(np.sqrt(np.max(np.sum(diffs ** 2, axis=-1))))

    if element.dimension == 2:
        area = polygon_signed_area(points)
        if area <= GEOMETRY_TOLERANCE * diameter * diameter:
            raise MeshValidationError(
                f"Element {element.index} is clockwise or degenerate (signed area {area:.3e})")
        convex = is_convex_polygon(points)
        centroid = polygon_centroid(points)
        n = points.shape[0]
        h_perp = np.inf
        for edge in range(n):
            normal, anchor = _oriented_face_normal(element, edge)
            apexes = range(n) if convex else [v for v in range(n) if _visible_from_edge(points, edge, v)]
            heights = [abs(float(np.dot(points[v] - anchor, normal))) for v in apexes]
            if heights:
                h_perp = min(h_perp, max(heights))
        return ElementMetrics(area, diameter, float(h_perp), centroid, convex)

    tets = subtriangulate(element)
    volumes = np.array([_simplex_volume(t) for t in tets])
    volume = float(volumes.sum())
    if volume <= GEOMETRY_TOLERANCE * diameter ** 3:
        raise MeshValidationError(f"Element {element.index} is degenerate (volume {volume:.3e})")
    centroid = np.sum([v * t.mean(axis=0) for v, t in zip(volumes, tets)], axis=0) / volume
    h_perp = np.inf
    convex = True
    for local in range(len(element.face_loops)):
        normal, anchor = _oriented_face_normal(element, local)
        signed = (points - anchor) @ normal
        if np.any(signed > GEOMETRY_TOLERANCE * diameter):
            convex = False
        h_perp = min(h_perp, float(np.max(np.abs(signed))))
    return ElementMetrics(volume, diameter, float(h_perp), centroid, convex)


def classify_face(face: Face, element: int, mu: np.ndarray) -> FaceClass:
    """Inflow when mu.n < 0 on the outward normal of element; tangential faces count as outflow."""
    flux = float(np.dot(mu, face.normal_from(element)))
    return FaceClass.INFLOW if flux < 0.0 else FaceClass.OUTFLOW


def is_axis_aligned_box(points: np.ndarray) -> bool:
    """True when the vertices are exactly the 2^d corners of their bounding box."""
    d = points.shape[1]
    if points.shape[0] != 2 ** d:
        return False
    lo, hi = points.min(axis=0), points.max(axis=0)
    if np.any(hi - lo <= 0.0):
        return False
    corners = {tuple(np.where(np.isclose(p, lo, rtol=0.0, atol=1e-14 * (hi - lo)), 0,
                              np.where(np.isclose(p, hi, rtol=0.0, atol=1e-14 * (hi - lo)), 1, -1)))
               for p in points}
    return corners == set(itertools.product((0, 1), repeat=d))


def _box_rule(lo: np.ndarray, hi: np.ndarray, order: int) -> QuadratureRule:
    base = tensor_rule(gauss_legendre(order // 2 + 1), lo.shape[0])
    half = 0.5 * (hi - lo)
    points = 0.5 * (lo + hi) + base.points * half
    return QuadratureRule(points, base.weights * float(np.prod(half)), order)


def _combine(rules: List[QuadratureRule], order: int) -> QuadratureRule:
    return QuadratureRule(np.vstack([r.points for r in rules]),
                          np.concatenate([r.weights for r in rules]), order)


def volume_rule(element: Element, order: int) -> QuadratureRule:
    """
    Rule exact to the given total degree on an element.

    Axis-aligned boxes get a tensor Gauss rule; everything else a collapsed
    simplex rule on each sub-simplex.
    """
    points = element.coordinates
    if is_axis_aligned_box(points):
        return _box_rule(points.min(axis=0), points.max(axis=0), order)
    reference = simplex_rule(max(order, 1), element.dimension)
    return _combine([map_simplex_rule(reference, s) for s in subtriangulate(element)], order)


def face_rule(face_points: np.ndarray, order: int) -> QuadratureRule:
    """Rule exact to the given degree on a segment (d=2) or planar polygon (d=3)."""
    face_points = np.asarray(face_points, dtype=float)
    if face_points.shape[1] == 2:
        base = gauss_legendre(order // 2 + 1)
        a, b = face_points[0], face_points[1]
        t = 0.5 * (1.0 + base.nodes)
        length = float(np.linalg.norm(b - a))
        return QuadratureRule(a + t[:, None] * (b - a), 0.5 * length * base.weights, order)

    lo, hi = face_points.min(axis=0), face_points.max(axis=0)
    flat = np.flatnonzero(hi - lo <= 1e-14 * max(float(np.max(hi - lo)), 1.0))
    if flat.size == 1 and is_axis_aligned_box(np.delete(face_points, flat[0], axis=1)):
        axes = [a for a in range(3) if a != flat[0]]
        plane = _box_rule(lo[axes], hi[axes], order)
        points = np.empty((len(plane), 3))
        points[:, axes] = plane.points
        points[:, flat[0]] = lo[flat[0]]
        return QuadratureRule(points, plane.weights, order)

    reference = simplex_rule(max(order, 1), 2)
    centre = face_points.mean(axis=0)
    rules = [map_simplex_rule(reference, np.array([centre, a, b]))
             for a, b in zip(face_points, np.roll(face_points, -1, axis=0))]
    return _combine(rules, order)
