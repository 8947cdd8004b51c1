"""Polytopic spatial meshes: JSON ingestion, connectivity and validation."""

import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import MeshValidationError

logger = logging.getLogger(__name__)

BOUNDARY = -1


@dataclass(frozen=True, eq=False)
class Element:
    """
    A single polytopic element.

    Attributes:
        index: Position of the element in the mesh
        vertex_ids: Global vertex indices (counter-clockwise loop for d=2)
        coordinates: Vertex coordinates in metres, shape (n_vertices, d)
        face_loops: Each face as a loop of local indices into vertex_ids
    """
    index: int
    vertex_ids: Tuple[int, ...]
    coordinates: np.ndarray
    face_loops: Tuple[Tuple[int, ...], ...]

    @property
    def dimension(self) -> int:
        return self.coordinates.shape[1]

    def face_coordinates(self, local_face: int) -> np.ndarray:
        return self.coordinates[list(self.face_loops[local_face])]

    @classmethod
    def polygon(cls, coordinates: Sequence[Sequence[float]], index: int = 0,
                vertex_ids: Optional[Sequence[int]] = None) -> 'Element':
        """Build a 2D element from a counter-clockwise vertex loop."""
        coords = np.asarray(coordinates, dtype=float)
        n = coords.shape[0]
        ids = tuple(vertex_ids) if vertex_ids is not None else tuple(range(n))
        loops = tuple((i, (i + 1) % n) for i in range(n))
        return cls(index, ids, coords, loops)


@dataclass(frozen=True, eq=False)
class Face:
    """
    A (d-1)-dimensional facet shared by one or two elements.

    Attributes:
        index: Position of the face in the mesh
        vertex_ids: Global vertex loop of the face
        owner: Element the normal points out of
        neighbour: Adjacent element, or BOUNDARY
        normal: Unit normal, outward from the owner
        measure: Length (d=2) or area (d=3)
        centroid: Face centroid
    """
    index: int
    vertex_ids: Tuple[int, ...]
    owner: int
    neighbour: int
    normal: np.ndarray
    measure: float
    centroid: np.ndarray

    @property
    def is_boundary(self) -> bool:
        return self.neighbour == BOUNDARY

    def normal_from(self, element: int) -> np.ndarray:
        """Unit normal pointing out of the given incident element."""
        if element == self.owner:
            return self.normal
        if element == self.neighbour:
            return -self.normal
        raise ValueError(f"Element {element} is not incident to face {self.index}")


def _newell_normal(points: np.ndarray) -> np.ndarray:
    rolled = np.roll(points, -1, axis=0)
    return 0.5 * np.sum(np.cross(points, rolled), axis=0)


def _face_geometry(points: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
    """Return (unoriented unit normal, measure, centroid) of a planar face."""
    if points.shape[1] == 2:
        edge = points[1] - points[0]
        length = float(np.hypot(edge[0], edge[1]))
        if length == 0.0:
            return np.zeros(2), 0.0, points.mean(axis=0)
        return np.array([edge[1], -edge[0]]) / length, length, points.mean(axis=0)
    area_vector = _newell_normal(points)
    area = float(np.linalg.norm(area_vector))
    if area == 0.0:
        return np.zeros(3), 0.0, points.mean(axis=0)
    centre = points.mean(axis=0)
    # area-weighted centroid of the fan about the vertex mean
    total = np.zeros(3)
    for a, b in zip(points, np.roll(points, -1, axis=0)):
        tri_area = 0.5 * float(np.linalg.norm(np.cross(a - centre, b - centre)))
        total += tri_area * (a + b + centre) / 3.0
    return area_vector / area, area, total / area


class SpatialMesh:
    """
    Immutable polytopic mesh with derived face connectivity.

    Construction validates the mesh; every interior face has exactly two
    incident elements with opposite normals and each element's faces tile
    its boundary.
    """

    def __init__(self, vertices: Sequence[Sequence[float]], elements: Sequence[Any],
                 degrees: Union[int, Sequence[int]] = 0) -> None:
        self.vertices: np.ndarray = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] not in (2, 3):
            raise MeshValidationError("Vertices must be an array of coordinate pairs or triples")
        self.dimension: int = self.vertices.shape[1]
        self.elements: List[Element] = [self._make_element(k, e) for k, e in enumerate(elements)]
        if not self.elements:
            raise MeshValidationError("Mesh contains no elements")
        if np.isscalar(degrees):
            self.degrees: np.ndarray = np.full(len(self.elements), int(degrees), dtype=int)
        else:
            self.degrees = np.asarray(degrees, dtype=int).reshape(-1)
        if self.degrees.shape[0] != len(self.elements):
            raise MeshValidationError(
                f"Got {self.degrees.shape[0]} element degrees for {len(self.elements)} elements")
        if np.any(self.degrees < 0):
            raise MeshValidationError("Element polynomial degrees must be non-negative")

        self.faces: List[Face] = []
        self.element_faces: List[List[int]] = [[] for _ in self.elements]
        self._build_connectivity()
        self._validate()
        logger.debug("Built %dD mesh: %d elements, %d faces (%d interior)", self.dimension,
                     len(self.elements), len(self.faces), self.n_interior_faces)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_interior_faces(self) -> int:
        return sum(1 for f in self.faces if not f.is_boundary)

    def with_degree(self, degrees: Union[int, Sequence[int]]) -> 'SpatialMesh':
        """Copy of this mesh with new element polynomial degrees."""
        raw = [self._raw_element(e) for e in self.elements]
        return SpatialMesh(self.vertices, raw, degrees)

    def _raw_element(self, element: Element) -> Any:
        if self.dimension == 2:
            return list(element.vertex_ids)
        return [[element.vertex_ids[i] for i in loop] for loop in element.face_loops]

    def _make_element(self, index: int, raw: Any) -> Element:
        if self.dimension == 2:
            ids = [int(v) for v in raw]
            if len(set(ids)) != len(ids):
                repeated = sorted({v for v in ids if ids.count(v) > 1})
                raise MeshValidationError(f"Element {index} repeats vertex {repeated}")
            self._check_ids(index, ids)
            return Element.polygon(self.vertices[ids], index, ids)

        loops_raw = [[int(v) for v in loop] for loop in raw]
        ids: List[int] = []
        for loop in loops_raw:
            if len(set(loop)) != len(loop) or len(loop) < 3:
                raise MeshValidationError(f"Element {index} has a degenerate face loop {loop}")
            self._check_ids(index, loop)
            for v in loop:
                if v not in ids:
                    ids.append(v)
        local = {v: i for i, v in enumerate(ids)}
        loops = tuple(tuple(local[v] for v in loop) for loop in loops_raw)
        return Element(index, tuple(ids), self.vertices[ids], loops)

    def _check_ids(self, index: int, ids: Sequence[int]) -> None:
        bad = [v for v in ids if v < 0 or v >= self.vertices.shape[0]]
        if bad:
            raise MeshValidationError(f"Element {index} references unknown vertices {bad}")

    def _build_connectivity(self) -> None:
        incidences: Dict[Tuple[int, ...], List[Tuple[int, int]]] = {}
        for element in self.elements:
            for local, loop in enumerate(element.face_loops):
                key = tuple(sorted(element.vertex_ids[i] for i in loop))
                incidences.setdefault(key, []).append((element.index, local))

        for key, incident in incidences.items():
            if len(incident) > 2:
                owners = [e for e, _ in incident]
                raise MeshValidationError(f"Face with vertices {list(key)} is shared by elements {owners}")
            owner, local = incident[0]
            element = self.elements[owner]
            loop = tuple(element.vertex_ids[i] for i in element.face_loops[local])
            points = element.face_coordinates(local)
            normal, measure, centroid = _face_geometry(points)
            if measure <= 0.0:
                raise MeshValidationError(f"Element {owner} has a zero-measure face {list(loop)}")
            if self.dimension == 3 and np.dot(normal, centroid - element.coordinates.mean(axis=0)) < 0.0:
                normal = -normal
            neighbour = BOUNDARY
            if len(incident) == 2:
                neighbour = incident[1][0]
                if neighbour == owner:
                    raise MeshValidationError(f"Element {owner} lists face {list(loop)} twice")
                self._check_opposite(owner, neighbour, normal, incident[1][1], loop)
            face = Face(len(self.faces), loop, owner, neighbour, normal, measure, centroid)
            self.faces.append(face)
            self.element_faces[owner].append(face.index)
            if neighbour != BOUNDARY:
                self.element_faces[neighbour].append(face.index)

    def _check_opposite(self, owner: int, neighbour: int, normal: np.ndarray, local: int,
                        owner_loop: Tuple[int, ...]) -> None:
        other = self.elements[neighbour]
        other_loop = tuple(other.vertex_ids[i] for i in other.face_loops[local])
        if self.dimension == 2:
            if other_loop == owner_loop:
                raise MeshValidationError(
                    f"Elements {owner} and {neighbour} traverse shared edge {list(owner_loop)} in the "
                    f"same direction (overlapping or clockwise elements)")
            return
        other_normal, _, centroid = _face_geometry(other.face_coordinates(local))
        if np.dot(other_normal, centroid - other.coordinates.mean(axis=0)) < 0.0:
            other_normal = -other_normal
        if np.dot(other_normal, normal) > -1.0 + 1e-10:
            raise MeshValidationError(
                f"Elements {owner} and {neighbour} do not have opposite normals on a shared face")

    def _validate(self) -> None:
        from src.mesh.geometry import element_metrics, is_self_intersecting

        seen: Dict[Tuple[int, ...], int] = {}
        total = 0.0
        for element in self.elements:
            key = tuple(sorted(element.vertex_ids))
            if key in seen:
                raise MeshValidationError(f"Elements {seen[key]} and {element.index} are duplicates")
            seen[key] = element.index
            if self.dimension == 2 and is_self_intersecting(element.coordinates):
                raise MeshValidationError(f"Element {element.index} has a self-intersecting boundary")
            total += element_metrics(element).measure

        self._check_boundary_closed()
        if self.dimension == 2:
            self._check_hanging_vertices()
        domain = self.domain_measure()
        if abs(total - domain) > 1e-10 * max(abs(domain), 1e-300):
            raise MeshValidationError(
                f"Element measures sum to {total:.15g} but the boundary encloses {domain:.15g}")

    def _check_boundary_closed(self) -> None:
        if self.dimension == 2:
            balance: Dict[int, int] = {}
            for face in self.faces:
                if face.is_boundary:
                    a, b = face.vertex_ids
                    balance[a] = balance.get(a, 0) + 1
                    balance[b] = balance.get(b, 0) - 1
            open_vertices = sorted(v for v, count in balance.items() if count != 0)
        else:
            edge_count: Dict[Tuple[int, int], int] = {}
            for face in self.faces:
                if face.is_boundary:
                    loop = face.vertex_ids
                    for a, b in zip(loop, loop[1:] + loop[:1]):
                        key = (min(a, b), max(a, b))
                        edge_count[key] = edge_count.get(key, 0) + 1
            open_vertices = sorted({v for e, c in edge_count.items() if c % 2 for v in e})
        if open_vertices:
            raise MeshValidationError(f"Mesh boundary is open at vertices {open_vertices}")

    def _check_hanging_vertices(self) -> None:
        used = sorted({v for e in self.elements for v in e.vertex_ids})
        coords = self.vertices[used]
        for face in self.faces:
            if not face.is_boundary:
                continue
            a, b = self.vertices[list(face.vertex_ids)]
            edge = b - a
            length2 = float(edge @ edge)
            rel = coords - a
            t = rel @ edge / length2
            dist = np.abs(rel[:, 0] * edge[1] - rel[:, 1] * edge[0]) / np.sqrt(length2)
            inside = (t > 1e-12) & (t < 1.0 - 1e-12) & (dist < 1e-12 * np.sqrt(length2))
            if np.any(inside):
                hanging = [used[i] for i in np.flatnonzero(inside)]
                raise MeshValidationError(
                    f"Non-matching shared edge: vertices {hanging} lie inside boundary edge "
                    f"{list(face.vertex_ids)} of element {face.owner}")

    def domain_measure(self) -> float:
        """Measure enclosed by the boundary faces (divergence theorem)."""
        total = 0.0
        for face in self.faces:
            if face.is_boundary:
                total += float(np.dot(face.centroid, face.normal)) * face.measure
        return total / self.dimension

    def element_neighbours(self, k: int) -> List[int]:
        result = []
        for f in self.element_faces[k]:
            face = self.faces[f]
            if not face.is_boundary:
                result.append(face.neighbour if face.owner == k else face.owner)
        return result


def _raw_mesh(data: Dict[str, Any]) -> Tuple[np.ndarray, List[Any], Union[int, List[int]]]:
    try:
        vertices = np.asarray(data["vertices"], dtype=float)
        elements = list(data["elements"])
    except (KeyError, TypeError, ValueError) as e:
        raise MeshValidationError(f"Mesh document must contain 'vertices' and 'elements': {e}")
    return vertices, elements, data.get("degrees", 0)


def load_mesh(path: str, degree: Optional[int] = None) -> SpatialMesh:
    """
    Read and validate a JSON mesh document.

    Args:
        path: File with "vertices" and "elements" (and optional "degrees")
        degree: Uniform polynomial degree overriding the file's degrees

    Returns:
        Validated SpatialMesh

    Raises:
        FileNotFoundError: If the file does not exist
        MeshValidationError: If the document cannot be parsed or is invalid
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Mesh file not found: {path}")
    with open(path, 'r') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise MeshValidationError(f"Mesh file {path} could not be parsed: {e}")
    vertices, elements, degrees = _raw_mesh(data)
    mesh = SpatialMesh(vertices, elements, degrees if degree is None else degree)
    logger.info("Loaded mesh %s with %d elements", path, mesh.n_elements)
    return mesh


def save_mesh(mesh: SpatialMesh, path: str) -> None:
    """Write a mesh in the JSON format read by load_mesh."""
    document = {
        "vertices": mesh.vertices.tolist(),
        "elements": [mesh._raw_element(e) for e in mesh.elements],
        "degrees": mesh.degrees.tolist(),
    }
    with open(path, 'w') as f:
        json.dump(document, f)


def structured_quad_mesh(nx: int, ny: int, bbox: Sequence[float] = (0.0, 1.0, 0.0, 1.0),
                         degree: int = 0) -> SpatialMesh:
    """Uniform nx x ny grid of counter-clockwise quadrilaterals on (x0, x1, y0, y1)."""
    if nx < 1 or ny < 1:
        raise ValueError(f"Grid needs at least one cell per direction, got {nx}x{ny}")
    x0, x1, y0, y1 = (float(v) for v in bbox)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    vertices = [(x, y) for y in ys for x in xs]

    def vid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    elements = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
                for j in range(ny) for i in range(nx)]
    return SpatialMesh(vertices, elements, degree)


def structured_hex_mesh(nx: int, ny: int, nz: int,
                        bbox: Sequence[float] = (0.0, 1.0, 0.0, 1.0, 0.0, 1.0),
                        degree: int = 0) -> SpatialMesh:
    """Uniform grid of axis-aligned hexahedra, each given as six face loops."""
    if min(nx, ny, nz) < 1:
        raise ValueError(f"Grid needs at least one cell per direction, got {nx}x{ny}x{nz}")
    x0, x1, y0, y1, z0, z1 = (float(v) for v in bbox)
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    zs = np.linspace(z0, z1, nz + 1)
    vertices = [(x, y, z) for z in zs for y in ys for x in xs]

    def vid(i: int, j: int, k: int) -> int:
        return (k * (ny + 1) + j) * (nx + 1) + i

    elements = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                c = {(a, b, d): vid(i + a, j + b, k + d) for a in (0, 1) for b in (0, 1) for d in (0, 1)}
                elements.append([
                    [c[0, 0, 0], c[0, 0, 1], c[0, 1, 1], c[0, 1, 0]],
                    [c[1, 0, 0], c[1, 1, 0], c[1, 1, 1], c[1, 0, 1]],
                    [c[0, 0, 0], c[1, 0, 0], c[1, 0, 1], c[0, 0, 1]],
                    [c[0, 1, 0], c[0, 1, 1], c[1, 1, 1], c[1, 1, 0]],
                    [c[0, 0, 0], c[0, 1, 0], c[1, 1, 0], c[1, 0, 0]],
                    [c[0, 0, 1], c[1, 0, 1], c[1, 1, 1], c[0, 1, 1]],
                ])
    return SpatialMesh(vertices, elements, degree)
