"""
Rational cellular complexes on the cube [0,1]^d, point location, common
refinement, unimodularity, combinatorial isomorphisms and the fans Δ/Σ
relating the two coordinate systems of the positive cone.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import combinations, permutations, product
from math import factorial, prod
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

from src.config.settings import settings
from src.core.exceptions import (
    DimensionError,
    InvalidComplex,
    InvalidIsomorphism,
    OutOfCone,
    OutOfDomain,
    Unsupported,
)
from src.core.ratmath import (
    IntMatrix,
    Point,
    format_point,
    format_rational,
    int_det,
    primitive_homogeneous,
    unimodular_inverse,
)
from src.models.schemas import ComplexDiagnostics, Violation
from src.services.polytope import (
    Halfspace,
    affine_dimension,
    bounding_box,
    boxes_overlap,
    clip,
    contains,
    convex_hull,
    face_vertex_sets,
    halfspaces,
    intersect,
    volume,
)

logger = logging.getLogger(__name__)


class CoordinateChange(str, Enum):
    X_TO_Y = "x_to_y"
    Y_TO_X = "y_to_x"


@dataclass(frozen=True)
class Cell:
    dim: int
    vertex_ids: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class CellularComplex:
    """
    A finite rational polyhedral complex given by its top cells.

    Top cells are vertex-id tuples into ``vertices``; lower-dimensional cells
    and the face relation are derived lazily (``finalize`` forces it). Cell
    ids 0..k-1 are the top cells in input order, lower cells follow by
    decreasing dimension.
    """

    ambient_dim: int
    vertices: Tuple[Point, ...]
    top_cells: Tuple[Tuple[int, ...], ...]
    covers_cube: bool = True

    @classmethod
    def from_polytopes(
        cls, ambient_dim: int, polytopes: Sequence[Sequence[Point]], covers_cube: bool = True
    ) -> "CellularComplex":
        index: Dict[Point, int] = {}
        cells = []
        for polytope in polytopes:
            ids = []
            for point in polytope:
                if point not in index:
                    index[point] = len(index)
                ids.append(index[point])
            cells.append(tuple(ids))
        return cls(ambient_dim, tuple(index), tuple(cells), covers_cube)

    def __len__(self) -> int:
        return len(self.top_cells)

    def cell_points(self, cell_id: int) -> Tuple[Point, ...]:
        return tuple(self.vertices[v] for v in self.top_cells[cell_id])

    @cached_property
    def polytopes(self) -> Tuple[Tuple[Point, ...], ...]:
        """Canonical extreme-point tuple of every top cell."""
        return tuple(convex_hull(self.cell_points(i), self.ambient_dim) for i in range(len(self)))

    @cached_property
    def halfspace_table(self) -> Tuple[Tuple[Halfspace, ...], ...]:
        return tuple(
            halfspaces(poly, self.ambient_dim) if affine_dimension(poly) == self.ambient_dim else ()
            for poly in self.polytopes
        )

    @cached_property
    def boxes(self):
        return tuple(bounding_box(poly) for poly in self.polytopes)

    @cached_property
    def vertex_cells(self) -> Dict[int, Tuple[int, ...]]:
        """Top cells incident to each vertex id."""
        incident: Dict[int, List[int]] = {}
        for cell_id, ids in enumerate(self.top_cells):
            for v in ids:
                incident.setdefault(v, []).append(cell_id)
        return {v: tuple(cells) for v, cells in incident.items()}

    @cached_property
    def face_keys(self) -> Tuple[FrozenSet[FrozenSet[int]], ...]:
        """Vertex-id sets of all faces of every top cell."""
        keys = []
        for cell_id, poly in enumerate(self.polytopes):
            if affine_dimension(poly) != self.ambient_dim:
                keys.append(frozenset([frozenset(self.top_cells[cell_id])]))
                continue
            by_point = {self.vertices[v]: v for v in self.top_cells[cell_id]}
            ids = [by_point[p] for p in poly]
            keys.append(frozenset(
                frozenset(ids[i] for i in face) for face in face_vertex_sets(poly, self.ambient_dim)
            ))
        return tuple(keys)

    @cached_property
    def _lattice(self) -> Tuple[Tuple[Cell, ...], FrozenSet[Tuple[int, int]]]:
        d = self.ambient_dim
        cells = [Cell(d, ids) for ids in self.top_cells]
        keys = [frozenset(ids) for ids in self.top_cells]
        lower: Dict[FrozenSet[int], int] = {}
        for cell_id, faces in enumerate(self.face_keys):
            for key in faces:
                if key != keys[cell_id] and key not in lower:
                    lower[key] = affine_dimension([self.vertices[v] for v in key])
        for key in sorted(lower, key=lambda k: (-lower[k], sorted(k))):
            cells.append(Cell(lower[key], tuple(sorted(key))))
            keys.append(key)
        incidence = frozenset(
            (a, b) for a, ka in enumerate(keys) for b, kb in enumerate(keys) if ka < kb
        )
        logger.debug(f"Face lattice built: {len(cells)} cells, {len(incidence)} incidences")
        return tuple(cells), incidence

    @property
    def cells(self) -> Tuple[Cell, ...]:
        return self._lattice[0]

    @property
    def incidence(self) -> FrozenSet[Tuple[int, int]]:
        """Pairs (face id, cell id) with the face a proper face of the cell."""
        return self._lattice[1]

    def finalize(self) -> "CellularComplex":
        self._lattice
        return self

    def cell_set(self) -> FrozenSet[FrozenSet[Point]]:
        """Top cells as point sets, for order-independent comparison."""
        return frozenset(frozenset(poly) for poly in self.polytopes)

    def total_volume(self) -> Fraction:
        return sum(
            (volume(poly, self.ambient_dim) for poly in self.polytopes
             if affine_dimension(poly) == self.ambient_dim),
            Fraction(0),
        )


def cube_complex(dim: int) -> CellularComplex:
    """The cube [0,1]^dim as a single top cell."""
    corners = [tuple(Fraction(c) for c in corner) for corner in product((0, 1), repeat=dim)]
    return CellularComplex.from_polytopes(dim, [convex_hull(corners, dim)])


def interval_complex(points: Sequence[Fraction]) -> CellularComplex:
    """1-D complex with the given breakpoints, which must be strictly increasing."""
    points = [Fraction(p) for p in points]
    if len(points) < 2 or any(a >= b for a, b in zip(points, points[1:])):
        raise InvalidComplex("Breakpoints must be strictly increasing and at least two")
    vertices = tuple((p,) for p in points)
    cells = tuple((i, i + 1) for i in range(len(points) - 1))
    return CellularComplex(1, vertices, cells, covers_cube=points[0] == 0 and points[-1] == 1)


def rational_grid(dim: int, per_axis: int) -> List[Point]:
    """Exact grid of per_axis**dim points including the cube corners."""
    steps = [Fraction(k, per_axis - 1) for k in range(per_axis)]
    return [tuple(p) for p in product(steps, repeat=dim)]


def locate(complex: CellularComplex, point: Sequence[Fraction]) -> int:
    """
    Id of a top cell containing the point; the lowest id wins on shared faces.

    Raises:
        OutOfDomain: point outside the cube or not covered by the complex
    """
    point = tuple(Fraction(x) for x in point)
    if len(point) != complex.ambient_dim:
        raise DimensionError(f"Point {format_point(point)} is not in dimension {complex.ambient_dim}")
    if any(x < 0 or x > 1 for x in point):
        raise OutOfDomain(f"Point {format_point(point)} lies outside the cube")
    for cell_id, hs in enumerate(complex.halfspace_table):
        low, high = complex.boxes[cell_id]
        if all(lo <= x <= hi for lo, x, hi in zip(low, point, high)) and hs and contains(hs, point):
            return cell_id
    raise OutOfDomain(f"Point {format_point(point)} is not covered by the complex")


def containing_cells(complex: CellularComplex, point: Sequence[Fraction]) -> List[int]:
    point = tuple(Fraction(x) for x in point)
    return [i for i, hs in enumerate(complex.halfspace_table) if hs and contains(hs, point)]


class UnimodularityCheck(NamedTuple):
    unimodular: bool
    witness: Optional[str]


def vertex_matrix(points: Sequence[Point]) -> IntMatrix:
    """Columns are the primitive homogeneous coordinates of the points."""
    return IntMatrix.from_columns([primitive_homogeneous(p).coords for p in points])


def is_unimodular(complex: CellularComplex) -> UnimodularityCheck:
    """Every top cell must be a simplex whose vertex matrix has determinant ±1."""
    d = complex.ambient_dim
    for cell_id in range(len(complex)):
        points = complex.cell_points(cell_id)
        if len(points) != d + 1 or affine_dimension(points) != d:
            return UnimodularityCheck(False, f"cell {cell_id}: non-simplex cell")
        det = int_det(vertex_matrix(points))
        if abs(det) != 1:
            return UnimodularityCheck(False, f"cell {cell_id}: determinant {det}")
    return UnimodularityCheck(True, None)


def validate_complex(complex: CellularComplex) -> ComplexDiagnostics:
    """
    Check the rational-cellular-complex conditions and cube coverage.

    Never raises; every problem found is listed as a violation.
    """
    d = complex.ambient_dim
    violations: List[Violation] = []

    for vertex_id, vertex in enumerate(complex.vertices):
        if len(vertex) != d:
            violations.append(Violation(kind="dimension", message=f"vertex {vertex_id} has {len(vertex)} coordinates"))
        elif not all(isinstance(x, (Fraction, int)) for x in vertex):
            violations.append(Violation(kind="irrational", message=f"vertex {vertex_id} is not rational"))
        elif any(x < 0 or x > 1 for x in vertex):
            violations.append(Violation(kind="outside_cube", message=f"vertex {vertex_id} ({format_point(vertex)}) lies outside the cube"))
    if violations:
        return ComplexDiagnostics(
            valid=False, violations=violations, total_volume="0",
            top_cell_count=len(complex), vertex_count=len(complex.vertices),
        )

    full = []
    for cell_id, ids in enumerate(complex.top_cells):
        points = complex.cell_points(cell_id)
        if affine_dimension(points) != d:
            violations.append(Violation(kind="degenerate_cell", message=f"cell {cell_id} is not {d}-dimensional", cells=[cell_id]))
            continue
        if len(set(points)) != len(ids):
            violations.append(Violation(kind="duplicate_vertex", message=f"cell {cell_id} repeats a point", cells=[cell_id]))
        elif len(complex.polytopes[cell_id]) != len(ids):
            violations.append(Violation(kind="redundant_vertex", message=f"cell {cell_id} lists a non-extreme vertex", cells=[cell_id]))
        full.append(cell_id)

    used = {v for ids in complex.top_cells for v in ids}
    for vertex_id in range(len(complex.vertices)):
        if vertex_id not in used:
            violations.append(Violation(kind="dangling_vertex", message=f"vertex {vertex_id} is not a face of any top cell"))

    for i, j in combinations(full, 2):
        if not boxes_overlap(complex.boxes[i], complex.boxes[j]):
            continue
        common = intersect(complex.polytopes[i], complex.polytopes[j], d)
        if not common:
            continue
        if affine_dimension(common) == d:
            violations.append(Violation(kind="overlap", message=f"cells {i} and {j} have intersecting interiors", cells=[i, j]))
            continue
        shared = frozenset(complex.top_cells[i]) & frozenset(complex.top_cells[j])
        proper = (
            set(common) == {complex.vertices[v] for v in shared}
            and shared in complex.face_keys[i]
            and shared in complex.face_keys[j]
        )
        if not proper:
            violations.append(Violation(
                kind="improper_intersection",
                message=f"cells {i} and {j} do not meet in a common face",
                cells=[i, j],
            ))

    total = sum((volume(complex.polytopes[i], d) for i in full), Fraction(0))
    if complex.covers_cube and total != 1:
        violations.append(Violation(kind="coverage", message=f"top cells have total volume {format_rational(total)}, expected 1"))

    if violations:
        logger.info(f"Complex rejected with {len(violations)} violation(s): {violations[0].kind}")
    return ComplexDiagnostics(
        valid=not violations,
        violations=violations,
        total_volume=format_rational(total),
        top_cell_count=len(complex),
        vertex_count=len(complex.vertices),
    )


@dataclass(frozen=True)
class Overlay:
    complex: CellularComplex
    parents: Tuple[Tuple[int, ...], ...]  # per new top cell, one parent id per input complex


def _clip_to(poly: Sequence[Point], hs: Sequence[Halfspace], dim: int) -> Tuple[Point, ...]:
    result = tuple(poly)
    for normal, offset in hs:
        result = clip(result, dim, normal, offset)
        if not result:
            break
    return result


def overlay(complexes: Sequence[CellularComplex]) -> Overlay:
    """
    Common refinement of several complexes with parent bookkeeping.

    Each new top cell is a full-dimensional intersection of one top cell from
    every input complex.
    """
    d = complexes[0].ambient_dim
    if any(c.ambient_dim != d for c in complexes):
        raise DimensionError("Cannot overlay complexes of different dimensions")
    pieces = [(poly, (i,)) for i, poly in enumerate(complexes[0].polytopes)]
    for other in complexes[1:]:
        refined = []
        for poly, parent in pieces:
            box = bounding_box(poly)
            for j, hs in enumerate(other.halfspace_table):
                if not hs or not boxes_overlap(box, other.boxes[j]):
                    continue
                common = _clip_to(poly, hs, d)
                if common and affine_dimension(common) == d:
                    refined.append((common, parent + (j,)))
        pieces = refined
    result = CellularComplex.from_polytopes(d, [poly for poly, _ in pieces])
    return Overlay(result, tuple(parent for _, parent in pieces))


def common_refinement(first: CellularComplex, second: CellularComplex) -> CellularComplex:
    return overlay([first, second]).complex


def xy_transform(u: Sequence[Fraction], direction: CoordinateChange) -> Tuple[Fraction, ...]:
    """
    Change between the two coordinate systems of the positive cone.

    Y→X keeps the first n-1 entries and replaces the last by
    ``last - max(first n-1)``; X→Y adds the maximum back.

    Raises:
        OutOfCone: an input or output coordinate is negative
    """
    u = tuple(Fraction(x) for x in u)
    if len(u) < 2:
        raise DimensionError("Cone points need at least two coordinates")
    if any(x < 0 for x in u):
        raise OutOfCone(f"Point ({format_point(u)}) has a negative coordinate")
    top = max(u[:-1])
    if CoordinateChange(direction) == CoordinateChange.X_TO_Y:
        return u[:-1] + (u[-1] + top,)
    last = u[-1] - top
    if last < 0:
        raise OutOfCone(f"Point ({format_point(u)}) is not in the cone: last coordinate below the maximum")
    return u[:-1] + (last,)


@dataclass(frozen=True)
class Fan:
    """Simplicial cones given by integer generator matrices (generators are columns)."""

    n: int
    cones: Tuple[IntMatrix, ...]

    @property
    def is_unimodular(self) -> bool:
        return all(abs(int_det(cone)) == 1 for cone in self.cones)

    def cross_section_volume(self) -> Fraction:
        """Total volume of the cones' slices at last coordinate 1."""
        total = Fraction(0)
        for cone in self.cones:
            lasts = cone.row(self.n - 1)
            if any(x <= 0 for x in lasts):
                raise Unsupported("Cone has a generator at infinity; cross-section is unbounded")
            total += Fraction(abs(int_det(cone)), factorial(self.n - 1) * prod(lasts))
        return total

    def interiors_disjoint(self) -> bool:
        """Certify disjoint interiors with separating hyperplanes Y_i = Y_j."""
        pairs = list(combinations(range(self.n), 2))
        above, below = [], []
        for cone in self.cones:
            columns = [cone.column(j) for j in range(self.n)]
            ge = le = 0
            for bit, (i, j) in enumerate(pairs):
                if all(c[i] >= c[j] for c in columns):
                    ge |= 1 << bit
                if all(c[i] <= c[j] for c in columns):
                    le |= 1 << bit
            above.append(ge)
            below.append(le)
        for a, b in combinations(range(len(self.cones)), 2):
            if not ((above[a] & below[b]) | (below[a] & above[b])):
                return False
        return True


@dataclass(frozen=True)
class DeltaSigma:
    n: int
    permutations: Tuple[Tuple[int, ...], ...]
    delta: Fan
    sigma: Fan
    phi: Tuple[IntMatrix, ...]

    @cached_property
    def _delta_inverses(self) -> Tuple[IntMatrix, ...]:
        return tuple(unimodular_inverse(cone) for cone in self.delta.cones)

    def locate_cone(self, u: Sequence[Fraction]) -> int:
        u = tuple(Fraction(x) for x in u)
        for index, inverse in enumerate(self._delta_inverses):
            if all(c >= 0 for c in inverse.apply(u)):
                return index
        raise OutOfCone(f"({format_point(u)}) lies in no cone of Δ")

    def phi_map(self, u: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        """Apply the piecewise-linear map sending each cone of Δ onto its cone of Σ."""
        u = tuple(Fraction(x) for x in u)
        return self.phi[self.locate_cone(u)].apply(u)


def _template(n: int, last_row: Sequence[int]) -> List[List[int]]:
    rows = [[0] * (i + 1) + [1] * (n - 1 - i) for i in range(n - 1)]
    return rows + [list(last_row)]


def build_delta_sigma(n: int) -> DeltaSigma:
    """
    Build the unimodular fans Δ and Σ and the per-cone linear maps between them.

    Every permutation ρ of the first n-1 rows of the two templates gives one
    cone of each fan; the map on that cone is M_ρ · N_ρ⁻¹.

    Raises:
        Unsupported: n < 2 or n above ``settings.max_fan_dimension``
    """
    if n < 2 or n > settings.max_fan_dimension:
        raise Unsupported(f"Fan construction supports 2 <= n <= {settings.max_fan_dimension}, got {n}")

    n_template = _template(n, [1] * n)
    m_template = _template(n, [1] + [0] * (n - 1))
    perms = tuple(permutations(range(n - 1)))
    delta_cones, sigma_cones, maps = [], [], []
    for rho in perms:
        n_rows, m_rows = [None] * (n - 1), [None] * (n - 1)
        for i in range(n - 1):
            n_rows[rho[i]] = n_template[i]
            m_rows[rho[i]] = m_template[i]
        n_matrix = IntMatrix.from_rows(n_rows + [n_template[-1]])
        m_matrix = IntMatrix.from_rows(m_rows + [m_template[-1]])
        delta_cones.append(n_matrix)
        sigma_cones.append(m_matrix)
        maps.append(m_matrix @ unimodular_inverse(n_matrix))

    delta = Fan(n, tuple(delta_cones))
    sigma = Fan(n, tuple(sigma_cones))
    for name, fan in (("Δ", delta), ("Σ", sigma)):
        if not fan.is_unimodular or not fan.interiors_disjoint():
            raise InvalidComplex(f"Fan {name} failed its unimodularity or disjointness check")
    logger.info(f"Built fans for n={n}: {len(perms)} cones each")
    return DeltaSigma(n, perms, delta, sigma, tuple(maps))


@dataclass(frozen=True, eq=False)
class CombinatorialIso:
    """Vertex bijection between two unimodular complexes preserving top simplexes."""

    source: CellularComplex
    target: CellularComplex
    vertex_map: Tuple[int, ...]

    def validate(self) -> "CombinatorialIso":
        if self.source.ambient_dim != self.target.ambient_dim:
            raise InvalidIsomorphism("Source and target live in different dimensions")
        if len(self.vertex_map) != len(self.source.vertices):
            raise InvalidIsomorphism("vertex_map must cover every source vertex")
        if sorted(self.vertex_map) != list(range(len(self.target.vertices))):
            raise InvalidIsomorphism("vertex_map is not a bijection onto the target vertices")
        for name, complex in (("source", self.source), ("target", self.target)):
            diagnostics = validate_complex(complex)
            if not diagnostics.valid:
                raise InvalidIsomorphism(
                    f"{name} complex is invalid: {diagnostics.violations[0].message}",
                    details={"complex": name},
                )
            check = is_unimodular(complex)
            if not check.unimodular:
                raise InvalidIsomorphism(f"{name} complex is not unimodular: {check.witness}", details={"complex": name})
        mapped = {frozenset(self.vertex_map[v] for v in ids) for ids in self.source.top_cells}
        targets = {frozenset(ids) for ids in self.target.top_cells}
        if mapped != targets:
            raise InvalidIsomorphism("vertex_map does not carry top simplexes onto top simplexes")
        return self

    @cached_property
    def _image_cells(self) -> Dict[FrozenSet[int], int]:
        return {frozenset(ids): i for i, ids in enumerate(self.target.top_cells)}

    def image_cell(self, cell_id: int) -> int:
        key = frozenset(self.vertex_map[v] for v in self.source.top_cells[cell_id])
        return self._image_cells[key]


def monotone_iso(source: CellularComplex, target: CellularComplex, reverse: bool = False) -> CombinatorialIso:
    """Iso between two 1-D complexes matching vertices in increasing (or reversed) order."""
    if source.ambient_dim != 1 or target.ambient_dim != 1:
        raise Unsupported("monotone_iso is defined for 1-D complexes only")
    if len(source.vertices) != len(target.vertices):
        raise InvalidIsomorphism("Vertex counts differ")
    source_order = sorted(range(len(source.vertices)), key=lambda v: source.vertices[v])
    target_order = sorted(range(len(target.vertices)), key=lambda v: target.vertices[v])
    if reverse:
        target_order.reverse()
    vertex_map = [0] * len(source.vertices)
    for s, t in zip(source_order, target_order):
        vertex_map[s] = t
    return CombinatorialIso(source, target, tuple(vertex_map))
