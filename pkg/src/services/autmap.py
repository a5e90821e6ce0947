"""
Piecewise-fractional dual maps of endomorphisms and automorphisms.

On every top cell of its source complex a map carries an n×n integer matrix A
acting on homogeneous coordinates: p ↦ (A·(p,1))[:n-1] / (A·(p,1))[n-1].
The last row of A is the coefficient row of f♯, the image of the unit.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from src.config.settings import settings
from src.core.exceptions import (
    DimensionError,
    EquivalenceViolation,
    HoopError,
    InvalidFunction,
    InvalidInput,
    MixedOrientation,
    NonPositiveDenominator,
    NotAutomorphism,
    OnBoundary,
    TrivialEndomorphism,
    Unsupported,
)
from src.core.ratmath import (
    IntMatrix,
    Point,
    format_point,
    format_rational,
    primitive_homogeneous,
    solve_right,
    unimodular_inverse,
)
from src.models.schemas import Orientation, UnitFixingReport
from src.services.geometry import (
    CellularComplex,
    CombinatorialIso,
    CoordinateChange,
    cube_complex,
    locate,
    overlay,
    validate_complex,
    vertex_matrix,
    xy_transform,
)
from src.services.polytope import (
    affine_dimension,
    barycenter,
    bounding_box,
    boxes_overlap,
    clip,
    in_interior,
    volume,
)
from src.services.pwl import (
    PWLFunction,
    add,
    equals,
    generators,
    is_strong_unit,
    join_all,
    row_value,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PiecewiseFractionalMap:
    n: int
    source: CellularComplex
    matrices: Tuple[IntMatrix, ...]
    images: Optional[Tuple[PWLFunction, ...]] = None

    def __post_init__(self):
        if self.source.ambient_dim != self.n - 1:
            raise DimensionError(f"Source complex of dimension {self.source.ambient_dim} for n={self.n}")
        if len(self.matrices) != len(self.source):
            raise InvalidInput(f"{len(self.matrices)} matrices for {len(self.source)} top cells")
        for matrix in self.matrices:
            if (matrix.rows, matrix.cols) != (self.n, self.n):
                raise DimensionError(f"Matrix is {matrix.rows}x{matrix.cols}, expected {self.n}x{self.n}")

    @property
    def dets(self) -> Tuple[int, ...]:
        return tuple(matrix.det() for matrix in self.matrices)

    @property
    def orientation(self) -> Orientation:
        return orientation(self)

    def __call__(self, point: Sequence[Fraction]) -> Point:
        return apply(self, point)


@dataclass(frozen=True, eq=False)
class AutomorphismCert:
    det_per_cell: Tuple[int, ...]
    image_complex: CellularComplex
    bijective: bool
    orientation: Orientation


@dataclass(frozen=True)
class AutomorphismValidation:
    valid: bool
    problems: Tuple[str, ...]
    certificate: Optional[AutomorphismCert] = None


def identity_map(n: int) -> PiecewiseFractionalMap:
    return PiecewiseFractionalMap(n, cube_complex(n - 1), (IntMatrix.identity(n),))


def _image_of_vertex(matrix: IntMatrix, point: Point) -> Tuple[Fraction, ...]:
    """A·(p,1) over the rationals; no primitivity assumed."""
    return matrix.apply(tuple(point) + (Fraction(1),))


def apply_homogeneous(map: PiecewiseFractionalMap, point: Sequence[Fraction]) -> Tuple[int, ...]:
    """A_h · primitive_homogeneous(p); for automorphisms this is primitive again."""
    hp = primitive_homogeneous(point)
    cell_id = locate(map.source, hp.to_point())
    image = map.matrices[cell_id].apply(hp.coords)
    if image[-1] <= 0:
        raise NonPositiveDenominator(
            f"Last homogeneous coordinate {image[-1]} at ({format_point(hp.to_point())})",
            details={"cell": cell_id},
        )
    return image


def apply(map: PiecewiseFractionalMap, point: Sequence[Fraction]) -> Point:
    """
    Exact image S(p) of a point of the cube.

    Raises:
        OutOfDomain: p outside the cube
        NonPositiveDenominator: the matrix on p's cell is not a valid dual map
    """
    image = apply_homogeneous(map, point)
    return tuple(Fraction(v, image[-1]) for v in image[:-1])


def check_well_defined(map: PiecewiseFractionalMap) -> List[str]:
    """Positive last coordinate at every cell vertex and agreement on shared vertices."""
    problems = []
    images = {}
    for cell_id, ids in enumerate(map.source.top_cells):
        matrix = map.matrices[cell_id]
        for v in ids:
            vector = _image_of_vertex(matrix, map.source.vertices[v])
            if vector[-1] <= 0:
                problems.append(
                    f"cell {cell_id}: last coordinate {format_rational(vector[-1])} "
                    f"at vertex ({format_point(map.source.vertices[v])})"
                )
                continue
            point = tuple(x / vector[-1] for x in vector[:-1])
            if v in images and images[v][1] != point:
                problems.append(
                    f"cells {images[v][0]} and {cell_id} send ({format_point(map.source.vertices[v])}) "
                    f"to ({format_point(images[v][1])}) and ({format_point(point)})"
                )
            images.setdefault(v, (cell_id, point))
    return problems


def _vertex_images(map: PiecewiseFractionalMap) -> List[Point]:
    result = []
    for v, vertex in enumerate(map.source.vertices):
        cell_id = map.source.vertex_cells[v][0]
        vector = _image_of_vertex(map.matrices[cell_id], vertex)
        result.append(tuple(x / vector[-1] for x in vector[:-1]))
    return result


def validate_automorphism(map: PiecewiseFractionalMap) -> AutomorphismValidation:
    """
    Check that a map is a piecewise SL_n(ℤ) homeomorphism of the cube.

    Never raises; problems are collected and a certificate is attached only
    when none were found.
    """
    problems = []
    dets = map.dets
    for cell_id, det in enumerate(dets):
        if abs(det) != 1:
            problems.append(f"cell {cell_id}: determinant {det}")
    signs = {det > 0 for det in dets if det != 0}
    if len(signs) > 1:
        problems.append("determinants do not share one sign")

    well_defined = check_well_defined(map)
    problems.extend(well_defined)

    image_complex = None
    if not well_defined:
        images = _vertex_images(map)
        if len(set(images)) != len(images):
            problems.append("two source vertices share an image")
        image_complex = CellularComplex.from_polytopes(
            map.n - 1, [[images[v] for v in ids] for ids in map.source.top_cells]
        )
        diagnostics = validate_complex(image_complex)
        for violation in diagnostics.violations:
            problems.append(f"image complex: {violation.message}")

    if problems:
        logger.info(f"Map rejected as automorphism: {problems[0]}")
        return AutomorphismValidation(False, tuple(problems))

    certificate = AutomorphismCert(
        det_per_cell=dets,
        image_complex=image_complex,
        bijective=True,
        orientation=Orientation.PRESERVING if dets[0] > 0 else Orientation.REVERSING,
    )
    logger.debug(f"Certified {certificate.orientation.value} automorphism on {len(dets)} cells")
    return AutomorphismValidation(True, (), certificate)


def certify(map: PiecewiseFractionalMap) -> AutomorphismCert:
    validation = validate_automorphism(map)
    if not validation.valid:
        raise NotAutomorphism(validation.problems[0], details={"problems": list(validation.problems)})
    return validation.certificate


def orientation(map: PiecewiseFractionalMap) -> Orientation:
    signs = {(det > 0) - (det < 0) for det in map.dets}
    if len(signs) != 1 or 0 in signs:
        raise MixedOrientation(f"Determinant signs {sorted(signs)} do not define an orientation")
    return Orientation.PRESERVING if signs == {1} else Orientation.REVERSING


def from_generator_images(images: Sequence[PWLFunction]) -> PiecewiseFractionalMap:
    """
    Dual map of the endomorphism x_i ↦ f_i.

    Args:
        images: f_1, ..., f_n, all in the positive cone

    Returns:
        Map whose matrix on each cell has rows f_1, ..., f_{n-1}, f♯

    Raises:
        TrivialEndomorphism: f♯ = f_n + (f_1 ∨ … ∨ f_{n-1}) vanishes somewhere
    """
    images = tuple(images)
    n = images[0].n
    if len(images) != n or any(f.n != n for f in images):
        raise DimensionError(f"Need exactly {n} images with n={n}")
    for index, f in enumerate(images, start=1):
        check = is_strong_unit(f)
        if check.minimum < 0:
            raise InvalidFunction(f"f_{index} is negative somewhere (minimum {format_rational(check.minimum)})")

    f_sharp = add(images[-1], join_all(images[:-1]))
    check = is_strong_unit(f_sharp)
    if not check.is_strong_unit:
        raise TrivialEndomorphism(
            f"f♯ has minimum {format_rational(check.minimum)}; the endomorphism kills a maximal ideal"
        )

    parts = images[:-1] + (f_sharp,)
    merged = overlay([f.complex for f in parts])
    matrices = tuple(
        IntMatrix.from_rows([parts[k].rows[parent[k]] for k in range(n)]) for parent in merged.parents
    )
    result = PiecewiseFractionalMap(n, merged.complex, matrices, images)

    # the cone point (f_1..f_n)(p) in X-coordinates must match the matrix in Y-coordinates
    for v, vertex in enumerate(merged.complex.vertices):
        cell_id = merged.complex.vertex_cells[v][0]
        cone_point = tuple(row_value(images[k].rows[locate(images[k].complex, vertex)], vertex) for k in range(n))
        if xy_transform(cone_point, CoordinateChange.X_TO_Y) != _image_of_vertex(matrices[cell_id], vertex):
            raise EquivalenceViolation(f"Matrix rows disagree with the images at ({format_point(vertex)})")

    logger.debug(f"Built dual map from generator images: {len(matrices)} cells")
    return result


def check_images(map: PiecewiseFractionalMap) -> List[str]:
    """Cells where the stored generator images and the matrices define different maps."""
    if map.images is None:
        return []
    try:
        rebuilt = from_generator_images(map.images)
    except HoopError as e:
        return [f"images do not define a dual map: {e.message}"]
    if rebuilt.n != map.n:
        return [f"images have n={rebuilt.n}, matrices have n={map.n}"]

    problems = []
    merged = overlay([map.source, rebuilt.source])
    for cell_id, (own, other) in enumerate(merged.parents):
        if map.matrices[own] != rebuilt.matrices[other]:
            problems.append(
                f"cell {cell_id}: matrix {map.matrices[own].to_rows()} but the images give "
                f"{rebuilt.matrices[other].to_rows()}"
            )
    return problems


def from_combinatorial_iso(iso: CombinatorialIso) -> Tuple[PiecewiseFractionalMap, AutomorphismCert]:
    """
    Solve A·B = C on every top simplex, B and C the primitive vertex matrices.

    Raises:
        InvalidIsomorphism: the iso fails validation
        NotAutomorphism: the solved map fails validation
    """
    iso.validate()
    n = iso.source.ambient_dim + 1
    matrices = []
    for cell_id, ids in enumerate(iso.source.top_cells):
        b = vertex_matrix([iso.source.vertices[v] for v in ids])
        c = vertex_matrix([iso.target.vertices[iso.vertex_map[v]] for v in ids])
        matrices.append(solve_right(c, b))
    map = PiecewiseFractionalMap(n, iso.source, tuple(matrices))
    certificate = certify(map)
    logger.info(f"Automorphism built from combinatorial isomorphism: {len(matrices)} cells, {certificate.orientation.value}")
    return map, certificate


def _preimage_partition(
    map: PiecewiseFractionalMap, target: CellularComplex
) -> List[Tuple[Tuple[Point, ...], int, int]]:
    """
    Split every source cell by the preimages of the target's top cells.

    Returns (piece, source cell id, target cell id) triples. A halfspace
    a·y <= b of a target cell pulls back to the linear condition
    Σ a_k·A[k,:] − b·A[n-1,:] <= 0 in homogeneous coordinates.
    """
    d = map.n - 1
    images = _vertex_images(map)
    pieces = []
    for cell_id, ids in enumerate(map.source.top_cells):
        matrix = map.matrices[cell_id]
        poly = map.source.polytopes[cell_id]
        image_box = bounding_box([images[v] for v in ids])
        found = []
        for target_id, hs in enumerate(target.halfspace_table):
            if not hs or not boxes_overlap(image_box, target.boxes[target_id]):
                continue
            piece = tuple(poly)
            for normal, offset in hs:
                w = [
                    sum((a * matrix[k, j] for k, a in enumerate(normal)), Fraction(0)) - offset * matrix[d, j]
                    for j in range(map.n)
                ]
                piece = clip(piece, d, w[:d], -w[d])
                if not piece:
                    break
            if piece and affine_dimension(piece) == d:
                found.append((piece, cell_id, target_id))
        covered = sum((volume(piece, d) for piece, _, _ in found), Fraction(0))
        if covered != volume(poly, d):
            raise Unsupported(
                f"Cell {cell_id} is not partitioned by the target preimages (covered {format_rational(covered)})"
            )
        pieces.extend(found)
    return pieces


def compose(first: PiecewiseFractionalMap, second: PiecewiseFractionalMap) -> PiecewiseFractionalMap:
    """The map p ↦ second(first(p)) on the preimage refinement of second's complex."""
    if first.n != second.n:
        raise DimensionError(f"Cannot compose maps with n={first.n} and n={second.n}")
    pieces = _preimage_partition(first, second.source)
    source = CellularComplex.from_polytopes(first.n - 1, [piece for piece, _, _ in pieces])
    matrices = tuple(second.matrices[j] @ first.matrices[i] for _, i, j in pieces)
    return PiecewiseFractionalMap(first.n, source, matrices)


def invert(map: PiecewiseFractionalMap, cert: Optional[AutomorphismCert] = None) -> PiecewiseFractionalMap:
    """Inverse automorphism: the image complex with inverted matrices."""
    cert = cert or certify(map)
    matrices = tuple(unimodular_inverse(matrix) for matrix in map.matrices)
    return PiecewiseFractionalMap(map.n, cert.image_complex, matrices)


def pullback(map: PiecewiseFractionalMap, f: PWLFunction) -> PWLFunction:
    """σ(f) = f♯·(f∘S), one row r·A_h per piece of the preimage partition."""
    if f.n != map.n:
        raise DimensionError(f"Function with n={f.n} for map with n={map.n}")
    pieces = _preimage_partition(map, f.complex)
    complex = CellularComplex.from_polytopes(map.n - 1, [piece for piece, _, _ in pieces])
    rows = tuple(map.matrices[i].row_apply(f.rows[j]) for _, i, j in pieces)
    return PWLFunction(map.n, complex, rows)


def agree_on(first: PiecewiseFractionalMap, second: PiecewiseFractionalMap, points: Sequence[Point]) -> bool:
    return all(apply(first, p) == apply(second, p) for p in points)


@lru_cache(maxsize=512)
def _symbolic_jacobian(n: int, entries: Tuple[int, ...]):
    symbols = sympy.symbols(f"x1:{n}")
    matrix = sympy.Matrix(n, n, entries)
    homogeneous = matrix * sympy.Matrix(list(symbols) + [1])
    fractional = sympy.Matrix([homogeneous[i] / homogeneous[n - 1] for i in range(n - 1)])
    det = sympy.cancel(fractional.jacobian(symbols).det())
    return symbols, det


def _to_fraction(value) -> Fraction:
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


def jacobian_det(map: PiecewiseFractionalMap, point: Sequence[Fraction]) -> Fraction:
    """
    Jacobian determinant of S at an interior point of a top cell.

    Computed symbolically and by the closed form det(A)/f♯(p)^n; a mismatch
    raises EquivalenceViolation.

    Raises:
        OnBoundary: p is not in the interior of a top cell
    """
    point = tuple(Fraction(x) for x in point)
    cell_id = locate(map.source, point)
    if not in_interior(map.source.halfspace_table[cell_id], point):
        raise OnBoundary(f"({format_point(point)}) lies on the boundary of cell {cell_id}")
    matrix = map.matrices[cell_id]
    symbols, det = _symbolic_jacobian(map.n, matrix.entries)
    symbolic = _to_fraction(det.subs({s: sympy.Rational(x.numerator, x.denominator) for s, x in zip(symbols, point)}))
    f_sharp = row_value(matrix.row(map.n - 1), point)
    closed = Fraction(matrix.det()) / f_sharp ** map.n
    if symbolic != closed:
        raise EquivalenceViolation(
            f"Jacobian mismatch at ({format_point(point)}): {format_rational(symbolic)} vs {format_rational(closed)}"
        )
    return closed


def jacobian_is_unimodular(map: PiecewiseFractionalMap) -> bool:
    """|det J| ≡ 1 as a rational function on every top cell."""
    for matrix in map.matrices:
        _, det = _symbolic_jacobian(map.n, matrix.entries)
        if det not in (sympy.Integer(1), sympy.Integer(-1)):
            return False
    return True


def _den(point: Sequence[Fraction]) -> int:
    return primitive_homogeneous(point).den


def _denominator_witness(map: PiecewiseFractionalMap, points: Sequence[Point]) -> Optional[str]:
    for p in points:
        image = apply(map, p)
        if _den(image) != _den(p):
            return (
                f"den({format_point(p)})={_den(p)} but "
                f"den(S({format_point(p)}))=den({format_point(image)})={_den(image)}"
            )
    return None


def random_cell_points(map: PiecewiseFractionalMap, count: int, seed: int) -> List[Point]:
    """Random rational interior points, spread over every top cell."""
    rng = np.random.default_rng(seed)
    per_cell = max(1, ceil(count / len(map.source)))
    points = []
    for cell_id in range(len(map.source)):
        vertices = map.source.cell_points(cell_id)
        for _ in range(per_cell):
            weights = [int(w) for w in rng.integers(1, settings.report_max_denominator + 1, size=len(vertices))]
            total = sum(weights)
            points.append(tuple(
                sum((Fraction(w, total) * v[k] for w, v in zip(weights, vertices)), Fraction(0))
                for k in range(map.n - 1)
            ))
    return points[:max(count, len(map.source))]


def unit_fixing_report(
    map: PiecewiseFractionalMap,
    cert: Optional[AutomorphismCert] = None,
    sample_size: Optional[int] = None,
    seed: Optional[int] = None,
) -> UnitFixingReport:
    """
    Evaluate the five equivalent unit-fixing conditions for an automorphism.

    Args:
        map: Certified automorphism
        cert: Certificate; computed when omitted
        sample_size: Random rational points for the sampled denominator check
        seed: Seed of the sample

    Returns:
        The five answers, with a denominator witness when they are false

    Raises:
        NotAutomorphism: map fails validation
        EquivalenceViolation: the answers disagree
    """
    cert = cert or certify(map)
    sample_size = settings.report_sample_size if sample_size is None else sample_size
    seed = settings.default_seed if seed is None else seed
    n = map.n
    unit = generators(n).unit

    unit_fixed = equals(pullback(map, unit), unit)
    sample = random_cell_points(map, sample_size, seed)
    sample_witness = _denominator_witness(map, sample)
    vertex_witness = _denominator_witness(map, map.source.vertices)
    trivial_row = (0,) * (n - 1) + (1,)
    last_rows_trivial = all(matrix.row(n - 1) == trivial_row for matrix in map.matrices)
    jacobian_unimodular = jacobian_is_unimodular(map)

    answers = UnitFixingReport(
        unit_fixed=unit_fixed,
        denominators_preserved_sample=sample_witness is None,
        denominators_preserved_vertices=vertex_witness is None,
        last_rows_trivial=last_rows_trivial,
        jacobian_unimodular=jacobian_unimodular,
        witness=vertex_witness or sample_witness,
        sample_size=len(sample),
        seed=seed,
    )
    if not answers.all_agree:
        raise EquivalenceViolation("Unit-fixing conditions disagree", details=answers.model_dump())
    return answers


def swap_generators(n: int, i: int, j: int) -> PiecewiseFractionalMap:
    """Dual of the automorphism exchanging x_i and x_j (1-based)."""
    if not (1 <= i <= n and 1 <= j <= n):
        raise InvalidInput(f"Generator indices {i}, {j} outside 1..{n}")
    if i < n and j < n:
        rows = [list(row) for row in IntMatrix.identity(n).to_rows()]
        rows[i - 1], rows[j - 1] = rows[j - 1], rows[i - 1]
        return PiecewiseFractionalMap(n, cube_complex(n - 1), (IntMatrix.from_rows(rows),))
    images = list(generators(n).all)
    images[i - 1], images[j - 1] = images[j - 1], images[i - 1]
    return from_generator_images(images)


def interior_point(map: PiecewiseFractionalMap, cell_id: int) -> Point:
    return barycenter(map.source.polytopes[cell_id])


class MapCertifier:
    """
    Issues automorphism certificates and the operations that need them.

    A certificate is computed once per map object and reused by later calls.
    """

    def __init__(self, sample_size: Optional[int] = None, seed: Optional[int] = None):
        self.sample_size = settings.report_sample_size if sample_size is None else sample_size
        self.seed = settings.default_seed if seed is None else seed
        self._issued: Dict[PiecewiseFractionalMap, AutomorphismCert] = {}

    def certify(self, map: PiecewiseFractionalMap, cert: Optional[AutomorphismCert] = None) -> AutomorphismCert:
        if map not in self._issued:
            self._issued[map] = cert or certify(map)
            logger.info(f"Certified {len(map.source)}-cell map ({self._issued[map].orientation.value})")
        return self._issued[map]

    def report(
        self,
        map: PiecewiseFractionalMap,
        cert: Optional[AutomorphismCert] = None,
        seed: Optional[int] = None,
    ) -> UnitFixingReport:
        seed = self.seed if seed is None else seed
        return unit_fixing_report(map, self.certify(map, cert), self.sample_size, seed)

    def inverse(self, map: PiecewiseFractionalMap, cert: Optional[AutomorphismCert] = None) -> PiecewiseFractionalMap:
        result = invert(map, self.certify(map, cert))
        self.certify(result)
        return result

    def compose(self, first: PiecewiseFractionalMap, second: PiecewiseFractionalMap) -> PiecewiseFractionalMap:
        """Certified p ↦ second(first(p)); both inputs must be automorphisms."""
        self.certify(first)
        self.certify(second)
        result = compose(first, second)
        self.certify(result)
        return result
