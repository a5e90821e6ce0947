"""
Dynamics of dual maps: exact and float orbits, empirical measures, the
ratio family x_1 ↦ b(x_1∧x_2), x_2 ↦ a((x_1∨x_2)∸(x_1∧x_2)), C¹ profiles of
one-dimensional automorphisms and orbits of the unit under pullback.
"""

import csv
import hashlib
import logging
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterable, Iterator, List, NamedTuple, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from src.config.settings import settings
from src.core.exceptions import (
    C1Violation,
    DimensionError,
    DriftError,
    EquivalenceViolation,
    InvalidFunction,
    InvalidInput,
    Unsupported,
)
from src.core.ratmath import Point, format_rational, mediant, primitive_homogeneous
from src.models.schemas import HistogramSummary, OrbitMode, Regime
from src.services.autmap import (
    AutomorphismCert,
    PiecewiseFractionalMap,
    apply,
    certify,
    from_combinatorial_iso,
    from_generator_images,
    pullback,
)
from src.services.geometry import CellularComplex, interval_complex, monotone_iso, rational_grid
from src.services.pwl import (
    PWLFunction,
    coalesce,
    equals,
    generators,
    is_strong_unit,
    join,
    meet,
    scale,
    trunc_sub,
)
from src.services.serialization import map_to_payload

logger = logging.getLogger(__name__)


def map_reference(map: PiecewiseFractionalMap) -> str:
    """Content hash of the map's canonical JSON form."""
    return hashlib.sha256(map_to_payload(map).model_dump_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class OrbitRecord:
    points: Union[Tuple[Point, ...], np.ndarray]
    mode: OrbitMode
    map_ref: str
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.points)


class FloatMap:
    """Double-precision evaluator of a dual map with a drift guard."""

    def __init__(self, map: PiecewiseFractionalMap, tolerance: Optional[float] = None):
        self.n = map.n
        self.d = map.n - 1
        self.tolerance = settings.drift_tolerance if tolerance is None else tolerance
        self.matrices = np.array([m.entries for m in map.matrices], dtype=float).reshape(-1, self.n, self.n)

        if self.d == 1:
            order = sorted(range(len(map.source)), key=lambda i: map.source.polytopes[i][0][0])
            self._lefts = [float(map.source.polytopes[i][0][0]) for i in order]
            self._pieces = [tuple(float(x) for x in map.matrices[i].entries) for i in order]
            self._lefts_array = np.array(self._lefts)
            self._pieces_array = np.array(self._pieces)
        else:
            self._normals = [
                np.array([[float(a) for a in normal] for normal, _ in hs]) for hs in map.source.halfspace_table
            ]
            self._offsets = [np.array([float(b) for _, b in hs]) for hs in map.source.halfspace_table]

    def _guard_scalar(self, y: float) -> float:
        if y < 0.0:
            if y < -self.tolerance:
                raise DriftError(f"Float orbit left the cube: {y!r}")
            return 0.0
        if y > 1.0:
            if y > 1.0 + self.tolerance:
                raise DriftError(f"Float orbit left the cube: {y!r}")
            return 1.0
        return y

    def _guard(self, values: np.ndarray) -> np.ndarray:
        if np.any(values < -self.tolerance) or np.any(values > 1.0 + self.tolerance):
            worst = values[(values < -self.tolerance) | (values > 1.0 + self.tolerance)][0]
            raise DriftError(f"Float orbit left the cube: {worst!r}")
        return np.clip(values, 0.0, 1.0)

    def step_scalar(self, x: float) -> float:
        i = max(bisect_right(self._lefts, x) - 1, 0)
        a, b, c, d = self._pieces[i]
        return self._guard_scalar((a * x + b) / (c * x + d))

    def _cells(self, points: np.ndarray) -> np.ndarray:
        """Cell index per point: the cell whose halfspaces are least violated."""
        violations = np.stack([
            (points @ normals.T - offsets).max(axis=1) for normals, offsets in zip(self._normals, self._offsets)
        ])
        return violations.argmin(axis=0)

    def step_many(self, points: np.ndarray) -> np.ndarray:
        """One step for an (m, d) array of points."""
        points = np.asarray(points, dtype=float).reshape(-1, self.d)
        if self.d == 1:
            x = points[:, 0]
            cells = np.clip(np.searchsorted(self._lefts_array, x, side="right") - 1, 0, len(self._lefts) - 1)
            a, b, c, d = self._pieces_array[cells].T
            return self._guard((a * x + b) / (c * x + d)).reshape(-1, 1)
        cells = self._cells(points)
        homogeneous = np.hstack([points, np.ones((len(points), 1))])
        image = np.einsum("mij,mj->mi", self.matrices[cells], homogeneous)
        return self._guard(image[:, :-1] / image[:, -1:])

    def step(self, point: Sequence[float]) -> np.ndarray:
        return self.step_many(np.asarray(point, dtype=float).reshape(1, self.d))[0]

    def trajectory(self, start: Sequence[float], steps: int) -> np.ndarray:
        """Array of shape (steps+1, d) holding the orbit of ``start``."""
        start = np.asarray(start, dtype=float).reshape(self.d)
        if self.d == 1:
            x = self._guard_scalar(float(start[0]))
            values = [x]
            for _ in range(steps):
                x = self.step_scalar(x)
                values.append(x)
            return np.array(values).reshape(-1, 1)
        result = np.empty((steps + 1, self.d))
        result[0] = self._guard(start)
        for k in range(steps):
            result[k + 1] = self.step(result[k])
        return result


def random_start(d: int, seed: int, exact: bool) -> Tuple:
    rng = np.random.default_rng(seed)
    if exact:
        den = settings.report_max_denominator
        return tuple(Fraction(int(k), den) for k in rng.integers(0, den + 1, size=d))
    return tuple(float(x) for x in rng.random(d))


def orbit(
    map: PiecewiseFractionalMap,
    p0: Optional[Sequence] = None,
    steps: int = 0,
    mode: OrbitMode = OrbitMode.EXACT,
    seed: Optional[int] = None,
) -> OrbitRecord:
    """
    Iterate the map ``steps`` times from ``p0``, or from a seeded random start.

    Returns:
        OrbitRecord with steps+1 points (exact Fractions or a float array)
    """
    mode = OrbitMode(mode)
    if steps < 0:
        raise InvalidInput(f"Step count must be non-negative, got {steps}")
    if p0 is None:
        if seed is None:
            raise InvalidInput("Either a start point or a seed is required")
        p0 = random_start(map.n - 1, seed, exact=mode == OrbitMode.EXACT)
    if len(p0) != map.n - 1:
        raise DimensionError(f"Start point has {len(p0)} coordinates, expected {map.n - 1}")

    if mode == OrbitMode.EXACT:
        if any(isinstance(x, float) for x in p0):
            raise InvalidInput("Exact orbits need a rational start point")
        point = tuple(Fraction(x) for x in p0)
        points = [point]
        for _ in range(steps):
            point = apply(map, point)
            points.append(point)
        result = tuple(points)
    else:
        result = FloatMap(map).trajectory([float(x) for x in p0], steps)
    logger.debug(f"Orbit of {steps} steps in {mode.value} mode")
    return OrbitRecord(result, mode, map_reference(map), seed)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    bins: int
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if self.bins < 1:
            raise InvalidInput(f"Bin count must be positive, got {self.bins}")
        if int(self.counts.sum()) != self.total:
            raise InvalidInput(f"Counts sum to {int(self.counts.sum())}, expected {self.total}")

    @classmethod
    def from_points(cls, points: np.ndarray, bins: int) -> "EmpiricalMeasure":
        points = np.asarray(points, dtype=float)
        d = points.shape[1]
        counts, _ = np.histogramdd(points, bins=bins, range=[(0.0, 1.0)] * d)
        counts = counts.astype(np.int64)
        return cls(bins, counts, int(counts.sum()))

    @property
    def dim(self) -> int:
        return self.counts.ndim

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.total

    def _check_compatible(self, other: "EmpiricalMeasure") -> None:
        if self.counts.shape != other.counts.shape:
            raise DimensionError(f"Histogram shapes {self.counts.shape} and {other.counts.shape} differ")

    def total_variation(self, other: "EmpiricalMeasure") -> float:
        self._check_compatible(other)
        return 0.5 * float(np.abs(self.probabilities - other.probabilities).sum())

    def distance_to_uniform(self) -> float:
        uniform = np.full(self.counts.shape, 1.0 / self.counts.size)
        return 0.5 * float(np.abs(self.probabilities - uniform).sum())

    def merge(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        self._check_compatible(other)
        return EmpiricalMeasure(self.bins, self.counts + other.counts, self.total + other.total)

    def mass_at_origin(self) -> float:
        return float(self.counts[(0,) * self.dim]) / self.total

    def boundary_mass(self) -> float:
        """Mass in the bins that touch the boundary of the cube; the two end bins for d = 1."""
        mask = np.zeros(self.counts.shape, dtype=bool)
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = self.bins - 1
            mask[tuple(index)] = True
        return float(self.counts[mask].sum()) / self.total

    def is_dirac_limit(self, threshold: Optional[float] = None) -> bool:
        threshold = settings.dirac_mass_threshold if threshold is None else threshold
        return self.boundary_mass() >= threshold


def birkhoff_histogram(
    map: PiecewiseFractionalMap,
    p0: Sequence[float],
    steps: Optional[int] = None,
    bins: Optional[int] = None,
    burn_in: Optional[int] = None,
) -> EmpiricalMeasure:
    """Histogram of one float orbit after dropping its first ``burn_in`` points."""
    steps = settings.orbit_steps if steps is None else steps
    bins = settings.histogram_bins if bins is None else bins
    burn_in = settings.burn_in if burn_in is None else burn_in
    if burn_in > steps:
        raise InvalidInput(f"Burn-in {burn_in} exceeds the orbit length {steps}")
    points = FloatMap(map).trajectory([float(x) for x in p0], steps)[burn_in:]
    measure = EmpiricalMeasure.from_points(points, bins)
    logger.info(f"Birkhoff histogram: {measure.total} points in {bins} bins per axis")
    return measure


def pushforward_histogram(
    map: PiecewiseFractionalMap,
    samples: int,
    steps: int,
    bins: Optional[int] = None,
    seed: Optional[int] = None,
) -> EmpiricalMeasure:
    """Push ``samples`` uniform random points forward ``steps`` times and histogram them."""
    bins = settings.histogram_bins if bins is None else bins
    seed = settings.default_seed if seed is None else seed
    evaluator = FloatMap(map)
    points = np.random.default_rng(seed).random((samples, map.n - 1))
    for _ in range(steps):
        points = evaluator.step_many(points)
    return EmpiricalMeasure.from_points(points, bins)


class DynamicsRunner:
    """
    Orbit and histogram runs for one map, with run lengths taken from settings.
    """

    def __init__(
        self,
        map: PiecewiseFractionalMap,
        steps: Optional[int] = None,
        bins: Optional[int] = None,
        burn_in: Optional[int] = None,
    ):
        self.map = map
        self.steps = settings.orbit_steps if steps is None else steps
        self.bins = settings.histogram_bins if bins is None else bins
        self.burn_in = settings.burn_in if burn_in is None else burn_in
        self.reference = map_reference(map)

    def orbit(
        self,
        p0: Optional[Sequence] = None,
        steps: int = 0,
        mode: OrbitMode = OrbitMode.EXACT,
        seed: Optional[int] = None,
    ) -> OrbitRecord:
        return orbit(self.map, p0, steps, mode, seed)

    def histogram(self, seed: int, p0: Optional[Sequence[float]] = None) -> EmpiricalMeasure:
        """Birkhoff histogram from ``p0``, or from a float start drawn with ``seed``."""
        start = p0 if p0 is not None else random_start(self.map.n - 1, seed, exact=False)
        logger.debug(f"Histogram run on {self.reference[:12]} with seed {seed}")
        return birkhoff_histogram(self.map, start, self.steps, self.bins, self.burn_in)

    def merged_histogram(self, seeds: Sequence[int]) -> EmpiricalMeasure:
        """Sum of independent seeded runs; merging is associative."""
        if not seeds:
            raise InvalidInput("At least one seed is required")
        measures = [self.histogram(seed) for seed in seeds]
        result = measures[0]
        for measure in measures[1:]:
            result = result.merge(measure)
        return result

    def summarize(self, measure: EmpiricalMeasure, seed: int) -> HistogramSummary:
        return HistogramSummary(
            bins=self.bins,
            total=measure.total,
            steps=self.steps,
            burn_in=self.burn_in,
            seed=seed,
            boundary_mass=measure.boundary_mass(),
            dirac_limit=measure.is_dirac_limit(),
        )


class RatioFamily(NamedTuple):
    map: PiecewiseFractionalMap
    q: Fraction
    regime: Regime


def ratio_family_closed_form(q: Fraction, x: Fraction) -> Fraction:
    if x <= Fraction(1, 2):
        return x / ((1 - 2 * q) * x + q)
    y = 1 - x
    return y / ((1 - 2 * q) * y + q)


def classify_ratio(q: Fraction) -> Regime:
    """Label from the known trichotomy of the family; not checked at runtime."""
    if q < 1:
        return Regime.ERGODIC
    if q == 1:
        return Regime.DENSE
    return Regime.ATTRACTED


def ratio_family_map(a: int, b: int) -> RatioFamily:
    """
    Dual map of x_1 ↦ b(x_1∧x_2), x_2 ↦ a((x_1∨x_2)∸(x_1∧x_2)) for n = 2.

    The map depends on q = a/b only; it is checked against its closed form
    at ``settings.closed_form_samples`` rational points.
    """
    for name, value in (("a", a), ("b", b)):
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise InvalidInput(f"{name} must be a positive integer, got {value!r}")
    g = generators(2)
    low = meet(g.x(1), g.x(2))
    spread = trunc_sub(join(g.x(1), g.x(2)), low)
    map = from_generator_images([scale(low, b), scale(spread, a)])
    q = Fraction(a, b)

    for (x,) in rational_grid(1, settings.closed_form_samples):
        expected = ratio_family_closed_form(q, x)
        actual = apply(map, (x,))[0]
        if actual != expected:
            raise EquivalenceViolation(
                f"Ratio family map differs from its closed form at {format_rational(x)}: "
                f"{format_rational(actual)} vs {format_rational(expected)}"
            )
    regime = classify_ratio(q)
    logger.info(f"Ratio family a={a}, b={b}: q={format_rational(q)}, regime {regime.value}")
    return RatioFamily(map, q, regime)


class BreakpointDerivative(NamedTuple):
    point: Fraction
    left: Optional[Fraction]
    right: Optional[Fraction]


def _mobius_derivative(entries: Sequence[int], x: Fraction) -> Fraction:
    a, b, c, d = entries
    return Fraction(a * d - b * c) / (c * x + d) ** 2


def c1_profile(map: PiecewiseFractionalMap, cert: Optional[AutomorphismCert] = None) -> List[BreakpointDerivative]:
    """
    Exact one-sided derivatives at every vertex of a one-dimensional automorphism.

    The end points 0 and 1 have only one side. At interior breakpoints both
    sides must agree and equal ±f♯(p)^-2.

    Raises:
        C1Violation: one-sided derivatives differ
    """
    if map.n != 2:
        raise Unsupported(f"C¹ profiles are defined for n = 2, got n = {map.n}")
    cert = cert or certify(map)
    left_of, right_of = {}, {}
    for cell_id, (low, high) in enumerate(map.source.polytopes):
        right_of[low[0]] = cell_id
        left_of[high[0]] = cell_id

    profile = []
    for x in sorted(set(left_of) | set(right_of)):
        left = right = None
        if x in left_of:
            left = _mobius_derivative(map.matrices[left_of[x]].entries, x)
        if x in right_of:
            right = _mobius_derivative(map.matrices[right_of[x]].entries, x)
        if left is not None and right is not None:
            if left != right:
                raise C1Violation(
                    f"Derivatives at {format_rational(x)} differ: {format_rational(left)} vs {format_rational(right)}"
                )
            matrix = map.matrices[right_of[x]]
            f_sharp = matrix[1, 0] * x + matrix[1, 1]
            if abs(left) != 1 / f_sharp ** 2:
                raise C1Violation(f"Derivative at {format_rational(x)} is not ±f♯^-2")
        profile.append(BreakpointDerivative(x, left, right))
    return profile


@dataclass(frozen=True)
class UnitOrbit:
    units: Tuple[PWLFunction, ...]
    distinct: bool
    minima: Tuple[Fraction, ...]


def unit_orbit(map: PiecewiseFractionalMap, cert: Optional[AutomorphismCert] = None, steps: int = 5) -> UnitOrbit:
    """σ^0(1l), ..., σ^k(1l) under iterated pullback, with a pairwise-distinctness verdict."""
    if steps < 0:
        raise InvalidInput(f"Step count must be non-negative, got {steps}")
    cert = cert or certify(map)
    current = generators(map.n).unit
    units, minima = [current], []
    for _ in range(steps):
        current = pullback(map, current)
        if map.n <= 3:
            current = coalesce(current)
        units.append(current)
    for index, unit in enumerate(units):
        check = is_strong_unit(unit)
        if not check.is_strong_unit:
            raise InvalidFunction(f"σ^{index}(1l) is not a strong unit (minimum {format_rational(check.minimum)})")
        minima.append(check.minimum)
    distinct = all(not equals(f, g) for f, g in combinations(units, 2))
    logger.info(f"Unit orbit of {steps} steps, pairwise distinct: {distinct}")
    return UnitOrbit(tuple(units), distinct, tuple(minima))


def random_farey_complex(rng: np.random.Generator, vertex_count: int) -> CellularComplex:
    """Unimodular subdivision of [0,1] grown by inserting mediants of neighbours."""
    if vertex_count < 2:
        raise InvalidInput(f"A subdivision of [0,1] needs at least two vertices, got {vertex_count}")
    points = [Fraction(0), Fraction(1)]
    while len(points) < vertex_count:
        i = int(rng.integers(0, len(points) - 1))
        points.insert(i + 1, mediant(points[i], points[i + 1]))
    return interval_complex(points)


class RandomAutomorphism(NamedTuple):
    map: PiecewiseFractionalMap
    cert: AutomorphismCert
    kind: str


AUTOMORPHISM_KINDS = ("preserving", "reversing", "identity", "reflection")


def random_farey_automorphism(rng: np.random.Generator, max_vertices: int = 8) -> RandomAutomorphism:
    """A random certified n = 2 automorphism built from two Farey subdivisions."""
    count = int(rng.integers(2, max_vertices + 1))
    source = random_farey_complex(rng, count)
    kind = AUTOMORPHISM_KINDS[int(rng.integers(0, len(AUTOMORPHISM_KINDS)))]
    if kind == "identity":
        iso = monotone_iso(source, source)
    elif kind == "reflection":
        mirrored = interval_complex(sorted(1 - v[0] for v in source.vertices))
        iso = monotone_iso(source, mirrored, reverse=True)
    else:
        target = random_farey_complex(rng, count)
        iso = monotone_iso(source, target, reverse=kind == "reversing")
    map, cert = from_combinatorial_iso(iso)
    return RandomAutomorphism(map, cert, kind)


def _format_coordinate(value, mode: OrbitMode) -> str:
    if mode == OrbitMode.EXACT:
        return format_rational(value)
    return repr(float(value))


def orbit_rows(record: OrbitRecord) -> Iterator[List]:
    """``step,coord_1,...``; exact values as a/b strings, floats in round-trip form."""
    d = len(record.points[0])
    yield ["step"] + [f"coord_{k + 1}" for k in range(d)]
    for step, point in enumerate(record.points):
        yield [step] + [_format_coordinate(x, record.mode) for x in point]


def histogram_rows(measure: EmpiricalMeasure) -> Iterator[List]:
    yield [f"bin_{k + 1}" for k in range(measure.dim)] + ["count"]
    for index in np.ndindex(*measure.counts.shape):
        yield list(index) + [int(measure.counts[index])]


def write_csv(rows: Iterable[List], target: Union[Path, str, TextIO]) -> None:
    if isinstance(target, (str, Path)):
        with Path(target).open("w", newline="") as handle:
            csv.writer(handle, lineterminator="\n").writerows(rows)
    else:
        csv.writer(target, lineterminator="\n").writerows(rows)


def write_orbit_csv(record: OrbitRecord, target: Union[Path, str, TextIO]) -> None:
    write_csv(orbit_rows(record), target)


def write_histogram_csv(measure: EmpiricalMeasure, target: Union[Path, str, TextIO]) -> None:
    write_csv(histogram_rows(measure), target)


def orbit_denominators(record: OrbitRecord) -> List[int]:
    if record.mode != OrbitMode.EXACT:
        raise InvalidInput("Denominators are defined for exact orbits only")
    return [primitive_homogeneous(p).den for p in record.points]
