"""
Free cancellative hoop elements as continuous piecewise affine functions
with integer coefficients on the cube [0,1]^(n-1).

A function is a complex plus one integer row (a_1, ..., a_{n-1}, a_n) per top
cell, meaning a_1·x_1 + ... + a_{n-1}·x_{n-1} + a_n on that cell.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from src.config.settings import settings
from src.core.exceptions import DimensionError, InvalidFunction, InvalidInput, Unsupported
from src.core.ratmath import Point, format_point, format_rational, iter_primitive_points
from src.services.geometry import CellularComplex, cube_complex, locate, overlay
from src.services.polytope import affine_dimension, convex_hull, split, volume

logger = logging.getLogger(__name__)

Row = Tuple[int, ...]


class HoopOp(str, Enum):
    ADD = "add"
    TRUNC_SUB = "trunc_sub"
    JOIN = "join"
    MEET = "meet"
    NAT_SCALE = "nat_scale"


def row_value(row: Sequence[int], point: Sequence[Fraction]) -> Fraction:
    return sum((a * x for a, x in zip(row, point)), Fraction(row[-1]))


@dataclass(frozen=True, eq=False)
class PWLFunction:
    """A McNaughton function: one affine integer row per top cell of ``complex``."""

    n: int
    complex: CellularComplex
    rows: Tuple[Row, ...]

    def __post_init__(self):
        if self.complex.ambient_dim != self.n - 1:
            raise DimensionError(f"Complex of dimension {self.complex.ambient_dim} for n={self.n}")
        if len(self.rows) != len(self.complex):
            raise InvalidFunction(f"{len(self.rows)} rows for {len(self.complex)} top cells")
        for row in self.rows:
            if len(row) != self.n:
                raise InvalidFunction(f"Row {row} does not have {self.n} entries")
            if any(isinstance(a, bool) or not isinstance(a, int) for a in row):
                raise InvalidFunction(f"Row {row} has non-integer coefficients")

    @classmethod
    def affine(cls, n: int, row: Sequence[int]) -> "PWLFunction":
        return cls(n, cube_complex(n - 1), (tuple(row),))

    @classmethod
    def constant(cls, n: int, k: int) -> "PWLFunction":
        return cls.affine(n, (0,) * (n - 1) + (k,))

    @classmethod
    def zero(cls, n: int) -> "PWLFunction":
        return cls.constant(n, 0)

    def __call__(self, point: Sequence[Fraction]) -> Fraction:
        return evaluate(self, point)

    def vertex_values(self) -> Iterable[Tuple[int, int, Fraction]]:
        """(cell id, vertex id, value of that cell's row at the vertex)."""
        for cell_id, ids in enumerate(self.complex.top_cells):
            row = self.rows[cell_id]
            for v in ids:
                yield cell_id, v, row_value(row, self.complex.vertices[v])


def evaluate(f: PWLFunction, point: Sequence[Fraction]) -> Fraction:
    """Exact value at a point of the cube."""
    point = tuple(Fraction(x) for x in point)
    return row_value(f.rows[locate(f.complex, point)], point)


def check_continuity(f: PWLFunction) -> List[str]:
    """Vertices where two incident cells disagree; empty for a valid function."""
    seen = {}
    problems = []
    for cell_id, vertex_id, value in f.vertex_values():
        if vertex_id in seen and seen[vertex_id][1] != value:
            other = seen[vertex_id][0]
            problems.append(
                f"cells {other} and {cell_id} disagree at ({format_point(f.complex.vertices[vertex_id])}): "
                f"{format_rational(seen[vertex_id][1])} vs {format_rational(value)}"
            )
        seen.setdefault(vertex_id, (cell_id, value))
    return problems


def _combine(f: PWLFunction, g: PWLFunction, rule: Callable[[Row, Row], Row]) -> PWLFunction:
    if f.n != g.n:
        raise DimensionError(f"Cannot combine functions with n={f.n} and n={g.n}")
    if f.complex is g.complex:
        return PWLFunction(f.n, f.complex, tuple(rule(a, b) for a, b in zip(f.rows, g.rows)))
    merged = overlay([f.complex, g.complex])
    rows = tuple(rule(f.rows[i], g.rows[j]) for i, j in merged.parents)
    return PWLFunction(f.n, merged.complex, rows)


def _pointwise_select(f: PWLFunction, g: PWLFunction, take_larger: bool) -> PWLFunction:
    """Pointwise max (or min) by slicing each common cell where the rows are equal."""
    if f.n != g.n:
        raise DimensionError(f"Cannot combine functions with n={f.n} and n={g.n}")
    d = f.n - 1
    merged = overlay([f.complex, g.complex])
    pieces, rows = [], []
    for (i, j), poly in zip(merged.parents, merged.complex.polytopes):
        rf, rg = f.rows[i], g.rows[j]
        difference = tuple(a - b for a, b in zip(rf, rg))
        negative, positive = split(poly, d, difference)
        # f - g <= 0 on negative, >= 0 on positive
        for part, f_wins in ((negative, not take_larger), (positive, take_larger)):
            if part:
                pieces.append(part)
                rows.append(rf if f_wins else rg)
    return PWLFunction(f.n, CellularComplex.from_polytopes(d, pieces), tuple(rows))


def add(f: PWLFunction, g: PWLFunction) -> PWLFunction:
    return _combine(f, g, lambda a, b: tuple(x + y for x, y in zip(a, b)))


def subtract(f: PWLFunction, g: PWLFunction) -> PWLFunction:
    """Group difference in G_n; the result may leave the positive cone."""
    return _combine(f, g, lambda a, b: tuple(x - y for x, y in zip(a, b)))


def join(f: PWLFunction, g: PWLFunction) -> PWLFunction:
    return _pointwise_select(f, g, take_larger=True)


def meet(f: PWLFunction, g: PWLFunction) -> PWLFunction:
    return _pointwise_select(f, g, take_larger=False)


def trunc_sub(f: PWLFunction, g: PWLFunction) -> PWLFunction:
    """Truncated difference f ∸ g = 0 ∨ (f − g)."""
    return join(subtract(f, g), PWLFunction.zero(f.n))


def scale(f: PWLFunction, k: int) -> PWLFunction:
    if k < 0:
        raise InvalidInput(f"Natural scaling needs k >= 0, got {k}")
    return PWLFunction(f.n, f.complex, tuple(tuple(k * a for a in row) for row in f.rows))


def join_all(functions: Sequence[PWLFunction]) -> PWLFunction:
    result = functions[0]
    for f in functions[1:]:
        result = join(result, f)
    return result


def hoop_op(op: HoopOp, f: PWLFunction, g: Optional[PWLFunction] = None, k: Optional[int] = None) -> PWLFunction:
    """
    Dispatch a hoop operation.

    Args:
        op: Operation name
        f: First operand
        g: Second operand (all operations except nat_scale)
        k: Natural multiplier for nat_scale

    Returns:
        The resulting function, integer rows and continuity preserved
    """
    op = HoopOp(op)
    if op == HoopOp.NAT_SCALE:
        if k is None:
            raise InvalidInput("nat_scale needs k")
        return scale(f, k)
    if g is None:
        raise InvalidInput(f"{op.value} needs two operands")
    return {
        HoopOp.ADD: add,
        HoopOp.TRUNC_SUB: trunc_sub,
        HoopOp.JOIN: join,
        HoopOp.MEET: meet,
    }[op](f, g)


class StrongUnitCheck(NamedTuple):
    is_strong_unit: bool
    minimum: Fraction


def is_strong_unit(f: PWLFunction) -> StrongUnitCheck:
    """Minimum over all vertices; strictly positive exactly for strong units."""
    minimum = min(value for _, _, value in f.vertex_values())
    return StrongUnitCheck(minimum > 0, minimum)


def equals(f: PWLFunction, g: PWLFunction) -> bool:
    """Function equality: rows must coincide on every full-dimensional common cell."""
    if f.n != g.n:
        raise DimensionError(f"Cannot compare functions with n={f.n} and n={g.n}")
    merged = overlay([f.complex, g.complex])
    return all(f.rows[i] == g.rows[j] for i, j in merged.parents)


def unit_value_spectrum(g: PWLFunction, bound: int) -> List[int]:
    """
    The values m = g(p)·den(p) over rational points p with den(p) <= bound.

    The quotient at p is the (m+1)-element chain, so m = 2 is needed for a
    three-element quotient at a rational point.
    """
    if bound < 1:
        raise InvalidInput(f"Denominator bound must be positive, got {bound}")
    if bound > settings.spectrum_max_bound:
        raise Unsupported(f"Denominator bound {bound} exceeds {settings.spectrum_max_bound}")
    check = is_strong_unit(g)
    if not check.is_strong_unit:
        raise InvalidFunction(f"Not a strong unit: minimum {format_rational(check.minimum)}")

    values = set()
    for hp in iter_primitive_points(g.n - 1, bound):
        value = evaluate(g, hp.to_point()) * hp.den
        values.add(int(value))
    logger.debug(f"Spectrum up to denominator {bound}: {len(values)} values")
    return sorted(values)


def admits_chain_quotient(g: PWLFunction, bound: int, length: int = 3) -> bool:
    """Whether some rational point with den <= bound has a quotient chain of ``length`` elements."""
    return (length - 1) in unit_value_spectrum(g, bound)


def coalesce(f: PWLFunction) -> PWLFunction:
    """
    Merge neighbouring cells that carry the same row when their union is convex.

    Only dimensions 1 and 2 are handled. A merge never drops a vertex that
    another cell still uses, so the result stays a proper complex.
    """
    d = f.n - 1
    if d > 2:
        raise Unsupported("coalesce handles dimension <= 2 only")
    cells = [tuple(poly) for poly in f.complex.polytopes]
    rows = list(f.rows)

    merged = True
    while merged:
        merged = False
        usage = {}
        for poly in cells:
            for p in poly:
                usage[p] = usage.get(p, 0) + 1
        for a in range(len(cells)):
            for b in range(a + 1, len(cells)):
                if rows[a] != rows[b]:
                    continue
                shared = set(cells[a]) & set(cells[b])
                if affine_dimension(list(shared)) != d - 1:
                    continue
                union = convex_hull(cells[a] + cells[b], d)
                if volume(union, d) != volume(cells[a], d) + volume(cells[b], d):
                    continue
                dropped = (set(cells[a]) | set(cells[b])) - set(union)
                if any(usage[p] > (p in cells[a]) + (p in cells[b]) for p in dropped):
                    continue
                cells[a] = union
                del cells[b]
                del rows[b]
                merged = True
                break
            if merged:
                break
    return PWLFunction(f.n, CellularComplex.from_polytopes(d, cells), tuple(rows))


@dataclass(frozen=True)
class GeneratorSet:
    """x_1..x_{n-1} are the projections, x_n = 1l − (x_1 ∨ … ∨ x_{n-1})."""

    n: int
    projections: Tuple[PWLFunction, ...]
    last: PWLFunction
    unit: PWLFunction

    def x(self, i: int) -> PWLFunction:
        """1-based generator access."""
        if not 1 <= i <= self.n:
            raise InvalidInput(f"Generator index {i} outside 1..{self.n}")
        return self.last if i == self.n else self.projections[i - 1]

    @property
    def all(self) -> Tuple[PWLFunction, ...]:
        return self.projections + (self.last,)


@lru_cache(maxsize=16)
def generators(n: int) -> GeneratorSet:
    if n < 2:
        raise Unsupported(f"Generator sets need n >= 2, got {n}")
    projections = tuple(
        PWLFunction.affine(n, tuple(int(j == i) for j in range(n - 1)) + (0,)) for i in range(n - 1)
    )
    unit = PWLFunction.constant(n, 1)
    last = trunc_sub(unit, join_all(projections))
    return GeneratorSet(n, projections, last, unit)


def evaluate_on_points(f: PWLFunction, points: Iterable[Point]) -> List[Fraction]:
    return [evaluate(f, p) for p in points]
