"""
Exact arithmetic substrate.

Rationals are ``fractions.Fraction`` (always reduced, arbitrary precision).
Integer matrices are immutable ``IntMatrix`` values; every solve goes through
exact rational elimination so determinant and integrality checks never lose
information to rounding.
"""

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from itertools import product
from math import gcd, lcm
from typing import Iterator, List, Sequence, Tuple, Union

from src.core.exceptions import (
    DimensionError,
    InvalidInput,
    NotIntegral,
    NotUnimodular,
    OutOfDomain,
    SingularMatrix,
)

Point = Tuple[Fraction, ...]
Rational = Fraction

_RATIONAL_PATTERN = re.compile(r"^\s*(-?\d+)(?:\s*/\s*(\d+))?\s*$")
_INTEGER_PATTERN = re.compile(r"^\s*-?\d+\s*$")


def parse_rational(value: Union[str, int, Fraction]) -> Fraction:
    """
    Parse "a/b", "a" or an int into a reduced Fraction.

    Floats and decimal strings are rejected: every coordinate must be exact.
    """
    if isinstance(value, bool):
        raise InvalidInput(f"Not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        match = _RATIONAL_PATTERN.match(value)
        if match:
            numerator, denominator = match.groups()
            if denominator is not None and int(denominator) == 0:
                raise InvalidInput(f"Zero denominator in {value!r}")
            return Fraction(int(numerator), int(denominator or 1))
    raise InvalidInput(f"Not a rational: {value!r}")


def parse_integer(value: Union[str, int]) -> int:
    if isinstance(value, bool):
        raise InvalidInput(f"Not an integer: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str) and _INTEGER_PATTERN.match(value):
        return int(value)
    raise InvalidInput(f"Not an integer: {value!r}")


def format_rational(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def parse_point(text: str) -> Point:
    """Parse a comma-separated coordinate list such as ``"1/3,1/2"``."""
    parts = [part for part in text.split(",") if part.strip()]
    if not parts:
        raise InvalidInput(f"Empty point: {text!r}")
    return tuple(parse_rational(part) for part in parts)


def format_point(point: Sequence[Fraction]) -> str:
    return ",".join(format_rational(x) for x in point)


@dataclass(frozen=True)
class IntMatrix:
    """Immutable integer matrix stored row-major."""

    rows: int
    cols: int
    entries: Tuple[int, ...]

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise DimensionError(f"Matrix dimensions must be positive, got {self.rows}x{self.cols}")
        if len(self.entries) != self.rows * self.cols:
            raise DimensionError(
                f"Expected {self.rows * self.cols} entries, got {len(self.entries)}"
            )
        for entry in self.entries:
            if isinstance(entry, bool) or not isinstance(entry, int):
                raise NotIntegral(f"Matrix entry {entry!r} is not an integer")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "IntMatrix":
        rows = [tuple(row) for row in rows]
        if not rows or any(len(row) != len(rows[0]) for row in rows):
            raise DimensionError("Ragged or empty row list")
        return cls(len(rows), len(rows[0]), tuple(x for row in rows for x in row))

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]]) -> "IntMatrix":
        return cls.from_rows(columns).transpose()

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(n, n, tuple(int(i == j) for i in range(n) for j in range(n)))

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def __getitem__(self, index: Tuple[int, int]) -> int:
        i, j = index
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> Tuple[int, ...]:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def column(self, j: int) -> Tuple[int, ...]:
        return tuple(self.entries[i * self.cols + j] for i in range(self.rows))

    def to_rows(self) -> List[Tuple[int, ...]]:
        return [self.row(i) for i in range(self.rows)]

    def transpose(self) -> "IntMatrix":
        return IntMatrix.from_rows([self.column(j) for j in range(self.cols)])

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise DimensionError(f"Cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        columns = [other.column(j) for j in range(other.cols)]
        return IntMatrix.from_rows(
            [[sum(a * b for a, b in zip(self.row(i), col)) for col in columns] for i in range(self.rows)]
        )

    def apply(self, vector: Sequence) -> tuple:
        """Matrix-vector product; works for int and Fraction vectors alike."""
        if len(vector) != self.cols:
            raise DimensionError(f"Vector of length {len(vector)} for {self.rows}x{self.cols} matrix")
        return tuple(sum(a * x for a, x in zip(self.row(i), vector)) for i in range(self.rows))

    def row_apply(self, row: Sequence) -> tuple:
        """Row-vector product ``row · self``."""
        if len(row) != self.rows:
            raise DimensionError(f"Row of length {len(row)} for {self.rows}x{self.cols} matrix")
        return tuple(sum(r * self[i, j] for i, r in enumerate(row)) for j in range(self.cols))

    def det(self) -> int:
        return int_det(self)

    def __str__(self) -> str:
        return "[" + ", ".join("[" + ", ".join(str(x) for x in self.row(i)) + "]" for i in range(self.rows)) + "]"


def int_det(matrix: IntMatrix) -> int:
    """Exact determinant by Bareiss fraction-free elimination."""
    if not matrix.is_square:
        raise DimensionError(f"Determinant of non-square {matrix.rows}x{matrix.cols} matrix")
    n = matrix.rows
    a = [list(matrix.row(i)) for i in range(n)]
    sign = 1
    previous = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // previous
        previous = a[k][k]
    return sign * a[n - 1][n - 1]


def rational_inverse(rows: Sequence[Sequence]) -> List[List[Fraction]]:
    """Gauss-Jordan inverse over the rationals."""
    n = len(rows)
    if any(len(row) != n for row in rows):
        raise DimensionError("Inverse of a non-square matrix")
    x = [[Fraction(v) for v in row] for row in rows]
    y = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]

    for i in range(n):
        pivot = next((j for j in range(i, n) if x[j][i] != 0), None)
        if pivot is None:
            raise SingularMatrix("Matrix is not invertible")
        if pivot != i:
            x[i], x[pivot] = x[pivot], x[i]
            y[i], y[pivot] = y[pivot], y[i]
        scale = x[i][i]
        x[i] = [v / scale for v in x[i]]
        y[i] = [v / scale for v in y[i]]
        for j in range(n):
            if j != i and x[j][i] != 0:
                factor = x[j][i]
                x[j] = [a - factor * b for a, b in zip(x[j], x[i])]
                y[j] = [a - factor * b for a, b in zip(y[j], y[i])]
    return y


def solve_right(c: IntMatrix, b: IntMatrix) -> IntMatrix:
    """
    Solve ``A · B = C`` for an integer matrix A.

    Args:
        c: Right-hand side
        b: Square, invertible matrix

    Returns:
        A = C · B⁻¹

    Raises:
        SingularMatrix: det(B) = 0
        NotIntegral: the exact solution has a non-integer entry
    """
    if not b.is_square:
        raise DimensionError(f"solve_right needs a square B, got {b.rows}x{b.cols}")
    if c.cols != b.rows:
        raise DimensionError(f"Shapes {c.rows}x{c.cols} and {b.rows}x{b.cols} do not align")
    if int_det(b) == 0:
        raise SingularMatrix("B is singular")

    inverse = rational_inverse(b.to_rows())
    result = []
    for i in range(c.rows):
        row = c.row(i)
        solved = [sum(row[k] * inverse[k][j] for k in range(b.rows)) for j in range(b.cols)]
        for value in solved:
            if value.denominator != 1:
                raise NotIntegral(
                    f"Entry {format_rational(value)} of C·B⁻¹ is not an integer",
                    details={"row": i},
                )
        result.append([int(value) for value in solved])
    return IntMatrix.from_rows(result)


def unimodular_inverse(a: IntMatrix) -> IntMatrix:
    """Exact integer inverse of a matrix with determinant ±1."""
    determinant = int_det(a)
    if abs(determinant) != 1:
        raise NotUnimodular(f"Determinant {determinant} is not ±1", details={"det": determinant})
    inverse = rational_inverse(a.to_rows())
    return IntMatrix.from_rows([[int(v) for v in row] for row in inverse])


def rref(rows: Sequence[Sequence], width: int) -> Tuple[List[List[Fraction]], List[int]]:
    """Reduced row echelon form over the rationals and its pivot columns."""
    m = [[Fraction(v) for v in row] for row in rows]
    pivots = []
    r = 0
    for col in range(width):
        pivot = next((i for i in range(r, len(m)) if m[i][col] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        scale = m[r][col]
        m[r] = [v / scale for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][col] != 0:
                factor = m[i][col]
                m[i] = [a - factor * b for a, b in zip(m[i], m[r])]
        pivots.append(col)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence], width: int) -> int:
    return len(rref(rows, width)[1])


def nullspace(rows: Sequence[Sequence], width: int) -> List[Tuple[Fraction, ...]]:
    """Basis of {x : rows · x = 0} in Q^width."""
    reduced, pivots = rref(rows, width)
    free = [col for col in range(width) if col not in pivots]
    basis = []
    for f in free:
        vector = [Fraction(0)] * width
        vector[f] = Fraction(1)
        for row, p in zip(reduced, pivots):
            vector[p] = -row[f]
        basis.append(tuple(vector))
    return basis


@dataclass(frozen=True)
class HomogPoint:
    """Primitive integer vector on the ray through (p, 1); last entry is den(p)."""

    coords: Tuple[int, ...]

    @property
    def den(self) -> int:
        return self.coords[-1]

    def to_point(self) -> Point:
        return homogeneous_to_point(self.coords)


def primitive_vector(vector: Sequence[int]) -> Tuple[int, ...]:
    divisor = reduce(gcd, (abs(v) for v in vector), 0)
    if divisor == 0:
        raise InvalidInput("Zero vector has no primitive form")
    return tuple(v // divisor for v in vector)


def primitive_homogeneous(point: Sequence[Fraction]) -> HomogPoint:
    """
    Primitive homogeneous coordinates of a rational point of the cube.

    Raises:
        OutOfDomain: a coordinate lies outside [0, 1]
    """
    coords = [Fraction(x) for x in point]
    for x in coords:
        if x < 0 or x > 1:
            raise OutOfDomain(f"Coordinate {format_rational(x)} outside [0,1]")
    den = reduce(lcm, (x.denominator for x in coords), 1)
    vector = [int(x * den) for x in coords] + [den]
    return HomogPoint(primitive_vector(vector))


def homogeneous_to_point(vector: Sequence[int]) -> Point:
    last = vector[-1]
    if last == 0:
        raise SingularMatrix("Homogeneous vector at infinity")
    return tuple(Fraction(v, last) for v in vector[:-1])


def mediant(left: Fraction, right: Fraction) -> Fraction:
    return Fraction(left.numerator + right.numerator, left.denominator + right.denominator)


def farey_sequence(order: int) -> Iterator[Fraction]:
    """Reduced fractions in [0, 1] with denominator ≤ order, increasing."""
    if order < 1:
        return
    a, b, c, d = 0, 1, 1, order
    yield Fraction(a, b)
    while c <= order:
        k = (order + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        yield Fraction(a, b)


def iter_primitive_points(dim: int, bound: int) -> Iterator[HomogPoint]:
    """
    All rational points of [0,1]^dim with denominator ≤ bound, as primitive vectors.

    For dim == 1 this walks the Farey sequence; higher dimensions scan the
    numerator grid per denominator and keep coprime vectors.
    """
    if dim == 1:
        for x in farey_sequence(bound):
            yield HomogPoint((x.numerator, x.denominator))
        return
    for den in range(1, bound + 1):
        for numerators in product(range(den + 1), repeat=dim):
            if reduce(gcd, numerators, den) == 1:
                yield HomogPoint(tuple(numerators) + (den,))
