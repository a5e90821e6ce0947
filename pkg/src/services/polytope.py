"""
Exact convex-polytope kernel over the rationals.

Polytopes are vertex tuples (V-representation). Dimensions 1 and 2 have
direct code paths (interval arithmetic, Sutherland-Hodgman clipping and a
monotone-chain hull); higher dimensions fall back to a generic
supporting-hyperplane enumeration which is exact but only meant for small
vertex counts.

Canonical vertex order:
    dim 1: (low, high)
    dim 2: counter-clockwise, starting at the lexicographically smallest vertex
    dim ≥ 3: lexicographically sorted
"""

from fractions import Fraction
from itertools import combinations
from math import factorial
from typing import FrozenSet, List, Optional, Sequence, Tuple

from src.core.ratmath import Point, nullspace, rank, rref

Vector = Tuple[Fraction, ...]
Halfspace = Tuple[Vector, Fraction]  # a·x <= b


def dot(a: Sequence, x: Sequence) -> Fraction:
    return sum((ai * xi for ai, xi in zip(a, x)), Fraction(0))


def _sub(p: Sequence, q: Sequence) -> Vector:
    return tuple(a - b for a, b in zip(p, q))


def _cross(o: Point, a: Point, b: Point) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def affine_dimension(points: Sequence[Point]) -> int:
    """Dimension of the affine hull; -1 for the empty set."""
    if not points:
        return -1
    base = points[0]
    diffs = [_sub(p, base) for p in points[1:]]
    if not diffs:
        return 0
    return rank(diffs, len(base))


def barycenter(points: Sequence[Point]) -> Point:
    count = len(points)
    return tuple(sum(coords, Fraction(0)) / count for coords in zip(*points))


def bounding_box(points: Sequence[Point]) -> Tuple[Point, Point]:
    return tuple(min(c) for c in zip(*points)), tuple(max(c) for c in zip(*points))


def boxes_overlap(first: Tuple[Point, Point], second: Tuple[Point, Point]) -> bool:
    (lo1, hi1), (lo2, hi2) = first, second
    return all(a <= d and c <= b for a, b, c, d in zip(lo1, hi1, lo2, hi2))


# Generic machinery (any dimension)

def _affine_frame(points: Sequence[Point]) -> Tuple[int, List[Vector]]:
    """
    Project points onto coordinates that are injective on their affine hull.

    An affine bijection onto Q^k preserves faces and extreme points, so the
    generic routines below can always work with full-dimensional input.
    """
    base = points[0]
    diffs = [_sub(p, base) for p in points]
    _, pivots = rref(diffs, len(base))
    return len(pivots), [tuple(p[c] for c in pivots) for p in points]


def _facets_full(coords: Sequence[Vector], k: int) -> List[Tuple[Vector, Fraction, FrozenSet[int]]]:
    """Facets of a full-dimensional point set in Q^k as (normal, offset, indices on it)."""
    if k == 1:
        values = [c[0] for c in coords]
        low, high = min(values), max(values)
        return [
            ((Fraction(-1),), -low, frozenset(i for i, v in enumerate(values) if v == low)),
            ((Fraction(1),), high, frozenset(i for i, v in enumerate(values) if v == high)),
        ]
    found = {}
    for subset in combinations(range(len(coords)), k):
        base = coords[subset[0]]
        normals = nullspace([_sub(coords[i], base) for i in subset[1:]], k)
        if len(normals) != 1:
            continue
        normal = normals[0]
        offset = dot(normal, base)
        values = [dot(normal, c) - offset for c in coords]
        if all(v >= 0 for v in values):
            normal = tuple(-x for x in normal)
            offset = -offset
        elif not all(v <= 0 for v in values):
            continue
        on = frozenset(i for i, v in enumerate(values) if v == 0)
        found.setdefault(on, (normal, offset))
    return [(normal, offset, on) for on, (normal, offset) in found.items()]


def _facet_sets(points: Sequence[Point]) -> List[FrozenSet[int]]:
    k, coords = _affine_frame(points)
    if k == 0:
        return []
    return [on for _, _, on in _facets_full(coords, k)]


def _extreme_indices(points: Sequence[Point]) -> FrozenSet[int]:
    if affine_dimension(points) == 0:
        return frozenset([0])
    result = set()
    for facet in _facet_sets(points):
        members = sorted(facet)
        inner = _extreme_indices([points[i] for i in members])
        result.update(members[i] for i in inner)
    return frozenset(result)


def _generic_hull(points: Sequence[Point]) -> Tuple[Point, ...]:
    unique = sorted(set(points))
    if len(unique) <= 1:
        return tuple(unique)
    return tuple(unique[i] for i in sorted(_extreme_indices(unique)))


def _triangulate(points: Sequence[Point]) -> List[Tuple[int, ...]]:
    """Pulling triangulation from the first point; points must be extreme."""
    k = affine_dimension(points)
    if k == 0:
        return [(0,)]
    simplices = []
    for facet in _facet_sets(points):
        if 0 in facet:
            continue
        members = sorted(facet)
        for simplex in _triangulate([points[i] for i in members]):
            simplices.append((0,) + tuple(members[i] for i in simplex))
    return simplices


def simplex_volume(vertices: Sequence[Point]) -> Fraction:
    base = vertices[0]
    rows = [_sub(v, base) for v in vertices[1:]]
    d = len(rows)
    det = _rational_det(rows)
    return abs(det) / factorial(d)


def _rational_det(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    m = [list(row) for row in rows]
    n = len(m)
    det = Fraction(1)
    for i in range(n):
        pivot = next((j for j in range(i, n) if m[j][i] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != i:
            m[i], m[pivot] = m[pivot], m[i]
            det = -det
        det *= m[i][i]
        for j in range(i + 1, n):
            factor = m[j][i] / m[i][i]
            m[j] = [a - factor * b for a, b in zip(m[j], m[i])]
    return det


# Public API

def convex_hull(points: Sequence[Point], dim: int) -> Tuple[Point, ...]:
    """Extreme points of conv(points) in canonical order."""
    points = [tuple(Fraction(x) for x in p) for p in points]
    if not points:
        return ()
    if dim == 1:
        low, high = min(points), max(points)
        return (low,) if low == high else (low, high)
    if dim == 2:
        unique = sorted(set(points))
        if len(unique) <= 2:
            return tuple(unique)
        lower: List[Point] = []
        for p in unique:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        upper: List[Point] = []
        for p in reversed(unique):
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
                upper.pop()
            upper.append(p)
        return tuple(lower[:-1] + upper[:-1])
    return _generic_hull(points)


def halfspaces(vertices: Sequence[Point], dim: int) -> Tuple[Halfspace, ...]:
    """H-representation of a full-dimensional polytope given canonically."""
    if dim == 1:
        low, high = vertices[0][0], vertices[-1][0]
        return (((Fraction(-1),), -low), ((Fraction(1),), high))
    if dim == 2:
        result = []
        count = len(vertices)
        for i in range(count):
            p, q = vertices[i], vertices[(i + 1) % count]
            normal = (q[1] - p[1], p[0] - q[0])
            result.append((normal, dot(normal, p)))
        return tuple(result)
    return tuple((normal, offset) for normal, offset, _ in _facets_full(list(vertices), dim))


def contains(hs: Sequence[Halfspace], point: Sequence[Fraction]) -> bool:
    return all(dot(a, point) <= b for a, b in hs)


def in_interior(hs: Sequence[Halfspace], point: Sequence[Fraction]) -> bool:
    return all(dot(a, point) < b for a, b in hs)


def clip(vertices: Sequence[Point], dim: int, normal: Sequence, offset) -> Tuple[Point, ...]:
    """
    Intersect conv(vertices) with the half-space normal·x <= offset.

    Returns the canonical vertex tuple of the result, empty if it vanishes.
    """
    if not vertices:
        return ()
    values = [dot(normal, v) - offset for v in vertices]
    if all(v <= 0 for v in values):
        return tuple(vertices)
    if all(v > 0 for v in values):
        return ()

    kept: List[Point] = []
    if dim == 2:
        count = len(vertices)
        for i in range(count):
            current, following = vertices[i], vertices[(i + 1) % count]
            fc, ff = values[i], values[(i + 1) % count]
            if fc <= 0:
                kept.append(current)
            if (fc < 0 < ff) or (ff < 0 < fc):
                t = fc / (fc - ff)
                kept.append(tuple(c + t * (f - c) for c, f in zip(current, following)))
    else:
        # conv of in-points and all crossing points equals the clipped polytope
        inside = [v for v, f in zip(vertices, values) if f <= 0]
        kept.extend(inside)
        for (u, fu), (w, fw) in combinations(zip(vertices, values), 2):
            if (fu < 0 < fw) or (fw < 0 < fu):
                t = fu / (fu - fw)
                kept.append(tuple(a + t * (b - a) for a, b in zip(u, w)))
    return convex_hull(kept, dim)


def intersect(first: Sequence[Point], second: Sequence[Point], dim: int) -> Tuple[Point, ...]:
    """Vertices of conv(first) ∩ conv(second); second must be full-dimensional."""
    result = tuple(first)
    for normal, offset in halfspaces(second, dim):
        result = clip(result, dim, normal, offset)
        if not result:
            break
    return result


def split(vertices: Sequence[Point], dim: int, row: Sequence) -> Tuple[Tuple[Point, ...], Tuple[Point, ...]]:
    """
    Cut a polytope along the zero set of h(x) = row[:dim]·x + row[dim].

    Returns the parts where h <= 0 and h >= 0; a part that is not
    full-dimensional comes back empty.
    """
    normal, constant = tuple(row[:dim]), row[dim]
    values = [dot(normal, v) + constant for v in vertices]
    if all(v >= 0 for v in values):
        return (), tuple(vertices)
    if all(v <= 0 for v in values):
        return tuple(vertices), ()
    negative = clip(vertices, dim, normal, -constant)
    positive = clip(vertices, dim, tuple(-a for a in normal), constant)
    if affine_dimension(negative) < dim:
        negative = ()
    if affine_dimension(positive) < dim:
        positive = ()
    return negative, positive


def volume(vertices: Sequence[Point], dim: int) -> Fraction:
    """Exact volume of a full-dimensional polytope given canonically."""
    if dim == 1:
        return vertices[-1][0] - vertices[0][0]
    if dim == 2:
        count = len(vertices)
        twice = sum(
            (vertices[i][0] * vertices[(i + 1) % count][1] - vertices[(i + 1) % count][0] * vertices[i][1]
             for i in range(count)),
            Fraction(0),
        )
        return abs(twice) / 2
    points = list(vertices)
    return sum((simplex_volume([points[i] for i in s]) for s in _triangulate(points)), Fraction(0))


def face_vertex_sets(vertices: Sequence[Point], dim: int) -> List[FrozenSet[int]]:
    """
    All non-empty faces of a full-dimensional polytope as index sets.

    The polytope itself is included. Every proper face is an intersection of
    facets, so the lattice is the closure of the facet sets under
    intersection.
    """
    count = len(vertices)
    whole = frozenset(range(count))
    if dim == 1:
        return [frozenset([0]), frozenset([count - 1]), whole]
    if dim == 2:
        faces = [frozenset([i]) for i in range(count)]
        faces += [frozenset([i, (i + 1) % count]) for i in range(count)]
        return faces + [whole]
    faces = set(_facet_sets(list(vertices)))
    frontier = set(faces)
    while frontier:
        new = set()
        for a in frontier:
            for b in faces:
                meet = a & b
                if meet and meet not in faces:
                    new.add(meet)
        faces |= new
        frontier = new
    return sorted(faces, key=lambda s: (len(s), sorted(s))) + [whole]


def first_containing(hs_list: Sequence[Sequence[Halfspace]], point: Sequence[Fraction]) -> Optional[int]:
    for index, hs in enumerate(hs_list):
        if contains(hs, point):
            return index
    return None
