"""
End-to-end tests reproducing the worked examples from vertex data to final answers.
"""

from fractions import Fraction as F

import pytest

from src.core.ratmath import primitive_homogeneous
from src.models.schemas import Orientation
from src.services.autmap import (
    apply,
    compose,
    from_combinatorial_iso,
    identity_map,
    interior_point,
    invert,
    jacobian_det,
    pullback,
    swap_generators,
    unit_fixing_report,
)
from src.services.dynamics import c1_profile, orbit, orbit_denominators, unit_orbit
from src.services.geometry import CoordinateChange, build_delta_sigma, interval_complex, rational_grid, xy_transform
from src.services.pwl import evaluate, generators, is_strong_unit, unit_value_spectrum
from tests.fixtures.sample_data import SQUARE_FIRST_MATRIX, matrix_rows


def farey_pieces(x: F) -> F:
    """The three displayed branches of the three-piece map."""
    if x <= F(1, 2):
        return x / (x + 1)
    if x <= F(2, 3):
        return (1 - x) / (4 - 5 * x)
    return (2 * x - 1) / x


def piece_samples(low: F, high: F, count: int = 100):
    return [low + (high - low) * F(k, count - 1) for k in range(count)]


class TestSquareAutomorphism:
    """Six-triangle automorphism of the square built from vertex data."""

    @pytest.mark.e2e
    def test_first_cell_and_generator_images(self, sample_data, gens3):
        # Step 1: build from the combinatorial isomorphism
        map, cert = from_combinatorial_iso(sample_data.square_iso())
        assert cert.orientation == Orientation.PRESERVING
        assert matrix_rows(map.matrices[0]) == SQUARE_FIRST_MATRIX

        # Step 2: the rows restricted to the first cell are f_1, f_2 and f♯
        p = interior_point(map, 0)
        x, y = p
        assert evaluate(pullback(map, gens3.x(1)), p) == 4 * x + y - 1
        assert evaluate(pullback(map, gens3.x(2)), p) == 2 * x + 2 * y - 1
        assert evaluate(pullback(map, gens3.unit), p) == 7 * x + 3 * y - 2

        # Step 3: the inner vertex moves and its denominator changes
        assert apply(map, (F(1, 3), F(1, 3))) == (F(1, 2), F(1, 4))
        assert jacobian_det(map, p) == F(45, 44) ** 3

    @pytest.mark.e2e
    def test_inverse_recovers_the_source(self, square):
        map, cert = square
        inverse = invert(map, cert)
        assert apply(inverse, (F(1, 2), F(1, 4))) == (F(1, 3), F(1, 3))
        assert apply(inverse, (F(1, 3), F(1, 3))) == (F(1, 5), F(2, 5))


class TestFareyAutomorphism:
    """Three-piece automorphism of [0,1] built from Farey vertex data."""

    @pytest.mark.e2e
    def test_pieces_match_displayed_formulas(self, farey):
        map, cert = farey
        assert cert.orientation == Orientation.PRESERVING
        for low, high in [(F(0), F(1, 2)), (F(1, 2), F(2, 3)), (F(2, 3), F(1))]:
            for x in piece_samples(low, high):
                assert apply(map, (x,)) == (farey_pieces(x),)

    @pytest.mark.e2e
    def test_derivatives_match_at_breakpoints(self, farey):
        profile = {d.point: (d.left, d.right) for d in c1_profile(*farey)}
        assert profile[F(1, 2)] == (F(4, 9), F(4, 9))
        assert profile[F(2, 3)] == (F(9, 4), F(9, 4))

    @pytest.mark.e2e
    def test_identity_derivatives(self, identity2):
        profile = c1_profile(identity2)
        assert [(d.left, d.right) for d in profile] == [(None, 1), (1, None)]

    @pytest.mark.e2e
    def test_orbit_denominators_grow(self, farey_map):
        record = orbit(farey_map, (F(1, 2),), 4)
        assert orbit_denominators(record) == [2, 3, 4, 5, 6]

    @pytest.mark.e2e
    def test_unit_fixing_witness(self, farey):
        report = unit_fixing_report(*farey, seed=0)
        assert not any(report.answers)
        assert report.witness == "den(1/2)=2 but den(S(1/2))=den(1/3)=3"


class TestUnitFixingEquivalence:
    """The five unit-fixing conditions agree on every certified map."""

    @pytest.mark.e2e
    @pytest.mark.parametrize("builder", [
        lambda: identity_map(2),
        lambda: identity_map(3),
        lambda: swap_generators(3, 1, 2),
        lambda: swap_generators(2, 1, 2),
    ])
    def test_unit_fixing_maps(self, builder):
        map = builder()
        report = unit_fixing_report(map, seed=0)
        assert all(report.answers)
        p = interior_point(map, 0)
        assert abs(jacobian_det(map, p)) == 1

    @pytest.mark.e2e
    def test_unit_fixing_maps_preserve_denominators(self):
        swap = swap_generators(3, 1, 2)
        for p in rational_grid(2, 7):
            assert primitive_homogeneous(apply(swap, p)).den == primitive_homogeneous(p).den


class TestFans:
    """Unimodular fans Δ and Σ and the homeomorphism between them."""

    @pytest.mark.e2e
    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_fan_construction(self, n):
        fans = build_delta_sigma(n)
        assert fans.delta.is_unimodular
        assert fans.sigma.is_unimodular
        for cone in fans.delta.cones:
            for j in range(n):
                u = cone.column(j)
                assert fans.phi_map(u) == xy_transform(u, CoordinateChange.Y_TO_X)


class TestUnitOrbitEvidence:
    """The orbit of the unit is infinite; the tent unit has no three-element quotient."""

    @pytest.mark.e2e
    def test_six_distinct_strong_units(self, farey):
        result = unit_orbit(*farey, steps=5)
        assert len(result.units) == 6
        assert result.distinct
        assert all(is_strong_unit(u).is_strong_unit for u in result.units)

    @pytest.mark.e2e
    def test_spectrum_against_brute_force(self, sample_data):
        tent = sample_data.tent_unit()
        bound = 12
        expected_tent, expected_unit = set(), set()
        # every reduced fraction with denominator at most the bound
        for den in range(1, bound + 1):
            for num in range(den + 1):
                x = F(num, den)
                if x.denominator != den:
                    continue
                expected_tent.add(int(min(x + 1, 2 - x) * den))
                expected_unit.add(den)
        assert unit_value_spectrum(tent, bound) == sorted(expected_tent)
        assert 2 not in expected_tent
        assert unit_value_spectrum(generators(2).unit, bound) == sorted(expected_unit)
        assert sorted(expected_unit) == list(range(1, 13))


class TestGroupLaw:
    """Composition with the inverse is the identity."""

    @pytest.mark.e2e
    def test_reflection_squares_to_identity(self, sample_data):
        map, _ = from_combinatorial_iso(sample_data.reflection_iso())
        twice = compose(map, map)
        for p in rational_grid(1, 100):
            assert apply(twice, p) == p

    @pytest.mark.e2e
    def test_inverse_of_farey_map(self, farey):
        map, cert = farey
        inverse = invert(map, cert)
        assert sorted(inverse.source.vertices) == sorted(interval_complex([0, F(1, 3), F(1, 2), 1]).vertices)
        for p in rational_grid(1, 100):
            assert apply(inverse, apply(map, p)) == p
