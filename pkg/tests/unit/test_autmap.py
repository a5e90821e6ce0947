"""
Unit tests for dual maps, automorphism certificates and pullbacks.
"""

from fractions import Fraction as F

import pytest

from src.core.exceptions import (
    InvalidFunction,
    InvalidInput,
    MixedOrientation,
    NonPositiveDenominator,
    NotAutomorphism,
    OnBoundary,
    OutOfDomain,
    TrivialEndomorphism,
)
from src.core.ratmath import IntMatrix, primitive_homogeneous
from src.models.schemas import Orientation
from src.services.autmap import (
    MapCertifier,
    PiecewiseFractionalMap,
    agree_on,
    apply,
    apply_homogeneous,
    certify,
    check_images,
    check_well_defined,
    compose,
    from_combinatorial_iso,
    from_generator_images,
    identity_map,
    interior_point,
    invert,
    jacobian_det,
    jacobian_is_unimodular,
    orientation,
    pullback,
    random_cell_points,
    swap_generators,
    unit_fixing_report,
    validate_automorphism,
)
from src.services.dynamics import random_farey_automorphism
from src.services.geometry import containing_cells, cube_complex, interval_complex, rational_grid
from src.services.polytope import in_interior
from src.services.pwl import PWLFunction, equals, generators, is_strong_unit, subtract
from tests.fixtures.sample_data import FAREY_MATRICES, SQUARE_FIRST_MATRIX, matrix_rows

GRID = rational_grid(1, 100)


def two_cell_map(first, second) -> PiecewiseFractionalMap:
    return PiecewiseFractionalMap(
        2,
        interval_complex([0, F(1, 2), 1]),
        (IntMatrix.from_rows(first), IntMatrix.from_rows(second)),
    )


class TestConstruction:

    @pytest.mark.unit
    def test_farey_matrices(self, farey):
        map, cert = farey
        assert tuple(matrix_rows(m) for m in map.matrices) == FAREY_MATRICES
        assert cert.det_per_cell == (1, 1, 1)
        assert cert.orientation == Orientation.PRESERVING
        assert cert.bijective

    @pytest.mark.unit
    def test_square_first_cell(self, square):
        map, cert = square
        assert matrix_rows(map.matrices[0]) == SQUARE_FIRST_MATRIX
        assert cert.det_per_cell == (1,) * 6
        assert map.orientation == Orientation.PRESERVING

    @pytest.mark.unit
    def test_square_target_vertices_are_reproduced(self, sample_data, square_map):
        iso = sample_data.square_iso()
        for v, point in enumerate(iso.source.vertices):
            assert apply(square_map, point) == iso.target.vertices[iso.vertex_map[v]]

    @pytest.mark.unit
    def test_reflection_reverses_orientation(self, sample_data):
        map, cert = from_combinatorial_iso(sample_data.reflection_iso())
        assert cert.orientation == Orientation.REVERSING
        assert all(matrix_rows(m) == ((-1, 1), (0, 1)) for m in map.matrices)
        assert apply(map, (F(1, 3),)) == (F(2, 3),)

    @pytest.mark.unit
    def test_from_generator_images_identity(self, gens3):
        map = from_generator_images(gens3.all)
        assert agree_on(map, identity_map(3), rational_grid(2, 7))
        assert map.images == gens3.all

    @pytest.mark.unit
    def test_from_generator_images_rejects_trivial(self, gens2):
        with pytest.raises(TrivialEndomorphism):
            from_generator_images([gens2.x(1), PWLFunction.zero(2)])

    @pytest.mark.unit
    def test_from_generator_images_rejects_negative(self, gens2):
        with pytest.raises(InvalidFunction):
            from_generator_images([subtract(gens2.x(1), gens2.unit), gens2.unit])


class TestApply:

    @pytest.mark.unit
    def test_farey_points(self, farey_map):
        assert apply(farey_map, (F(1, 2),)) == (F(1, 3),)
        assert farey_map(farey_map((F(1, 2),))) == (F(1, 4),)
        assert apply_homogeneous(farey_map, (F(1, 2),)) == (1, 3)

    @pytest.mark.unit
    def test_square_inner_vertex(self, square_map):
        assert apply(square_map, (F(1, 3), F(1, 3))) == (F(1, 2), F(1, 4))

    @pytest.mark.unit
    def test_identity(self, identity2):
        for p in GRID[:10]:
            assert apply(identity2, p) == p

    @pytest.mark.unit
    def test_outside_cube(self, farey_map):
        with pytest.raises(OutOfDomain):
            apply(farey_map, (F(3, 2),))

    @pytest.mark.unit
    def test_non_positive_denominator(self):
        bad = PiecewiseFractionalMap(2, cube_complex(1), (IntMatrix.from_rows([[1, 0], [-2, 1]]),))
        with pytest.raises(NonPositiveDenominator):
            apply(bad, (F(1),))


class TestValidation:

    @pytest.mark.unit
    def test_scaling_matrix_is_not_an_automorphism(self):
        map = PiecewiseFractionalMap(2, cube_complex(1), (IntMatrix.from_rows([[2, 0], [0, 1]]),))
        validation = validate_automorphism(map)
        assert not validation.valid
        assert validation.certificate is None
        assert "determinant 2" in validation.problems[0]
        with pytest.raises(NotAutomorphism):
            certify(map)

    @pytest.mark.unit
    def test_disagreeing_cells(self):
        map = two_cell_map([[1, 0], [0, 1]], [[1, 0], [0, 2]])
        problems = check_well_defined(map)
        assert len(problems) == 1
        assert "cells 0 and 1" in problems[0]

    @pytest.mark.unit
    def test_negative_last_coordinate(self):
        map = PiecewiseFractionalMap(2, cube_complex(1), (IntMatrix.from_rows([[1, 0], [-2, 1]]),))
        assert "last coordinate -1" in check_well_defined(map)[0]

    @pytest.mark.unit
    def test_mixed_orientation(self):
        map = two_cell_map([[1, 0], [0, 1]], [[-1, 1], [0, 1]])
        with pytest.raises(MixedOrientation):
            orientation(map)
        assert not validate_automorphism(map).valid


class TestGroupStructure:

    @pytest.mark.unit
    def test_compose_with_identity(self, farey_map, identity2):
        assert agree_on(compose(identity2, farey_map), farey_map, GRID)
        assert agree_on(compose(farey_map, identity2), farey_map, GRID)

    @pytest.mark.unit
    def test_inverse(self, farey):
        map, cert = farey
        inverse = invert(map, cert)
        assert sorted(v[0] for v in inverse.source.vertices) == [F(0), F(1, 3), F(1, 2), F(1)]
        assert agree_on(compose(map, inverse), identity_map(2), GRID)
        assert agree_on(compose(inverse, map), identity_map(2), GRID)

    @pytest.mark.unit
    def test_square_inverse(self, square):
        map, cert = square
        grid = rational_grid(2, 6)
        assert agree_on(compose(map, invert(map, cert)), identity_map(3), grid)

    @pytest.mark.unit
    def test_swap_in_three_generators(self):
        swap = swap_generators(3, 1, 2)
        assert len(swap.source) == 1
        assert matrix_rows(swap.matrices[0]) == ((0, 1, 0), (1, 0, 0), (0, 0, 1))
        assert swap.orientation == Orientation.REVERSING
        assert apply(swap, (F(1, 4), F(1, 2))) == (F(1, 2), F(1, 4))

    @pytest.mark.unit
    def test_swap_with_last_generator(self):
        swap = swap_generators(2, 1, 2)
        assert apply(swap, (F(1, 4),)) == (F(3, 4),)
        assert certify(swap).orientation == Orientation.REVERSING

    @pytest.mark.unit
    def test_swap_index_bounds(self):
        with pytest.raises(InvalidInput):
            swap_generators(3, 0, 4)


class TestPullback:

    @pytest.mark.unit
    def test_pullback_of_unit_is_f_sharp(self, farey_map, gens2, sample_data):
        assert equals(pullback(farey_map, gens2.unit), sample_data.farey_sharp())

    @pytest.mark.unit
    def test_pullback_of_first_generator(self, farey_map, gens2):
        expected = PWLFunction(2, interval_complex([0, F(1, 2), F(2, 3), 1]), ((1, 0), (-1, 1), (2, -1)))
        assert equals(pullback(farey_map, gens2.x(1)), expected)

    @pytest.mark.unit
    def test_pullback_through_identity(self, identity2, sample_data):
        tent = sample_data.tent_unit()
        assert equals(pullback(identity2, tent), tent)

    @pytest.mark.unit
    def test_pullback_preserves_strong_units(self, farey_map, square_map, sample_data, gens3):
        assert is_strong_unit(pullback(farey_map, sample_data.tent_unit())).is_strong_unit
        assert is_strong_unit(pullback(square_map, gens3.unit)).is_strong_unit

    @pytest.mark.unit
    def test_pullback_is_injective(self, farey_map, identity2, gens2):
        assert not equals(pullback(farey_map, gens2.unit), pullback(identity2, gens2.unit))


class TestJacobian:

    @pytest.mark.unit
    def test_identity(self, identity2):
        assert jacobian_det(identity2, (F(1, 2),)) == 1
        with pytest.raises(OnBoundary):
            jacobian_det(identity2, (F(0),))

    @pytest.mark.unit
    def test_farey(self, farey_map):
        assert jacobian_det(farey_map, (F(1, 4),)) == F(16, 25)
        with pytest.raises(OnBoundary):
            jacobian_det(farey_map, (F(1, 2),))
        assert not jacobian_is_unimodular(farey_map)

    @pytest.mark.unit
    def test_square_first_cell(self, square_map):
        p = interior_point(square_map, 0)
        assert p == (F(8, 45), F(26, 45))
        assert jacobian_det(square_map, p) == (F(45, 44)) ** 3

    @pytest.mark.unit
    def test_reversing_swap(self):
        assert jacobian_det(swap_generators(3, 1, 2), (F(1, 5), F(1, 3))) == -1


class TestUnitFixing:

    @pytest.mark.unit
    def test_identity(self, identity2):
        report = unit_fixing_report(identity2, seed=1)
        assert report.answers == [True] * 5
        assert report.witness is None

    @pytest.mark.unit
    def test_farey_map_moves_denominators(self, farey):
        report = unit_fixing_report(*farey, seed=3)
        assert report.answers == [False] * 5
        assert report.witness == "den(1/2)=2 but den(S(1/2))=den(1/3)=3"

    @pytest.mark.unit
    def test_square_map(self, square):
        report = unit_fixing_report(*square, sample_size=30, seed=0)
        assert report.answers == [False] * 5
        assert report.witness == "den(1/3,1/3)=3 but den(S(1/3,1/3))=den(1/2,1/4)=4"

    @pytest.mark.unit
    def test_swap(self):
        report = unit_fixing_report(swap_generators(3, 1, 2), seed=0)
        assert report.all_agree
        assert report.last_rows_trivial

    @pytest.mark.unit
    def test_sample_points_are_interior(self, farey_map):
        points = random_cell_points(farey_map, 12, seed=5)
        assert len(points) == 12
        for p in points:
            assert any(in_interior(hs, p) for hs in farey_map.source.halfspace_table)
        assert points == random_cell_points(farey_map, 12, seed=5)


class TestRandomAutomorphismLaws:
    """Laws every certified map satisfies, checked on seeded random Farey automorphisms."""

    @pytest.fixture
    def random_maps(self, rng, square):
        maps = [random_farey_automorphism(rng).map for _ in range(20)]
        return maps + [square[0]]

    @pytest.mark.unit
    def test_denominator_transport(self, sample_data, rng, random_maps):
        for map in random_maps:
            for p in sample_data.random_rationals(rng, 25, map.n - 1):
                image = apply_homogeneous(map, p)
                assert primitive_homogeneous(apply(map, p)).coords == image
                assert image[-1] > 0

    @pytest.mark.unit
    def test_matrices_agree_on_shared_faces(self, sample_data, rng, random_maps):
        for map in random_maps:
            for p in sample_data.shared_face_points(rng, map.source):
                images = set()
                for cell_id in containing_cells(map.source, p):
                    vector = map.matrices[cell_id].apply(tuple(p) + (F(1),))
                    images.add(tuple(x / vector[-1] for x in vector[:-1]))
                assert len(images) == 1

    @pytest.mark.unit
    def test_pullback_keeps_the_unit_strong(self, random_maps):
        for map in random_maps:
            assert is_strong_unit(pullback(map, generators(map.n).unit)).is_strong_unit


class TestStoredImages:

    @pytest.mark.unit
    def test_images_agree_with_matrices(self, farey_map, gens2):
        images = [pullback(farey_map, x) for x in gens2.all]
        map = from_generator_images(images)
        assert check_images(map) == []
        assert check_images(farey_map) == []

    @pytest.mark.unit
    def test_images_of_a_different_map(self, farey_map, gens2):
        images = tuple(pullback(farey_map, x) for x in gens2.all)
        mismatched = PiecewiseFractionalMap(2, cube_complex(1), (IntMatrix.identity(2),), images)
        problems = check_images(mismatched)
        assert problems
        assert all(problem.startswith("cell ") for problem in problems)

    @pytest.mark.unit
    def test_images_that_define_no_map(self, gens2):
        negative = PWLFunction(2, cube_complex(1), ((-1, 0),))
        broken = PiecewiseFractionalMap(2, cube_complex(1), (IntMatrix.identity(2),), (negative, gens2.x(2)))
        assert check_images(broken)[0].startswith("images do not define a dual map")


class TestMapCertifier:

    @pytest.mark.unit
    def test_defaults_come_from_settings(self, test_settings):
        certifier = MapCertifier()
        assert certifier.sample_size == test_settings.report_sample_size
        assert certifier.seed == test_settings.default_seed

    @pytest.mark.unit
    def test_certificate_is_reused(self, farey):
        map, cert = farey
        certifier = MapCertifier()
        assert certifier.certify(map, cert) is cert
        assert certifier.certify(map) is cert
        fresh = certifier.certify(identity_map(2))
        assert fresh.bijective
        assert certifier.certify(identity_map(2)) is not fresh

    @pytest.mark.unit
    def test_report_matches_free_function(self, square):
        certifier = MapCertifier(sample_size=30, seed=0)
        assert certifier.report(*square) == unit_fixing_report(*square, sample_size=30, seed=0)
        assert certifier.report(square[0], seed=4).seed == 4

    @pytest.mark.unit
    def test_inverse_and_compose(self, farey):
        map, cert = farey
        certifier = MapCertifier()
        inverse = certifier.inverse(map, cert)
        assert certifier.certify(inverse).bijective
        assert agree_on(certifier.compose(map, inverse), identity_map(2), GRID)
        assert agree_on(certifier.compose(inverse, map), identity_map(2), GRID)

    @pytest.mark.unit
    def test_rejects_non_automorphisms(self):
        scaling = PiecewiseFractionalMap(2, cube_complex(1), (IntMatrix.from_rows([[2, 0], [0, 1]]),))
        certifier = MapCertifier()
        with pytest.raises(NotAutomorphism):
            certifier.report(scaling)
        with pytest.raises(NotAutomorphism):
            certifier.compose(identity_map(2), scaling)
