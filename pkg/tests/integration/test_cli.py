"""
Integration tests for the command-line interface.
"""

import json

import pytest

from src.main import cli
from tests.fixtures.sample_data import write_raw


def invoke(runner, *args):
    return runner.invoke(cli, [str(a) for a in args])


def payload(result):
    return json.loads(result.stdout)


class TestValidateCommand:

    @pytest.mark.integration
    def test_certified_map(self, runner, payload_dir):
        result = invoke(runner, "validate", payload_dir / "farey_map.json")
        assert result.exit_code == 0
        report = payload(result)
        assert report["valid"] is True
        assert report["det_per_cell"] == [1, 1, 1]
        assert report["orientation"] == "preserving"

    @pytest.mark.integration
    def test_isomorphism(self, runner, payload_dir):
        report = payload(invoke(runner, "validate", payload_dir / "square_iso.json"))
        assert report == {"valid": True, "vertex_count": 6, "top_cell_count": 6}

    @pytest.mark.integration
    @pytest.mark.parametrize("name,strong,minimum", [
        ("unit.json", True, "1"),
        ("tent.json", True, "1"),
        ("x1.json", False, "0"),
    ])
    def test_functions(self, runner, payload_dir, name, strong, minimum):
        report = payload(invoke(runner, "validate", payload_dir / name))
        assert report["strong_unit"] is strong
        assert report["minimum"] == minimum

    @pytest.mark.integration
    def test_invalid_complex_exits_nonzero(self, runner, tmp_path):
        path = write_raw(tmp_path, "half.json", {"ambient_dim": 1, "vertices": [["0"], ["1/2"]], "top_cells": [[0, 1]]})
        result = invoke(runner, "validate", path)
        assert result.exit_code == 1
        report = payload(result)
        assert report["valid"] is False
        assert report["violations"][0]["kind"] == "coverage"

    @pytest.mark.integration
    def test_unimodular_complex(self, runner, tmp_path):
        path = write_raw(tmp_path, "farey.json", {
            "ambient_dim": 1, "vertices": [["0"], ["1/2"], ["2/3"], ["1"]], "top_cells": [[0, 1], [1, 2], [2, 3]],
        })
        report = payload(invoke(runner, "validate", "--kind", "complex", path))
        assert report["valid"] is True
        assert report["unimodular"] is True
        assert report["total_volume"] == "1"


class TestMapCommands:

    @pytest.mark.integration
    def test_build_aut(self, runner, payload_dir):
        result = invoke(runner, "build-aut", payload_dir / "farey_iso.json")
        assert result.exit_code == 0
        map = payload(result)
        assert map["matrices"] == [["1", "0", "1", "1"], ["-1", "1", "-5", "4"], ["2", "-1", "1", "0"]]
        assert map["certificate"]["det_per_cell"] == [1, 1, 1]

    @pytest.mark.integration
    def test_build_and_apply_square(self, runner, payload_dir):
        target = payload_dir / "square_map.json"
        assert invoke(runner, "build-aut", payload_dir / "square_iso.json", "-o", target).exit_code == 0
        result = invoke(runner, "apply", target, "-p", "1/3,1/3")
        assert result.stdout.strip() == "1/2,1/4"

    @pytest.mark.integration
    def test_apply(self, runner, payload_dir):
        result = invoke(runner, "apply", payload_dir / "farey_map.json", "--point", "1/2")
        assert result.exit_code == 0
        assert result.stdout.strip() == "1/3"

    @pytest.mark.integration
    def test_apply_outside_cube(self, runner, payload_dir):
        result = invoke(runner, "apply", payload_dir / "farey_map.json", "-p", "3/2")
        assert result.exit_code == 1
        error = payload(result)
        assert error["error"] == "OutOfDomain"
        assert error["error_code"] == "out_of_domain"

    @pytest.mark.integration
    def test_pullback(self, runner, payload_dir):
        result = invoke(runner, "pullback", payload_dir / "farey_map.json", payload_dir / "unit.json")
        assert result.exit_code == 0
        assert payload(result)["rows"] == [["1", "1"], ["-5", "4"], ["1", "0"]]

    @pytest.mark.integration
    def test_invert_then_apply(self, runner, payload_dir):
        target = payload_dir / "farey_inverse.json"
        assert invoke(runner, "invert", payload_dir / "farey_map.json", "-o", target).exit_code == 0
        assert invoke(runner, "apply", target, "-p", "1/3").stdout.strip() == "1/2"

    @pytest.mark.integration
    def test_compose_with_inverse(self, runner, payload_dir):
        inverse = payload_dir / "farey_inverse.json"
        invoke(runner, "invert", payload_dir / "farey_map.json", "-o", inverse)
        result = invoke(runner, "compose", payload_dir / "farey_map.json", inverse)
        assert result.exit_code == 0
        assert payload(result)["certificate"]["orientation"] == "preserving"
        composite = write_raw(payload_dir, "composite.json", result.stdout)
        for point in ["1/2", "2/3", "1/7"]:
            assert invoke(runner, "apply", composite, "-p", point).stdout.strip() == point

    @pytest.mark.integration
    def test_report(self, runner, payload_dir):
        result = invoke(runner, "report", payload_dir / "farey_map_bare.json", "--seed", 3)
        assert result.exit_code == 0
        report = payload(result)
        assert report["unit_fixed"] is False
        assert report["jacobian_unimodular"] is False
        assert report["witness"] == "den(1/2)=2 but den(S(1/2))=den(1/3)=3"
        assert report["seed"] == 3

    @pytest.mark.integration
    def test_report_identity(self, runner, payload_dir):
        report = payload(invoke(runner, "report", payload_dir / "identity_map.json", "--seed", 0, "--samples", 10))
        assert report["unit_fixed"] is True
        assert report["sample_size"] == 10
        assert "witness" not in report


class TestDynamicsCommands:

    @pytest.mark.integration
    def test_exact_orbit(self, runner, payload_dir):
        result = invoke(runner, "orbit", payload_dir / "farey_map.json", "-p", "1/2", "-N", 4)
        assert result.exit_code == 0
        assert result.stdout.splitlines() == ["step,coord_1", "0,1/2", "1,1/3", "2,1/4", "3,1/5", "4,1/6"]

    @pytest.mark.integration
    def test_orbit_to_file(self, runner, payload_dir):
        target = payload_dir / "orbit.csv"
        result = invoke(runner, "orbit", payload_dir / "farey_map.json", "--seed", 5, "-N", 3, "--mode", "float", "-o", target)
        assert result.exit_code == 0
        assert len(target.read_text().splitlines()) == 5

    @pytest.mark.integration
    def test_orbit_needs_a_start(self, runner, payload_dir):
        result = invoke(runner, "orbit", payload_dir / "farey_map.json", "-N", 3)
        assert result.exit_code == 2

    @pytest.mark.integration
    def test_histogram(self, runner, payload_dir):
        csv_path = payload_dir / "hist.csv"
        result = invoke(
            runner, "histogram", payload_dir / "identity_map.json", "--seed", 0, "-p", "7/20",
            "-N", 100, "--bins", 10, "--burn-in", 0, "-o", csv_path,
        )
        assert result.exit_code == 0
        summary = payload(result)
        assert summary["total"] == 101
        assert summary["dirac_limit"] is False
        assert "3,101" in csv_path.read_text().splitlines()

    @pytest.mark.integration
    def test_unit_orbit(self, runner, payload_dir):
        report = payload(invoke(runner, "unit-orbit", payload_dir / "farey_map.json", "-k", 3))
        assert report["distinct"] is True
        assert len(report["units"]) == 4

    @pytest.mark.integration
    def test_ratio_family(self, runner):
        report = payload(invoke(runner, "ratio-family", "-a", 9, "-b", 2))
        assert report["q"] == "9/2"
        assert report["regime"] == "attracted to 0"
        assert report["map"]["n"] == 2

    @pytest.mark.integration
    def test_ratio_family_rejects_zero(self, runner):
        assert invoke(runner, "ratio-family", "-a", 0, "-b", 2).exit_code == 2


class TestSpectrumAndFans:

    @pytest.mark.integration
    def test_unit_spectrum(self, runner, payload_dir):
        report = payload(invoke(runner, "spectrum", payload_dir / "unit.json", "-B", 3))
        assert report == {"bound": 3, "values": [1, 2, 3], "admits_three_element_quotient": True}

    @pytest.mark.integration
    def test_tent_spectrum(self, runner, payload_dir):
        report = payload(invoke(runner, "spectrum", payload_dir / "tent.json", "--bound", 12))
        assert 2 not in report["values"]
        assert report["admits_three_element_quotient"] is False

    @pytest.mark.integration
    def test_fan(self, runner):
        report = payload(invoke(runner, "fan", 3))
        assert report["cone_count"] == 2
        assert report["unimodular"] is True
        assert report["cross_section_volume"] == "1"

    @pytest.mark.integration
    def test_fan_too_large(self, runner):
        result = invoke(runner, "fan", 50)
        assert result.exit_code == 1
        assert payload(result)["error_code"] == "unsupported"


class TestPlotCommand:

    @pytest.mark.integration
    def test_map_graph_is_deterministic(self, runner, payload_dir):
        first, second = payload_dir / "first.svg", payload_dir / "second.svg"
        assert invoke(runner, "plot", payload_dir / "farey_map.json", "-o", first).exit_code == 0
        assert invoke(runner, "plot", payload_dir / "farey_map.json", "-o", second).exit_code == 0
        assert "<svg" in first.read_text()
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.integration
    def test_orbit_trace(self, runner, payload_dir):
        target = payload_dir / "orbit.svg"
        result = invoke(runner, "plot", payload_dir / "farey_map.json", "-o", target, "--orbit-from", "1/2", "-N", 10)
        assert result.exit_code == 0
        assert result.stdout.strip() == str(target)
        assert target.exists()


class TestGlobalOptions:

    @pytest.mark.integration
    def test_version(self, runner, test_settings):
        result = invoke(runner, "--version")
        assert result.exit_code == 0
        assert test_settings.app_version in result.stdout

    @pytest.mark.integration
    def test_missing_file(self, runner, tmp_path):
        assert invoke(runner, "apply", tmp_path / "absent.json", "-p", "1/2").exit_code == 2
