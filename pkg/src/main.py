"""
Command-line entry point.

Every command prints its artifact (JSON, CSV or a point) on stdout, logs on
stderr, and reports domain failures as an ``ErrorResponse`` with exit status 1.
Click usage errors exit with status 2.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from src.config.settings import settings
from src.core.exceptions import HoopError
from src.core.logging_config import configure_logging
from src.core.ratmath import format_point, format_rational, parse_point
from src.models.schemas import (
    AutomorphismReport,
    ComplexPayload,
    ComplexReport,
    ErrorResponse,
    FanReport,
    FunctionPayload,
    FunctionReport,
    IsoPayload,
    IsoReport,
    MapPayload,
    OrbitMode,
    RatioFamilyReport,
    SpectrumReport,
    UnitOrbitReport,
)
from src.services.autmap import (
    MapCertifier,
    apply,
    from_combinatorial_iso,
    pullback,
    validate_automorphism,
)
from src.services.dynamics import (
    DynamicsRunner,
    ratio_family_map,
    unit_orbit,
    write_histogram_csv,
    write_orbit_csv,
)
from src.services.geometry import build_delta_sigma, is_unimodular, validate_complex
from src.services.plotting import plot_map_graph, plot_orbit
from src.services.pwl import is_strong_unit, unit_value_spectrum
from src.services.serialization import (
    LoadedMap,
    complex_from_payload,
    detect_kind,
    dump_json,
    function_from_payload,
    function_to_payload,
    iso_from_payload,
    load_model,
    map_from_payload,
    map_to_payload,
    read_text,
)

logger = logging.getLogger(__name__)

INPUT = click.Path(exists=True, dir_okay=False, allow_dash=True)
OUTPUT = click.Path(dir_okay=False, writable=True)


class RationalPoint(click.ParamType):
    """Comma-separated exact coordinates such as ``1/3,1/2``."""

    name = "point"

    def convert(self, value, param, ctx):
        if isinstance(value, tuple):
            return value
        try:
            return parse_point(value)
        except HoopError as e:
            self.fail(e.message, param, ctx)


POINT = RationalPoint()


def _fail(response: ErrorResponse) -> None:
    click.echo(dump_json(response))
    click.get_current_context().exit(1)


def handle_domain_errors(func):
    """Turn domain and payload failures into an ErrorResponse on stdout, exit 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HoopError as e:
            logger.warning(f"{e.error_code}: {e.message}")
            _fail(ErrorResponse(**e.to_dict()))
        except ValidationError as e:
            errors = [{"loc": [str(part) for part in err["loc"]], "msg": err["msg"]} for err in e.errors()]
            logger.warning(f"Rejected payload: {len(errors)} schema error(s)")
            _fail(ErrorResponse(
                error="ValidationError",
                error_code="invalid_payload",
                message=errors[0]["msg"] if errors else str(e),
                details={"errors": errors},
            ))

    return wrapper


def _load_map(path: str) -> LoadedMap:
    return map_from_payload(load_model(path, MapPayload))


def _write_or_echo(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
        logger.info(f"Wrote {output}")
    else:
        click.echo(text)


@click.group()
@click.version_option(version=settings.app_version, prog_name=settings.app_name)
@click.option("--log-level", default=None, help="Override LOG_LEVEL.")
@click.option("--log-format", type=click.Choice(["console", "json"]), default=None, help="Override LOG_FORMAT.")
def cli(log_level: Optional[str], log_format: Optional[str]):
    """Automorphisms of free cancellative hoops as piecewise SL_n(Z) maps."""
    configure_logging(log_level, log_format)
    logger.debug(f"{settings.app_name} {settings.app_version} ({settings.environment})")


@cli.command()
@click.argument("path", type=INPUT)
@click.option("--kind", type=click.Choice(["auto", "complex", "function", "iso", "map"]), default="auto")
@handle_domain_errors
def validate(path: str, kind: str):
    """Validate a complex, function, isomorphism or map payload."""
    text = read_text(path)
    kind = detect_kind(text) if kind == "auto" else kind

    if kind == "complex":
        complex = complex_from_payload(ComplexPayload.model_validate_json(text), validate=False)
        diagnostics = validate_complex(complex)
        check = is_unimodular(complex) if diagnostics.valid else None
        report = ComplexReport(
            **diagnostics.model_dump(),
            unimodular=bool(check and check.unimodular),
            witness=check.witness if check else None,
        )
        click.echo(dump_json(report))
        if not report.valid:
            click.get_current_context().exit(1)
    elif kind == "function":
        f = function_from_payload(FunctionPayload.model_validate_json(text))
        check = is_strong_unit(f)
        click.echo(dump_json(FunctionReport(
            valid=True,
            n=f.n,
            top_cell_count=len(f.complex),
            strong_unit=check.is_strong_unit,
            minimum=format_rational(check.minimum),
        )))
    elif kind == "iso":
        iso = iso_from_payload(IsoPayload.model_validate_json(text))
        click.echo(dump_json(IsoReport(
            valid=True, vertex_count=len(iso.vertex_map), top_cell_count=len(iso.source),
        )))
    else:
        loaded = map_from_payload(MapPayload.model_validate_json(text))
        validation = validate_automorphism(loaded.map)
        certificate = validation.certificate
        click.echo(dump_json(AutomorphismReport(
            valid=validation.valid,
            problems=list(validation.problems),
            det_per_cell=list(loaded.map.dets),
            orientation=certificate.orientation if certificate else None,
        )))


@cli.command("build-aut")
@click.argument("iso_path", type=INPUT)
@click.option("--output", "-o", type=OUTPUT, default=None, help="Write the map here instead of stdout.")
@handle_domain_errors
def build_aut(iso_path: str, output: Optional[str]):
    """Build a certified automorphism from a combinatorial isomorphism."""
    iso = iso_from_payload(load_model(iso_path, IsoPayload))
    map, cert = from_combinatorial_iso(iso)
    _write_or_echo(dump_json(map_to_payload(map, cert)), output)


@cli.command("apply")
@click.argument("map_path", type=INPUT)
@click.option("--point", "-p", type=POINT, required=True)
@handle_domain_errors
def apply_command(map_path: str, point):
    """Print S(p) exactly."""
    loaded = _load_map(map_path)
    click.echo(format_point(apply(loaded.map, point)))


@cli.command("pullback")
@click.argument("map_path", type=INPUT)
@click.argument("function_path", type=INPUT)
@click.option("--output", "-o", type=OUTPUT, default=None)
@handle_domain_errors
def pullback_command(map_path: str, function_path: str, output: Optional[str]):
    """Print σ(f) = f♯·(f∘S) as a function payload."""
    loaded = _load_map(map_path)
    f = function_from_payload(load_model(function_path, FunctionPayload))
    _write_or_echo(dump_json(function_to_payload(pullback(loaded.map, f))), output)


@cli.command("compose")
@click.argument("first_path", type=INPUT)
@click.argument("second_path", type=INPUT)
@click.option("--output", "-o", type=OUTPUT, default=None)
@handle_domain_errors
def compose_command(first_path: str, second_path: str, output: Optional[str]):
    """Print the certified map p ↦ SECOND(FIRST(p))."""
    certifier = MapCertifier()
    first, second = _load_map(first_path), _load_map(second_path)
    certifier.certify(first.map, first.cert)
    certifier.certify(second.map, second.cert)
    composite = certifier.compose(first.map, second.map)
    _write_or_echo(dump_json(map_to_payload(composite, certifier.certify(composite))), output)


@cli.command("invert")
@click.argument("map_path", type=INPUT)
@click.option("--output", "-o", type=OUTPUT, default=None)
@handle_domain_errors
def invert_command(map_path: str, output: Optional[str]):
    """Print the certified inverse automorphism."""
    certifier = MapCertifier()
    loaded = _load_map(map_path)
    inverse = certifier.inverse(loaded.map, loaded.cert)
    _write_or_echo(dump_json(map_to_payload(inverse, certifier.certify(inverse))), output)


@cli.command()
@click.argument("map_path", type=INPUT)
@click.option("--seed", type=int, required=True)
@click.option("--samples", type=click.IntRange(min=1), default=None, help="Sample size for the denominator check.")
@handle_domain_errors
def report(map_path: str, seed: int, samples: Optional[int]):
    """Evaluate the five unit-fixing conditions."""
    loaded = _load_map(map_path)
    certifier = MapCertifier(sample_size=samples, seed=seed)
    click.echo(dump_json(certifier.report(loaded.map, loaded.cert)))


@cli.command("orbit")
@click.argument("map_path", type=INPUT)
@click.option("--point", "-p", type=POINT, default=None)
@click.option("--seed", type=int, default=None, help="Random start when no point is given.")
@click.option("--steps", "-N", type=click.IntRange(min=0), default=100)
@click.option("--mode", type=click.Choice([m.value for m in OrbitMode]), default=OrbitMode.EXACT.value)
@click.option("--output", "-o", type=OUTPUT, default=None, help="CSV path; stdout when omitted.")
@handle_domain_errors
def orbit_command(map_path: str, point, seed: Optional[int], steps: int, mode: str, output: Optional[str]):
    """Iterate the map and emit the orbit as CSV."""
    if point is None and seed is None:
        raise click.UsageError("Give --point or --seed")
    runner = DynamicsRunner(_load_map(map_path).map)
    record = runner.orbit(point, steps, OrbitMode(mode), seed)
    write_orbit_csv(record, output or sys.stdout)


@cli.command()
@click.argument("map_path", type=INPUT)
@click.option("--seed", type=int, required=True)
@click.option("--point", "-p", type=POINT, default=None, help="Start point; random from the seed when omitted.")
@click.option("--steps", "-N", type=click.IntRange(min=1), default=None)
@click.option("--bins", type=click.IntRange(min=1), default=None)
@click.option("--burn-in", type=click.IntRange(min=0), default=None)
@click.option("--output", "-o", type=OUTPUT, default=None, help="Histogram CSV path.")
@handle_domain_errors
def histogram(map_path, seed, point, steps, bins, burn_in, output):
    """Birkhoff histogram of one float orbit."""
    runner = DynamicsRunner(_load_map(map_path).map, steps, bins, burn_in)
    measure = runner.histogram(seed, point)
    if output:
        write_histogram_csv(measure, output)
    click.echo(dump_json(runner.summarize(measure, seed)))


@cli.command("unit-orbit")
@click.argument("map_path", type=INPUT)
@click.option("-k", "steps", type=click.IntRange(min=0), default=5)
@handle_domain_errors
def unit_orbit_command(map_path: str, steps: int):
    """Iterated pullbacks of the unit and whether they are pairwise distinct."""
    loaded = _load_map(map_path)
    result = unit_orbit(loaded.map, loaded.cert, steps)
    click.echo(dump_json(UnitOrbitReport(
        steps=steps,
        distinct=result.distinct,
        minima=[format_rational(m) for m in result.minima],
        units=[function_to_payload(u) for u in result.units],
    )))


@cli.command()
@click.argument("function_path", type=INPUT)
@click.option("--bound", "-B", type=click.IntRange(min=1), required=True)
@handle_domain_errors
def spectrum(function_path: str, bound: int):
    """Values g(p)·den(p) over rational points with den(p) <= B."""
    g = function_from_payload(load_model(function_path, FunctionPayload))
    values = unit_value_spectrum(g, bound)
    click.echo(dump_json(SpectrumReport(bound=bound, values=values, admits_three_element_quotient=2 in values)))


@cli.command()
@click.argument("map_path", type=INPUT)
@click.option("--output", "-o", type=OUTPUT, required=True, help="SVG path.")
@click.option("--orbit-from", type=POINT, default=None, help="Plot the orbit trace from this point instead.")
@click.option("--steps", "-N", type=click.IntRange(min=0), default=100)
@click.option("--mode", type=click.Choice([m.value for m in OrbitMode]), default=OrbitMode.FLOAT.value)
@handle_domain_errors
def plot(map_path: str, output: str, orbit_from, steps: int, mode: str):
    """Render the map graph, or an orbit trace, as SVG."""
    loaded = _load_map(map_path)
    if orbit_from is not None:
        plot_orbit(DynamicsRunner(loaded.map).orbit(orbit_from, steps, OrbitMode(mode)), output)
    else:
        plot_map_graph(loaded.map, output)
    click.echo(output)


@cli.command("ratio-family")
@click.option("-a", type=click.IntRange(min=1), required=True)
@click.option("-b", type=click.IntRange(min=1), required=True)
@click.option("--output", "-o", type=OUTPUT, default=None)
@handle_domain_errors
def ratio_family(a: int, b: int, output: Optional[str]):
    """Dual map of the ratio family for q = a/b, with its regime label."""
    family = ratio_family_map(a, b)
    _write_or_echo(dump_json(RatioFamilyReport(
        a=a, b=b, q=format_rational(family.q), regime=family.regime, map=map_to_payload(family.map),
    )), output)


@cli.command()
@click.argument("n", type=int)
@handle_domain_errors
def fan(n: int):
    """Summary of the unimodular fans Δ and Σ for n generators."""
    fans = build_delta_sigma(n)
    click.echo(dump_json(FanReport(
        n=n,
        cone_count=len(fans.permutations),
        delta=[[list(row) for row in cone.to_rows()] for cone in fans.delta.cones],
        sigma=[[list(row) for row in cone.to_rows()] for cone in fans.sigma.cones],
        unimodular=fans.delta.is_unimodular and fans.sigma.is_unimodular,
        cross_section_volume=format_rational(fans.delta.cross_section_volume()),
    )))


def main():
    cli()


if __name__ == "__main__":
    main()
