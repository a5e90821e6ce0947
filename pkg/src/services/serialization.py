"""
JSON payloads <-> domain objects.

Every loader runs the owning module's validator; nothing read from a file is
trusted as-is.
"""

import json
import logging
import sys
from pathlib import Path
from typing import NamedTuple, Optional, Type, TypeVar, Union

from pydantic import BaseModel

from src.core.exceptions import (
    InvalidComplex,
    InvalidFunction,
    InvalidInput,
    NotAutomorphism,
)
from src.core.ratmath import IntMatrix, format_rational, parse_integer, parse_rational
from src.models.schemas import (
    CertificatePayload,
    ComplexPayload,
    FunctionPayload,
    IsoPayload,
    MapPayload,
)
from src.services.autmap import (
    AutomorphismCert,
    PiecewiseFractionalMap,
    check_images,
    check_well_defined,
    validate_automorphism,
)
from src.services.geometry import CellularComplex, CombinatorialIso, validate_complex
from src.services.pwl import PWLFunction, check_continuity

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


def read_text(source: Union[str, Path]) -> str:
    """File contents, or standard input for ``-``."""
    if str(source) == "-":
        return sys.stdin.read()
    return Path(source).read_text(encoding="utf-8")


def load_model(source: Union[str, Path], model: Type[ModelT]) -> ModelT:
    return model.model_validate_json(read_text(source))


def detect_kind(text: str) -> str:
    """Guess the payload kind from the top-level keys of a JSON document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInput(f"Not valid JSON: {e}")
    if not isinstance(data, dict):
        raise InvalidInput("Payload must be a JSON object")
    if "matrices" in data:
        return "map"
    if "vertex_map" in data:
        return "iso"
    if "rows" in data:
        return "function"
    return "complex"


def dump_json(model: BaseModel) -> str:
    return model.model_dump_json(indent=2, exclude_none=True)


# Complexes

def complex_to_payload(complex: CellularComplex) -> ComplexPayload:
    return ComplexPayload(
        ambient_dim=complex.ambient_dim,
        vertices=[[format_rational(x) for x in vertex] for vertex in complex.vertices],
        top_cells=[list(ids) for ids in complex.top_cells],
    )


def complex_from_payload(payload: ComplexPayload, validate: bool = True) -> CellularComplex:
    complex = CellularComplex(
        ambient_dim=payload.ambient_dim,
        vertices=tuple(tuple(parse_rational(x) for x in vertex) for vertex in payload.vertices),
        top_cells=tuple(tuple(ids) for ids in payload.top_cells),
    )
    if validate:
        diagnostics = validate_complex(complex)
        if not diagnostics.valid:
            raise InvalidComplex(
                diagnostics.violations[0].message,
                details={"violations": [v.model_dump() for v in diagnostics.violations]},
            )
    return complex


# Functions

def function_to_payload(f: PWLFunction) -> FunctionPayload:
    return FunctionPayload(
        n=f.n,
        complex=complex_to_payload(f.complex),
        rows=[[str(a) for a in row] for row in f.rows],
    )


def function_from_payload(payload: FunctionPayload) -> PWLFunction:
    complex = complex_from_payload(payload.complex)
    f = PWLFunction(payload.n, complex, tuple(tuple(parse_integer(a) for a in row) for row in payload.rows))
    problems = check_continuity(f)
    if problems:
        raise InvalidFunction(problems[0], details={"problems": problems})
    return f


# Isomorphisms

def iso_to_payload(iso: CombinatorialIso) -> IsoPayload:
    return IsoPayload(
        source=complex_to_payload(iso.source),
        target=complex_to_payload(iso.target),
        vertex_map=list(iso.vertex_map),
    )


def iso_from_payload(payload: IsoPayload) -> CombinatorialIso:
    iso = CombinatorialIso(
        complex_from_payload(payload.source, validate=False),
        complex_from_payload(payload.target, validate=False),
        tuple(payload.vertex_map),
    )
    return iso.validate()


# Maps

class LoadedMap(NamedTuple):
    map: PiecewiseFractionalMap
    cert: Optional[AutomorphismCert]


def cert_to_payload(cert: AutomorphismCert) -> CertificatePayload:
    return CertificatePayload(
        det_per_cell=list(cert.det_per_cell),
        orientation=cert.orientation,
        bijective=cert.bijective,
        image_complex=complex_to_payload(cert.image_complex),
    )


def map_to_payload(map: PiecewiseFractionalMap, cert: Optional[AutomorphismCert] = None) -> MapPayload:
    return MapPayload(
        n=map.n,
        source=complex_to_payload(map.source),
        matrices=[[str(x) for x in matrix.entries] for matrix in map.matrices],
        images=[function_to_payload(f) for f in map.images] if map.images else None,
        certificate=cert_to_payload(cert) if cert else None,
    )


def map_from_payload(payload: MapPayload) -> LoadedMap:
    """
    Rebuild a map and, when the payload carries a certificate, re-certify it.

    Raises:
        InvalidInput: the matrices do not define a continuous dual map, or stored
            generator images define a different one
        NotAutomorphism: a stored certificate does not survive revalidation
    """
    n = payload.n
    matrices = tuple(
        IntMatrix(n, n, tuple(parse_integer(x) for x in entries)) for entries in payload.matrices
    )
    images = tuple(function_from_payload(f) for f in payload.images) if payload.images else None
    map = PiecewiseFractionalMap(n, complex_from_payload(payload.source), matrices, images)
    problems = check_well_defined(map)
    if problems:
        raise InvalidInput(f"Map is not well defined: {problems[0]}", details={"problems": problems})
    mismatches = check_images(map)
    if mismatches:
        raise InvalidInput(
            f"Generator images disagree with the matrices: {mismatches[0]}", details={"problems": mismatches}
        )

    cert = None
    if payload.certificate is not None:
        validation = validate_automorphism(map)
        if not validation.valid:
            raise NotAutomorphism(validation.problems[0], details={"problems": list(validation.problems)})
        cert = validation.certificate
        if list(cert.det_per_cell) != payload.certificate.det_per_cell:
            raise NotAutomorphism("Stored determinants do not match the matrices")
        if cert.orientation != payload.certificate.orientation:
            raise NotAutomorphism("Stored orientation does not match the matrices")
    logger.debug(f"Loaded map with {len(matrices)} cells, certified: {cert is not None}")
    return LoadedMap(map, cert)
