from pydantic import BaseModel, Field, ConfigDict, StringConstraints, model_validator
from typing import Annotated, Optional, List, Dict, Any, Literal
from enum import Enum


RationalStr = Annotated[str, StringConstraints(pattern=r"^-?\d+(/\d+)?$")]
IntegerStr = Annotated[str, StringConstraints(pattern=r"^-?\d+$")]


class Orientation(str, Enum):
    PRESERVING = "preserving"
    REVERSING = "reversing"
    MIXED = "mixed"


class OrbitMode(str, Enum):
    EXACT = "exact"
    FLOAT = "float"


class Regime(str, Enum):
    ERGODIC = "ergodic"
    DENSE = "dense, no a.c.i.m."
    ATTRACTED = "attracted to 0"


class PayloadKind(str, Enum):
    COMPLEX = "complex"
    FUNCTION = "function"
    ISO = "iso"
    MAP = "map"


# Payload Models

class ComplexPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    ambient_dim: int = Field(..., ge=1, description="Dimension n-1 of the cube")
    vertices: List[List[RationalStr]] = Field(..., min_length=1)
    top_cells: List[List[int]] = Field(..., min_length=1, description="Vertex ids per top cell")

    @model_validator(mode="after")
    def check_shape(self):
        for vertex in self.vertices:
            if len(vertex) != self.ambient_dim:
                raise ValueError(f"vertex {vertex} does not have {self.ambient_dim} coordinates")
        for cell in self.top_cells:
            if not cell:
                raise ValueError("empty top cell")
            if len(set(cell)) != len(cell):
                raise ValueError(f"repeated vertex id in cell {cell}")
            for vertex_id in cell:
                if vertex_id < 0 or vertex_id >= len(self.vertices):
                    raise ValueError(f"vertex id {vertex_id} out of range")
        return self


class FunctionPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    n: int = Field(..., ge=2)
    complex: ComplexPayload
    rows: List[List[IntegerStr]]

    @model_validator(mode="after")
    def check_rows(self):
        if self.complex.ambient_dim != self.n - 1:
            raise ValueError(f"complex dimension {self.complex.ambient_dim} does not match n={self.n}")
        if len(self.rows) != len(self.complex.top_cells):
            raise ValueError("one coefficient row per top cell is required")
        for row in self.rows:
            if len(row) != self.n:
                raise ValueError(f"row {row} must have {self.n} entries")
        return self


class IsoPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    source: ComplexPayload
    target: ComplexPayload
    vertex_map: List[int] = Field(..., description="vertex_map[i] is the target id of source vertex i")

    @model_validator(mode="after")
    def check_sizes(self):
        if len(self.vertex_map) != len(self.source.vertices):
            raise ValueError("vertex_map must list one target id per source vertex")
        return self


class CertificatePayload(BaseModel):
    det_per_cell: List[int]
    orientation: Orientation
    bijective: bool
    image_complex: ComplexPayload


class MapPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    n: int = Field(..., ge=2)
    source: ComplexPayload
    matrices: List[List[IntegerStr]] = Field(..., description="Row-major n×n matrix per top cell")
    images: Optional[List[FunctionPayload]] = None
    certificate: Optional[CertificatePayload] = None

    @model_validator(mode="after")
    def check_matrices(self):
        if self.source.ambient_dim != self.n - 1:
            raise ValueError(f"source dimension {self.source.ambient_dim} does not match n={self.n}")
        if len(self.matrices) != len(self.source.top_cells):
            raise ValueError("one matrix per top cell is required")
        for matrix in self.matrices:
            if len(matrix) != self.n * self.n:
                raise ValueError(f"matrix must have {self.n * self.n} entries")
        if self.images is not None and len(self.images) != self.n:
            raise ValueError(f"images must list {self.n} functions")
        return self


# Report Models

class Violation(BaseModel):
    kind: str
    message: str
    cells: List[int] = []


class ComplexDiagnostics(BaseModel):
    valid: bool
    violations: List[Violation] = []
    total_volume: str
    top_cell_count: int
    vertex_count: int


class ComplexReport(ComplexDiagnostics):
    unimodular: bool
    witness: Optional[str] = None


class FunctionReport(BaseModel):
    valid: bool
    n: int
    top_cell_count: int
    strong_unit: bool
    minimum: RationalStr


class IsoReport(BaseModel):
    valid: bool
    vertex_count: int
    top_cell_count: int


class AutomorphismReport(BaseModel):
    valid: bool
    problems: List[str] = []
    det_per_cell: List[int] = []
    orientation: Optional[Orientation] = None


class UnitFixingReport(BaseModel):
    unit_fixed: bool = Field(..., description="pullback of the unit is the unit")
    denominators_preserved_sample: bool
    denominators_preserved_vertices: bool
    last_rows_trivial: bool
    jacobian_unimodular: bool
    witness: Optional[str] = None
    sample_size: int
    seed: int

    @property
    def answers(self) -> List[bool]:
        return [
            self.unit_fixed,
            self.denominators_preserved_sample,
            self.denominators_preserved_vertices,
            self.last_rows_trivial,
            self.jacobian_unimodular,
        ]

    @property
    def all_agree(self) -> bool:
        return len(set(self.answers)) == 1


class SpectrumReport(BaseModel):
    bound: int
    values: List[int]
    admits_three_element_quotient: bool


class UnitOrbitReport(BaseModel):
    steps: int
    distinct: bool
    minima: List[str]
    units: List[FunctionPayload]


class HistogramSummary(BaseModel):
    bins: int
    total: int
    steps: int
    burn_in: int
    seed: int
    boundary_mass: float
    dirac_limit: bool


class RatioFamilyReport(BaseModel):
    a: int
    b: int
    q: RationalStr
    regime: Regime
    map: MapPayload


class FanReport(BaseModel):
    n: int
    cone_count: int
    delta: List[List[List[int]]]
    sigma: List[List[List[int]]]
    unimodular: bool
    cross_section_volume: RationalStr


class ErrorResponse(BaseModel):
    error: str
    error_code: str
    message: str
    details: Optional[Dict[str, Any]] = None
