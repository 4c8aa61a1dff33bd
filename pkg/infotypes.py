"""

This module defines the typing system for results passed between the
numerical modules and written to JSON reports.

Each operation that leaves the library (fiber averages, minimality reports,
convergence studies, gallery expectations) returns one of these models, so
that the CLI and the gallery can serialize them the same way and a reader
of a report knows what every field means.

"""

import json
from typing import Any, ClassVar, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

Number = Union[float, List[float]]


class Report(BaseModel):
    description: ClassVar[str] = "A JSON-serializable result"
    model_config = ConfigDict(frozen=True)

    def to_json(self) -> str:
        """
        Deterministic JSON text: sorted keys, fixed indentation.
        """
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


class FiberAverage(Report):
    description: ClassVar[str] = "Average of a frame-dependent quantity over the normal frame fiber"
    value: Number
    std_error: Number
    samples: int
    scheme: str
    group: str


class SectionAverages(Report):
    description: ClassVar[str] = "Fiber averages of the H_u, S_u and R_u sections in reference-frame coordinates"
    u: List[int]
    curvature: float
    h_hat: FiberAverage
    s_hat: FiberAverage
    r_hat: FiberAverage


class PointRecord(Report):
    description: ClassVar[str] = "Averaged sections and minimality residual at one mesh node"
    point: List[float]
    h_hat: List[float]
    s_hat: List[float]
    residual: List[float]
    std_error: List[float]


class MinimalityReport(Report):
    description: ClassVar[str] = "u-minimality residual c(n+1-|u|)H_u - S_u over a mesh"
    u: List[int]
    curvature: float
    scheme: str
    group: str
    seed: Optional[int] = None
    resolution: List[int]
    records: List[PointRecord]
    sup_norm: float
    l2_norm: float
    max_std_error: float
    tolerance: float
    verdict: bool


class FunctionalValue(Report):
    description: ClassVar[str] = "Integral of the generalized extrinsic curvature over a patch"
    u: List[int]
    value: float
    quadrature_error: float
    monte_carlo_error: float
    resolution: List[int]


class ConvergenceRow(Report):
    description: ClassVar[str] = "One step size of a finite-difference convergence study"
    step: float
    lhs: float
    rhs: float
    difference: float


class ConvergenceReport(Report):
    description: ClassVar[str] = "Finite-difference derivative against its closed-form counterpart"
    u: List[int]
    rows: List[ConvergenceRow]
    observed_order: Optional[float] = None
    required_order: float
    tolerance: float
    passed: bool


class ExpectationResult(Report):
    description: ClassVar[str] = "Outcome of one machine-checkable gallery expectation"
    entry: str
    check: str
    provenance: str
    statement: str
    measured: float
    tolerance: float
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)


class SigmaReport(Report):
    description: ClassVar[str] = "Symmetric functions of a system with identity residuals"
    n: int
    q: int
    sigma: Dict[str, float]
    trace_residual: float
    identity_residual: float
    recursion_residual: float
    max_rel_err: Optional[float] = None
