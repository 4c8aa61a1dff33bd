"""
Holds the check abstract class, as well as all checks used by gallery expectations.

A check measures one property of a patch through the public operations of
the numerical modules and reports the measured value against a tolerance.
Checks own no geometry of their own.
"""

import logging
import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import factorial

from haar import averaged_sections, haar_samples, node_rng
from infotypes import ExpectationResult
from minimality import BumpField, VariationSpec, second_order_vector, first_variation_check, functional_value, minimality_residual
from multiindex import MultiIndex, enumerate_indices, length, raise_index
from newton import newton_tables
from runconfig import RunConfig
from submanifold import ImmersedPatch, PointFrameData, shape_system

logger = logging.getLogger(__name__)

PROVENANCES = ("PAPER", "DERIVED", "TRIVIAL")
POINTWISE_TOLERANCE = 1e-8
NEGATIVE_MARGIN = 10.0


@dataclass
class Measurement:
    measured: float
    tolerance: float
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)


def sample_points(patch: ImmersedPatch, count: int, seed: int) -> np.ndarray:
    """
    Uniform chart points, kept 5% away from non-periodic chart edges.
    """
    rng = np.random.default_rng(seed)
    chart = patch.chart
    columns = []
    for lo, hi, periodic in zip(chart.lower, chart.upper, chart.periodic):
        margin = 0.0 if periodic else 0.05 * (hi - lo)
        columns.append(rng.uniform(lo + margin, hi - margin, size=count))
    return np.stack(columns, axis=-1)


def _frame_data(patch: ImmersedPatch, params: Dict[str, Any], config: RunConfig) -> List[PointFrameData]:
    return [shape_system(patch, x) for x in sample_points(patch, params.get("points", config.points), config.seed)]


def _index_list(patch: ImmersedPatch, params: Dict[str, Any]) -> List[MultiIndex]:
    if "u" in params:
        return [MultiIndex(params["u"])]
    if "u_list" in params:
        return [MultiIndex(u) for u in params["u_list"]]
    if "length" in params:
        return [u for u in enumerate_indices(patch.q, params["length"]) if length(u) == params["length"]]
    raise ValueError("Check needs one of 'u', 'u_list' or 'length'")


class Check(ABC):
    """
    Abstract base class for all checks run by gallery expectations.
    """

    parameters: Tuple[str, ...] = ("tolerance", "points")

    def __init__(self, name: str):
        """
        Initialize the check with its registry name.

        Args:
            name (str): The name the expectations use for this check.
        """
        self.name = name

    def get_description(self) -> Dict[str, Any]:
        """
        Return a dictionary containing the check's name, description and parameters.

        Returns:
            Dict[str, Any]: A dictionary describing the check.
        """
        return {
            "name": self.name,
            "description": self.get_description_text(),
            "parameters": list(self.parameters),
        }

    @abstractmethod
    def get_description_text(self) -> str:
        """
        Return a natural language description of what this check measures.

        Returns:
            str: A description of the check.
        """
        pass

    @abstractmethod
    def measure(self, patch: ImmersedPatch, params: Dict[str, Any], config: RunConfig) -> Measurement:
        """
        Measure the property on the patch.

        Args:
            patch (ImmersedPatch): The patch under test.
            params (Dict[str, Any]): Step parameters from the expectation.
            config (RunConfig): Seed, resolution and fiber settings.

        Returns:
            Measurement: Measured value, tolerance and outcome.
        """
        pass

    def run(
        self,
        patch: ImmersedPatch,
        params: Dict[str, Any],
        config: RunConfig,
        context: Dict[str, str],
        output_file: Optional[str] = None,
    ) -> ExpectationResult:
        """
        Measure, wrap the outcome in an ExpectationResult and save it as JSON.

        Args:
            patch (ImmersedPatch): The patch under test.
            params (Dict[str, Any]): Step parameters.
            config (RunConfig): Run settings.
            context (Dict[str, str]): entry, provenance and statement of the step.
            output_file (str, optional): The path to the output JSON file.

        Returns:
            ExpectationResult: The recorded outcome.
        """
        measurement = self.measure(patch, params, config)
        result = ExpectationResult(
            entry=context["entry"],
            check=self.name,
            provenance=context["provenance"],
            statement=context["statement"],
            measured=float(measurement.measured),
            tolerance=float(measurement.tolerance),
            passed=bool(measurement.passed),
            details=measurement.details,
        )
        logger.info("%s / %s: measured %.3e (tolerance %.1e) %s", result.entry, self.name, result.measured,
                    result.tolerance, "pass" if result.passed else "FAIL")
        if output_file:
            os.makedirs(os.path.dirname(output_file) or ".", exist_ok=True)
            with open(output_file, "w") as f:
                f.write(result.to_json())
        return result


class PointwiseCheck(Check):
    """
    A check of a quantity that should vanish at random chart points.
    """

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", POINTWISE_TOLERANCE)
        defects = [
            self.defect(data, patch, params, config, k) for k, data in enumerate(_frame_data(patch, params, config))
        ]
        measured = float(np.max(defects))
        return Measurement(measured, tolerance, measured <= tolerance, {"points": len(defects)})

    @abstractmethod
    def defect(
        self, data: PointFrameData, patch: ImmersedPatch, params: Dict[str, Any], config: RunConfig, index: int
    ) -> float:
        pass


class UmbilicityCheck(PointwiseCheck):
    def __init__(self):
        super().__init__("umbilicity")

    def get_description_text(self) -> str:
        return "Every shape operator is a multiple of the identity: A_a = (lambda_a / n) I with lambda = H."

    def defect(self, data, patch, params, config, index):
        a = data.system.matrices
        h = np.trace(a, axis1=1, axis2=2)
        return float(np.max(np.abs(a - h[:, None, None] / patch.n * np.eye(patch.n))))


class MeanCurvatureCheck(Check):
    parameters = ("tolerance", "points", "expect")

    def __init__(self):
        super().__init__("mean_curvature")

    def get_description_text(self) -> str:
        return "The mean curvature vector H = sum_a tr(A_a) e_a vanishes, or stays away from zero for 'nonzero'."

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", POINTWISE_TOLERANCE)
        norms = [float(np.linalg.norm(d.mean_curvature)) for d in _frame_data(patch, params, config)]
        if params.get("expect", "zero") == "zero":
            return Measurement(max(norms), tolerance, max(norms) <= tolerance, {"max": max(norms)})
        return Measurement(min(norms), tolerance, min(norms) > tolerance, {"min": min(norms)})


class SquaredShapeCheck(PointwiseCheck):
    parameters = ("tolerance", "points", "value")

    def __init__(self):
        super().__init__("squared_shape")

    def get_description_text(self) -> str:
        return "A^2 = sum_b A_b^2 equals value times the identity."

    def defect(self, data, patch, params, config, index):
        a = data.system.matrices
        squared = np.einsum("bij,bjk->ik", a, a)
        return float(np.max(np.abs(squared - params.get("value", 2.0) * np.eye(patch.n))))


class TraceBA2Check(PointwiseCheck):
    def __init__(self):
        super().__init__("trace_b_a2")

    def get_description_text(self) -> str:
        return "The normal vector tr(B o A^2) = sum_a tr(A_a A^2) e_a vanishes."

    def defect(self, data, patch, params, config, index):
        a = data.system.matrices
        squared = np.einsum("bij,bjk->ik", a, a)
        return float(np.max(np.abs(np.einsum("aij,ji->a", a, squared))))


class IsotropyCheck(PointwiseCheck):
    parameters = ("tolerance", "points", "vectors")

    def __init__(self):
        super().__init__("isotropy")

    def get_description_text(self) -> str:
        return "<B(X,Z), B(Y,Z)> = <X,Y><Z,Z> for random tangent vectors X, Y, Z."

    def defect(self, data, patch, params, config, index):
        rng = node_rng(config.seed, index)
        worst = 0.0
        for _ in range(params.get("vectors", 5)):
            x, y, z = rng.normal(size=(3, patch.n))
            lhs = data.second_fundamental_form(x, z) @ data.second_fundamental_form(y, z)
            worst = max(worst, abs(lhs - (x @ y) * (z @ z)))
        return float(worst)


class SecondOrderCheck(PointwiseCheck):
    def __init__(self):
        super().__init__("second_order")

    def get_description_text(self) -> str:
        return "(1/2(|H|^2 - |B|^2) - c(n-1)) H - tr(B o A^H) + tr(B o A^2) vanishes."

    def defect(self, data, patch, params, config, index):
        return float(np.max(np.abs(second_order_vector(data.system, patch.ambient.curvature))))


class FrameSumCheck(PointwiseCheck):
    parameters = ("tolerance", "points")

    def __init__(self):
        super().__init__("frame_sum")

    def get_description_text(self) -> str:
        return (
            "The sum over b of the averaged residuals c(n+1-|u|) H_u - S_u for u = b#b#(0) equals minus the "
            "frame-free second-order condition vector."
        )

    def defect(self, data, patch, params, config, index):
        scheme = config.fiber_scheme(patch.q)
        c = patch.ambient.curvature
        zero = MultiIndex.zero(patch.q)
        total = np.zeros(patch.q)
        for beta in range(patch.q):
            u = raise_index(beta, raise_index(beta, zero))
            sections = averaged_sections(data.system, u, c, scheme, node_rng(config.seed, index))
            total += np.asarray(sections.r_hat.value) - np.asarray(sections.s_hat.value)
        return float(np.max(np.abs(total + second_order_vector(data.system, c))))


class MultinomialCheck(Check):
    parameters = ("tolerance", "points", "frames")

    def __init__(self):
        super().__init__("multinomial")

    def get_description_text(self) -> str:
        return "For an umbilical patch sigma_u = n! / (n^|u| (n-|u|)! u!) lambda^u in every sampled normal frame."

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", POINTWISE_TOLERANCE)
        n, q = patch.n, patch.q
        indices = enumerate_indices(q, n)
        coefficients = {
            u: float(factorial(n, exact=True))
            / (n ** length(u) * factorial(n - length(u), exact=True) * np.prod([factorial(k, exact=True) for k in u]))
            for u in indices
        }
        worst = 0.0
        for k, data in enumerate(_frame_data(patch, params, config)):
            g = haar_samples(q, "O", params.get("frames", 16), node_rng(config.seed, k))
            rotated = np.einsum("sab,aij->sbij", g, data.system.matrices)
            lam = np.trace(rotated, axis1=2, axis2=3)
            tables = newton_tables(rotated, n)
            for u in indices:
                closed = coefficients[u] * np.prod(lam ** np.asarray(u), axis=-1)
                worst = max(worst, float(np.max(np.abs(tables[u][0] - closed))))
        return Measurement(worst, tolerance, worst <= tolerance, {"indices": len(indices)})


class MinimalityCheck(Check):
    parameters = ("tolerance", "u", "u_list", "length", "expect")

    def __init__(self):
        super().__init__("minimality")

    def get_description_text(self) -> str:
        return (
            "The residual c(n+1-|u|) H_u - S_u is below tolerance over the mesh ('minimal'), or its sup norm "
            "exceeds ten times the tolerance ('not_minimal')."
        )

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", config.tolerance)
        expect = params.get("expect", "minimal")
        sups, passes = {}, []
        for u in _index_list(patch, params):
            report = minimality_residual(
                patch, u, config.resolution, config.fiber_scheme(patch.q), config.seed, tolerance,
                config.threads, config.progress,
            )
            tolerance = report.tolerance
            sups[u.to_json()] = report.sup_norm
            if expect == "minimal":
                passes.append(report.verdict)
            else:
                passes.append(report.sup_norm >= NEGATIVE_MARGIN * report.tolerance + 3.0 * report.max_std_error)
        measured = max(sups.values()) if expect == "minimal" else min(sups.values())
        return Measurement(measured, tolerance, all(passes), {"sup_norm": sups, "expect": expect})


class MinimalitySweepCheck(Check):
    parameters = ("upto", "predict")

    def __init__(self):
        super().__init__("minimality_sweep")

    def get_description_text(self) -> str:
        return "Residuals for every u with |u| up to a bound; verdicts must agree wherever the entry predicts one."

    def measure(self, patch, params, config):
        predict = params["predict"]
        sups, verdicts, disagreements = {}, {}, []
        tolerance = config.tolerance if config.tolerance is not None else patch.default_tolerance()
        for u in enumerate_indices(patch.q, min(params["upto"], patch.n)):
            report = minimality_residual(
                patch, u, config.resolution, config.fiber_scheme(patch.q), config.seed, tolerance,
                config.threads, config.progress,
            )
            sups[u.to_json()] = report.sup_norm
            verdicts[u.to_json()] = "u-minimal" if report.verdict else "not u-minimal"
            expected = predict(u)
            if expected is not None and expected != report.verdict:
                disagreements.append(u.to_json())
        return Measurement(
            len(disagreements), 0, not disagreements,
            {"sup_norm": sups, "verdicts": verdicts, "disagreements": disagreements},
        )


class FunctionalCheck(Check):
    parameters = ("tolerance", "u", "expected")

    def __init__(self):
        super().__init__("functional")

    def get_description_text(self) -> str:
        return "The integral of sigma_hat_u over the patch matches a closed form (relative error)."

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", 1e-8)
        value = functional_value(
            patch, params["u"], config.resolution, config.fiber_scheme(patch.q), config.seed,
            workers=config.threads, progress=config.progress,
        )
        expected = float(params["expected"])
        error = abs(value.value - expected) / max(1.0, abs(expected))
        allowance = tolerance + 3.0 * value.monte_carlo_error / max(1.0, abs(expected))
        return Measurement(
            error, tolerance, error <= allowance,
            {"value": value.value, "expected": expected, "quadrature_error": value.quadrature_error},
        )


class FirstVariationCheck(Check):
    parameters = ("u", "amplitude", "width", "resolution", "min_resolution")

    def __init__(self):
        super().__init__("first_variation")

    def get_description_text(self) -> str:
        return (
            "Central differences of the integral of sigma_hat_u along a normal bump deformation match the "
            "integral of <c(n+1-|u|) H_u - S_u, V>, with observed order at least 1.8."
        )

    def measure(self, patch, params, config):
        bump = BumpField(params.get("amplitude", 0.1), params.get("width", 1.0))
        spec = VariationSpec(patch, bump, tuple(config.steps))
        # n = 3 meshes are cubic in the node count; entries pin a coarser one
        resolution = params.get("resolution", max(config.resolution, params.get("min_resolution", 0)))
        report = first_variation_check(
            spec, params["u"], resolution, config.fiber_scheme(patch.q), config.seed,
            config.threads, config.progress,
        )
        last = report.rows[-1]
        return Measurement(
            abs(last.difference), report.tolerance, report.passed,
            {"lhs": last.lhs, "rhs": last.rhs, "observed_order": report.observed_order},
        )


class DiagonalNormalCheck(PointwiseCheck):
    def __init__(self):
        super().__init__("diagonal_normal")

    def get_description_text(self) -> str:
        return (
            "The shape operators commute and B(e_1,e_1), B(e_2,e_2) are orthogonal in a common eigenbasis, "
            "so each A_a has rank at most one in a suitable normal frame."
        )

    def defect(self, data, patch, params, config, index):
        a = data.system.matrices
        commutator = float(np.max(np.abs(a[0] @ a[1] - a[1] @ a[0])))
        _, basis = np.linalg.eigh(a[0] + math.sqrt(2.0) * a[1])
        diagonal = np.einsum("aij,ik,jk->ak", a, basis, basis)
        return max(commutator, abs(float(diagonal[:, 0] @ diagonal[:, 1])))


class UmbilicalConditionCheck(Check):
    parameters = ("tolerance", "k", "expect")

    def __init__(self):
        super().__init__("umbilical_condition")

    def get_description_text(self) -> str:
        return (
            "For an umbilical patch and u = (k,...,k): (n - qk)|H|^2 = c qk n^2 holds ('holds') or fails "
            "('fails'); the variant with the extra factor (n + 1 - qk) is reported alongside."
        )

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", POINTWISE_TOLERANCE)
        n, q, k = patch.n, patch.q, params["k"]
        c = patch.ambient.curvature
        data = _frame_data(patch, {"points": 1}, config)[0]
        h2 = float(data.mean_curvature @ data.mean_curvature)
        corrected = (n - q * k) * h2 - c * q * k * n ** 2
        printed = (n - q * k) * (n + 1 - q * k) * h2 - c * q * k * n ** 2
        measured = abs(corrected)
        holds = measured <= tolerance * max(1.0, h2)
        passed = holds if params.get("expect", "holds") == "holds" else not holds
        return Measurement(measured, tolerance, passed, {"corrected": corrected, "with_extra_factor": printed, "h2": h2})


class OracleCheck(Check):
    parameters = ("tolerance",)

    def __init__(self):
        super().__init__("oracles")

    def get_description_text(self) -> str:
        return "The normalization oracles of the patch (radius and pulled-back metric) held at construction."

    def measure(self, patch, params, config):
        tolerance = params.get("tolerance", 1e-10)
        radius, metric = patch.oracle_defects
        measured = max(radius, metric)
        return Measurement(measured, tolerance, measured <= tolerance, {"radius": radius, "metric": metric})


CHECKS = {
    check.name: check
    for check in (
        UmbilicityCheck(),
        MeanCurvatureCheck(),
        SquaredShapeCheck(),
        TraceBA2Check(),
        IsotropyCheck(),
        SecondOrderCheck(),
        FrameSumCheck(),
        MultinomialCheck(),
        MinimalityCheck(),
        MinimalitySweepCheck(),
        FunctionalCheck(),
        FirstVariationCheck(),
        DiagonalNormalCheck(),
        UmbilicalConditionCheck(),
        OracleCheck(),
    )
}
