"""

This module defines the gallery of built-in patches and their expected facts.

The GalleryEntry abstract base class provides a framework for declaring
expectations about a patch. Concrete entries, like UmbilicalSphereEntry,
name the patch and list steps, each naming a registered check, its
parameters, where the expected fact comes from and what it states.

The declaration is validated before anything is computed (unknown checks,
parameters a check does not take, indices that do not fit the patch), so a
broken entry fails at once rather than after an expensive mesh run. Each
step writes its own JSON record when an output directory is given.

"""

import logging
import math
import os
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from scipy.special import gamma
from tqdm import tqdm

import checks
from infotypes import ExpectationResult
from multiindex import MultiIndex, enumerate_indices, length
from patches import (
    CatenoidPatch,
    PlanePatch,
    ProductTorus,
    RevolutionTorus,
    SphereInSpherePatch,
    UmbilicalSpherePatch,
    VeronesePatch,
)
from runconfig import RunConfig
from submanifold import ImmersedPatch

logger = logging.getLogger(__name__)

PERTURBATION = 1.1
CONDITION_TOLERANCE = 1e-12


def sphere_area(n: int, r: float) -> float:
    """
    Volume of the round sphere S^n(r).
    """
    return 2.0 * math.pi ** ((n + 1) / 2) / gamma((n + 1) / 2) * r ** n


def variation_steps(n: int, q: int) -> List[Dict[str, Any]]:
    """
    First-variation steps for every index with |u| <= min(2, n) on a closed patch.

    Surfaces run on at least 32 nodes per axis; three-dimensional patches are
    pinned to 12, where Gauss-Legendre already resolves the ambient bump.
    """
    mesh = {"min_resolution": 32} if n == 2 else {"resolution": 12}
    steps = []
    for u in enumerate_indices(q, min(2, n)):
        steps.append({
            "check": "first_variation",
            "params": {"u": list(u), **mesh},
            "provenance": "DERIVED" if length(u) == 0 else "PAPER",
            "statement": f"d/dt int sigma_hat_u = int <c(n+1-|u|) H_u - S_u, V> for u = {tuple(u)}",
        })
    return steps


class GalleryEntry(ABC):
    """
    A patch with machine-checkable expectations.
    """

    name: str = "entry"

    @abstractmethod
    def patch(self) -> ImmersedPatch:
        """
        Returns the patch this entry is about.
        """
        pass

    @abstractmethod
    def get_expectations(self) -> List[Dict[str, Any]]:
        """
        Returns the expectations as a list of steps.

        Returns:
            List[Dict[str, Any]]: Each step contains
                - 'check': The name of a registered check
                - 'params': Parameters for the check
                - 'provenance': PAPER, DERIVED or TRIVIAL
                - 'statement': The expected fact in words
        """
        pass

    def expected_minimal(self, u: MultiIndex) -> Optional[bool]:
        """
        Whether the patch is known to be u-minimal, or None when the entry
        makes no claim.
        """
        return None

    def get_checks(self) -> Dict[str, checks.Check]:
        return checks.CHECKS

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "patch": self.patch().describe(),
            "expectations": [
                {key: step[key] for key in ("check", "provenance", "statement")} for step in self.get_expectations()
            ],
        }

    def check_expectations(self, patch: Optional[ImmersedPatch] = None):
        """
        Validates the expectations against the registered checks and the patch.

        Raises:
            ValueError: If a step names an unknown check, passes a parameter
                the check does not take, has no statement or a bad provenance,
                or uses a multi-index that does not fit the patch.
        """
        patch = self.patch() if patch is None else patch
        registered = self.get_checks()
        for index, step in enumerate(self.get_expectations()):
            check_name = step.get("check")
            check = registered.get(check_name)
            if check is None:
                raise ValueError(f"Failed to compile expectations: check '{check_name}' of step {index} is not registered")
            unknown = set(step.get("params", {})) - set(check.parameters)
            if unknown:
                raise ValueError(f"Failed to compile expectations: check '{check_name}' does not take {sorted(unknown)}")
            if step.get("provenance") not in checks.PROVENANCES:
                raise ValueError(
                    f"Failed to compile expectations: provenance of step {index} must be one of {checks.PROVENANCES}"
                )
            if not step.get("statement"):
                raise ValueError(f"Failed to compile expectations: step {index} ('{check_name}') has no statement")
            params = step.get("params", {})
            indices = [params["u"]] if "u" in params else list(params.get("u_list", []))
            for u in indices:
                if len(u) != patch.q or length(u) > patch.n:
                    raise ValueError(
                        f"Failed to compile expectations: index {list(u)} of step {index} does not fit "
                        f"n={patch.n}, q={patch.q}"
                    )
        logger.info("Expectations of %s checked successfully", self.name)

    def run_expectations(self, config: RunConfig, output_dir: Optional[str] = None) -> List[ExpectationResult]:
        """
        Runs every step against the patch, in order.

        Args:
            config (RunConfig): Seed, resolution and fiber settings.
            output_dir (str, optional): Directory for step{i}_{check}_output.json files.

        Returns:
            List[ExpectationResult]: One result per step.
        """
        patch = self.patch()
        self.check_expectations(patch)
        steps = list(self.get_expectations())
        if config.all_u_upto is not None:
            steps.append({
                "check": "minimality_sweep",
                "params": {"upto": config.all_u_upto, "predict": self.expected_minimal},
                "provenance": "DERIVED",
                "statement": f"Verdicts for all u with |u| ≤ {config.all_u_upto} agree with the known cases",
            })
        registered = self.get_checks()
        results = []
        for step_number, step in enumerate(tqdm(steps, desc=self.name, disable=not config.progress)):
            check = registered[step["check"]]
            output_file = None
            if output_dir:
                output_file = os.path.join(output_dir, f"step{step_number}_{check.name}_output.json")
            context = {"entry": self.name, "provenance": step["provenance"], "statement": step["statement"]}
            results.append(check.run(patch, step.get("params", {}), config, context, output_file))
        return results


class UmbilicalSphereEntry(GalleryEntry):
    """
    S^n(r) in R^(n+1) in R^(n+q): umbilical, u-minimal for every |u| = n.
    """

    def __init__(self, n: int = 2, q: int = 1, r: float = 1.0):
        self.n, self.q, self.r = n, q, r
        self.name = f"umbilical:n={n},q={q},r={r:g}"

    def patch(self):
        return UmbilicalSpherePatch(self.n, self.q, self.r)

    def negative_control(self) -> MultiIndex:
        """
        An even index with |u| < n, whose residual is bounded away from zero.
        """
        k = self.n - 1 if (self.n - 1) % 2 == 0 else self.n - 2
        return MultiIndex([k] + [0] * (self.q - 1))

    def expected_minimal(self, u):
        if length(u) == self.n:
            return True
        if length(u) == 0:
            return False
        return None

    def get_expectations(self):
        steps = [
            {
                "check": "umbilicity",
                "provenance": "DERIVED",
                "statement": "A_a = (lambda_a / n) I with lambda = (±n/r, 0, ..., 0)",
            },
            {
                "check": "multinomial",
                "provenance": "PAPER",
                "statement": "sigma_u = n! / (n^|u| (n-|u|)! u!) lambda^u in every sampled frame",
            },
            {
                "check": "minimality",
                "params": {"length": self.n, "expect": "minimal"},
                "provenance": "PAPER",
                "statement": "c = 0 and |u| = n imply u-minimality",
            },
            {
                "check": "minimality",
                "params": {"u": list(self.negative_control()), "expect": "not_minimal"},
                "provenance": "DERIVED",
                "statement": "Negative control: an even index with |u| < n is not u-minimal in Euclidean space",
            },
        ]
        if self.q == 1:
            steps.append({
                "check": "functional",
                "params": {"u": [0], "expected": sphere_area(self.n, self.r)},
                "provenance": "TRIVIAL",
                "statement": "The integral of sigma_hat_0 is the volume of S^n(r)",
            })
            if self.n % 2 == 0:
                steps.append({
                    "check": "functional",
                    "params": {"u": [self.n], "expected": sphere_area(self.n, 1.0)},
                    "provenance": "DERIVED",
                    "statement": "The integral of the Gauss-Kronecker curvature equals the volume of the unit sphere",
                })
        steps.extend(variation_steps(self.n, self.q))
        return steps


def corrected_radius(n: int, q: int, r: float, k: int) -> float:
    """
    rho with (n - qk)|H|^2 = c qk n^2 for S^n(rho) in S^(n+q)(r).

    Raises:
        ValueError: If qk ≥ n, where the condition has no solution with c > 0.
    """
    if q * k >= n:
        raise ValueError(f"Need qk < n for a solution, got q={q}, k={k}, n={n}")
    return r * math.sqrt((n - q * k) / n)


def printed_radius(n: int, q: int, r: float, k: int) -> float:
    """
    rho with (n - qk)(n + 1 - qk)|H|^2 = c qk n^2, the variant with the extra factor.
    """
    if q * k >= n:
        raise ValueError(f"Need qk < n for a solution, got q={q}, k={k}, n={n}")
    return r / math.sqrt(1.0 + q * k / ((n - q * k) * (n + 1 - q * k)))


class SphereInSphereEntry(GalleryEntry):
    """
    Umbilical S^n(rho) in S^(n+q)(r), tested against u = (k, ..., k).

    'corrected' places rho on the solution of (n - qk)|H|^2 = c qk n^2;
    'perturbed' scales that radius by 1.1; 'extra_factor' solves the variant
    with the additional factor (n + 1 - qk). Only the first is u-minimal.
    """

    def __init__(self, n: int = 3, q: int = 1, r: float = 1.0, k: int = 2, variant: str = "corrected"):
        if variant not in ("corrected", "perturbed", "extra_factor"):
            raise ValueError(f"Unknown sphere-in-sphere variant '{variant}'")
        self.n, self.q, self.r, self.k, self.variant = n, q, r, k, variant
        if variant == "extra_factor":
            self.rho = printed_radius(n, q, r, k)
        else:
            self.rho = corrected_radius(n, q, r, k) * (PERTURBATION if variant == "perturbed" else 1.0)
        self.name = f"sphere_in_sphere:n={n},q={q},r={r:g},k={k},variant={variant}"

    def patch(self):
        return SphereInSpherePatch(self.n, self.q, self.r, self.rho)

    def expected_minimal(self, u):
        if length(u) == 0:
            return False
        if self.q == 1 and u[0] % 2 == 0:
            kappa2 = (self.r ** 2 - self.rho ** 2) / (self.r * self.rho) ** 2
            c = 1.0 / self.r ** 2
            return abs((self.n - u[0]) * kappa2 - c * u[0]) <= 1e-9
        return None

    def get_expectations(self):
        holds = self.variant == "corrected"
        u = [self.k] * self.q
        steps = [
            {
                "check": "umbilicity",
                "provenance": "DERIVED",
                "statement": "A small sphere in a sphere is umbilical",
            },
            {
                "check": "umbilical_condition",
                "params": {"k": self.k, "expect": "holds" if holds else "fails"},
                "provenance": "DERIVED",
                "statement": f"(n - qk)|H|^2 = c qk n^2 {'holds' if holds else 'fails'} at rho = {self.rho:.12g}",
            },
            {
                "check": "minimality",
                "params": {"u": u, "expect": "minimal" if holds else "not_minimal"},
                "provenance": "PAPER",
                "statement": f"u = {tuple(u)}-minimality {'holds' if holds else 'fails'} for the {self.variant} radius",
            },
        ]
        if holds:
            steps.extend(variation_steps(self.n, self.q))
        return steps


class VeroneseEntry(GalleryEntry):
    """
    The Veronese surface S^2(1) -> S^4(1/sqrt 3).
    """

    name = "veronese"

    def patch(self):
        return VeronesePatch()

    def expected_minimal(self, u):
        if length(u) == 0:
            return True
        if length(u) == 2 and max(u) == 2:
            return True
        return None

    def get_expectations(self):
        steps = [
            {
                "check": "oracles",
                "provenance": "DERIVED",
                "statement": "Image on the sphere of radius 1/sqrt 3 and pulled-back metric round, within 1e-10",
            },
            {
                "check": "mean_curvature",
                "params": {"expect": "zero"},
                "provenance": "PAPER",
                "statement": "S^2(1) is minimal but not totally geodesic",
            },
            {
                "check": "squared_shape",
                "params": {"value": 2.0},
                "provenance": "PAPER",
                "statement": "A^2 = 2 I",
            },
            {
                "check": "isotropy",
                "provenance": "PAPER",
                "statement": "<B(X,Z), B(Y,Z)> = <X,Y><Z,Z>",
            },
            {
                "check": "trace_b_a2",
                "provenance": "PAPER",
                "statement": "tr(B o A^2) = 0",
            },
            {
                "check": "second_order",
                "provenance": "PAPER",
                "statement": "The frame-free second-order condition vanishes",
            },
            {
                "check": "frame_sum",
                "provenance": "DERIVED",
                "statement": "Summed averaged residuals match the frame-free condition",
            },
            {
                "check": "minimality",
                "params": {"u_list": [[2, 0], [0, 2]], "expect": "minimal"},
                "provenance": "PAPER",
                "statement": "b#b#(0)-minimal for any choice of b",
            },
        ]
        return steps + variation_steps(2, 2)


class RevolutionTorusEntry(GalleryEntry):
    def __init__(self, a: float = 1.0, R: float = 2.0):
        self.a, self.R = a, R
        self.name = f"revolution_torus:a={a:g},R={R:g}"

    def patch(self):
        return RevolutionTorus(self.a, self.R)

    def expected_minimal(self, u):
        return False if length(u) == 0 else None

    def get_expectations(self):
        return [
            {
                "check": "functional",
                "params": {"u": [0], "expected": 4.0 * math.pi ** 2 * self.a * self.R},
                "provenance": "DERIVED",
                "statement": "Area = 4 pi^2 a R",
            },
            {
                "check": "functional",
                "params": {"u": [2], "expected": 0.0},
                "provenance": "DERIVED",
                "statement": "Total Gauss curvature of a torus vanishes",
            },
            {
                "check": "minimality",
                "params": {"u": [0], "expect": "not_minimal"},
                "provenance": "TRIVIAL",
                "statement": "A torus of revolution is not minimal",
            },
            {
                "check": "first_variation",
                "params": {"u": [0]},
                "provenance": "DERIVED",
                "statement": "d/dt Area = -int <H, V> along a normal bump",
            },
            {
                "check": "first_variation",
                "params": {"u": [2]},
                "provenance": "PAPER",
                "statement": "First variation of the total Gauss curvature",
            },
        ]


class ProductTorusEntry(GalleryEntry):
    def __init__(self, a: float = 1.0, b: float = 1.5):
        self.a, self.b = a, b
        self.name = f"product_torus:a={a:g},b={b:g}"

    def patch(self):
        return ProductTorus(self.a, self.b)

    def expected_minimal(self, u):
        return False if length(u) == 0 else None

    def get_expectations(self):
        return [
            {
                "check": "diagonal_normal",
                "provenance": "DERIVED",
                "statement": "A_1, A_2 each have rank at most one in a suitable frame",
            },
            {
                "check": "mean_curvature",
                "params": {"expect": "nonzero"},
                "provenance": "DERIVED",
                "statement": "H ≠ 0",
            },
            {
                "check": "functional",
                "params": {"u": [0, 0], "expected": 4.0 * math.pi ** 2 * self.a * self.b},
                "provenance": "DERIVED",
                "statement": "Area = 4 pi^2 a b",
            },
            {
                "check": "minimality",
                "params": {"u": [0, 0], "expect": "not_minimal"},
                "provenance": "TRIVIAL",
                "statement": "Negative control: the product torus is not minimal in R^4",
            },
            {
                "check": "first_variation",
                "params": {"u": [0, 0]},
                "provenance": "DERIVED",
                "statement": "d/dt Area = -int <H, V> along a normal bump",
            },
            {
                "check": "first_variation",
                "params": {"u": [2, 0]},
                "provenance": "PAPER",
                "statement": "First variation of int sigma_hat_(2,0) matches the residual integral",
            },
        ]


class CatenoidEntry(GalleryEntry):
    def __init__(self, c: float = 1.0, height: float = 1.0):
        self.c, self.height = c, height
        self.name = f"catenoid:c={c:g},height={height:g}"

    def patch(self):
        return CatenoidPatch(self.c, self.height)

    def expected_minimal(self, u):
        return True if length(u) == 0 else None

    def get_expectations(self):
        return [
            {
                "check": "mean_curvature",
                "params": {"expect": "zero"},
                "provenance": "DERIVED",
                "statement": "The catenoid is a minimal surface",
            },
            {
                "check": "minimality",
                "params": {"u": [0], "expect": "minimal"},
                "provenance": "PAPER",
                "statement": "0-minimality is classical minimality",
            },
            {
                "check": "second_order",
                "provenance": "PAPER",
                "statement": "A minimal patch with tr(B o A^2) = 0 satisfies the second-order condition",
            },
        ]


class PlaneEntry(GalleryEntry):
    def __init__(self, n: int = 2, q: int = 1):
        self.n, self.q = n, q
        self.name = f"plane:n={n},q={q}"

    def patch(self):
        return PlanePatch(self.n, self.q)

    def expected_minimal(self, u):
        return True

    def get_expectations(self):
        return [
            {
                "check": "minimality",
                "params": {"length": k, "expect": "minimal"},
                "provenance": "PAPER",
                "statement": f"Totally geodesic patches are u-minimal (|u| = {k})",
            }
            for k in range(self.n + 1)
        ] + [
            {
                "check": "second_order",
                "provenance": "TRIVIAL",
                "statement": "The second-order condition vanishes on a totally geodesic patch",
            },
        ]


def umbilical_sphere(n: int, q: int, r: float) -> Tuple[ImmersedPatch, UmbilicalSphereEntry]:
    entry = UmbilicalSphereEntry(n, q, r)
    return entry.patch(), entry


def sphere_in_sphere(
    n: int = 3, q: int = 1, r: float = 1.0, k: int = 2, variant: str = "corrected"
) -> Tuple[ImmersedPatch, SphereInSphereEntry]:
    entry = SphereInSphereEntry(n, q, r, k, variant)
    return entry.patch(), entry


def veronese() -> Tuple[ImmersedPatch, VeroneseEntry]:
    entry = VeroneseEntry()
    return entry.patch(), entry


def torus_family(radii: Sequence[float], ambient_dimension: int) -> ImmersedPatch:
    """
    Revolution torus in R^3 (radii = (a, R)) or product torus S^1(a) x S^1(b) in R^4.

    Raises:
        ValueError: For non-positive radii or another ambient dimension.
    """
    if len(radii) != 2 or min(radii) <= 0:
        raise ValueError(f"Torus needs two positive radii, got {list(radii)}")
    if ambient_dimension == 3:
        return RevolutionTorus(*radii)
    if ambient_dimension == 4:
        return ProductTorus(*radii)
    raise ValueError(f"Tori are available in R^3 and R^4, got ambient dimension {ambient_dimension}")


GALLERY: Dict[str, Callable[[], GalleryEntry]] = {
    "umbilical_s2_r3": lambda: UmbilicalSphereEntry(2, 1, 1.0),
    "umbilical_s2_r4": lambda: UmbilicalSphereEntry(2, 2, 1.0),
    "umbilical_s3_r5": lambda: UmbilicalSphereEntry(3, 2, 1.0),
    "sphere_in_sphere": lambda: SphereInSphereEntry(variant="corrected"),
    "sphere_in_sphere_perturbed": lambda: SphereInSphereEntry(variant="perturbed"),
    "sphere_in_sphere_extra_factor": lambda: SphereInSphereEntry(variant="extra_factor"),
    "veronese": VeroneseEntry,
    "revolution_torus": RevolutionTorusEntry,
    "product_torus": ProductTorusEntry,
    "catenoid": CatenoidEntry,
    "plane": PlaneEntry,
}
