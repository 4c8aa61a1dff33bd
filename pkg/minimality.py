"""

u-minimality of patches in space forms.

In a space form of curvature c the first variation of the total
generalized extrinsic curvature along a normal field V is

    d/dt int_L sigma_hat_u = int_L < c(n+1-|u|) H_u - S_u + W_u, V >,

with W_u = 0 because the divergence terms vanish in constant curvature.
A patch is u-minimal when the integrand vector vanishes pointwise. This
module evaluates that vector over a mesh, integrates sigma_hat_u, and checks
the variation formula against finite differences of deformed patches.

"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from haar import FiberScheme, averaged_sections, node_rng, sigma_hat
from infotypes import ConvergenceReport, ConvergenceRow, FunctionalValue, MinimalityReport, PointRecord
from multiindex import MultiIndex, length, lower, raise_index
from newton import REQUIRED_ORDER, OperatorSystem, newton_table, observed_order
from submanifold import (
    AmbientSpec,
    ImmersedPatch,
    NotImmersedError,
    QuadratureRule,
    finite_difference_derivatives,
    mesh_quadrature,
    shape_system,
    tangent_normal_frames,
)

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 64
DEFAULT_STEPS = (1e-2, 5e-3, 2.5e-3)
VARIATION_RELATIVE_TOLERANCE = 1e-3
VARIATION_ABSOLUTE_TOLERANCE = 1e-6


def curvature_term_w(ambient: AmbientSpec, q: int) -> np.ndarray:
    """
    W_u in reference-frame coordinates; zero in every space form.

    Raises:
        NotImplementedError: For an ambient that is not a space form.
    """
    if not ambient.is_space_form():
        raise NotImplementedError(f"W_u is not available for ambient kind '{ambient.kind}'")
    return np.zeros(q)


def _check_index(patch: ImmersedPatch, u: Sequence[int]) -> MultiIndex:
    u = MultiIndex(u)
    if len(u) != patch.q:
        raise ValueError(f"Multi-index {tuple(u)} has {len(u)} entries but the patch has codimension {patch.q}")
    if length(u) > patch.n:
        raise ValueError(f"|u|={length(u)} exceeds the patch dimension n={patch.n}")
    return u


def _map_nodes(func: Callable[[int], object], count: int, workers: int, progress: bool, desc: str) -> List:
    """
    Evaluate func over node indices, results in node order.
    """
    indices = range(count)
    if workers <= 1:
        return [func(k) for k in tqdm(indices, desc=desc, disable=not progress)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, indices), total=count, desc=desc, disable=not progress))


def _node_residual(patch: ImmersedPatch, point, u, scheme, rng):
    data = shape_system(patch, point)
    sections = averaged_sections(data.system, u, patch.ambient.curvature, scheme, rng)
    h_hat = np.asarray(sections.h_hat.value, dtype=float)
    s_hat = np.asarray(sections.s_hat.value, dtype=float)
    r_hat = np.asarray(sections.r_hat.value, dtype=float)
    residual = r_hat - s_hat + curvature_term_w(patch.ambient, patch.q)
    error = np.hypot(np.asarray(sections.r_hat.std_error), np.asarray(sections.s_hat.std_error))
    return data, h_hat, s_hat, residual, error


def minimality_residual(
    patch: ImmersedPatch,
    u: Sequence[int],
    resolution: Union[int, Sequence[int]],
    scheme: FiberScheme,
    seed: int = 0,
    tolerance: Optional[float] = None,
    workers: int = 1,
    progress: bool = False,
) -> MinimalityReport:
    """
    Evaluate c(n+1-|u|) H_u - S_u at every mesh node.

    The verdict is u-minimal when the largest residual norm is at most
    tolerance + 3 * (largest Monte Carlo standard error).

    Args:
        patch (ImmersedPatch): The patch.
        u (Sequence[int]): Multi-index with |u| <= n.
        resolution (int or Sequence[int]): Nodes per chart axis.
        scheme (FiberScheme): Fiber averaging rule.
        seed (int): Run seed; node k draws from node_rng(seed, k).
        tolerance (float, optional): Defaults to the patch's default tolerance.
        workers (int): Thread count for per-node work.
        progress (bool): Show a progress bar.

    Returns:
        MinimalityReport: Per-node records and summary norms.

    Raises:
        ValueError: If |u| > n.
        NotImmersedError: If a node is singular.
    """
    u = _check_index(patch, u)
    tolerance = patch.default_tolerance() if tolerance is None else tolerance
    rule = mesh_quadrature(patch, resolution)

    def evaluate(k: int) -> PointRecord:
        _, h_hat, s_hat, residual, error = _node_residual(patch, rule.points[k], u, scheme, node_rng(seed, k))
        return PointRecord(
            point=rule.points[k].tolist(),
            h_hat=h_hat.tolist(),
            s_hat=s_hat.tolist(),
            residual=residual.tolist(),
            std_error=error.tolist(),
        )

    records = _map_nodes(evaluate, len(rule), workers, progress, f"{patch.name} u={tuple(u)}")
    norms = np.array([np.linalg.norm(r.residual) for r in records])
    errors = np.array([np.linalg.norm(r.std_error) for r in records])
    sup_norm = float(norms.max())
    l2_norm = float(np.sqrt(rule.integrate(norms ** 2)))
    max_error = float(errors.max())
    verdict = sup_norm <= tolerance + 3.0 * max_error
    logger.info("%s u=%s: sup residual %.3e, verdict %s", patch.name, tuple(u), sup_norm, verdict)
    return MinimalityReport(
        u=list(u),
        curvature=patch.ambient.curvature,
        scheme=scheme.scheme_name(patch.q),
        group=scheme.group,
        seed=seed,
        resolution=list(rule.resolution),
        records=records,
        sup_norm=sup_norm,
        l2_norm=l2_norm,
        max_std_error=max_error,
        tolerance=tolerance,
        verdict=verdict,
    )


def _integrate_sigma_hat(
    patch: ImmersedPatch, u: MultiIndex, rule: QuadratureRule, scheme: FiberScheme, seed: int, workers: int, progress: bool
) -> Tuple[float, float]:
    def evaluate(k: int):
        data = shape_system(patch, rule.points[k])
        average = sigma_hat(data.system, u, scheme, node_rng(seed, k))
        return average.value, average.std_error

    values = np.array(_map_nodes(evaluate, len(rule), workers, progress, f"{patch.name} sigma_hat"))
    integral = float(rule.integrate(values[:, 0]))
    error = float(np.sqrt(np.sum((rule.weights * values[:, 1]) ** 2)))
    return integral, error


def functional_value(
    patch: ImmersedPatch,
    u: Sequence[int],
    resolution: Union[int, Sequence[int]],
    scheme: FiberScheme,
    seed: int = 0,
    estimate_quadrature_error: bool = True,
    workers: int = 1,
    progress: bool = False,
) -> FunctionalValue:
    """
    Total generalized extrinsic curvature int_L sigma_hat_u dvol_L.

    The quadrature error is estimated by comparison with a rule of half the
    resolution; the Monte Carlo error is sqrt(sum (w_i se_i)^2).

    Raises:
        ValueError: If |u| > n.
    """
    u = _check_index(patch, u)
    rule = mesh_quadrature(patch, resolution)
    value, mc_error = _integrate_sigma_hat(patch, u, rule, scheme, seed, workers, progress)
    quadrature_error = 0.0
    if estimate_quadrature_error:
        coarse = tuple(max(2, r // 2) for r in rule.resolution)
        coarse_value, _ = _integrate_sigma_hat(patch, u, mesh_quadrature(patch, coarse), scheme, seed, workers, False)
        quadrature_error = abs(value - coarse_value)
    return FunctionalValue(
        u=list(u),
        value=value,
        quadrature_error=quadrature_error,
        monte_carlo_error=mc_error,
        resolution=list(rule.resolution),
    )


class BumpField:
    """
    Normal variation field V = amplitude * bump(x) * P_normal(Z).

    Z is a fixed direction of the enclosing space and P_normal the projection
    onto the normal space of the patch (inside the sphere for a sphere
    ambient), so V does not depend on the choice of normal frame.

    On closed patches the bump is the ambient Gaussian
    exp(-|phi(x) - phi(center)|^2 / (2 w^2)), smooth on the whole
    submanifold whatever the chart. Patches with a boundary use the chart:
    periodic axes exp((cos(x - c) - 1)/w^2), the others the compactly
    supported cutoff exp(1 - 1/(1 - s^2)), s = (x - c)/w, so V vanishes near
    the chart boundary.
    """

    def __init__(
        self,
        amplitude: float = 0.1,
        width: float = 1.0,
        center: Optional[Sequence[float]] = None,
        direction: Optional[Sequence[float]] = None,
    ):
        if width <= 0:
            raise ValueError(f"Bump width must be positive, got {width}")
        self.amplitude = amplitude
        self.width = width
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.direction = None if direction is None else np.asarray(direction, dtype=float)
        self.anchor: Optional[np.ndarray] = None

    def bind(self, patch: ImmersedPatch) -> "BumpField":
        """
        Fill defaults from the patch and check the support.

        Raises:
            ValueError: If the cutoff does not vanish before the chart boundary.
        """
        chart = patch.chart
        center = chart.center() if self.center is None else self.center
        if len(center) != patch.n:
            raise ValueError(f"Bump center {center.tolist()} does not match the {patch.n} chart axes")
        size = patch.ambient.enclosing_dimension
        direction = 1.0 / np.arange(1, size + 1) if self.direction is None else self.direction
        if len(direction) != size:
            raise ValueError(f"Direction must have {size} components, got {len(direction)}")
        bound = BumpField(self.amplitude, self.width, center, direction / np.linalg.norm(direction))
        if patch.closed:
            bound.anchor = np.asarray(patch.evaluate(center), dtype=float)
            return bound
        for axis, (lo, hi, periodic) in enumerate(zip(chart.lower, chart.upper, chart.periodic)):
            if not periodic and (center[axis] - self.width <= lo or center[axis] + self.width >= hi):
                raise ValueError(
                    f"Bump support [{center[axis] - self.width}, {center[axis] + self.width}] on axis {axis} "
                    f"must lie strictly inside ({lo}, {hi})"
                )
        return bound

    def profile(self, patch: ImmersedPatch, x: np.ndarray) -> float:
        if self.anchor is not None:
            offset = np.asarray(patch.evaluate(x), dtype=float) - self.anchor
            return float(np.exp(-(offset @ offset) / (2.0 * self.width ** 2)))
        value = 1.0
        for axis, periodic in enumerate(patch.chart.periodic):
            offset = x[axis] - self.center[axis]
            if periodic:
                value *= np.exp((np.cos(offset) - 1.0) / self.width ** 2)
                continue
            s = offset / self.width
            if abs(s) >= 1.0:
                return 0.0
            value *= np.exp(1.0 - 1.0 / (1.0 - s * s))
        return float(value)

    def vector(self, patch: ImmersedPatch, x: np.ndarray) -> np.ndarray:
        """
        V(x) in enclosing coordinates.
        """
        weight = self.amplitude * self.profile(patch, x)
        if weight == 0.0:
            return np.zeros(patch.ambient.enclosing_dimension)
        _, normal = tangent_normal_frames(patch, x)
        return weight * (normal @ (normal.T @ self.direction))


@dataclass
class VariationSpec:
    """
    A patch, a normal variation field on it, and the finite-difference steps.
    """

    patch: ImmersedPatch
    field: BumpField
    steps: Sequence[float] = DEFAULT_STEPS
    _cache: Dict[bytes, Tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.steps or any(h <= 0 for h in self.steps):
            raise ValueError(f"Steps must be positive, got {list(self.steps)}")
        self.field = self.field.bind(self.patch)

    def field_derivatives(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        V, its Jacobian and Hessian at x (cached).

        Central differences at steps h and h/2 combined by Richardson
        extrapolation, fourth-order accurate.
        """
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key not in self._cache:
            def field_at(p):
                return self.field.vector(self.patch, p)

            h = self.patch.fd_step
            coarse_jac, coarse_hess = finite_difference_derivatives(field_at, x, h)
            fine_jac, fine_hess = finite_difference_derivatives(field_at, x, h / 2)
            self._cache[key] = (
                field_at(x),
                (4.0 * fine_jac - coarse_jac) / 3.0,
                (4.0 * fine_hess - coarse_hess) / 3.0,
            )
        return self._cache[key]


class DeformedPatch(ImmersedPatch):
    """
    phi_t = phi + t V, radially re-projected for a sphere ambient.
    """

    def __init__(self, spec: VariationSpec, t: float):
        base = spec.patch
        super().__init__(base.n, base.q, base.ambient, base.chart, f"{base.name}[t={t:g}]", base.fd_step)
        self.spec = spec
        self.t = t
        self.analytic = base.analytic
        self.closed = base.closed

    def _moved(self, x):
        x = np.asarray(x, dtype=float)
        value, jac, hess = self.spec.field_derivatives(x)
        base_jac, base_hess = self.spec.patch.derivatives(x)
        point = self.spec.patch.evaluate(x) + self.t * value
        return point, base_jac + self.t * jac, base_hess + self.t * hess

    def evaluate(self, x):
        point, _, _ = self._moved(x)
        if self.ambient.kind == "sphere":
            return self.ambient.radius * point / np.linalg.norm(point)
        return point

    def derivatives(self, x):
        psi, d1, d2 = self._moved(x)
        if self.ambient.kind != "sphere":
            return d1, d2
        r = self.ambient.radius
        rho = np.linalg.norm(psi)
        rho_i = psi @ d1 / rho
        rho_ij = (d1.T @ d1 + np.einsum("m,mij->ij", psi, d2)) / rho - np.outer(rho_i, rho_i) / rho
        jac = r * (d1 / rho - np.outer(psi, rho_i) / rho ** 2)
        hess = r * (
            d2 / rho
            - (np.einsum("mi,j->mij", d1, rho_i) + np.einsum("mj,i->mij", d1, rho_i)) / rho ** 2
            - np.einsum("m,ij->mij", psi, rho_ij) / rho ** 2
            + 2.0 * np.einsum("m,i,j->mij", psi, rho_i, rho_i) / rho ** 3
        )
        return jac, hess


def first_variation_check(
    spec: VariationSpec,
    u: Sequence[int],
    resolution: Union[int, Sequence[int]],
    scheme: FiberScheme,
    seed: int = 0,
    workers: int = 1,
    progress: bool = False,
) -> ConvergenceReport:
    """
    Compare finite differences of int sigma_hat_u along phi_t with
    int < c(n+1-|u|) H_hat_u - S_hat_u + W_u, V >.

    The left side is (F(h) - F(-h)) / 2h for every step h; its observed
    order comes from successive differences of these quotients, which does
    not depend on the quadrature error of the right side. The same node
    seeds are used for every t.

    Raises:
        ValueError: If |u| > n.
        NotImmersedError: If a deformed patch is singular, with the failing t.
    """
    patch = spec.patch
    u = _check_index(patch, u)
    rule = mesh_quadrature(patch, resolution)

    def rhs_node(k: int):
        point = rule.points[k]
        data, _, _, residual, error = _node_residual(patch, point, u, scheme, node_rng(seed, k))
        v_coordinates = data.normal.T @ spec.field_derivatives(point)[0]
        return float(residual @ v_coordinates), float(np.linalg.norm(error) * np.linalg.norm(v_coordinates))

    rhs_values = np.array(_map_nodes(rhs_node, len(rule), workers, progress, f"{patch.name} variation"))
    rhs = float(rule.integrate(rhs_values[:, 0]))
    rhs_error = float(np.sqrt(np.sum((rule.weights * rhs_values[:, 1]) ** 2)))

    rows, quotients, mc_errors = [], [], []
    for h in spec.steps:
        values = []
        for t in (h, -h):
            deformed = DeformedPatch(spec, t)
            try:
                deformed_rule = mesh_quadrature(deformed, rule.resolution)
                values.append(_integrate_sigma_hat(deformed, u, deformed_rule, scheme, seed, workers, False))
            except NotImmersedError as e:
                raise NotImmersedError(e.singular_value, e.point, t) from e
        lhs = (values[0][0] - values[1][0]) / (2 * h)
        mc_errors.append(np.hypot(values[0][1], values[1][1]) / (2 * h))
        quotients.append(lhs)
        rows.append(ConvergenceRow(step=h, lhs=lhs, rhs=rhs, difference=lhs - rhs))
        logger.debug("h=%g lhs=%.10e rhs=%.10e", h, lhs, rhs)

    floor = 1e-9 * max(1.0, abs(rhs))
    increments = [quotients[k] - quotients[k + 1] for k in range(len(quotients) - 1)]
    order = observed_order(list(spec.steps[:-1]), increments, floor)
    tolerance = max(VARIATION_RELATIVE_TOLERANCE * abs(rhs), VARIATION_ABSOLUTE_TOLERANCE)
    tolerance += 3.0 * (rhs_error + mc_errors[-1])
    agrees = abs(rows[-1].difference) <= tolerance
    passed = agrees and (order is None or order >= REQUIRED_ORDER)
    logger.info("first variation %s u=%s: diff %.3e, order %s", patch.name, tuple(u), rows[-1].difference, order)
    return ConvergenceReport(
        u=list(u),
        rows=rows,
        observed_order=order,
        required_order=REQUIRED_ORDER,
        tolerance=tolerance,
        passed=passed,
    )


def second_order_vector(system: OperatorSystem, curvature: float) -> np.ndarray:
    """
    (1/2 (|H|^2 - |B|^2) - c (n-1)) H - tr(B o A^H) + tr(B o A^2) in frame coordinates.
    """
    a = system.matrices
    h = np.trace(a, axis1=1, axis2=2)
    b2 = float(np.sum(a ** 2))
    a_h = np.einsum("b,bij->ij", h, a)
    a_squared = np.einsum("bij,bjk->ik", a, a)
    tr_b_ah = np.einsum("aij,ji->a", a, a_h)
    tr_b_a2 = np.einsum("aij,ji->a", a, a_squared)
    return (0.5 * (h @ h - b2) - curvature * (system.n - 1)) * h - tr_b_ah + tr_b_a2


def second_order_condition(patch: ImmersedPatch, x: Sequence[float]) -> np.ndarray:
    """
    The frame-free u-minimality vector for u = b#b#(0) at x, in the
    reference normal frame. It vanishes exactly when the sum over b of the
    residuals c(n-1) H_u - S_u does.

    Raises:
        NotImmersedError: If the patch is singular at x.
    """
    data = shape_system(patch, x)
    return second_order_vector(data.system, patch.ambient.curvature)


def sections_in_frame(system: OperatorSystem, u: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    H_u and S_u of one frame (no averaging).
    """
    u = MultiIndex(u)
    table = newton_table(system, min(length(u), system.n))
    h = np.array([table.sigma(lower(a, u)) for a in range(system.q)])
    t_u = table.transformation(u)
    s = np.array([np.trace(system.matrices[a] @ t_u) for a in range(system.q)])
    return h, s


def frame_summed_sections(system: OperatorSystem, curvature: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Sums over b of H_u and S_u for u = b#b#(0), and of the residual
    c(n-1) H_u - S_u. The sums do not depend on the frame.

    Raises:
        ValueError: If n < 2.
    """
    if system.n < 2:
        raise ValueError("Second-order indices need n ≥ 2")
    zero = MultiIndex.zero(system.q)
    h_sum = np.zeros(system.q)
    s_sum = np.zeros(system.q)
    for beta in range(system.q):
        h, s = sections_in_frame(system, raise_index(beta, raise_index(beta, zero)))
        h_sum += h
        s_sum += s
    return h_sum, s_sum, curvature * (system.n - 1) * h_sum - s_sum
