import math

import numpy as np
import pytest

import minimality
from haar import ExactScheme, MonteCarloScheme
from minimality import (
    BumpField,
    DeformedPatch,
    VariationSpec,
    curvature_term_w,
    second_order_vector,
    first_variation_check,
    frame_summed_sections,
    functional_value,
    minimality_residual,
)
from multiindex import enumerate_indices, length
from newton import OperatorSystem
from patches import (
    CatenoidPatch,
    PlanePatch,
    ProductTorus,
    RevolutionTorus,
    SphereInSpherePatch,
    UmbilicalSpherePatch,
    VeronesePatch,
)
from submanifold import AmbientSpec, NotImmersedError, RigidMotionPatch, finite_difference_derivatives, shape_system

EXACT = ExactScheme("O")
STEPS = (1e-2, 5e-3, 2.5e-3)


def indices_of_length(q, k):
    return [u for u in enumerate_indices(q, k) if length(u) == k]


@pytest.mark.parametrize("n,q", [(2, 1), (2, 2), (3, 2)])
def test_umbilical_sphere_is_minimal_for_top_degree(n, q):
    patch = UmbilicalSpherePatch(n, q, 1.0)
    for u in indices_of_length(q, n):
        report = minimality_residual(patch, u, 6, EXACT)
        assert report.sup_norm <= 1e-6
        assert report.verdict


@pytest.mark.parametrize("n,q,u", [(2, 1, (0,)), (2, 2, (0, 0)), (3, 2, (2, 0))])
def test_umbilical_sphere_negative_control(n, q, u):
    report = minimality_residual(UmbilicalSpherePatch(n, q, 1.0), u, 6, EXACT)
    assert report.sup_norm >= 1e-3
    assert not report.verdict


def test_sphere_in_sphere_corrected_condition():
    r = 1.0
    rho = r / math.sqrt(3.0)
    good = minimality_residual(SphereInSpherePatch(3, 1, r, rho), (2,), 6, EXACT)
    bad = minimality_residual(SphereInSpherePatch(3, 1, r, 1.1 * rho), (2,), 6, EXACT)
    assert good.sup_norm <= 1e-5
    assert bad.sup_norm >= 10 * 1e-5
    assert good.curvature == pytest.approx(1.0)


def test_extra_factor_radius_is_not_minimal():
    report = minimality_residual(SphereInSpherePatch(3, 1, 1.0, 1.0 / math.sqrt(2.0)), (2,), 6, EXACT)
    assert report.sup_norm >= 1e-4


def test_totally_geodesic_plane_any_index():
    patch = PlanePatch(2, 2)
    for u in enumerate_indices(2, 2):
        assert minimality_residual(patch, u, 4, EXACT).sup_norm <= 1e-12


def test_zero_index_is_classical_minimality():
    patch = RevolutionTorus(1.0, 2.0)
    report = minimality_residual(patch, (0,), 8, EXACT)
    for record in report.records:
        h = np.linalg.norm(shape_system(patch, record.point).mean_curvature)
        assert np.linalg.norm(record.residual) == pytest.approx(h, abs=1e-12)
    assert report.sup_norm == pytest.approx(max(np.linalg.norm(r.residual) for r in report.records))
    assert all(len(r.residual) == patch.q for r in report.records)


def test_gauge_invariance_of_summary():
    patch = ProductTorus(1.0, 1.5)
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((4, 4)))
    moved = RigidMotionPatch(patch, q)
    base = minimality_residual(patch, (2, 0), 6, EXACT)
    rotated = minimality_residual(moved, (2, 0), 6, EXACT)
    assert rotated.sup_norm == pytest.approx(base.sup_norm, rel=1e-9)
    assert rotated.l2_norm == pytest.approx(base.l2_norm, rel=1e-9)


def test_index_longer_than_dimension_rejected():
    with pytest.raises(ValueError):
        minimality_residual(UmbilicalSpherePatch(2, 2, 1.0), (2, 2), 4, EXACT)


def test_curvature_term_needs_space_form():
    assert not curvature_term_w(AmbientSpec(kind="euclidean", dimension=3), 1).any()
    odd = AmbientSpec.model_construct(kind="product", dimension=3, radius=None)
    with pytest.raises(NotImplementedError):
        curvature_term_w(odd, 1)


def test_functional_values_on_unit_sphere():
    patch = UmbilicalSpherePatch(2, 1, 1.0)
    assert functional_value(patch, (0,), 24, EXACT).value == pytest.approx(4 * np.pi, rel=1e-10)
    gauss = functional_value(patch, (2,), 24, EXACT)
    assert gauss.value == pytest.approx(4 * np.pi, rel=1e-10)
    assert gauss.quadrature_error < 1e-8
    assert gauss.monte_carlo_error == 0.0
    assert functional_value(patch, (1,), 24, EXACT).value == pytest.approx(0.0, abs=1e-12)


def test_functional_value_reports_monte_carlo_error():
    value = functional_value(ProductTorus(1.0, 1.5), (2, 0), 4, MonteCarloScheme("O", 64), seed=3)
    assert value.monte_carlo_error > 0.0


def test_deterministic_reports_for_fixed_seed():
    patch = UmbilicalSpherePatch(2, 2, 1.0)
    scheme = MonteCarloScheme("O", 128)
    first = minimality_residual(patch, (1, 1), 4, scheme, seed=7)
    second = minimality_residual(patch, (1, 1), 4, scheme, seed=7, workers=3)
    assert first.to_json() == second.to_json()
    other = minimality_residual(patch, (1, 1), 4, scheme, seed=8)
    assert other.to_json() != first.to_json()


def test_frame_summed_sections_match_second_order_condition():
    rng = np.random.default_rng(5)
    for q in (1, 2, 3):
        a = rng.uniform(-1.0, 1.0, size=(q, 3, 3))
        system = OperatorSystem((a + np.swapaxes(a, 1, 2)) / 2, symmetric=True)
        h_sum, _, residual = frame_summed_sections(system, 0.7)
        assert np.allclose(residual, -second_order_vector(system, 0.7), atol=1e-10)
        assert np.allclose(h_sum, np.trace(system.matrices, axis1=1, axis2=2))


def test_bump_field_support_checked():
    patch = CatenoidPatch(1.0, 1.0)
    with pytest.raises(ValueError):
        VariationSpec(patch, BumpField(0.1, 2.0))
    spec = VariationSpec(patch, BumpField(0.1, 0.5))
    assert spec.field.anchor is None
    tangent_vector = shape_system(patch, patch.chart.center()).tangent[:, 0]
    assert spec.field_derivatives(patch.chart.center())[0] @ tangent_vector == pytest.approx(0.0, abs=1e-12)
    assert not spec.field_derivatives(np.array([0.8, 0.0]))[0].any()


def test_closed_patch_bump_is_smooth_across_the_pole():
    patch = UmbilicalSpherePatch(2, 1, 1.0)
    spec = VariationSpec(patch, BumpField(0.1, 5.0))
    assert spec.field.anchor is not None
    pole = [spec.field.profile(patch, np.array([0.0, w])) for w in (0.0, 1.0, 4.0)]
    assert pole[0] > 0.0
    assert pole == pytest.approx([pole[0]] * 3, abs=1e-15)
    near = spec.field.profile(patch, np.array([1e-3, 2.0]))
    assert near == pytest.approx(pole[0], abs=1e-5)


@pytest.mark.parametrize(
    "patch,u",
    [
        (UmbilicalSpherePatch(2, 1, 1.0), (0,)),
        (SphereInSpherePatch(2, 1, 1.0, 0.6), (2,)),
    ],
)
def test_first_variation_on_sphere_patches(patch, u):
    spec = VariationSpec(patch, BumpField(0.1, 1.0), STEPS)
    report = first_variation_check(spec, u, 32, EXACT)
    assert report.passed
    assert abs(report.rows[-1].rhs) > 1e-4
    assert report.observed_order is None or report.observed_order >= 1.8


def test_deformed_sphere_patch_stays_on_sphere():
    patch = SphereInSpherePatch(3, 1, 1.0, 0.5)
    spec = VariationSpec(patch, BumpField(0.2, 0.8))
    deformed = DeformedPatch(spec, 0.05)
    x = patch.chart.center() + 0.1
    assert np.linalg.norm(deformed.evaluate(x)) == pytest.approx(1.0, abs=1e-12)
    jac, hess = deformed.derivatives(x)
    fd_jac, fd_hess = finite_difference_derivatives(deformed.evaluate, x, 1e-4)
    assert np.allclose(jac, fd_jac, atol=1e-6)
    assert np.allclose(hess, fd_hess, atol=1e-3)


def test_zero_field_variation():
    spec = VariationSpec(RevolutionTorus(1.0, 2.0), BumpField(0.0, 1.0), STEPS)
    report = first_variation_check(spec, (0,), 8, EXACT)
    assert report.passed
    assert all(row.lhs == 0.0 and row.rhs == 0.0 for row in report.rows)


def test_area_variation_on_small_mesh():
    spec = VariationSpec(RevolutionTorus(1.0, 2.0), BumpField(0.1, 1.0), STEPS)
    report = first_variation_check(spec, (0,), 24, EXACT)
    assert report.passed
    assert abs(report.rows[-1].difference) <= max(1e-3 * abs(report.rows[-1].rhs), 1e-6)


def test_failing_deformation_reports_time(monkeypatch):
    original = minimality.mesh_quadrature

    def failing(patch, resolution):
        if isinstance(patch, DeformedPatch):
            raise NotImmersedError(0.0, [0.0, 0.0])
        return original(patch, resolution)

    monkeypatch.setattr(minimality, "mesh_quadrature", failing)
    spec = VariationSpec(RevolutionTorus(1.0, 2.0), BumpField(0.1, 1.0), STEPS)
    with pytest.raises(NotImmersedError) as info:
        first_variation_check(spec, (0,), 4, EXACT)
    assert info.value.t == STEPS[0]


@pytest.mark.slow
@pytest.mark.parametrize(
    "patch,u",
    [
        (RevolutionTorus(1.0, 2.0), (0,)),
        (RevolutionTorus(1.0, 2.0), (2,)),
        (ProductTorus(1.0, 1.5), (0, 0)),
        (ProductTorus(1.0, 1.5), (2, 0)),
    ],
)
def test_first_variation_on_closed_patches(patch, u):
    spec = VariationSpec(patch, BumpField(0.1, 1.0), STEPS)
    report = first_variation_check(spec, u, 64, EXACT)
    assert report.passed
    assert report.observed_order is None or report.observed_order >= 1.8


@pytest.mark.slow
@pytest.mark.parametrize(
    "patch,u,resolution",
    [
        (UmbilicalSpherePatch(2, 1, 1.0), (0,), 64),
        (UmbilicalSpherePatch(2, 1, 1.0), (1,), 64),
        (UmbilicalSpherePatch(2, 1, 1.0), (2,), 64),
        (UmbilicalSpherePatch(2, 2, 1.0), (1, 1), 64),
        (SphereInSpherePatch(3, 1, 1.0, 1.0 / math.sqrt(3.0)), (0,), 16),
        (SphereInSpherePatch(3, 1, 1.0, 1.0 / math.sqrt(3.0)), (2,), 16),
        (VeronesePatch(), (0, 0), 64),
        (VeronesePatch(), (2, 0), 64),
        (VeronesePatch(), (1, 1), 64),
    ],
)
def test_first_variation_on_closed_sphere_patches(patch, u, resolution):
    spec = VariationSpec(patch, BumpField(0.1, 1.0), STEPS)
    report = first_variation_check(spec, u, resolution, EXACT)
    assert report.passed
    assert report.observed_order is None or report.observed_order >= 1.8
