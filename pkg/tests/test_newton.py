import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from multiindex import enumerate_indices, length, permute
from newton import (
    OperatorSystem,
    default_tolerance,
    elementary_symmetric,
    identity_residual,
    newton_table,
    observed_order,
    relabel_system,
    right_recursion_check,
    sigma_oracle,
    trace_residual,
    variation_check,
)
from polynomial import TruncatedRing

REL_TOLERANCE = 1e-10


def random_symmetric_system(rng, q, n):
    a = rng.uniform(-1.0, 1.0, size=(q, n, n))
    return OperatorSystem((a + np.swapaxes(a, 1, 2)) / 2, symmetric=True)


def corpus(count=100, seed=11):
    rng = np.random.default_rng(seed)
    return [random_symmetric_system(rng, int(rng.integers(1, 4)), int(rng.integers(2, 6))) for _ in range(count)]


def test_diagonal_example():
    table = newton_table(OperatorSystem([np.diag([1.0, 2.0, 3.0])]))
    assert table.sigma((1,)) == pytest.approx(6.0)
    assert table.sigma((2,)) == pytest.approx(11.0)
    assert table.sigma((3,)) == pytest.approx(6.0)
    assert table.sigma((0,)) == 1.0


def test_empty_system_rejected():
    with pytest.raises(ValueError, match="system must contain q ≥ 1 matrices"):
        OperatorSystem(np.zeros((0, 2, 2)))
    with pytest.raises(ValueError, match="system must contain q ≥ 1 matrices"):
        OperatorSystem.from_dict({"matrices": []})


def test_symmetric_flag_checked():
    with pytest.raises(ValueError):
        OperatorSystem([[[0.0, 1.0], [0.0, 0.0]]], symmetric=True)


def test_recursion_matches_determinant_expansion():
    for system in corpus():
        table = newton_table(system)
        oracle = sigma_oracle(system)
        assert set(oracle) == set(table)
        for u, value in oracle.items():
            assert abs(table.sigma(u) - value) <= REL_TOLERANCE * max(1.0, abs(value))


def test_trace_and_lowering_identities():
    for system in corpus():
        table = newton_table(system)
        tolerance = default_tolerance(system, (system.n,))
        assert trace_residual(table) <= tolerance
        assert identity_residual(table) <= tolerance


def test_recursion_left_and_right_agree_for_symmetric_systems():
    for system in corpus(20, seed=5):
        assert right_recursion_check(system, newton_table(system)) <= default_tolerance(system, (system.n,))


def test_transformation_vanishes_at_top_degree():
    for system in corpus(30, seed=7):
        table = newton_table(system)
        for u in enumerate_indices(system.q, system.n):
            if length(u) == system.n:
                assert np.max(np.abs(table.transformation(u))) <= default_tolerance(system, u)


def test_beyond_top_degree_is_zero():
    system = OperatorSystem(np.eye(2)[None])
    table = newton_table(system)
    assert table.sigma((3,)) == 0.0
    assert not table.transformation((3,)).any()


def test_lookup_rejects_wrong_number_of_components():
    table = newton_table(OperatorSystem([np.eye(2), np.diag([1.0, -1.0])]))
    for u in ((5,), (0,), (1, 0, 0)):
        with pytest.raises(ValueError, match="does not have q=2 components"):
            table.sigma(u)
        with pytest.raises(ValueError, match="does not have q=2 components"):
            table.transformation(u)
    assert table.sigma((3, 0)) == 0.0


def test_codimension_one_section_identity():
    rng = np.random.default_rng(2)
    for _ in range(20):
        system = random_symmetric_system(rng, 1, 5)
        table = newton_table(system)
        a = system.matrices[0]
        for r in range(system.n):
            lhs = np.trace(a @ table.transformation((r,)))
            assert lhs == pytest.approx((r + 1) * table.sigma((r + 1,)), abs=1e-10)


def test_codimension_one_reduces_to_elementary_symmetric():
    rng = np.random.default_rng(8)
    for _ in range(50):
        n = int(rng.integers(1, 7))
        system = random_symmetric_system(rng, 1, n)
        expected = elementary_symmetric(np.linalg.eigvalsh(system.matrices[0]))
        table = newton_table(system)
        for r in range(n + 1):
            assert abs(table.sigma((r,)) - expected[r]) <= 1e-8


def test_relabeling_permutes_indices():
    rng = np.random.default_rng(4)
    system = random_symmetric_system(rng, 3, 4)
    tau = (2, 0, 1)
    relabeled = newton_table(relabel_system(system, tau))
    original = newton_table(system)
    inverse = list(np.argsort(tau))
    for u in enumerate_indices(3, 4):
        assert relabeled.sigma(u) == pytest.approx(original.sigma(permute(u, inverse)), abs=1e-10)


@seed(21)
@settings(max_examples=25, deadline=None)
@given(
    entries=arrays(np.float64, (2, 3, 3), elements=st.floats(min_value=-1.0, max_value=1.0)),
    slopes=arrays(np.float64, (2, 3, 3), elements=st.floats(min_value=-1.0, max_value=1.0)),
)
def test_variation_of_sigma_along_linear_curves(entries, slopes):
    start = OperatorSystem(entries)
    report = variation_check(lambda t: OperatorSystem(start.matrices + t * slopes), (2, 1))
    assert report.passed
    assert report.observed_order is None or report.observed_order >= 1.8
    assert report.rows[-1].difference == pytest.approx(0.0, abs=1e-3)


def test_observed_order_skips_exact_pairs():
    assert observed_order([1e-2, 5e-3, 2.5e-3], [4e-4, 1e-4, 2.5e-5], 1e-12) == pytest.approx(2.0)
    assert observed_order([1e-2, 5e-3], [1e-15, 1e-16], 1e-12) is None


def test_truncated_ring_determinant_of_identity_plus_linear():
    ring = TruncatedRing(1, 2)
    m = [[ring.linear(1.0, [2.0]), ring.linear(0.0, [1.0])], [ring.linear(0.0, [1.0]), ring.linear(1.0, [3.0])]]
    det = ring.determinant(m)
    # (1 + 2t)(1 + 3t) - t^2 = 1 + 5t + 5t^2
    assert np.allclose(det, [1.0, 5.0, 5.0])
