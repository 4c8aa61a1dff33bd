import itertools

import numpy as np
import pytest

from haar import (
    ExactScheme,
    FrameRotation,
    MonteCarloScheme,
    averaged_sections,
    haar_sample,
    haar_samples,
    make_scheme,
    node_rng,
    rotate_system,
    sigma_hat,
    sigma_hat_table,
    symmetrized_sigma_hat,
)
from multiindex import enumerate_indices, length, permute
from newton import OperatorSystem, newton_table

SAMPLES = 4096
# fraction of 3-sigma exceedances tolerated over a batch of Monte Carlo checks
EXCEEDANCE_BUDGET = 0.02


def random_symmetric_system(rng, q, n):
    a = rng.uniform(-1.0, 1.0, size=(q, n, n))
    return OperatorSystem((a + np.swapaxes(a, 1, 2)) / 2, symmetric=True)


def assert_within_budget(ratios):
    ratios = np.asarray(ratios)
    assert np.mean(ratios > 3.0) <= max(EXCEEDANCE_BUDGET, 2.0 / len(ratios))
    assert ratios.max() <= 4.5


def test_haar_samples_are_orthogonal():
    g = haar_samples(3, "O", 200, np.random.default_rng(0))
    assert np.allclose(np.einsum("sji,sjk->sik", g, g), np.eye(3), atol=1e-12)
    g_so = haar_samples(3, "SO", 200, np.random.default_rng(0))
    assert np.allclose(np.linalg.det(g_so), 1.0)


def test_haar_first_column_has_zero_mean():
    ratios = []
    for q in (2, 3, 4):
        for group in ("O", "SO"):
            g = haar_samples(q, group, SAMPLES, np.random.default_rng(q))
            # columns are uniform on the unit sphere, so each entry has variance 1/q
            std_error = 1.0 / np.sqrt(q * SAMPLES)
            ratios.extend(np.abs(g[:, :, 0].mean(axis=0)) / std_error)
    assert_within_budget(ratios)


def test_node_streams_are_reproducible():
    a = haar_sample(2, "O", node_rng(7, 3)).matrix
    b = haar_sample(2, "O", node_rng(7, 3)).matrix
    c = haar_sample(2, "O", node_rng(7, 4)).matrix
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_frame_rotation_validation():
    with pytest.raises(ValueError):
        FrameRotation(np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        FrameRotation(np.diag([1.0, -1.0]), group="SO")
    with pytest.raises(ValueError):
        make_scheme("grid", "O")
    with pytest.raises(ValueError):
        MonteCarloScheme("O", samples=1)


def test_quarter_turn_swaps_operators():
    rng = np.random.default_rng(1)
    system = random_symmetric_system(rng, 2, 3)
    rotated = rotate_system(system, np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert np.allclose(rotated.matrices[0], system.matrices[1])
    assert np.allclose(rotated.matrices[1], -system.matrices[0])


def mean_curvature_squared(system):
    table = newton_table(system)
    return sum(table.sigma(u) ** 2 for u in enumerate_indices(system.q, 1) if length(u) == 1)


def test_mean_curvature_norm_is_frame_independent():
    rng = np.random.default_rng(2)
    system = random_symmetric_system(rng, 2, 3)
    rotated = rotate_system(system, haar_sample(2, "O", rng))
    assert newton_table(rotated).sigma((0, 0)) == 1.0
    # |H|^2 is frame independent
    assert mean_curvature_squared(rotated) == pytest.approx(mean_curvature_squared(system))


def test_exact_codimension_one():
    system = OperatorSystem([np.diag([1.0, 2.0, 3.0])])
    scheme = ExactScheme("O")
    assert sigma_hat(system, (1,), scheme).value == pytest.approx(0.0, abs=1e-14)
    assert sigma_hat(system, (2,), scheme).value == pytest.approx(11.0)
    assert sigma_hat(system, (1,), ExactScheme("SO")).value == pytest.approx(6.0)


def test_odd_entries_vanish_under_o_exactly_for_q2():
    rng = np.random.default_rng(3)
    for _ in range(10):
        system = random_symmetric_system(rng, 2, 3)
        table = sigma_hat_table(system, 3, ExactScheme("O"))
        for u, average in table.items():
            if any(k % 2 for k in u):
                assert abs(average.value) <= 1e-12


def test_odd_entries_vanish_under_o_monte_carlo():
    rng = np.random.default_rng(4)
    ratios = []
    for k in range(10):
        for q in (2, 3):
            system = random_symmetric_system(rng, q, 3)
            table = sigma_hat_table(system, 3, MonteCarloScheme("O", SAMPLES), node_rng(9, 10 * q + k))
            for u, average in table.items():
                if any(e % 2 for e in u):
                    ratios.append(abs(average.value) / average.std_error)
    assert_within_budget(ratios)


def test_one_odd_one_even_vanishes_under_so2():
    rng = np.random.default_rng(5)
    ratios = []
    for k in range(10):
        system = random_symmetric_system(rng, 2, 3)
        exact = sigma_hat_table(system, 3, ExactScheme("SO"))
        sampled = sigma_hat_table(system, 3, MonteCarloScheme("SO", SAMPLES), node_rng(10, k))
        for u in exact:
            if (u[0] + u[1]) % 2 == 1:
                assert abs(exact[u].value) <= 1e-12
                ratios.append(abs(sampled[u].value) / sampled[u].std_error)
    assert_within_budget(ratios)


def test_permutation_symmetry_under_o():
    rng = np.random.default_rng(6)
    ratios = []
    for q in (2, 3):
        for k in range(5):
            system = random_symmetric_system(rng, q, 3)
            first = sigma_hat_table(system, 3, MonteCarloScheme("O", SAMPLES), node_rng(11, 2 * k + q))
            second = sigma_hat_table(system, 3, MonteCarloScheme("O", SAMPLES), node_rng(12, 2 * k + q))
            for u in first:
                for i, j in itertools.combinations(range(q), 2):
                    tau = list(range(q))
                    tau[i], tau[j] = j, i
                    v = permute(u, tau)
                    spread = np.hypot(first[u].std_error, second[v].std_error)
                    if spread > 0:
                        ratios.append(abs(first[u].value - second[v].value) / spread)
    assert_within_budget(ratios)


def test_symmetrized_average_matches_exact_average():
    rng = np.random.default_rng(7)
    system = random_symmetric_system(rng, 2, 4)
    scheme = ExactScheme("O")
    for u in [(2, 0), (2, 2), (4, 0)]:
        assert symmetrized_sigma_hat(system, u, scheme).value == pytest.approx(sigma_hat(system, u, scheme).value)


def test_exact_q3_not_available():
    system = random_symmetric_system(np.random.default_rng(8), 3, 2)
    with pytest.raises(NotImplementedError):
        sigma_hat(system, (0, 0, 0), ExactScheme("O"))


def test_index_checks():
    system = random_symmetric_system(np.random.default_rng(9), 2, 2)
    with pytest.raises(ValueError):
        sigma_hat(system, (2, 1), ExactScheme("O"))
    with pytest.raises(ValueError):
        sigma_hat(system, (1,), ExactScheme("O"))


def test_sections_monte_carlo_agrees_with_exact():
    rng = np.random.default_rng(10)
    system = random_symmetric_system(rng, 2, 3)
    exact = averaged_sections(system, (2, 0), 1.0, ExactScheme("O"))
    sampled = averaged_sections(system, (2, 0), 1.0, MonteCarloScheme("O", SAMPLES), node_rng(3, 0))
    for name in ("h_hat", "s_hat"):
        e = np.asarray(getattr(exact, name).value)
        s = np.asarray(getattr(sampled, name).value)
        err = np.asarray(getattr(sampled, name).std_error)
        assert np.all(np.abs(e - s) <= 5 * err + 1e-12)
    assert np.allclose(exact.r_hat.value, 1.0 * (3 + 1 - 2) * np.asarray(exact.h_hat.value))


def test_zero_index_sections_are_mean_curvature():
    rng = np.random.default_rng(11)
    system = random_symmetric_system(rng, 2, 3)
    sections = averaged_sections(system, (0, 0), 0.0, ExactScheme("O"))
    assert np.allclose(sections.s_hat.value, np.trace(system.matrices, axis1=1, axis2=2))
    assert np.allclose(sections.h_hat.value, 0.0)


def test_one_odd_one_even_vanishes_under_so3():
    rng = np.random.default_rng(12)
    ratios = []
    for k in range(10):
        system = random_symmetric_system(rng, 3, 3)
        table = sigma_hat_table(system, 3, MonteCarloScheme("SO", SAMPLES), node_rng(13, k))
        for u, average in table.items():
            if len({e % 2 for e in u}) == 2:
                ratios.append(abs(average.value) / average.std_error)
    assert ratios
    assert_within_budget(ratios)


def test_exact_codimension_one_matches_monte_carlo():
    rng = np.random.default_rng(14)
    ratios = []
    for k in range(10):
        system = random_symmetric_system(rng, 1, 4)
        exact = sigma_hat_table(system, 4, ExactScheme("O"))
        sampled = sigma_hat_table(system, 4, MonteCarloScheme("O", SAMPLES), node_rng(15, k))
        for u in exact:
            if u[0] % 2 == 0:
                # even degrees do not depend on the sign of the normal
                assert sampled[u].value == pytest.approx(exact[u].value, rel=1e-12, abs=1e-14)
            else:
                ratios.append(abs(sampled[u].value - exact[u].value) / sampled[u].std_error)
    assert ratios
    assert_within_budget(ratios)


def test_averages_ignore_the_reference_frame():
    rng = np.random.default_rng(16)
    reflection = np.array([[0.6, 0.8], [0.8, -0.6]])
    turn = np.array([[np.cos(1.1), -np.sin(1.1)], [np.sin(1.1), np.cos(1.1)]])
    for group, g in (("O", reflection), ("SO", turn)):
        system = random_symmetric_system(rng, 2, 3)
        rotated = rotate_system(system, g)
        scheme = ExactScheme(group)
        for u in enumerate_indices(2, 3):
            assert sigma_hat(rotated, u, scheme).value == pytest.approx(sigma_hat(system, u, scheme).value, abs=1e-12)

    ratios = []
    g = haar_sample(3, "O", np.random.default_rng(17))
    for k in range(5):
        system = random_symmetric_system(rng, 3, 3)
        first = sigma_hat_table(system, 3, MonteCarloScheme("O", SAMPLES), node_rng(18, k))
        second = sigma_hat_table(rotate_system(system, g), 3, MonteCarloScheme("O", SAMPLES), node_rng(19, k))
        for u in first:
            spread = np.hypot(first[u].std_error, second[u].std_error)
            if spread > 0:
                ratios.append(abs(first[u].value - second[u].value) / spread)
    assert_within_budget(ratios)
