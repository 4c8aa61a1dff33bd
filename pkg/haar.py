"""

Integration over the fiber of the normal frame bundle.

After fixing a reference normal frame e at a point, every other frame is
e' = e g with g in O(q) (or SO(q)), e'_b = sum_a e_a g_ab. Integrating a
frame-dependent quantity over the fiber with the normalized Haar measure is
then an average over g. Two families of schemes are provided:

    MonteCarloScheme  Haar samples with a reported standard error.
    ExactScheme       Quadrature that is exact for the polynomial integrands
                      met here: two points for q = 1 and a uniform angle grid
                      for q = 2 (rotations, plus reflections for O(2)).

"""

import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from infotypes import FiberAverage, SectionAverages
from multiindex import ANNIHILATED, MultiIndex, enumerate_indices, length, lower, permute
from newton import OperatorSystem, newton_tables

logger = logging.getLogger(__name__)

GROUPS = ("O", "SO")
DEFAULT_SAMPLES = 4096
# a standard error needs a sample variance
MIN_SAMPLES = 2
DEFAULT_NODES = 64
ORTHOGONALITY_TOLERANCE = 1e-12


def _check_group(group: str) -> str:
    if group not in GROUPS:
        raise ValueError(f"Group must be one of {GROUPS}, got '{group}'")
    return group


@dataclass(frozen=True)
class FrameRotation:
    """
    Orthogonal q x q matrix g relating a frame to the reference frame.
    """

    matrix: np.ndarray
    group: str = "O"

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        _check_group(self.group)
        if g.shape[0] != g.shape[1]:
            raise ValueError(f"Frame rotation must be square, got {g.shape}")
        defect = np.max(np.abs(g.T @ g - np.eye(g.shape[0])))
        if defect > ORTHOGONALITY_TOLERANCE:
            raise ValueError(f"Frame rotation is not orthogonal: max |g^T g - I| = {defect:.3e}")
        if self.group == "SO" and np.linalg.det(g) < 0:
            raise ValueError("Frame rotation tagged SO has determinant -1")
        object.__setattr__(self, "matrix", g)

    @property
    def q(self) -> int:
        return self.matrix.shape[0]


def node_rng(seed: int, index: int) -> np.random.Generator:
    """
    Independent stream for mesh node index, derived from the run seed.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def haar_samples(q: int, group: str, samples: int, rng: np.random.Generator) -> np.ndarray:
    """
    Haar-distributed orthogonal matrices of shape (samples, q, q).

    QR of standard Gaussian matrices, columns multiplied by the signs of the
    diagonal of R; for SO the last column is flipped when det = -1.
    """
    _check_group(group)
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    gaussian = rng.standard_normal((samples, q, q))
    qs, rs = np.linalg.qr(gaussian)
    signs = np.sign(np.diagonal(rs, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    qs = qs * signs[:, None, :]
    if group == "SO":
        negative = np.linalg.det(qs) < 0
        qs[negative, :, -1] *= -1.0
    return qs


def haar_sample(q: int, group: str, rng: np.random.Generator) -> FrameRotation:
    """
    One Haar-distributed element of O(q) or SO(q).
    """
    return FrameRotation(haar_samples(q, group, 1, rng)[0], group)


def rotate_system(system: OperatorSystem, g: Union[FrameRotation, np.ndarray]) -> OperatorSystem:
    """
    Shape operators in the frame e' = e g: A'_b = sum_a g_ab A_a.

    Raises:
        ValueError: If g is not q x q.
    """
    matrix = g.matrix if isinstance(g, FrameRotation) else np.atleast_2d(np.asarray(g, dtype=float))
    if matrix.shape != (system.q, system.q):
        raise ValueError(f"Rotation of shape {matrix.shape} does not act on q={system.q} operators")
    return OperatorSystem(np.einsum("ab,aij->bij", matrix, system.matrices), symmetric=system.symmetric)


class FiberScheme(ABC):
    """
    Abstract rule for averaging over the fiber O(q) or SO(q).
    """

    def __init__(self, group: str, name: str):
        self.group = _check_group(group)
        self.name = name

    stochastic: bool = False

    @abstractmethod
    def frames(self, q: int, rng: Optional[np.random.Generator]) -> Tuple[np.ndarray, np.ndarray]:
        """
        Return the rotations (S, q, q) and the weights (S,) summing to one.
        """
        pass

    def scheme_name(self, q: int) -> str:
        return self.name

    def average(self, values: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Weighted mean over the first axis and its standard error.
        """
        mean = np.tensordot(weights, values, axes=(0, 0))
        if not self.stochastic:
            return mean, np.zeros_like(mean)
        spread = np.std(values, axis=0, ddof=1)
        return mean, spread / np.sqrt(values.shape[0])


class MonteCarloScheme(FiberScheme):
    stochastic = True

    def __init__(self, group: str = "O", samples: int = DEFAULT_SAMPLES):
        super().__init__(group, "monte_carlo")
        if samples < MIN_SAMPLES:
            raise ValueError(f"Monte Carlo averaging needs at least {MIN_SAMPLES} samples, got {samples}")
        self.samples = samples

    def frames(self, q, rng):
        if rng is None:
            raise ValueError("Monte Carlo averaging needs a seeded random generator")
        g = haar_samples(q, self.group, self.samples, rng)
        return g, np.full(self.samples, 1.0 / self.samples)


class ExactScheme(FiberScheme):
    """
    Deterministic fiber quadrature for q = 1 and q = 2.

    For q = 2 the integrands are trigonometric polynomials in the rotation
    angle of degree at most |u| + 1, so a uniform grid with more nodes than
    that integrates them exactly.
    """

    def __init__(self, group: str = "O", nodes: int = DEFAULT_NODES):
        super().__init__(group, "exact")
        if nodes < 2:
            raise ValueError(f"Angle quadrature needs at least 2 nodes, got {nodes}")
        self.nodes = nodes

    def scheme_name(self, q: int) -> str:
        if q == 1:
            return "exact_q1"
        return "circle_so2" if self.group == "SO" else "circle_o2"

    def frames(self, q, rng):
        if q == 1:
            if self.group == "SO":
                return np.ones((1, 1, 1)), np.ones(1)
            return np.array([[[1.0]], [[-1.0]]]), np.full(2, 0.5)
        if q != 2:
            raise NotImplementedError(f"Exact fiber quadrature is available for q ≤ 2, got q={q}")
        angles = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        c, s = np.cos(angles), np.sin(angles)
        rotations = np.stack([np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2)
        if self.group == "SO":
            return rotations, np.full(self.nodes, 1.0 / self.nodes)
        reflections = rotations @ np.diag([1.0, -1.0])
        return np.concatenate([rotations, reflections]), np.full(2 * self.nodes, 0.5 / self.nodes)


def make_scheme(kind: str, group: str, samples: int = DEFAULT_SAMPLES, nodes: int = DEFAULT_NODES) -> FiberScheme:
    """
    Scheme from its CLI name, 'mc' or 'exact'.

    Raises:
        ValueError: If the kind is unknown.
    """
    if kind == "mc":
        return MonteCarloScheme(group, samples)
    if kind == "exact":
        return ExactScheme(group, nodes)
    raise ValueError(f"Fiber scheme '{kind}' is not supported (use 'mc' or 'exact')")


def _rotated_tables(system: OperatorSystem, n_max: int, scheme: FiberScheme, rng):
    g, weights = scheme.frames(system.q, rng)
    rotated = np.einsum("sab,aij->sbij", g, system.matrices)
    return g, weights, rotated, newton_tables(rotated, n_max)


def _fiber_average(value, error, scheme: FiberScheme, samples: int, q: int) -> FiberAverage:
    value = np.asarray(value)
    error = np.asarray(error)
    return FiberAverage(
        value=value.tolist() if value.ndim else float(value),
        std_error=error.tolist() if error.ndim else float(error),
        samples=samples,
        scheme=scheme.scheme_name(q),
        group=scheme.group,
    )


def _check_index(system: OperatorSystem, u: Sequence[int]) -> MultiIndex:
    u = MultiIndex(u)
    if len(u) != system.q:
        raise ValueError(f"Multi-index {tuple(u)} has {len(u)} entries but the system has q={system.q}")
    if length(u) > system.n:
        raise ValueError(f"|u|={length(u)} exceeds n={system.n}")
    return u


def sigma_hat_table(
    system: OperatorSystem, n_max: int, scheme: FiberScheme, rng: Optional[np.random.Generator] = None
) -> Dict[MultiIndex, FiberAverage]:
    """
    Fiber averages of every sigma_u with |u| <= n_max from one set of frames.
    """
    g, weights, _, tables = _rotated_tables(system, n_max, scheme, rng)
    result = {}
    for u in enumerate_indices(system.q, n_max):
        mean, error = scheme.average(tables[u][0], weights)
        result[u] = _fiber_average(mean, error, scheme, len(weights), system.q)
    return result


def sigma_hat(
    system: OperatorSystem, u: Sequence[int], scheme: FiberScheme, rng: Optional[np.random.Generator] = None
) -> FiberAverage:
    """
    Generalized extrinsic curvature: the fiber average of sigma_u.

    Raises:
        ValueError: If |u| > n or the scheme has no samples.
    """
    u = _check_index(system, u)
    return sigma_hat_table(system, length(u), scheme, rng)[u]


def _parity(tau: Sequence[int]) -> int:
    inversions = sum(1 for i in range(len(tau)) for j in range(i + 1, len(tau)) if tau[i] > tau[j])
    return inversions % 2


def symmetrized_sigma_hat(
    system: OperatorSystem, u: Sequence[int], scheme: FiberScheme, rng: Optional[np.random.Generator] = None
) -> FiberAverage:
    """
    Average of sigma_hat_{u o tau} over all permutations tau (O) or the even
    ones (SO). Equal to sigma_hat_u in exact arithmetic; averaging lowers the
    Monte Carlo variance.
    """
    u = _check_index(system, u)
    g, weights, _, tables = _rotated_tables(system, length(u), scheme, rng)
    taus = [t for t in itertools.permutations(range(system.q)) if scheme.group == "O" or _parity(t) == 0]
    values = np.mean([tables[permute(u, tau)][0] for tau in taus], axis=0)
    mean, error = scheme.average(values, weights)
    return _fiber_average(mean, error, scheme, len(weights), system.q)


def averaged_sections(
    system: OperatorSystem,
    u: Sequence[int],
    curvature: float,
    scheme: FiberScheme,
    rng: Optional[np.random.Generator] = None,
) -> SectionAverages:
    """
    Fiber averages of H_u = sum_a sigma_{a_flat(u)} e_a and
    S_u = sum_a tr(A_a T_u) e_a, in reference-frame coordinates, together
    with R_u = c (n + 1 - |u|) H_u for a space form of curvature c.

    Raises:
        ValueError: If |u| > n.
    """
    u = _check_index(system, u)
    g, weights, rotated, tables = _rotated_tables(system, length(u), scheme, rng)
    samples = len(weights)
    h_prime = np.zeros((samples, system.q))
    for beta in range(system.q):
        lowered = lower(beta, u)
        if lowered is not ANNIHILATED:
            h_prime[:, beta] = tables[lowered][0]
    s_prime = np.einsum("sbij,sji->sb", rotated, tables[u][1])
    # coordinates in e' map back to e through g
    h_ref = np.einsum("sab,sb->sa", g, h_prime)
    s_ref = np.einsum("sab,sb->sa", g, s_prime)
    h_mean, h_err = scheme.average(h_ref, weights)
    s_mean, s_err = scheme.average(s_ref, weights)
    factor = curvature * (system.n + 1 - length(u))
    return SectionAverages(
        u=list(u),
        curvature=curvature,
        h_hat=_fiber_average(h_mean, h_err, scheme, samples, system.q),
        s_hat=_fiber_average(s_mean, s_err, scheme, samples, system.q),
        r_hat=_fiber_average(factor * h_mean, abs(factor) * h_err, scheme, samples, system.q),
    )
