"""

Extrinsic geometry of parametrized submanifold patches in a space form.

A patch is a map phi from a box of parameters into the enclosing Euclidean
space: R^m itself for a Euclidean ambient, R^(m+1) for the round sphere
S^m(r). Subclasses provide phi and, when they can, its first and second
partial derivatives; otherwise central finite differences are used.

From the derivatives we build orthonormal tangent and normal frames and the
shape operators A_a = (h^a_ij) with h^a_ij = <d^2 phi(e_i, e_j), e_a>, the
sign convention of A^N X = -(nabla_X N)^T.

"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, model_validator

from newton import OperatorSystem

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-6
SPHERE_TOLERANCE = 1e-9
FD_RELATIVE_STEP = 1e-4


class NotImmersedError(ValueError):
    """
    Raised when the Jacobian of a patch loses rank.
    """

    def __init__(self, singular_value: float, point: Sequence[float], t: Optional[float] = None):
        self.singular_value = float(singular_value)
        self.point = [float(x) for x in point]
        self.t = t
        where = f" at t={t}" if t is not None else ""
        super().__init__(
            f"Patch is not immersed at {self.point}{where}: smallest singular value {self.singular_value:.3e}"
        )


class AmbientSpec(BaseModel):
    """
    Euclidean space R^m (c = 0) or the round sphere S^m(r) (c = 1/r^2).
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["euclidean", "sphere"]
    dimension: int
    radius: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.dimension < 1:
            raise ValueError(f"Ambient dimension must be positive, got {self.dimension}")
        if self.kind == "sphere":
            if self.radius is None or self.radius <= 0:
                raise ValueError("A sphere ambient needs a positive radius")
        elif self.radius is not None:
            raise ValueError("A Euclidean ambient takes no radius")
        return self

    @property
    def curvature(self) -> float:
        return 0.0 if self.kind == "euclidean" else 1.0 / self.radius ** 2

    @property
    def enclosing_dimension(self) -> int:
        return self.dimension + (1 if self.kind == "sphere" else 0)

    def is_space_form(self) -> bool:
        return self.kind in ("euclidean", "sphere")


@dataclass(frozen=True)
class Chart:
    """
    Box of parameters; periodic axes wrap around.
    """

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    periodic: Tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.periodic)):
            raise ValueError("Chart bounds and periodicity flags must have the same length")
        if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
            raise ValueError(f"Chart box is empty: {self.lower} .. {self.upper}")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def scale(self) -> float:
        return float(max(hi - lo for lo, hi in zip(self.lower, self.upper)))

    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))


class ImmersedPatch(ABC):
    """
    Abstract parametrized codimension-q patch in a space form.

    Subclasses implement evaluate() and may override derivatives() with
    closed forms, setting analytic = True. Patches whose image is a closed
    submanifold (the chart only misses a null set) set closed = True.
    """

    analytic: bool = False
    closed: bool = False

    def __init__(self, n: int, q: int, ambient: AmbientSpec, chart: Chart, name: str, fd_step: Optional[float] = None):
        if n < 1 or q < 1:
            raise ValueError(f"Patch needs n ≥ 1 and q ≥ 1, got n={n}, q={q}")
        if ambient.dimension != n + q:
            raise ValueError(f"Ambient dimension {ambient.dimension} differs from n + q = {n + q}")
        if chart.dimension != n:
            raise ValueError(f"Chart has {chart.dimension} parameters but the patch is {n}-dimensional")
        self.n = n
        self.q = q
        self.ambient = ambient
        self.chart = chart
        self.name = name
        self.fd_step = FD_RELATIVE_STEP * chart.scale if fd_step is None else fd_step

    @abstractmethod
    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """
        phi(x) in enclosing Euclidean coordinates.
        """
        pass

    def derivatives(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        First and second partials of phi, shapes (M, n) and (M, n, n).

        The default is central differences with step fd_step.
        """
        return finite_difference_derivatives(self.evaluate, np.asarray(x, dtype=float), self.fd_step)

    def default_tolerance(self) -> float:
        return 1e-6 if self.analytic else 1e-4

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "q": self.q,
            "ambient": self.ambient.model_dump(),
            "analytic": self.analytic,
        }


def finite_difference_derivatives(func, x: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Central-difference Jacobian and Hessian of a vector valued function.
    """
    def f(p):
        return np.asarray(func(p), dtype=float)

    n = x.size
    center = f(x)
    jac = np.zeros(center.shape + (n,))
    hess = np.zeros(center.shape + (n, n))
    steps = np.eye(n) * h
    plus = [f(x + steps[i]) for i in range(n)]
    minus = [f(x - steps[i]) for i in range(n)]
    for i in range(n):
        jac[..., i] = (plus[i] - minus[i]) / (2 * h)
        hess[..., i, i] = (plus[i] - 2 * center + minus[i]) / h ** 2
        for j in range(i + 1, n):
            mixed = (
                f(x + steps[i] + steps[j])
                - f(x + steps[i] - steps[j])
                - f(x - steps[i] + steps[j])
                + f(x - steps[i] - steps[j])
            ) / (4 * h ** 2)
            hess[..., i, j] = hess[..., j, i] = mixed
    return jac, hess


class FiniteDifferencePatch(ImmersedPatch):
    """
    View of a patch whose derivatives are always taken by central differences.
    """

    analytic = False

    def __init__(self, patch: ImmersedPatch, fd_step: Optional[float] = None):
        super().__init__(patch.n, patch.q, patch.ambient, patch.chart, f"{patch.name}[fd]", fd_step)
        self.base = patch
        self.closed = patch.closed

    def evaluate(self, x):
        return self.base.evaluate(x)


class RigidMotionPatch(ImmersedPatch):
    """
    The patch composed with a fixed orthogonal map of the enclosing space.
    """

    def __init__(self, patch: ImmersedPatch, rotation: np.ndarray):
        rotation = np.asarray(rotation, dtype=float)
        size = patch.ambient.enclosing_dimension
        if rotation.shape != (size, size) or not np.allclose(rotation.T @ rotation, np.eye(size), atol=1e-12):
            raise ValueError(f"Rigid motion must be an orthogonal {size}x{size} matrix")
        super().__init__(patch.n, patch.q, patch.ambient, patch.chart, f"{patch.name}[rotated]", patch.fd_step)
        self.base = patch
        self.rotation = rotation
        self.analytic = patch.analytic
        self.closed = patch.closed

    def evaluate(self, x):
        return self.rotation @ self.base.evaluate(x)

    def derivatives(self, x):
        jac, hess = self.base.derivatives(x)
        return self.rotation @ jac, np.einsum("ab,bij->aij", self.rotation, hess)


def modified_gram_schmidt(vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orthonormalize the columns of vectors, returning (E, R) with vectors = E R.
    """
    m, k = vectors.shape
    basis = np.array(vectors, dtype=float)
    r = np.zeros((k, k))
    for i in range(k):
        r[i, i] = np.linalg.norm(basis[:, i])
        basis[:, i] /= r[i, i]
        for j in range(i + 1, k):
            r[i, j] = basis[:, i] @ basis[:, j]
            basis[:, j] -= r[i, j] * basis[:, i]
    return basis, r


@dataclass(frozen=True)
class PointFrameData:
    """
    Frames and shape operators of a patch at one parameter point.
    """

    point: np.ndarray
    position: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    system: OperatorSystem
    mean_curvature: np.ndarray
    norm_b2: float
    # <N_1, phi/|phi|>: positive for an outward codimension-one normal
    radial_alignment: float

    def second_fundamental_form(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """
        B(X, Y) in normal-frame coordinates for tangent-frame coordinate vectors.
        """
        return np.einsum("i,aij,j->a", x, self.system.matrices, y)


def _frames(patch: ImmersedPatch, x: np.ndarray, jac: np.ndarray, position: np.ndarray):
    singular = np.linalg.svd(jac, compute_uv=False)
    if singular[-1] < RANK_TOLERANCE * singular[0]:
        raise NotImmersedError(singular[-1], x)
    tangent, r = modified_gram_schmidt(jac)
    prefix = tangent
    if patch.ambient.kind == "sphere":
        radius = np.linalg.norm(position)
        if abs(radius - patch.ambient.radius) > SPHERE_TOLERANCE * max(1.0, patch.ambient.radius):
            raise ValueError(f"Patch point {position} is off the sphere of radius {patch.ambient.radius}")
        prefix = np.column_stack([position / radius, tangent])
    size = jac.shape[0]
    normals = []
    basis = prefix
    candidates = np.eye(size)
    for _ in range(patch.q):
        residual = candidates - basis @ (basis.T @ candidates)
        residual -= basis @ (basis.T @ residual)
        norms = np.linalg.norm(residual, axis=0)
        best = int(np.argmax(norms))
        normal = residual[:, best] / norms[best]
        normals.append(normal)
        basis = np.column_stack([basis, normal])
    normal = np.column_stack(normals)
    if np.linalg.det(basis) < 0:
        normal[:, -1] *= -1.0
    return tangent, r, normal


def tangent_normal_frames(patch: ImmersedPatch, x: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Orthonormal tangent frame (M, n) and normal frame (M, q) at x.

    The tangent frame is the modified Gram-Schmidt orthonormalization of the
    Jacobian columns. The normal frame completes it (and, on a sphere, the
    radial direction) to an orthonormal basis of the enclosing space, with
    the last normal flipped so the full basis is positively oriented.

    Raises:
        NotImmersedError: If the Jacobian is rank deficient.
    """
    x = np.asarray(x, dtype=float)
    jac, _ = patch.derivatives(x)
    tangent, _, normal = _frames(patch, x, jac, patch.evaluate(x))
    return tangent, normal


def shape_system(patch: ImmersedPatch, x: Sequence[float]) -> PointFrameData:
    """
    Shape operators of the patch at x, expressed in the orthonormal tangent frame.

    With J = E R the columns of R^-1 are the parameter vectors mapped onto the
    tangent frame, so h^a = R^-T (d^2 phi . N_a) R^-1.

    Raises:
        NotImmersedError: If the Jacobian is rank deficient.
    """
    x = np.asarray(x, dtype=float)
    jac, hess = patch.derivatives(x)
    position = np.asarray(patch.evaluate(x), dtype=float)
    tangent, r, normal = _frames(patch, x, jac, position)
    preimages = np.linalg.inv(r)
    projected = np.einsum("mij,ma->aij", hess, normal)
    matrices = np.einsum("ki,akl,lj->aij", preimages, projected, preimages)
    system = OperatorSystem(matrices)
    radial = position / np.linalg.norm(position) if np.linalg.norm(position) > 0 else position
    return PointFrameData(
        point=x,
        position=position,
        tangent=tangent,
        normal=normal,
        system=system,
        mean_curvature=np.trace(matrices, axis1=1, axis2=2),
        norm_b2=float(np.sum(matrices ** 2)),
        radial_alignment=float(normal[:, 0] @ radial),
    )


@dataclass(frozen=True)
class QuadratureRule:
    """
    Nodes (N, n) and weights (N,) including the Riemannian area element.
    """

    points: np.ndarray
    weights: np.ndarray
    resolution: Tuple[int, ...]

    def __iter__(self) -> Iterator[Tuple[np.ndarray, float]]:
        for point, weight in zip(self.points, self.weights):
            yield point, float(weight)

    def __len__(self) -> int:
        return len(self.weights)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def _axis_rule(lo: float, hi: float, periodic: bool, count: int) -> Tuple[np.ndarray, np.ndarray]:
    if periodic:
        nodes = lo + (hi - lo) * np.arange(count) / count
        return nodes, np.full(count, (hi - lo) / count)
    nodes, weights = leggauss(count)
    return lo + 0.5 * (hi - lo) * (nodes + 1.0), 0.5 * (hi - lo) * weights


def mesh_quadrature(patch: ImmersedPatch, resolution: Union[int, Sequence[int]]) -> QuadratureRule:
    """
    Tensor-product quadrature on the chart weighted by sqrt(det G).

    Periodic axes use the trapezoid rule, the others Gauss-Legendre nodes,
    which are strictly interior; both converge spectrally for smooth data.

    Raises:
        ValueError: If some axis has fewer than 2 nodes.
        NotImmersedError: If the metric degenerates at a node.
    """
    counts = tuple([resolution] * patch.n) if np.isscalar(resolution) else tuple(int(r) for r in resolution)
    if len(counts) != patch.n:
        raise ValueError(f"Resolution {counts} does not match the {patch.n} chart axes")
    if any(c < 2 for c in counts):
        raise ValueError(f"Resolution must be at least 2 per axis, got {counts}")
    chart = patch.chart
    axes = [_axis_rule(lo, hi, per, c) for lo, hi, per, c in zip(chart.lower, chart.upper, chart.periodic, counts)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    cell = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    cell_weights = np.prod(np.stack([c.ravel() for c in cell], axis=-1), axis=-1)
    area = np.empty(len(points))
    for k, point in enumerate(points):
        jac, _ = patch.derivatives(point)
        det = np.linalg.det(jac.T @ jac)
        if det <= 0:
            raise NotImmersedError(0.0, point)
        area[k] = np.sqrt(det)
    return QuadratureRule(points=points, weights=cell_weights * area, resolution=counts)
