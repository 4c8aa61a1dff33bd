"""

Concrete parametrized patches with closed-form derivatives.

"""

import logging
from typing import Tuple

import numpy as np

from submanifold import AmbientSpec, Chart, ImmersedPatch

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-10

_ONE, _SIN, _COS = 0, 1, 2


def _factor_values(kinds: np.ndarray, angles: np.ndarray):
    """
    Values, first and second derivatives of the factors 1, sin, cos.
    """
    a = np.broadcast_to(angles, kinds.shape)
    s, c = np.sin(a), np.cos(a)
    value = np.where(kinds == _ONE, 1.0, np.where(kinds == _SIN, s, c))
    first = np.where(kinds == _ONE, 0.0, np.where(kinds == _SIN, c, -s))
    second = np.where(kinds == _ONE, 0.0, np.where(kinds == _SIN, -s, -c))
    return value, first, second


def _replaced_product(value: np.ndarray, replacements: dict) -> np.ndarray:
    factors = value.copy()
    for column, column_values in replacements.items():
        factors[:, column] = column_values
    return np.prod(factors, axis=1)


class SphericalCoordinates:
    """
    Unit sphere S^n in R^(n+1) through hyperspherical angles a_0 .. a_(n-1).

    x_k = sin a_0 ... sin a_(k-1) cos a_k for k < n, and x_n is the product of
    all sines. The last angle is periodic, the others range over (0, pi).
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"Sphere dimension must be at least 1, got {n}")
        self.n = n
        kinds = np.full((n + 1, n), _ONE)
        for k in range(n + 1):
            kinds[k, :k] = _SIN
            if k < n:
                kinds[k, k] = _COS
        self.kinds = kinds

    def chart(self) -> Chart:
        lower = tuple([0.0] * self.n)
        upper = tuple([np.pi] * (self.n - 1) + [2.0 * np.pi])
        periodic = tuple([False] * (self.n - 1) + [True])
        return Chart(lower, upper, periodic)

    def point(self, angles: np.ndarray) -> np.ndarray:
        value, _, _ = _factor_values(self.kinds, np.asarray(angles, dtype=float))
        return np.prod(value, axis=1)

    def derivatives(self, angles: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        value, first, second = _factor_values(self.kinds, np.asarray(angles, dtype=float))
        n = self.n
        jac = np.zeros((n + 1, n))
        hess = np.zeros((n + 1, n, n))
        for i in range(n):
            jac[:, i] = _replaced_product(value, {i: first[:, i]})
            hess[:, i, i] = _replaced_product(value, {i: second[:, i]})
            for j in range(i + 1, n):
                hess[:, i, j] = hess[:, j, i] = _replaced_product(value, {i: first[:, i], j: first[:, j]})
        return np.prod(value, axis=1), jac, hess


class PlanePatch(ImmersedPatch):
    """
    Flat n-dimensional square spanned by the first n coordinate axes of R^(n+q).
    """

    analytic = True

    def __init__(self, n: int = 2, q: int = 1, size: float = 1.0):
        ambient = AmbientSpec(kind="euclidean", dimension=n + q)
        chart = Chart(tuple([0.0] * n), tuple([size] * n), tuple([False] * n))
        super().__init__(n, q, ambient, chart, "plane")

    def evaluate(self, x):
        point = np.zeros(self.n + self.q)
        point[: self.n] = x
        return point

    def derivatives(self, x):
        jac = np.zeros((self.n + self.q, self.n))
        jac[: self.n, : self.n] = np.eye(self.n)
        return jac, np.zeros((self.n + self.q, self.n, self.n))


class UmbilicalSpherePatch(ImmersedPatch):
    """
    Round sphere S^n(r) in R^(n+1), included linearly in R^(n+q).
    """

    analytic = True
    closed = True

    def __init__(self, n: int = 2, q: int = 1, r: float = 1.0):
        if r <= 0:
            raise ValueError(f"Sphere radius must be positive, got {r}")
        self.coordinates = SphericalCoordinates(n)
        self.r = r
        ambient = AmbientSpec(kind="euclidean", dimension=n + q)
        super().__init__(n, q, ambient, self.coordinates.chart(), f"umbilical:n={n},q={q},r={r}")

    def _pad(self, block: np.ndarray) -> np.ndarray:
        padding = [(0, self.q - 1)] + [(0, 0)] * (block.ndim - 1)
        return np.pad(block, padding)

    def evaluate(self, x):
        return self._pad(self.r * self.coordinates.point(x))

    def derivatives(self, x):
        _, jac, hess = self.coordinates.derivatives(x)
        return self._pad(self.r * jac), self._pad(self.r * hess)


class SphereInSpherePatch(ImmersedPatch):
    """
    Small sphere S^n(rho) inside S^(n+q)(r), umbilical with c = 1/r^2.

    Points are (rho s, 0, ..., 0, sqrt(r^2 - rho^2)) for s on the unit S^n.
    """

    analytic = True
    closed = True

    def __init__(self, n: int = 3, q: int = 1, r: float = 1.0, rho: float = 0.5):
        if not 0 < rho <= r:
            raise ValueError(f"Need 0 < rho ≤ r, got rho={rho}, r={r}")
        self.coordinates = SphericalCoordinates(n)
        self.r = r
        self.rho = rho
        self.height = float(np.sqrt(r ** 2 - rho ** 2))
        ambient = AmbientSpec(kind="sphere", dimension=n + q, radius=r)
        super().__init__(n, q, ambient, self.coordinates.chart(), f"sphere_in_sphere:n={n},q={q},r={r},rho={rho}")

    def principal_curvature(self) -> float:
        """
        Absolute principal curvature of the small sphere inside S^(n+q)(r).
        """
        return self.height / (self.r * self.rho)

    def _embed(self, block: np.ndarray) -> np.ndarray:
        padding = [(0, self.q)] + [(0, 0)] * (block.ndim - 1)
        return np.pad(block, padding)

    def evaluate(self, x):
        point = self._embed(self.rho * self.coordinates.point(x))
        point[-1] = self.height
        return point

    def derivatives(self, x):
        _, jac, hess = self.coordinates.derivatives(x)
        return self._embed(self.rho * jac), self._embed(self.rho * hess)


class RevolutionTorus(ImmersedPatch):
    """
    Torus of revolution in R^3 with tube radius a and center radius R.
    """

    analytic = True
    closed = True

    def __init__(self, a: float = 1.0, R: float = 2.0):
        if not 0 < a < R:
            raise ValueError(f"Need 0 < a < R for an embedded torus, got a={a}, R={R}")
        self.a = a
        self.R = R
        chart = Chart((0.0, 0.0), (2 * np.pi, 2 * np.pi), (True, True))
        super().__init__(2, 1, AmbientSpec(kind="euclidean", dimension=3), chart, f"torus:a={a},R={R}")

    def evaluate(self, x):
        v, w = x
        rho = self.R + self.a * np.cos(v)
        return np.array([rho * np.cos(w), rho * np.sin(w), self.a * np.sin(v)])

    def derivatives(self, x):
        v, w = x
        a = self.a
        rho = self.R + a * np.cos(v)
        cv, sv, cw, sw = np.cos(v), np.sin(v), np.cos(w), np.sin(w)
        jac = np.array([
            [-a * sv * cw, -rho * sw],
            [-a * sv * sw, rho * cw],
            [a * cv, 0.0],
        ])
        hess = np.zeros((3, 2, 2))
        hess[:, 0, 0] = [-a * cv * cw, -a * cv * sw, -a * sv]
        hess[:, 0, 1] = hess[:, 1, 0] = [a * sv * sw, -a * sv * cw, 0.0]
        hess[:, 1, 1] = [-rho * cw, -rho * sw, 0.0]
        return jac, hess


class ProductTorus(ImmersedPatch):
    """
    Flat torus S^1(a) x S^1(b) in R^4.
    """

    analytic = True
    closed = True

    def __init__(self, a: float = 1.0, b: float = 1.0):
        if a <= 0 or b <= 0:
            raise ValueError(f"Torus radii must be positive, got a={a}, b={b}")
        self.a = a
        self.b = b
        chart = Chart((0.0, 0.0), (2 * np.pi, 2 * np.pi), (True, True))
        super().__init__(2, 2, AmbientSpec(kind="euclidean", dimension=4), chart, f"product_torus:a={a},b={b}")

    def evaluate(self, x):
        t, p = x
        return np.array([self.a * np.cos(t), self.a * np.sin(t), self.b * np.cos(p), self.b * np.sin(p)])

    def derivatives(self, x):
        t, p = x
        a, b = self.a, self.b
        jac = np.array([
            [-a * np.sin(t), 0.0],
            [a * np.cos(t), 0.0],
            [0.0, -b * np.sin(p)],
            [0.0, b * np.cos(p)],
        ])
        hess = np.zeros((4, 2, 2))
        hess[:2, 0, 0] = [-a * np.cos(t), -a * np.sin(t)]
        hess[2:, 1, 1] = [-b * np.cos(p), -b * np.sin(p)]
        return jac, hess


class CatenoidPatch(ImmersedPatch):
    """
    Catenoid (c cosh(z/c) cos w, c cosh(z/c) sin w, z), |z| < height.
    """

    analytic = True

    def __init__(self, c: float = 1.0, height: float = 1.0):
        if c <= 0 or height <= 0:
            raise ValueError(f"Catenoid needs c > 0 and height > 0, got c={c}, height={height}")
        self.c = c
        chart = Chart((-height, 0.0), (height, 2 * np.pi), (False, True))
        super().__init__(2, 1, AmbientSpec(kind="euclidean", dimension=3), chart, f"catenoid:c={c},height={height}")

    def evaluate(self, x):
        z, w = x
        radius = self.c * np.cosh(z / self.c)
        return np.array([radius * np.cos(w), radius * np.sin(w), z])

    def derivatives(self, x):
        z, w = x
        c = self.c
        ch, sh = np.cosh(z / c), np.sinh(z / c)
        cw, sw = np.cos(w), np.sin(w)
        jac = np.array([
            [sh * cw, -c * ch * sw],
            [sh * sw, c * ch * cw],
            [1.0, 0.0],
        ])
        hess = np.zeros((3, 2, 2))
        hess[:, 0, 0] = [ch / c * cw, ch / c * sw, 0.0]
        hess[:, 0, 1] = hess[:, 1, 0] = [-sh * sw, sh * cw, 0.0]
        hess[:, 1, 1] = [-c * ch * cw, -c * ch * sw, 0.0]
        return jac, hess


def _symmetric_unit(i: int, j: int) -> np.ndarray:
    m = np.zeros((3, 3))
    m[i, j] = m[j, i] = 0.5
    return m


# v(x) = (yz, zx, xy, (x^2 - y^2)/2, (x^2 + y^2 - 2 z^2)/(2 sqrt 3)) as quadratic forms
VERONESE_FORMS = np.array([
    _symmetric_unit(1, 2),
    _symmetric_unit(2, 0),
    _symmetric_unit(0, 1),
    np.diag([0.5, -0.5, 0.0]),
    np.diag([1.0, 1.0, -2.0]) / (2.0 * np.sqrt(3.0)),
])


class VeronesePatch(ImmersedPatch):
    """
    Second standard immersion of S^2(1) into S^4(1/sqrt 3), in spherical
    coordinates (theta, psi) of the domain sphere.

    The overall scale is fixed numerically and then verified: every image
    point must lie on the sphere of radius 1/sqrt 3 and the pulled-back
    metric must be the round metric diag(1, sin^2 theta) of S^2(1).
    """

    analytic = True
    closed = True
    target_radius = 1.0 / np.sqrt(3.0)

    def __init__(self, oracle_points: int = 100, seed: int = 0):
        self.coordinates = SphericalCoordinates(2)
        self.forms = VERONESE_FORMS
        ambient = AmbientSpec(kind="sphere", dimension=4, radius=self.target_radius)
        super().__init__(2, 2, ambient, self.coordinates.chart(), "veronese")
        self.scale = 1.0
        reference = self.coordinates.point(np.array([0.7, 0.3]))
        self.scale = self.target_radius / np.linalg.norm(self._quadratic(reference))
        self.oracle_defects = self._verify(oracle_points, np.random.default_rng(seed))

    def _quadratic(self, s: np.ndarray) -> np.ndarray:
        return self.scale * np.einsum("i,kij,j->k", s, self.forms, s)

    def _verify(self, points: int, rng: np.random.Generator) -> Tuple[float, float]:
        radius_defect, metric_defect = 0.0, 0.0
        for _ in range(points):
            x = np.array([rng.uniform(0.1, np.pi - 0.1), rng.uniform(0.0, 2 * np.pi)])
            radius_defect = max(radius_defect, abs(np.linalg.norm(self.evaluate(x)) - self.target_radius))
            jac, _ = self.derivatives(x)
            round_metric = np.diag([1.0, np.sin(x[0]) ** 2])
            metric_defect = max(metric_defect, float(np.max(np.abs(jac.T @ jac - round_metric))))
        if radius_defect > ORACLE_TOLERANCE or metric_defect > ORACLE_TOLERANCE:
            raise ValueError(
                "Veronese normalization rejected: "
                f"radius defect {radius_defect:.3e}, metric defect {metric_defect:.3e}"
            )
        logger.debug("Veronese oracles passed: radius %.2e, metric %.2e", radius_defect, metric_defect)
        return radius_defect, metric_defect

    def evaluate(self, x):
        return self._quadratic(self.coordinates.point(x))

    def derivatives(self, x):
        s, ds, dds = self.coordinates.derivatives(x)
        forms = self.scale * self.forms
        jac = 2.0 * np.einsum("kab,a,bi->ki", forms, s, ds)
        hess = 2.0 * (
            np.einsum("kab,ai,bj->kij", forms, ds, ds) + np.einsum("kab,a,bij->kij", forms, s, dds)
        )
        return jac, hess
