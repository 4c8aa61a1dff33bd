"""

Symmetric functions sigma_u and generalized Newton transformations T_u of a
system of operators A = (A_1, ..., A_q).

sigma_u is the coefficient of t^u in det(I + t_1 A_1 + ... + t_q A_q). The
primary computation is the recursion

    |u| sigma_u = sum_a tr(A_a T_{a_flat(u)}),
    T_u = sigma_u I - sum_a A_a T_{a_flat(u)},    T_0 = I,

filled in graded order. sigma_oracle expands the determinant directly and
is kept independent of the recursion so the two can be compared.

"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from infotypes import ConvergenceReport, ConvergenceRow
from multiindex import ANNIHILATED, MultiIndex, enumerate_indices, length, lower
from polynomial import TruncatedRing

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-10
IDENTITY_TOLERANCE = 1e-10
REQUIRED_ORDER = 1.8


@dataclass(frozen=True)
class OperatorSystem:
    """
    Ordered family of q real n x n matrices, stored as an array (q, n, n).
    """

    matrices: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        matrices = np.asarray(self.matrices, dtype=float)
        if matrices.ndim != 3 or matrices.shape[0] < 1:
            raise ValueError("system must contain q ≥ 1 matrices")
        if matrices.shape[1] != matrices.shape[2]:
            raise ValueError(f"Operators must be square, got shape {matrices.shape[1:]}")
        if matrices.shape[1] < 1:
            raise ValueError("Operators must have dimension n ≥ 1")
        object.__setattr__(self, "matrices", matrices)
        if self.symmetric:
            asym = self.asymmetry()
            if asym > SYMMETRY_TOLERANCE * max(1.0, self.norm()):
                raise ValueError(f"System flagged symmetric but max |A - A^T| = {asym:.3e}")

    @property
    def q(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.matrices - np.swapaxes(self.matrices, 1, 2))))

    def norm(self) -> float:
        """
        Largest operator 2-norm among the A_a.
        """
        return float(max(np.linalg.norm(a, 2) for a in self.matrices))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OperatorSystem":
        """
        Build a system from {"n": .., "q": .., "matrices": [[[...]], ...]}.

        Raises:
            ValueError: If the matrix list is empty or disagrees with n, q.
        """
        matrices = data.get("matrices")
        if not matrices:
            raise ValueError("system must contain q ≥ 1 matrices")
        try:
            array = np.array(matrices, dtype=float)
        except (TypeError, ValueError) as e:
            raise ValueError(f"Matrices are not a rectangular array of numbers: {e}")
        if array.ndim != 3:
            raise ValueError(f"Expected a list of square matrices, got array of shape {array.shape}")
        if "q" in data and int(data["q"]) != array.shape[0]:
            raise ValueError(f"Declared q={data['q']} but {array.shape[0]} matrices were given")
        if "n" in data and int(data["n"]) != array.shape[1]:
            raise ValueError(f"Declared n={data['n']} but matrices are {array.shape[1]}x{array.shape[2]}")
        return cls(array, symmetric=bool(data.get("symmetric", False)))

    def to_dict(self) -> Dict[str, Any]:
        return {"n": self.n, "q": self.q, "matrices": self.matrices.tolist(), "symmetric": self.symmetric}


def relabel_system(system: OperatorSystem, tau: Sequence[int]) -> OperatorSystem:
    """
    The system (A_{tau(1)}, ..., A_{tau(q)}).

    sigma_u of the relabeled system equals sigma_{u o tau^-1} of the original.
    """
    if sorted(tau) != list(range(system.q)):
        raise ValueError(f"{tuple(tau)} is not a permutation of {system.q} operators")
    return OperatorSystem(system.matrices[list(tau)], symmetric=system.symmetric)


def _check_degree(n: int, n_max: int) -> None:
    if n_max < 0 or n_max > n:
        raise ValueError(f"n_max must satisfy 0 ≤ n_max ≤ n={n}, got {n_max}")


def newton_tables(matrices: np.ndarray, n_max: int) -> Dict[MultiIndex, Tuple[np.ndarray, np.ndarray]]:
    """
    Run the recursion on a stack of systems.

    Args:
        matrices (np.ndarray): Array of shape (..., q, n, n).
        n_max (int): Largest |u| to compute, at most n.

    Returns:
        Dict[MultiIndex, Tuple[np.ndarray, np.ndarray]]: u -> (sigma_u of shape (...),
        T_u of shape (..., n, n)).
    """
    matrices = np.asarray(matrices, dtype=float)
    q, n = matrices.shape[-3], matrices.shape[-1]
    _check_degree(n, n_max)
    batch = matrices.shape[:-3]
    identity = np.broadcast_to(np.eye(n), batch + (n, n))
    table = {}
    for u in enumerate_indices(q, n_max):
        grade = length(u)
        if grade == 0:
            table[u] = (np.ones(batch), identity.copy())
            continue
        products = np.zeros(batch + (n, n))
        for alpha in range(q):
            lowered = lower(alpha, u)
            if lowered is ANNIHILATED:
                continue
            products = products + matrices[..., alpha, :, :] @ table[lowered][1]
        sigma = np.asarray(np.trace(products, axis1=-2, axis2=-1)) / grade
        table[u] = (sigma, sigma[..., None, None] * identity - products)
    return table


class NewtonTable:
    """
    Immutable map u -> (sigma_u, T_u) for |u| <= n_max of one system.
    """

    def __init__(self, system: OperatorSystem, entries: Dict[MultiIndex, Tuple[float, np.ndarray]], n_max: int):
        self.system = system
        self.n_max = n_max
        self._entries = entries

    def __contains__(self, u) -> bool:
        return u in self._entries

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def _lookup(self, u):
        if u is ANNIHILATED:
            return None
        if len(u) != self.system.q:
            raise ValueError(f"{tuple(u)} does not have q={self.system.q} components")
        if length(u) > self.system.n:
            return None
        if u not in self._entries:
            raise ValueError(f"{tuple(u)} is not in the table (n_max={self.n_max})")
        return self._entries[u]

    def sigma(self, u) -> float:
        """
        sigma_u; zero for ANNIHILATED and for |u| > n.
        """
        entry = self._lookup(u)
        return 0.0 if entry is None else entry[0]

    def transformation(self, u) -> np.ndarray:
        """
        T_u; the zero matrix for ANNIHILATED and for |u| > n.
        """
        entry = self._lookup(u)
        n = self.system.n
        return np.zeros((n, n)) if entry is None else entry[1].copy()

    def sigmas(self) -> Dict[MultiIndex, float]:
        return {u: entry[0] for u, entry in self._entries.items()}


def newton_table(system: OperatorSystem, n_max: Optional[int] = None) -> NewtonTable:
    """
    Build the table of sigma_u and T_u for |u| <= n_max (default n).

    Raises:
        ValueError: If n_max is negative or exceeds n.
    """
    n_max = system.n if n_max is None else n_max
    batched = newton_tables(system.matrices, n_max)
    entries = {u: (float(sigma), t) for u, (sigma, t) in batched.items()}
    return NewtonTable(system, entries, n_max)


def sigma_oracle(system: OperatorSystem, n_max: Optional[int] = None) -> Dict[MultiIndex, float]:
    """
    Coefficients of det(I + t_1 A_1 + ... + t_q A_q) up to total degree n_max,
    by Gaussian elimination over truncated polynomials.

    Raises:
        ValueError: If n_max is negative or exceeds n.
    """
    n_max = system.n if n_max is None else n_max
    _check_degree(system.n, n_max)
    ring = TruncatedRing(system.q, n_max)
    a = system.matrices
    entries = [
        [ring.linear(1.0 if i == j else 0.0, a[:, i, j]) for j in range(system.n)]
        for i in range(system.n)
    ]
    det = ring.determinant(entries)
    return {u: float(det[k]) for k, u in enumerate(ring.indices)}


def default_tolerance(system: OperatorSystem, u: Sequence[int], base: float = IDENTITY_TOLERANCE) -> float:
    """
    Absolute tolerance base * max(1, ||A||)^|u| for identities at index u.
    """
    return base * max(1.0, system.norm()) ** length(u)


def trace_residual(table: NewtonTable) -> float:
    """
    max_u |tr T_u - (n - |u|) sigma_u|.
    """
    n = table.system.n
    worst = 0.0
    for u in table:
        t = table.transformation(u)
        worst = max(worst, abs(np.trace(t) - (n - length(u)) * table.sigma(u)))
    return float(worst)


def _lowered_products(table: NewtonTable, u, left: bool) -> np.ndarray:
    a = table.system.matrices
    total = np.zeros((table.system.n, table.system.n))
    for alpha in range(table.system.q):
        lowered = lower(alpha, u)
        if lowered is ANNIHILATED:
            continue
        t = table.transformation(lowered)
        total += a[alpha] @ t if left else t @ a[alpha]
    return total


def identity_residual(table: NewtonTable) -> float:
    """
    max_u | |u| sigma_u - sum_a tr(A_a T_{a_flat(u)}) |.
    """
    worst = 0.0
    for u in table:
        lhs = length(u) * table.sigma(u)
        rhs = np.trace(_lowered_products(table, u, left=True))
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def right_recursion_check(system: OperatorSystem, table: NewtonTable) -> float:
    """
    Largest sup-norm gap between the left and right forms of the recursion,
    sigma_u I - sum A_a T_{a_flat(u)} against sigma_u I - sum T_{a_flat(u)} A_a.
    """
    if table.system is not system and not np.array_equal(table.system.matrices, system.matrices):
        raise ValueError("Table was not built from this system")
    worst = 0.0
    for u in table:
        gap = _lowered_products(table, u, left=True) - _lowered_products(table, u, left=False)
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def elementary_symmetric(values: Sequence[float]) -> np.ndarray:
    """
    e_0, ..., e_n of the given numbers.
    """
    coefficients = np.real(np.poly(np.asarray(values)))
    return coefficients * (-1.0) ** np.arange(len(coefficients))


def observed_order(steps: Sequence[float], errors: Sequence[float], floor: float) -> Optional[float]:
    """
    Smallest convergence order seen between consecutive step sizes.

    Pairs whose errors sit below floor are exact to rounding and skipped;
    None means no pair was above the floor.
    """
    orders = []
    for k in range(len(steps) - 1):
        e0, e1 = abs(errors[k]), abs(errors[k + 1])
        if e0 <= floor or e1 <= floor:
            continue
        orders.append(math.log(e0 / e1) / math.log(steps[k] / steps[k + 1]))
    return min(orders) if orders else None


def variation_check(
    curve: Callable[[float], OperatorSystem],
    u: Sequence[int],
    t0: float = 0.0,
    steps: Sequence[float] = (1e-2, 5e-3, 2.5e-3),
    floor: float = 1e-11,
) -> ConvergenceReport:
    """
    Compare d/dt sigma_u with sum_a tr(A_a'(t) T_{a_flat(u)}) along a curve.

    Both derivatives are central differences with the same step, so the gap
    is the truncation error of differencing sigma_u and shrinks like h^2.

    Args:
        curve (Callable[[float], OperatorSystem]): t -> A(t).
        u (Sequence[int]): The multi-index.
        t0 (float): Base point.
        steps (Sequence[float]): Decreasing step sizes.
        floor (float): Errors below floor * scale count as exact.

    Returns:
        ConvergenceReport: One row per step and the observed order.

    Raises:
        ValueError: If a step is not positive.
    """
    if not steps or any(h <= 0 for h in steps):
        raise ValueError(f"Steps must be positive, got {list(steps)}")
    u = MultiIndex(u)
    base = curve(t0)
    base_table = newton_table(base, min(length(u), base.n))
    rows, errors = [], []
    for h in steps:
        ahead, behind = curve(t0 + h), curve(t0 - h)
        n_max = min(length(u), base.n)
        lhs = (newton_table(ahead, n_max).sigma(u) - newton_table(behind, n_max).sigma(u)) / (2 * h)
        derivative = (ahead.matrices - behind.matrices) / (2 * h)
        rhs = 0.0
        for alpha in range(base.q):
            lowered = lower(alpha, u)
            if lowered is ANNIHILATED:
                continue
            rhs += float(np.trace(derivative[alpha] @ base_table.transformation(lowered)))
        rows.append(ConvergenceRow(step=h, lhs=lhs, rhs=rhs, difference=lhs - rhs))
        errors.append(lhs - rhs)
    scale = max(1.0, max(abs(r.rhs) for r in rows))
    order = observed_order(list(steps), errors, floor * scale)
    passed = order is None or order >= REQUIRED_ORDER
    logger.debug("variation_check u=%s order=%s", tuple(u), order)
    return ConvergenceReport(
        u=list(u),
        rows=rows,
        observed_order=order,
        required_order=REQUIRED_ORDER,
        tolerance=floor * scale,
        passed=passed,
    )
