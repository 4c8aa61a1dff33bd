"""

Dense truncated multivariate polynomials in t = (t_1, ..., t_q).

Coefficients are stored in the graded order of multiindex.enumerate_indices,
and every product is truncated at total degree n_max. This is just enough
algebra to expand det(I + t_1 A_1 + ... + t_q A_q) by Gaussian elimination
without ever touching the Newton recursion.

"""

from typing import Dict, List, Sequence

import numpy as np

from multiindex import MultiIndex, enumerate_indices


class TruncatedRing:
    """
    The ring R[t_1..t_q] / (monomials of degree > n_max).
    """

    def __init__(self, q: int, n_max: int):
        self.q = q
        self.n_max = n_max
        self.indices: List[MultiIndex] = enumerate_indices(q, n_max)
        self.position: Dict[MultiIndex, int] = {u: k for k, u in enumerate(self.indices)}
        self.size = len(self.indices)
        # (i, j, k) triples with u_i + u_j = u_k and |u_k| <= n_max
        pairs = []
        for i, a in enumerate(self.indices):
            for j, b in enumerate(self.indices):
                if sum(a) + sum(b) > n_max:
                    continue
                pairs.append((i, j, self.position[MultiIndex(x + y for x, y in zip(a, b))]))
        self._left = np.array([p[0] for p in pairs], dtype=int)
        self._right = np.array([p[1] for p in pairs], dtype=int)
        self._target = np.array([p[2] for p in pairs], dtype=int)

    def constant(self, value: float) -> np.ndarray:
        c = np.zeros(self.size)
        c[0] = value
        return c

    def linear(self, constant: float, slopes: Sequence[float]) -> np.ndarray:
        """
        Polynomial constant + sum_a slopes[a] t_a.
        """
        c = self.constant(constant)
        if self.n_max >= 1:
            for alpha, slope in enumerate(slopes):
                unit = [0] * self.q
                unit[alpha] = 1
                c[self.position[MultiIndex(unit)]] = slope
        return c

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = np.zeros(self.size)
        np.add.at(out, self._target, a[self._left] * b[self._right])
        return out

    def inverse(self, a: np.ndarray) -> np.ndarray:
        """
        Inverse of a unit (non-zero constant term) as a truncated series.

        Raises:
            ZeroDivisionError: If the constant term vanishes.
        """
        if a[0] == 0.0:
            raise ZeroDivisionError("Series with zero constant term is not invertible")
        a0 = a[0]
        nilpotent = a / a0
        nilpotent[0] = 0.0
        # 1/(1+s) = sum_k (-s)^k, and s^k vanishes for k > n_max
        result = self.constant(1.0)
        power = self.constant(1.0)
        for _ in range(self.n_max):
            power = -self.mul(power, nilpotent)
            result = result + power
        return result / a0

    def determinant(self, matrix: List[List[np.ndarray]]) -> np.ndarray:
        """
        Determinant of a square matrix with truncated-polynomial entries.

        Gaussian elimination without pivoting; the leading principal minors
        must be units, which holds for I + t A since they equal 1 at t = 0.

        Raises:
            ValueError: If a pivot is not a unit.
        """
        n = len(matrix)
        work = [[entry.copy() for entry in row] for row in matrix]
        det = self.constant(1.0)
        for k in range(n):
            pivot = work[k][k]
            if abs(pivot[0]) < 1e-300:
                raise ValueError(f"Pivot {k} has zero constant term; elimination without pivoting fails")
            det = self.mul(det, pivot)
            pivot_inv = self.inverse(pivot)
            for i in range(k + 1, n):
                factor = self.mul(work[i][k], pivot_inv)
                if not factor.any():
                    continue
                for j in range(k + 1, n):
                    work[i][j] = work[i][j] - self.mul(factor, work[k][j])
        return det
