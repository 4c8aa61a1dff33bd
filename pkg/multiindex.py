"""

Multi-index arithmetic used to label the symmetric functions and the
generalized Newton transformations of a system of operators.

A multi-index is an element u of N^q. Coordinates are zero-based here,
so lower(0, u) subtracts one from the first entry.

"""

import json
from typing import Iterable, List, Sequence, Union


class Annihilated:
    """
    Result of lowering a coordinate that is already zero.

    Every sigma, T or section indexed by it contributes zero.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return "ANNIHILATED"


ANNIHILATED = Annihilated()


class MultiIndex(tuple):
    """
    Immutable tuple of non-negative integers (u_1, ..., u_q).
    """

    def __new__(cls, entries: Iterable[int]):
        values = tuple(int(e) for e in entries)
        if not values:
            raise ValueError("A multi-index needs at least one entry")
        if any(v < 0 for v in values):
            raise ValueError(f"Multi-index entries must be non-negative, got {values}")
        return super().__new__(cls, values)

    @property
    def q(self) -> int:
        return len(self)

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"

    def to_json(self) -> str:
        """
        Serialize as a compact JSON array, e.g. "[2,0,1]".
        """
        return json.dumps(list(self), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "MultiIndex":
        return cls(json.loads(text))

    @classmethod
    def parse(cls, text: str) -> "MultiIndex":
        """
        Parse either a JSON array or a comma separated list ("2,0").
        """
        text = text.strip()
        if text.startswith("["):
            return cls.from_json(text)
        try:
            return cls(int(part) for part in text.split(","))
        except ValueError as e:
            raise ValueError(f"Cannot parse multi-index from '{text}': {e}")

    @classmethod
    def zero(cls, q: int) -> "MultiIndex":
        return cls([0] * q)


def length(u: Sequence[int]) -> int:
    """
    Return |u|, the sum of the entries.
    """
    return int(sum(u))


def _check_coordinate(alpha: int, u: Sequence[int]) -> None:
    if not 0 <= alpha < len(u):
        raise ValueError(f"Coordinate {alpha} out of range for a multi-index with q={len(u)}")


def lower(alpha: int, u: Sequence[int]) -> Union[MultiIndex, Annihilated]:
    """
    Subtract one in coordinate alpha.

    Args:
        alpha (int): Zero-based coordinate.
        u (Sequence[int]): The multi-index.

    Returns:
        MultiIndex or Annihilated: ANNIHILATED when u[alpha] is zero.

    Raises:
        ValueError: If alpha is out of range.
    """
    _check_coordinate(alpha, u)
    if u[alpha] == 0:
        return ANNIHILATED
    entries = list(u)
    entries[alpha] -= 1
    return MultiIndex(entries)


def raise_index(alpha: int, u: Sequence[int]) -> MultiIndex:
    """
    Add one in coordinate alpha.

    Raises:
        ValueError: If alpha is out of range.
    """
    _check_coordinate(alpha, u)
    entries = list(u)
    entries[alpha] += 1
    return MultiIndex(entries)


def permute(u: Sequence[int], tau: Sequence[int]) -> MultiIndex:
    """
    Return u composed with the permutation tau, (u o tau)_a = u_{tau(a)}.
    """
    if sorted(tau) != list(range(len(u))):
        raise ValueError(f"{tuple(tau)} is not a permutation of {len(u)} coordinates")
    return MultiIndex(u[t] for t in tau)


def _compositions(total: int, q: int) -> List[List[int]]:
    # Lexicographically decreasing in the leading entry, so (1,0) comes before (0,1).
    if q == 1:
        return [[total]]
    result = []
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, q - 1):
            result.append([first] + rest)
    return result


def enumerate_indices(q: int, n_max: int) -> List[MultiIndex]:
    """
    All u in N^q with |u| <= n_max in graded order.

    Within one grade the order is lexicographic with larger leading entries
    first, which gives [(0,0), (1,0), (0,1), ...]. Every lowered index of u
    therefore precedes u.

    Raises:
        ValueError: If q < 1 or n_max < 0.
    """
    if q < 1:
        raise ValueError(f"q must be at least 1, got {q}")
    if n_max < 0:
        raise ValueError(f"n_max must be non-negative, got {n_max}")
    indices = []
    for grade in range(n_max + 1):
        indices.extend(MultiIndex(c) for c in _compositions(grade, q))
    return indices
