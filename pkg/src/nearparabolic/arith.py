"""Continued fractions, Gauss towers, convergents and Brjuno sums.

The digit sequence is the primary representation of a rotation number.
Tower entries are recomputed from digit tails rather than by iterating
``frac(1/x)`` in floating point, which loses roughly one decimal digit per
step for large partial quotients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import AngleDomainError, DepthError, DigitError

__all__ = [
    "HighTypeAngle",
    "BrjunoValue",
    "cf_from_digits",
    "cf_expand",
    "gauss_tower",
    "brjuno_sum",
    "is_high_type",
    "periodic_value",
]


@dataclass(frozen=True)
class HighTypeAngle:
    """A rotation number carried by its continued-fraction digits.

    Attributes
    ----------
    digits : tuple of int
        The first ``depth`` partial quotients ``a_1, ..., a_depth``.
    value : float
        Correctly rounded value of the finite continued fraction.
    exact : Fraction
        The same value as an exact rational ``p_depth / q_depth``.
    tower : tuple of float
        ``alpha_0, ..., alpha_{depth-1}`` where ``alpha_i`` is the tail
        continued fraction ``[0; a_{i+1}, ..., a_depth]``.
    convergents : tuple of (int, int)
        ``(p_k, q_k)`` for ``k = 0, ..., depth``.
    type_floor : int
        Lower bound imposed on every digit at construction.
    """

    digits: tuple[int, ...]
    value: float
    exact: Fraction
    tower: tuple[float, ...]
    convergents: tuple[tuple[int, int], ...]
    type_floor: int = 1

    @property
    def depth(self) -> int:
        return len(self.digits)

    def q(self, k: int) -> int:
        """Convergent denominator ``q_k``; ``q_{-1} = 0``."""
        if k == -1:
            return 0
        return self.convergents[k][1]

    def shifted(self) -> "HighTypeAngle":
        """The angle ``alpha_1`` with digits ``a_2, a_3, ...``."""
        if self.depth < 2:
            raise DepthError("cannot shift an angle with fewer than two digits")
        return cf_from_digits(self.digits[1:], self.depth - 1, self.type_floor)


@dataclass(frozen=True)
class BrjunoValue:
    value: float
    truncation_depth: int
    tail_bound: float


def _tail_value(digits: Sequence[int]) -> float:
    x = 0.0
    for a in reversed(digits):
        x = 1.0 / (a + x)
    return x


def _check_digits(digits: Sequence[int], type_floor: int) -> tuple[int, ...]:
    out = []
    for a in digits:
        if int(a) != a:
            raise DigitError(f"digit {a!r} is not an integer")
        a = int(a)
        if a < 1:
            raise DigitError(f"digit {a} is not positive")
        if a < type_floor:
            raise DigitError(f"digit {a} below type floor {type_floor}")
        out.append(a)
    return tuple(out)


def cf_from_digits(digits: Sequence[int], depth: int | None = None,
                   type_floor: int = 1) -> HighTypeAngle:
    """Build the angle ``[0; a_1, ..., a_depth]`` from its digits.

    Parameters
    ----------
    digits : sequence of int
        Partial quotients, each at least ``type_floor``.
    depth : int, optional
        Number of leading digits to use; defaults to all of them.
    type_floor : int
        Minimum admissible digit.

    Raises
    ------
    DigitError
        For non-positive digits or digits below ``type_floor``.
    DepthError
        If ``depth`` is not in ``1 .. len(digits)``.
    AngleDomainError
        If the value is not in the open interval (0, 1), as for ``[0; 1]``.
    """
    digits = tuple(digits)
    if depth is None:
        depth = len(digits)
    if depth < 1 or depth > len(digits):
        raise DepthError(f"depth {depth} outside 1..{len(digits)}")
    ds = _check_digits(digits[:depth], type_floor)

    p_prev, q_prev, p, q = 1, 0, 0, 1
    convergents = [(0, 1)]
    for a in ds:
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        convergents.append((p, q))
    exact = Fraction(p, q)
    if not 0 < exact < 1:
        raise AngleDomainError(f"[0; {', '.join(map(str, ds))}] = {exact} is not in (0, 1)")
    tower = tuple(_tail_value(ds[i:]) for i in range(depth))
    return HighTypeAngle(ds, float(exact), exact, tower, tuple(convergents), type_floor)


def cf_expand(x, max_depth: int = 64, tol: float = 1e-15) -> tuple[int, ...]:
    """Continued-fraction digits of ``x`` in (0, 1).

    A ``Fraction`` input is expanded exactly by the Euclidean algorithm.
    A float input stops once the current convergent is within ``tol`` of
    ``x`` or the remainder vanishes, so the result never extends past the
    precision floor of the input.
    """
    if not 0 < x < 1:
        raise AngleDomainError(f"{x!r} is not in (0, 1)")
    digits: list[int] = []
    if isinstance(x, Fraction):
        r = x
        while r != 0 and len(digits) < max_depth:
            y = 1 / r
            a = math.floor(y)
            digits.append(a)
            r = y - a
        return tuple(digits)

    x = float(x)
    r = x
    p_prev, q_prev, p, q = 1, 0, 0, 1
    while len(digits) < max_depth:
        y = 1.0 / r
        a = math.floor(y)
        digits.append(a)
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        r = y - a
        if r <= tol or abs(p / q - x) <= tol:
            break
    return tuple(digits)


def gauss_tower(angle: HighTypeAngle, n: int) -> tuple[float, ...]:
    """Return ``alpha_0, ..., alpha_n`` from the digit tails of ``angle``.

    The finite expansion has ``alpha_depth = 0``, so ``n`` must stay
    below the digit depth.
    """
    if n < 0 or n >= angle.depth:
        raise DepthError(f"tower index {n} needs at least {n + 1} digits, have {angle.depth}")
    return angle.tower[: n + 1]


def brjuno_sum(angle: HighTypeAngle, depth: int) -> BrjunoValue:
    """Partial Brjuno sum ``sum_{k<=depth} (prod_{i<k} alpha_i) log(1/alpha_k)``.

    The remainder is bounded using ``alpha_i alpha_{i+1} <= 1/2``: the
    products beyond ``depth`` shrink at least geometrically in pairs, and
    each log factor is bounded by the largest one seen in the tower.
    """
    tower = gauss_tower(angle, depth)
    total = 0.0
    beta = 1.0
    for a in tower:
        total += beta * math.log(1.0 / a)
        beta *= a
    logs = [math.log(1.0 / a) for a in angle.tower]
    factor = 2.0 if max(angle.tower) <= 0.5 else 4.0
    return BrjunoValue(total, depth, beta * max(logs) * factor)


def is_high_type(digits: Sequence[int], N: int) -> bool:
    return all(a >= N for a in digits)


def periodic_value(a: int) -> float:
    """Value of the purely periodic expansion ``[0; a, a, a, ...]``."""
    return (math.sqrt(a * a + 4.0) - a) / 2.0
