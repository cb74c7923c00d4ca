"""Angular-momentum algebra: Clebsch-Gordan coefficients, 6j symbols, spin matrices.

Sublevels are indexed in ascending order ``m = -J, ..., +J`` everywhere in the
package.
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial, sqrt

import numpy as np


def _twice(j) -> int:
    """Return 2*j as an int, rejecting values that are not half-integers."""
    tj = 2.0 * float(j)
    n = int(round(tj))
    if abs(tj - n) > 1e-9:
        raise ValueError(f"{j!r} is not an integer or half-integer")
    return n


def _triangle(a2: int, b2: int, c2: int) -> bool:
    return (a2 + b2 + c2) % 2 == 0 and abs(a2 - b2) <= c2 <= a2 + b2


def _delta(a2: int, b2: int, c2: int) -> float:
    # triangle coefficient, arguments doubled
    return (
        factorial((a2 + b2 - c2) // 2)
        * factorial((a2 - b2 + c2) // 2)
        * factorial((-a2 + b2 + c2) // 2)
        / factorial((a2 + b2 + c2) // 2 + 1)
    )


@lru_cache(maxsize=4096)
def _cg2(j1: int, m1: int, j2: int, m2: int, J: int, M: int) -> float:
    if m1 + m2 != M:
        return 0.0
    if not _triangle(j1, j2, J):
        return 0.0
    for j, m in ((j1, m1), (j2, m2), (J, M)):
        if abs(m) > j or (j + m) % 2:
            return 0.0
    pref = sqrt(
        (J + 1)
        * _delta(j1, j2, J)
        * factorial((j1 + m1) // 2)
        * factorial((j1 - m1) // 2)
        * factorial((j2 + m2) // 2)
        * factorial((j2 - m2) // 2)
        * factorial((J + M) // 2)
        * factorial((J - M) // 2)
    )
    total = 0.0
    kmin = max(0, (j2 - J - m1) // 2, (j1 - J + m2) // 2)
    kmax = min((j1 + j2 - J) // 2, (j1 - m1) // 2, (j2 + m2) // 2)
    for k in range(kmin, kmax + 1):
        total += (-1) ** k / (
            factorial(k)
            * factorial((j1 + j2 - J) // 2 - k)
            * factorial((j1 - m1) // 2 - k)
            * factorial((j2 + m2) // 2 - k)
            * factorial((J - j2 + m1) // 2 + k)
            * factorial((J - j1 - m2) // 2 + k)
        )
    return pref * total


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Condon-Shortley coefficient ``<j1 m1; j2 m2 | J M>``.

    Returns 0 whenever a selection rule fails; raises ``ValueError`` for
    arguments that are not (half-)integers.
    """
    return _cg2(_twice(j1), _twice(m1), _twice(j2), _twice(m2), _twice(J), _twice(M))


def wigner_3j(j1, j2, j3, m1, m2, m3) -> float:
    t1, t2, t3 = _twice(j1), _twice(j2), _twice(j3)
    n1, n2, n3 = _twice(m1), _twice(m2), _twice(m3)
    phase = (-1) ** ((t1 - t2 - n3) // 2)
    return phase * _cg2(t1, n1, t2, n2, t3, -n3) / sqrt(t3 + 1)


@lru_cache(maxsize=4096)
def _sixj2(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    for t in ((a, b, c), (a, e, f), (d, b, f), (d, e, c)):
        if not _triangle(*t):
            return 0.0
    pref = sqrt(_delta(a, b, c) * _delta(a, e, f) * _delta(d, b, f) * _delta(d, e, c))
    s1 = (a + b + c) // 2
    s2 = (a + e + f) // 2
    s3 = (d + b + f) // 2
    s4 = (d + e + c) // 2
    p1 = (a + b + d + e) // 2
    p2 = (a + c + d + f) // 2
    p3 = (b + c + e + f) // 2
    total = 0.0
    for t in range(max(s1, s2, s3, s4), min(p1, p2, p3) + 1):
        total += (-1) ** t * factorial(t + 1) / (
            factorial(t - s1)
            * factorial(t - s2)
            * factorial(t - s3)
            * factorial(t - s4)
            * factorial(p1 - t)
            * factorial(p2 - t)
            * factorial(p3 - t)
        )
    return pref * total


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """Wigner 6j symbol ``{j1 j2 j3; j4 j5 j6}`` (Racah formula)."""
    return _sixj2(*(_twice(j) for j in (j1, j2, j3, j4, j5, j6)))


def m_values(J) -> np.ndarray:
    """Magnetic quantum numbers ``-J..J`` in the package's ascending order."""
    n = _twice(J) + 1
    return -float(J) + np.arange(n)


def spin_matrices(J) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Angular-momentum matrices (Jx, Jy, Jz) in units of hbar."""
    m = m_values(J)
    J = float(J)
    jz = np.diag(m).astype(complex)
    # <m+1| J+ |m> = sqrt(J(J+1) - m(m+1)); J+ raises the index by one
    jp = np.diag(np.sqrt(J * (J + 1) - m[:-1] * (m[:-1] + 1)), k=-1).astype(complex)
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    return jx, jy, jz
