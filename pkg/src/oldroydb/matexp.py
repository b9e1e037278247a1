"""Scaling-and-squaring matrix exponential with a fixed (6, 6) Pade approximant.

Kept deliberately independent of the closed-form Green's kernels so it can
serve as their oracle.
"""

from math import factorial

import numpy as np

_ORDER = 6
_COEFFS = [
    factorial(2 * _ORDER - j) * factorial(_ORDER)
    / (factorial(2 * _ORDER) * factorial(j) * factorial(_ORDER - j))
    for j in range(_ORDER + 1)
]
# ||X||_1 <= THETA keeps the (6,6) truncation error far below 1e-12.
THETA = 0.5


def expm_pade66(a):
    """Exponential of a square matrix."""
    a = np.asarray(a, dtype=float if np.isrealobj(a) else complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expm_pade66 needs a square matrix")
    norm = np.linalg.norm(a, 1)
    squarings = max(0, int(np.ceil(np.log2(norm / THETA)))) if norm > 0 else 0
    x = a / 2.0**squarings

    eye = np.eye(a.shape[0], dtype=a.dtype)
    num = _COEFFS[0] * eye
    den = _COEFFS[0] * eye
    power = eye
    for j in range(1, _ORDER + 1):
        power = power @ x
        num = num + _COEFFS[j] * power
        den = den + (-1) ** j * _COEFFS[j] * power
    out = np.linalg.solve(den, num)
    for _ in range(squarings):
        out = out @ out
    return out
