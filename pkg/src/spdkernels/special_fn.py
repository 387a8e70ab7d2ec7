"""Orthogonal polynomials and explicit eigenbases.

Jacobi polynomials use the classical normalization
``P_k^(a,b)(1) = Gamma(k+a+1) / (Gamma(k+1) Gamma(a+1))``.  All bases are
orthonormal with respect to the *probability* measure of the manifold, so
that the level sums of ``|f|^2`` equal the eigenspace dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

_T_SLACK = 1e-14


@dataclass(frozen=True)
class JacobiParams:
    """Jacobi parameters ``(alpha, beta)``, both strictly greater than -1."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > -1 and self.beta > -1):
            raise ValueError(
                f"Jacobi parameters must exceed -1, got alpha={self.alpha}, beta={self.beta}"
            )


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1 + _T_SLACK) or np.any(np.isnan(t)):
        raise ValueError("Jacobi argument outside [-1, 1]")
    return np.clip(t, -1.0, 1.0)


def jacobi_table(params: JacobiParams, n: int, t) -> np.ndarray:
    """Evaluate ``P_0 .. P_{n-1}`` at ``t`` by the forward three-term recurrence.

    Returns an array of shape ``(n,) + t.shape``.
    """
    a, b = float(params.alpha), float(params.beta)
    t = _check_t(t)
    out = np.empty((max(n, 0),) + t.shape)
    if n <= 0:
        return out
    out[0] = 1.0
    if n == 1:
        return out
    out[1] = (a + 1) + (a + b + 2) * (t - 1) / 2
    ab = a + b
    for k in range(2, n):
        c2 = 2 * k + ab
        lead = 2 * k * (k + ab) * (c2 - 2)
        mid = (c2 - 1) * (c2 * (c2 - 2) * t + a * a - b * b)
        last = 2 * (k + a - 1) * (k + b - 1) * c2
        out[k] = (mid * out[k - 1] - last * out[k - 2]) / lead
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.all(np.isfinite(out.reshape(n, -1)), axis=1)))
        raise OverflowError(
            f"Jacobi recurrence overflowed at degree {bad} for alpha={a}, beta={b}"
        )
    return out


def jacobi_series(params: JacobiParams, coeffs, t) -> np.ndarray:
    """``sum_k coeffs[k] * P_k(t)`` without materializing the full table.

    Summation runs in increasing degree, so every value uses the same
    accumulation order regardless of the shape of ``t``.
    """
    coeffs = np.asarray(coeffs)
    a, b = float(params.alpha), float(params.beta)
    t = _check_t(t)
    n = coeffs.shape[0]
    acc = np.zeros(t.shape, dtype=np.result_type(coeffs, float))
    if n == 0:
        return acc
    p_prev = np.ones_like(t)
    acc = acc + coeffs[0] * p_prev
    if n == 1:
        return acc
    p_cur = (a + 1) + (a + b + 2) * (t - 1) / 2
    acc = acc + coeffs[1] * p_cur
    ab = a + b
    for k in range(2, n):
        c2 = 2 * k + ab
        lead = 2 * k * (k + ab) * (c2 - 2)
        mid = (c2 - 1) * (c2 * (c2 - 2) * t + a * a - b * b)
        last = 2 * (k + a - 1) * (k + b - 1) * c2
        p_prev, p_cur = p_cur, (mid * p_cur - last * p_prev) / lead
        if coeffs[k] != 0:
            acc = acc + coeffs[k] * p_cur
    if not np.all(np.isfinite(acc)):
        raise OverflowError(f"Jacobi series overflowed for alpha={a}, beta={b}, n={n}")
    return acc


def jacobi_eval(params: JacobiParams, k: int, t):
    """Return ``P_k^(alpha,beta)(t)`` (scalar or array, matching ``t``)."""
    if k < 0 or int(k) != k:
        raise ValueError(f"degree must be a nonnegative integer, got {k}")
    val = jacobi_table(params, int(k) + 1, t)[int(k)]
    return float(val) if val.ndim == 0 else val


def jacobi_at_one(params: JacobiParams, k: int) -> float:
    """``P_k(1) = binom(k + alpha, k)``."""
    return float(special.binom(k + params.alpha, k))


def addition_coefficient(params: JacobiParams, k: int) -> float:
    """Coefficient ``c_k`` of the addition formula.

    ``c_k = Gamma(b+1)(2k+a+b+1)Gamma(k+a+b+1) / (Gamma(a+b+2)Gamma(k+b+1))``,
    evaluated through Pochhammer ratios so that large ``k`` does not overflow.
    ``c_0 = 1`` for every admissible pair (the ``a+b = -1`` case is the limit).
    """
    if k < 0:
        raise ValueError("degree must be nonnegative")
    if k == 0:
        return 1.0
    a, b = float(params.alpha), float(params.beta)
    # Gamma(k+a+b+1)/Gamma(k+b+1) = poch(k+b+1, a); Gamma(a+b+2)/Gamma(b+1) = poch(b+1, a+1)
    val = (2 * k + a + b + 1) * special.poch(k + b + 1, a) / special.poch(b + 1, a + 1)
    if not math.isfinite(val):
        raise OverflowError(f"c_k overflowed at k={k} for alpha={a}, beta={b}")
    return float(val)


def addition_coefficients(params: JacobiParams, n: int) -> np.ndarray:
    return np.array([addition_coefficient(params, k) for k in range(n)])


def _half_gamma(x: Fraction) -> Fraction:
    """``Gamma(x) / sqrt(pi)^h`` for ``x`` a positive multiple of 1/2 (h = 1 iff x is half-odd)."""
    if x.denominator == 1:
        return Fraction(math.factorial(int(x) - 1))
    if x.denominator != 2:
        raise ValueError("exact gamma needs integer or half-integer argument")
    # Gamma(n + 1/2) = (2n)! / (4^n n!) sqrt(pi)
    n = int(x - Fraction(1, 2))
    return Fraction(math.factorial(2 * n), 4**n * math.factorial(n))


def exact_level_dimension(params: JacobiParams, k: int) -> Fraction:
    """``c_k * P_k(1)`` in exact rational arithmetic for half-integer parameters.

    The powers of sqrt(pi) cancel between numerator and denominator.
    """
    a = Fraction(params.alpha).limit_denominator(2)
    b = Fraction(params.beta).limit_denominator(2)
    if k == 0:
        return Fraction(1)
    num = _half_gamma(b + 1) * (2 * k + a + b + 1) * _half_gamma(k + a + b + 1) * _half_gamma(k + a + 1)
    den = (
        _half_gamma(a + b + 2) * _half_gamma(k + b + 1) * _half_gamma(Fraction(k + 1)) * _half_gamma(a + 1)
    )
    return num / den


def circle_basis(k: int, theta):
    """``exp(i k theta)``; orthonormal for ``d theta / 2 pi``."""
    return np.exp(1j * k * np.asarray(theta, dtype=float))


def _legendre_normalized(kmax: int, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Surface-orthonormal associated Legendre values ``Pbar_k^m`` for ``m >= 0``.

    Includes the Condon-Shortley phase.  Shape ``(kmax+1, kmax+1, n)`` indexed ``[k, m]``.
    """
    n = x.shape[0]
    P = np.zeros((kmax + 1, kmax + 1, n))
    P[0, 0] = math.sqrt(1.0 / (4 * math.pi))
    for m in range(1, kmax + 1):
        P[m, m] = -math.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(0, kmax):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(0, kmax + 1):
        for k in range(m + 2, kmax + 1):
            a = math.sqrt((4 * k * k - 1) / (k * k - m * m))
            b = math.sqrt(((k - 1) ** 2 - m * m) / (4 * (k - 1) ** 2 - 1))
            P[k, m] = a * (x * P[k - 1, m] - b * P[k - 2, m])
    return P


def _unit_rows(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValueError("S^2 points must be 3-vectors")
    if np.any(np.abs(np.linalg.norm(pts, axis=1) - 1) > 1e-12):
        raise ValueError("S^2 points must have unit norm")
    return pts


def sphere2_harmonics(kmax: int, points) -> np.ndarray:
    """All harmonics of degree ``<= kmax`` at ``points``.

    Columns follow ``(k, m)`` lexicographically with ``m = -k..k``; the
    normalization is orthonormal for the probability measure on S^2.
    """
    pts = _unit_rows(points)
    x = np.clip(pts[:, 2], -1.0, 1.0)
    s = np.sqrt(np.maximum(0.0, 1 - x * x))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    P = _legendre_normalized(kmax, x, s)
    scale = math.sqrt(4 * math.pi)
    out = np.empty((pts.shape[0], (kmax + 1) ** 2), dtype=complex)
    col = 0
    for k in range(kmax + 1):
        for m in range(-k, k + 1):
            am = abs(m)
            y = scale * P[k, am] * np.exp(1j * am * phi)
            out[:, col] = y if m >= 0 else (-1) ** am * np.conj(y)
            col += 1
    return out


def sphere2_harmonic(k: int, m: int, point) -> complex:
    """Degree ``k``, order ``m`` harmonic at a single unit 3-vector."""
    if k < 0 or abs(m) > k:
        raise ValueError(f"need |m| <= k, got k={k}, m={m}")
    row = sphere2_harmonics(k, point)[0]
    return complex(row[k * k + (m + k)])
