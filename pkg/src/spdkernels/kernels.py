"""Coefficient schemes for kernels on homogeneous manifolds and their evaluation.

Four scheme types are supported:

* :class:`ZonalScheme` -- ``K = sum_k b_k Z_k(t)`` where ``Z_k`` is the level
  function of the addition formula (``Z_k(1) = m_k``).
* :class:`ConvolutionalScheme` -- diagonal in an explicit eigenbasis, with
  per-level weight vectors ``d_{j,k}`` (circle and 2-sphere).
* :class:`GeneralScheme` -- a finite Hermitian coefficient window, optionally
  extended by a zonal diagonal tail (circle and 2-sphere).
* :class:`ProductZonalScheme` -- zonal in each factor of a product manifold.

Infinite tails are restricted to power-decay and geometric rules masked by
spectral sets, which keeps tail bounds computable and support sets exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .manifold import (
    Family,
    ManifoldDescriptor,
    ProductManifold,
    as_points,
    cosine_matrix,
    eigenvalue,
    make_manifold,
)
from .special_fn import (
    addition_coefficients,
    circle_basis,
    jacobi_at_one,
    jacobi_series,
    jacobi_table,
    sphere2_harmonics,
)
from .spectral_sets import (
    Progression,
    ProductSpectralSet,
    SpectralSet,
    format_product_set,
    format_set,
    parse_product_set,
    parse_set,
    restrict_min,
)

DEFAULT_REL_TAIL = 1e-10
MAX_TRUNCATION = 5000
_MAX_EXACT_TAIL = 200_000


class Evaluation(NamedTuple):
    value: object
    tail_bound: float


# -- level data ----------------------------------------------------------------


def level_argument(m: ManifoldDescriptor, t):
    """Map ``t = cos(d / epsilon)`` to the Jacobi argument.

    For ``epsilon = 2`` the level functions are even in ``t`` and the Jacobi
    argument is ``2 t^2 - 1``.
    """
    t = np.asarray(t, dtype=float)
    if m.epsilon == 1:
        return t
    return np.clip(2 * t * t - 1, -1.0, 1.0)


def level_functions(m: ManifoldDescriptor, n: int, t) -> np.ndarray:
    """``Z_k(t) = c_k P_k(level_argument(t))`` for ``k < n``; shape ``(n,) + t.shape``."""
    c = addition_coefficients(m.jacobi, n)
    P = jacobi_table(m.jacobi, n, level_argument(m, t))
    return c.reshape((n,) + (1,) * (P.ndim - 1)) * P


def level_dimensions(m: ManifoldDescriptor, n: int) -> np.ndarray:
    """Floating-point ``m_k`` for ``k < n`` (exact integers up to rounding)."""
    c = addition_coefficients(m.jacobi, n)
    p1 = np.array([jacobi_at_one(m.jacobi, k) for k in range(n)])
    return np.rint(c * p1)


def _log_dim_continuous(m: ManifoldDescriptor, x):
    a, b = m.alpha, m.beta
    x = np.asarray(x, dtype=float)
    return (
        np.log(2 * x + a + b + 1)
        + special.gammaln(x + a + b + 1)
        + special.gammaln(x + a + 1)
        + special.gammaln(b + 1)
        - special.gammaln(a + b + 2)
        - special.gammaln(x + b + 1)
        - special.gammaln(x + 1)
        - special.gammaln(a + 1)
    )


def _lambda_continuous(m: ManifoldDescriptor, x):
    if m.family is Family.CIRCLE:
        return x * x
    if m.family is Family.SPHERE:
        return x * (x + m.d - 2)
    if m.family is Family.REAL_PROJECTIVE:
        return 2 * x * (2 * x + m.d - 2)
    raise NotImplementedError(f"spectrum not implemented for {m.family.value}")


# -- tail rules ----------------------------------------------------------------


@dataclass(frozen=True)
class ZeroTail:
    rule = "zero"

    @property
    def active(self) -> bool:
        return False

    def values(self, m, ks) -> np.ndarray:
        return np.zeros(len(ks))

    def log_term(self, m, x):
        return -np.inf

    def to_dict(self) -> dict:
        return {"rule": "zero"}


@dataclass(frozen=True)
class PowerDecay:
    """``scale * (1 + lambda_k)^(-exponent)``."""

    scale: float
    exponent: float
    rule = "power"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("power-decay scale must be positive")

    @property
    def active(self) -> bool:
        return True

    def values(self, m, ks) -> np.ndarray:
        lam = _lambda_continuous(m, np.asarray(ks, dtype=float))
        return self.scale * (1 + lam) ** (-self.exponent)

    def log_term(self, m, x):
        return math.log(self.scale) - self.exponent * np.log1p(_lambda_continuous(m, x))

    def check_convergence(self, m: ManifoldDescriptor):
        need = (m.d - 1) / 2 + 1
        if not self.exponent > need:
            raise ValueError(
                f"power-decay exponent {self.exponent} too small for {m}: need q > {need}"
            )

    def to_dict(self) -> dict:
        return {"rule": "power", "scale": self.scale, "exponent": self.exponent}


@dataclass(frozen=True)
class Geometric:
    """``scale * base^k``."""

    base: float
    scale: float = 1.0
    rule = "geometric"

    def __post_init__(self):
        if not 0 < self.base < 1:
            raise ValueError("geometric base must lie in (0, 1)")
        if not self.scale > 0:
            raise ValueError("geometric scale must be positive")

    @property
    def active(self) -> bool:
        return True

    def values(self, m, ks) -> np.ndarray:
        return self.scale * self.base ** np.asarray(ks, dtype=float)

    def log_term(self, m, x):
        return math.log(self.scale) + np.asarray(x, dtype=float) * math.log(self.base)

    def check_convergence(self, m):
        pass

    def to_dict(self) -> dict:
        return {"rule": "geometric", "base": self.base, "scale": self.scale}


@dataclass(frozen=True)
class ProductGeometric:
    """Separable tail ``scale * r1^k * r2^k'`` for product schemes."""

    bases: tuple
    scale: float = 1.0
    rule = "geometric"

    def __post_init__(self):
        bases = tuple(float(r) for r in self.bases)
        if len(bases) != 2 or not all(0 < r < 1 for r in bases):
            raise ValueError("product geometric tail needs two bases in (0, 1)")
        if not self.scale > 0:
            raise ValueError("geometric scale must be positive")
        object.__setattr__(self, "bases", bases)

    @property
    def active(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"rule": "geometric", "bases": list(self.bases), "scale": self.scale}


def _mask_all_from(mask: SpectralSet, start: int, ks) -> np.ndarray:
    return np.array([k >= start and k in mask for k in ks], dtype=bool)


def tail_sum(m: ManifoldDescriptor, tail, mask: SpectralSet, start: int) -> float:
    """Upper bound on ``sum_{k >= start, k in mask} |tail_k| m_k``.

    Terms are summed exactly until the continuous extension of the summand
    is decreasing and negligible; the remainder is bounded by one extra
    term plus the integral of that extension.
    """
    if not tail.active or restrict_min(mask, start).is_empty:
        return 0.0

    def log_g(x):
        return tail.log_term(m, x) + _log_dim_continuous(m, x)

    def dlog(x, h=1e-4):
        return (log_g(x + h) - log_g(x - h)) / (2 * h)

    total = 0.0
    k = start
    block = 256
    while True:
        ks = np.arange(k, k + block)
        vals = tail.values(m, ks) * level_dimensions_at(m, ks)
        keep = _mask_all_from(mask, start, ks)
        total += float(np.sum(vals[keep]))
        k += block
        K = max(k, 2)
        g = math.exp(float(log_g(K)))
        if dlog(K) < 0 and dlog(2 * K) < 0 and g <= 1e-6 * max(total, 1e-300):
            break
        if k - start > _MAX_EXACT_TAIL:
            break
    # substitute x = K / u so the infinite range maps onto (0, 1]
    rest, _ = integrate.quad(
        lambda u: math.exp(float(log_g(K / u))) * K / (u * u) if u > 0 else 0.0, 0.0, 1.0, limit=200
    )
    return total + g + rest


def level_dimensions_at(m: ManifoldDescriptor, ks) -> np.ndarray:
    ks = np.asarray(ks, dtype=float)
    out = np.exp(_log_dim_continuous(m, np.maximum(ks, 1)))
    return np.where(ks == 0, 1.0, np.rint(out))


# -- coefficient sequences -----------------------------------------------------


@dataclass(frozen=True)
class CoefficientSequence:
    """Explicit values for ``k < len(explicit)`` and a masked tail beyond."""

    explicit: tuple = ()
    tail: object = field(default_factory=ZeroTail)
    mask: SpectralSet = field(default_factory=SpectralSet.naturals)

    def __post_init__(self):
        vals = tuple(float(v) for v in np.asarray(self.explicit, dtype=float).ravel())
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("explicit coefficients must be finite")
        object.__setattr__(self, "explicit", vals)

    @property
    def n_explicit(self) -> int:
        return len(self.explicit)

    def values(self, m: ManifoldDescriptor, n: int) -> np.ndarray:
        out = np.zeros(n)
        n0 = min(n, self.n_explicit)
        out[:n0] = self.explicit[:n0]
        if n > self.n_explicit and self.tail.active:
            ks = np.arange(self.n_explicit, n)
            keep = np.array([k in self.mask for k in ks], dtype=bool)
            out[self.n_explicit:] = np.where(keep, self.tail.values(m, ks), 0.0)
        return out

    def tail_set(self) -> SpectralSet:
        if not self.tail.active:
            return SpectralSet()
        return restrict_min(self.mask, self.n_explicit)

    def support(self) -> SpectralSet:
        """``{k : b_k > 0}``."""
        pos = tuple(k for k, v in enumerate(self.explicit) if v > 0)
        return SpectralSet(pos).union(self.tail_set())

    def nonzero_support(self) -> SpectralSet:
        nz = tuple(k for k, v in enumerate(self.explicit) if v != 0)
        return SpectralSet(nz).union(self.tail_set())

    def tail_bound(self, m: ManifoldDescriptor, n: int) -> float:
        """Bound on ``sum_{k >= n} |b_k| m_k``."""
        bound = 0.0
        if n < self.n_explicit:
            dims = level_dimensions(m, self.n_explicit)
            bound += float(np.sum(np.abs(self.explicit[n:]) * dims[n:]))
        return bound + tail_sum(m, self.tail, self.mask, max(n, self.n_explicit))

    def to_dict(self) -> dict:
        tail = self.tail.to_dict()
        if self.tail.active:
            tail["mask"] = format_set(self.mask)
        return {"coefficients": list(self.explicit), "tail": tail}


def _choose_truncation(bound_fn, scale: float, n_min: int, rel=DEFAULT_REL_TAIL, cap=MAX_TRUNCATION) -> int:
    target = rel * max(scale, 1e-300)
    n_min = max(1, n_min)
    if bound_fn(n_min) <= target:
        return n_min
    hi = n_min
    while bound_fn(hi) > target:
        if hi >= cap:
            return cap
        hi = min(cap, 2 * hi)
    lo = hi // 2 if hi > n_min else n_min
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound_fn(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


# -- zonal schemes --------------------------------------------------------------


def _require_basis(m: ManifoldDescriptor):
    if not (m.is_circle or (m.is_sphere and m.d == 3)):
        raise NotImplementedError(f"explicit eigenbasis available for the circle and S^2 only, not {m}")


@dataclass(frozen=True)
class ZonalScheme:
    """``K(x, y) = sum_k b_k c_k P_k(level_argument(cos(d(x, y) / epsilon)))``."""

    manifold: ManifoldDescriptor
    coeffs: CoefficientSequence

    kind = "zonal"

    def __post_init__(self):
        if self.coeffs.tail.active:
            self.coeffs.tail.check_convergence(self.manifold)

    @classmethod
    def from_coefficients(cls, manifold, b, tail=None, mask=None) -> "ZonalScheme":
        return cls(
            manifold,
            CoefficientSequence(tuple(b), tail or ZeroTail(), mask or SpectralSet.naturals()),
        )

    def b(self, n: int) -> np.ndarray:
        return self.coeffs.values(self.manifold, n)

    def support(self) -> SpectralSet:
        return self.coeffs.support()

    def nonzero_support(self) -> SpectralSet:
        return self.coeffs.nonzero_support()

    def tail_bound(self, n: int) -> float:
        return self.coeffs.tail_bound(self.manifold, n)

    def value_at_one(self, n: int | None = None) -> float:
        n = self.coeffs.n_explicit if n is None else n
        return float(np.sum(np.abs(self.b(n)) * level_dimensions(self.manifold, n))) + self.tail_bound(n)

    @cached_property
    def default_truncation(self) -> int:
        scale = self.value_at_one()
        return _choose_truncation(self.tail_bound, scale, self.coeffs.n_explicit)

    def to_dict(self) -> dict:
        return {"type": "zonal", **self.coeffs.to_dict()}


def zonal_eval(s: ZonalScheme, t, truncation: int | None = None) -> Evaluation:
    """Evaluate a zonal scheme at ``t = cos(d / epsilon)`` (scalar or array)."""
    n = s.default_truncation if truncation is None else int(truncation)
    if n < 1:
        raise ValueError("truncation must be at least 1")
    m = s.manifold
    w = s.b(n) * addition_coefficients(m.jacobi, n)
    val = jacobi_series(m.jacobi, w, level_argument(m, t))
    out = float(val) if np.ndim(val) == 0 else val
    return Evaluation(out, s.tail_bound(n))


def zonal_component(m: ManifoldDescriptor, k: int, xi, zeta) -> float:
    """``m_k^(-1/2) Z_k(cos(d(xi, zeta) / epsilon))``; equals ``m_k^(1/2)`` on the diagonal."""
    t = cosine_matrix(m, np.reshape(xi, (1, -1)), np.reshape(zeta, (1, -1)))[0, 0]
    Z = level_functions(m, k + 1, t)[k]
    return float(Z / math.sqrt(level_dimensions(m, k + 1)[k]))


def d_to_b(m: ManifoldDescriptor, d) -> np.ndarray:
    """Convert weights on normalized zonal functions to ``b_k`` (``b_k = d_k / sqrt(m_k)``)."""
    d = np.asarray(d, dtype=float)
    return d / np.sqrt(level_dimensions(m, d.shape[0]))


def b_to_d(m: ManifoldDescriptor, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    return b * np.sqrt(level_dimensions(m, b.shape[0]))


# -- explicit bases --------------------------------------------------------------


def index_frequency(ell: int) -> int:
    """Circle flattening ``0, 1, -1, 2, -2, ...``."""
    return 0 if ell == 0 else ((ell + 1) // 2) * (1 if ell % 2 else -1)


def frequency_index(freq: int) -> int:
    return 0 if freq == 0 else (2 * freq - 1 if freq > 0 else -2 * freq)


def index_level(m: ManifoldDescriptor, ell: int) -> int:
    _require_basis(m)
    if m.is_circle:
        return abs(index_frequency(ell))
    return math.isqrt(ell)


def index_count(m: ManifoldDescriptor, levels: int) -> int:
    """Number of basis functions in the first ``levels`` levels."""
    _require_basis(m)
    if levels <= 0:
        return 0
    return 2 * levels - 1 if m.is_circle else levels * levels


def basis_matrix(m: ManifoldDescriptor, X, n: int) -> np.ndarray:
    """First ``n`` basis functions (in flattening order) at the points ``X``."""
    _require_basis(m)
    X = as_points(m, X)
    if m.is_circle:
        freqs = np.array([index_frequency(ell) for ell in range(n)])
        return circle_basis(freqs[None, :], X[:, 0][:, None])
    kmax = max(math.isqrt(max(n - 1, 0)), 0)
    return sphere2_harmonics(kmax, X)[:, :n]


# -- convolutional schemes --------------------------------------------------------


@dataclass(frozen=True)
class ConvolutionalScheme:
    """Diagonal coefficients ``d_{j,k}`` per level, plus a zonal tail."""

    manifold: ManifoldDescriptor
    levels: tuple
    tail: object = field(default_factory=ZeroTail)
    mask: SpectralSet = field(default_factory=SpectralSet.naturals)

    kind = "convolutional"

    def __post_init__(self):
        _require_basis(self.manifold)
        levels = tuple(tuple(float(v) for v in np.ravel(lv)) for lv in self.levels)
        dims = level_dimensions(self.manifold, len(levels))
        for k, lv in enumerate(levels):
            if len(lv) != int(dims[k]):
                raise ValueError(f"level {k} needs {int(dims[k])} weights, got {len(lv)}")
            if not all(math.isfinite(v) for v in lv):
                raise ValueError(f"level {k} has nonfinite weights")
        object.__setattr__(self, "levels", levels)
        if self.tail.active:
            self.tail.check_convergence(self.manifold)

    @property
    def n_explicit(self) -> int:
        return len(self.levels)

    @cached_property
    def tail_scheme(self) -> ZonalScheme:
        return ZonalScheme(self.manifold, CoefficientSequence((0.0,) * self.n_explicit, self.tail, self.mask))

    def diagonal(self) -> np.ndarray:
        return np.array([v for lv in self.levels for v in lv])

    def U(self) -> SpectralSet:
        """Levels with some nonzero weight."""
        fin = tuple(k for k, lv in enumerate(self.levels) if any(v != 0 for v in lv))
        return SpectralSet(fin).union(self.tail_scheme.coeffs.tail_set())

    def L(self) -> SpectralSet:
        """Levels with all weights positive."""
        fin = tuple(k for k, lv in enumerate(self.levels) if all(v > 0 for v in lv))
        return SpectralSet(fin).union(self.tail_scheme.coeffs.tail_set())

    def tail_bound(self, n: int) -> float:
        return self.tail_scheme.tail_bound(max(n, self.n_explicit))

    @cached_property
    def default_truncation(self) -> int:
        scale = float(np.sum(np.abs(self.diagonal()))) + self.tail_bound(self.n_explicit)
        return _choose_truncation(self.tail_bound, scale, self.n_explicit)

    def to_dict(self) -> dict:
        tail = self.tail.to_dict()
        if self.tail.active:
            tail["mask"] = format_set(self.mask)
        return {"type": "convolutional", "coefficients": [list(lv) for lv in self.levels], "tail": tail}


# -- general schemes ----------------------------------------------------------------


@dataclass(frozen=True)
class GeneralScheme:
    """Hermitian coefficient window ``A`` with ``K = f(x)^T A conj(f(y))``.

    Basis order on the circle is ``0, 1, -1, 2, -2, ...``; on S^2 it is
    ``(k, m)`` lexicographic with ``m = -k..k``.  An optional masked tail
    adds ``tail(k)`` on the diagonal for all levels beyond the window, which
    requires the window to end on a level boundary.
    """

    manifold: ManifoldDescriptor
    matrix: np.ndarray
    tail: object = field(default_factory=ZeroTail)
    mask: SpectralSet = field(default_factory=SpectralSet.naturals)

    kind = "general"

    def __post_init__(self):
        _require_basis(self.manifold)
        A = np.array(self.matrix, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("coefficient window must be square")
        if not np.all(np.isfinite(A)):
            raise ValueError("coefficient window has nonfinite entries")
        if not np.array_equal(A, A.conj().T):
            raise ValueError("coefficient window must be Hermitian exactly as stored")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        if self.tail.active:
            if index_count(self.manifold, self.window_levels) != self.size:
                raise ValueError("a diagonal tail needs a window that ends on a level boundary")
            self.tail.check_convergence(self.manifold)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def window_levels(self) -> int:
        """Number of complete levels covered by the window."""
        n = self.size
        return (n + 1) // 2 if self.manifold.is_circle else math.isqrt(n)

    @cached_property
    def tail_scheme(self) -> ZonalScheme:
        return ZonalScheme(self.manifold, CoefficientSequence((0.0,) * self.window_levels, self.tail, self.mask))

    def tail_bound(self, n: int) -> float:
        if not self.tail.active:
            return 0.0
        return self.tail_scheme.tail_bound(max(n, self.window_levels))

    def eigenvalues_of_index(self) -> np.ndarray:
        return np.array([eigenvalue(self.manifold, index_level(self.manifold, ell)) for ell in range(self.size)])

    @cached_property
    def default_truncation(self) -> int:
        if not self.tail.active:
            return max(self.window_levels, 1)
        scale = float(np.sum(np.abs(np.diag(self.matrix)))) + self.tail_bound(self.window_levels)
        return _choose_truncation(self.tail_bound, scale, self.window_levels)

    def to_dict(self) -> dict:
        A = self.matrix
        out = {"type": "general", "coefficients": {"re": A.real.tolist(), "im": A.imag.tolist()}}
        tail = self.tail.to_dict()
        if self.tail.active:
            tail["mask"] = format_set(self.mask)
        out["tail"] = tail
        return out


# -- product schemes ------------------------------------------------------------------


@dataclass(frozen=True)
class ProductZonalScheme:
    """``K = sum a_{k,k'} Z_k(t1) Z'_{k'}(t2)`` on a product of two manifolds.

    ``window`` holds ``a_{k,k'}`` for ``k < N1, k' < N2``; outside that
    rectangle the coefficients follow the separable tail on ``mask``.
    """

    factors: tuple
    window: np.ndarray
    tail: object = field(default_factory=ZeroTail)
    mask: ProductSpectralSet = field(default_factory=ProductSpectralSet.naturals)

    kind = "product_zonal"

    def __post_init__(self):
        if len(self.factors) != 2:
            raise ValueError("product schemes have exactly two factors")
        object.__setattr__(self, "factors", tuple(self.factors))
        W = np.array(self.window, dtype=float)
        if W.size == 0:
            W = np.zeros((0, 0))
        if W.ndim != 2 or not np.all(np.isfinite(W)):
            raise ValueError("window must be a finite 2-d array")
        W.setflags(write=False)
        object.__setattr__(self, "window", W)

    @property
    def manifold(self) -> ProductManifold:
        return ProductManifold(self.factors)

    def coefficients(self, n1: int, n2: int) -> np.ndarray:
        C = np.zeros((n1, n2))
        w1, w2 = min(n1, self.window.shape[0]), min(n2, self.window.shape[1])
        C[:w1, :w2] = self.window[:w1, :w2]
        if self.tail.active:
            r1, r2 = self.tail.bases
            N1, N2 = self.window.shape
            for k in range(n1):
                for l in range(n2):
                    if (k >= N1 or l >= N2) and (k, l) in self.mask:
                        C[k, l] = self.tail.scale * r1**k * r2**l
        return C

    def tail_pairs(self) -> ProductSpectralSet:
        if not self.tail.active:
            return ProductSpectralSet()
        N1, N2 = self.window.shape
        return self.mask.lift(N1, 0).union(self.mask.lift(0, N2))

    def support(self) -> ProductSpectralSet:
        """``{(k, k') : a_{k,k'} > 0}``."""
        pos = tuple(zip(*np.nonzero(self.window > 0)))
        return ProductSpectralSet(tuple((int(k), int(l)) for k, l in pos)).union(self.tail_pairs())

    def nonzero_support(self) -> ProductSpectralSet:
        nz = tuple(zip(*np.nonzero(self.window != 0)))
        return ProductSpectralSet(tuple((int(k), int(l)) for k, l in nz)).union(self.tail_pairs())

    def _geometric_mass(self, i: int, n: int) -> float:
        m = self.factors[i]
        return tail_sum(m, Geometric(self.tail.bases[i]), SpectralSet.naturals(), n)

    def tail_bound(self, n1: int, n2: int) -> float:
        """Bound on ``sum |a_{k,k'}| m_k m'_{k'}`` over pairs outside ``[0,n1) x [0,n2)``."""
        N1, N2 = self.window.shape
        bound = 0.0
        if n1 < N1 or n2 < N2:
            d1 = level_dimensions(self.factors[0], N1)
            d2 = level_dimensions(self.factors[1], N2)
            W = np.abs(self.window) * d1[:, None] * d2[None, :]
            W[: min(n1, N1), : min(n2, N2)] = 0.0
            bound += float(W.sum())
        if self.tail.active:
            S1, S2 = self._geometric_mass(0, 0), self._geometric_mass(1, 0)
            P1 = S1 - self._geometric_mass(0, n1)
            P2 = S2 - self._geometric_mass(1, n2)
            bound += self.tail.scale * max(S1 * S2 - P1 * P2, 0.0)
        return bound

    @cached_property
    def default_truncation(self) -> tuple:
        N1, N2 = self.window.shape
        d1 = level_dimensions(self.factors[0], N1)
        d2 = level_dimensions(self.factors[1], N2)
        scale = float(np.sum(np.abs(self.window) * d1[:, None] * d2[None, :])) + self.tail_bound(N1, N2)
        if not self.tail.active:
            return (max(N1, 1), max(N2, 1))
        n = _choose_truncation(lambda n: self.tail_bound(max(n, N1), max(n, N2)), scale, max(N1, N2, 1), cap=400)
        return (max(n, N1), max(n, N2))

    def to_dict(self) -> dict:
        out = {"type": "product_zonal", "coefficients": self.window.tolist()}
        tail = self.tail.to_dict()
        if self.tail.active:
            tail["mask"] = format_product_set(self.mask)
        out["tail"] = tail
        return out


# -- evaluation ---------------------------------------------------------------------


def _zonal_matrix(s: ZonalScheme, X, Y, n) -> Evaluation:
    T = cosine_matrix(s.manifold, X, Y)
    return zonal_eval(s, T, n)


def kernel_matrix(s, X, Y=None, truncation=None) -> Evaluation:
    """Kernel values ``K(x_i, y_j)`` for all pairs, with the truncation tail bound."""
    if isinstance(s, ProductZonalScheme):
        return _product_matrix(s, X, Y, truncation)
    m = s.manifold
    X = as_points(m, X)
    Y = X if Y is None else as_points(m, Y)
    if isinstance(s, ZonalScheme):
        return _zonal_matrix(s, X, Y, truncation)
    n = s.default_truncation if truncation is None else int(truncation)
    if isinstance(s, ConvolutionalScheme):
        D = s.diagonal()
        FX, FY = basis_matrix(m, X, D.size), basis_matrix(m, Y, D.size)
        K = (FX * D[None, :]) @ FY.conj().T
        if s.tail.active and n > s.n_explicit:
            K = K + _zonal_matrix(s.tail_scheme, X, Y, n).value
        return Evaluation(K, s.tail_bound(n))
    if isinstance(s, GeneralScheme):
        FX, FY = basis_matrix(m, X, s.size), basis_matrix(m, Y, s.size)
        K = FX @ s.matrix @ FY.conj().T
        if s.tail.active and n > s.window_levels:
            K = K + _zonal_matrix(s.tail_scheme, X, Y, n).value
        return Evaluation(K, s.tail_bound(n))
    raise TypeError(f"not a kernel scheme: {type(s).__name__}")


def kernel_eval(s, xi, zeta, truncation=None) -> complex:
    """Single kernel value ``K(xi, zeta)``."""
    if isinstance(s, ProductZonalScheme):
        return product_kernel_eval(s, xi, zeta, truncation).value
    m = s.manifold
    P = as_points(m, np.reshape(xi, (1, -1)))
    Q = as_points(m, np.reshape(zeta, (1, -1)))
    val = kernel_matrix(s, P, Q, truncation).value[0, 0]
    return complex(val) if np.iscomplexobj(val) else float(val)


def _product_truncation(s: ProductZonalScheme, truncation) -> tuple:
    if truncation is None:
        return s.default_truncation
    if np.ndim(truncation) == 0:
        return (int(truncation), int(truncation))
    n1, n2 = truncation
    return (int(n1), int(n2))


def product_kernel_from_cosines(s: ProductZonalScheme, t1, t2, truncation=None) -> Evaluation:
    """Product kernel at factor cosine arguments ``t1, t2`` (same shapes)."""
    n1, n2 = _product_truncation(s, truncation)
    t1, t2 = np.asarray(t1, dtype=float), np.asarray(t2, dtype=float)
    Z1 = level_functions(s.factors[0], n1, t1).reshape(n1, -1)
    Z2 = level_functions(s.factors[1], n2, t2).reshape(n2, -1)
    C = s.coefficients(n1, n2)
    vals = np.einsum("kp,kl,lp->p", Z1, C, Z2).reshape(t1.shape)
    out = float(vals) if vals.ndim == 0 else vals
    return Evaluation(out, s.tail_bound(n1, n2))


def _product_matrix(s: ProductZonalScheme, X, Y, truncation) -> Evaluation:
    pm = s.manifold
    X = as_points(pm, X)
    Y = X if Y is None else as_points(pm, Y)
    (X0, X1), (Y0, Y1) = pm.split(X), pm.split(Y)
    T1 = cosine_matrix(s.factors[0], X0, Y0)
    T2 = cosine_matrix(s.factors[1], X1, Y1)
    return product_kernel_from_cosines(s, T1, T2, truncation)


def _as_product_point(pm: ProductManifold, p) -> np.ndarray:
    if isinstance(p, tuple) and len(p) == 2:
        p = np.concatenate([np.ravel(p[0]), np.ravel(p[1])])
    return as_points(pm, np.reshape(p, (1, -1)))


def product_kernel_eval(s: ProductZonalScheme, p, q, truncation=None) -> Evaluation:
    """``K((xi, zeta), (xi', zeta'))``; points may be stacked arrays or factor tuples."""
    pm = s.manifold
    ev = _product_matrix(s, _as_product_point(pm, p), _as_product_point(pm, q), truncation)
    return Evaluation(float(ev.value[0, 0]), ev.tail_bound)


def max_frequency(s, truncation=None) -> int:
    """Largest circle frequency present in the truncated scheme."""
    if isinstance(s, GeneralScheme):
        w = (s.size) // 2
        if s.tail.active:
            n = s.default_truncation if truncation is None else int(truncation)
            w = max(w, n - 1)
        return w
    n = s.default_truncation if truncation is None else int(truncation)
    return n - 1


def recover_coefficient(s, ell: int, ell2: int, nodes: int | None = None, truncation=None) -> complex:
    """Recover ``a_{ell, ell2}`` from kernel values by trapezoid quadrature on the circle.

    Exact (to rounding) for truncated schemes once ``nodes >= 2 * maxfreq + 1``.
    """
    m = s.manifold
    if not m.is_circle:
        raise NotImplementedError("coefficient recovery is implemented on the circle")
    K = max_frequency(s, truncation)
    need = 2 * K + 1
    Q = need if nodes is None else int(nodes)
    if Q < need:
        raise ValueError(f"need at least {need} quadrature nodes, got {Q}")
    theta = (2 * math.pi * np.arange(Q) / Q).reshape(-1, 1)
    G = kernel_matrix(s, theta, None, truncation).value
    f1 = circle_basis(index_frequency(ell), theta[:, 0])
    f2 = circle_basis(index_frequency(ell2), theta[:, 0])
    return complex(np.conj(f1) @ G @ f2 / (Q * Q))


# -- kernel-spec files ----------------------------------------------------------------


@dataclass
class KernelSpec:
    """A parsed kernel-spec document."""

    scheme: object
    truncation: object = None
    tolerances: dict = field(default_factory=dict)
    check: str = "spd"
    extra: dict = field(default_factory=dict)

    @property
    def manifold(self):
        return self.scheme.manifold


class SpecError(ValueError):
    """Malformed kernel spec; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise SpecError(f"{where}.{key}" if where else key, "missing required key")
    return d[key]


def _parse_manifold_entry(entry, where) -> ManifoldDescriptor:
    if isinstance(entry, str):
        fam, _, d = entry.partition(":")
        entry = {"family": fam, "d": int(d) if d else 2}
    try:
        return make_manifold(_need(entry, "family", where), _need(entry, "d", where))
    except SpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecError(where, str(exc)) from None


def _parse_tail(entry, where, product=False):
    if entry is None:
        return ZeroTail(), None
    rule = str(entry.get("rule", "zero")).lower()
    try:
        if rule == "zero":
            return ZeroTail(), None
        mask_text = entry.get("mask", "all")
        mask = parse_product_set(mask_text) if product else parse_set(mask_text)
        if product:
            if rule != "geometric":
                raise SpecError(f"{where}.rule", "product tails support the geometric rule only")
            return ProductGeometric(tuple(_need(entry, "bases", where)), float(entry.get("scale", 1.0))), mask
        if rule == "geometric":
            return Geometric(float(_need(entry, "base", where)), float(entry.get("scale", 1.0))), mask
        if rule in ("power", "powerdecay", "power_decay"):
            return PowerDecay(float(entry.get("scale", 1.0)), float(_need(entry, "exponent", where))), mask
    except SpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecError(where, str(exc)) from None
    raise SpecError(f"{where}.rule", f"unknown tail rule {rule!r}")


def parse_spec(doc: dict) -> KernelSpec:
    """Build a :class:`KernelSpec` from a JSON-like dict."""
    if not isinstance(doc, dict):
        raise SpecError("<root>", "spec must be a JSON object")
    kernel = _need(doc, "kernel", "")
    ktype = str(_need(kernel, "type", "kernel")).lower()
    coeffs = kernel.get("coefficients", [])
    try:
        if ktype == "product_zonal":
            prod = _need(doc, "product", "")
            factors = tuple(
                _parse_manifold_entry(f, f"product.factors[{i}]")
                for i, f in enumerate(_need(prod, "factors", "product"))
            )
            tail, mask = _parse_tail(kernel.get("tail"), "kernel.tail", product=True)
            scheme = ProductZonalScheme(factors, np.array(coeffs, dtype=float), tail, mask or ProductSpectralSet.naturals())
        else:
            m = _parse_manifold_entry(_need(doc, "manifold", ""), "manifold")
            tail, mask = _parse_tail(kernel.get("tail"), "kernel.tail")
            mask = mask or SpectralSet.naturals()
            if ktype == "zonal":
                scheme = ZonalScheme(m, CoefficientSequence(tuple(coeffs), tail, mask))
            elif ktype == "convolutional":
                scheme = ConvolutionalScheme(m, tuple(tuple(lv) for lv in coeffs), tail, mask)
            elif ktype == "general":
                if isinstance(coeffs, dict):
                    re = np.array(_need(coeffs, "re", "kernel.coefficients"), dtype=float)
                    im = np.array(coeffs.get("im", np.zeros_like(re)), dtype=float)
                    A = re + 1j * im
                else:
                    A = np.array(coeffs, dtype=complex)
                scheme = GeneralScheme(m, A, tail, mask)
            else:
                raise SpecError("kernel.type", f"unknown kernel type {ktype!r}")
    except SpecError:
        raise
    except (ValueError, TypeError, NotImplementedError) as exc:
        raise SpecError("kernel", str(exc)) from None
    trunc = doc.get("truncation")
    if trunc is not None:
        ok = all(int(v) >= 1 for v in np.ravel(trunc))
        if not ok:
            raise SpecError("truncation", "must be >= 1")
    tol = dict(doc.get("tolerances") or {})
    for key, val in tol.items():
        if not float(val) > 0:
            raise SpecError(f"tolerances.{key}", "tolerances must be positive")
    known = {"manifold", "product", "kernel", "truncation", "tolerances", "check"}
    extra = {k: v for k, v in doc.items() if k not in known}
    return KernelSpec(scheme, trunc, tol, str(doc.get("check", "spd")), extra)


def spec_to_dict(spec: KernelSpec) -> dict:
    s = spec.scheme
    out = {}
    if isinstance(s, ProductZonalScheme):
        out["product"] = {"factors": [f.to_dict() for f in s.factors]}
    else:
        out["manifold"] = s.manifold.to_dict()
    out["kernel"] = s.to_dict()
    if spec.truncation is not None:
        out["truncation"] = spec.truncation
    if spec.tolerances:
        out["tolerances"] = dict(spec.tolerances)
    out["check"] = spec.check
    out.update(spec.extra)
    return out


def naturals_from(start: int) -> SpectralSet:
    return SpectralSet((), (Progression(start, 1),))


def coupled_frequency_scheme(levels: int, ratio: float = 0.8, tail_exponent: float = 1.6,
                             tail_scale: float = 1.0) -> GeneralScheme:
    """Circle scheme whose weighted rows all have off-diagonal ratio ``ratio``.

    The window couples frequencies ``+k`` and ``-k`` (adjacent indices in
    the flattening) through ``a_{+k,-k} = ratio * a_{kk}``, with diagonal
    ``(1 + k^2)^(-1)``.  Row 0 has no partner and ratio 0.  A power-decay
    diagonal tail covers the frequencies beyond the window.
    """
    if not 0 <= ratio < 1:
        raise ValueError("ratio must lie in [0, 1)")
    m = make_manifold("circle", 2)
    n = index_count(m, levels)
    A = np.zeros((n, n), dtype=complex)
    for ell in range(n):
        A[ell, ell] = 1.0 / (1 + index_frequency(ell) ** 2)
    for ell in range(1, n, 2):
        A[ell, ell + 1] = A[ell + 1, ell] = ratio * A[ell, ell]
    return GeneralScheme(m, A, PowerDecay(tail_scale, tail_exponent), SpectralSet.naturals())
