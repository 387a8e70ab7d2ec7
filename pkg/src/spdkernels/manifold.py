"""Two-point homogeneous manifolds, the circle, and products of two factors.

The superscript convention follows ``S^{d-1}``: a descriptor with ``d = 3``
is the 2-sphere.  Geometry (points, distances, sampling) is available for
the circle, spheres and real projective spaces; the remaining projective
families carry their Jacobi data only, and callers feed zonal evaluation
with ``t = cos(d / epsilon)`` directly.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .special_fn import JacobiParams, exact_level_dimension

MIN_SEPARATION = 1e-9
_MAX_RETRIES = 100


class Family(str, enum.Enum):
    CIRCLE = "circle"
    SPHERE = "sphere"
    REAL_PROJECTIVE = "real_projective"
    COMPLEX_PROJECTIVE = "complex_projective"
    QUATERNIONIC = "quaternionic"
    CAYLEY = "cayley"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "s1": "circle",
            "rp": "real_projective",
            "realprojective": "real_projective",
            "cp": "complex_projective",
            "complexprojective": "complex_projective",
            "hp": "quaternionic",
            "quaternionic_projective": "quaternionic",
            "cayley16": "cayley",
            "octonionic": "cayley",
        }
        return cls(aliases.get(key, key))


_BETA = {
    Family.REAL_PROJECTIVE: -0.5,
    Family.COMPLEX_PROJECTIVE: 0.0,
    Family.QUATERNIONIC: 1.0,
    Family.CAYLEY: 3.0,
}

GEOMETRIC_FAMILIES = frozenset({Family.CIRCLE, Family.SPHERE, Family.REAL_PROJECTIVE})


@dataclass(frozen=True)
class ManifoldDescriptor:
    family: Family
    d: int
    jacobi: JacobiParams
    epsilon: int
    geometry_enabled: bool

    @property
    def alpha(self) -> float:
        return self.jacobi.alpha

    @property
    def beta(self) -> float:
        return self.jacobi.beta

    @property
    def dimension(self) -> int:
        """Intrinsic (Riemannian) dimension, ``d - 1``."""
        return self.d - 1

    @property
    def coord_width(self) -> int:
        """Number of coordinates used to store one point."""
        self._need_geometry()
        return 1 if self.family is Family.CIRCLE else self.d

    @property
    def is_sphere(self) -> bool:
        return self.family is Family.SPHERE

    @property
    def is_circle(self) -> bool:
        return self.family is Family.CIRCLE

    def _need_geometry(self):
        if not self.geometry_enabled:
            raise NotImplementedError(
                f"{self.family.value} has no point geometry; supply t = cos(d/epsilon) "
                "to zonal_eval instead"
            )

    def to_dict(self) -> dict:
        return {"family": self.family.value, "d": self.d}

    def __str__(self):
        return f"{self.family.value}(d={self.d})"


@dataclass(frozen=True)
class ProductManifold:
    factors: tuple

    def __post_init__(self):
        if len(self.factors) != 2:
            raise ValueError("products of exactly two factors are supported")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def coord_width(self) -> int:
        return sum(f.coord_width for f in self.factors)

    @property
    def geometry_enabled(self) -> bool:
        return all(f.geometry_enabled for f in self.factors)

    def split(self, X) -> tuple:
        """Split stacked product coordinates into the two factor blocks."""
        X = np.asarray(X, dtype=float)
        w0 = self.factors[0].coord_width
        return X[:, :w0], X[:, w0:]

    def to_dict(self) -> dict:
        return {"factors": [f.to_dict() for f in self.factors]}

    def __str__(self):
        return " x ".join(str(f) for f in self.factors)


def make_manifold(family, d: int) -> ManifoldDescriptor:
    """Build the descriptor for ``family`` in superscript convention ``d``."""
    family = Family.parse(family)
    d = int(d)
    if family is Family.CIRCLE:
        if d != 2:
            raise ValueError("the circle is S^1, i.e. d = 2")
        return ManifoldDescriptor(family, 2, JacobiParams(-0.5, -0.5), 1, True)
    if d < 3:
        raise ValueError(f"{family.value} needs d >= 3, got {d}")
    if family is Family.COMPLEX_PROJECTIVE and (d - 1) % 2:
        raise ValueError("complex projective spaces have even real dimension d - 1")
    if family is Family.QUATERNIONIC and ((d - 1) % 4 or d - 1 < 8):
        raise ValueError("quaternionic projective spaces need d - 1 divisible by 4 and >= 8")
    if family is Family.CAYLEY and d != 17:
        raise ValueError("the Cayley plane has d = 17")
    if family is Family.COMPLEX_PROJECTIVE and d < 5:
        raise ValueError("complex projective spaces need d >= 5 (CP^1 is the 2-sphere)")
    alpha = (d - 3) / 2
    beta = alpha if family is Family.SPHERE else _BETA[family]
    eps = 2 if family is Family.REAL_PROJECTIVE else 1
    return ManifoldDescriptor(family, d, JacobiParams(alpha, beta), eps, family in GEOMETRIC_FAMILIES)


def eigenvalue(m: ManifoldDescriptor, k: int) -> float:
    """Laplace-Beltrami eigenvalue of level ``k``."""
    if k < 0:
        raise ValueError("level must be nonnegative")
    if m.family is Family.CIRCLE:
        return float(k * k)
    if m.family is Family.SPHERE:
        return float(k * (k + m.d - 2))
    if m.family is Family.REAL_PROJECTIVE:
        return float(2 * k * (2 * k + m.d - 2))
    raise NotImplementedError(f"spectrum not implemented for {m.family.value}")


def eigenvalues(m: ManifoldDescriptor, n: int) -> np.ndarray:
    return np.array([eigenvalue(m, k) for k in range(n)])


def multiplicity(m: ManifoldDescriptor, k: int) -> int:
    """Eigenspace dimension ``m_k = c_k P_k(1)``, computed exactly."""
    if k < 0:
        raise ValueError("level must be nonnegative")
    val = exact_level_dimension(m.jacobi, k)
    if val.denominator != 1:
        raise ArithmeticError(
            f"c_k P_k(1) = {val} is not an integer for {m} at k={k}"
        )
    return int(val)


def multiplicities(m: ManifoldDescriptor, n: int) -> np.ndarray:
    return np.array([multiplicity(m, k) for k in range(n)], dtype=float)


def level_of_index(m: ManifoldDescriptor, ell: int) -> int:
    """Level ``k`` of flattened basis index ``ell`` (levels listed in order)."""
    k, start = 0, 0
    while True:
        mk = multiplicity(m, k)
        if ell < start + mk:
            return k
        start += mk
        k += 1


# -- geometry -----------------------------------------------------------------


def as_points(m, X) -> np.ndarray:
    """Validate a point array, returning shape ``(n, coord_width)``."""
    width = m.coord_width
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if width == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != width:
        raise ValueError(f"expected points with {width} coordinates for {m}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    blocks = m.split(X) if isinstance(m, ProductManifold) else (X,)
    factors = m.factors if isinstance(m, ProductManifold) else (m,)
    for f, B in zip(factors, blocks):
        if not f.is_circle:
            norms = np.linalg.norm(B, axis=1)
            if np.any(np.abs(norms - 1) > 1e-12):
                raise ValueError(f"points on {f} must have unit norm within 1e-12")
    return X


def cosine_matrix(m: ManifoldDescriptor, X, Y=None) -> np.ndarray:
    """Pairwise ``cos(d(x, y) / epsilon)``, the argument of the addition formula."""
    m._need_geometry()
    X = as_points(m, X)
    Y = X if Y is None else as_points(m, Y)
    if m.is_circle:
        return np.cos(X[:, 0][:, None] - Y[:, 0][None, :])
    G = X @ Y.T
    if m.family is Family.REAL_PROJECTIVE:
        G = np.abs(G)
    return np.clip(G, -1.0, 1.0)


def distance_matrix(m: ManifoldDescriptor, X, Y=None) -> np.ndarray:
    m._need_geometry()
    X = as_points(m, X)
    Y = X if Y is None else as_points(m, Y)
    if m.is_circle:
        diff = np.abs(X[:, 0][:, None] - Y[:, 0][None, :]) % (2 * math.pi)
        return np.minimum(diff, 2 * math.pi - diff)
    # chord form keeps small distances accurate where arccos would not
    half = _chord(X, Y) / 2
    if m.family is Family.REAL_PROJECTIVE:
        half = np.minimum(half, _chord(X, -Y) / 2)
        return 4 * np.arcsin(np.minimum(half, 1.0))
    return 2 * np.arcsin(np.minimum(half, 1.0))


def _chord(X, Y) -> np.ndarray:
    return np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=2)


def geodesic_distance(m: ManifoldDescriptor, p, q) -> float:
    """Geodesic distance in ``[0, pi]``.

    Real projective spaces use ``2 arccos |<p, q>|`` so that
    ``cos(d / 2) = |<p, q>|``.
    """
    P = np.asarray(p, dtype=float).reshape(1, -1)
    Q = np.asarray(q, dtype=float).reshape(1, -1)
    return float(distance_matrix(m, P, Q)[0, 0])


def product_distance_matrix(pm: ProductManifold, X, Y=None) -> np.ndarray:
    X = as_points(pm, X)
    Y = X if Y is None else as_points(pm, Y)
    (X0, X1), (Y0, Y1) = pm.split(X), pm.split(Y)
    d0 = distance_matrix(pm.factors[0], X0, Y0)
    d1 = distance_matrix(pm.factors[1], X1, Y1)
    return np.sqrt(d0**2 + d1**2)


def min_separation(m, X) -> float:
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        return math.inf
    D = product_distance_matrix(m, X) if isinstance(m, ProductManifold) else distance_matrix(m, X)
    iu = np.triu_indices(X.shape[0], 1)
    return float(D[iu].min())


class Strategy(str, enum.Enum):
    UNIFORM = "uniform"
    EQUISPACED = "equispaced"
    FIBONACCI = "fibonacci"
    ANTIPODAL = "antipodal"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, Strategy):
            return value
        key = str(value).strip().lower()
        aliases = {"uniformrandom": "uniform", "random": "uniform", "antipodalpairs": "antipodal"}
        return cls(aliases.get(key, key))


def _uniform(m: ManifoldDescriptor, n: int, rng) -> np.ndarray:
    if m.is_circle:
        return rng.uniform(0, 2 * math.pi, size=(n, 1))
    Z = rng.standard_normal((n, m.d))
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def _draw(m: ManifoldDescriptor, n: int, strategy: Strategy, rng) -> np.ndarray:
    if strategy is Strategy.UNIFORM:
        return _uniform(m, n, rng)
    if strategy is Strategy.EQUISPACED:
        if not m.is_circle:
            raise ValueError("equispaced sampling is defined on the circle only")
        return (2 * math.pi * np.arange(n) / n).reshape(-1, 1)
    if strategy is Strategy.FIBONACCI:
        if not (m.is_sphere and m.d == 3):
            raise ValueError("Fibonacci sampling is defined on S^2 only")
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        r = np.sqrt(np.maximum(0.0, 1 - z * z))
        phi = math.pi * (3 - math.sqrt(5)) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    if strategy is Strategy.ANTIPODAL:
        if n % 2:
            raise ValueError("antipodal sampling needs an even count")
        if m.is_circle:
            half = rng.uniform(0, math.pi, size=(n // 2, 1))
            return np.vstack([half, half + math.pi])
        if not m.is_sphere:
            raise ValueError("antipodal pairs are identified on projective spaces")
        half = _uniform(m, n // 2, rng)
        return np.vstack([half, -half])
    raise ValueError(f"unknown strategy {strategy}")


def sample_points(m, n: int, strategy="uniform", seed: int = 0) -> np.ndarray:
    """Draw ``n`` pairwise-distinct points, deterministically for a given seed."""
    if n < 1:
        raise ValueError("need at least one point")
    strategy = Strategy.parse(strategy)
    rng = np.random.default_rng(seed)
    for _ in range(_MAX_RETRIES):
        if isinstance(m, ProductManifold):
            X = np.hstack([_draw(f, n, strategy, rng) for f in m.factors])
        else:
            m._need_geometry()
            X = _draw(m, n, strategy, rng)
        if min_separation(m, X) > MIN_SEPARATION:
            return X
        if strategy in (Strategy.EQUISPACED, Strategy.FIBONACCI):
            break
    raise RuntimeError(f"could not draw {n} distinct points on {m} with strategy {strategy.value}")


# -- point CSV ----------------------------------------------------------------


def manifold_header(m) -> list:
    if isinstance(m, ProductManifold):
        return ["product"] + [f"{f.family.value}:{f.d}" for f in m.factors]
    return ["manifold", m.family.value, str(m.d)]


def parse_manifold_header(row) -> ManifoldDescriptor | ProductManifold:
    if not row:
        raise ValueError("empty point-file header")
    tag = row[0].strip().lower()
    if tag == "manifold" and len(row) == 3:
        return make_manifold(row[1], int(row[2]))
    if tag == "product":
        factors = []
        for item in row[1:]:
            fam, d = item.split(":")
            factors.append(make_manifold(fam, int(d)))
        return ProductManifold(tuple(factors))
    raise ValueError(f"bad point-file header {row!r}; expected 'manifold,family,d'")


def write_points_csv(m, X, fh=None) -> str:
    X = as_points(m, X)
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(manifold_header(m))
    for row in X:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue() if fh is None else ""


def read_points_csv(text_or_fh):
    fh = io.StringIO(text_or_fh) if isinstance(text_or_fh, str) else text_or_fh
    rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    m = parse_manifold_header(rows[0])
    X = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    return m, as_points(m, X.reshape(len(rows) - 1, -1))


def dimension_oracle(m: ManifoldDescriptor, k: int) -> int:
    """Classical harmonic-space dimensions, independent of the Jacobi route."""
    if m.family is Family.CIRCLE:
        return 1 if k == 0 else 2
    if m.family is Family.SPHERE:
        return _sphere_dim(m.d, k)
    if m.family is Family.REAL_PROJECTIVE:
        return _sphere_dim(m.d, 2 * k)
    raise NotImplementedError(f"no dimension oracle for {m.family.value}")


def _sphere_dim(d: int, k: int) -> int:
    # degree-k harmonics on S^{d-1}: (2k+d-2)(k+d-3)! / (k!(d-2)!)
    return int(Fraction((2 * k + d - 2) * math.factorial(k + d - 3), math.factorial(k) * math.factorial(d - 2)))
