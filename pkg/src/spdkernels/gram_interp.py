"""Gram matrices, spectral verification, interpolation and degeneracy witnesses."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .kernels import (
    ConvolutionalScheme,
    ProductZonalScheme,
    ZonalScheme,
    kernel_matrix,
    level_dimensions,
    level_functions,
)
from .manifold import (
    MIN_SEPARATION,
    ManifoldDescriptor,
    ProductManifold,
    as_points,
    cosine_matrix,
    min_separation,
    sample_points,
)
from .pd_checker import (
    DEFAULT_TOL_PSD,
    DEFAULT_TOL_STRICT,
    quadratic_form,
    spd_product_corollary,
    spd_zonal,
)
from .spectral_sets import ProductSpectralSet, SpectralSet, Verdict


# -- Gram matrices ---------------------------------------------------------------


@dataclass
class GramMatrix:
    entries: np.ndarray
    scheme: object
    points: np.ndarray
    truncation: object
    tail_bound: float


def assemble_gram(s, X, truncation=None) -> GramMatrix:
    """``K(x_i, x_j)`` over a point set, Hermitian by construction."""
    m = s.manifold
    X = as_points(m, X)
    sep = min_separation(m, X)
    if sep <= MIN_SEPARATION:
        raise ValueError(f"points coincide (min separation {sep:.3g} <= {MIN_SEPARATION})")
    ev = kernel_matrix(s, X, None, truncation)
    K = np.asarray(ev.value)
    upper = np.triu(K, 1)
    diag = np.real(np.diag(K))
    K = upper + upper.conj().T + np.diag(diag)
    if not np.iscomplexobj(ev.value):
        K = K.real
    return GramMatrix(K, s, X, truncation, ev.tail_bound)


class Classification(str, enum.Enum):
    STRICTLY_PD = "StrictlyPD"
    SEMIDEFINITE_SINGULAR = "SemidefiniteSingular"
    NOT_PD = "NotPD"


@dataclass
class SpectrumReport:
    min_eigenvalue: float
    max_diagonal: float
    classification: Classification
    tol_psd: float = DEFAULT_TOL_PSD
    tol_strict: float = DEFAULT_TOL_STRICT

    @property
    def strictly_pd(self) -> bool:
        return self.classification is Classification.STRICTLY_PD

    def to_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "max_diagonal": self.max_diagonal,
            "classification": self.classification.value,
            "tol_psd": self.tol_psd,
            "tol_strict": self.tol_strict,
        }


def classify(min_eig: float, max_diag: float, tol_psd=DEFAULT_TOL_PSD, tol_strict=DEFAULT_TOL_STRICT) -> Classification:
    if min_eig < -tol_psd * max_diag:
        return Classification.NOT_PD
    if min_eig > tol_strict * max_diag:
        return Classification.STRICTLY_PD
    return Classification.SEMIDEFINITE_SINGULAR


def verify_pd(G, tol_psd: float = DEFAULT_TOL_PSD, tol_strict: float = DEFAULT_TOL_STRICT) -> SpectrumReport:
    """Classify a Hermitian matrix by its smallest eigenvalue relative to its largest diagonal."""
    K = G.entries if isinstance(G, GramMatrix) else np.asarray(G)
    if not np.all(np.isfinite(K)):
        raise ValueError("Gram matrix has nonfinite entries")
    if K.size == 0:
        raise ValueError("empty Gram matrix")
    ev = linalg.eigvalsh(K)
    lo = float(ev[0])
    scale = float(np.max(np.abs(np.diag(K))))
    return SpectrumReport(lo, scale, classify(lo, scale, tol_psd, tol_strict), tol_psd, tol_strict)


def random_psd_trial(s, n: int, seed: int, strategy="uniform", truncation=None,
                     tol_psd=DEFAULT_TOL_PSD, tol_strict=DEFAULT_TOL_STRICT) -> SpectrumReport:
    """Sample ``n`` points with a seeded generator, assemble and classify."""
    X = sample_points(s.manifold, n, strategy, seed)
    return verify_pd(assemble_gram(s, X, truncation), tol_psd, tol_strict)


# -- interpolation ---------------------------------------------------------------


class SingularSystemError(np.linalg.LinAlgError):
    """Interpolation system is singular; ``report`` holds the spectrum."""

    def __init__(self, report: SpectrumReport):
        super().__init__(
            f"Gram matrix is {report.classification.value} (min eigenvalue {report.min_eigenvalue:.3e}); "
            "use a strictly positive definite kernel or regularization > 0"
        )
        self.report = report


@dataclass
class Interpolant:
    points: np.ndarray
    coefficients: np.ndarray
    scheme: object
    regularization: float = 0.0
    truncation: object = None
    report: SpectrumReport | None = field(default=None, repr=False)

    def __call__(self, Z):
        return evaluate(self, Z)


def _solve(K: np.ndarray, f: np.ndarray, lam: float) -> np.ndarray:
    A = K + lam * np.eye(K.shape[0])
    return linalg.solve(A, f, assume_a="her")


def fit(s, X, f, regularization: float = 0.0, truncation=None,
        tol_psd=DEFAULT_TOL_PSD, tol_strict=DEFAULT_TOL_STRICT) -> Interpolant:
    """Solve ``(K_X + lambda I) c = f``."""
    if regularization < 0:
        raise ValueError("regularization must be nonnegative")
    G = assemble_gram(s, X, truncation)
    f = np.asarray(f)
    if f.shape[0] != G.entries.shape[0]:
        raise ValueError(f"{f.shape[0]} values for {G.entries.shape[0]} points")
    rep = verify_pd(G, tol_psd, tol_strict)
    if regularization == 0 and not rep.strictly_pd:
        raise SingularSystemError(rep)
    c = _solve(G.entries, f, regularization)
    return Interpolant(G.points, c, s, regularization, truncation, rep)


def evaluate(interp: Interpolant, Z) -> np.ndarray:
    """``s_f(z) = sum_x c_x K(z, x)``."""
    m = interp.scheme.manifold
    Z = as_points(m, Z)
    K = kernel_matrix(interp.scheme, Z, interp.points, interp.truncation).value
    return K @ interp.coefficients


class KernelInterpolator(RegressorMixin, BaseEstimator):
    """Kernel interpolation on a manifold with an estimator interface.

    Parameters
    ----------
    scheme : kernel scheme
        Any scheme from :mod:`spdkernels.kernels`.
    regularization : float, default=0.0
        Ridge term added to the Gram diagonal; ``0`` gives exact interpolation.
    truncation : int or tuple, optional
        Series truncation; defaults to the scheme's own choice.
    tol_psd, tol_strict : float
        Spectrum classification thresholds relative to the largest diagonal.

    Attributes
    ----------
    points_ : ndarray
        Data sites seen during ``fit``.
    dual_coef_ : ndarray
        Interpolation coefficients ``c``.
    spectrum_ : SpectrumReport
        Classification of the training Gram matrix.
    """

    def __init__(self, scheme=None, regularization=0.0, truncation=None,
                 tol_psd=DEFAULT_TOL_PSD, tol_strict=DEFAULT_TOL_STRICT):
        self.scheme = scheme
        self.regularization = regularization
        self.truncation = truncation
        self.tol_psd = tol_psd
        self.tol_strict = tol_strict

    def _validate_points(self, X):
        if self.scheme is None:
            raise ValueError("KernelInterpolator needs a kernel scheme")
        return as_points(self.scheme.manifold, np.asarray(X, dtype=float))

    def fit(self, X, y):
        X = self._validate_points(X)
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValueError(f"y must be 1-d with {X.shape[0]} entries, got shape {y.shape}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y has nonfinite values")
        interp = fit(self.scheme, X, y, self.regularization, self.truncation, self.tol_psd, self.tol_strict)
        self.points_ = interp.points
        self.dual_coef_ = interp.coefficients
        self.spectrum_ = interp.report
        self.n_features_in_ = X.shape[1]
        self._interp = interp
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        out = evaluate(self._interp, self._validate_points(X))
        if np.iscomplexobj(out) and np.all(np.abs(out.imag) <= 1e-12 * (1 + np.abs(out.real))):
            out = out.real
        return out


# -- degeneracy witnesses ----------------------------------------------------------


@dataclass
class DegeneracyWitness:
    """Points and coefficients whose quadratic form vanishes for every kernel with the given support."""

    points: np.ndarray
    coefficients: np.ndarray
    plan: list

    def residual(self, s, truncation=None) -> tuple:
        """``(quadratic form, scale)`` with ``scale = max|K(x,x)| * sum |c|^2``."""
        q = quadratic_form(s, self.points, self.coefficients, truncation)
        K = kernel_matrix(s, self.points, None, truncation).value
        scale = float(np.max(np.abs(np.diag(K)))) * float(np.sum(np.abs(self.coefficients) ** 2))
        return q, scale


def _antipode(m: ManifoldDescriptor, P: np.ndarray) -> np.ndarray:
    if m.is_circle:
        return (P + math.pi) % (2 * math.pi)
    if m.is_sphere:
        return -P
    raise ValueError(f"antipodal construction needs a circle or sphere, not {m}")


def low_level_annihilator(m: ManifoldDescriptor, levels, rng) -> tuple:
    """Points and a unit vector annihilating every level in a finite set.

    Uses ``D + 1`` random points, ``D`` the total dimension of the levels,
    and the null vector of the Gram matrix of ``sum_k Z_k``.
    """
    levels = sorted(set(int(k) for k in levels))
    if not levels:
        return sample_points(m, 1, "uniform", int(rng.integers(2**31))), np.ones(1, dtype=complex)
    dims = level_dimensions(m, levels[-1] + 1)
    D = int(sum(dims[k] for k in levels))
    P = sample_points(m, D + 1, "uniform", int(rng.integers(2**31)))
    T = cosine_matrix(m, P)
    Z = level_functions(m, levels[-1] + 1, T)
    G = sum(Z[k] for k in levels)
    _, vecs = linalg.eigh(G)
    return P, vecs[:, 0].astype(complex)


def _levels_points(m: ManifoldDescriptor, plan: dict, rng) -> tuple:
    parity = plan.get("parity")
    levels = plan.get("levels", [])
    if parity is None:
        return low_level_annihilator(m, levels, rng)
    p = 0 if parity == "even" else 1
    others = [k for k in levels if k % 2 != p]
    P, v = low_level_annihilator(m, others, rng)
    sign = -1.0 if p == 0 else 1.0
    return np.vstack([P, _antipode(m, P)]), np.concatenate([v, sign * v])


def _ap_points(plan: dict) -> tuple:
    r, d = int(plan["residue"]), int(plan["modulus"])
    j = np.arange(d)
    theta = (2 * math.pi * j / d).reshape(-1, 1)
    return theta, np.exp(-2j * math.pi * r * j / d)


def _coset_points(plan: dict) -> tuple:
    a, b, d = (int(v) for v in plan["subgroup"])
    x, y = (int(v) for v in plan["translation"])
    pts, coef = [], []
    for j in range(d):
        phi = 2 * math.pi * j / d
        for i in range(a):
            theta = (2 * math.pi * i - b * phi) / a
            pts.append([theta % (2 * math.pi), phi])
            coef.append(np.exp(-1j * (x * theta + y * phi)))
    return np.array(pts), np.array(coef)


def _factor_points(m: ManifoldDescriptor, plan: dict, rng) -> tuple:
    kind = plan["type"]
    if not m.geometry_enabled:
        raise NotImplementedError(f"{m} has no point geometry")
    if kind == "none":
        return sample_points(m, 1, "uniform", int(rng.integers(2**31))), np.ones(1, dtype=complex)
    if kind == "levels":
        return _levels_points(m, plan, rng)
    if kind == "ap":
        if not m.is_circle:
            raise ValueError("roots-of-unity construction lives on the circle")
        return _ap_points(plan)
    raise ValueError(f"unknown plan type {kind!r}")


def witness_from_plan(manifold, plan: list, seed: int = 0) -> DegeneracyWitness | None:
    """Execute an annihilation plan; ``None`` when a factor has no point geometry."""
    rng = np.random.default_rng(seed)
    try:
        if len(plan) == 1 and plan[0]["type"] == "coset":
            if not (isinstance(manifold, ProductManifold) and all(f.is_circle for f in manifold.factors)):
                raise ValueError("coset construction lives on the torus")
            X, c = _coset_points(plan[0])
            return DegeneracyWitness(X, c, plan)
        if isinstance(manifold, ProductManifold):
            (P, a), (Q, b) = (_factor_points(f, p, rng) for f, p in zip(manifold.factors, plan))
            X = np.hstack([np.repeat(P, len(Q), axis=0), np.tile(Q, (len(P), 1))])
            c = np.kron(a, b)
            return DegeneracyWitness(X, c, plan)
        X, c = _factor_points(manifold, plan[0], rng)
        return DegeneracyWitness(X, c, plan)
    except NotImplementedError:
        return None


def degeneracy_witness(manifold, target, seed: int = 0) -> DegeneracyWitness | None:
    """Explicit null vector for kernels whose support fails a necessary condition.

    ``target`` is a support set (``SpectralSet`` for a single manifold,
    ``ProductSpectralSet`` for a product), a disproven :class:`Verdict`, or
    its witness dict.  Returns ``None`` when the support passes (no witness
    exists) or the manifold has no point geometry.
    """
    if isinstance(target, SpectralSet):
        target = spd_zonal(manifold, target)
    elif isinstance(target, ProductSpectralSet):
        f1, f2 = manifold.factors
        target = spd_product_corollary(f1, f2, target, target)
    if isinstance(target, Verdict):
        if not target.disproven:
            return None
        target = target.witness
    if not target or "plan" not in target:
        return None
    return witness_from_plan(manifold, target["plan"], seed)


def scheme_witness(s, seed: int = 0) -> DegeneracyWitness | None:
    """Witness built from the support of a scheme's nonzero coefficients."""
    if isinstance(s, ConvolutionalScheme):
        return degeneracy_witness(s.manifold, s.U(), seed)
    if isinstance(s, (ZonalScheme, ProductZonalScheme)):
        return degeneracy_witness(s.manifold, s.nonzero_support(), seed)
    raise TypeError(f"no support-based witness for {type(s).__name__}")
