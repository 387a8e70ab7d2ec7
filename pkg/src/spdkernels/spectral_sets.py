"""Exact algebra of index sets built from finite parts and arithmetic progressions.

A :class:`SpectralSet` is ``finite ∪ (a_1 + b_1 N) ∪ ... ∪ (a_r + b_r N)``;
a :class:`ProductSpectralSet` is a finite set of pairs plus boxes ``A x B``
of progressions.  Every decision procedure here is exact for this class,
except the subgroup-translation condition on ``Z^2``, which is decided up
to a subgroup-size bound and reported as ``unknown`` beyond it.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from functools import reduce

EVEN, ODD = 0, 1
_PARITY_NAMES = {EVEN: "even", ODD: "odd"}


def parse_parity(parity):
    """Map ``'even'|'odd'|'any'|0|1|None`` to ``0``, ``1`` or ``None``."""
    if parity is None or parity == "any":
        return None
    if parity in (EVEN, "even"):
        return EVEN
    if parity in (ODD, "odd"):
        return ODD
    raise ValueError(f"unknown parity {parity!r}")


def _lcm(values) -> int:
    return reduce(lambda x, y: x * y // math.gcd(x, y), values, 1)


# -- verdicts -------------------------------------------------------------------


class Status(str, enum.Enum):
    PROVEN = "proven"
    DISPROVEN = "disproven"
    UNKNOWN = "unknown"


@dataclass
class Verdict:
    """Three-valued outcome of a criterion, with machine-checkable evidence."""

    status: Status
    criterion: str
    witness: dict | None = None
    parameters: dict = field(default_factory=dict)
    sub_verdicts: list = field(default_factory=list)

    @property
    def proven(self) -> bool:
        return self.status is Status.PROVEN

    @property
    def disproven(self) -> bool:
        return self.status is Status.DISPROVEN

    @property
    def unknown(self) -> bool:
        return self.status is Status.UNKNOWN

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "status": self.status.value,
            "witness": self.witness,
            "parameters": self.parameters,
            "sub_verdicts": [v.to_dict() for v in self.sub_verdicts],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Verdict":
        return cls(
            Status(data["status"]),
            data["criterion"],
            data.get("witness"),
            dict(data.get("parameters") or {}),
            [cls.from_dict(v) for v in data.get("sub_verdicts") or []],
        )


# -- progressions ---------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Progression:
    """``{start + step * n : n >= 0}``."""

    start: int
    step: int

    def __post_init__(self):
        if self.start < 0 or self.step < 1:
            raise ValueError(f"need start >= 0 and step >= 1, got {self.start}+{self.step}n")

    def __contains__(self, k) -> bool:
        return k >= self.start and (k - self.start) % self.step == 0

    def includes(self, other: "Progression") -> bool:
        """Whether ``other`` is a subset of this progression."""
        return (
            other.step % self.step == 0
            and other.start >= self.start
            and (other.start - self.start) % self.step == 0
        )

    def lift(self, gamma: int) -> "Progression":
        """Intersection with ``{k >= gamma}``."""
        if self.start >= gamma:
            return self
        n = -(-(gamma - self.start) // self.step)
        return Progression(self.start + n * self.step, self.step)

    def parity_part(self, parity) -> "Progression | None":
        """Intersection with a parity class; ``None`` when empty."""
        if self.step % 2:
            first = self.start if self.start % 2 == parity else self.start + self.step
            return Progression(first, 2 * self.step)
        return self if self.start % 2 == parity else None

    def has_parity(self, parity) -> bool:
        return self.parity_part(parity) is not None

    def meets_ap(self, c: int, d: int, sign: int = 1) -> bool:
        """Whether ``sign * self`` meets the full progression ``c + dZ``."""
        return (c - sign * self.start) % math.gcd(self.step, d) == 0

    def __str__(self):
        return f"{self.start}+{self.step}n"


# -- one-dimensional sets -------------------------------------------------------


def _canonical_progressions(progs) -> tuple:
    progs = sorted(set(progs))
    keep = []
    for i, p in enumerate(progs):
        covered = any(q.includes(p) and (q != p) for j, q in enumerate(progs) if j != i)
        if not covered:
            keep.append(p)
    return tuple(keep)


@dataclass(frozen=True)
class SpectralSet:
    finite: tuple = ()
    progressions: tuple = ()

    def __post_init__(self):
        progs = _canonical_progressions(
            p if isinstance(p, Progression) else Progression(*p) for p in self.progressions
        )
        fin = sorted({int(k) for k in self.finite if not any(int(k) in p for p in progs)})
        if any(k < 0 for k in fin):
            raise ValueError("spectral sets live in the nonnegative integers")
        object.__setattr__(self, "progressions", progs)
        object.__setattr__(self, "finite", tuple(fin))

    @classmethod
    def empty(cls) -> "SpectralSet":
        return cls()

    @classmethod
    def naturals(cls) -> "SpectralSet":
        return cls((), (Progression(0, 1),))

    @classmethod
    def of(cls, finite=(), progressions=()) -> "SpectralSet":
        return cls(tuple(finite), tuple(progressions))

    def __contains__(self, k) -> bool:
        return k in self.finite or any(k in p for p in self.progressions)

    @property
    def is_empty(self) -> bool:
        return not self.finite and not self.progressions

    @property
    def is_infinite(self) -> bool:
        return bool(self.progressions)

    @property
    def modulus(self) -> int:
        return _lcm(p.step for p in self.progressions)

    def union(self, other: "SpectralSet") -> "SpectralSet":
        return SpectralSet(self.finite + other.finite, self.progressions + other.progressions)

    def elements_below(self, n: int) -> list:
        return [k for k in range(n) if k in self]

    def __str__(self):
        return format_set(self)


def contains(S: SpectralSet, k: int) -> bool:
    return k in S


def parity_census(S: SpectralSet) -> dict:
    """Which parity classes ``S`` meets infinitely often."""
    return {
        "even_infinite": any(p.has_parity(EVEN) for p in S.progressions),
        "odd_infinite": any(p.has_parity(ODD) for p in S.progressions),
    }


def restrict_min(S: SpectralSet, gamma: int) -> SpectralSet:
    """``S ∩ {k >= gamma}``."""
    return SpectralSet(
        tuple(k for k in S.finite if k >= gamma), tuple(p.lift(gamma) for p in S.progressions)
    )


def parity_filter(S: SpectralSet, parity) -> SpectralSet:
    parity = parse_parity(parity)
    if parity is None:
        return S
    progs = [q for q in (p.parity_part(parity) for p in S.progressions) if q is not None]
    return SpectralSet(tuple(k for k in S.finite if k % 2 == parity), tuple(progs))


def _refine_witness(r: int, L: int, finite_elements) -> tuple:
    """An AP inside ``r + LZ`` avoiding the given finite elements."""
    hits = [(x - r) // L for x in finite_elements if (x - r) % L == 0]
    if not hits:
        return r % L, L
    X = max(abs(s) for s in hits)
    M = 2 * X + 3
    return r + L * (X + 1), L * M


def _covering_verdict(classes, finite_elements, criterion, extra=None) -> Verdict:
    """Decide whether residue classes ``(a, b)`` cover ``Z``; witness otherwise."""
    L = _lcm(b for _, b in classes)
    params = {"modulus": L}
    if extra:
        params.update(extra)
    for r in range(L):
        if not any((r - a) % b == 0 for a, b in classes):
            c, d = _refine_witness(r, L, finite_elements)
            return Verdict(
                Status.DISPROVEN,
                criterion,
                {"kind": "uncovered_ap", "residue": c, "modulus": d},
                params,
            )
    return Verdict(Status.PROVEN, criterion, None, params)


def intersects_every_full_ap(S: SpectralSet) -> Verdict:
    """Decide whether ``S`` meets every ``c + dZ``.

    A finite part cannot help: ``S`` qualifies exactly when the residue
    classes of its progressions form a covering system.
    """
    classes = [(p.start, p.step) for p in S.progressions]
    return _covering_verdict(classes, S.finite, "intersects_every_full_ap")


def ap_misses_set(S: SpectralSet, c: int, d: int) -> bool:
    """Exact check that ``c + dZ`` is disjoint from ``S``."""
    if any((x - c) % d == 0 for x in S.finite):
        return False
    return not any(p.meets_ap(c, d) for p in S.progressions)


# -- symmetric subsets of Z -----------------------------------------------------


@dataclass(frozen=True)
class SymmetricSet:
    """``T = base ∪ (-base)`` inside ``Z``.

    ``threshold`` is the smallest ``gamma`` beyond which contributions
    coming from finite pairs have vanished.
    """

    base: SpectralSet
    threshold: int = 0

    def __contains__(self, k) -> bool:
        return abs(k) in self.base


def z_set_intersects_every_full_ap(T: SymmetricSet) -> Verdict:
    classes = []
    for p in T.base.progressions:
        classes.append((p.start % p.step, p.step))
        classes.append(((-p.start) % p.step, p.step))
    finite = sorted({x for k in T.base.finite for x in (k, -k)})
    return _covering_verdict(classes, finite, "z_set_intersects_every_full_ap")


def ap_misses_zset(T: SymmetricSet, c: int, d: int) -> bool:
    if any((x - c) % d == 0 for k in T.base.finite for x in (k, -k)):
        return False
    return not any(p.meets_ap(c, d, s) for p in T.base.progressions for s in (1, -1))


# -- product sets -------------------------------------------------------------------


def _as_prog(p) -> Progression:
    return p if isinstance(p, Progression) else Progression(*p)


@dataclass(frozen=True)
class ProductSpectralSet:
    finite: tuple = ()
    boxes: tuple = ()

    def __post_init__(self):
        boxes = sorted({(_as_prog(A), _as_prog(B)) for A, B in self.boxes})
        keep = [
            (A, B)
            for i, (A, B) in enumerate(boxes)
            if not any(j != i and A2.includes(A) and B2.includes(B) for j, (A2, B2) in enumerate(boxes))
        ]
        fin = sorted(
            {(int(k), int(l)) for k, l in self.finite if not any(k in A and l in B for A, B in keep)}
        )
        if any(k < 0 or l < 0 for k, l in fin):
            raise ValueError("product spectral sets live in N x N")
        object.__setattr__(self, "boxes", tuple(keep))
        object.__setattr__(self, "finite", tuple(fin))

    @classmethod
    def empty(cls) -> "ProductSpectralSet":
        return cls()

    @classmethod
    def naturals(cls) -> "ProductSpectralSet":
        return cls((), ((Progression(0, 1), Progression(0, 1)),))

    def __contains__(self, pair) -> bool:
        k, l = pair
        return (k, l) in self.finite or any(k in A and l in B for A, B in self.boxes)

    @property
    def is_empty(self) -> bool:
        return not self.finite and not self.boxes

    def union(self, other: "ProductSpectralSet") -> "ProductSpectralSet":
        return ProductSpectralSet(self.finite + other.finite, self.boxes + other.boxes)

    def transpose(self) -> "ProductSpectralSet":
        return ProductSpectralSet(
            tuple((l, k) for k, l in self.finite), tuple((B, A) for A, B in self.boxes)
        )

    def parity_class(self, i, j) -> "ProductSpectralSet":
        """Intersection with ``(parity i) x (parity j)``."""
        boxes = []
        for A, B in self.boxes:
            A2, B2 = A.parity_part(i), B.parity_part(j)
            if A2 is not None and B2 is not None:
                boxes.append((A2, B2))
        fin = tuple((k, l) for k, l in self.finite if k % 2 == i and l % 2 == j)
        return ProductSpectralSet(fin, tuple(boxes))

    def lift(self, gamma1: int, gamma2: int) -> "ProductSpectralSet":
        """Intersection with ``{k >= gamma1} x {l >= gamma2}``."""
        fin = tuple((k, l) for k, l in self.finite if k >= gamma1 and l >= gamma2)
        return ProductSpectralSet(fin, tuple((A.lift(gamma1), B.lift(gamma2)) for A, B in self.boxes))

    def max_finite(self) -> tuple:
        if not self.finite:
            return (-1, -1)
        return (max(k for k, _ in self.finite), max(l for _, l in self.finite))

    def __str__(self):
        return format_product_set(self)


def slice_at(J: ProductSpectralSet, k: int) -> SpectralSet:
    """``J_k = {l : (k, l) in J}``."""
    return SpectralSet(
        tuple(l for kk, l in J.finite if kk == k), tuple(B for A, B in J.boxes if k in A)
    )


def symmetrized_index_set(J: ProductSpectralSet, gamma: int, parity=None) -> SymmetricSet:
    """``{k in Z : J_|k| ∩ N_{>=gamma} ∩ parity != {}}`` as a symmetric set.

    Box-backed contributions do not depend on ``gamma``; finite pairs stop
    contributing once ``gamma`` exceeds their second coordinate, and the
    returned ``threshold`` records where that happens.
    """
    parity = parse_parity(parity)
    progs = []
    for A, B in J.boxes:
        part = B if parity is None else B.parity_part(parity)
        if part is not None:
            progs.append(A)
    fin = [
        k for k, l in J.finite if l >= gamma and (parity is None or l % 2 == parity)
    ]
    threshold = 1 + max((l for _, l in J.finite), default=-1)
    return SymmetricSet(SpectralSet(tuple(fin), tuple(progs)), max(threshold, 0))


# -- subgroup translations in Z^2 -------------------------------------------------


def _crt(r1: int, m1: int, r2: int, m2: int):
    """Solve ``x = r1 mod m1, x = r2 mod m2``; return ``(x, lcm)`` or ``None``."""
    g = math.gcd(m1, m2)
    if (r2 - r1) % g:
        return None
    l = m1 // g * m2
    if m1 // g == 1:
        return r2 % l, l
    t = ((r2 - r1) // g * pow(m1 // g, -1, m2 // g)) % (m2 // g)
    return (r1 + m1 * t) % l, l


def _coset_meets_quadrant_box(a, b, d, x, y, s1, A: Progression, s2, B: Progression) -> bool:
    """Whether the coset ``(x, y) + (a, b)Z + (0, d)Z`` meets ``(s1 A) x (s2 B)``."""
    sol = _crt(x % a, a, (s1 * A.start) % A.step, A.step)
    if sol is None:
        return False
    u0, L1 = sol
    m0 = (u0 - x) // a
    g2 = math.gcd(d, B.step)
    coef = (b * (L1 // a)) % g2
    rhs = (s2 * B.start - y - b * m0) % g2
    return rhs % math.gcd(coef, g2) == 0


def _coset_contains(a, b, d, x, y, u, v) -> bool:
    if (u - x) % a:
        return False
    m = (u - x) // a
    return (v - y - b * m) % d == 0


def coset_meets(J: ProductSpectralSet, a: int, b: int, d: int, x: int, y: int) -> bool:
    """Exact test of ``(x, y) + H`` against ``{(k, l) : (|k|, |l|) in J}``."""
    for k, l in J.finite:
        for u in {k, -k}:
            for v in {l, -l}:
                if _coset_contains(a, b, d, x, y, u, v):
                    return True
    for A, B in J.boxes:
        for s1 in (1, -1):
            for s2 in (1, -1):
                if _coset_meets_quadrant_box(a, b, d, x, y, s1, A, s2, B):
                    return True
    return False


def coset_representatives(a: int, b: int, d: int):
    """Canonical representatives of ``Z^2 / ((a, b)Z + (0, d)Z)``.

    Each coset is represented by its element with the smallest nonnegative
    second coordinate and then the smallest nonnegative first coordinate.
    """
    g = math.gcd(b, d)
    for v0 in range(g):
        for u0 in range(a * d // g):
            yield u0, v0


def _structural_cover(J: ProductSpectralSet) -> bool:
    for flip in (False, True):
        JJ = J.transpose() if flip else J
        lines = [A for A, B in JJ.boxes if B.step == 1]
        if lines and z_set_intersects_every_full_ap(SymmetricSet(SpectralSet((), tuple(lines)))).proven:
            return True
    return False


def torus_condition(J: ProductSpectralSet, bound: int = 8) -> Verdict:
    """Does ``{(k, l) : (|k|, |l|) in J}`` meet every coset of every subgroup?

    Subgroups ``(a, b)Z + (0, d)Z`` are enumerated in ``(a, b, d)`` order with
    ``1 <= a, d <= bound`` and ``0 <= b < d``.  A structural rule proves the
    unbounded statement when some family of boxes has full lines in one
    coordinate and a covering system in the other.
    """
    if bound < 1:
        raise ValueError("bound must be at least 1")
    params = {"bound": bound}
    subgroups = sorted((a, b, d) for a in range(1, bound + 1) for d in range(1, bound + 1) for b in range(d))
    for a, b, d in subgroups:
        for x, y in coset_representatives(a, b, d):
            if not coset_meets(J, a, b, d, x, y):
                return Verdict(
                    Status.DISPROVEN,
                    "torus_condition",
                    {"kind": "coset", "subgroup": [a, b, d], "translation": [x, y]},
                    params,
                )
    if _structural_cover(J):
        return Verdict(Status.PROVEN, "torus_condition", {"kind": "structural_cover"}, params)
    return Verdict(
        Status.UNKNOWN, "torus_condition", {"kind": "bound_reached", "bound": bound}, params
    )


# -- text notation ----------------------------------------------------------------

_AP_RE = re.compile(r"^\s*(\d+)\s*\+\s*(\d+)\s*n\s*$")


def _parse_ap(text: str) -> Progression:
    m = _AP_RE.match(text)
    if not m:
        raise ValueError(f"bad progression {text!r}; expected like '1+4n'")
    return Progression(int(m.group(1)), int(m.group(2)))


def parse_set(text: str) -> SpectralSet:
    """Parse ``finite:3,5;ap:1+4n`` (clauses may repeat; ``all``/``empty`` allowed)."""
    text = (text or "").strip()
    if text in ("", "empty"):
        return SpectralSet()
    if text == "all":
        return SpectralSet.naturals()
    fin, progs = [], []
    for clause in text.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        key, _, body = clause.partition(":")
        key = key.strip()
        items = [s for s in body.split(",") if s.strip()]
        if key == "finite":
            fin.extend(int(s) for s in items)
        elif key == "ap":
            progs.extend(_parse_ap(s) for s in items)
        else:
            raise ValueError(f"unknown set clause {key!r}")
    return SpectralSet(tuple(fin), tuple(progs))


def format_set(S: SpectralSet) -> str:
    parts = []
    if S.finite:
        parts.append("finite:" + ",".join(str(k) for k in S.finite))
    if S.progressions:
        parts.append("ap:" + ",".join(str(p) for p in S.progressions))
    return ";".join(parts) if parts else "empty"


_BOX_RE = re.compile(r"^\(([^)]*)\)\s*x\s*\(([^)]*)\)$")
_PAIR_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def parse_product_set(text: str) -> ProductSpectralSet:
    """Parse ``box:(0+2n)x(1+3n);pairs:(5,7),(1,2)``."""
    text = (text or "").strip()
    if text in ("", "empty"):
        return ProductSpectralSet()
    if text == "all":
        return ProductSpectralSet.naturals()
    boxes, pairs = [], []
    for clause in text.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        key, _, body = clause.partition(":")
        key = key.strip()
        if key == "box":
            m = _BOX_RE.match(body.strip())
            if not m:
                raise ValueError(f"bad box {body!r}; expected like '(0+2n)x(1+3n)'")
            boxes.append((_parse_ap(m.group(1)), _parse_ap(m.group(2))))
        elif key == "pairs":
            pairs.extend((int(k), int(l)) for k, l in _PAIR_RE.findall(body))
        else:
            raise ValueError(f"unknown product-set clause {key!r}")
    return ProductSpectralSet(tuple(pairs), tuple(boxes))


def format_product_set(J: ProductSpectralSet) -> str:
    parts = [f"box:({A})x({B})" for A, B in J.boxes]
    if J.finite:
        parts.append("pairs:" + ",".join(f"({k},{l})" for k, l in J.finite))
    return ";".join(parts) if parts else "empty"
