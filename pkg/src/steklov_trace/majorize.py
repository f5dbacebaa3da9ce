"""Hadamard products, (weak) majorization, and the eigenvalue/diagonal
inequality for pairs of positive definite matrices.

For symmetric positive definite ``A`` and ``B`` with eigenvalues listed in
ascending order and any increasing convex ``f``::

    sum_i f(lam_i(A) lam_i(B)) >= sum_i f(A_ii B_ii)

The chain behind it is ``diag(A o B) < eig(A o B) <_w eig(A) * eig(B)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "SymMatrix",
    "IncreasingConvexFn",
    "Lemma22Result",
    "hadamard",
    "weak_majorization",
    "majorization",
    "schur_diag_majorization",
    "lemma22_check",
    "catalog",
    "random_spd",
    "random_symmetric",
]

MAX_SIZE = 64
PD_REL = 1e-10
CHECK_REL = 1e-10


class SymMatrix:
    """Dense symmetric matrix stored as its upper triangle.

    Symmetry is exact by construction; input must be symmetric to ``1e-12``
    relative unless ``upper=True`` (then the lower triangle is ignored).
    """

    __slots__ = ("_upper",)

    def __init__(self, data, upper: bool = False):
        a = np.array(data, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("SymMatrix needs a square 2-D array")
        if a.shape[0] > MAX_SIZE:
            raise ValueError(f"size {a.shape[0]} exceeds {MAX_SIZE}")
        if not upper:
            scale = max(np.abs(a).max(), 1e-300)
            if np.abs(a - a.T).max() > 1e-12 * scale:
                raise ValueError("matrix is not symmetric")
        self._upper = np.triu(a)
        self._upper.setflags(write=False)

    @property
    def n(self) -> int:
        return self._upper.shape[0]

    @property
    def full(self) -> np.ndarray:
        return self._upper + np.triu(self._upper, 1).T

    def __array__(self, dtype=None, copy=None):
        return self.full if dtype is None else self.full.astype(dtype)

    def diag(self) -> np.ndarray:
        return np.diag(self._upper).copy()

    def eigvals(self) -> np.ndarray:
        """Ascending eigenvalues."""
        return np.linalg.eigvalsh(self.full)

    def __eq__(self, other):
        return isinstance(other, SymMatrix) and np.array_equal(self._upper, other._upper)

    def __repr__(self):
        return f"SymMatrix({self.full.tolist()!r})"


def _as_sym(a) -> SymMatrix:
    return a if isinstance(a, SymMatrix) else SymMatrix(a)


def hadamard(A, B) -> SymMatrix:
    """Entrywise product ``A o B``."""
    A, B = _as_sym(A), _as_sym(B)
    if A.n != B.n:
        raise ValueError(f"size mismatch: {A.n} vs {B.n}")
    return SymMatrix(A._upper * B._upper, upper=True)


def _partial_sums(x) -> np.ndarray:
    return np.cumsum(np.sort(np.asarray(x, dtype=float))[::-1])


def weak_majorization(x, y, tol: float = 0.0) -> bool:
    """``x <_w y``: every sum of the k largest entries of x is at most that of y.

    ``tol`` is relative to the largest partial-sum magnitude.
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("weak_majorization needs two vectors of equal length")
    px, py = _partial_sums(x), _partial_sums(y)
    scale = max(np.abs(px).max(initial=0.0), np.abs(py).max(initial=0.0))
    return bool(np.all(px <= py + tol * scale))


def majorization(x, y, tol: float = 0.0) -> bool:
    """``x < y``: weak majorization plus equal totals."""
    if not weak_majorization(x, y, tol):
        return False
    sx, sy = float(np.sum(x)), float(np.sum(y))
    scale = max(np.abs(x).sum(), np.abs(y).sum(), 1e-300)
    return abs(sx - sy) <= max(tol, 1e-10) * scale


def schur_diag_majorization(A) -> bool:
    """Diagonal of a symmetric matrix is majorized by its eigenvalues."""
    A = _as_sym(A)
    return majorization(A.diag(), A.eigvals(), tol=CHECK_REL)


# ---------------------------------------------------------------------------
# increasing convex functions


@dataclass(frozen=True)
class IncreasingConvexFn:
    """A named increasing convex function on ``[lo, hi]``.

    Validated at construction: first and second differences on a 101-point
    grid must be nonnegative (up to ``1e-12`` relative round-off).
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    params: tuple = ()
    lo: float = 0.0
    hi: float = 10.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("empty evaluation range")
        t = np.linspace(self.lo, self.hi, 101)
        v = np.asarray(self.fn(t), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{self.name}: non-finite values on [{self.lo}, {self.hi}]")
        eps = 1e-12 * max(np.abs(v).max(), 1.0)
        d1 = np.diff(v)
        d2 = np.diff(v, 2)
        if np.any(d1 < -eps):
            raise ValueError(f"{self.name} is not increasing on [{self.lo}, {self.hi}]")
        if np.any(d2 < -eps):
            raise ValueError(f"{self.name} is not convex on [{self.lo}, {self.hi}]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < self.lo - 1e-12 * max(1.0, abs(self.lo)) or t.max() > self.hi * (1 + 1e-12)):
            raise ValueError(f"{self.name}: argument outside [{self.lo}, {self.hi}]")
        return np.asarray(self.fn(t), dtype=float)

    def on(self, lo: float, hi: float) -> IncreasingConvexFn:
        """Same function revalidated on another range."""
        return IncreasingConvexFn(self.name, self.fn, self.params, lo, hi)

    # catalog constructors

    @classmethod
    def linear(cls, hi: float = 10.0):
        return cls("t", lambda t: t, (), 0.0, hi)

    @classmethod
    def square(cls, hi: float = 10.0):
        return cls("t2", lambda t: t * t, (), 0.0, hi)

    @classmethod
    def cube(cls, hi: float = 10.0):
        return cls("t3", lambda t: t**3, (), 0.0, hi)

    @classmethod
    def expm1(cls, hi: float = 10.0):
        return cls("expm1", np.expm1, (), 0.0, hi)

    @classmethod
    def hinge(cls, c: float, hi: float = 10.0):
        return cls(f"hinge({c:g})", lambda t: np.maximum(0.0, t - c), (c,), 0.0, hi)

    @classmethod
    def affine(cls, a: float, b: float, hi: float = 10.0):
        if a < 0:
            raise ValueError("affine slope must be nonnegative")
        return cls(f"affine({a:g},{b:g})", lambda t: a * t + b, (a, b), 0.0, hi)

    @classmethod
    def tabulated(cls, xs: Sequence[float], ys: Sequence[float], name: str = "tabulated"):
        """Piecewise-linear interpolant of user data (``xs`` increasing)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("tabulated function needs increasing xs and matching ys")
        return cls(name, lambda t: np.interp(t, xs, ys), (tuple(xs), tuple(ys)), float(xs[0]), float(xs[-1]))


_NAMED = {
    "t": IncreasingConvexFn.linear,
    "t2": IncreasingConvexFn.square,
    "t3": IncreasingConvexFn.cube,
    "expm1": IncreasingConvexFn.expm1,
}


def catalog(hi: float = 10.0) -> list[IncreasingConvexFn]:
    """Default function family used by the test suites."""
    return [
        IncreasingConvexFn.linear(hi),
        IncreasingConvexFn.square(hi),
        IncreasingConvexFn.cube(hi),
        IncreasingConvexFn.expm1(hi),
        IncreasingConvexFn.hinge(0.5, hi),
        IncreasingConvexFn.affine(2.0, 1.0, hi),
    ]


def by_name(name: str, hi: float = 10.0) -> IncreasingConvexFn:
    """Look up ``t``, ``t2``, ``t3``, ``expm1``, ``hinge:c`` or ``affine:a,b``."""
    if name in _NAMED:
        return _NAMED[name](hi)
    if name == "exp":
        return IncreasingConvexFn.expm1(hi)
    kind, _, arg = name.partition(":")
    try:
        if kind == "hinge":
            return IncreasingConvexFn.hinge(float(arg), hi)
        if kind == "affine":
            a, b = (float(x) for x in arg.split(","))
            return IncreasingConvexFn.affine(a, b, hi)
    except ValueError as exc:
        raise ValueError(f"bad function parameters in {name!r}") from exc
    raise ValueError(f"unknown function {name!r}")


# ---------------------------------------------------------------------------
# eigenvalue / diagonal inequality


@dataclass(frozen=True)
class Lemma22Result:
    lhs: float
    rhs: float
    verdict: bool

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def _check_pd(A: SymMatrix, label: str) -> np.ndarray:
    ev = A.eigvals()
    if ev[0] <= PD_REL * max(abs(ev[-1]), 1e-300):
        raise ValueError(f"{label} is not positive definite (min eigenvalue {ev[0]:.3e})")
    return ev


def lemma22_check(A, B, f: IncreasingConvexFn) -> Lemma22Result:
    """Compare ``sum f(lam_i(A) lam_i(B))`` with ``sum f(A_ii B_ii)``."""
    A, B = _as_sym(A), _as_sym(B)
    if A.n != B.n:
        raise ValueError(f"size mismatch: {A.n} vs {B.n}")
    la = _check_pd(A, "A")
    lb = _check_pd(B, "B")
    prod = la * lb
    diag = A.diag() * B.diag()
    hi = max(prod.max(), diag.max())
    g = f if hi <= f.hi else f.on(f.lo, hi)
    lhs = float(np.sum(g(prod)))
    rhs = float(np.sum(g(diag)))
    return Lemma22Result(lhs, rhs, lhs >= rhs - CHECK_REL * abs(rhs))


# ---------------------------------------------------------------------------
# random inputs for property checks


def random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    x = rng.standard_normal((n, n))
    return 0.5 * (x + x.T)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    """SPD matrix with eigenvalues spread over roughly two decades."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.exp(rng.uniform(np.log(0.05), np.log(2.0), n))
    a = (q * ev) @ q.T
    return 0.5 * (a + a.T)
