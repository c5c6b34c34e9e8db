"""Butcher tableaux for fully implicit collocation-type Runge--Kutta families.

Nodes come from the roots of the family's Legendre-type polynomial (companion
matrix eigenvalues plus one Newton polish step); the coefficient matrix is then
fixed by the simplifying conditions, row by row, through a Vandermonde solve.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as leg

from .errors import SingularTableau, UnsupportedStageCount

MAX_TESTED_STAGES = 5


class Family(str, enum.Enum):
    RADAU_IIA = "RadauIIA"
    GAUSS = "Gauss"
    LOBATTO_IIIC = "LobattoIIIC"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).replace("-", "").replace("_", "").replace(" ", "").lower()
        for fam in cls:
            if fam.value.lower() == key:
                return fam
        aliases = {"radau": cls.RADAU_IIA, "lobatto": cls.LOBATTO_IIIC, "gausslegendre": cls.GAUSS}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown Runge-Kutta family {name!r}")


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    family: Family
    order: int

    @property
    def s(self) -> int:
        return len(self.b)

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.max(np.abs(self.A[-1] - self.b)) < 1e-13)

    @property
    def A_inv(self) -> np.ndarray:
        return np.linalg.inv(self.A)

    @property
    def name(self) -> str:
        return f"{self.family.value}({self.s})"

    def __str__(self):
        rows = []
        fmt = "{:>12.8f}".format
        for i in range(self.s):
            rows.append(fmt(self.c[i]) + " | " + " ".join(fmt(a) for a in self.A[i]))
        width = len(rows[0])
        rows.append("-" * 13 + "+" + "-" * (width - 14))
        rows.append(" " * 12 + " | " + " ".join(fmt(x) for x in self.b))
        return f"{self.name}, order {self.order}\n" + "\n".join(rows)


def _polished_roots(coef):
    """Roots in [-1, 1] of a Legendre series, refined by one Newton step."""
    x = np.sort(np.real(leg.legroots(coef)))
    d = leg.legder(coef)
    dp = leg.legval(x, d)
    ok = np.abs(dp) > 0
    x[ok] -= leg.legval(x[ok], coef) / dp[ok]
    return np.clip(x, -1.0, 1.0)


def _nodes(family: Family, s: int) -> np.ndarray:
    if family is Family.GAUSS:
        x = _polished_roots(np.eye(s + 1)[s])
    elif family is Family.RADAU_IIA:
        if s == 1:
            x = np.array([1.0])
        else:
            x = _polished_roots(np.eye(s + 1)[s] - np.eye(s + 1)[s - 1])
            x[-1] = 1.0
    else:
        interior = _polished_roots(leg.legder(np.eye(s)[s - 1])) if s > 2 else np.empty(0)
        x = np.concatenate(([-1.0], interior, [1.0]))
    return (x + 1.0) / 2.0


def _vandermonde(c, k):
    # row m holds c**m, m = 0..k-1
    return np.vander(c, k, increasing=True).T


def make_tableau(family, s: int) -> ButcherTableau:
    """Build the ``s``-stage tableau of a Radau IIA, Gauss or Lobatto IIIC method."""
    family = Family.parse(family)
    s = int(s)
    smin = 2 if family is Family.LOBATTO_IIIC else 1
    if s < smin:
        raise UnsupportedStageCount(f"{family.value} needs s >= {smin}, got {s}")
    if s > MAX_TESTED_STAGES:
        warnings.warn(
            f"{family.value}({s}): stage counts above {MAX_TESTED_STAGES} are untested",
            stacklevel=2,
        )

    c = _nodes(family, s)
    k = np.arange(1, s + 1)
    V = _vandermonde(c, s)
    b = np.linalg.solve(V, 1.0 / k)

    A = np.empty((s, s))
    if family is Family.LOBATTO_IIIC:
        # a_{i1} = b_1 plus C(s-1)
        M = np.vstack([np.eye(s)[0], _vandermonde(c, s - 1)])
        for i in range(s):
            rhs = np.concatenate(([b[0]], c[i] ** k[:-1] / k[:-1]))
            A[i] = np.linalg.solve(M, rhs)
        order = 2 * s - 2
    else:
        for i in range(s):
            A[i] = np.linalg.solve(V, c[i] ** k / k)
        order = 2 * s if family is Family.GAUSS else 2 * s - 1

    if family is not Family.GAUSS:
        # stiff accuracy holds exactly in exact arithmetic; remove rounding
        A[-1] = b

    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SingularTableau(f"{family.value}({s}) coefficient matrix is singular")

    for arr in (A, b, c):
        arr.setflags(write=False)
    return ButcherTableau(A=A, b=b, c=c, family=family, order=order)


# ---------------------------------------------------------------------------
# rooted trees and order conditions


@lru_cache(maxsize=None)
def rooted_trees(n: int):
    """All rooted trees with ``n`` vertices, as canonical nested tuples."""
    if n == 1:
        return ((),)
    return _forests(n - 1, (n - 1, len(rooted_trees(n - 1)) - 1))


@lru_cache(maxsize=None)
def _forests(n, max_key):
    """Multisets of trees of total size ``n`` whose (size, index) keys are <= ``max_key``.

    Children are listed with non-increasing keys, which makes each multiset unique.
    """
    if n == 0:
        return ((),)
    result = []
    for size in range(min(n, max_key[0]), 0, -1):
        trees = rooted_trees(size)
        top = max_key[1] if size == max_key[0] else len(trees) - 1
        for idx in range(top, -1, -1):
            for rest in _forests(n - size, (size, idx)):
                result.append((trees[idx],) + rest)
    return tuple(result)


@lru_cache(maxsize=None)
def _tree_size(t):
    return 1 + sum(_tree_size(ch) for ch in t)


@lru_cache(maxsize=None)
def _density(t):
    out = _tree_size(t)
    for ch in t:
        out *= _density(ch)
    return out


def _stage_weights(A, t, cache):
    if t in cache:
        return cache[t]
    v = np.ones(A.shape[0])
    for ch in t:
        v = v * (A @ _stage_weights(A, ch, cache))
    cache[t] = v
    return v


@dataclass
class OrderReport:
    max_residual: float
    residual_by_order: dict
    stiffly_accurate: bool
    min_singular_value: float
    n_conditions: int


def check_order_conditions(t: ButcherTableau, up_to: int | None = None) -> OrderReport:
    """Largest residual ``|b . Phi(tree) - 1/gamma(tree)|`` over all rooted trees up to ``up_to``."""
    up_to = t.order if up_to is None else int(up_to)
    A = np.asarray(t.A, dtype=float)
    b = np.asarray(t.b, dtype=float)
    cache = {}
    by_order = {}
    count = 0
    for n in range(1, up_to + 1):
        worst = 0.0
        for tree in rooted_trees(n):
            res = abs(b @ _stage_weights(A, tree, cache) - 1.0 / _density(tree))
            worst = max(worst, res)
            count += 1
        by_order[n] = worst
    return OrderReport(
        max_residual=max(by_order.values(), default=0.0),
        residual_by_order=by_order,
        stiffly_accurate=t.stiffly_accurate,
        min_singular_value=float(np.linalg.svd(A, compute_uv=False)[-1]),
        n_conditions=count,
    )
