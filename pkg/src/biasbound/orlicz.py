"""Orlicz norms of finite discrete distributions and the bias bound they give.

Two norms of |X| under a finite distribution (values v_i, weights w_i):

* Luxemburg:  ||X||_psi   = inf { s > 0 : E psi(|X|/s) <= 1 }
* Amemiya:    ||X||_psi^A = inf_{t > 0} (1 + E psi(t |X|)) / t

They satisfy ||X||_psi <= ||X||^A_psi <= 2 ||X||_psi, and the generalized
Hölder inequality E|XY| <= ||X||_psi * ||Y||^A_{psi*} pairs a Luxemburg norm
with the Amemiya norm of the conjugate function.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Tuple

import numpy as np

from .cgf import _golden_min, legendre_transform
from .divergence import DiscreteJoint

__all__ = [
    "OrliczFunction",
    "power_orlicz",
    "scaled_power_orlicz",
    "exp_orlicz",
    "luxemburg_norm",
    "amemiya_norm",
    "orlicz_bias_bound",
    "holder_check",
    "NumericDivergence",
]


class NumericDivergence(ArithmeticError):
    """Raised when a norm or bound diverges over the whole search range."""


class OrliczFunction:
    """Convex nondecreasing psi on [0, inf) with psi(0) = 0, not identically 0.

    ``conjugate_fn`` (if given) is the closed-form convex conjugate
    psi*(v) = sup_u (u v - psi(u)); otherwise the conjugate is computed by
    bracketed golden-section search.
    """

    def __init__(self, fn: Callable, name: str = "psi",
                 conjugate_fn: Optional[Callable] = None, validate: bool = True):
        self._fn = fn
        self._conjugate_fn = conjugate_fn
        self.name = name
        if validate:
            self._validate()

    def __call__(self, u):
        # overflow to +inf is legitimate for fast-growing psi
        with np.errstate(over="ignore", invalid="ignore"):
            return self._fn(np.asarray(u, dtype=float))

    def __repr__(self):
        return f"OrliczFunction({self.name})"

    def _validate(self):
        at0 = float(self(0.0))
        if abs(at0) > 1e-12:
            raise ValueError("psi(0) must be 0")
        grid = np.geomspace(1e-8, 1e8, 65)
        vals = np.asarray(self(grid), dtype=float)
        if np.any(vals < -1e-12):
            raise ValueError("psi must be nonnegative")
        finite = vals[np.isfinite(vals)]
        if finite.size == 0 or not np.any(finite > 0):
            raise ValueError("psi must be finite and positive somewhere on (0, inf)")
        dense = np.linspace(0.0, float(grid[np.isfinite(vals)][-1]), 129)
        dv = np.asarray(self(dense), dtype=float)
        keep = np.isfinite(dv)
        dv, dense = dv[keep], dense[keep]
        if dv.size >= 3:
            second = dv[:-2] - 2.0 * dv[1:-1] + dv[2:]
            if np.any(second < -1e-9 * (1.0 + np.abs(dv[1:-1]))):
                raise ValueError("psi fails sampled convexity check")
        if np.any(np.diff(dv) < -1e-12):
            raise ValueError("psi must be nondecreasing")

    def conjugate_value(self, v: float) -> float:
        """psi*(v) for v >= 0."""
        if self._conjugate_fn is not None:
            return float(self._conjugate_fn(float(v)))
        return legendre_transform(lambda u: float(self(u)), v)

    def conjugate_function(self) -> "OrliczFunction":
        """The conjugate wrapped as an OrliczFunction (it is one)."""
        def fn(v):
            v = np.asarray(v, dtype=float)
            out = np.array([self.conjugate_value(t) for t in np.atleast_1d(v)])
            return out.reshape(v.shape) if v.shape else float(out[0])
        return OrliczFunction(fn, name=f"{self.name}*", validate=False)

    def inverse(self, y: float) -> float:
        """Smallest u with psi(u) >= y (generalized inverse), y >= 0."""
        y = float(y)
        if y < 0:
            raise ValueError("inverse argument must be nonnegative")
        if y == 0.0:
            return 0.0
        hi = 1.0
        for _ in range(2000):
            if float(self(hi)) >= y:
                break
            hi *= 2.0
        else:
            raise NumericDivergence("psi never reaches the requested level")
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(self(mid)) >= y:
                hi = mid
            else:
                lo = mid
        return hi


def power_orlicz(p: float) -> OrliczFunction:
    """psi(u) = u**p for p >= 1."""
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")

    def fn(u):
        return np.power(u, p)

    if p == 1.0:
        def conj(v):
            return 0.0 if v <= 1.0 else math.inf
    else:
        q = p / (p - 1.0)

        def conj(v):
            return (p - 1.0) * (v / p) ** q
    return OrliczFunction(fn, name=f"power({p:g})", conjugate_fn=conj)


def scaled_power_orlicz(p: float) -> OrliczFunction:
    """psi(u) = u**p / p for p > 1; its conjugate is v**q / q, 1/p + 1/q = 1."""
    p = float(p)
    if p <= 1:
        raise ValueError("p must be > 1")
    q = p / (p - 1.0)

    def fn(u):
        return np.power(u, p) / p

    def conj(v):
        return v ** q / q
    return OrliczFunction(fn, name=f"scaled_power({p:g})", conjugate_fn=conj)


def exp_orlicz() -> OrliczFunction:
    """psi(u) = e**u - 1; conjugate v ln v - v + 1 for v >= 1, else 0."""
    def fn(u):
        return np.expm1(u)

    def conj(v):
        if v <= 1.0:
            return 0.0
        return v * math.log(v) - v + 1.0
    return OrliczFunction(fn, name="exp", conjugate_fn=conj)


def _as_weighted(values, weights) -> Tuple[np.ndarray, np.ndarray]:
    v = np.abs(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty sample")
    if weights is None:
        w = np.full(v.size, 1.0 / v.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != v.shape:
            raise ValueError("weights must match values in length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
    return v, w


def luxemburg_norm(values, psi: OrliczFunction, weights=None) -> float:
    """Luxemburg norm inf { s : E psi(|X|/s) <= 1 } of a finite distribution."""
    v, w = _as_weighted(values, weights)
    if not np.any((v > 0) & (w > 0)):
        return 0.0

    def excess(s: float) -> float:
        # inf/inf -> nan treated as divergent mass, not an error
        with np.errstate(invalid="ignore"):
            ratios = v / s
        ratios = np.where(np.isnan(ratios), np.inf, ratios)
        terms = w * np.asarray(psi(ratios), dtype=float)
        return float(np.sum(terms[w > 0]))

    hi = float(v.max())
    for _ in range(1000):
        if excess(hi) <= 1.0:
            break
        hi *= 2.0
    else:
        raise NumericDivergence("Luxemburg norm diverges: E psi(|X|/s) > 1 for all tried s")
    lo = hi
    for _ in range(1000):
        if excess(lo / 2.0) > 1.0:
            break
        lo /= 2.0
        if lo < 1e-300:
            return 0.0
    lo /= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def amemiya_norm(values, psi: OrliczFunction, weights=None) -> float:
    """Amemiya norm inf_t (1 + E psi(t |X|)) / t of a finite distribution.

    A 64-point log-spaced scan over t in [1e-8, 1e8] certifies a bracket,
    then golden section refines it (the objective is quasiconvex, but the
    scan does not assume that).
    """
    v, w = _as_weighted(values, weights)
    if not np.any((v > 0) & (w > 0)):
        return 0.0
    active = w > 0
    va, wa = v[active], w[active]

    def obj(t: float) -> float:
        return (1.0 + float(np.sum(wa * np.asarray(psi(t * va), dtype=float)))) / t

    t_lo, t_hi = 1e-8, 1e8
    for _ in range(4):
        grid = np.geomspace(t_lo, t_hi, 64)
        vals = np.array([obj(float(t)) for t in grid])
        if not np.any(np.isfinite(vals)):
            raise NumericDivergence("Amemiya objective diverged over the whole scan grid")
        i = int(np.argmin(vals))
        if i == 0:
            t_lo *= 1e-4
        elif i == len(grid) - 1:
            t_hi *= 1e4
        else:
            break
    lo_b = float(grid[max(i - 1, 0)])
    hi_b = float(grid[min(i + 1, len(grid) - 1)])
    _, val = _golden_min(obj, lo_b, hi_b)
    return val


def orlicz_bias_bound(sigma: float, joint: DiscreteJoint,
                      psi: OrliczFunction) -> float:
    """Bias bound sigma * || L - 1 ||^A_{psi*} from an Orlicz moment cap.

    sigma is the common Luxemburg psi-norm cap on the centered coordinates;
    L is the likelihood ratio joint/(product of marginals) and the conjugate
    Amemiya norm is taken under the product measure.
    """
    if not sigma >= 0:
        raise ValueError("sigma must be nonnegative")
    prod = joint.product_of_marginals()
    mask = prod > 0
    if np.any(joint.p[~mask] > 0):
        return math.inf
    ratio = joint.p[mask] / prod[mask]
    return sigma * amemiya_norm(np.abs(ratio - 1.0), psi.conjugate_function(),
                                weights=prod[mask])


def holder_check(x, y, psi: OrliczFunction, weights=None):
    """Check E|XY| <= ||X||_psi * ||Y||^A_{psi*} on a finite distribution.

    Returns (holds, slack, lhs, rhs) with slack = rhs - lhs.
    """
    x = np.abs(np.asarray(x, dtype=float).ravel())
    y = np.abs(np.asarray(y, dtype=float).ravel())
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    _, w = _as_weighted(x, weights)
    lhs = float(np.sum(w * x * y))
    rhs = luxemburg_norm(x, psi, weights) * amemiya_norm(
        y, psi.conjugate_function(), weights)
    slack = rhs - lhs
    return slack >= -1e-12 * max(1.0, abs(rhs)), slack, lhs, rhs
