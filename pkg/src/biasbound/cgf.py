"""Cumulant-generating-function envelopes and their convex conjugates.

An envelope is a convex function psi on [0, domain_sup) with psi(0) = 0 and
zero right-derivative at the origin.  It upper-bounds the CGF of a centered
random variable; its convex conjugate psi*(x) = sup_lam (lam*x - psi(lam))
gives Chernoff-style tail rates, and the inverse conjugate

    (psi*)^{-1}(I) = inf_{0 < lam < domain_sup} (psi(lam) + I) / lam

converts an information budget I (in nats) into a deviation scale.  The
inverse-conjugate objective is quasiconvex, so a log-grid scan followed by
golden-section refinement is reliable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

__all__ = [
    "CgfEnvelope",
    "SubGaussian",
    "SubExponential",
    "SubGamma",
    "Tabulated",
    "MixedEnvelope",
    "legendre_transform",
    "subexponential_piecewise_bound",
]

# Capped domains are approached to within this relative shrink: close enough
# to a pole for boundary-attained minima, far enough to stay finite in float64.
_BOUNDARY_SHRINK = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(f: Callable[[float], float], lo: float, hi: float,
                xtol: float = 1e-10, rtol: float = 1e-12,
                max_iter: int = 200) -> Tuple[float, float]:
    """Golden-section minimum of a unimodal f on [lo, hi].

    Returns the best of the final interior probes and both endpoints, so a
    minimum attained exactly at a capped boundary is not rounded inward.
    """
    a, b = float(lo), float(hi)
    if not b > a:
        return a, f(a)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if (b - a) <= xtol + rtol * abs(b):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    candidates = [(a, f(a)), (c, fc), (d, fd), (b, f(b))]
    return min(candidates, key=lambda t: t[1])


def legendre_transform(f: Callable[[float], float], x: float,
                       domain_sup: float = math.inf) -> float:
    """sup over lam in [0, domain_sup) of lam*x - f(lam).

    f must be convex with f(0) = 0 (hence nonnegative), so the supremum is
    always >= 0.  The search doubles an upper bracket until the objective
    stops improving (or the capped domain is hit), then refines by
    golden section.  Returns math.inf if the objective grows without bound.
    """
    x = float(x)
    if x < 0:
        raise ValueError("conjugate argument must be nonnegative")
    if x == 0.0:
        return 0.0

    def g(lam: float) -> float:
        return lam * x - f(lam)

    if math.isfinite(domain_sup):
        cap = domain_sup * (1.0 - _BOUNDARY_SHRINK)
        hi = cap
    else:
        cap = math.inf
        hi = 1.0
        while g(2.0 * hi) > g(hi):
            hi *= 2.0
            if hi > 1e250:
                return math.inf
        hi *= 2.0
    _, neg = _golden_min(lambda lam: -g(lam), 0.0, hi)
    return max(-neg, 0.0)


def _quasiconvex_min(h: Callable[[float], float], hi: float,
                     grid_points: int = 240) -> float:
    """Minimum value of a quasiconvex h over (0, hi].

    Log-spaced scan locates a bracket (extending left if the minimum hides
    below the initial grid), then golden section refines it.
    """
    lo = hi * 1e-18
    for _ in range(6):
        grid = np.geomspace(lo, hi, grid_points)
        vals = np.array([h(float(t)) for t in grid])
        i = int(np.argmin(vals))
        if i > 0 or lo < 1e-280:
            break
        lo *= 1e-6
    lo_b = float(grid[max(i - 1, 0)])
    hi_b = float(grid[min(i + 1, len(grid) - 1)])
    _, val = _golden_min(h, lo_b, hi_b)
    return val


class CgfEnvelope:
    """Base class: convex psi on [0, domain_sup) with psi(0) = 0."""

    domain_sup: float = math.inf

    def evaluate(self, lam: float) -> float:
        raise NotImplementedError

    def _check_lambda(self, lam: float) -> float:
        lam = float(lam)
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        return lam

    def conjugate(self, x: float) -> float:
        """Convex conjugate psi*(x) for x >= 0 (closed form when available)."""
        return self.conjugate_numeric(x)

    def conjugate_numeric(self, x: float) -> float:
        """psi*(x) by bracketed golden-section maximization."""
        return legendre_transform(self.evaluate, x, self.domain_sup)

    def inverse_conjugate(self, info: float) -> float:
        """Generalized inverse of psi* at information budget info (nats)."""
        return self.inverse_conjugate_numeric(info)

    def inverse_conjugate_numeric(self, info: float) -> float:
        """inf over lam in (0, domain_sup) of (psi(lam) + info) / lam."""
        info = float(info)
        if info < 0:
            raise ValueError("information budget must be nonnegative")
        if info == 0.0:
            return 0.0

        def h(lam: float) -> float:
            return (self.evaluate(lam) + info) / lam

        if math.isfinite(self.domain_sup):
            hi = self.domain_sup * (1.0 - _BOUNDARY_SHRINK)
        else:
            hi = 1.0
            while h(2.0 * hi) < h(hi):
                hi *= 2.0
                if hi > 1e250:
                    break
            hi *= 2.0
        return _quasiconvex_min(h, hi)


@dataclass(frozen=True)
class SubGaussian(CgfEnvelope):
    """psi(lam) = lam^2 sigma^2 / 2 on [0, inf)."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def domain_sup(self) -> float:
        return math.inf

    def evaluate(self, lam: float) -> float:
        lam = self._check_lambda(lam)
        return 0.5 * lam * lam * self.sigma * self.sigma

    def conjugate(self, x: float) -> float:
        x = float(x)
        if x < 0:
            raise ValueError("conjugate argument must be nonnegative")
        return x * x / (2.0 * self.sigma * self.sigma)

    def inverse_conjugate(self, info: float) -> float:
        info = float(info)
        if info < 0:
            raise ValueError("information budget must be nonnegative")
        return self.sigma * math.sqrt(2.0 * info)


@dataclass(frozen=True)
class SubExponential(CgfEnvelope):
    """psi(lam) = lam^2 sigma^2 / 2 on [0, 1/b); +inf beyond."""

    sigma: float
    b: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.b > 0:
            raise ValueError("b must be positive")

    @property
    def domain_sup(self) -> float:
        return 1.0 / self.b

    def evaluate(self, lam: float) -> float:
        lam = self._check_lambda(lam)
        if lam >= self.domain_sup:
            return math.inf
        return 0.5 * lam * lam * self.sigma * self.sigma

    def conjugate(self, x: float) -> float:
        x = float(x)
        if x < 0:
            raise ValueError("conjugate argument must be nonnegative")
        s2 = self.sigma * self.sigma
        if x < s2 / self.b:
            return x * x / (2.0 * s2)
        return x / self.b - s2 / (2.0 * self.b * self.b)

    def inverse_conjugate(self, info: float) -> float:
        info = float(info)
        if info < 0:
            raise ValueError("information budget must be nonnegative")
        s2 = self.sigma * self.sigma
        if info <= s2 / (2.0 * self.b * self.b):
            return self.sigma * math.sqrt(2.0 * info)
        return self.b * info + s2 / (2.0 * self.b)


@dataclass(frozen=True)
class SubGamma(CgfEnvelope):
    """psi(lam) = lam^2 sigma2 / (2 (1 - c lam)) on [0, 1/c); +inf beyond."""

    sigma2: float
    c: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")

    @property
    def domain_sup(self) -> float:
        return 1.0 / self.c

    def evaluate(self, lam: float) -> float:
        lam = self._check_lambda(lam)
        if lam >= self.domain_sup:
            return math.inf
        return 0.5 * lam * lam * self.sigma2 / (1.0 - self.c * lam)

    def conjugate(self, x: float) -> float:
        # psi*(x) = (sigma2/c^2) h(cx/sigma2) with h(u) = 1 + u - sqrt(1 + 2u)
        x = float(x)
        if x < 0:
            raise ValueError("conjugate argument must be nonnegative")
        u = self.c * x / self.sigma2
        h = 1.0 + u - math.sqrt(1.0 + 2.0 * u)
        return self.sigma2 / (self.c * self.c) * h

    def inverse_conjugate(self, info: float) -> float:
        info = float(info)
        if info < 0:
            raise ValueError("information budget must be nonnegative")
        return math.sqrt(2.0 * self.sigma2 * info) + self.c * info


class Tabulated(CgfEnvelope):
    """Envelope given on a grid; linear interpolation inside, +inf beyond.

    The grid must start at (0, 0), be strictly increasing in lambda, have
    nondecreasing convex values, and a near-zero slope at the origin.
    evaluate(lambda_max) returns the last tabulated value; strictly beyond
    the grid the envelope is +inf.
    """

    def __init__(self, lams: Sequence[float], psis: Sequence[float],
                 origin_slope_tol: float = 0.1):
        lams = np.asarray(lams, dtype=float)
        psis = np.asarray(psis, dtype=float)
        if lams.ndim != 1 or lams.shape != psis.shape or lams.size < 2:
            raise ValueError("grid must be two equal-length 1-D arrays with >= 2 points")
        if not np.all(np.diff(lams) > 0):
            raise ValueError("lambda grid must be strictly increasing")
        if abs(lams[0]) > 0 or abs(psis[0]) > 1e-12:
            raise ValueError("grid must start at (0, 0)")
        if np.any(np.diff(psis) < -1e-12):
            raise ValueError("envelope values must be nondecreasing")
        slopes = np.diff(psis) / np.diff(lams)
        if np.any(np.diff(slopes) < -1e-9 * (1.0 + np.abs(slopes[:-1]))):
            raise ValueError("envelope values must be convex")
        if slopes[0] > origin_slope_tol:
            raise ValueError("slope at the origin must be (near) zero")
        self._lams = lams
        self._psis = psis

    @property
    def domain_sup(self) -> float:
        return float(self._lams[-1])

    def evaluate(self, lam: float) -> float:
        lam = self._check_lambda(lam)
        if lam > self._lams[-1]:
            return math.inf
        return float(np.interp(lam, self._lams, self._psis))

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        """Load a grid from CSV with header line ``lambda,psi``."""
        lams, psis = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{path}: empty envelope file")
            for i, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 2:
                    raise ValueError(f"{path}: line {i}: expected two columns")
                try:
                    lams.append(float(row[0]))
                    psis.append(float(row[1]))
                except ValueError:
                    raise ValueError(f"{path}: line {i}: non-numeric entry") from None
        return cls(lams, psis)


class MixedEnvelope(CgfEnvelope):
    """Convex combination of envelopes: psi(lam) = sum_i w_i psi_i(lam).

    domain_sup is the minimum over all component domain_sup values; weights
    must be nonnegative and sum to 1.  Homogeneous mixtures collapse to a
    closed-form member (sub-Gaussian, sub-gamma with shared c, or
    sub-exponential); anything else evaluates conjugates numerically.
    """

    def __init__(self, components: Sequence[Tuple[float, CgfEnvelope]]):
        components = [(float(w), env) for w, env in components]
        if not components:
            raise ValueError("mixture needs at least one component")
        weights = np.array([w for w, _ in components])
        if np.any(weights < 0):
            raise ValueError("mixture weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        self.components = tuple(components)
        self._domain_sup = min(env.domain_sup for _, env in components)
        self._collapsed = self._collapse()

    @property
    def domain_sup(self) -> float:
        return self._domain_sup

    def evaluate(self, lam: float) -> float:
        lam = self._check_lambda(lam)
        if lam >= self._domain_sup and math.isfinite(self._domain_sup):
            if lam > self._domain_sup or not self._boundary_finite():
                return math.inf
        return sum(w * env.evaluate(lam) for w, env in self.components if w > 0)

    def _boundary_finite(self) -> bool:
        # finite at lam == domain_sup only if every positive-weight component is
        return all(math.isfinite(env.evaluate(self._domain_sup))
                   for w, env in self.components if w > 0)

    def _collapse(self):
        active = [(w, e) for w, e in self.components if w > 0]
        if all(isinstance(e, SubGaussian) for _, e in active):
            s2 = sum(w * e.sigma ** 2 for w, e in active)
            return SubGaussian(math.sqrt(s2))
        if all(isinstance(e, SubGamma) for _, e in active):
            cs = {e.c for _, e in active}
            if len(cs) == 1:
                s2 = sum(w * e.sigma2 for w, e in active)
                return SubGamma(s2, cs.pop())
        if all(isinstance(e, SubExponential) for _, e in active):
            s2 = sum(w * e.sigma ** 2 for w, e in active)
            return SubExponential(math.sqrt(s2), max(e.b for _, e in active))
        return None

    def conjugate(self, x: float) -> float:
        if self._collapsed is not None:
            return self._collapsed.conjugate(x)
        return self.conjugate_numeric(x)

    def inverse_conjugate(self, info: float) -> float:
        if self._collapsed is not None:
            return self._collapsed.inverse_conjugate(info)
        return self.inverse_conjugate_numeric(info)


def subexponential_piecewise_bound(sigma: float, b: float, info: float) -> float:
    """Piecewise closed form for the sub-exponential deviation scale.

    sigma*sqrt(2 I) for I <= sigma^2/(2b), else b I + sigma^2/(2 b^2).  Kept
    as printed for comparison; it matches the numeric inverse conjugate only
    at b = 1 (the numeric minimization is the canonical value).
    """
    if not sigma > 0 or not b > 0:
        raise ValueError("sigma and b must be positive")
    info = float(info)
    if info < 0:
        raise ValueError("information budget must be nonnegative")
    s2 = sigma * sigma
    if info <= s2 / (2.0 * b):
        return sigma * math.sqrt(2.0 * info)
    return b * info + s2 / (2.0 * b * b)
