"""Finite phi-divergences and dependence measures for discrete joints.

All information is measured in nats.  Zero-mass conventions: 0 * phi(0/0) = 0,
and a cell with q = 0 < p contributes p * slope_at_infinity (infinite for
superlinear generators).
"""

from __future__ import annotations

import csv
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

__all__ = [
    "PhiGenerator",
    "kl_generator",
    "abs_power_generator",
    "custom_generator",
    "DiscreteJoint",
    "phi_divergence",
    "mutual_information",
    "alpha_mutual_information",
    "alpha_mi_marginal_bound",
    "alpha_mi_cardinality_bound",
    "phi_mi_marginal_bound",
    "load_probability_vector",
    "save_probability_vector",
]

_MASS_ATOL = 1e-12


class PhiGenerator:
    """Convex generator phi with phi(1) = 0 for f-divergences.

    Parameters
    ----------
    fn : callable
        Vectorized map on nonnegative arrays.
    phi_at_zero : float
        phi(0), possibly +inf.
    slope_at_infinity : float
        lim phi(x)/x as x -> inf; +inf for superlinear generators.
    name : str
    """

    def __init__(self, fn: Callable, phi_at_zero: float,
                 slope_at_infinity: float = math.inf, name: str = "custom"):
        self._fn = fn
        self.phi_at_zero = float(phi_at_zero)
        self.slope_at_infinity = float(slope_at_infinity)
        self.name = name

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    def __repr__(self):
        return f"PhiGenerator({self.name})"


def kl_generator() -> PhiGenerator:
    """phi(x) = x ln x - x + 1 (KL divergence in nats)."""
    def fn(x):
        return special.xlogy(x, x) - x + 1.0
    return PhiGenerator(fn, phi_at_zero=1.0, slope_at_infinity=math.inf, name="kl")


def abs_power_generator(alpha: float) -> PhiGenerator:
    """phi_alpha(x) = |x - 1|**alpha for alpha >= 1."""
    alpha = float(alpha)
    if alpha < 1:
        raise ValueError("alpha must be >= 1")

    def fn(x):
        return np.power(np.abs(x - 1.0), alpha)

    slope = math.inf if alpha > 1 else 1.0
    return PhiGenerator(fn, phi_at_zero=1.0, slope_at_infinity=slope,
                        name=f"abs_power({alpha:g})")


def custom_generator(fn: Callable, phi_at_zero: float,
                     slope_at_infinity: float = math.inf,
                     name: str = "custom") -> PhiGenerator:
    """Wrap a user generator, checking phi(1) = 0 and sampled convexity."""
    gen = PhiGenerator(fn, phi_at_zero, slope_at_infinity, name)
    at_one = float(gen(1.0))
    if abs(at_one) > 1e-12:
        raise ValueError(f"phi(1) must be 0, got {at_one!r}")
    grid = np.linspace(1e-6, 8.0, 161)
    vals = gen(grid)
    second = vals[:-2] - 2.0 * vals[1:-1] + vals[2:]
    if np.any(second < -1e-9 * (1.0 + np.abs(vals[1:-1]))):
        raise ValueError("generator fails sampled convexity check")
    return gen


def _as_measure(x) -> np.ndarray:
    if isinstance(x, DiscreteJoint):
        return x.p
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("measure entries must be nonnegative")
    return arr


def _as_prob_vector(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("expected a 1-D probability vector")
    if np.any(p < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities must sum to 1, got {p.sum()!r}")
    return p


class DiscreteJoint:
    """Immutable finite joint distribution with cached marginals.

    The first axis indexes the selected coordinate T, the second the probe
    symbol.  Entries must be nonnegative and sum to 1 within 1e-12.
    """

    def __init__(self, p, row_labels: Optional[Sequence[str]] = None,
                 col_labels: Optional[Sequence[str]] = None):
        p = np.array(p, dtype=float)
        if p.ndim != 2:
            raise ValueError("joint table must be 2-D")
        if np.any(p < 0):
            raise ValueError("joint table has negative entries")
        total = p.sum()
        if abs(total - 1.0) > _MASS_ATOL:
            raise ValueError(f"joint table mass must be 1 within 1e-12, got {total!r}")
        p.setflags(write=False)
        self.p = p
        self.p_rows = p.sum(axis=1)
        self.p_cols = p.sum(axis=0)
        self.row_labels = tuple(row_labels) if row_labels is not None else tuple(
            f"t{i}" for i in range(p.shape[0]))
        self.col_labels = tuple(col_labels) if col_labels is not None else tuple(
            f"b{j}" for j in range(p.shape[1]))
        if len(self.row_labels) != p.shape[0] or len(self.col_labels) != p.shape[1]:
            raise ValueError("label lengths must match the table shape")

    @property
    def n_rows(self) -> int:
        return self.p.shape[0]

    @property
    def n_cols(self) -> int:
        return self.p.shape[1]

    def product_of_marginals(self) -> np.ndarray:
        return np.outer(self.p_rows, self.p_cols)

    def merge_cols(self, j: int, k: int) -> "DiscreteJoint":
        """Coarsen the probe axis by pooling columns j and k (j keeps the slot)."""
        if j == k:
            raise ValueError("cannot merge a column with itself")
        q = np.array(self.p)
        q[:, j] = q[:, j] + q[:, k]
        q = np.delete(q, k, axis=1)
        labels = list(self.col_labels)
        labels[j] = f"{labels[j]}+{labels[k]}"
        del labels[k]
        return DiscreteJoint(q, self.row_labels, labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([""] + list(self.col_labels))
            for label, row in zip(self.row_labels, self.p):
                writer.writerow([label] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "DiscreteJoint":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or len(header) < 2:
                raise ValueError(f"{path}: expected a header row with column labels")
            col_labels = [c.strip() for c in header[1:]]
            row_labels, rows = [], []
            for i, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(col_labels) + 1:
                    raise ValueError(f"{path}: line {i}: expected {len(col_labels) + 1} columns")
                row_labels.append(row[0].strip())
                try:
                    rows.append([float(c) for c in row[1:]])
                except ValueError:
                    raise ValueError(f"{path}: line {i}: non-numeric entry") from None
        if not rows:
            raise ValueError(f"{path}: no data rows")
        return cls(np.array(rows), row_labels, col_labels)


def phi_divergence(p, q, gen: PhiGenerator) -> float:
    """D_phi(p || q) = sum_i q_i phi(p_i / q_i) over matching finite measures."""
    p = _as_measure(p)
    q = _as_measure(q)
    if p.shape != q.shape:
        raise ValueError("p and q must have the same shape")
    p = p.ravel()
    q = q.ravel()
    pos = q > 0
    total = float(np.sum(q[pos] * gen(p[pos] / q[pos])))
    escaped = float(p[~pos].sum())
    if escaped > 0:
        if math.isinf(gen.slope_at_infinity):
            return math.inf
        total += gen.slope_at_infinity * escaped
    return total


def mutual_information(joint: DiscreteJoint) -> float:
    """I(T; probe) in nats, the KL divergence from the product of marginals."""
    j = joint.p
    prod = joint.product_of_marginals()
    mask = j > 0
    val = float(np.sum(j[mask] * (np.log(j[mask]) - np.log(prod[mask]))))
    return max(val, 0.0)


def alpha_mutual_information(joint: DiscreteJoint, alpha: float) -> float:
    """I_alpha(T; probe): the |x-1|^alpha divergence from the product measure."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    val = phi_divergence(joint.p, joint.product_of_marginals(),
                         abs_power_generator(alpha))
    return max(val, 0.0)


def alpha_mi_marginal_bound(p_t, alpha: float) -> float:
    """Largest possible I_alpha given the T-marginal p_t.

    Equals 1 + sum_i p_i^2 (|1/p_i - 1|^alpha - 1); attained exactly when T
    is a deterministic function of the other coordinate.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    p = _as_prob_vector(p_t)
    pos = p[p > 0]
    val = 1.0 + float(np.sum(pos ** 2 * (np.abs(1.0 / pos - 1.0) ** alpha - 1.0)))
    return max(val, 0.0)


def alpha_mi_cardinality_bound(n: int, alpha: float) -> float:
    """Worst-case I_alpha over all T-marginals on n symbols, for alpha in [1, 2].

    ((n-1)/n) * ((n-1)^(alpha-1) + 1); the uniform marginal attains it.
    Outside alpha in [1, 2] the uniform marginal is no longer extremal, so
    the formula is refused rather than silently wrong.
    """
    if not (1.0 <= alpha <= 2.0):
        raise ValueError("cardinality bound requires 1 <= alpha <= 2")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 0.0
    return (n - 1) / n * ((n - 1) ** (alpha - 1.0) + 1.0)


def phi_mi_marginal_bound(p_t, gen: PhiGenerator) -> float:
    """Largest possible D_phi(joint || product) given the T-marginal p_t.

    phi(0) (1 - sum p_i^2) + sum p_i^2 phi(1/p_i), requiring finite phi(0).
    For the KL generator this is exactly the Shannon entropy of p_t.
    """
    if not math.isfinite(gen.phi_at_zero):
        raise ValueError("marginal bound needs a generator with finite phi(0)")
    p = _as_prob_vector(p_t)
    pos = p[p > 0]
    val = gen.phi_at_zero * (1.0 - float(np.sum(p ** 2)))
    val += float(np.sum(pos ** 2 * gen(1.0 / pos)))
    return max(val, 0.0)


def load_probability_vector(path) -> np.ndarray:
    """Read a one-column CSV (header ``p``) as a probability vector."""
    vals = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for i, row in enumerate(reader, start=2):
            if not row or not row[0].strip():
                continue
            try:
                vals.append(float(row[0]))
            except ValueError:
                raise ValueError(f"{path}: line {i}: non-numeric entry") from None
    return _as_prob_vector(np.array(vals))


def save_probability_vector(p, path) -> None:
    p = _as_prob_vector(p)
    with open(path, "w", newline="") as fh:
        fh.write("p\n")
        for v in p:
            fh.write(repr(float(v)) + "\n")
