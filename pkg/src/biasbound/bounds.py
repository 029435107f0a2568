"""Bias bounds for adaptively selected means, and expected-max baselines.

The selected-mean bias E[phi_T - mu_T] is controlled two ways:

* MGF route (one-sided): a mixture envelope psi_bar(lam) = E_T psi_T(lam)
  gives bias <= (psi_bar*)^{-1}(I) at information budget I = I(T; data).
* Moment route (two-sided): |bias| <= ||sigma_T||_beta * I_alpha^{1/alpha}
  with 1/alpha + 1/beta = 1, where sigma_i caps the beta-th moment of the
  i-th centered coordinate.

Expected-maximum baselines (the non-adaptive worst case) are included for
calibration; they bound E[max_i Z_i], not the bias of a general rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .cgf import CgfEnvelope, MixedEnvelope, SubExponential, SubGamma, \
    subexponential_piecewise_bound
from .orlicz import OrliczFunction

__all__ = [
    "weighted_beta_norm",
    "mgf_bound",
    "pnorm_bound",
    "pnorm_uniform_bound",
    "UniformPnormBound",
    "gaussian_bound",
    "subgamma_bound",
    "subexponential_bound",
    "SubexponentialBound",
    "max_inequality_cgf_bound",
    "max_inequality_pnorm_bound",
    "max_inequality_orlicz_bound",
    "conjugate_exponent",
    "BoundReport",
]


def conjugate_exponent(beta: float) -> float:
    """alpha with 1/alpha + 1/beta = 1; beta = inf gives alpha = 1."""
    beta = float(beta)
    if beta <= 1:
        raise ValueError("beta must be > 1")
    if math.isinf(beta):
        return 1.0
    return beta / (beta - 1.0)


def _sigma_vector(sigmas, p_t=None) -> Tuple[np.ndarray, np.ndarray]:
    s = np.atleast_1d(np.asarray(sigmas, dtype=float))
    if np.any(s < 0):
        raise ValueError("sigma values must be nonnegative")
    if p_t is None:
        p = np.full(s.size, 1.0 / s.size)
    else:
        p = np.asarray(p_t, dtype=float)
        if s.size == 1 and p.size > 1:
            s = np.full(p.size, s[0])
        if p.shape != s.shape:
            raise ValueError("p_t length must match the number of sigma values")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("p_t must be a probability vector")
    return s, p


def weighted_beta_norm(sigmas, p_t=None, beta: float = 2.0) -> float:
    """||sigma_T||_beta = (sum_i p_i sigma_i^beta)^(1/beta); max over the
    support for beta = inf."""
    beta = float(beta)
    if beta < 1:
        raise ValueError("beta must be >= 1")
    s, p = _sigma_vector(sigmas, p_t)
    if math.isinf(beta):
        sup = s[p > 0]
        return float(sup.max()) if sup.size else 0.0
    return float(np.sum(p * s ** beta) ** (1.0 / beta))


def mgf_bound(envelopes: Sequence[CgfEnvelope], p_t, info: float) -> float:
    """Mixture-envelope bound (psi_bar*)^{-1}(info) with psi_bar = E_T psi_T."""
    p = np.asarray(p_t, dtype=float)
    envelopes = list(envelopes)
    if p.ndim != 1 or len(envelopes) != p.size:
        raise ValueError("p_t length must match the number of envelopes")
    mix = MixedEnvelope(list(zip(p.tolist(), envelopes)))
    return mix.inverse_conjugate(info)


def pnorm_bound(sigmas, p_t, beta: float, i_alpha: float) -> float:
    """Moment-route bound ||sigma_T||_beta * i_alpha^(1/alpha) on |bias|."""
    if i_alpha < 0:
        raise ValueError("i_alpha must be nonnegative")
    alpha = conjugate_exponent(beta)
    return weighted_beta_norm(sigmas, p_t, beta) * i_alpha ** (1.0 / alpha)


@dataclass(frozen=True)
class UniformPnormBound:
    value: float
    loose: float


def pnorm_uniform_bound(sigmas, beta: float, n: int, p_t=None) -> UniformPnormBound:
    """Marginal-free cap on the moment-route bound over all joints on n cells.

    beta = 2 gives ||sigma||_2 sqrt(n-1); beta in (2, inf] gives
    ||sigma||_beta (1 + n^(alpha-1))^(1/alpha) together with the looser
    2^(1/alpha) ||sigma||_beta n^(1/beta).  No uniform cap exists for
    beta < 2, so that range is refused.
    """
    beta = float(beta)
    if beta < 2:
        raise ValueError("no uniform bound exists for beta < 2")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    alpha = conjugate_exponent(beta)
    norm = weighted_beta_norm(sigmas, p_t, beta)
    if beta == 2.0:
        value = norm * math.sqrt(n - 1.0)
    else:
        value = norm * (1.0 + n ** (alpha - 1.0)) ** (1.0 / alpha)
    n_pow = 1.0 if math.isinf(beta) else n ** (1.0 / beta)
    loose = 2.0 ** (1.0 / alpha) * norm * n_pow
    return UniformPnormBound(value=value, loose=loose)


def gaussian_bound(sigmas, info: float, p_t=None) -> float:
    """Sub-Gaussian closed form ||sigma_T||_2 * sqrt(2 * info)."""
    if info < 0:
        raise ValueError("information budget must be nonnegative")
    return weighted_beta_norm(sigmas, p_t, 2.0) * math.sqrt(2.0 * info)


def subgamma_bound(sigma2: float, c: float, info: float) -> float:
    """Sub-gamma closed form sqrt(2 sigma2 info) + c info."""
    return SubGamma(sigma2, c).inverse_conjugate(info)


@dataclass(frozen=True)
class SubexponentialBound:
    canonical: float
    piecewise: float


def subexponential_bound(sigma: float, b: float, info: float) -> SubexponentialBound:
    """Sub-exponential deviation scale at budget info.

    ``canonical`` is the exact minimization of (psi(lam) + info)/lam over the
    truncated domain; ``piecewise`` is the printed closed form, which agrees
    only at b = 1.
    """
    env = SubExponential(sigma, b)
    return SubexponentialBound(
        canonical=env.inverse_conjugate(info),
        piecewise=subexponential_piecewise_bound(sigma, b, info),
    )


class _PointwiseMax(CgfEnvelope):
    def __init__(self, envelopes: Sequence[CgfEnvelope]):
        if not envelopes:
            raise ValueError("need at least one envelope")
        self._envs = tuple(envelopes)
        self._domain = min(e.domain_sup for e in self._envs)

    @property
    def domain_sup(self) -> float:
        return self._domain

    def evaluate(self, lam: float) -> float:
        return max(e.evaluate(lam) for e in self._envs)


def max_inequality_cgf_bound(envelopes: Sequence[CgfEnvelope], n: int) -> float:
    """Chernoff baseline for E[max of n coordinates]: (max_i psi_i)*^{-1}(ln n)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return _PointwiseMax(list(envelopes)).inverse_conjugate_numeric(math.log(n)) \
        if len(list(envelopes)) > 1 else list(envelopes)[0].inverse_conjugate(math.log(n))


def max_inequality_pnorm_bound(sigma_max: float, beta: float, n: int) -> float:
    """Moment baseline n^(1/beta) * sigma_max for E[max |Z_i|]."""
    if sigma_max < 0:
        raise ValueError("sigma_max must be nonnegative")
    beta = float(beta)
    if beta < 1:
        raise ValueError("beta must be >= 1")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    n_pow = 1.0 if math.isinf(beta) else n ** (1.0 / beta)
    return n_pow * sigma_max


def max_inequality_orlicz_bound(sigma: float, psi: OrliczFunction, n: int) -> float:
    """Orlicz baseline sigma * psi^{-1}(n) for E[max |Z_i|] under a psi-norm cap."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return sigma * psi.inverse(float(n))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, np.integer):
        obj = int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


@dataclass
class BoundReport:
    """Assembled record of bounds, empirical bias, and dependence estimates.

    ``bounds`` entries carry a ``side`` label: moment-route bounds control
    |bias| (two_sided), MGF-route bounds control the signed upper tail
    (upper), and expected-max baselines control E[max] (expected_max).
    Ratios bound/bias are reported only when the empirical bias is positive
    beyond three standard errors; dominance verdicts allow that slack.
    """

    meta: Dict = field(default_factory=dict)
    empirical: Optional[Dict] = None          # {"bias": float, "stderr": float}
    dependence: Optional[Dict] = None         # {"I": float, "I_alpha": {str: float}}
    bounds: List[Dict] = field(default_factory=list)

    def add_bound(self, name: str, value: float, side: str = "two_sided") -> None:
        self.bounds.append({"name": name, "value": float(value), "side": side})

    def _bias_resolved(self) -> Tuple[Optional[float], Optional[float]]:
        if not self.empirical:
            return None, None
        return self.empirical.get("bias"), self.empirical.get("stderr")

    def ratios(self) -> List[Optional[float]]:
        bias, stderr = self._bias_resolved()
        out: List[Optional[float]] = []
        for entry in self.bounds:
            if bias is None or stderr is None or not bias > 3.0 * stderr:
                out.append(None)
            else:
                out.append(entry["value"] / bias)
        return out

    def to_dict(self) -> Dict:
        bias, stderr = self._bias_resolved()
        bounds_out = []
        for entry in self.bounds:
            e = dict(entry)
            if bias is not None and stderr is not None:
                e["dominates"] = bool(entry["value"] >= bias - 3.0 * stderr)
            bounds_out.append(e)
        return _json_safe({
            "meta": self.meta,
            "empirical": self.empirical,
            "dependence": self.dependence,
            "bounds": bounds_out,
            "ratios": self.ratios(),
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Flat single-row CSV: meta columns, empirical, I, one column per bound."""
        cols: List[str] = []
        vals: List[str] = []

        def put(key, value):
            cols.append(key)
            if isinstance(value, float):
                vals.append("nan" if not math.isfinite(value) else repr(value))
            else:
                vals.append("" if value is None else str(value))

        for k, v in self.meta.items():
            put(str(k), v)
        bias, stderr = self._bias_resolved()
        put("bias", bias if bias is None else float(bias))
        put("stderr", stderr if stderr is None else float(stderr))
        if self.dependence:
            i_val = self.dependence.get("I")
            put("I", i_val if i_val is None else float(i_val))
            for a, v in (self.dependence.get("I_alpha") or {}).items():
                put(f"I_alpha_{a}", float(v))
        for entry, ratio in zip(self.bounds, self.ratios()):
            put(f"bound_{entry['name']}", float(entry["value"]))
            put(f"ratio_{entry['name']}", ratio if ratio is None else float(ratio))
        return ",".join(cols) + "\n" + ",".join(vals) + "\n"
