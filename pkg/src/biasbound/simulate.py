"""Seeded Monte Carlo for selection bias, with extreme-value helpers.

Each trial t draws n i.i.d. coordinates from a measurement model via the
inverse-CDF transform of per-trial uniforms, applies a selection rule to
pick an index T, and records phi_T.  Trials use counter-based Philox
substreams keyed by (seed, trial), so results are bit-identical for any
worker count and any subset of trials.

Rules that depend only on the ordering of coordinates (argmax, argmin,
fixed, top-k) are applied to the uniforms directly: a strictly increasing
inverse CDF cannot change which index is selected, so only the selected and
probe uniforms ever pass through the (possibly expensive) inverse CDF.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from .cgf import CgfEnvelope, SubGamma, SubGaussian
from .divergence import (DiscreteJoint, alpha_mi_marginal_bound,
                         alpha_mutual_information, mutual_information)

__all__ = [
    "GaussianIID",
    "ExponentialIID",
    "HeavyTailIID",
    "CustomIID",
    "ArgMax",
    "ArgMin",
    "FixedIndex",
    "TopKUniform",
    "SoftMax",
    "sample",
    "run_experiment",
    "ExperimentResult",
    "extreme_norming_constant",
    "heavy_tail_beta_norm",
    "frechet_mean",
    "norming_constant",
    "tightness_sweep",
    "SweepRow",
    "sweep_to_csv",
    "SWEEP_CSV_HEADER",
]

_CHUNK = 1024  # fixed trial-chunk size: partial sums combine in chunk order


# ---------------------------------------------------------------------------
# measurement models

@dataclass(frozen=True)
class GaussianIID:
    """n i.i.d. Gaussian coordinates."""

    mu: float = 0.0
    sigma: float = 1.0
    n: int = 10

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    continuous = True

    @property
    def mean(self) -> float:
        return self.mu

    def inverse_cdf(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    @property
    def cgf_envelope(self) -> CgfEnvelope:
        return SubGaussian(self.sigma)

    @property
    def label(self) -> str:
        return f"gaussian(mu={self.mu:g},sigma={self.sigma:g})"


@dataclass(frozen=True)
class ExponentialIID:
    """n i.i.d. exponential coordinates with the given rate."""

    rate: float = 1.0
    n: int = 10

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    continuous = True

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def inverse_cdf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    @property
    def cgf_envelope(self) -> CgfEnvelope:
        # centered exponential is sub-gamma with variance 1/rate^2, scale 1/rate
        return SubGamma(1.0 / self.rate ** 2, 1.0 / self.rate)

    @property
    def label(self) -> str:
        return f"exponential(rate={self.rate:g})"


@dataclass(frozen=True)
class HeavyTailIID:
    """n i.i.d. draws with survival x0^beta (ln x0)^c / (x^beta (ln x)^c).

    Supported on [x0, inf) with x0 > e^(1/beta); beta > 1 keeps the mean
    finite and c > 1 keeps the beta-th moment finite (barely: the tail sits
    at the integrability edge, which is what makes the moment-route bound
    nearly tight for argmax selection).
    """

    beta: float = 3.0
    c: float = 2.0
    x0: float = math.e
    n: int = 10

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError("beta must be > 1")
        if not self.c > 1:
            raise ValueError("c must be > 1")
        if not self.x0 > math.exp(1.0 / self.beta):
            raise ValueError("x0 must exceed e**(1/beta)")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    continuous = True

    @property
    def _log_x0(self) -> float:
        return math.log(self.x0)

    @property
    def _log_k0(self) -> float:
        # K0 = x0^beta (ln x0)^c normalizes the survival function at x0
        return self.beta * self._log_x0 + self.c * math.log(self._log_x0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        above = x > self.x0
        xa = x[above]
        log_surv = self._log_k0 - self.beta * np.log(xa) - self.c * np.log(np.log(xa))
        out[above] = -np.expm1(log_surv)
        return out if out.shape else float(out)

    def inverse_cdf(self, u):
        """Quantile by bisection in y = ln x, where beta*y + c*ln(y) is monotone."""
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        if np.any(u < 0) or np.any(u >= 1):
            raise ValueError("inverse CDF is defined on [0, 1)")
        # solve beta*y + c*ln y = log_k0 - ln(1-u)
        target = self._log_k0 - np.log1p(-u)
        lo = np.full(u.shape, self._log_x0)
        hi = np.maximum(2.0 * lo, lo + 1.0)
        for _ in range(200):
            too_low = self.beta * hi + self.c * np.log(hi) < target
            if not np.any(too_low):
                break
            hi = np.where(too_low, 2.0 * hi, hi)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            high_side = self.beta * mid + self.c * np.log(mid) >= target
            hi = np.where(high_side, mid, hi)
            lo = np.where(high_side, lo, mid)
        y = 0.5 * (lo + hi)
        x = np.exp(y)
        if scalar:
            return float(x[0])
        return x

    @cached_property
    def mean(self) -> float:
        # E X = x0 + integral of the survival function; substitute y = ln x
        L = self._log_x0
        k0 = math.exp(self._log_k0)
        tail, _ = integrate.quad(
            lambda y: math.exp((1.0 - self.beta) * y) * y ** (-self.c),
            L, math.inf, epsrel=1e-12, limit=200)
        return self.x0 + k0 * tail

    @property
    def cgf_envelope(self) -> Optional[CgfEnvelope]:
        return None  # polynomial tail: no finite exponential moment

    @property
    def label(self) -> str:
        return f"heavytail(beta={self.beta:g},c={self.c:g},x0={self.x0:g})"


@dataclass(frozen=True)
class CustomIID:
    """User-supplied inverse CDF with a known mean."""

    inverse_cdf_fn: Callable
    mean_value: float
    n: int = 10
    continuous: bool = True
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def mean(self) -> float:
        return self.mean_value

    def inverse_cdf(self, u):
        return self.inverse_cdf_fn(np.asarray(u, dtype=float))

    @property
    def cgf_envelope(self) -> Optional[CgfEnvelope]:
        return None

    @property
    def label(self) -> str:
        return f"custom({self.name})"


# ---------------------------------------------------------------------------
# selection rules

@dataclass(frozen=True)
class ArgMax:
    deterministic = True
    needs_values = False
    label = "argmax"

    def select(self, v, rng) -> int:
        return int(np.argmax(v))  # ties resolve to the lowest index

    def conditional_probs(self, v) -> np.ndarray:
        q = np.zeros(len(v))
        q[int(np.argmax(v))] = 1.0
        return q


@dataclass(frozen=True)
class ArgMin:
    deterministic = True
    needs_values = False
    label = "argmin"

    def select(self, v, rng) -> int:
        return int(np.argmin(v))

    def conditional_probs(self, v) -> np.ndarray:
        q = np.zeros(len(v))
        q[int(np.argmin(v))] = 1.0
        return q


@dataclass(frozen=True)
class FixedIndex:
    index: int = 0
    deterministic = True
    needs_values = False

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("index must be nonnegative")

    @property
    def label(self) -> str:
        return f"fixed({self.index})"

    def select(self, v, rng) -> int:
        return self.index

    def conditional_probs(self, v) -> np.ndarray:
        q = np.zeros(len(v))
        q[self.index] = 1.0
        return q


@dataclass(frozen=True)
class TopKUniform:
    """Uniform choice among the k largest coordinates (ties: lowest index)."""

    k: int = 2
    deterministic = False
    needs_values = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def label(self) -> str:
        return f"topk({self.k})"

    def _top(self, v) -> np.ndarray:
        return np.argsort(-np.asarray(v), kind="stable")[:self.k]

    def select(self, v, rng) -> int:
        top = self._top(v)
        j = min(int(rng.random() * self.k), self.k - 1)
        return int(top[j])

    def conditional_probs(self, v) -> np.ndarray:
        q = np.zeros(len(v))
        q[self._top(v)] = 1.0 / self.k
        return q


@dataclass(frozen=True)
class SoftMax:
    """P(T = i) proportional to exp(phi_i / temperature)."""

    temperature: float = 1.0
    deterministic = False
    needs_values = True

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def label(self) -> str:
        return f"softmax({self.temperature:g})"

    def conditional_probs(self, v) -> np.ndarray:
        z = np.asarray(v, dtype=float) / self.temperature
        z = z - z.max()
        p = np.exp(z)
        return p / p.sum()

    def select(self, v, rng) -> int:
        p = self.conditional_probs(v)
        r = rng.random()
        return min(int(np.searchsorted(np.cumsum(p), r, side="right")), len(p) - 1)


# ---------------------------------------------------------------------------
# engine

def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, trial]))


def sample(model, rng: np.random.Generator) -> np.ndarray:
    """One draw of the model's n coordinates via the inverse-CDF transform."""
    return model.inverse_cdf(rng.random(model.n))


@dataclass(eq=False)
class ExperimentResult:
    """Outcome of a seeded selection experiment.

    ``i_plugin`` / ``i_alpha_plugin`` are plug-in estimates from the joint of
    (T, rank-binned probe coordinate); by data processing they lower-bound
    the true dependence.  ``i_rule`` / ``i_alpha_rule`` use the rule's known
    conditional distribution P(T | phi), which is sharp for randomized rules
    where the probe route is far below the truth.  ``analytic_i`` is exact
    and present only for deterministic rules on continuous i.i.d. models.
    """

    model_label: str
    rule_label: str
    n: int
    trials: int
    seed: int
    bins: int
    probe: int
    selected_mean: float
    bias: float
    stderr: float
    t_counts: np.ndarray
    i_plugin: float
    i_alpha_plugin: Dict[str, float]
    i_rule: Optional[float]
    i_alpha_rule: Optional[Dict[str, float]]
    analytic_i: Optional[float]
    analytic_i_alpha: Optional[Dict[str, float]]

    def best_i(self) -> Optional[float]:
        """Best available dependence value: analytic, else rule-based, else plug-in."""
        if self.analytic_i is not None:
            return self.analytic_i
        if self.i_rule is not None:
            return self.i_rule
        return self.i_plugin

    def best_i_alpha(self) -> Dict[str, float]:
        if self.analytic_i_alpha is not None:
            return self.analytic_i_alpha
        if self.i_alpha_rule is not None:
            return self.i_alpha_rule
        return self.i_alpha_plugin


def _alpha_key(alpha: float) -> str:
    return f"{float(alpha):g}"


def _chunk_ranges(trials: int) -> List[Tuple[int, int]]:
    return [(lo, min(lo + _CHUNK, trials)) for lo in range(0, trials, _CHUNK)]


def run_experiment(model, rule, trials: int, seed: int = 0, *,
                   bins: Optional[int] = None, probe: int = 0,
                   alphas: Sequence[float] = (2.0,),
                   workers: int = 1) -> ExperimentResult:
    """Run a seeded selection experiment and estimate bias and dependence.

    bins defaults to ceil(trials^(1/3)) (at least 2) equal-mass rank bins of
    the probe coordinate.  Identical (model, rule, trials, seed, bins) give
    bit-identical results for any ``workers``.
    """
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    n = model.n
    probe = int(probe)
    if probe < 0 or probe >= n:
        raise ValueError("probe index out of range")
    if bins is None:
        bins = max(2, math.ceil(trials ** (1.0 / 3.0)))
    bins = int(bins)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if int(workers) < 1:
        raise ValueError("workers must be >= 1")
    if isinstance(rule, FixedIndex) and rule.index >= n:
        raise ValueError("fixed index out of range")
    if isinstance(rule, TopKUniform) and rule.k > n:
        raise ValueError("top-k rule needs k <= n")

    t_idx = np.empty(trials, dtype=np.int64)
    u_sel = np.empty(trials, dtype=float)
    u_probe = np.empty(trials, dtype=float)
    randomized = not rule.deterministic

    def main_chunk(lo: int, hi: int):
        q_sum = np.zeros(n) if randomized else None
        q_ln_q = 0.0
        for t in range(lo, hi):
            rng = _trial_rng(seed, t)
            u = rng.random(n)
            v = model.inverse_cdf(u) if rule.needs_values else u
            k = rule.select(v, rng)
            t_idx[t] = k
            u_sel[t] = u[k]
            u_probe[t] = u[probe]
            if randomized:
                q = rule.conditional_probs(v)
                q_sum += q
                q_ln_q += float(np.sum(special.xlogy(q, q)))
        return q_sum, q_ln_q

    partials = _run_chunks(main_chunk, trials, workers)

    phi_sel = np.asarray(model.inverse_cdf(u_sel), dtype=float)
    deviations = phi_sel - model.mean
    bias = float(np.mean(deviations))
    selected_mean = float(np.mean(phi_sel))
    stderr = float(np.std(deviations, ddof=1) / math.sqrt(trials)) if trials > 1 \
        else math.nan

    # plug-in dependence from the (T, rank-binned probe) joint
    order = np.argsort(u_probe, kind="stable")
    ranks = np.empty(trials, dtype=np.int64)
    ranks[order] = np.arange(trials, dtype=np.int64)
    bin_idx = ranks * bins // trials
    counts = np.zeros((n, bins), dtype=np.int64)
    np.add.at(counts, (t_idx, bin_idx), 1)
    joint = DiscreteJoint(counts / trials)
    i_plugin = mutual_information(joint)
    i_alpha_plugin = {_alpha_key(a): alpha_mutual_information(joint, a)
                      for a in alphas}

    t_counts = np.bincount(t_idx, minlength=n)
    p_hat = t_counts / trials

    if randomized:
        q_sum = np.zeros(n)
        q_ln_q = 0.0
        for qs, ql in partials:
            q_sum += qs
            q_ln_q += ql
        p_bar = q_sum / trials
        i_rule = max(0.0, -float(np.sum(special.xlogy(p_bar, p_bar)))
                     + q_ln_q / trials)
        i_alpha_rule = _randomized_alpha_pass(
            model, rule, trials, seed, p_bar, alphas, workers)
    else:
        i_rule = max(0.0, -float(np.sum(special.xlogy(p_hat, p_hat))))
        i_alpha_rule = {_alpha_key(a): alpha_mi_marginal_bound(p_hat, a)
                        for a in alphas}

    analytic_i = None
    analytic_i_alpha = None
    if getattr(model, "continuous", False):
        if isinstance(rule, (ArgMax, ArgMin)):
            analytic_i = math.log(n)
            uniform = np.full(n, 1.0 / n)
            analytic_i_alpha = {_alpha_key(a): alpha_mi_marginal_bound(uniform, a)
                                for a in alphas}
        elif isinstance(rule, FixedIndex):
            analytic_i = 0.0
            analytic_i_alpha = {_alpha_key(a): 0.0 for a in alphas}

    return ExperimentResult(
        model_label=model.label, rule_label=rule.label, n=n, trials=trials,
        seed=seed, bins=bins, probe=probe, selected_mean=selected_mean,
        bias=bias, stderr=stderr, t_counts=t_counts,
        i_plugin=i_plugin, i_alpha_plugin=i_alpha_plugin,
        i_rule=i_rule, i_alpha_rule=i_alpha_rule,
        analytic_i=analytic_i, analytic_i_alpha=analytic_i_alpha)


def _run_chunks(chunk_fn, trials: int, workers: int):
    ranges = _chunk_ranges(trials)
    if int(workers) <= 1:
        return [chunk_fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        futures = [pool.submit(chunk_fn, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]  # combined in chunk order


def _randomized_alpha_pass(model, rule, trials, seed, p_bar, alphas, workers):
    """E_phi sum_i p_bar_i |q_i/p_bar_i - 1|^alpha via a deterministic replay."""
    support = p_bar > 0
    ps = p_bar[support]
    alphas = list(alphas)

    def chunk(lo: int, hi: int):
        acc = np.zeros(len(alphas))
        for t in range(lo, hi):
            rng = _trial_rng(seed, t)
            u = rng.random(model.n)
            v = model.inverse_cdf(u) if rule.needs_values else u
            q = rule.conditional_probs(v)[support]
            ratio_dev = np.abs(q / ps - 1.0)
            for j, a in enumerate(alphas):
                acc[j] += float(np.sum(ps * ratio_dev ** a))
        return acc

    totals = np.zeros(len(alphas))
    for acc in _run_chunks(chunk, trials, workers):
        totals += acc
    return {_alpha_key(a): max(0.0, float(totals[j]) / trials)
            for j, a in enumerate(alphas)}


# ---------------------------------------------------------------------------
# extreme-value helpers

def extreme_norming_constant(model: HeavyTailIID, n: int) -> float:
    """a_n with survival(a_n) = 1/n, i.e. the (1 - 1/n)-quantile; a_1 = x0."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(model.inverse_cdf(1.0 - 1.0 / n))


def heavy_tail_beta_norm(model: HeavyTailIID, s: Optional[float] = None) -> float:
    """(E X^s)^(1/s) for the heavy-tail model, s <= beta (default s = beta).

    Uses E X^s = x0^s + s * integral of x^(s-1) * survival(x), computed with
    the substitution y = ln x, which flattens the log-polynomial tail.
    """
    s = model.beta if s is None else float(s)
    if not 0 < s <= model.beta:
        raise ValueError("moment order must lie in (0, beta]")
    L = model._log_x0
    k0 = math.exp(model._log_k0)
    tail, _ = integrate.quad(
        lambda y: math.exp((s - model.beta) * y) * y ** (-model.c),
        L, math.inf, epsrel=1e-9, limit=200)
    return (model.x0 ** s + s * k0 * tail) ** (1.0 / s)


def frechet_mean(beta: float) -> float:
    """Gamma(1 - 1/beta): the mean of the standard Frechet(beta) limit."""
    beta = float(beta)
    if beta <= 1:
        raise ValueError("beta must be > 1 for a finite Frechet mean")
    return float(special.gamma(1.0 - 1.0 / beta))


def norming_constant(model, n: int) -> float:
    """Display norming a_n for expected-maximum ratios, per model family."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(model, HeavyTailIID):
        return extreme_norming_constant(model, n)
    if isinstance(model, GaussianIID):
        return model.mu + model.sigma * math.sqrt(2.0 * math.log(n))
    if n == 1:
        lo = model.inverse_cdf(np.array([0.0]))
        return float(lo[0]) if np.ndim(lo) else float(lo)
    return float(np.asarray(model.inverse_cdf(np.array([1.0 - 1.0 / n])))[0])


# ---------------------------------------------------------------------------
# tightness sweep

SWEEP_CSV_HEADER = "n,empirical_bias,stderr,a_n,frechet_ratio,bound_pnorm,bound_mgf,ratio"


@dataclass(frozen=True)
class SweepRow:
    n: int
    empirical_bias: float
    stderr: float
    a_n: float
    frechet_ratio: float
    bound_pnorm: float
    bound_mgf: float
    ratio: float


def _sweep_pnorm_bound(model, n: int) -> float:
    if isinstance(model, HeavyTailIID):
        alpha = model.beta / (model.beta - 1.0)
        norm = heavy_tail_beta_norm(model)
        return 2.0 ** (1.0 / alpha) * norm * n ** (1.0 / model.beta)
    if isinstance(model, GaussianIID):
        return model.sigma * math.sqrt(n - 1.0)
    if isinstance(model, ExponentialIID):
        return math.sqrt(n - 1.0) / model.rate
    return math.nan


def tightness_sweep(model, n_values: Sequence[int], trials: int, seed: int = 0,
                    *, workers: int = 1) -> List[SweepRow]:
    """Argmax selection across sample sizes, with bounds and norming ratios.

    ``ratio`` compares the MGF bound (when the model has an envelope, else
    the moment bound) to the empirical bias, reported only when the bias is
    positive beyond three standard errors.
    """
    rows = []
    rule = ArgMax()
    for n in n_values:
        m = dataclasses.replace(model, n=int(n))
        res = run_experiment(m, rule, trials, seed, workers=workers)
        a_n = norming_constant(m, n)
        env = m.cgf_envelope
        bound_mgf = env.inverse_conjugate(math.log(n)) if env is not None else math.nan
        bound_pnorm = _sweep_pnorm_bound(m, int(n))
        primary = bound_mgf if math.isfinite(bound_mgf) else bound_pnorm
        if math.isfinite(res.stderr) and res.bias > 3.0 * res.stderr:
            ratio = primary / res.bias
        else:
            ratio = math.nan
        rows.append(SweepRow(
            n=int(n), empirical_bias=res.bias, stderr=res.stderr, a_n=a_n,
            frechet_ratio=res.selected_mean / a_n, bound_pnorm=bound_pnorm,
            bound_mgf=bound_mgf, ratio=ratio))
    return rows


def _csv_float(x: float) -> str:
    return "nan" if not math.isfinite(x) else repr(float(x))


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(",".join([
            str(r.n), _csv_float(r.empirical_bias), _csv_float(r.stderr),
            _csv_float(r.a_n), _csv_float(r.frechet_ratio),
            _csv_float(r.bound_pnorm), _csv_float(r.bound_mgf),
            _csv_float(r.ratio)]))
    return "\n".join(lines) + "\n"
