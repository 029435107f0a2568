"""Command-line interface: bound, simulate, sweep, estimate, norms.

Options may come from flags or from a flat ``key = value`` config file
(``--config``); explicit flags win over the file, the file wins over
defaults.  Exit codes: 0 success, 2 configuration/validation error
(line-anchored for config files), 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from typing import Dict, List, Optional

import numpy as np

from . import bounds as bnd
from . import divergence as dv
from . import orlicz as orz
from . import simulate as sim
from .cgf import Tabulated

__all__ = ["main", "RunConfig", "ConfigError"]


class ConfigError(Exception):
    pass


def _parse_floats(s: str) -> List[float]:
    try:
        return [float(x) for x in str(s).split(",") if x.strip() != ""]
    except ValueError:
        raise ValueError(f"expected comma-separated floats, got {s!r}") from None


def _parse_ints(s: str) -> List[int]:
    try:
        return [int(x) for x in str(s).split(",") if x.strip() != ""]
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {s!r}") from None


def _parse_bool(s: str) -> bool:
    t = str(s).strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


# key -> (parse, serialize); every config key and CLI option lives here
_KEY_TYPES = {
    "seed": (int, str),
    "out": (str, str),
    "format": (str, str),
    "family": (str, str),
    "sigma": (_parse_floats, lambda v: ",".join(repr(float(x)) for x in v)),
    "sigma2": (float, lambda v: repr(float(v))),
    "c": (float, lambda v: repr(float(v))),
    "b": (float, lambda v: repr(float(v))),
    "beta": (float, lambda v: repr(float(v))),
    "info": (float, lambda v: repr(float(v))),
    "i_alpha": (float, lambda v: repr(float(v))),
    "n": (int, str),
    "uniform": (_parse_bool, lambda v: "true" if v else "false"),
    "p_t": (str, str),
    "joint": (str, str),
    "envelope": (str, str),
    "model": (str, str),
    "mu": (float, lambda v: repr(float(v))),
    "rate": (float, lambda v: repr(float(v))),
    "x0": (float, lambda v: repr(float(v))),
    "rule": (str, str),
    "trials": (int, str),
    "bins": (int, str),
    "probe": (int, str),
    "alphas": (_parse_floats, lambda v: ",".join(repr(float(x)) for x in v)),
    "workers": (int, str),
    "n_list": (_parse_ints, lambda v: ",".join(str(int(x)) for x in v)),
    "data": (str, str),
    "psi": (str, str),
}


@dataclass
class RunConfig:
    """Typed option bag shared by the config file and the CLI flags."""

    seed: Optional[int] = None
    out: Optional[str] = None
    format: Optional[str] = None
    family: Optional[str] = None
    sigma: Optional[List[float]] = None
    sigma2: Optional[float] = None
    c: Optional[float] = None
    b: Optional[float] = None
    beta: Optional[float] = None
    info: Optional[float] = None
    i_alpha: Optional[float] = None
    n: Optional[int] = None
    uniform: Optional[bool] = None
    p_t: Optional[str] = None
    joint: Optional[str] = None
    envelope: Optional[str] = None
    model: Optional[str] = None
    mu: Optional[float] = None
    rate: Optional[float] = None
    x0: Optional[float] = None
    rule: Optional[str] = None
    trials: Optional[int] = None
    bins: Optional[int] = None
    probe: Optional[int] = None
    alphas: Optional[List[float]] = None
    workers: Optional[int] = None
    n_list: Optional[List[int]] = None
    data: Optional[str] = None
    psi: Optional[str] = None

    def to_text(self) -> str:
        """Serialize the non-empty options as ``key = value`` lines."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_KEY_TYPES[f.name][1](v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls()
        for i, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}: line {i}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _KEY_TYPES:
                raise ConfigError(f"{source}: line {i}: unknown key {key!r}")
            try:
                setattr(cfg, key, _KEY_TYPES[key][0](value))
            except ValueError as exc:
                raise ConfigError(f"{source}: line {i}: invalid value for {key!r}: {exc}")
        return cfg

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}")
        return cls.from_text(text, source=path)

    def merged_under(self, override: "RunConfig") -> "RunConfig":
        """New config taking override's non-None values, else self's."""
        out = RunConfig()
        for f in fields(self):
            v = getattr(override, f.name)
            setattr(out, f.name, v if v is not None else getattr(self, f.name))
        return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--config", default=None, help="flat key = value config file")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="biasbound",
        description="Bias bounds for adaptive data exploration, with Monte Carlo checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate closed-form / numeric bias bounds")
    _add_common(p)
    p.add_argument("--family", choices=["gaussian", "subgamma", "subexponential",
                                        "pnorm", "tabulated"], default=None)
    p.add_argument("--sigma", type=_parse_floats, default=None,
                   help="sigma value or comma-separated list")
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--I", "--info", dest="info", type=float, default=None,
                   help="information budget in nats")
    p.add_argument("--i-alpha", dest="i_alpha", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--uniform", action="store_true", default=None,
                   help="marginal-free bound over all joints on n cells")
    p.add_argument("--p-t", dest="p_t", default=None,
                   help="CSV file with the selection marginal")
    p.add_argument("--joint", default=None,
                   help="joint CSV; supplies I and I_alpha when not given")
    p.add_argument("--envelope", default=None, help="tabulated envelope CSV")

    p = sub.add_parser("simulate", help="run a seeded selection experiment")
    _add_common(p)
    p.add_argument("--model", choices=["gaussian", "exponential", "heavytail"],
                   default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--sigma", type=_parse_floats, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rule", default=None,
                   help="argmax | argmin | fixed:IDX | topk:K | softmax:TEMP")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--probe", type=int, default=None)
    p.add_argument("--alphas", type=_parse_floats, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("sweep", help="argmax tightness sweep across sample sizes")
    _add_common(p)
    p.add_argument("--model", choices=["gaussian", "exponential", "heavytail"],
                   default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--sigma", type=_parse_floats, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--n-list", dest="n_list", type=_parse_ints, default=None,
                   help="comma-separated sample sizes")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("estimate", help="dependence measures of a joint CSV")
    _add_common(p)
    p.add_argument("--joint", default=None)
    p.add_argument("--alphas", type=_parse_floats, default=None)

    p = sub.add_parser("norms", help="Orlicz norms of a weighted sample CSV")
    _add_common(p)
    p.add_argument("--data", default=None,
                   help="CSV with column 'value' and optional 'weight'")
    p.add_argument("--psi", default=None, help="power:P | scaled:P | exp")
    return ap


def _resolve(ns: argparse.Namespace) -> RunConfig:
    cli_cfg = RunConfig()
    for f in fields(RunConfig):
        if hasattr(ns, f.name):
            setattr(cli_cfg, f.name, getattr(ns, f.name))
    base = RunConfig()
    if getattr(ns, "config", None):
        base = RunConfig.from_file(ns.config)
    cfg = base.merged_under(cli_cfg)
    if cfg.seed is None:
        cfg.seed = 0
    return cfg


def _parse_rule(spec: str):
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "argmax":
        return sim.ArgMax()
    if name == "argmin":
        return sim.ArgMin()
    if name == "fixed":
        return sim.FixedIndex(int(arg or 0))
    if name == "topk":
        return sim.TopKUniform(int(arg or 2))
    if name == "softmax":
        return sim.SoftMax(float(arg or 1.0))
    raise ConfigError(f"unknown rule {spec!r}")


def _parse_psi(spec: str) -> orz.OrliczFunction:
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    try:
        if name == "power":
            return orz.power_orlicz(float(arg or 2.0))
        if name == "scaled":
            return orz.scaled_power_orlicz(float(arg or 2.0))
        if name == "exp":
            return orz.exp_orlicz()
    except ValueError as exc:
        raise ConfigError(f"invalid psi {spec!r}: {exc}")
    raise ConfigError(f"unknown psi {spec!r}")


def _build_model(cfg: RunConfig):
    name = cfg.model or "gaussian"
    n = cfg.n if cfg.n is not None else 10
    try:
        if name == "gaussian":
            sigma = (cfg.sigma or [1.0])[0]
            return sim.GaussianIID(mu=cfg.mu or 0.0, sigma=sigma, n=n)
        if name == "exponential":
            return sim.ExponentialIID(rate=cfg.rate if cfg.rate is not None else 1.0, n=n)
        if name == "heavytail":
            return sim.HeavyTailIID(
                beta=cfg.beta if cfg.beta is not None else 3.0,
                c=cfg.c if cfg.c is not None else 2.0,
                x0=cfg.x0 if cfg.x0 is not None else math.e, n=n)
    except ValueError as exc:
        raise ConfigError(str(exc))
    raise ConfigError(f"unknown model {name!r}")


def _load_joint_dependence(cfg: RunConfig, alpha: float):
    joint = dv.DiscreteJoint.from_csv(cfg.joint)
    return dv.mutual_information(joint), dv.alpha_mutual_information(joint, alpha)


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"missing required option '{name}'")


def cmd_bound(cfg: RunConfig) -> bnd.BoundReport:
    _require(cfg, "family")
    report = bnd.BoundReport(meta={"command": "bound", "family": cfg.family,
                                   "seed": cfg.seed})
    p_t = dv.load_probability_vector(cfg.p_t) if cfg.p_t else None
    family = cfg.family

    if family == "pnorm":
        _require(cfg, "beta", "sigma")
        alpha = bnd.conjugate_exponent(cfg.beta)
        report.meta["beta"] = cfg.beta
        report.meta["alpha"] = alpha
        if cfg.uniform:
            _require(cfg, "n")
            try:
                ub = bnd.pnorm_uniform_bound(cfg.sigma, cfg.beta, cfg.n, p_t)
            except ValueError as exc:
                raise ConfigError(str(exc))
            report.meta["n"] = cfg.n
            report.add_bound("pnorm_uniform", ub.value)
            report.add_bound("pnorm_uniform_loose", ub.loose)
            return report
        i_alpha = cfg.i_alpha
        i_val = cfg.info
        if i_alpha is None and cfg.joint:
            i_val, i_alpha = _load_joint_dependence(cfg, alpha)
        if i_alpha is None:
            raise ConfigError("pnorm bound needs --i-alpha, --joint, or --uniform")
        try:
            value = bnd.pnorm_bound(cfg.sigma, p_t, cfg.beta, i_alpha)
        except ValueError as exc:
            raise ConfigError(str(exc))
        report.dependence = {"I": i_val, "I_alpha": {f"{alpha:g}": i_alpha}}
        report.add_bound("pnorm", value)
        return report

    # the remaining families consume an information budget in nats
    i_val = cfg.info
    i_alpha = None
    if i_val is None and cfg.joint:
        i_val, i_alpha = _load_joint_dependence(cfg, 2.0)
    if i_val is None:
        raise ConfigError(f"{family} bound needs --I or --joint")
    if i_val < 0:
        raise ConfigError("information budget must be nonnegative")
    report.dependence = {"I": i_val,
                         "I_alpha": {} if i_alpha is None else {"2": i_alpha}}
    try:
        if family == "gaussian":
            _require(cfg, "sigma")
            report.add_bound("gaussian",
                             bnd.gaussian_bound(cfg.sigma, i_val, p_t), side="upper")
        elif family == "subgamma":
            _require(cfg, "sigma2", "c")
            report.add_bound("subgamma",
                             bnd.subgamma_bound(cfg.sigma2, cfg.c, i_val), side="upper")
        elif family == "subexponential":
            _require(cfg, "sigma", "b")
            sub = bnd.subexponential_bound(cfg.sigma[0], cfg.b, i_val)
            report.add_bound("subexponential", sub.canonical, side="upper")
            report.add_bound("subexponential_piecewise", sub.piecewise, side="upper")
        elif family == "tabulated":
            _require(cfg, "envelope")
            env = Tabulated.from_csv(cfg.envelope)
            report.add_bound("mgf_tabulated", env.inverse_conjugate(i_val),
                             side="upper")
        else:  # pragma: no cover - argparse restricts choices
            raise ConfigError(f"unknown family {family!r}")
    except ValueError as exc:
        raise ConfigError(str(exc))
    return report


def _simulation_bounds(report: bnd.BoundReport, model, rule,
                       res: sim.ExperimentResult) -> None:
    i_val = res.best_i()
    i_alpha = res.best_i_alpha()
    n = model.n
    argmaxish = isinstance(rule, (sim.ArgMax, sim.ArgMin))

    if isinstance(model, sim.GaussianIID):
        report.add_bound("mgf_gaussian", bnd.gaussian_bound(model.sigma, i_val),
                         side="upper")
        if "2" in i_alpha:
            report.add_bound("pnorm", bnd.pnorm_bound(
                model.sigma, None, 2.0, i_alpha["2"]))
        report.add_bound("pnorm_uniform",
                         bnd.pnorm_uniform_bound(model.sigma, 2.0, n).value)
        if argmaxish:
            report.add_bound("max_cgf", bnd.max_inequality_cgf_bound(
                [model.cgf_envelope], n), side="expected_max")
    elif isinstance(model, sim.ExponentialIID):
        env = model.cgf_envelope
        report.add_bound("mgf_subgamma", env.inverse_conjugate(i_val), side="upper")
        sd = 1.0 / model.rate
        if "2" in i_alpha:
            report.add_bound("pnorm", bnd.pnorm_bound(sd, None, 2.0, i_alpha["2"]))
        report.add_bound("pnorm_uniform", bnd.pnorm_uniform_bound(sd, 2.0, n).value)
        if argmaxish:
            report.add_bound("max_cgf", bnd.max_inequality_cgf_bound([env], n),
                             side="expected_max")
    elif isinstance(model, sim.HeavyTailIID):
        beta = model.beta
        alpha = bnd.conjugate_exponent(beta)
        norm = sim.heavy_tail_beta_norm(model)
        report.meta["beta_norm_uncentered"] = norm
        key = f"{alpha:g}"
        if key in i_alpha:
            report.add_bound("pnorm", bnd.pnorm_bound(norm, None, beta, i_alpha[key]))
        if beta >= 2:
            ub = bnd.pnorm_uniform_bound(norm, beta, n)
            report.add_bound("pnorm_uniform", ub.value)
            report.add_bound("pnorm_uniform_loose", ub.loose)
        if argmaxish:
            report.add_bound("max_beta",
                             bnd.max_inequality_pnorm_bound(norm, beta, n),
                             side="expected_max")


def cmd_simulate(cfg: RunConfig) -> bnd.BoundReport:
    model = _build_model(cfg)
    try:
        rule = _parse_rule(cfg.rule or "argmax")
    except ValueError as exc:
        raise ConfigError(str(exc))
    alphas = list(cfg.alphas or [])
    if 2.0 not in alphas:
        alphas.append(2.0)
    if isinstance(model, sim.HeavyTailIID):
        a = bnd.conjugate_exponent(model.beta)
        if a not in alphas:
            alphas.append(a)
    trials = cfg.trials if cfg.trials is not None else 10000
    try:
        res = sim.run_experiment(
            model, rule, trials, cfg.seed, bins=cfg.bins,
            probe=cfg.probe if cfg.probe is not None else 0,
            alphas=alphas, workers=cfg.workers if cfg.workers is not None else 1)
    except ValueError as exc:
        raise ConfigError(str(exc))
    report = bnd.BoundReport(
        meta={"command": "simulate", "model": model.label, "rule": rule.label,
              "n": model.n, "trials": res.trials, "seed": res.seed,
              "bins": res.bins, "probe": res.probe,
              "selected_mean": res.selected_mean,
              "dependence_estimator": ("analytic" if res.analytic_i is not None
                                       else "rule_conditional"),
              "I_plugin": res.i_plugin},
        empirical={"bias": res.bias, "stderr": res.stderr},
        dependence={"I": res.best_i(), "I_alpha": res.best_i_alpha()})
    _simulation_bounds(report, model, rule, res)
    return report


def cmd_sweep(cfg: RunConfig):
    model = _build_model(cfg)
    n_list = cfg.n_list or [100, 1000, 10000]
    trials = cfg.trials if cfg.trials is not None else 10000
    try:
        rows = sim.tightness_sweep(
            model, n_list, trials, cfg.seed,
            workers=cfg.workers if cfg.workers is not None else 1)
    except ValueError as exc:
        raise ConfigError(str(exc))
    return model, rows


def cmd_estimate(cfg: RunConfig) -> Dict:
    _require(cfg, "joint")
    try:
        joint = dv.DiscreteJoint.from_csv(cfg.joint)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc))
    alphas = cfg.alphas or [2.0]
    i_val = dv.mutual_information(joint)
    i_alpha = {f"{a:g}": dv.alpha_mutual_information(joint, a) for a in alphas}
    marginal = {f"{a:g}": dv.alpha_mi_marginal_bound(joint.p_rows, a) for a in alphas}
    kl_cap = dv.phi_mi_marginal_bound(joint.p_rows, dv.kl_generator())
    equality = {k: bool(abs(i_alpha[k] - marginal[k]) <= 1e-9) for k in i_alpha}
    return {
        "meta": {"command": "estimate", "joint": cfg.joint,
                 "rows": joint.n_rows, "cols": joint.n_cols},
        "dependence": {"I": i_val, "I_alpha": i_alpha},
        "marginal_bounds": {"I_alpha": marginal, "kl": kl_cap},
        "equality_attained": equality,
    }


def _load_weighted_csv(path):
    import csv as _csv
    values, weights = [], []
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ConfigError(f"{path}: empty data file")
        has_weight = len(header) >= 2
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values.append(float(row[0]))
                if has_weight:
                    weights.append(float(row[1]))
            except (ValueError, IndexError):
                raise ConfigError(f"{path}: line {i}: non-numeric entry") from None
    if not values:
        raise ConfigError(f"{path}: no data rows")
    return np.array(values), (np.array(weights) if has_weight else None)


def cmd_norms(cfg: RunConfig) -> Dict:
    _require(cfg, "data", "psi")
    psi = _parse_psi(cfg.psi)
    try:
        values, weights = _load_weighted_csv(cfg.data)
    except OSError as exc:
        raise ConfigError(str(exc))
    out = {"meta": {"command": "norms", "data": cfg.data, "psi": psi.name},
           "norms": {}, "divergent": False}
    for name, fn in (("luxemburg", orz.luxemburg_norm), ("amemiya", orz.amemiya_norm)):
        try:
            v = fn(values, psi, weights)
        except orz.NumericDivergence:
            v = math.inf
        except ValueError as exc:
            raise ConfigError(str(exc))
        if not math.isfinite(v):
            out["divergent"] = True
            out["norms"][name] = None
        else:
            out["norms"][name] = v
    return out


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    ap = _build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = _resolve(ns)
        fmt = cfg.format
        if ns.command == "bound":
            report = cmd_bound(cfg)
            _emit(report.to_csv() if fmt == "csv" else report.to_json(), cfg)
        elif ns.command == "simulate":
            report = cmd_simulate(cfg)
            _emit(report.to_csv() if fmt == "csv" else report.to_json(), cfg)
        elif ns.command == "sweep":
            model, rows = cmd_sweep(cfg)
            if fmt == "json":
                payload = bnd._json_safe({
                    "meta": {"command": "sweep", "model": model.label,
                             "seed": cfg.seed},
                    "rows": [vars(r) for r in rows]})
                _emit(json.dumps(payload, indent=2) + "\n", cfg)
            else:
                _emit(sim.sweep_to_csv(rows), cfg)
        elif ns.command == "estimate":
            payload = cmd_estimate(cfg)
            _emit(json.dumps(bnd._json_safe(payload), indent=2) + "\n", cfg)
        elif ns.command == "norms":
            payload = cmd_norms(cfg)
            _emit(json.dumps(bnd._json_safe(payload), indent=2) + "\n", cfg)
            if payload["divergent"]:
                print("error: norm diverged over the search range", file=sys.stderr)
                return 3
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {ns.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except orz.NumericDivergence as exc:
        print(f"error: numeric divergence: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
