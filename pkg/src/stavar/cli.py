"""Command-line entry point: ``stavar fit | effects | check | simulate``.

Settings come from one JSON config document; command-line flags override
the matching keys.  Relative data paths resolve against the config file's
directory.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical failure (or a failed audit in ``check``).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import networkx
import numpy as np
import scipy

from . import __version__
from .als import AlsEstimate
from .diagnostics import trace_summary
from .errors import (ConfigError, DataError, InvalidConfig, MissingArtifact, NumericalError,
                     StavarError)
from .estimands import (att_by_lag, cluster_effects, cumulative_att, fit_hetero,
                        individual_effects, psi_contrast, smooth_att)
from .gibbs import read_counterfactual_csv, read_draws_csv, write_counterfactual_csv, write_draws_csv
from .panel import (NeighborGraph, SparsityPattern, load_covariates, load_edges, load_panel)
from .pipeline import PipelineConfig, run_pipeline
from .precision import PrecisionEstimate

DESIGNS = ("placebo", "confounder", "misspec-a", "smooth-delta", "hetero")


@dataclass
class RunConfig:
    outcomes: Path | None = None
    treatment: Path | None = None
    covariates: Path | None = None
    edges: Path | None = None
    basis_kind: str = "natural"
    basis_df: int = 3
    adoption_gap: float = 12
    beta_variance: float = 1e6
    a_variance: float = 1e6
    iters: int = 4000
    burnin: int = 2000
    thin: int = 1
    seed: int = 0
    max_lag: int = 9
    hetero_window: int = 2
    spline_df: int = 3
    smooth_df: int | None = None
    cluster_k: int = 5
    kkt_tol: float = 1e-6
    out: Path = Path("stavar_out")
    threads: int = 1
    source: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(self.basis_kind, self.basis_df, self.adoption_gap,
                              self.beta_variance, self.a_variance, self.iters,
                              self.burnin, self.thin)

    def echo(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k not in ("source", "explicit"):
                out[k] = str(v) if isinstance(v, Path) else v
        return out


# config key -> (section, key) in the JSON document
_LAYOUT = {
    "outcomes": ("data", "outcomes"), "treatment": ("data", "treatment"),
    "covariates": ("data", "covariates"), "edges": ("data", "edges"),
    "basis_kind": ("basis", "kind"), "basis_df": ("basis", "df"),
    "adoption_gap": (None, "adoption_gap"),
    "beta_variance": ("prior", "beta_variance"), "a_variance": ("prior", "a_variance"),
    "iters": ("mcmc", "iters"), "burnin": ("mcmc", "burnin"), "thin": ("mcmc", "thin"),
    "seed": ("mcmc", "seed"),
    "max_lag": ("estimands", "max_lag"), "hetero_window": ("estimands", "hetero_window"),
    "spline_df": ("estimands", "spline_df"), "smooth_df": ("estimands", "smooth_df"),
    "cluster_k": ("estimands", "cluster_k"),
    "kkt_tol": ("check", "kkt_tol"),
    "out": (None, "output"), "threads": (None, "threads"),
}
_PATHS = ("outcomes", "treatment", "covariates", "edges")
_INTS = ("basis_df", "iters", "burnin", "thin", "seed", "max_lag", "hetero_window",
         "spline_df", "cluster_k", "threads")

CONFIG_SCHEMA = {
    "data": {"outcomes": "path", "treatment": "path", "covariates": "path (optional)",
             "edges": "path (optional)"},
    "basis": {"kind": "natural | polynomial | bspline", "df": "int >= 1, intercept included"},
    "adoption_gap": "number >= 0 (periods)",
    "prior": {"beta_variance": "> 0", "a_variance": "> 0"},
    "mcmc": {"iters": "int", "burnin": "int < iters", "thin": "int >= 1", "seed": "int"},
    "estimands": {"max_lag": "int >= 0", "hetero_window": "int >= 0",
                  "spline_df": "int >= 0", "smooth_df": "int or null", "cluster_k": "int >= 1"},
    "check": {"kkt_tol": "> 0"},
    "output": "directory",
    "threads": "int >= 1",
}


def load_config(path=None, overrides=None) -> RunConfig:
    """Merge defaults, the JSON document at ``path`` and ``overrides`` (in that order)."""
    cfg = RunConfig()
    base = Path(".")
    doc = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise InvalidConfig(f"config file {path} does not exist")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidConfig("config document must be a JSON object")
        base = path.parent
        known = {s for s, _ in _LAYOUT.values() if s} | {k for s, k in _LAYOUT.values() if s is None}
        unknown = set(doc) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    values, from_doc = {}, set()
    for name, (section, key) in _LAYOUT.items():
        holder = doc.get(section, {}) if section else doc
        if not isinstance(holder, dict):
            raise InvalidConfig(f"config section {section!r} must be an object")
        if key in holder:
            values[name] = holder[key]
            from_doc.add(name)
    for name, v in (overrides or {}).items():
        if v is not None:
            values[name] = v
            from_doc.discard(name)
    for name, v in values.items():
        if v is None:
            continue
        if name in _PATHS or name == "out":
            # document paths are relative to the document, flag paths to the cwd
            v = base / v if name in from_doc else Path(v)
        elif name in _INTS:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not float(v).is_integer():
                raise InvalidConfig(f"{name} must be an integer")
            v = int(v)
        setattr(cfg, name, v)
    cfg.explicit = frozenset(values)
    cfg.source = {"config_file": str(path) if path else None, "overrides":
                  {k: str(v) for k, v in (overrides or {}).items() if v is not None}}
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.threads < 1:
        raise InvalidConfig("threads must be >= 1")
    if cfg.max_lag < 0 or cfg.hetero_window < 0 or cfg.spline_df < 0 or cfg.cluster_k < 1:
        raise InvalidConfig("estimand options out of range")
    if not cfg.kkt_tol > 0:
        raise InvalidConfig("kkt_tol must be > 0")
    try:
        cfg.pipeline()
    except (ValueError, TypeError) as exc:
        raise InvalidConfig(str(exc)) from None


def _require_data(cfg: RunConfig, need_covariates=False) -> None:
    for name in ("outcomes", "treatment"):
        if getattr(cfg, name) is None:
            raise InvalidConfig(f"config is missing data.{name}")
    for name in _PATHS:
        p = getattr(cfg, name)
        if p is not None and not Path(p).is_file():
            raise InvalidConfig(f"data.{name} points at a missing file: {p}")
    if need_covariates and cfg.covariates is None:
        raise InvalidConfig("config is missing data.covariates")


def _load_inputs(cfg: RunConfig):
    panel = load_panel(cfg.outcomes, cfg.treatment)
    graph = load_edges(cfg.edges, panel) if cfg.edges else NeighborGraph(frozenset())
    covs = load_covariates(cfg.covariates, panel) if cfg.covariates else None
    return panel, graph, covs


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    return {"stavar": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "networkx": networkx.__version__}


def _update_meta(out: Path, command: str, cfg: RunConfig, files, extra=None) -> None:
    path = out / "meta.json"
    meta = json.loads(path.read_text()) if path.is_file() else {}
    inputs = {name: {"path": str(getattr(cfg, name)), "sha256": _sha256(Path(getattr(cfg, name)))}
              for name in _PATHS if getattr(cfg, name) is not None and Path(getattr(cfg, name)).is_file()}
    meta[command] = {
        "config": cfg.echo(), "config_source": cfg.source, "seed": cfg.seed,
        "versions": _versions(), "inputs": inputs,
        "artifacts": {f: _sha256(out / f) for f in files},
        **(extra or {}),
    }
    meta["schema"] = CONFIG_SCHEMA
    path.write_text(json.dumps(meta, indent=2))


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# --- commands ----------------------------------------------------------------

def cmd_fit(cfg: RunConfig) -> dict:
    _require_data(cfg)
    panel, graph, _ = _load_inputs(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res = run_pipeline(panel, graph, cfg.pipeline(), cfg.seed)
    ids = panel.unit_ids
    (out / "als.json").write_text(json.dumps(res.als.to_json(ids), indent=2))
    (out / "precision.json").write_text(json.dumps(res.precision.to_json(), indent=2))
    (out / "pattern.json").write_text(json.dumps({
        "unit_ids": list(ids),
        "adoption_gap": res.pattern.adoption_gap,
        "a_support": [[ids[i], ids[j]] for i, j in zip(*res.pattern.a_support())],
        "omega_support": [[ids[i], ids[j]] for i, j in zip(*np.nonzero(np.triu(res.pattern.omega_mask)))],
        "basis": res.basis.describe(),
    }, indent=2))
    write_draws_csv(res.draws, ids, out / "draws.csv")
    write_counterfactual_csv(res.counterfactual, panel, out / "counterfactual.csv")
    files = ["als.json", "precision.json", "pattern.json", "draws.csv", "counterfactual.csv"]
    _update_meta(out, "fit", cfg, files, {
        "timings_seconds": res.timings,
        "basis": res.basis.describe(),
        "adoption_gap": cfg.adoption_gap,
        "precision_jitter": res.precision.jitter,
        "draws": {"B": res.draws.B, "burnin": cfg.burnin, "thin": cfg.thin, "iters": cfg.iters},
    })
    return {"out": str(out), "draws": res.draws.B, "als_converged": res.als.converged,
            "kkt_residual": res.precision.kkt_residual}


def _need(out: Path, *names):
    for n in names:
        if not (out / n).is_file():
            raise MissingArtifact(f"{out / n} not found; run `stavar fit` first")


def cmd_effects(cfg: RunConfig, draws_dir=None) -> dict:
    _require_data(cfg)
    src = Path(draws_dir) if draws_dir else Path(cfg.out)
    _need(src, "counterfactual.csv")
    panel, _, covs = _load_inputs(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    effects = individual_effects(read_counterfactual_csv(src / "counterfactual.csv", panel), panel)
    q_top = min(cfg.max_lag, effects.delta.shape[2] - 1)
    att_rows, fig_rows = [], []
    smooth = smooth_att(effects, cfg.smooth_df, q_top) if cfg.smooth_df else None
    for q in range(q_top + 1):
        a, c = att_by_lag(effects, q), cumulative_att(effects, q)
        row = [q, a.point, a.lower, a.upper, a.n_units, c.point, c.lower, c.upper]
        if smooth:
            row += [smooth[q].point, smooth[q].lower, smooth[q].upper]
        att_rows.append(row)
        fig_rows.append([q, "delta", a.point, a.lower, a.upper])
        fig_rows.append([q, "cumulative_delta", c.point, c.lower, c.upper])
        if smooth:
            fig_rows.append([q, "smoothed_delta", smooth[q].point, smooth[q].lower, smooth[q].upper])
    header = ["lag", "point", "lower", "upper", "n_units",
              "cumulative_point", "cumulative_lower", "cumulative_upper"]
    if smooth:
        header += ["smoothed_point", "smoothed_lower", "smoothed_upper"]
    _write_csv(out / "att.csv", header, att_rows)
    _write_csv(out / "fig_att_per_lag.csv", ["lag", "estimand", "point", "lower", "upper"], fig_rows)
    files = ["att.csv", "fig_att_per_lag.csv"]

    hetero_rows, cluster_rows = [], []
    names = list(covs.names) if covs is not None else []
    if covs is not None:
        model = fit_hetero(effects, covs, cfg.spline_df, cfg.hetero_window)
        for j, nm in enumerate(names):
            s = psi_contrast(model, covs, j, cfg.hetero_window)
            hetero_rows.append([nm, s.point, s.lower, s.upper])
        for c in cluster_effects(model, covs, cfg.cluster_k, cfg.hetero_window, cfg.seed):
            cluster_rows.append([c.cluster, c.n_units, *c.profile,
                                 c.effect.point, c.effect.lower, c.effect.upper])
    _write_csv(out / "hetero.csv", ["covariate", "psi_point", "psi_lower", "psi_upper"], hetero_rows)
    _write_csv(out / "clusters.csv", ["cluster", "n_units", *names, "effect", "lower", "upper"],
               cluster_rows)
    _write_csv(out / "fig_hetero_contrasts.csv",
               ["covariate", "psi_point", "psi_lower", "psi_upper"], hetero_rows)
    files += ["hetero.csv", "clusters.csv", "fig_hetero_contrasts.csv"]
    _update_meta(out, "effects", cfg, files, {"draws_dir": str(src)})
    return {"out": str(out), "lags": q_top + 1, "covariates": len(names),
            "clusters": len(cluster_rows)}


def cmd_check(cfg: RunConfig, draws_dir=None) -> dict:
    src = Path(draws_dir) if draws_dir else Path(cfg.out)
    _need(src, "als.json", "precision.json", "pattern.json", "draws.csv")
    als = AlsEstimate.from_json(json.loads((src / "als.json").read_text()))
    prec_doc = json.loads((src / "precision.json").read_text())
    prec = PrecisionEstimate.from_json(prec_doc)
    pat = json.loads((src / "pattern.json").read_text())
    ids = pat["unit_ids"]
    idx = {u: i for i, u in enumerate(ids)}
    n = len(ids)
    a_mask = np.zeros((n, n), dtype=bool)
    for a, b in pat["a_support"]:
        a_mask[idx[a], idx[b]] = True
    om_mask = np.eye(n, dtype=bool)
    for a, b in pat["omega_support"]:
        om_mask[idx[a], idx[b]] = om_mask[idx[b], idx[a]] = True
    K = als.beta.shape[0]
    beta, a_draws = read_draws_csv(src / "draws.csv", ids, K)

    report = {"audits": {}}
    report["audits"]["als_converged"] = {"pass": bool(als.converged), "n_iters": als.n_iters,
                                         "tol_achieved": als.tol_achieved}
    report["audits"]["kkt_residual"] = {"pass": bool(prec.kkt_residual <= cfg.kkt_tol),
                                        "value": prec.kkt_residual, "tol": cfg.kkt_tol,
                                        "solver_iters": prec.iters, "jitter": prec.jitter}
    bad = np.argwhere((a_draws != 0) & ~a_mask[None])
    report["audits"]["a_mask"] = {
        "pass": len(bad) == 0, "violations": len(bad),
        "coordinates": [{"draw": int(b), "unit_i": ids[i], "unit_j": ids[j]}
                        for b, i, j in bad[:50]]}
    om_bad = np.argwhere((prec.omega != 0) & ~om_mask)
    report["audits"]["omega_mask"] = {
        "pass": len(om_bad) == 0,
        "coordinates": [[ids[i], ids[j]] for i, j in om_bad[:50]]}
    rows, cols = np.nonzero(a_mask)
    flat = np.concatenate([beta.reshape(len(beta), -1), a_draws[:, rows, cols]], axis=1)
    names = [f"beta[{k}][{ids[i]}]" for k in range(K) for i in range(n)]
    names += [f"A[{ids[i]}][{ids[j]}]" for i, j in zip(rows, cols)]
    report["trace"] = trace_summary(flat, names, 0.1, cfg.seed) if len(flat) > 3 else []
    report["pass"] = all(a["pass"] for a in report["audits"].values())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "check.json").write_text(json.dumps(report, indent=2))
    _update_meta(out, "check", cfg, ["check.json"], {"draws_dir": str(src)})
    return report


def cmd_simulate(cfg: RunConfig, design: str, reps: int, seed: int) -> dict:
    from . import simlab
    if design not in DESIGNS:
        raise InvalidConfig(f"unknown design {design!r}; choose from {DESIGNS}")
    if reps < 1:
        raise InvalidConfig("reps must be >= 1")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    mcmc = {k: getattr(cfg, k) for k in ("iters", "burnin", "thin") if k in cfg.explicit}
    trend = {k: getattr(cfg, k) for k in ("basis_kind", "basis_df", "adoption_gap")
             if k in cfg.explicit}
    # user panels get the spline default; the synthetic panel has linear trends
    base = simlab.SIM_CONFIG if cfg.outcomes is not None else simlab.LINEAR_TREND
    sim_cfg = replace(base, **mcmc, **trend)
    if design == "confounder":
        rep = simlab.confounder_simulation(simlab.ConfounderSpec(reps=reps, seed=seed), cfg.threads)
        rep.write(out)
        summary = {"cells": len(rep.rows)}
    elif design in ("placebo", "hetero"):
        if cfg.outcomes is not None:
            _require_data(cfg, need_covariates=True)
            panel, graph, covs = _load_inputs(cfg)
        else:
            syn = simlab.synthetic_panel()
            panel, graph, covs = syn.panel, syn.graph, syn.covs
        if design == "placebo":
            rep = simlab.placebo_simulation(panel, covs, simlab.PlaceboSpec(reps=reps, seed=seed),
                                            sim_cfg, graph, cfg.threads)
        else:
            rep = simlab.placebo_simulation(panel, covs, simlab.PlaceboSpec(reps=reps, seed=seed),
                                            sim_cfg, graph, cfg.threads, simlab.linear_surface,
                                            design="hetero")
        rep.write(out)
        summary = {"estimands": len(rep.names), "n_failed": rep.n_failed}
    else:
        if design == "misspec-a":
            mis_cfg = replace(simlab.LINEAR_TREND, **mcmc)
            pair = simlab.var_misspec_simulation(reps, seed, config=mis_cfg, threads=cfg.threads)
        else:
            pair = simlab.smooth_delta_simulation(reps, seed, config=sim_cfg, threads=cfg.threads)
        doc = {"design": design, "variants": {k: v.to_json() for k, v in pair.items()}}
        (out / "report.json").write_text(json.dumps(doc, indent=2))
        with (out / "trace.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["variant", "rep", "estimand", "truth", "point", "lower", "upper", "covered"])
            for label, r in pair.items():
                for i in range(r.reps):
                    for k, nm in enumerate(r.names):
                        t, lo, hi = r.truth[i, k], r.lower[i, k], r.upper[i, k]
                        w.writerow([label, i, nm, repr(float(t)), repr(float(r.point[i, k])),
                                    repr(float(lo)), repr(float(hi)), int(lo <= t <= hi)])
        summary = {"variants": list(pair)}
    _update_meta(out, "simulate", cfg, ["report.json", "trace.csv"],
                 {"design": design, "reps": reps, "sim_seed": seed})
    return {"out": str(out), "design": design, **summary}


# --- argument parsing --------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stavar", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stavar {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON config document")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        if data:
            for name in _PATHS:
                sp.add_argument(f"--{name}", help=f"{name} CSV")
            sp.add_argument("--basis-kind", dest="basis_kind")
            sp.add_argument("--basis-df", dest="basis_df", type=int)
            sp.add_argument("--adoption-gap", dest="adoption_gap", type=float)
            sp.add_argument("--iters", type=int)
            sp.add_argument("--burnin", type=int)
            sp.add_argument("--thin", type=int)

    fit = sub.add_parser("fit", help="fit the model and forecast counterfactuals")
    common(fit)
    eff = sub.add_parser("effects", help="summarize effects from fit artifacts")
    common(eff)
    eff.add_argument("--draws-dir", help="directory holding fit artifacts (default: --out)")
    eff.add_argument("--max-lag", dest="max_lag", type=int)
    eff.add_argument("--hetero-window", dest="hetero_window", type=int)
    eff.add_argument("--spline-df", dest="spline_df", type=int)
    eff.add_argument("--smooth-df", dest="smooth_df", type=int)
    eff.add_argument("--cluster-k", dest="cluster_k", type=int)
    chk = sub.add_parser("check", help="audit fit artifacts")
    common(chk, data=False)
    chk.add_argument("--draws-dir", help="directory holding fit artifacts (default: --out)")
    chk.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    sim = sub.add_parser("simulate", help="run a simulation study")
    common(sim)
    sim.add_argument("--design", required=True, choices=DESIGNS)
    sim.add_argument("--reps", type=int, default=200)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    keys = set(_LAYOUT)
    overrides = {k: v for k, v in vars(args).items() if k in keys}
    try:
        cfg = load_config(args.config, overrides)
        started = time.perf_counter()
        if args.command == "fit":
            result = cmd_fit(cfg)
        elif args.command == "effects":
            result = cmd_effects(cfg, args.draws_dir)
        elif args.command == "check":
            result = cmd_check(cfg, args.draws_dir)
            failed = [k for k, a in result["audits"].items() if not a["pass"]]
            result = {"pass": result["pass"], "failed_audits": failed}
            if failed:
                print(json.dumps(result, indent=2))
                return DataError.exit_code if "a_mask" in failed or "omega_mask" in failed \
                    else NumericalError.exit_code
        else:
            result = cmd_simulate(cfg, args.design, args.reps, cfg.seed)
        result["seconds"] = round(time.perf_counter() - started, 3)
        print(json.dumps(result, indent=2))
        return 0
    except StavarError as exc:
        kind = ("config" if isinstance(exc, ConfigError) else
                "data" if isinstance(exc, DataError) else "numerical")
        print(f"stavar {args.command}: {kind} error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
