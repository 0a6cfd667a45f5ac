"""Execute one configured experiment and write its artifacts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .operators import apply, convolve, freq_window, save_operator
from .pipelines import (
    _fit,
    build_theorem1,
    build_theorem2,
    obstruction_grid,
    obstruction_trials,
)
from .signal import (
    Indicator,
    SampledSignal,
    Sinc,
    choose_B,
    sample,
    save_signal,
    translate,
)
from .synth import coefficient_signal, synthesize

OBSTRUCTION_TOL = 1e-6
OUTSIDE_TOL = 1e-8


@dataclass
class Outcome:
    record: dict
    converged: bool
    traces: dict = field(default_factory=dict)
    operator: object = None
    coefficients: SampledSignal | None = None

    def summary(self) -> str:
        r = self.record
        status = "converged" if self.converged else "not-converged"
        keys = [k for k in ("B", "delta", "lam", "achieved_error", "epsilon", "residual",
                            "energy_ratio", "hs_norm", "min_error") if r.get(k) is not None]
        body = " ".join(f"{k}={_fmt(r[k])}" for k in keys)
        return f"{r['theorem']} {status} {body}"


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _clean(v):
    """JSON-safe scalars: non-finite floats become strings."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _t1(cfg: ExperimentConfig) -> Outcome:
    y = cfg.target()
    budget = cfg.budget(y)
    op, rep = build_theorem1(
        y, cfg.alpha, cfg.gamma, budget, cfg.synthesis(cfg.alpha),
        lambdas=cfg.lambdas, B=cfg.fixed_B, delta=cfg.fixed_delta,
    )
    chi = sample(Indicator(rep.B), y.grid)
    out = apply(op, chi)
    traces = {"input": chi, "output": out, "target": y, "m": op.m,
              "mollified_indicator": convolve(chi, op.u)}
    return Outcome(rep.as_dict(), rep.converged, traces, op)


def _t2(cfg: ExperimentConfig) -> Outcome:
    y = cfg.target()
    budget = cfg.budget(y)
    op, rep = build_theorem2(
        y, cfg.alpha, cfg.beta, budget, cfg.synthesis(cfg.alpha),
        lambdas=cfg.lambdas, B=cfg.fixed_B, delta=cfg.fixed_delta,
    )
    phi = sample(Sinc(rep.B), y.grid)
    out = apply(op, phi)
    window = y.with_samples(freq_window(op.w, y.grid.nodes))
    traces = {"input": phi, "output": out, "target": y, "h": op.h, "window": window}
    return Outcome(rep.as_dict(), rep.converged, traces, op)


def _synth_only(cfg: ExperimentConfig) -> Outcome:
    y = cfg.target()
    B = cfg.fixed_B or cfg.synth_B or cfg.target_window
    budget = None
    if cfg.epsilon is not None or cfg.epsilon_rel is not None:
        budget = cfg.budget(y)
        if B is None:
            B = choose_B(y, budget.tail_share)
    if B is None:
        raise ValueError("synth-only needs synth.B, target.window or a budget")
    scfg = cfg.synthesis(cfg.alpha, B)
    if budget is None:
        res, ok = synthesize(y, scfg), True
    else:
        res, ok = _fit(y, scfg, cfg.lambdas, budget.residual_share)
    rec = {
        "theorem": "synth-only",
        "B": B,
        "lam": res.config.lam,
        "residual": res.residual,
        "achieved_error": res.residual,
        "total_energy": res.total_energy,
        "interval_energy": res.interval_energy,
        "energy_ratio": res.energy_ratio,
        "leakage": res.leakage,
        "hs_norm": None,
        "symbol_sup": float(np.abs(res.m.samples).max()),
        "n_basis": len(res.basis),
        "epsilon": budget.epsilon if budget else None,
        "converged": bool(ok),
    }
    return Outcome(rec, bool(ok), {"target": y, "m": res.m}, coefficients=coefficient_signal(res))


def _obstruction(cfg: ExperimentConfig) -> Outcome:
    grid = obstruction_grid(cfg.N)
    rows = obstruction_trials(cfg.alpha, cfg.N, grid, trials=cfg.trials, seed=cfg.seed)
    errs = [r[0] for r in rows]
    fracs = [r[1] for r in rows]
    min_err, max_frac = min(errs), max(fracs)
    ok = min_err >= 1 - OBSTRUCTION_TOL and max_frac < OUTSIDE_TOL
    rec = {
        "theorem": "obstruction",
        "alpha": cfg.alpha,
        "N": cfg.N,
        "n_operators": len(rows),
        "min_error": min_err,
        "achieved_error": min_err,
        "max_outside_fraction": max_frac,
        "residual": None,
        "energy_ratio": None,
        "hs_norm": None,
        "symbol_sup": None,
        "errors": errs,
        "converged": bool(ok),
    }
    f = sample(Indicator(0.5), grid)
    return Outcome(rec, bool(ok), {"input": f, "target": translate(f, cfg.N)})


RUNNERS = {"t1": _t1, "t2": _t2, "synth-only": _synth_only, "obstruction": _obstruction}


def execute(cfg: ExperimentConfig) -> Outcome:
    out = RUNNERS[cfg.theorem](cfg)
    out.record["config"] = cfg.as_dict()
    out.record["seed"] = cfg.seed
    return out


def write_outcome(out: Outcome, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    report = d / "report.json"
    report.write_text(json.dumps(_clean(out.record), indent=2, sort_keys=True) + "\n")
    for name, sig in out.traces.items():
        save_signal(d / f"{name}.txt", sig)
    if out.traces:
        _write_trace_csv(d / "traces.csv", out.traces)
    if out.coefficients is not None:
        save_signal(d / "coefficients.txt", out.coefficients, centers=True)
    if out.operator is not None:
        save_operator(d / "operator.json", out.operator)
    return report


def _write_trace_csv(path, traces):
    """Plot-ready table of the traces that share the main grid."""
    ref = next(iter(traces.values())).grid
    cols = {k: s for k, s in traces.items() if s.grid.matches(ref)}
    header = ["x"] + [f"{k}_{p}" for k in cols for p in ("re", "im")]
    data = [ref.nodes]
    for s in cols.values():
        data += [s.samples.real, s.samples.imag]
    rows = np.column_stack(data)
    lines = [",".join(header)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")
