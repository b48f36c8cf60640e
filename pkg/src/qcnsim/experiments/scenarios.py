"""Scenario runners: steady points, 2-D sweeps, figure reproductions, Rb-87 preset."""

from __future__ import annotations

import copy
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .. import analytic
from ..dynamics import (
    cascade_fluxes,
    cascade_observables,
    evolve,
    pulse_metrics,
    steady_observables,
    steady_state,
)
from ..errors import ConfigError, ParameterError, QcnError
from ..model import QcnParams, build_cascaded, build_driven, default_layout
from .config import RunConfig, Sweep, Timing, Truncation
from .convergence import TruncationReport, fixed_levels, ladder

log = logging.getLogger(__name__)

STEADY_KEYS = ("T_a", "T_b", "sigma22", "sigma33")
PULSE_KEYS = ("T_b", "T_b_peak", "R_a", "T_a")

FIG2_PARAMS = QcnParams()
FIG4_PARAMS = QcnParams(kappa_ex=(1.0, 0.0, 0.5, 0.5), beta=0.1)

# 87Rb implementation, rates in MHz (all carry the same 2 pi, which cancels)
RB87_MHZ = {"kappa_ex1": 480.0, "kappa_ex2": 6.0, "kappa_ex3": 243.0, "kappa_ex4": 243.0,
            "kappa_in": 0.5, "gamma": 3.0, "g": 52.0}
RB87_SURVIVAL_TARGET = 0.92


def rb87_params(mhz: dict | None = None, beta2: float = 1e-2) -> QcnParams:
    """87Rb rates normalized by the total cavity-a loss, ``kappa := kappa_a``."""
    m = {**RB87_MHZ, **(mhz or {})}
    kappa = m["kappa_ex1"] + m["kappa_ex2"] + m["kappa_in"]
    return QcnParams(
        g1=m["g"] / kappa, g2=m["g"] / kappa,
        kappa_ex=(m["kappa_ex1"] / kappa, m["kappa_ex2"] / kappa, m["kappa_ex3"] / kappa, m["kappa_ex4"] / kappa),
        kappa_in_a=m["kappa_in"] / kappa, kappa_in_b=m["kappa_in"] / kappa,
        gamma21=m["gamma"] / kappa, gamma31=m["gamma"] / kappa,
        beta=math.sqrt(beta2),
    )


def default_config(scenario: str) -> RunConfig:
    """Scenario defaults: figure parameters and axes before any config file is applied."""
    if scenario == "steady":
        return RunConfig(scenario, params=FIG2_PARAMS.with_drives(1e-4, 1e-4))
    if scenario in ("sweep2d", "fig2"):
        return RunConfig(scenario, params=FIG2_PARAMS)
    if scenario == "fig3":
        sweep = Sweep(beta2_min=1e-4, beta2_max=10.0, beta2_points=21, beta2_zero=True)
        return RunConfig(scenario, params=FIG2_PARAMS, sweep=sweep)
    if scenario == "fig4":
        return RunConfig(scenario, params=FIG4_PARAMS)
    if scenario == "preset_rb87":
        return RunConfig(scenario, params=rb87_params(), cascade=Timing(n_s=(1,)))
    raise ConfigError(f"unknown scenario {scenario!r}")


@dataclass
class SweepTable:
    """Named table of rows; ``provenance`` tags each column as axis, numeric or analytic."""

    name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    axes: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([np.nan if r[i] is None else r[i] for r in self.rows], dtype=float)

    def check_complete(self):
        expected = int(np.prod([len(v) for v in self.axes.values()])) if self.axes else len(self.rows)
        if len(self.rows) != expected:
            raise QcnError(f"table {self.name}: {len(self.rows)} rows, expected {expected}")
        for c in self.columns:
            if self.provenance.get(c) == "numeric":
                vals = self.column(c)
                if np.isnan(vals).any():
                    raise QcnError(f"table {self.name}: NaN in column {c}")


@dataclass
class ScenarioResult:
    config: RunConfig
    tables: list[SweepTable]
    report: dict = field(default_factory=dict)
    truncation: list[TruncationReport] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def table(self, name: str) -> SweepTable:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


def _pmap(fn, items, jobs):
    """Map preserving input order, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _locate(exc: QcnError, where: str) -> QcnError:
    err = copy.copy(exc)
    err.args = (f"{where}: {exc}",)
    return err


# ---- steady-state points ---------------------------------------------------

def _steady_dim(levels):
    return 3 * (levels["n_a"] + 1) * (levels["n_b"] + 1)


def _steady_eval(params, displace, levels):
    layout = default_layout(levels["n_a"], levels["n_b"])
    obs = steady_observables(steady_state(build_driven(params, layout, displace)), params)
    return {k: obs[k] for k in STEADY_KEYS}


def solve_steady(params: QcnParams, truncation: Truncation):
    """Numerical steady observables with their truncation report."""
    evaluate = partial(_steady_eval, params, truncation.displace)
    if truncation.mode == "fixed":
        return fixed_levels(evaluate, {"n_a": truncation.n_a, "n_b": truncation.n_b}, _steady_dim)
    start = {"n_a": truncation.start, "n_b": truncation.start}
    return ladder(evaluate, start, _steady_dim, truncation.tolerance, truncation.max_dim)


def analytic_point(params: QcnParams) -> dict:
    """Closed-form observables, or ``None`` entries when the closed form does not apply."""
    try:
        inputs = analytic.AnalyticInputs.from_params(params)
    except ParameterError:
        return dict.fromkeys(STEADY_KEYS)
    ta, tb = analytic.transmissions_analytic(inputs)
    s22, s33 = analytic.populations_analytic(inputs)
    return {"T_a": ta if inputs.alpha2 > 0 else None, "T_b": tb if inputs.beta2 > 0 else None,
            "sigma22": s22, "sigma33": s33}


def steady_cell(params: QcnParams, truncation: Truncation, drives: tuple[float, float]):
    alpha2, beta2 = drives
    p = params.with_drives(alpha2, beta2)
    try:
        numeric, report = solve_steady(p, truncation)
    except QcnError as exc:
        raise _locate(exc, f"cell alpha2={alpha2:g}, beta2={beta2:g}") from exc
    return numeric, analytic_point(p), report


def converge_truncation(config: RunConfig):
    """Auto truncation for the configured drive point: ``(levels, report)``."""
    if config.truncation.mode != "auto":
        raise ConfigError("converge_truncation needs truncation mode auto")
    if config.scenario in ("fig4", "preset_rb87"):
        n_s = max(config.cascade.n_s)
        _, report, _ = solve_cascade(config.params, config.cascade, n_s, config.truncation, config.rtol)
    else:
        _, report = solve_steady(config.params, config.truncation)
    return report.levels, report


def _steady_columns(prefixes):
    cols, prov = [], {}
    for key, name in prefixes:
        for kind in ("numeric", "analytic"):
            cols.append(f"{name}_{kind}")
            prov[f"{name}_{kind}"] = kind
    return cols, prov


OBS_NAMES = (("T_a", "Ta"), ("T_b", "Tb"), ("sigma22", "sigma22"), ("sigma33", "sigma33"))


def _grid_table(name, config, alphas, betas, keys):
    cells = [(a, b) for a in alphas for b in betas]
    fn = partial(steady_cell, config.params, config.truncation)
    out = _pmap(fn, cells, config.jobs)
    cols, prov = _steady_columns([kn for kn in OBS_NAMES if kn[0] in keys])
    table = SweepTable(name, ("alpha2_over_kappa", "beta2_over_kappa", *cols),
                       axes={"alpha2_over_kappa": np.asarray(alphas), "beta2_over_kappa": np.asarray(betas)},
                       provenance={"alpha2_over_kappa": "axis", "beta2_over_kappa": "axis", **prov})
    reports = []
    for (a, b), (num, ana, rep) in zip(cells, out):
        row = [a, b]
        for key, _ in OBS_NAMES:
            if key in keys:
                row += [num[key], ana[key]]
        table.rows.append(tuple(row))
        reports.append(rep)
    return table, reports


def _truncation_summary(reports: list[TruncationReport]) -> dict:
    out = {"truncation_mode": reports[0].mode if reports else "none"}
    for mode in ("n_a", "n_b", "n_d1", "n_d2"):
        vals = [r.levels[mode] for r in reports if mode in r.levels]
        if vals:
            out[f"max_{mode}"] = max(vals)
    deltas = [d for r in reports for d in r.deltas.values()]
    if deltas:
        out["max_truncation_delta"] = max(deltas)
    out["max_dimension"] = max((r.dimension for r in reports), default=0)
    return out


def run_steady(config: RunConfig) -> ScenarioResult:
    p = config.params
    a2, b2 = abs(p.alpha) ** 2, abs(p.beta) ** 2
    table, reports = _grid_table("steady", config, [a2], [b2], STEADY_KEYS)
    return ScenarioResult(config, [table], _truncation_summary(reports), reports)


def run_sweep2d(config: RunConfig) -> ScenarioResult:
    s = config.sweep
    table, reports = _grid_table("sweep2d", config, s.alpha2_axis(), s.beta2_axis(), STEADY_KEYS)
    table.check_complete()
    return ScenarioResult(config, [table], _truncation_summary(reports), reports)


def run_fig2(config: RunConfig) -> ScenarioResult:
    s = config.sweep
    grid, reports = _grid_table("fig2", config, s.alpha2_axis(), s.beta2_axis(), ("T_a", "T_b"))
    grid.check_complete()
    alphas = np.logspace(math.log10(s.alpha2_min), math.log10(s.alpha2_max), s.cut_alpha2_points)
    cells = [(a, b) for b in s.cut_beta2 for a in alphas]
    out = _pmap(partial(steady_cell, config.params, config.truncation), cells, config.jobs)
    cuts = SweepTable("fig2_cuts", ("beta2_over_kappa", "alpha2_over_kappa", "Ta_numeric", "Ta_analytic"),
                      axes={"beta2_over_kappa": np.asarray(s.cut_beta2), "alpha2_over_kappa": alphas},
                      provenance={"beta2_over_kappa": "axis", "alpha2_over_kappa": "axis",
                                  "Ta_numeric": "numeric", "Ta_analytic": "analytic"})
    for (a, b), (num, ana, rep) in zip(cells, out):
        cuts.rows.append((b, a, num["T_a"], ana["T_a"]))
        reports.append(rep)
    cuts.check_complete()
    ta_num, ta_ana = grid.column("Ta_numeric"), grid.column("Ta_analytic")
    report = {**_truncation_summary(reports), "max_abs_Ta_deviation": float(np.nanmax(np.abs(ta_num - ta_ana)))}
    return ScenarioResult(config, [grid, cuts], report, reports)


def run_fig3(config: RunConfig) -> ScenarioResult:
    s = config.sweep
    betas = s.beta2_axis()
    cells = [(s.fixed_alpha2, b) for b in betas]
    out = _pmap(partial(steady_cell, config.params, config.truncation), cells, config.jobs)
    cols, prov = _steady_columns([("sigma22", "sigma22"), ("sigma33", "sigma33"), ("T_a", "Ta")])
    table = SweepTable("fig3", ("beta2_over_kappa", *cols), axes={"beta2_over_kappa": betas},
                       provenance={"beta2_over_kappa": "axis", **prov})
    reports = []
    for (_, b), (num, ana, rep) in zip(cells, out):
        table.rows.append((b, num["sigma22"], ana["sigma22"], num["sigma33"], ana["sigma33"], num["T_a"], ana["T_a"]))
        reports.append(rep)
    table.check_complete()
    diff = table.column("sigma22_numeric") - table.column("sigma33_numeric")
    k = int(np.argmin(np.abs(diff)))
    report = {**_truncation_summary(reports), "alpha2_over_kappa": s.fixed_alpha2,
              "crossing_beta2_over_kappa": float(betas[k]), "crossing_abs_difference": float(abs(diff[k]))}
    return ScenarioResult(config, [table], report, reports)


# ---- cascaded pulses -------------------------------------------------------

@dataclass
class CascadeRun:
    n_s: int
    metrics: object
    fluxes: dict
    times: np.ndarray
    run: object
    bundle: object


def _cascade_dim(levels):
    d = 3 * (levels["n_a"] + 1) * (levels["n_b"] + 1) * (levels["n_d1"] + 1)
    return d * (levels["n_d2"] + 1) if "n_d2" in levels else d


def _cascade_eval(params, timing, n_s, rtol, runs, levels):
    spec = timing.cascade_spec(n_s)
    layout = default_layout(levels["n_a"], levels["n_b"], levels["n_d1"], levels.get("n_d2"))
    bundle = build_cascaded(params, spec, layout)
    t = timing.grid()
    run = evolve(bundle.rho0, bundle, t, cascade_observables(layout), rtol=rtol, atol=rtol * 1e-2,
                 max_step=spec.sigma / 2)
    t0, t1 = timing.signal_window()
    m = pulse_metrics(run, params, bundle, spec, t0, t1, timing.probe_window())
    runs[tuple(sorted(levels.items()))] = CascadeRun(n_s, m, cascade_fluxes(run, params, bundle, spec), t, run, bundle)
    return {"T_b": m.T_b, "T_b_peak": m.T_b_peak, "R_a": m.R_a, "T_a": m.T_a}


def solve_cascade(params: QcnParams, timing: Timing, n_s: int, truncation: Truncation, rtol: float):
    """One cascaded run; cavity ``a`` and source ``d1`` are cut off exactly at ``n_s``.

    Returns ``(CascadeRun, TruncationReport, observables)``.
    """
    runs = {}
    evaluate = partial(_cascade_eval, params, timing, n_s, rtol, runs)
    exact = {"n_a": n_s, "n_d1": n_s}
    adjustable = ["n_b"] + (["n_d2"] if timing.probe_mode == "cascaded_source" else [])
    try:
        if truncation.mode == "fixed":
            levels = {**exact, **{m: getattr(truncation, m) or truncation.n_b for m in adjustable}}
            obs, report = fixed_levels(evaluate, levels, _cascade_dim)
        else:
            start = {m: truncation.start for m in adjustable}
            obs, report = ladder(evaluate, start, _cascade_dim, truncation.tolerance, truncation.max_dim, exact)
    except QcnError as exc:
        raise _locate(exc, f"n_s={n_s}") from exc
    return runs[tuple(sorted(report.levels.items()))], report, obs


def _cascade_job(params, timing, truncation, rtol, n_s):
    run, report, _ = solve_cascade(params, timing, n_s, truncation, rtol)
    # the full state history is not needed by the coordinator
    return replace(run, run=None, bundle=None), report


TRACE_COLUMNS = ("t_over_kappa_inv", "probe_in_flux", "probe_out_flux", "signal_in_flux", "signal_out_flux", "n_s")
METRIC_COLUMNS = ("n_s", "Tb_window", "Tb_peak", "Ra", "Ta", "input_photons", "residual_excitation", "n_b_level")


def _pulse_tables(prefix, timing, runs, reports):
    traces = SweepTable(prefix, TRACE_COLUMNS,
                        axes={"n_s": np.array([r.n_s for r in runs]), "t_over_kappa_inv": timing.grid()},
                        provenance={c: "numeric" for c in TRACE_COLUMNS} | {"t_over_kappa_inv": "axis", "n_s": "axis"})
    metrics = SweepTable(f"{prefix}_metrics", METRIC_COLUMNS, axes={"n_s": np.array([r.n_s for r in runs])},
                         provenance={"n_s": "axis"})
    scale = timing.time_scale
    for r, rep in zip(runs, reports):
        f = r.fluxes
        for i, t in enumerate(r.times):
            traces.rows.append((t / scale, f["probe_in"][i], f["probe_out"][i], f["signal_in"][i],
                                f["signal_out"][i], r.n_s))
        m = r.metrics
        metrics.rows.append((r.n_s, m.T_b, m.T_b_peak, m.R_a, m.T_a, m.input_photons, m.residual_excitation,
                             rep.levels["n_b"]))
    traces.check_complete()
    return traces, metrics


def _run_pulses(config: RunConfig, prefix: str):
    timing = config.cascade
    if any(n < 0 for n in timing.n_s):
        raise ConfigError("n_s values must be >= 0")
    fn = partial(_cascade_job, config.params, timing, config.truncation, config.rtol)
    out = _pmap(fn, timing.n_s, config.jobs)
    runs = [r for r, _ in out]
    reports = [rep for _, rep in out]
    traces, metrics = _pulse_tables(prefix, timing, runs, reports)
    report = _truncation_summary(reports)
    for r in runs:
        m = r.metrics
        report[f"Tb_window_ns{r.n_s}"] = m.T_b
        report[f"Tb_peak_ns{r.n_s}"] = m.T_b_peak
        if m.R_a is not None:
            report[f"Ra_ns{r.n_s}"] = m.R_a
    return ScenarioResult(config, [traces, metrics], report, reports, {"runs": runs})


def run_fig4(config: RunConfig) -> ScenarioResult:
    return _run_pulses(config, "fig4")


def run_preset_rb87(config: RunConfig) -> ScenarioResult:
    res = _run_pulses(config, "preset_rb87")
    p = config.params
    kappa_mhz = RB87_MHZ["kappa_ex1"] + RB87_MHZ["kappa_ex2"] + RB87_MHZ["kappa_in"]
    res.report["kappa_a_mhz"] = kappa_mhz
    res.report["g_over_kappa"] = p.g1
    single = [r for r in res.details["runs"] if r.n_s == 1]
    if single:
        survival = single[0].metrics.R_a
        res.report["survival_ns1"] = survival
        res.report["survival_exceeds_target"] = bool(survival > RB87_SURVIVAL_TARGET)
    params = SweepTable("preset_rb87_params", ("name", "mhz", "over_kappa"))
    normalized = {"kappa_ex1": p.kappa_ex[0], "kappa_ex2": p.kappa_ex[1], "kappa_ex3": p.kappa_ex[2],
                  "kappa_ex4": p.kappa_ex[3], "kappa_in": p.kappa_in_a, "gamma": p.gamma21, "g": p.g1}
    for name, mhz in RB87_MHZ.items():
        params.rows.append((name, mhz, normalized[name]))
    res.tables.append(params)
    return res


RUNNERS = {"steady": run_steady, "sweep2d": run_sweep2d, "fig2": run_fig2, "fig3": run_fig3,
           "fig4": run_fig4, "preset_rb87": run_preset_rb87}


def run(config: RunConfig) -> ScenarioResult:
    return RUNNERS[config.scenario](config)
