"""End-to-end analysis of a survey file into a bundle of report tables.

Stages run in a fixed order; each writes its own files and records a
status in ``summary.json``. A failing stage does not stop the others
unless they need its output.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .core import PanelDataset, ShareVector, StateSpace
from .decomposition import CounterfactualMode, ReferenceRule, decompose_volatility, fitted_shares
from .dynamics import aggregate_seasonal, equilibrium
from .estimation import RegularizationMethod, count_transitions, estimate_from_counts
from .exceptions import ConfigError, EmptyCountsWarning, LabourFlowError
from .forecasting import SeasonalSeries, combine_forecasts, counterfactual_gap
from .inference import (
    bootstrap_equilibrium,
    bootstrap_individuals,
    bootstrap_seasonal,
    pairwise_equilibrium_tests,
)
from .io import Table, emit_table, load_panel, write_json

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "LABOURFLOWS_OUTPUT_DIR"
STAGES = ("estimate", "annual", "bootstrap", "equilibrium", "decompose", "forecast")
# stages each stage needs to have succeeded first
_NEEDS = {
    "estimate": (),
    "annual": ("estimate",),
    "bootstrap": ("annual",),
    "equilibrium": ("annual",),
    "decompose": ("estimate",),
    "forecast": ("estimate",),
}
OK, FAILED, SKIPPED = "ok", "failed", "skipped"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a pipeline run needs; field names double as config-file keys and CLI flags."""

    input_path: str
    states: tuple
    input_format: str = "panel"
    period_order: str | None = None
    method: str = "truncate_absorb"
    tau: int = 4
    bootstrap_B: int = 0
    bootstrap_seed: int = 0
    bootstrap_unit: str = "records"
    target_states: tuple | None = None
    reference: str = "hp_trend"
    mode: str = "one_step"
    hp_lambda: float = 1600.0
    forecast_origin: str | None = None
    horizon: int = 8
    forecast_series: str = "all"
    output_dir: str = "labourflows-report"

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if not self.input_path:
            raise ConfigError("input_path is required")
        for key in ("input_path", "period_order", "output_dir"):
            if isinstance(getattr(self, key), os.PathLike):
                set_(key, os.fspath(getattr(self, key)))
        if isinstance(self.states, str):
            set_("states", tuple(s.strip() for s in self.states.split(",") if s.strip()))
        set_("states", tuple(self.states))
        if len(self.states) < 2 or len(set(self.states)) != len(self.states):
            raise ConfigError("states must list at least two distinct labels")
        if self.input_format not in ("panel", "counts"):
            raise ConfigError(f"input_format must be 'panel' or 'counts', got {self.input_format!r}")
        try:
            RegularizationMethod.parse(self.method)
            CounterfactualMode.parse(self.mode)
            ReferenceRule(self.reference, self.hp_lambda)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        for name, lo in (("tau", 1), ("bootstrap_B", 0), ("horizon", 1)):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")
        if not self.hp_lambda > 0:
            raise ConfigError("hp_lambda must be positive")
        if self.target_states is not None:
            ts = self.target_states
            if isinstance(ts, str):
                ts = [s.strip() for s in ts.split(",") if s.strip()]
            ts = tuple(ts)
            unknown = [s for s in ts if s not in self.states]
            if unknown:
                raise ConfigError(f"target states {unknown} are not in the state list")
            set_("target_states", ts)
        if self.bootstrap_unit not in ("records", "individuals"):
            raise ConfigError("bootstrap_unit must be 'records' or 'individuals'")
        if self.forecast_series not in ("all", "shares", "rates"):
            raise ConfigError("forecast_series must be 'all', 'shares' or 'rates'")

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | os.PathLike | None = None) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        data = dict(data)
        # relative input paths in a config file are relative to that file
        if base_dir is not None:
            for key in ("input_path", "period_order"):
                if data.get(key) and not os.path.isabs(data[key]):
                    data[key] = os.path.join(base_dir, data[key])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["states"] = list(self.states)
        if self.target_states is not None:
            d["target_states"] = list(self.target_states)
        # the bundle must not depend on where it was written
        d.pop("output_dir")
        return d


@dataclass
class StageResult:
    name: str
    status: str
    files: list = field(default_factory=list)
    error: str | None = None


@dataclass
class Report:
    output_dir: Path
    stages: list

    @property
    def ok(self) -> bool:
        return all(s.status != FAILED for s in self.stages)

    def stage(self, name) -> StageResult:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class _Data:
    """Inputs shared by every stage, built once from the input file."""

    space: StateSpace
    periods: tuple            # every observed period
    counts: list              # TransitionCounts for each consecutive pair
    shares: list              # observed shares at each period (len(periods))
    panel: PanelDataset | None = None


def _load(config: PipelineConfig) -> _Data:
    loaded = load_panel(config.input_path, config.input_format, config.states, config.period_order)
    space = StateSpace(config.states)
    if isinstance(loaded, PanelDataset):
        periods = loaded.periods
        if len(periods) < 2:
            raise ConfigError("the panel needs at least two periods")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyCountsWarning)
            counts = [count_transitions(loaded, a, b) for a, b in zip(periods[:-1], periods[1:])]
        shares = [_observed_share(loaded.occupancy(p), space, p) for p in periods]
        return _Data(space, periods, counts, shares, loaded)
    counts = [c for c in loaded if c.to_period is not None]
    if not counts:
        raise ConfigError("the counts file needs at least two periods")
    periods = tuple(c.period for c in loaded)
    shares = [_observed_share(c.row_totals, space, c.period) for c in loaded]
    return _Data(space, periods, counts, shares, None)


def _observed_share(occ, space, period) -> ShareVector | None:
    occ = np.asarray(occ, dtype=float)
    return ShareVector(occ / occ.sum(), space, period) if occ.sum() > 0 else None


class _Runner:
    def __init__(self, config: PipelineConfig, out: Path, data: _Data):
        self.cfg = config
        self.out = out
        self.data = data
        self.method = RegularizationMethod.parse(config.method)
        self.summary: dict[str, Any] = {}
        self.estimates: list = []
        self.annual: list = []        # (year, start, end, GeneratorMatrix or None, member indices)
        self.boot: dict = {}          # year -> (BootstrapResult, EquilibriumBootstrap)

    def emit(self, stage: StageResult, name: str, table: Table) -> None:
        emit_table(table, self.out / name)
        stage.files.append(name)

    # ---------------------------------------------------------------- stages

    def estimate(self, stage: StageResult) -> None:
        d = self.data
        labels = d.space.labels
        self.estimates = [estimate_from_counts(c, self.method) for c in d.counts]
        gen = Table(("from_period", "to_period", "from", "to", "rate"))
        status = Table(("from_period", "to_period", "valid", "series_converged",
                        "negative_mass_removed", "terms_used", "error"))
        for est, c in zip(self.estimates, d.counts):
            Q = est.Q.entries if est.is_valid else np.full((d.space.K,) * 2, np.nan)
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    gen.append(c.period, c.to_period, a, b, Q[i, j])
            status.append(c.period, c.to_period, est.is_valid, est.series_converged,
                          est.negative_mass_removed, est.terms_used, est.error)
        self.emit(stage, "generators.csv", gen)
        self.emit(stage, "estimates.csv", status)

        # one-step fitted shares: observed share at t pushed through Q_t
        fitted = [None] * len(d.periods)
        for t, est in enumerate(self.estimates):
            if est.is_valid and d.shares[t] is not None:
                fitted[t + 1] = fitted_shares([est.Q], [d.shares[t]])[0]
        tab = Table(("period", "state", "observed", "fitted"))
        for t, p in enumerate(d.periods):
            for k, lab in enumerate(labels):
                obs = d.shares[t].shares[k] if d.shares[t] is not None else None
                fit = fitted[t].shares[k] if fitted[t] is not None else None
                tab.append(p, lab, obs, fit)
        self.emit(stage, "fitted_shares.csv", tab)

        ok = [t for t in range(len(d.periods)) if fitted[t] is not None and d.shares[t] is not None]
        corr = Table(("state", "correlation", "n"))
        corrs = {}
        for k, lab in enumerate(labels):
            x = np.array([d.shares[t].shares[k] for t in ok])
            y = np.array([fitted[t].shares[k] for t in ok])
            r = float(np.corrcoef(x, y)[0, 1]) if len(ok) > 2 and x.std() > 0 and y.std() > 0 else None
            corrs[lab] = r
            corr.append(lab, r, len(ok))
        self.emit(stage, "correlations.csv", corr)
        self.summary["correlations"] = {k: (None if v is None else float(f"{v:.6g}")) for k, v in corrs.items()}
        n_bad = sum(not e.is_valid for e in self.estimates)
        self.summary["invalid_period_pairs"] = n_bad
        if n_bad == len(self.estimates):
            raise LabourFlowError("no period pair produced a valid generator")

    def annual_stage(self, stage: StageResult) -> None:
        tau = self.cfg.tau
        labels = self.data.space.labels
        n_years = len(self.estimates) // tau
        if n_years == 0:
            raise LabourFlowError(f"fewer than tau={tau} period pairs")
        tab = Table(("year", "start_period", "end_period", "from", "to", "rate"))
        for y in range(n_years):
            idx = list(range(y * tau, (y + 1) * tau))
            members = [self.estimates[i] for i in idx]
            start, end = self.data.counts[idx[0]].period, self.data.counts[idx[-1]].to_period
            Qa = aggregate_seasonal([e.Q for e in members]) if all(e.is_valid for e in members) else None
            self.annual.append((y, start, end, Qa, idx))
            A = Qa.entries if Qa is not None else np.full((len(labels),) * 2, np.nan)
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    tab.append(y, start, end, a, b, A[i, j])
        self.emit(stage, "annual_generators.csv", tab)
        if all(a[3] is None for a in self.annual):
            raise LabourFlowError("no complete year has valid generators for every season")

    def bootstrap(self, stage: StageResult) -> None:
        B = self.cfg.bootstrap_B
        labels = self.data.space.labels
        gen = Table(("year", "from", "to", "rate", "se"))
        errors = []
        for y, start, end, Qa, idx in self.annual:
            if Qa is None:
                continue
            seed = int(np.random.SeedSequence([self.cfg.bootstrap_seed, y]).generate_state(1)[0])
            try:
                if self.cfg.bootstrap_unit == "individuals" and self.data.panel is not None:
                    window = [self.data.periods[i] for i in idx] + [self.data.periods[idx[-1] + 1]]
                    res = bootstrap_individuals(self.data.panel, window, B, seed, self.method)
                else:
                    res = bootstrap_seasonal([self.data.counts[i] for i in idx], B, seed, self.method)
                eq = bootstrap_equilibrium(res)
            except (LabourFlowError, ValueError) as exc:
                errors.append(f"year {y}: {exc}")
                continue
            self.boot[y] = (res, eq)
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    gen.append(y, a, b, res.point.entries[i, j], res.se[i, j])
        self.emit(stage, "bootstrap_generators.csv", gen)
        years = sorted(self.boot)
        tests = Table(("year_a", "year_b", "state", "difference", "p_value"))
        for ya, yb in zip(years[:-1], years[1:]):
            ea, eb = self.boot[ya][1], self.boot[yb][1]
            p = pairwise_equilibrium_tests(ea, eb)
            for k, lab in enumerate(labels):
                tests.append(ya, yb, lab, ea.point[k] - eb.point[k], p[k])
        self.emit(stage, "pairwise_equilibrium_tests.csv", tests)
        if errors:
            raise LabourFlowError("; ".join(errors))

    def equilibrium_stage(self, stage: StageResult) -> None:
        labels = self.data.space.labels
        with_se = self.cfg.bootstrap_B > 0
        cols = ("year", "start_period", "end_period", "state", "share") + (("se",) if with_se else ())
        tab = Table(cols)
        speed = Table(("year", "spectral_gap", "half_life"))
        errors = []
        for y, start, end, Qa, _ in self.annual:
            try:
                if Qa is None:
                    raise LabourFlowError("annual generator unavailable")
                res = equilibrium(Qa)
                x, gap, half = res.shares.shares, res.spectral_gap, res.half_life
            except LabourFlowError as exc:
                errors.append(f"year {y}: {exc}")
                x, gap, half = np.full(len(labels), np.nan), np.nan, np.nan
            se = self.boot[y][1].se if y in self.boot else np.full(len(labels), np.nan)
            for k, lab in enumerate(labels):
                tab.append(y, start, end, lab, x[k], *((se[k],) if with_se else ()))
            speed.append(y, gap, half)
        self.emit(stage, "equilibrium.csv", tab)
        self.emit(stage, "convergence.csv", speed)
        if errors:
            raise LabourFlowError("; ".join(errors))

    def decompose(self, stage: StageResult) -> None:
        d = self.data
        if not all(e.is_valid for e in self.estimates):
            raise LabourFlowError("decomposition needs a valid generator for every period pair")
        if any(s is None for s in d.shares):
            raise LabourFlowError("decomposition needs observed shares in every period")
        Qs = [e.Q for e in self.estimates]
        rule = ReferenceRule(self.cfg.reference, self.cfg.hp_lambda)
        targets = self.cfg.target_states or d.space.labels
        mode = CounterfactualMode.parse(self.cfg.mode)
        betas = Table(("target", "from", "to", "beta"))
        cycles = Table(("target", "period", "series", "value"))
        errors = []
        # cycles are dated at the end of each period pair
        dates = [c.to_period for c in d.counts]
        for target in targets:
            try:
                tab = decompose_volatility(Qs, d.shares, target, rule=rule, mode=mode,
                                           hp_lambda=self.cfg.hp_lambda)
            except (LabourFlowError, ValueError) as exc:
                errors.append(f"{target}: {exc}")
                continue
            for a, b, beta in tab.rows():
                betas.append(target, a, b, beta)
            for t, p in enumerate(dates):
                cycles.append(target, p, "fitted", tab.fitted_cycle[t])
                for (a, b), cyc in tab.counterfactual_cycles.items():
                    cycles.append(target, p, f"{a}->{b}", cyc[t])
        self.emit(stage, "decomposition.csv", betas)
        self.emit(stage, "decomposition_cycles.csv", cycles)
        if errors:
            raise LabourFlowError("; ".join(errors))

    def _forecast_inputs(self):
        """(name, period ids, values) for every series to forecast."""
        d = self.data
        labels = d.space.labels
        out = []
        if self.cfg.forecast_series in ("all", "shares"):
            for k, lab in enumerate(labels):
                vals = [s.shares[k] if s is not None else np.nan for s in d.shares]
                out.append((f"share:{lab}", list(d.periods), vals))
        if self.cfg.forecast_series in ("all", "rates"):
            ids = [c.period for c in d.counts]
            for i, a in enumerate(labels):
                for j, b in enumerate(labels):
                    if i != j:
                        vals = [e.Q.entries[i, j] if e.is_valid else np.nan for e in self.estimates]
                        out.append((f"rate:{a}->{b}", ids, vals))
        return out

    def forecast(self, stage: StageResult) -> None:
        h = self.cfg.horizon
        tau = self.cfg.tau
        origin = self.cfg.forecast_origin
        fc = Table(("series", "period", "horizon", "point", "lower80", "upper80", "lower95", "upper95",
                    "observed", "gap", "outside80", "outside95"))
        models = Table(("series", "family", "order", "aicc", "status"))
        errors = []
        for name, ids, vals in self._forecast_inputs():
            if origin is None:
                cut = len(ids)
            elif origin in ids:
                cut = ids.index(origin) + 1
            else:
                errors.append(f"{name}: origin {origin!r} not among its periods")
                continue
            fit_vals = np.asarray(vals[:cut], dtype=float)
            if not np.all(np.isfinite(fit_vals)):
                errors.append(f"{name}: missing values before the origin")
                continue
            try:
                res = combine_forecasts(SeasonalSeries(fit_vals, tau, tuple(ids[:cut])), h)
            except (LabourFlowError, ValueError) as exc:
                errors.append(f"{name}: {exc}")
                continue
            future = vals[cut:cut + h]
            gaps = counterfactual_gap(np.asarray(future, dtype=float), res)
            labels = list(ids[cut:cut + h]) + [f"{ids[cut - 1]}+{k}" for k in range(len(future) + 1, h + 1)]
            for k in range(h):
                g = gaps[k]
                obs = future[k] if k < len(future) else None
                fc.append(name, labels[k], k + 1, res.point[k], res.lower80[k], res.upper80[k],
                          res.lower95[k], res.upper95[k], obs, g.gap, _flag(g.outside80), _flag(g.outside95))
            for fam, order, score in res.models_used:
                models.append(name, fam, order, score, OK)
            for fam, msg in res.failed:
                models.append(name, fam, None, None, f"failed: {msg}")
        self.emit(stage, "forecast.csv", fc)
        self.emit(stage, "forecast_models.csv", models)
        if errors:
            raise LabourFlowError("; ".join(errors))


def _flag(f):
    return "unobserved" if f is None else f


def run_pipeline(config: PipelineConfig, stages: Sequence[str] | None = None) -> Report:
    """Run the requested stages (all by default) and write the report bundle.

    Stage failures are recorded in the report and in ``summary.json``;
    input and configuration errors propagate.
    """
    wanted = tuple(STAGES if stages is None else stages)
    bad = [s for s in wanted if s not in STAGES]
    if bad:
        raise ConfigError(f"unknown stages {bad}")
    # pull in prerequisites
    closure = set(wanted)
    for s in reversed(STAGES):
        if s in closure:
            closure.update(_NEEDS[s])
    out = config.resolved_output_dir()
    data = _load(config)
    out.mkdir(parents=True, exist_ok=True)
    runner = _Runner(config, out, data)
    handlers = {
        "estimate": runner.estimate,
        "annual": runner.annual_stage,
        "bootstrap": runner.bootstrap,
        "equilibrium": runner.equilibrium_stage,
        "decompose": runner.decompose,
        "forecast": runner.forecast,
    }
    results: dict[str, StageResult] = {}
    for name in STAGES:
        if name not in closure:
            continue
        stage = StageResult(name, OK)
        results[name] = stage
        if name == "bootstrap" and config.bootstrap_B == 0:
            stage.status = SKIPPED
            stage.error = "bootstrap disabled (B = 0)"
            continue
        missing = [n for n in _NEEDS[name] if results.get(n) is None or not results[n].files]
        if missing:
            stage.status = FAILED
            stage.error = f"needs output of {', '.join(missing)}"
            continue
        log.info("stage %s", name)
        try:
            handlers[name](stage)
        except (LabourFlowError, ValueError, np.linalg.LinAlgError) as exc:
            stage.status = FAILED
            stage.error = str(exc)
            log.warning("stage %s failed: %s", name, exc)
    report = Report(out, list(results.values()))
    summary = {
        "config": config.to_dict(),
        "periods": list(data.periods),
        "stages": [dataclasses.asdict(s) for s in report.stages],
        **runner.summary,
    }
    write_json(summary, out / "summary.json")
    return report
