"""Experiment runner: carve runs, scaling sweeps, GHZ curves, phase plans
and rate/transmission spectra, driven by JSON configs.

Every experiment is deterministic given its config and seed; sweep points
are independent and may run on a thread pool (the RK4 kernels release the
GIL), with output assembly always in grid order so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics, dynamics, phase_control
from .analytics import transmission
from .basis import build_basis, css_state
from .model import (DriveTone, LevelModel, PhysicalParams, balanced_params,
                    gamma_m, kappa_m, params_from_config, tones_from_config,
                    TWO_PI)

EXPERIMENT_KINDS = ("dicke", "sweep", "ghz", "phase_plan", "spectrum")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Validated experiment description.

    ``raw`` keeps the normalized mapping so parse -> serialize -> parse is
    the identity; kind-specific access goes through the helpers below.
    """

    experiment: str
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        kind = doc.get("experiment")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment must be one of {EXPERIMENT_KINDS}")
        cfg = cls(experiment=kind, raw=dict(doc))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dict(self.raw)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # -- typed accessors ---------------------------------------------------

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def require(self, key):
        if key not in self.raw:
            raise ConfigError(f"{self.experiment} config needs '{key}'")
        return self.raw[key]

    def params(self) -> PhysicalParams:
        return params_from_config(self.require("params"))

    def seed(self) -> int:
        return int(self.get("seed", 0))

    def validate(self) -> None:
        kind = self.experiment
        if kind == "dicke":
            self.require("params")
            n = int(self.require("n_qubits"))
            keep = int(self.require("keep_m"))
            if not 0 <= keep <= n:
                raise ConfigError("keep_m outside 0..n_qubits")
        elif kind == "sweep":
            n = int(self.require("n_qubits"))
            grid = self.require("c_over_n_grid")
            if not grid:
                raise ConfigError("c_over_n_grid must be non-empty")
            if any(x <= 0 for x in grid):
                raise ConfigError("c_over_n_grid entries must be > 0")
        elif kind == "ghz":
            grid = self.require("c_over_n_grid")
            if not grid:
                raise ConfigError("c_over_n_grid must be non-empty")
        elif kind == "phase_plan":
            int(self.require("n_qubits"))
            if "targets" not in self.raw and "random_targets" not in self.raw:
                raise ConfigError("phase_plan needs targets or random_targets")
            if "c" not in self.raw and "params" not in self.raw:
                raise ConfigError("phase_plan needs c or params")
        elif kind == "spectrum":
            self.require("params")
            int(self.require("n_qubits"))
            grid = self.require("delta_grid_mhz")
            for key in ("min", "max", "points"):
                if key not in grid:
                    raise ConfigError(f"delta_grid_mhz needs '{key}'")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def fit_exponential_decade(times, pops) -> tuple[float, float]:
    """Log-linear fit of a decaying population over its first decade.

    Returns (rate, r_squared); the window runs from t=0 until the trace
    first drops below a tenth of its initial value (or the full range).
    """
    pops = np.asarray(pops, dtype=float)
    times = np.asarray(times, dtype=float)
    ref = pops[0]
    below = np.nonzero(pops < 0.1 * ref)[0]
    hi = int(below[0]) + 1 if len(below) else len(pops)
    if hi < 3:
        raise ValueError("not enough samples inside the first decade")
    t, y = times[:hi], np.log(pops[:hi])
    coef = np.polyfit(t, y, 1)
    resid = y - np.polyval(coef, t)
    r2 = 1.0 - float(resid.var()) / float(y.var())
    return float(-coef[0]), r2


def _propagate_to_crossing(psi, params, tones, t_start, keep_weight,
                           propagator, sample_target, dt=None,
                           spin_echo=False, max_extensions=2):
    """Run until the down population crosses keep_weight/e, extending the
    horizon when needed.  Returns (result, t_1e)."""
    t_final = t_start
    for _ in range(max_extensions + 1):
        if propagator == "master":
            result = dynamics.evolve_master(psi.to_density(), params, tones,
                                            t_final, dt=dt,
                                            sample_target=sample_target,
                                            spin_echo=spin_echo)
        else:
            result = dynamics.evolve_no_jump(psi, params, tones, t_final,
                                             dt=dt,
                                             sample_target=sample_target,
                                             spin_echo=spin_echo)
        try:
            return result, dynamics.find_t_1e(result,
                                              reference_weight=keep_weight)
        except dynamics.NoCrossingError:
            t_final *= 2.0
    raise dynamics.NoCrossingError(t_final / 2.0, float(result.survival[-1]),
                                   keep_weight / math.e)


# ---------------------------------------------------------------------------
# dicke
# ---------------------------------------------------------------------------

def run_dicke_carve(config: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Carve a single Dicke level: plan tones, evolve, post-select at the
    1/e heralding time and report infidelity and rate checks."""
    out_dir = Path(out_dir)
    params = config.params()
    n = int(config.require("n_qubits"))
    keep = int(config.require("keep_m"))
    basis = build_basis(n)
    psi = css_state(n, basis)

    w_fraction = float(config.get("w_fraction", 1.0 / 20.0))
    placement = config.get("placement", "exact")
    propagator = config.get("propagator", "master")
    spin_echo = bool(config.get("spin_echo", False))
    sample_target = int(config.get("sample_target", 2500))
    dt = config.get("dt_us")
    dt = float(dt) if dt is not None else None

    if config.get("tones"):
        tones = tones_from_config(config.raw["tones"])
        plan = None
        t_start = float(config.require("t_final_us"))
        predicted = analytics.level_decay_rates(
            tones, params, LevelModel.from_params(params, n, placement))
    else:
        plan = analytics.plan_dicke_carve(
            n, keep, params, w_fraction=w_fraction, placement=placement,
            target_suppression=config.get("target_suppression"))
        tones = list(plan.tones)
        t_start = float(config.get("t_final_us",
                                   1.35 * plan.duration))
        predicted = analytics.level_decay_rates(tones, params,
                                                plan.level_model)

    keep_weight = float(psi.down_populations()[keep])
    result, t_1e = _propagate_to_crossing(psi, params, tones, t_start,
                                          keep_weight, propagator,
                                          sample_target, dt=dt,
                                          spin_echo=spin_echo)
    i_cross = int(np.searchsorted(result.times, t_1e))
    i_cross = min(i_cross, len(result.times) - 1)
    outcome = dynamics.carve_outcome(result.state_at(i_cross), keep)

    fitted = {}
    for m in range(n + 1):
        try:
            rate, r2 = fit_exponential_decade(result.times,
                                              result.pop_down[:, m])
            fitted[m] = {"rate_per_us": rate, "r_squared": r2}
        except ValueError:
            fitted[m] = None

    result.to_csv(out_dir / "dicke_timeseries.csv")
    summary = {
        "epsilon": outcome.infidelity,
        "success_prob": outcome.success_probability,
        "t_1e_us": t_1e,
        "t_final_us": float(result.times[-1]),
        "dt_us": result.dt,
        "propagator": propagator,
        "keep_m": keep,
        "n_qubits": n,
        "predicted_rates_per_us": {m: predicted[m] for m in range(n + 1)},
        "fitted_rates": fitted,
        "epsilon_analytic": (analytics.multi_tone_infidelity(plan, params)
                             if plan is not None else None),
        "planned_duration_us": plan.duration if plan is not None else None,
    }
    _write_json(out_dir / "dicke_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _sweep_point(n, keep, x, kappa, gamma_e, w_fraction, placement,
                 propagator, sample_target, t_factor):
    c = x * n
    params = balanced_params(c, keep, kappa, gamma_e)
    basis = build_basis(n)
    psi = css_state(n, basis)
    plan = analytics.plan_dicke_carve(n, keep, params,
                                      w_fraction=w_fraction,
                                      placement=placement)
    point = {
        "c_over_n": x,
        "eps_cf_analytic": analytics.multi_tone_infidelity(plan, params),
        "eps_f_analytic": analytics.f_infidelity(c, keep),
    }
    keep_weight = float(psi.down_populations()[keep])
    try:
        result, t_1e = _propagate_to_crossing(
            psi, params, list(plan.tones), t_factor * plan.duration,
            keep_weight, propagator, sample_target)
        pops = np.array([np.interp(t_1e, result.times, result.pop_down[:, m])
                         for m in range(n + 1)])
        point.update({
            "eps_sim": float(1.0 - pops[keep] / pops.sum()),
            "success_prob": float(pops.sum()),
            "t_1e_us": t_1e,
            "converged": True,
        })
    except dynamics.NoCrossingError:
        point.update({"eps_sim": float("nan"), "success_prob": float("nan"),
                      "t_1e_us": float("nan"), "converged": False})
    return point


def run_sweep(config: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Scan cooperativity at fixed kappa, gamma_e (g varied, detuning
    re-balanced per point) and fit log eps_sim against C/N."""
    out_dir = Path(out_dir)
    n = int(config.require("n_qubits"))
    keep = int(config.get("keep_m", n // 2))
    grid = [float(x) for x in config.require("c_over_n_grid")]
    kappa = TWO_PI * float(config.get("kappa_mhz", 0.2))
    gamma_e = TWO_PI * float(config.get("gamma_e_mhz", 6.0))
    w_fraction = float(config.get("w_fraction", 1.0 / 20.0))
    placement = config.get("placement", "exact")
    propagator = config.get("propagator", "nojump")
    sample_target = int(config.get("sample_target", 3000))
    t_factor = float(config.get("t_factor", 1.3))

    def job(x):
        return _sweep_point(n, keep, x, kappa, gamma_e, w_fraction,
                            placement, propagator, sample_target, t_factor)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(job, grid))
    else:
        points = [job(x) for x in grid]

    rows = [[f"{p['c_over_n']:.12g}", f"{p['eps_cf_analytic']:.12g}",
             f"{p['eps_f_analytic']:.12g}", f"{p['eps_sim']:.12g}",
             f"{p['success_prob']:.12g}", int(p["converged"])]
            for p in points]
    _write_csv(out_dir / "sweep.csv",
               ["c_over_n", "eps_cf_analytic", "eps_f_analytic", "eps_sim",
                "success_prob", "converged"], rows)

    good = [p for p in points if p["converged"] and p["eps_sim"] > 0]
    summary = {"n_qubits": n, "keep_m": keep, "n_points": len(points),
               "n_converged": len(good)}
    if len(good) >= 2:
        xs = np.array([p["c_over_n"] for p in good])
        ys = np.log([p["eps_sim"] for p in good])
        slope, intercept = np.polyfit(xs, ys, 1)
        summary.update({"slope": float(slope),
                        "prefactor": float(np.exp(intercept))})
        xs_a = np.array([p["c_over_n"] for p in points])
        ys_a = np.log([p["eps_cf_analytic"] for p in points])
        sa, ia = np.polyfit(xs_a, ys_a, 1)
        summary.update({"slope_analytic": float(sa),
                        "prefactor_analytic": float(np.exp(ia))})
    _write_json(out_dir / "sweep_summary.json", summary)
    summary["points"] = points
    return summary


# ---------------------------------------------------------------------------
# ghz
# ---------------------------------------------------------------------------

def run_ghz_curve(config: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Evaluate the GHZ tone-ladder infidelities and their large-C/N
    asymptotes over a C/N grid."""
    out_dir = Path(out_dir)
    grid = [float(x) for x in config.require("c_over_n_grid")]
    n = int(config.get("n_qubits", 8))
    j_max = int(config.get("j_max", 10_000))
    rows = []
    curve = []
    for x in grid:
        c = x * n
        cf = analytics.ghz_infidelity(c, n, "counterfactual", j_max)
        f = analytics.ghz_infidelity(c, n, "factual", j_max)
        cf_a = analytics.ghz_asymptote(c, n, "counterfactual")
        f_a = analytics.ghz_asymptote(c, n, "factual")
        rows.append([f"{x:.12g}", f"{cf:.12g}", f"{f:.12g}",
                     f"{cf_a:.12g}", f"{f_a:.12g}"])
        curve.append({"c_over_n": x, "eps_cf": cf, "eps_f": f,
                      "eps_cf_asymptote": cf_a, "eps_f_asymptote": f_a})
    _write_csv(out_dir / "ghz.csv",
               ["c_over_n", "eps_cf", "eps_f", "eps_cf_asymptote",
                "eps_f_asymptote"], rows)
    summary = {"n_qubits": n, "j_max": j_max, "n_points": len(grid)}
    _write_json(out_dir / "ghz_summary.json", summary)
    summary["curve"] = curve
    return summary


# ---------------------------------------------------------------------------
# phase plan
# ---------------------------------------------------------------------------

def run_phase_plan(config: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Plan iterative phase/amplitude corrections, emit the schedule and
    ledger, and optionally verify the schedule numerically."""
    out_dir = Path(out_dir)
    n = int(config.require("n_qubits"))
    b = float(config.get("b", 3.0))
    if "params" in config.raw:
        params = config.params()
        c = params.cooperativity
        level_model = LevelModel.from_params(params, n)
    else:
        params = None
        c = float(config.require("c"))
        level_model = LevelModel.uniform(c, n)

    if "targets" in config.raw:
        phi = np.asarray(config.raw["targets"]["phi"], dtype=float)
        ell = np.asarray(config.raw["targets"].get("ell", np.zeros(n + 1)),
                         dtype=float)
    else:
        spec = config.raw["random_targets"]
        rng = np.random.default_rng(config.seed())
        phi_max = float(spec.get("phi_max", math.pi))
        ell_max = float(spec.get("ell_max", 0.0))
        signs = rng.choice([-1.0, 1.0], size=n + 1)
        phi = signs * rng.uniform(0.2 * phi_max, phi_max, size=n + 1)
        ell = rng.uniform(0.0, ell_max, size=n + 1)

    schedule, ledger = phase_control.iterate_corrections(
        phi, ell, c, n, b=b,
        max_rounds=int(config.get("max_rounds", 6)),
        tol=float(config.get("tol", 1e-9)),
        level_model=level_model)
    bound = phase_control.success_bound(ledger)

    w_fraction = float(config.get("w_fraction", 1.0 / 50.0))
    w = w_fraction * float(level_model.widths.min())
    materialized = phase_control.materialize_durations(schedule, level_model, w)
    with open(out_dir / "schedule.json", "w") as fh:
        fh.write(phase_control.schedule_to_json(materialized))
    ledger_rows = ledger.to_csv_rows()
    _write_csv(out_dir / "ledger.csv", ledger_rows[0], ledger_rows[1:])

    summary = {
        "n_qubits": n, "c": c, "b": b, "x": ledger.x,
        "two_x": 2.0 * ledger.x,
        "rounds": len(schedule),
        "success_bound_limit": bound.limit,
        "success_bound_partial": bound.final_partial,
    }
    if bool(config.get("verify", False)) and schedule:
        init = np.full(n + 1, 1.0 / math.sqrt(n + 1), dtype=np.complex128)
        res = phase_control.verify_schedule_numerically(
            schedule, level_model, init, phi, ell, w_fraction=w_fraction)
        summary["residual_phi_max"] = float(np.max(np.abs(res.residual_phi)))
        summary["residual_ell_max"] = float(np.max(np.abs(res.residual_ell)))
    _write_json(out_dir / "phase_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def run_spectrum(config: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    """Tabulate the per-level Lorentzian decay comb and the transmission
    lineshapes over a probe-detuning grid."""
    out_dir = Path(out_dir)
    params = config.params()
    n = int(config.require("n_qubits"))
    grid = config.require("delta_grid_mhz")
    deltas_mhz = np.linspace(float(grid["min"]), float(grid["max"]),
                             int(grid["points"]))
    w_fraction = float(config.get("w_fraction", 1.0 / 20.0))
    kmin = min(kappa_m(params, m) for m in range(n + 1))
    w = w_fraction * kmin
    omega = w * params.delta_cap / params.g

    header = (["delta_mhz"] + [f"gamma_m{m}_per_us" for m in range(n + 1)]
              + [f"t2_m{m}" for m in range(n + 1)])
    rows = []
    for dmhz in deltas_mhz:
        tone = DriveTone(TWO_PI * float(dmhz), omega)
        gammas = [gamma_m(params, tone, m) for m in range(n + 1)]
        t2 = [abs(transmission(tone.delta, m, params)) ** 2
              for m in range(n + 1)]
        rows.append([f"{dmhz:.12g}"] + [f"{g:.12g}" for g in gammas]
                    + [f"{t:.12g}" for t in t2])
    _write_csv(out_dir / "spectrum.csv", header, rows)
    summary = {"n_qubits": n, "points": len(rows),
               "w_per_us": w, "omega_per_us": omega,
               "dispersive_shift_per_us": params.dispersive_shift}
    _write_json(out_dir / "spectrum_summary.json", summary)
    return summary


RUNNERS = {
    "dicke": run_dicke_carve,
    "sweep": run_sweep,
    "ghz": run_ghz_curve,
    "phase_plan": run_phase_plan,
    "spectrum": run_spectrum,
}


def run_experiment(config: ExperimentConfig, out_dir, workers: int = 1) -> dict:
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    return RUNNERS[config.experiment](config, out_dir, workers=workers)
