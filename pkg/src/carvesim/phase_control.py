"""Iterative Stark phase and amplitude engineering on Dicke levels.

A tone detuned b linewidths from a level imprints a phase at the cost of
an amplitude decay phi/b, and every pulse leaks smaller phase/amplitude
disturbances onto neighboring levels (down by powers of sqrt(N/C)).  The
planner applies targets, predicts the leakage of its own pulses with the
Lorentzian rate formulas, and feeds the negation forward round by round;
worst-case scalar recursions bound the remaining disturbance by a
geometric envelope (2x)^T.  A numeric verifier propagates the schedule
exactly on the dressed two-level blocks and reports per-level residuals.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import LevelModel, PhysicalParams, dressed_survival_amplitude

_MAG_EPS = 1e-12


class NonConvergentRegimeError(RuntimeError):
    """Worst-case contraction factor 2x >= 1; feedforward not guaranteed."""

    def __init__(self, x: float, required_c_over_n: float):
        super().__init__(
            f"2x = {2 * x:.4g} >= 1: worst-case feedforward diverges; "
            f"need C/N > {required_c_over_n:.4g} at this b")
        self.x = x
        self.required_c_over_n = required_c_over_n


@dataclass
class PulseSpec:
    """One pulse: level index, phase or amplitude kind, signed magnitude
    (radians for phase, log-amplitude for amplitude), detuning in
    linewidths b (phase pulses only) and an optional materialized
    duration in us."""

    m: int
    kind: str            # "phase" | "amplitude"
    magnitude: float
    b: float | None = None
    duration: float | None = None

    def __post_init__(self):
        if self.kind not in ("phase", "amplitude"):
            raise ValueError("kind must be 'phase' or 'amplitude'")
        if self.kind == "phase":
            if abs(self.magnitude) > math.pi + 1e-12:
                raise ValueError("|phi| must be <= pi")
            if self.b is None or self.b < 1:
                raise ValueError("phase pulses need b >= 1")
        else:
            if self.magnitude < 0:
                raise ValueError("amplitude reduction must be >= 0")

    @property
    def self_decay(self) -> float:
        """Log-amplitude cost on the addressed level itself."""
        if self.kind == "phase":
            return abs(self.magnitude) / self.b
        return self.magnitude


def stark_pulse(phi: float, b: float, kappa_m: float, w: float) -> PulseSpec:
    """Phase pulse on one level: tone at sign(phi) * b linewidths, with
    the duration that meets the target phase.

    phi = w^2 delta t / ((kappa_m/2)^2 + delta^2) at delta = b kappa_m,
    so t = |phi| kappa_m (1/4 + b^2) / (w^2 b) and the side decay is
    exactly ell = phi / b (the exact ratio ell/phi equals kappa_m/delta).
    """
    if abs(phi) > math.pi + 1e-12:
        raise ValueError("|phi| must be <= pi")
    if b < 1:
        raise ValueError("b must be >= 1")
    duration = abs(phi) * kappa_m * (0.25 + b * b) / (w * w * b)
    return PulseSpec(m=-1, kind="phase", magnitude=phi, b=b, duration=duration)


def amplitude_pulse(ell: float, kappa_m: float, w: float) -> PulseSpec:
    """Resonant pulse reducing one level's log-amplitude by ell:
    ell = 4 w^2 t / kappa_m."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    duration = ell * kappa_m / (4.0 * w * w)
    return PulseSpec(m=-1, kind="amplitude", magnitude=ell, duration=duration)


def disturbance(pulse: PulseSpec, k: int, c: float, n_qubits: int,
                b: float | None = None) -> tuple[float, float]:
    """Leading-order disturbance (ell', phi') a pulse on level m imprints
    on a neighboring level k.

    Amplitude pulse ell_m:  ell' = ell_m / (k-m)^2 * (N/C),
                            phi' = ell_m / (2 (k-m)) * sqrt(N/C).
    Phase pulse phi_m:      ell' = 4 phi_m b / (k-m)^2 * (N/C),
                            phi' = 2 phi_m b / (k-m) * sqrt(N/C).

    Signs follow (k - m); amplitude disturbances are decays and use the
    pulse magnitude's absolute value.  These are the worst-case entries
    the convergence bounds are built from; the planner's feedforward uses
    the full Lorentzian expressions instead.
    """
    if k == pulse.m:
        raise ValueError("k must differ from the addressed level")
    sep = k - pulse.m
    ratio = n_qubits / c
    root = math.sqrt(ratio)
    if pulse.kind == "amplitude":
        ell = pulse.magnitude / sep ** 2 * ratio
        phi = pulse.magnitude / (2.0 * sep) * root
    else:
        bb = pulse.b if b is None else b
        ell = 4.0 * abs(pulse.magnitude) * bb / sep ** 2 * ratio
        phi = 2.0 * pulse.magnitude * bb / sep * root
    return ell, phi


# ---------------------------------------------------------------------------
# Worst-case convergence bookkeeping
# ---------------------------------------------------------------------------

def log_sum_constant(n_qubits: int) -> float:
    """A = 2 (1 + ln N), bounding sum_k 1/|k-m|."""
    return 2.0 * (1.0 + math.log(n_qubits))

def square_sum_constant() -> float:
    """B = pi^2 / 3, bounding sum_k 1/(k-m)^2."""
    return math.pi ** 2 / 3.0


def contraction_factor(c: float, n_qubits: int, b: float) -> float:
    """x = max{ sqrt(N/C) A (2b + 1/(2b)),  (N/C) B (4b + 1/b) }."""
    ratio = n_qubits / c
    a_const = log_sum_constant(n_qubits)
    first = math.sqrt(ratio) * a_const * (2.0 * b + 1.0 / (2.0 * b))
    second = ratio * square_sum_constant() * (4.0 * b + 1.0 / b)
    return max(first, second)


def required_c_over_n(n_qubits: int, b: float) -> float:
    """Smallest C/N with 2x < 1 at this N and b."""
    a_const = log_sum_constant(n_qubits)
    first = (2.0 * a_const * (2.0 * b + 1.0 / (2.0 * b))) ** 2
    second = 2.0 * square_sum_constant() * (4.0 * b + 1.0 / b)
    return max(first, second)


@dataclass
class CorrectionLedger:
    """Worst-case accounting of an iterative correction run."""

    n_qubits: int
    c: float
    b: float
    a_const: float
    b_const: float
    x: float
    phi_max: list[float] = field(default_factory=list)  # per round, bound
    ell_max: list[float] = field(default_factory=list)
    applied_phi: list[np.ndarray] = field(default_factory=list)
    applied_ell: list[np.ndarray] = field(default_factory=list)

    def push_bound_round(self) -> None:
        """Advance the worst-case recursion by one round."""
        phi, ell = self.phi_max[-1], self.ell_max[-1]
        ratio = self.n_qubits / self.c
        b = self.b
        self.phi_max.append(math.sqrt(ratio) * self.a_const
                            * (2 * b * phi + phi / (2 * b) + ell / 4.0))
        self.ell_max.append(ratio * self.b_const
                            * (4 * b * phi + phi / b + ell))

    def envelope(self, t: int) -> float:
        """(2x)^t (phi_max0 + ell_max0)."""
        return (2.0 * self.x) ** t * (self.phi_max[0] + self.ell_max[0])

    def to_csv_rows(self) -> list[list]:
        rows = [["round", "phi_max_bound", "ell_max_bound", "envelope"]]
        for t in range(len(self.phi_max)):
            rows.append([t, f"{self.phi_max[t]:.12g}",
                         f"{self.ell_max[t]:.12g}",
                         f"{self.envelope(t):.12g}"])
        return rows


# ---------------------------------------------------------------------------
# Pulse-effect prediction (shared by planner and schedule construction)
# ---------------------------------------------------------------------------

def _tone_of(pulse: PulseSpec, model: LevelModel) -> tuple[float, float]:
    """Tone detuning and w^2*t product realizing the pulse on its level."""
    km = model.widths[pulse.m]
    res = model.resonances[pulse.m]
    if pulse.kind == "phase":
        offset = math.copysign(pulse.b * km, pulse.magnitude)
        w2t = abs(pulse.magnitude) * ((km / 2.0) ** 2
                                      + (pulse.b * km) ** 2) / (pulse.b * km)
        return res + offset, w2t
    return res, pulse.magnitude * km / 4.0


def _pulse_effects(pulse: PulseSpec, model: LevelModel) -> tuple[np.ndarray, np.ndarray]:
    """Predicted signed phase and decay imprinted on every level by one
    pulse (first order in w^2 t; exact on the addressed level by
    construction)."""
    tone, w2t = _tone_of(pulse, model)
    det = tone - model.resonances
    denom = (model.widths / 2.0) ** 2 + det ** 2
    dphi = w2t * det / denom
    dell = w2t * model.widths / denom
    return dphi, dell


def _wrap_angle(a: np.ndarray) -> np.ndarray:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def iterate_corrections(targets_phi, targets_ell, c: float, n_qubits: int,
                        b: float = 3.0, max_rounds: int = 8,
                        tol: float = 1e-6,
                        level_model: LevelModel | None = None
                        ) -> tuple[list[list[PulseSpec]], CorrectionLedger]:
    """Plan correction rounds that realize target phases and amplitude
    reductions on every Dicke level.

    Round 0 applies the targets; each later round applies the exact
    negation of the accumulated predicted phase disturbances plus a
    leveling amplitude pulse that equalizes all levels to the
    worst-reduced one.  Refuses when the worst-case contraction 2x >= 1.
    Returns (schedule, ledger): the schedule is a list of rounds, each a
    list of PulseSpec.
    """
    phi_t = np.asarray(targets_phi, dtype=float)
    ell_t = np.asarray(targets_ell, dtype=float)
    n_lev = n_qubits + 1
    if phi_t.shape != (n_lev,) or ell_t.shape != (n_lev,):
        raise ValueError(f"targets must have length N+1 = {n_lev}")
    if np.any(np.abs(phi_t) > math.pi + 1e-12):
        raise ValueError("target phases must lie within [-pi, pi]")
    if np.any(ell_t < 0):
        raise ValueError("target amplitude reductions must be >= 0")

    x = contraction_factor(c, n_qubits, b)
    if 2.0 * x >= 1.0:
        raise NonConvergentRegimeError(x, required_c_over_n(n_qubits, b))
    ledger = CorrectionLedger(
        n_qubits=n_qubits, c=c, b=b,
        a_const=log_sum_constant(n_qubits),
        b_const=square_sum_constant(), x=x,
        phi_max=[float(np.max(np.abs(phi_t)))],
        ell_max=[float(np.max(ell_t))])

    if level_model is None:
        level_model = LevelModel.uniform(c, n_qubits)
    if np.max(np.abs(phi_t)) + np.max(ell_t) == 0.0:
        return [], ledger

    schedule: list[list[PulseSpec]] = []
    phi_done = np.zeros(n_lev)
    ell_done = np.zeros(n_lev)
    for _ in range(max_rounds):
        round_pulses: list[PulseSpec] = []
        want_phi = _wrap_angle(phi_t - phi_done)
        # phase pulses first; their predicted effects inform the leveling
        dphi_round = np.zeros(n_lev)
        dell_round = np.zeros(n_lev)
        for m in range(n_lev):
            if abs(want_phi[m]) > _MAG_EPS:
                p = PulseSpec(m=m, kind="phase",
                              magnitude=float(np.clip(want_phi[m],
                                                      -math.pi, math.pi)),
                              b=b)
                round_pulses.append(p)
                dphi, dell = _pulse_effects(p, level_model)
                dphi_round += dphi
                dell_round += dell
        # amplitude pulses: meet targets and level out predicted decay
        need = ell_t - (ell_done + dell_round)
        shift = -min(0.0, float(need.min()))
        mags = need + shift
        for m in range(n_lev):
            if mags[m] > _MAG_EPS:
                p = PulseSpec(m=m, kind="amplitude", magnitude=float(mags[m]))
                round_pulses.append(p)
                dphi, dell = _pulse_effects(p, level_model)
                dphi_round += dphi
                dell_round += dell
        phi_done = _wrap_angle(phi_done + dphi_round)
        ell_done = ell_done + dell_round
        schedule.append(round_pulses)
        ledger.applied_phi.append(
            np.array([p.magnitude if p.kind == "phase" else 0.0
                      for p in round_pulses]))
        ledger.applied_ell.append(
            np.array([p.magnitude if p.kind == "amplitude" else 0.0
                      for p in round_pulses]))
        ledger.push_bound_round()
        if ledger.phi_max[-1] + ledger.ell_max[-1] <= tol:
            break
    return schedule, ledger


@dataclass(frozen=True)
class SuccessBound:
    """Lower bound on the heralding probability cost of a correction run."""

    limit: float
    partials: np.ndarray  # partial products for T = 0..len-1

    @property
    def final_partial(self) -> float:
        return float(self.partials[-1])


def success_bound(ledger: CorrectionLedger, n_terms: int = 200) -> SuccessBound:
    """Success-probability lower bound of the iterated corrections.

    The direct application of the initial phases costs e^{-phi0/b}; every
    later round costs at most e^{-(2x)^j (phi0+ell0)}.  The partial
    products decrease monotonically to
    e^{-phi0/b} * e^{-(2x/(1-2x)) (phi0+ell0)}.
    """
    if 2.0 * ledger.x >= 1.0:
        raise NonConvergentRegimeError(ledger.x,
                                       required_c_over_n(ledger.n_qubits,
                                                         ledger.b))
    phi0 = ledger.phi_max[0]
    ell0 = ledger.ell_max[0]
    base = phi0 + ell0
    q = 2.0 * ledger.x
    limit = math.exp(-phi0 / ledger.b - (q / (1.0 - q)) * base)
    exponents = np.cumsum([q ** j * base for j in range(1, n_terms + 1)])
    partials = np.exp(-phi0 / ledger.b - np.concatenate([[0.0], exponents]))
    return SuccessBound(limit, partials)


# ---------------------------------------------------------------------------
# Numeric verification on the dressed blocks
# ---------------------------------------------------------------------------

@dataclass
class ScheduleResiduals:
    """Exact-propagation residuals of a schedule against its targets."""

    residual_phi: np.ndarray
    residual_ell: np.ndarray
    final_amplitudes: np.ndarray
    common_phase: float
    common_decay: float


def materialize_durations(schedule: list[list[PulseSpec]],
                          level_model: LevelModel,
                          w: float) -> list[list[PulseSpec]]:
    """Attach physical durations for a given drive strength w."""
    out = []
    for round_pulses in schedule:
        row = []
        for p in round_pulses:
            _, w2t = _tone_of(p, level_model)
            row.append(PulseSpec(p.m, p.kind, p.magnitude, p.b,
                                 duration=w2t / (w * w)))
        out.append(row)
    return out


def verify_schedule_numerically(schedule: list[list[PulseSpec]],
                                level_model: LevelModel | PhysicalParams,
                                initial_amplitudes,
                                targets_phi, targets_ell,
                                w_fraction: float = 1.0 / 50.0
                                ) -> ScheduleResiduals:
    """Propagate a schedule exactly and compare against the targets.

    Every pulse is a static tone, so each level's survival amplitude is an
    exact 2x2 no-jump evolution; the full schedule is the product of those
    multipliers.  The global phase and the common decay (success cost) are
    removed before computing per-level residuals: residual_phi in radians,
    residual_ell in log-amplitude units.
    """
    init = np.asarray(initial_amplitudes, dtype=np.complex128)
    n_lev = len(init)
    if isinstance(level_model, PhysicalParams):
        level_model = LevelModel.from_params(level_model, n_lev - 1)
    if level_model.n_levels != n_lev:
        raise ValueError("level model size does not match amplitudes")
    phi_t = np.asarray(targets_phi, dtype=float)
    ell_t = np.asarray(targets_ell, dtype=float)
    w = w_fraction * float(level_model.widths.min())

    amps = init.copy()
    for round_pulses in schedule:
        for p in round_pulses:
            tone, w2t = _tone_of(p, level_model)
            duration = w2t / (w * w)
            if duration == 0.0:
                continue
            for k in range(n_lev):
                amps[k] *= dressed_survival_amplitude(
                    tone - level_model.resonances[k], w,
                    float(level_model.widths[k]), duration)

    target_amps = init * np.exp(1j * phi_t - ell_t / 2.0)
    populated = np.abs(target_amps) > 0
    denom = np.where(populated, target_amps, 1.0)
    rel = np.where(populated, amps / denom, 1.0)
    weights = np.abs(init) ** 2
    common_phase = float(np.angle(np.sum(weights * rel)))
    rel = rel * np.exp(-1j * common_phase)
    raw_ell = -2.0 * np.log(np.abs(rel))
    common_decay = float(np.average(raw_ell, weights=weights))
    return ScheduleResiduals(
        residual_phi=np.angle(rel),
        residual_ell=raw_ell - common_decay,
        final_amplitudes=amps,
        common_phase=common_phase,
        common_decay=common_decay,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def schedule_to_json(schedule: list[list[PulseSpec]]) -> str:
    doc = [[{"m": p.m, "kind": p.kind, "magnitude": p.magnitude,
             "b": p.b, "duration_us": p.duration}
            for p in round_pulses] for round_pulses in schedule]
    return json.dumps({"rounds": doc}, indent=2)


def schedule_from_json(text: str) -> list[list[PulseSpec]]:
    doc = json.loads(text)
    return [[PulseSpec(int(e["m"]), e["kind"], float(e["magnitude"]),
                       None if e["b"] is None else float(e["b"]),
                       None if e.get("duration_us") is None
                       else float(e["duration_us"]))
             for e in round_pulses] for round_pulses in doc["rounds"]]
