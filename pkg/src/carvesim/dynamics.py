"""Time evolution, post-selection, partial trace and 1/e-time extraction.

Two propagators share one RK4 engine: ``evolve_master`` integrates the
Lindblad equation for a density matrix, ``evolve_no_jump`` the conditional
pure-state equation under H - (i/2) sum L^dag L.  Because every jump lands
in the absorbing loss sector, the post-selected conditional states of the
two agree; the test suite uses that as a cross-propagator oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .basis import EnsembleState, JointBasis, JointState
from .model import (DriveTone, PhysicalParams, build_h_source, build_h_target,
                    decay_diagonal)


class NoCrossingError(RuntimeError):
    """Monitored survival never reached its 1/e threshold."""

    def __init__(self, max_time: float, final_value: float, threshold: float):
        super().__init__(
            f"no 1/e crossing by t={max_time:.6g} us "
            f"(survival {final_value:.6g}, threshold {threshold:.6g})")
        self.max_time = max_time
        self.final_value = final_value
        self.threshold = threshold


class CarveAnnihilatedError(RuntimeError):
    """Post-selection found zero weight in the source-down block."""


@dataclass
class EvolutionResult:
    """Sampled trajectory: snapshots plus the derived population traces.

    survival is P(source down), lost_weight the absorbed probability
    (density) or 1 - |psi|^2 (no-jump), pop_down the per-Dicke-level
    populations of the down block.
    """

    basis: JointBasis
    kind: str                 # "density" | "pure"
    times: np.ndarray         # (n_samp,) us
    samples: np.ndarray       # (n_samp, dim, dim) or (n_samp, dim)
    survival: np.ndarray      # (n_samp,)
    lost_weight: np.ndarray   # (n_samp,)
    pop_down: np.ndarray      # (n_samp, N+1)
    dt: float

    def state_at(self, i: int) -> JointState:
        kind = "density" if self.kind == "density" else "pure"
        return JointState(self.basis, self.samples[i].copy(), kind)

    @property
    def final_state(self) -> JointState:
        return self.state_at(len(self.times) - 1)

    def to_csv(self, path) -> None:
        """Write time_us, p_down, p_lost, pop_m0..pop_mN."""
        n = self.basis.n_qubits
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_us", "p_down", "p_lost"]
                            + [f"pop_m{m}" for m in range(n + 1)])
            for i, t in enumerate(self.times):
                writer.writerow([f"{t:.9g}", f"{self.survival[i]:.12g}",
                                 f"{self.lost_weight[i]:.12g}"]
                                + [f"{p:.12g}" for p in self.pop_down[i]])


def fastest_scale(params: PhysicalParams, tones: list[DriveTone]) -> float:
    dmax = max((abs(t.delta) for t in tones), default=0.0)
    return max(params.delta_cap + dmax, params.g, params.kappa, params.gamma_e)


def max_stable_dt(params: PhysicalParams, tones: list[DriveTone]) -> float:
    """Step bound dt <= 0.05 / max(Delta + |delta|, g, kappa, Gamma_e)."""
    return 0.05 / fastest_scale(params, tones)


def spin_echo_permutation(basis: JointBasis) -> np.ndarray:
    """Index permutation of an ideal ensemble up/down swap.

    Dicke labels map m -> N-m in the down, source-excited and cavity
    blocks; the collectively excited labels map m -> N-m+1 (one atom is
    parked in e, the remaining m-1 up spins swap).  Returned as p with
    new[i] = old[p[i]].
    """
    n = basis.n_qubits
    perm = np.arange(basis.dim, dtype=np.int64)
    for m in range(n + 1):
        perm[basis.down(m)] = basis.down(n - m)
        perm[basis.e(m)] = basis.e(n - m)
        perm[basis.cav(m)] = basis.cav(n - m)
    for m in range(1, n + 1):
        perm[basis.me(m)] = basis.me(n - m + 1)
    return perm


def _assemble(params: PhysicalParams, tones: list[DriveTone],
              basis: JointBasis):
    """Static Hamiltonian plus oscillating-coupling arrays for the engine.

    One tone: fully static frame (tone folded into h0, no oscillation).
    Several tones: frame of the empty cavity; each tone couples through the
    shared (e_m, down_m) pairs with phase exp(i delta_j t).
    """
    h0 = build_h_target(params, basis)
    if len(tones) == 1:
        h0 += build_h_source(params, tones[0], basis)
        e_idx = np.empty(0, dtype=np.int64)
        d_idx = np.empty(0, dtype=np.int64)
        omegas = np.empty(0)
        deltas = np.empty(0)
    else:
        n = basis.n_qubits
        for m in range(n + 1):
            h0[basis.down(m), basis.down(m)] = -params.delta_cap
            h0[basis.e(m), basis.cav(m)] = params.g
            h0[basis.cav(m), basis.e(m)] = params.g
        e_idx = basis.e_indices()
        d_idx = basis.down_indices()
        omegas = np.array([t.omega for t in tones])
        deltas = np.array([t.delta for t in tones])
    return np.ascontiguousarray(h0), e_idx, d_idx, omegas, deltas


def _steps_and_sampling(t_final: float, dt: float, sample_target: int):
    n_steps = max(1, math.ceil(t_final / dt))
    sample_every = max(1, n_steps // max(1, sample_target))
    n_steps = math.ceil(n_steps / sample_every) * sample_every
    return n_steps, sample_every


def _check_dt(params, tones, t_final, dt):
    if t_final <= 0:
        raise ValueError("t_final must be > 0")
    bound = max_stable_dt(params, tones)
    if dt is None:
        return bound
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt:.3e} does not resolve the fastest scale "
                         f"(need <= {bound:.3e} us)")
    return dt


def evolve_master(initial: JointState, params: PhysicalParams,
                  tones: list[DriveTone], t_final: float, dt: float | None = None,
                  sample_target: int = 2000, spin_echo: bool = False,
                  trace_tol: float = 1e-6) -> EvolutionResult:
    """Integrate the Lindblad equation with fixed-step RK4.

    ``initial`` must be a density state (use ``JointState.to_density``).
    The step defaults to 0.05 over the fastest frequency in the chosen
    frame and larger values are rejected.  Per-step re-Hermitization keeps
    the matrix exactly Hermitian; trace drift beyond ``trace_tol`` aborts
    with a diagnostic.
    """
    if initial.kind != "density":
        raise ValueError("evolve_master needs a density state")
    basis = initial.basis
    dt = _check_dt(params, tones, t_final, dt)
    n_steps, sample_every = _steps_and_sampling(t_final, dt, sample_target)
    h0, e_idx, d_idx, omegas, deltas = _assemble(params, tones, basis)
    gdiag = decay_diagonal(params, basis)
    echo_step = n_steps // 2 if spin_echo else -1
    perm = spin_echo_permutation(basis) if spin_echo else np.arange(
        basis.dim, dtype=np.int64)
    times, samples = _kernels.rk4_density(
        h0, e_idx, d_idx, omegas, deltas, gdiag, basis.lost,
        np.ascontiguousarray(initial.data), dt, n_steps, sample_every,
        echo_step, perm)

    traces = np.einsum("tii->t", samples).real
    drift = np.abs(traces - traces[0])
    if drift.max() > trace_tol:
        bad = int(np.argmax(drift > trace_tol))
        raise RuntimeError(
            f"trace drift {drift.max():.3e} exceeds {trace_tol:.1e} "
            f"at t={times[bad]:.6g} us; reduce dt")

    down = basis.down_indices()
    diag = np.real(np.einsum("tii->ti", samples))
    pop_down = diag[:, down]
    survival = pop_down.sum(axis=1)
    lost = diag[:, basis.lost]
    return EvolutionResult(basis, "density", times, samples, survival, lost,
                           pop_down, dt)


def evolve_no_jump(initial: JointState, params: PhysicalParams,
                   tones: list[DriveTone], t_final: float,
                   dt: float | None = None, sample_target: int = 2000,
                   spin_echo: bool = False) -> EvolutionResult:
    """Propagate the unnormalized conditional pure state.

    The squared norm is the no-jump probability; the lost trace reports
    1 - |psi|^2.
    """
    if initial.kind != "pure":
        raise ValueError("evolve_no_jump needs a pure state")
    basis = initial.basis
    dt = _check_dt(params, tones, t_final, dt)
    n_steps, sample_every = _steps_and_sampling(t_final, dt, sample_target)
    h0, e_idx, d_idx, omegas, deltas = _assemble(params, tones, basis)
    gdiag = decay_diagonal(params, basis)
    echo_step = n_steps // 2 if spin_echo else -1
    perm = spin_echo_permutation(basis) if spin_echo else np.arange(
        basis.dim, dtype=np.int64)
    times, samples = _kernels.rk4_no_jump(
        h0, e_idx, d_idx, omegas, deltas, gdiag,
        np.ascontiguousarray(initial.data), dt, n_steps, sample_every,
        echo_step, perm)

    down = basis.down_indices()
    pop_down = np.abs(samples[:, down]) ** 2
    survival = pop_down.sum(axis=1)
    norm2 = np.sum(np.abs(samples) ** 2, axis=1)
    lost = 1.0 - norm2
    return EvolutionResult(basis, "pure", times, samples, survival, lost,
                           pop_down, dt)


def postselect_source_down(state: JointState) -> tuple[JointState, float]:
    """Project onto the (source down, cavity empty) block and renormalize.

    Returns the conditional state and the pre-normalization weight (the
    post-selection success probability).  Raises CarveAnnihilatedError on
    zero weight.
    """
    basis = state.basis
    down = basis.down_indices()
    keep = np.zeros(basis.dim, dtype=bool)
    keep[down] = True
    if state.kind == "pure":
        vec = np.where(keep, state.data, 0.0)
        weight = float(np.vdot(vec, vec).real)
        if weight <= 0.0:
            raise CarveAnnihilatedError("carve annihilated everything: "
                                        "no weight left in the down block")
        return JointState(basis, vec / math.sqrt(weight), "pure"), weight
    mask = np.outer(keep, keep)
    mat = np.where(mask, state.data, 0.0)
    weight = float(np.trace(mat).real)
    if weight <= 0.0:
        raise CarveAnnihilatedError("carve annihilated everything: "
                                    "no weight left in the down block")
    return JointState(basis, mat / weight, "density"), weight


def trace_out_probe(state: JointState) -> EnsembleState:
    """Reduce to the ensemble by tracing out source atom and cavity.

    The Dicke-space block collects (down,m), (e,m) and (cav,m)
    contributions; collectively excited and lost weight is kept in
    ``residual_weight`` so the total trace is preserved.
    """
    basis = state.basis
    n = basis.n_qubits
    rho = state.data if state.kind == "density" else np.outer(
        state.data, state.data.conj())
    ens = np.zeros((n + 1, n + 1), dtype=np.complex128)
    for sector_idx in (basis.down_indices(), basis.e_indices(),
                       basis.cav_indices()):
        ens += rho[np.ix_(sector_idx, sector_idx)]
    residual = float(rho[basis.lost, basis.lost].real)
    for m in range(1, n + 1):
        residual += float(rho[basis.me(m), basis.me(m)].real)
    return EnsembleState(n, ens, "density", residual)


@dataclass
class CarveOutcome:
    """Conditional ensemble state with its heralding probability and the
    infidelity against the kept Dicke level."""

    ensemble: EnsembleState
    success_probability: float
    infidelity: float


def carve_outcome(state: JointState, keep_m: int) -> CarveOutcome:
    """Post-select on source down, trace out the probe and score against
    the target Dicke level."""
    conditional, weight = postselect_source_down(state)
    ensemble = trace_out_probe(conditional)
    eps = 1.0 - ensemble.dicke_population(keep_m)
    return CarveOutcome(ensemble, weight, eps)


def find_t_1e(result: EvolutionResult,
              reference_weight: float | None = None) -> float:
    """Interpolated time at which P(source down) falls to reference/e.

    The reference defaults to the initial total down population; carve
    pipelines pass the kept level's initial weight so that the threshold
    is |c_keep|^2 / e (heralding probability of the counter-factual
    protocol).  Raises NoCrossingError when the threshold is not reached.
    """
    ref = result.survival[0] if reference_weight is None else reference_weight
    threshold = ref / math.e
    surv = result.survival
    below = np.nonzero(surv <= threshold)[0]
    if len(below) == 0 or below[0] == 0:
        if len(below) > 0:
            return float(result.times[0])
        raise NoCrossingError(float(result.times[-1]), float(surv[-1]),
                              threshold)
    i = int(below[0])
    t0, t1 = result.times[i - 1], result.times[i]
    s0, s1 = surv[i - 1], surv[i]
    frac = (s0 - threshold) / (s0 - s1)
    return float(t0 + frac * (t1 - t0))
