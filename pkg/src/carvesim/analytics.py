"""Closed-form carving predictions and multi-tone carve planning.

Two-level infidelities for heralding on no probe decay versus on a
transmitted photon, the GHZ tone-ladder rate sums, and the analytic
multi-tone rate model that the master-equation simulator is checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import DriveTone, LevelModel, PhysicalParams


def cf_infidelity(c: float, n: int) -> float:
    """Counter-factual two-level infidelity e^{-C/n} / (1 + e^{-C/n}).

    Heralding on the probe having not decayed suppresses the unwanted
    neighbor exponentially in C/n; the asymptote is e^{-C/n}.
    """
    if c < 0 or n < 1:
        raise ValueError("need c >= 0 and n >= 1")
    q = math.exp(-c / n)
    return q / (1.0 + q)


def f_infidelity(c: float, n: int) -> float:
    """Factual two-level infidelity 1 / (2 + C/n), asymptotically n/C."""
    if c < 0 or n < 1:
        raise ValueError("need c >= 0 and n >= 1")
    return 1.0 / (2.0 + c / n)


def _lineshape(x: float) -> complex:
    """Normalized Lorentzian transmission amplitude 1/2 / (1 - i x)."""
    return 0.5 / (1.0 - 1j * x)


def transmission(delta: float, m: int, params: PhysicalParams) -> complex:
    """Simplified cavity transmission amplitude at probe detuning delta
    with m atoms coupled: T = 1/2 * 1/(1 - i (delta - m d)/kappa).

    Valid in the balanced-detuning regime (Delta^2 = m C Gamma_e^2 at the
    optimized level) where the full dispersive expression collapses to a
    half-height Lorentzian centered on the pulled resonance m d.
    """
    d = params.dispersive_shift
    return _lineshape((delta - m * d) / params.kappa)


def f_infidelity_transmission(c: float, n: int) -> float:
    """Factual infidelity from the transmission route.

    Post-selecting on a transmitted photon weights levels by |T|^2: the
    resonant level passes |T|^2 = 1/4, the neighbor one Lorentzian
    linewidth-ratio sqrt(C/n) away passes 1/4 / (1 + C/n).  The relative
    unwanted population is then 1/(2 + C/n), identical to f_infidelity.
    """
    if c < 0 or n < 1:
        raise ValueError("need c >= 0 and n >= 1")
    t_res = abs(_lineshape(0.0)) ** 2
    t_off = abs(_lineshape(math.sqrt(c / n))) ** 2
    return t_off / (t_res + t_off)


@dataclass(frozen=True)
class ScalingPoint:
    """One point of an infidelity-vs-C/n scaling curve."""

    c_over_n: float
    infidelity: float
    success_probability: float
    method: str  # "counterfactual" | "factual"


# ---------------------------------------------------------------------------
# GHZ tone ladder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GhzRates:
    """Total decay rates of odd and even Dicke levels under the resonant
    odd-level tone ladder, in units of the single resonant-tone rate."""

    gamma_odd_over_res: float
    gamma_even_over_res: float
    j_max: int
    c_over_n_half: float
    tail_bound_odd: float
    tail_bound_even: float

    @property
    def ratio(self) -> float:
        """Gamma_odd / Gamma_even."""
        return self.gamma_odd_over_res / self.gamma_even_over_res


def ghz_rates(c: float, n_qubits: int, j_max: int = 10_000) -> GhzRates:
    """Truncated ladder sums for GHZ carving.

    Odd levels see their resonant tone plus neighbors detuned by even
    multiples of the spacing, even levels only odd multiples:

        odd/res  = 1 + 2 sum_j 1/(1 + (2j)^2   C/(N/2))
        even/res =     2 sum_j 1/(1 + (2j-1)^2 C/(N/2))

    The reported tail bounds are integral estimates of the truncated
    remainder (before the factor 2).
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    ch = c / (n_qubits / 2.0)
    j = np.arange(1, j_max + 1, dtype=float)
    odd = 1.0 + 2.0 * float(np.sum(1.0 / (1.0 + (2.0 * j) ** 2 * ch)))
    even = 2.0 * float(np.sum(1.0 / (1.0 + (2.0 * j - 1.0) ** 2 * ch)))
    sq = math.sqrt(ch)
    tail_odd = (math.pi / 2.0 - math.atan((2 * j_max + 1) * sq)) / sq
    tail_even = (math.pi / 2.0 - math.atan((2 * j_max) * sq)) / sq
    return GhzRates(odd, even, j_max, ch, tail_odd, tail_even)


def ghz_infidelity(c: float, n_qubits: int, method: str,
                   j_max: int = 10_000) -> float:
    """GHZ carving infidelity from the ladder rate ratio R = odd/even.

    counterfactual: e^{-R} / (e^{-R} + e^{-1}) at the time where the even
    (kept) component has decayed by 1/e; factual: (1/R) / (1/R + 1).
    """
    r = ghz_rates(c, n_qubits, j_max).ratio
    if method == "counterfactual":
        return math.exp(-r) / (math.exp(-r) + math.exp(-1.0))
    if method == "factual":
        return (1.0 / r) / (1.0 / r + 1.0)
    raise ValueError("method must be 'counterfactual' or 'factual'")


def ghz_asymptote(c: float, n_qubits: int, method: str) -> float:
    """Leading large-C/N forms: e^{2/3} e^{-(8/pi^2) C/N} and
    (pi^2/8) N/C."""
    x = c / n_qubits
    if method == "counterfactual":
        return math.exp(2.0 / 3.0) * math.exp(-8.0 / math.pi ** 2 * x)
    if method == "factual":
        return math.pi ** 2 / 8.0 / x
    raise ValueError("method must be 'counterfactual' or 'factual'")


# ---------------------------------------------------------------------------
# Multi-tone Dicke carving
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarvePlan:
    """Tone schedule realizing a Dicke carve: one resonant tone per
    unwanted level, a common duration, and the level model the tones were
    placed against."""

    n_qubits: int
    keep_m: int
    tones: tuple[DriveTone, ...]
    duration: float            # us
    level_model: LevelModel
    w: float                   # common dressed coupling, rad/us
    predicted_keep_rate: float  # rad/us

    def tone_levels(self) -> list[int]:
        return [m for m in range(self.n_qubits + 1) if m != self.keep_m]


def level_decay_rates(tones, params: PhysicalParams,
                      level_model: LevelModel) -> np.ndarray:
    """Per-level total decay rates: Lorentzian contributions summed over
    tones (rate additivity, valid for perturbative drives)."""
    rates = np.zeros(level_model.n_levels)
    for tone in tones:
        w = tone.w(params)
        for m in range(level_model.n_levels):
            km = level_model.widths[m]
            det = tone.delta - level_model.resonances[m]
            rates[m] += w ** 2 * km / ((km / 2.0) ** 2 + det ** 2)
    return rates


def plan_dicke_carve(n_qubits: int, keep_m: int, params: PhysicalParams,
                     target_suppression: float | None = None,
                     w_fraction: float = 1.0 / 20.0,
                     placement: str = "exact",
                     max_duration: float | None = None) -> CarvePlan:
    """Plan the tone set that annihilates every Dicke level but keep_m.

    One tone sits on each unwanted level's dressed resonance ("exact"
    placement diagonalizes the photon sector; "dispersive" uses (m+1) d,
    which visibly misses resonance once (m+1)^2 (g/Delta)^2 linewidth
    fractions become noticeable).  All tones share
    w = w_fraction * min(kappa_m); duration defaults to 1/Gamma_keep, the
    e^-1 heralding convention.  A requested suppression of the slowest
    unwanted level can extend the duration; if a cap makes it unreachable
    the error reports the required time.
    """
    if not 0 <= keep_m <= n_qubits:
        raise ValueError("keep_m outside 0..N")
    level_model = LevelModel.from_params(params, n_qubits, placement)
    w = w_fraction * float(level_model.widths.min())
    omega = w * params.delta_cap / params.g
    tones = tuple(DriveTone(float(level_model.resonances[m]), omega)
                  for m in range(n_qubits + 1) if m != keep_m)
    if not tones:  # single-level ensemble, nothing to carve
        return CarvePlan(n_qubits, keep_m, (), 0.0, level_model, w, 0.0)

    rates = level_decay_rates(tones, params, level_model)
    keep_rate = float(rates[keep_m])
    duration = 1.0 / keep_rate
    if target_suppression is not None:
        if not 0 < target_suppression < 1:
            raise ValueError("target_suppression must be in (0, 1)")
        slowest = min(float(rates[m]) for m in range(n_qubits + 1)
                      if m != keep_m)
        needed = math.log(1.0 / target_suppression) / slowest
        duration = max(duration, needed)
        if max_duration is not None and duration > max_duration:
            raise ValueError(
                f"suppression {target_suppression:g} needs t={duration:.6g} us"
                f" > max_duration={max_duration:.6g} us at perturbative w")
    return CarvePlan(n_qubits, keep_m, tones, duration, level_model, w,
                     keep_rate)


def multi_tone_infidelity(plan: CarvePlan, params: PhysicalParams,
                          n_qubits: int | None = None,
                          keep_m: int | None = None) -> float:
    """Analytic carve infidelity from summed per-level rates.

    Conditional populations after the plan duration are the binomial
    weights damped by e^{-Gamma_m t}; the infidelity is one minus the kept
    share.  Cross-tone interference is ignored (the simulator quantifies
    the residual).
    """
    n = plan.n_qubits if n_qubits is None else n_qubits
    keep = plan.keep_m if keep_m is None else keep_m
    if not plan.tones:
        return 0.0
    rates = level_decay_rates(plan.tones, params, plan.level_model)
    weights = np.array([math.comb(n, m) / 2.0 ** n for m in range(n + 1)])
    pops = weights * np.exp(-rates * plan.duration)
    return float(1.0 - pops[keep] / pops.sum())


def carve_scaling_point(c: float, n: int, method: str) -> ScalingPoint:
    """Two-level scaling point at the e^-1 (counterfactual) or small-t
    (factual) heralding convention."""
    if method == "counterfactual":
        eps = cf_infidelity(c, n)
        succ = 0.5 * math.exp(-1.0) * (1.0 + math.exp(-c / n))
    elif method == "factual":
        eps = f_infidelity(c, n)
        succ = 0.25
    else:
        raise ValueError("method must be 'counterfactual' or 'factual'")
    return ScalingPoint(c / n, eps, succ, method)
