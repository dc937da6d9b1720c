"""Hamiltonians, collapse channels and analytic rate quantities.

Frame convention: everything rotates at the drive reference frequency, so
the source-down block carries diagonal -(Delta + delta_ref), the cavity
block -Delta, and the source/ensemble excited blocks sit at zero.  For a
single tone the reference is the tone itself and the Hamiltonian is
static; for several tones the reference is the empty-cavity resonance
(delta_ref = 0) and each tone couples with an explicit phase
exp(i * delta_j * t) handled by the propagators.

Units: angular frequencies in rad/us throughout; ``from_mhz`` constructors
multiply plain-MHz inputs by 2*pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import JointBasis

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalParams:
    """Cavity QED rates: coupling g, cavity decay kappa, atomic decay
    gamma_e and atom-cavity detuning delta_cap (all angular, rad/us)."""

    g: float
    kappa: float
    gamma_e: float
    delta_cap: float
    dispersive_threshold: float = 0.2

    def __post_init__(self):
        for name in ("g", "kappa", "gamma_e", "delta_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def from_mhz(cls, g_mhz: float, kappa_mhz: float, gamma_e_mhz: float,
                 delta_mhz: float, **kw) -> "PhysicalParams":
        return cls(TWO_PI * g_mhz, TWO_PI * kappa_mhz, TWO_PI * gamma_e_mhz,
                   TWO_PI * delta_mhz, **kw)

    @property
    def cooperativity(self) -> float:
        """C = g^2 / (kappa * gamma_e), dimensionless."""
        return self.g ** 2 / (self.kappa * self.gamma_e)

    @property
    def dispersive_shift(self) -> float:
        """Per-atom cavity pull d = g^2 / Delta (rad/us)."""
        return self.g ** 2 / self.delta_cap

    @property
    def is_dispersive(self) -> bool:
        return self.g / self.delta_cap < self.dispersive_threshold


@dataclass(frozen=True)
class DriveTone:
    """One drive tone: detuning delta from the empty-cavity resonance and
    strength omega (both rad/us)."""

    delta: float
    omega: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be > 0")

    @classmethod
    def from_mhz(cls, delta_mhz: float, omega_mhz: float) -> "DriveTone":
        return cls(TWO_PI * delta_mhz, TWO_PI * omega_mhz)

    def w(self, params: PhysicalParams) -> float:
        """Effective dressed coupling w = Omega * g / Delta."""
        return self.omega * params.g / params.delta_cap

    def is_perturbative(self, params: PhysicalParams, kappa_min: float) -> bool:
        """True when w stays below a twentieth of the narrowest linewidth."""
        return self.w(params) <= kappa_min / 20.0


def kappa_m(params: PhysicalParams, m: int, convention: str = "m+1") -> float:
    """Dressed linewidth of the photon-carrying state for Dicke level m.

    kappa_m = kappa + (m+1) (g/Delta)^2 gamma_e.  The admixed excited
    states of the source and of the m ensemble atoms both scatter, hence
    the m+1.  ``convention="m"`` drops the source-atom share (the form the
    large-N treatment uses); the default keeps it.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    count = {"m+1": m + 1, "m": m}[convention]
    return params.kappa + count * (params.g / params.delta_cap) ** 2 * params.gamma_e


def gamma_m(params: PhysicalParams, tone: DriveTone, m: int,
            convention: str = "m+1") -> float:
    """Lorentzian decay rate of (down, m) under one tone.

    Gamma_m = w^2 kappa_m / ((kappa_m/2)^2 + (delta - (m+1) d)^2), the
    golden-rule rate of decay through the dressed photon state.  Valid for
    perturbative w; the full propagator is the arbiter beyond that.
    """
    km = kappa_m(params, m, convention)
    w = tone.w(params)
    det = tone.delta - (m + 1) * params.dispersive_shift
    return w ** 2 * km / ((km / 2.0) ** 2 + det ** 2)


def optimal_delta_cap(g: float, kappa: float, gamma_e: float, n: int) -> float:
    """Detuning that balances cavity and atomic decay at level n:
    kappa = n (g/Delta)^2 gamma_e, i.e. Delta = g sqrt(n gamma_e / kappa)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return g * math.sqrt(n * gamma_e / kappa)


def balanced_params(c: float, n: int, kappa: float, gamma_e: float,
                    **kw) -> PhysicalParams:
    """Params with cooperativity ``c`` (g adjusted) and Delta balanced at
    level n, holding kappa and gamma_e fixed."""
    g = math.sqrt(c * kappa * gamma_e)
    return PhysicalParams(g, kappa, gamma_e,
                          optimal_delta_cap(g, kappa, gamma_e, n), **kw)


# ---------------------------------------------------------------------------
# Hamiltonian and collapse-channel builders
# ---------------------------------------------------------------------------

def build_h_target(params: PhysicalParams, basis: JointBasis) -> np.ndarray:
    """Ensemble-cavity Hamiltonian: -Delta on the cavity block and the
    sqrt(m)-enhanced exchange g between (cav, m) and (me, m)."""
    n = basis.n_qubits
    h = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for m in range(n + 1):
        h[basis.cav(m), basis.cav(m)] = -params.delta_cap
        if m >= 1:
            c = params.g * math.sqrt(m)
            h[basis.cav(m), basis.me(m)] = c
            h[basis.me(m), basis.cav(m)] = c
    return h


def build_h_source(params: PhysicalParams, tone: DriveTone,
                   basis: JointBasis) -> np.ndarray:
    """Source-atom Hamiltonian for one tone: -(Delta+delta) on the down
    block, Omega between (down, m) and (e, m), g between (e, m) and
    (cav, m)."""
    n = basis.n_qubits
    h = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    for m in range(n + 1):
        h[basis.down(m), basis.down(m)] = -(params.delta_cap + tone.delta)
        h[basis.down(m), basis.e(m)] = tone.omega
        h[basis.e(m), basis.down(m)] = tone.omega
        h[basis.e(m), basis.cav(m)] = params.g
        h[basis.cav(m), basis.e(m)] = params.g
    return h


def collapse_channels(params: PhysicalParams,
                      basis: JointBasis) -> list[tuple[float, int]]:
    """Jump channels as (rate, source index) pairs; every jump targets the
    absorbing lost label, so L = sqrt(rate) |lost><source|.

    One kappa channel per cavity state, one gamma_e channel per source- or
    ensemble-excited state.  Zero-rate channels are never emitted.
    """
    n = basis.n_qubits
    channels: list[tuple[float, int]] = []
    if params.kappa > 0:
        channels.extend((params.kappa, basis.cav(m)) for m in range(n + 1))
    if params.gamma_e > 0:
        channels.extend((params.gamma_e, basis.e(m)) for m in range(n + 1))
        channels.extend((params.gamma_e, basis.me(m)) for m in range(1, n + 1))
    return channels


def decay_diagonal(params: PhysicalParams, basis: JointBasis) -> np.ndarray:
    """Total decay rate out of each basis state (the diagonal of
    sum_k L_k^dag L_k), as a real vector."""
    diag = np.zeros(basis.dim)
    for rate, src in collapse_channels(params, basis):
        diag[src] += rate
    return diag


def jump_operators(params: PhysicalParams, basis: JointBasis) -> list[np.ndarray]:
    """Dense jump operators, mainly for tests; the propagators use the
    (rate, index) form directly."""
    ops = []
    for rate, src in collapse_channels(params, basis):
        L = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
        L[basis.lost, src] = math.sqrt(rate)
        ops.append(L)
    return ops


# ---------------------------------------------------------------------------
# Dressed-state description
# ---------------------------------------------------------------------------

def dispersive_resonances(params: PhysicalParams, n_qubits: int) -> np.ndarray:
    """First-order resonant tone detunings, (m+1) d for m = 0..N."""
    d = params.dispersive_shift
    return np.array([(m + 1) * d for m in range(n_qubits + 1)])


def exact_resonances(params: PhysicalParams, n_qubits: int) -> np.ndarray:
    """Resonant tone detunings from exact diagonalization.

    For each m the photon-carrying chain (e,m) -- (cav,m) -- (me,m) is
    diagonalized and the eigenvalue continuously connected to the photon
    state picked out; the resonance condition -(Delta+delta) = E gives
    delta.  At moderate g/Delta these sit noticeably below (m+1) d (the
    shift grows like (m+1)^2 d (g/Delta)^2), which matters when placing
    carving tones.
    """
    out = np.empty(n_qubits + 1)
    g, dcap = params.g, params.delta_cap
    for m in range(n_qubits + 1):
        if m == 0:
            h = np.array([[0.0, g], [g, -dcap]])
        else:
            h = np.array([[0.0, g, 0.0],
                          [g, -dcap, g * math.sqrt(m)],
                          [0.0, g * math.sqrt(m), 0.0]])
        ev = np.linalg.eigvalsh(h)
        lam = ev[np.argmin(np.abs(ev + dcap))]
        out[m] = -dcap - lam
    return out


@dataclass(frozen=True)
class LevelModel:
    """Per-level dressed description: resonant tone detuning and linewidth
    for each Dicke level.  Shared by the carve planner, the rate sums and
    the phase-control verifier so predictions and propagation agree on the
    level structure."""

    resonances: np.ndarray  # resonant tone detuning per m, rad/us
    widths: np.ndarray      # kappa_m per m, rad/us

    def __post_init__(self):
        if len(self.resonances) != len(self.widths):
            raise ValueError("resonances and widths must have equal length")

    @property
    def n_levels(self) -> int:
        return len(self.resonances)

    @classmethod
    def from_params(cls, params: PhysicalParams, n_qubits: int,
                    placement: str = "exact",
                    convention: str = "m+1") -> "LevelModel":
        if placement == "exact":
            res = exact_resonances(params, n_qubits)
        elif placement == "dispersive":
            res = dispersive_resonances(params, n_qubits)
        else:
            raise ValueError("placement must be 'exact' or 'dispersive'")
        widths = np.array([kappa_m(params, m, convention)
                           for m in range(n_qubits + 1)])
        return cls(res, widths)

    @classmethod
    def uniform(cls, c: float, n_qubits: int, kappa_bar: float = 1.0) -> "LevelModel":
        """Idealized ladder: common width kappa_bar, spacing
        d = (kappa_bar/2) sqrt(C/N) (the worst-case normalization used by
        the phase-control bounds)."""
        d = 0.5 * kappa_bar * math.sqrt(c / n_qubits)
        res = d * np.arange(1, n_qubits + 2, dtype=float)
        return cls(res, np.full(n_qubits + 1, kappa_bar))


@dataclass(frozen=True)
class RateTable:
    """Per-level linewidths, decay rates and Stark phase rates under a
    tone set.  Decay rates add tone by tone (a perturbative approximation;
    the simulator is the arbiter for strong drives)."""

    kappa_m: np.ndarray        # (N+1,)
    gamma_m: np.ndarray        # (N+1, n_tones)
    stark_rate: np.ndarray     # (N+1,) signed phase rate, rad/us

    @property
    def total_gamma(self) -> np.ndarray:
        return self.gamma_m.sum(axis=1)


def rate_table(params: PhysicalParams, tones: list[DriveTone], n_qubits: int,
               level_model: LevelModel | None = None) -> RateTable:
    """Tabulate per-level rates for a tone set against a level model
    (exact-resonance dispersive model by default)."""
    if level_model is None:
        level_model = LevelModel.from_params(params, n_qubits)
    n_lev = level_model.n_levels
    gm = np.zeros((n_lev, max(len(tones), 1)))
    stark = np.zeros(n_lev)
    for m in range(n_lev):
        km = level_model.widths[m]
        for j, tone in enumerate(tones):
            w = tone.w(params)
            det = tone.delta - level_model.resonances[m]
            denom = (km / 2.0) ** 2 + det ** 2
            gm[m, j] = w ** 2 * km / denom
            stark[m] += w ** 2 * det / denom
    return RateTable(level_model.widths.copy(), gm[:, :len(tones)], stark)


def dressed_effective_h(params: PhysicalParams, tone: DriveTone,
                        n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Two-level dressed Hamiltonians, one 2x2 block per Dicke level.

    Block m is [[-delta, w], [w, -(m+1) d]] in the (psi0_m, psi1_m) basis,
    with psi1_m carrying linewidth kappa_m.  Returns (blocks, widths) with
    blocks of shape (N+1, 2, 2).  Static, hence single tone only; used for
    analytic cross-checks, not by the full simulator.  Refuses outside the
    dispersive regime where the expansion is meaningless.
    """
    if isinstance(tone, (list, tuple)):
        if len(tone) != 1:
            raise ValueError("dressed 2x2 model is static: exactly one tone")
        tone = tone[0]
    if not params.is_dispersive:
        raise ValueError("dressed model invalid: g/Delta exceeds the "
                         f"dispersive threshold {params.dispersive_threshold}")
    w = tone.w(params)
    d = params.dispersive_shift
    blocks = np.zeros((n_qubits + 1, 2, 2), dtype=np.complex128)
    widths = np.empty(n_qubits + 1)
    for m in range(n_qubits + 1):
        blocks[m] = [[-tone.delta, w], [w, -(m + 1) * d]]
        widths[m] = kappa_m(params, m)
    return blocks, widths


def dressed_survival_amplitude(detuning: float, w: float, width: float, t):
    """Exact no-jump amplitude left on psi0 after driving one dressed level.

    Evolves [[0, w], [w, detuning - i width/2]] from (1, 0) by explicit
    2x2 eigendecomposition; ``detuning`` is the tone offset from the
    level's resonance.  Accepts scalar or array t (us); the result keeps
    the input's shape.
    """
    scalar = np.isscalar(t)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    dpart = complex(detuning, -width / 2.0)
    disc = np.sqrt(complex(dpart ** 2 + 4.0 * w ** 2))
    lam1 = 0.5 * (dpart + disc)
    lam2 = 0.5 * (dpart - disc)
    if abs(lam1 - lam2) < 1e-300:
        raise ValueError("degenerate dressed eigenvalues")
    # (1, 0) decomposed on the eigenvectors (w, lam_i); lam1 + lam2 = dpart
    c1 = (lam1 - dpart) / (lam1 - lam2)
    c2 = (lam2 - dpart) / (lam2 - lam1)
    amp = c1 * np.exp(-1j * lam1 * t) + c2 * np.exp(-1j * lam2 * t)
    return complex(amp[0]) if scalar else amp


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------

def params_from_config(doc: dict) -> PhysicalParams:
    """Build PhysicalParams from the structured config mapping.

    Keys: g_mhz, kappa_mhz, gamma_e_mhz and either delta_mhz or
    auto_balance_n (balance the detuning at that level).
    """
    g = TWO_PI * float(doc["g_mhz"])
    kappa = TWO_PI * float(doc["kappa_mhz"])
    gamma_e = TWO_PI * float(doc["gamma_e_mhz"])
    if "delta_mhz" in doc and doc["delta_mhz"] is not None:
        delta = TWO_PI * float(doc["delta_mhz"])
    elif "auto_balance_n" in doc and doc["auto_balance_n"] is not None:
        delta = optimal_delta_cap(g, kappa, gamma_e, int(doc["auto_balance_n"]))
    else:
        raise ValueError("config needs delta_mhz or auto_balance_n")
    return PhysicalParams(g, kappa, gamma_e, delta)


def tones_from_config(entries: list[dict]) -> list[DriveTone]:
    return [DriveTone.from_mhz(float(e["delta_mhz"]), float(e["omega_mhz"]))
            for e in entries]
