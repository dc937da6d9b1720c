"""Joint single-excitation state space of source atom, cavity and ensemble.

The basis covers the states reachable from the source atom in its lower
ground state with at most one shared excitation, plus one absorbing label
for everything that has irreversibly decayed:

======================  =================  ==============
block                   labels             count
======================  =================  ==============
source down             (down, m), m=0..N  N + 1
source excited          (e, m),    m=0..N  N + 1
photon in cavity        (cav, m),  m=0..N  N + 1
ensemble excited        (me, m),   m=1..N  N
absorbing loss sector   (lost,)            1
======================  =================  ==============

Total dimension 4N + 4.  Ordering is fixed exactly as listed above so that
serialized amplitude vectors are portable across runs.  ``m`` labels the
symmetric Dicke state with ``m`` qubits up; ``(me, m)`` is the state where
``|m>`` has collectively absorbed the cavity photon.  In the ``down`` and
``e`` blocks the cavity is empty; in the ``cav`` and ``me`` blocks the
source atom sits in its upper ground state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SECTORS = ("down", "e", "cav", "me", "lost")


@dataclass(frozen=True)
class JointBasisState:
    """One basis label: a sector tag plus the Dicke index m (-1 for lost)."""

    sector: str
    m: int = -1

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise ValueError(f"unknown sector {self.sector!r}")


@dataclass(frozen=True)
class JointBasis:
    """Indexed basis of the joint source/cavity/ensemble space."""

    n_qubits: int
    states: tuple[JointBasisState, ...]
    _index: dict[JointBasisState, int] = field(repr=False, hash=False, default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, state: JointBasisState) -> int:
        return self._index[state]

    # convenience index helpers, heavily used by the Hamiltonian builders
    def down(self, m: int) -> int:
        return self._index[JointBasisState("down", m)]

    def e(self, m: int) -> int:
        return self._index[JointBasisState("e", m)]

    def cav(self, m: int) -> int:
        return self._index[JointBasisState("cav", m)]

    def me(self, m: int) -> int:
        return self._index[JointBasisState("me", m)]

    @property
    def lost(self) -> int:
        return self._index[JointBasisState("lost")]

    def down_indices(self) -> np.ndarray:
        return np.array([self.down(m) for m in range(self.n_qubits + 1)], dtype=np.int64)

    def e_indices(self) -> np.ndarray:
        return np.array([self.e(m) for m in range(self.n_qubits + 1)], dtype=np.int64)

    def cav_indices(self) -> np.ndarray:
        return np.array([self.cav(m) for m in range(self.n_qubits + 1)], dtype=np.int64)

    def me_indices(self) -> np.ndarray:
        return np.array([self.me(m) for m in range(1, self.n_qubits + 1)], dtype=np.int64)


def build_basis(n_qubits: int) -> JointBasis:
    """Enumerate the joint basis for an ensemble of ``n_qubits`` qubits.

    Raises ``ValueError`` for n_qubits < 1.  The returned ordering is the
    documented one: down block, source-excited block, cavity block,
    ensemble-excited block, lost.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    states: list[JointBasisState] = []
    for sector in ("down", "e", "cav"):
        states.extend(JointBasisState(sector, m) for m in range(n_qubits + 1))
    states.extend(JointBasisState("me", m) for m in range(1, n_qubits + 1))
    states.append(JointBasisState("lost"))
    index = {s: i for i, s in enumerate(states)}
    return JointBasis(n_qubits=n_qubits, states=tuple(states), _index=index)


@dataclass
class JointState:
    """Pure amplitude vector or Hermitian density matrix on a JointBasis.

    Immutable by convention: propagators and projectors always return new
    instances.
    """

    basis: JointBasis
    data: np.ndarray
    kind: str  # "pure" | "density"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        dim = self.basis.dim
        if self.kind == "pure":
            if self.data.shape != (dim,):
                raise ValueError(f"pure state must have shape ({dim},)")
        elif self.kind == "density":
            if self.data.shape != (dim, dim):
                raise ValueError(f"density must have shape ({dim},{dim})")
        else:
            raise ValueError("kind must be 'pure' or 'density'")

    @property
    def norm(self) -> float:
        """Squared norm (pure) or trace (density); both real, dimensionless."""
        if self.kind == "pure":
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def to_density(self) -> "JointState":
        if self.kind == "density":
            return JointState(self.basis, self.data.copy(), "density")
        return JointState(self.basis, np.outer(self.data, self.data.conj()), "density")

    def validate(self, herm_tol: float = 1e-12, psd_tol: float = -1e-10) -> None:
        """Check the density invariants (Hermiticity, positivity)."""
        if self.kind != "density":
            return
        dev = np.max(np.abs(self.data - self.data.conj().T))
        if dev > herm_tol:
            raise ValueError(f"density not Hermitian: max deviation {dev:.3e}")
        lo = float(np.linalg.eigvalsh(self.data).min())
        if lo < psd_tol:
            raise ValueError(f"density not PSD: min eigenvalue {lo:.3e}")

    def down_populations(self) -> np.ndarray:
        """Populations of the (down, m) block, m = 0..N."""
        idx = self.basis.down_indices()
        if self.kind == "pure":
            return np.abs(self.data[idx]) ** 2
        return np.real(np.diagonal(self.data)[idx]).copy()

    def to_json(self) -> str:
        flat = self.data.ravel()
        return json.dumps({
            "n_qubits": self.basis.n_qubits,
            "kind": self.kind,
            "amplitudes": [[float(z.real), float(z.imag)] for z in flat],
        })

    @classmethod
    def from_json(cls, text: str) -> "JointState":
        doc = json.loads(text)
        basis = build_basis(int(doc["n_qubits"]))
        flat = np.array([complex(re, im) for re, im in doc["amplitudes"]],
                        dtype=np.complex128)
        kind = doc["kind"]
        if kind == "density":
            flat = flat.reshape(basis.dim, basis.dim)
        return cls(basis, flat, kind)


@dataclass
class EnsembleState:
    """Reduced state of the ensemble over Dicke labels m = 0..N.

    ``residual_weight`` carries the trace that sits outside the |m> span
    (collectively excited or lost population) so that partial tracing
    conserves probability.
    """

    n_qubits: int
    data: np.ndarray
    kind: str  # "pure" | "density"
    residual_weight: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        n = self.n_qubits + 1
        want = (n,) if self.kind == "pure" else (n, n)
        if self.data.shape != want:
            raise ValueError(f"expected shape {want}, got {self.data.shape}")

    @property
    def populations(self) -> np.ndarray:
        if self.kind == "pure":
            return np.abs(self.data) ** 2
        return np.real(np.diagonal(self.data)).copy()

    @property
    def trace(self) -> float:
        return float(self.populations.sum() + self.residual_weight)

    def normalize(self) -> "EnsembleState":
        t = self.trace
        if t <= 0:
            raise ValueError("cannot normalize state with zero trace")
        scale = 1.0 / t if self.kind == "density" else 1.0 / math.sqrt(t)
        return EnsembleState(self.n_qubits, self.data * scale, self.kind,
                             self.residual_weight / t)

    def dicke_population(self, m: int) -> float:
        return float(self.populations[m])


def css_state(n_qubits: int, basis: JointBasis) -> JointState:
    """Initial product state: source down, cavity empty, ensemble in a CSS.

    The coherent spin state (|down>+|up>)/sqrt(2) per qubit puts binomial
    amplitude sqrt(C(N,m)/2^N) on each (down, m) label.
    """
    if basis.n_qubits != n_qubits:
        raise ValueError("basis was built for a different n_qubits")
    vec = np.zeros(basis.dim, dtype=np.complex128)
    for m in range(n_qubits + 1):
        vec[basis.down(m)] = math.sqrt(math.comb(n_qubits, m) / 2.0 ** n_qubits)
    return JointState(basis, vec, "pure")


def dicke_projector(m: int, basis: JointBasis) -> np.ndarray:
    """Rank-1 projector onto (down, cavity empty, Dicke m) in the joint space."""
    if not 0 <= m <= basis.n_qubits:
        raise ValueError(f"m={m} outside 0..{basis.n_qubits}")
    proj = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
    i = basis.down(m)
    proj[i, i] = 1.0
    return proj
