"""Input ensembles, POMs, outcome probabilities, and simulated measurement data.

Measurement model: each of L input states is sent through the channel N
times and the output is measured with an M-outcome POM.  Outcome
probabilities carry the 1/L input-selection weight,

    p_lm = tr{E (rho_l^T (x) eta_m Pi_m)} / L,

so that sum_lm p_lm = 1 for a complete POM.  Per-input frequencies
nu_lm = n_lm / N and globally normalized frequencies f_lm = nu_lm / L are
the two bookkeeping conventions; solvers always consume f.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .channels import ChoiOperator
from .linalg import DimensionError, hermitianize, inv_sqrt_psd

STATE_TOL = 1e-10
POM_COMPLETENESS_TOL = 1e-10
SIC_OVERLAP_TOL = 1e-8
PROBABILITY_CLAMP = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

TETRAHEDRON_BLOCH = np.array(
    [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float
) / np.sqrt(3.0)


@dataclass(frozen=True)
class InputEnsemble:
    """Ordered list of unit-trace positive input states."""

    states: tuple[np.ndarray, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        states = tuple(np.asarray(s, dtype=complex) for s in self.states)
        d = states[0].shape[0]
        for i, s in enumerate(states):
            if s.shape != (d, d):
                raise DimensionError(f"InputEnsemble: state {i} has shape {s.shape}, expected ({d}, {d})")
            if abs(np.trace(s).real - 1.0) > STATE_TOL or abs(np.trace(s).imag) > STATE_TOL:
                raise ValueError(f"InputEnsemble: state {i} has trace {np.trace(s)}, expected 1")
            if np.linalg.eigvalsh(hermitianize(s))[0] < -STATE_TOL:
                raise ValueError(f"InputEnsemble: state {i} is not positive")
        labels = self.labels or tuple(f"rho{i}" for i in range(len(states)))
        if len(labels) != len(states):
            raise ValueError("InputEnsemble: labels/states length mismatch")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", tuple(labels))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    def subset(self, indices) -> "InputEnsemble":
        return InputEnsemble(
            states=tuple(self.states[i] for i in indices),
            labels=tuple(self.labels[i] for i in indices),
        )


@dataclass(frozen=True)
class Pom:
    """Probability operator measurement with optional per-outcome efficiencies.

    With unit efficiencies the outcomes sum to the identity; otherwise the
    effective outcomes eta_m Pi_m sum to G <= 1 and the difference is the
    no-detection weight.
    """

    outcomes: tuple[np.ndarray, ...]
    efficiencies: np.ndarray | None = None

    def __post_init__(self):
        outcomes = tuple(np.asarray(p, dtype=complex) for p in self.outcomes)
        d = outcomes[0].shape[0]
        for i, p in enumerate(outcomes):
            if p.shape != (d, d):
                raise DimensionError(f"Pom: outcome {i} has shape {p.shape}, expected ({d}, {d})")
            if np.linalg.eigvalsh(hermitianize(p))[0] < -POM_COMPLETENESS_TOL:
                raise ValueError(f"Pom: outcome {i} is not positive semidefinite")
        if self.efficiencies is None:
            eta = np.ones(len(outcomes))
        else:
            eta = np.asarray(self.efficiencies, dtype=float)
            if eta.shape != (len(outcomes),):
                raise ValueError("Pom: efficiencies must match the number of outcomes")
            if np.any(eta <= 0) or np.any(eta > 1 + 1e-12):
                raise ValueError("Pom: efficiencies must lie in (0, 1]")
        total = sum(outcomes)
        if np.max(np.abs(total - np.eye(d))) > POM_COMPLETENESS_TOL:
            raise ValueError("Pom: outcomes do not sum to the identity")
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "efficiencies", eta)

    def __len__(self) -> int:
        return len(self.outcomes)

    @property
    def dim(self) -> int:
        return self.outcomes[0].shape[0]

    @property
    def perfect_detection(self) -> bool:
        return bool(np.all(self.efficiencies >= 1.0 - 1e-14))

    def effective_outcomes(self) -> np.ndarray:
        """Stacked eta_m Pi_m, shape (M, d, d)."""
        return np.array([eta * p for eta, p in zip(self.efficiencies, self.outcomes)])

    def g_operator(self) -> np.ndarray:
        """G = sum_m eta_m Pi_m (= identity at perfect detection)."""
        return hermitianize(np.sum(self.effective_outcomes(), axis=0))


@dataclass(frozen=True)
class TomographyData:
    """Outcome counts per used input state.

    ``counts[l, m]`` holds occurrence numbers for finite ``copies_per_input``
    and exact per-input frequencies nu_lm when ``copies_per_input`` is None
    (noiseless data).  ``inputs_used`` are indices into the ensemble the data
    were taken from, in measurement order.
    """

    counts: np.ndarray
    copies_per_input: int | None
    inputs_used: tuple[int, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 2:
            raise DimensionError(f"TomographyData: counts must be 2-D, got shape {counts.shape}")
        if counts.shape[0] != len(self.inputs_used):
            raise ValueError("TomographyData: one counts row per used input required")
        if np.any(counts < -1e-12):
            raise ValueError("TomographyData: negative counts")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "inputs_used", tuple(int(i) for i in self.inputs_used))

    @property
    def n_inputs(self) -> int:
        return self.counts.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.counts.shape[1]

    @property
    def noiseless(self) -> bool:
        return self.copies_per_input is None

    def per_input_frequencies(self) -> np.ndarray:
        """nu_lm = n_lm / N (or the stored exact frequencies)."""
        if self.noiseless:
            return self.counts.copy()
        return self.counts / float(self.copies_per_input)

    def frequencies(self) -> np.ndarray:
        """Globally normalized f_lm = nu_lm / L."""
        return self.per_input_frequencies() / self.n_inputs

    def with_row(self, counts_row: np.ndarray, input_index: int) -> "TomographyData":
        counts_row = np.asarray(counts_row, dtype=float).reshape(1, -1)
        if self.counts.size and counts_row.shape[1] != self.n_outcomes:
            raise DimensionError("TomographyData.with_row: outcome count mismatch")
        return replace(
            self,
            counts=np.vstack([self.counts, counts_row]) if self.counts.size else counts_row,
            inputs_used=self.inputs_used + (int(input_index),),
        )


def bloch_state(vec) -> np.ndarray:
    """Qubit state (1 + a . sigma)/2 for a Bloch vector a."""
    ax, ay, az = vec
    return hermitianize((np.eye(2) + ax * PAULI_X + ay * PAULI_Y + az * PAULI_Z) / 2)


def qubit_tetrahedron() -> tuple[InputEnsemble, Pom]:
    """The qubit SIC: four tetrahedron states and the four outcomes |t_k><t_k| / 2."""
    states = tuple(bloch_state(v) for v in TETRAHEDRON_BLOCH)
    labels = tuple(f"t{k}" for k in range(4))
    ensemble = InputEnsemble(states=states, labels=labels)
    pom = Pom(outcomes=tuple(s / 2 for s in states))
    return ensemble, pom


def product_sic_pom(n_qubits: int) -> Pom:
    """Tensor products of qubit tetrahedron outcomes: 4^n informationally complete outcomes."""
    if n_qubits < 1:
        raise ValueError("product_sic_pom: n_qubits must be >= 1")
    _, base = qubit_tetrahedron()
    outcomes = list(base.outcomes)
    for _ in range(n_qubits - 1):
        outcomes = [np.kron(a, b) for a in outcomes for b in base.outcomes]
    return Pom(outcomes=tuple(outcomes))


def _weyl_heisenberg_orbit(fiducial: np.ndarray) -> np.ndarray:
    """d^2 states X^j Z^k |phi> for the cyclic shift/clock group."""
    d = fiducial.shape[0]
    omega = np.exp(2j * np.pi / d)
    orbit = np.empty((d * d, d), dtype=complex)
    for k in range(d):
        zphi = fiducial * omega ** (k * np.arange(d))
        for j in range(d):
            orbit[j * d + k] = np.roll(zphi, j)
    return orbit


def sic_overlap_deviation(states: np.ndarray) -> float:
    """Max deviation of |<psi_j|psi_k>|^2 from (d delta + 1)/(d + 1)."""
    d = states.shape[1]
    gram = np.abs(states.conj() @ states.T) ** 2
    target = (d * np.eye(d * d) + 1.0) / (d + 1)
    return float(np.max(np.abs(gram - target)))


def load_sic_fiducial(source) -> np.ndarray:
    """Parse a fiducial file: header line with d, then d lines 're im'."""
    text = Path(source).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    d = int(lines[0].split()[0])
    if len(lines) != d + 1:
        raise ValueError(f"fiducial file {source}: expected {d} amplitude lines, got {len(lines) - 1}")
    amps = []
    for ln in lines[1 : d + 1]:
        re, im = (float(tok) for tok in ln.split())
        amps.append(complex(re, im))
    fid = np.array(amps)
    norm = np.linalg.norm(fid)
    if norm == 0:
        raise ValueError(f"fiducial file {source}: zero vector")
    return fid / norm


def _default_fiducial_path(d: int) -> Path:
    ref = resources.files("qproctomo").joinpath(f"data/sic_d{d}.txt")
    return Path(str(ref))


def sic_inputs(d: int, fiducial_source=None) -> InputEnsemble:
    """The d^2 SIC projectors as input states, built from a verified fiducial.

    The fiducial file is never trusted blindly: the generated orbit must
    satisfy the SIC overlap relation within 1e-8 or the file is rejected.
    """
    if fiducial_source is None:
        fiducial_source = _default_fiducial_path(d)
    fid = load_sic_fiducial(fiducial_source)
    if fid.shape[0] != d:
        raise ValueError(f"sic_inputs: fiducial dimension {fid.shape[0]} does not match d={d}")
    orbit = _weyl_heisenberg_orbit(fid)
    dev = sic_overlap_deviation(orbit)
    if dev > SIC_OVERLAP_TOL:
        raise ValueError(
            f"sic_inputs: fiducial {fiducial_source} violates the SIC overlap relation "
            f"(max deviation {dev:.3e} > {SIC_OVERLAP_TOL:.0e})"
        )
    states = tuple(hermitianize(np.outer(v, v.conj())) for v in orbit)
    labels = tuple(f"sic{d}_{i // d}{i % d}" for i in range(d * d))
    return InputEnsemble(states=states, labels=labels)


STANDARD_KETS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
}
STANDARD_KET_ORDER = "01+i"


def standard_product_inputs(n_qubits: int) -> InputEnsemble:
    """Separable tomography inputs: products of |0>, |1>, |+>, |+i> projectors."""
    if n_qubits < 1:
        raise ValueError("standard_product_inputs: n_qubits must be >= 1")
    kets = [STANDARD_KETS[c] for c in STANDARD_KET_ORDER]
    vecs = kets
    labels = list(STANDARD_KET_ORDER)
    for _ in range(n_qubits - 1):
        vecs = [np.kron(a, b) for a in vecs for b in kets]
        labels = [la + lb for la in labels for lb in STANDARD_KET_ORDER]
    states = tuple(hermitianize(np.outer(v, v.conj())) for v in vecs)
    return InputEnsemble(states=states, labels=tuple(f"|{lab}>" for lab in labels))


def random_pom(d: int, m: int, seed: int = 0) -> Pom:
    """m random positive operators normalized to sum to the identity exactly.

    Wishart draws A_j = X X† are squeezed through the common factor
    S^{-1/2} (S = sum A_j), which enforces completeness without clipping;
    linear independence of the outcomes is verified.
    """
    if m < d * d:
        raise ValueError(f"random_pom: need m >= d^2 outcomes for informational completeness, got {m}")
    rng = np.random.default_rng(seed)
    ws = []
    for _ in range(m):
        x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        ws.append(x @ x.conj().T)
    s_inv_sqrt = inv_sqrt_psd(np.sum(ws, axis=0))
    outcomes = tuple(hermitianize(s_inv_sqrt @ w @ s_inv_sqrt) for w in ws)
    stacked = np.array([p.reshape(-1) for p in outcomes])
    rank = np.linalg.matrix_rank(stacked, tol=1e-10)
    if rank < min(m, d * d):
        raise ValueError(f"random_pom: degenerate draw, outcome rank {rank} < {min(m, d * d)}")
    return Pom(outcomes=outcomes)


def probabilities_for_states(
    e: ChoiOperator, states, effective_outcomes: np.ndarray
) -> np.ndarray:
    """p_lm = tr{E (rho_l^T (x) Pi~_m)} / L over an explicit state list."""
    return _probabilities_raw(e.matrix, e.d_in, e.d_out, np.asarray(states), effective_outcomes)


def _probabilities_raw(
    e_matrix: np.ndarray, d_in: int, d_out: int, states: np.ndarray, pis: np.ndarray
) -> np.ndarray:
    n_l = states.shape[0]
    # output states T_l = tr_H{E (rho_l^T (x) 1)}, then p_lm = tr{T_l Pi_m} / L
    e_out_in = e_matrix.reshape(d_in, d_out, d_in, d_out).transpose(1, 3, 0, 2).reshape(
        d_out * d_out, d_in * d_in
    )
    t = (e_out_in @ states.reshape(n_l, -1).T).T  # (L, d_out^2) rows vec(T_l)
    pis_t = pis.transpose(0, 2, 1).reshape(len(pis), -1)  # vec(Pi_m^T)
    p = (t @ pis_t.T).real / n_l
    low = p.min(initial=0.0)
    if low < -PROBABILITY_CLAMP:
        raise ValueError(f"probabilities: negative probability {low:.3e} signals an invalid operator")
    return np.clip(p, 0.0, None)


def probabilities(e: ChoiOperator, inputs: InputEnsemble, pom: Pom) -> np.ndarray:
    """Outcome probability matrix p_lm (L x M) including the 1/L input weight."""
    if inputs.dim != e.d_in:
        raise DimensionError(f"probabilities: input dim {inputs.dim} != channel d_in {e.d_in}")
    if pom.dim != e.d_out:
        raise DimensionError(f"probabilities: POM dim {pom.dim} != channel d_out {e.d_out}")
    return probabilities_for_states(e, inputs.states, pom.effective_outcomes())


def sample_counts(
    p: np.ndarray,
    n_copies: int | None,
    seed,
    inputs_used=None,
) -> TomographyData:
    """Simulate counts by multinomial sampling of N copies per input state.

    Rows of ``p`` are outcome probabilities including the 1/L weight (so each
    row sums to at most 1/L); any deficit goes to an internal no-detection
    bin.  ``n_copies=None`` requests noiseless data: exact per-input
    frequencies nu_lm = L * p_lm are stored instead of counts.
    """
    p = np.asarray(p, dtype=float)
    n_l, n_m = p.shape
    row_sums = p.sum(axis=1)
    if np.any(row_sums > 1.0 / n_l + 1e-9):
        raise ValueError("sample_counts: per-input probabilities exceed 1/L")
    if inputs_used is None:
        inputs_used = tuple(range(n_l))
    nu = p * n_l  # per-input conditional distribution
    if n_copies is None:
        return TomographyData(counts=nu, copies_per_input=None, inputs_used=inputs_used)
    rng = np.random.default_rng(seed)
    counts = np.empty((n_l, n_m))
    for l in range(n_l):
        no_click = max(0.0, 1.0 - nu[l].sum())
        probs = np.concatenate([nu[l], [no_click]])
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum()
        counts[l] = rng.multinomial(n_copies, probs)[:n_m]
    return TomographyData(counts=counts, copies_per_input=int(n_copies), inputs_used=inputs_used)


def simulate_input(
    e_true: ChoiOperator,
    state: np.ndarray,
    pom: Pom,
    n_copies: int | None,
    seed,
) -> np.ndarray:
    """One measurement round for a single input state; returns the counts row."""
    p = probabilities_for_states(e_true, np.asarray([state]), pom.effective_outcomes())
    data = sample_counts(p, n_copies, seed)
    return data.counts[0]
