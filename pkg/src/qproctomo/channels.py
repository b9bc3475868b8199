"""Quantum channels as Choi operators: construction, application, benchmarks.

A trace-preserving channel on a ``d_in``-dimensional input space H with
``d_out``-dimensional output space K is represented by its Choi operator
``E`` on H (x) K, positive, with ``tr_K{E} = 1_H`` and ``tr{E} = d_in``.
The operator of a unitary channel is rank-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DimensionError,
    check_hermitian,
    haar_isometry,
    hermitianize,
    matrix_from_jsonable,
    matrix_to_jsonable,
    partial_trace,
)

KRAUS_COMPLETENESS_TOL = 1e-10
CHOI_POSITIVITY_TOL = 1e-10
CHOI_TRACE_TOL = 1e-8
RANK_CUTOFF = 1e-8  # eigenvalues below RANK_CUTOFF * tr(E) count as zero

U_CNOT = np.array(
    [
        [1, 0, 0, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
        [0, 0, 1, 0],
    ],
    dtype=complex,
)

U_TOFFOLI = np.eye(8, dtype=complex)
U_TOFFOLI[6:, 6:] = np.array([[0, 1], [1, 0]])


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators K_m (each d_out x d_in) with sum_m K†K = 1."""

    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("KrausSet: need at least one operator")
        d_out, d_in = ops[0].shape
        for k in ops:
            if k.shape != (d_out, d_in):
                raise DimensionError(f"KrausSet: inconsistent shapes {k.shape} vs {(d_out, d_in)}")
        total = sum(k.conj().T @ k for k in ops)
        dev = np.max(np.abs(total - np.eye(d_in)))
        if dev > KRAUS_COMPLETENESS_TOL:
            raise ValueError(f"KrausSet: completeness violated, max deviation {dev:.3e}")
        object.__setattr__(self, "operators", ops)

    @property
    def d_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.operators[0].shape[0]


@dataclass(frozen=True)
class ChoiOperator:
    """Positive operator on H (x) K encoding a trace-preserving channel."""

    matrix: np.ndarray
    d_in: int
    d_out: int
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        dim = self.d_in * self.d_out
        if m.shape != (dim, dim):
            raise DimensionError(f"ChoiOperator: shape {m.shape} != ({dim}, {dim})")
        if self.validate:
            check_hermitian(m, tol=1e-10, name="Choi matrix")
            min_eig = np.linalg.eigvalsh(m)[0]
            if min_eig < -CHOI_POSITIVITY_TOL:
                raise ValueError(f"ChoiOperator: not positive, min eigenvalue {min_eig:.3e}")
            tr = float(np.trace(m).real)
            if abs(tr - self.d_in) > CHOI_TRACE_TOL:
                raise ValueError(f"ChoiOperator: trace {tr} != d_in {self.d_in}")
            marginal = partial_trace(m, (self.d_in, self.d_out), over="K")
            dev = np.max(np.abs(marginal - np.eye(self.d_in)))
            if dev > CHOI_TRACE_TOL:
                raise ValueError(f"ChoiOperator: tr_K deviates from identity by {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.d_in * self.d_out

    def rank(self) -> int:
        vals = np.linalg.eigvalsh(self.matrix)
        return int(np.sum(vals > RANK_CUTOFF * float(np.trace(self.matrix).real)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)[::-1].copy()

    def to_jsonable(self) -> dict:
        return {
            "d_in": self.d_in,
            "d_out": self.d_out,
            "matrix": matrix_to_jsonable(self.matrix),
        }

    @staticmethod
    def from_jsonable(d: dict) -> "ChoiOperator":
        return ChoiOperator(
            matrix=matrix_from_jsonable(d["matrix"]), d_in=int(d["d_in"]), d_out=int(d["d_out"])
        )


def choi_vector(k: np.ndarray) -> np.ndarray:
    """|psi> = sum_j |j> (x) K|j>, the Choi vector of one Kraus operator."""
    return np.ascontiguousarray(k.T).reshape(-1)


def choi_from_kraus(kraus: KrausSet) -> ChoiOperator:
    """Assemble E = sum_m |psi_m><psi_m| from a complete Kraus set."""
    dim = kraus.d_in * kraus.d_out
    e = np.zeros((dim, dim), dtype=complex)
    for k in kraus.operators:
        psi = choi_vector(k)
        e += np.outer(psi, psi.conj())
    return ChoiOperator(matrix=hermitianize(e), d_in=kraus.d_in, d_out=kraus.d_out)


def apply_channel(e: ChoiOperator, rho_in: np.ndarray) -> np.ndarray:
    """Output state tr_H{E (rho^T (x) 1_K)} for a unit-trace input state."""
    rho_in = np.asarray(rho_in, dtype=complex)
    if rho_in.shape != (e.d_in, e.d_in):
        raise DimensionError(
            f"apply_channel: input state shape {rho_in.shape} != ({e.d_in}, {e.d_in})"
        )
    e4 = e.matrix.reshape(e.d_in, e.d_out, e.d_in, e.d_out)
    return hermitianize(np.einsum("jakb,jk->ab", e4, rho_in))


def unitary_channel(u: np.ndarray) -> ChoiOperator:
    u = np.asarray(u, dtype=complex)
    return choi_from_kraus(KrausSet(operators=(u,)))


def builtin_channel(name: str, dim: int = 2) -> ChoiOperator:
    """Benchmark channels: 'cnot' (two qubits), 'toffoli' (three), 'identity'."""
    name = name.lower()
    if name == "cnot":
        return unitary_channel(U_CNOT)
    if name == "toffoli":
        return unitary_channel(U_TOFFOLI)
    if name == "identity":
        return unitary_channel(np.eye(dim, dtype=complex))
    raise ValueError(f"builtin_channel: unknown channel {name!r}")


def imperfect_cnot(epsilon: float) -> KrausSet:
    """CNOT with probability 1 - epsilon, identity with probability epsilon (rank-2 Choi)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"imperfect_cnot: epsilon {epsilon} outside [0, 1]")
    k1 = np.sqrt(1.0 - epsilon) * U_CNOT
    k2 = np.sqrt(epsilon) * np.eye(4, dtype=complex)
    ops = tuple(k for k in (k1, k2) if np.max(np.abs(k)) > 0)
    return KrausSet(operators=ops)


def noisy_cnot(epsilon: float, n_noise: int = 15, seed: int = 0) -> KrausSet:
    """CNOT with probability 1 - epsilon, random perturbation with probability epsilon.

    The noise operators B_j are blocks of a Haar-random isometry, so
    sum_j B†B = 1 holds exactly and the Choi operator has rank 1 + n_noise
    (full rank at n_noise = 15 for two qubits).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"noisy_cnot: epsilon {epsilon} outside [0, 1]")
    if n_noise < 1:
        raise ValueError(f"noisy_cnot: n_noise must be >= 1, got {n_noise}")
    if epsilon == 0.0:
        return KrausSet(operators=(U_CNOT,))
    rng = np.random.default_rng(seed)
    v = haar_isometry(4 * n_noise, 4, rng)
    blocks = tuple(np.sqrt(epsilon) * v[4 * j : 4 * (j + 1), :] for j in range(n_noise))
    return KrausSet(operators=(np.sqrt(1.0 - epsilon) * U_CNOT,) + blocks)


def random_channel(d_in: int, d_out: int, rank: int, seed: int = 0) -> ChoiOperator:
    """Random trace-preserving channel of the given Choi rank.

    Stinespring draw: a Haar-random isometry H -> K (x) C^rank is sliced
    into ``rank`` Kraus blocks, which guarantees exact completeness.
    """
    if not 1 <= rank <= d_in * d_out:
        raise ValueError(f"random_channel: rank {rank} outside [1, {d_in * d_out}]")
    if d_out * rank < d_in:
        raise DimensionError(f"random_channel: no isometry with d_out*rank = {d_out * rank} < d_in = {d_in}")
    rng = np.random.default_rng(seed)
    v = haar_isometry(d_out * rank, d_in, rng)
    ops = tuple(v[d_out * r : d_out * (r + 1), :] for r in range(rank))
    return choi_from_kraus(KrausSet(operators=ops))


def channel_entropy(e: ChoiOperator) -> float:
    """Channel entropy S(E) = -tr{(E/d_in) log(E/d_in)}, zero iff unitary."""
    x = np.linalg.eigvalsh(e.matrix) / e.d_in
    x = x[x > 0]
    return float(-np.sum(x * np.log(x)))


def maximally_mixed_choi(d_in: int, d_out: int) -> ChoiOperator:
    """The maximum-entropy trace-preserving Choi operator 1 / d_out."""
    dim = d_in * d_out
    return ChoiOperator(matrix=np.eye(dim, dtype=complex) / d_out, d_in=d_in, d_out=d_out)


def channel_from_spec(spec: dict) -> ChoiOperator:
    """Build a channel from a config mapping.

    Recognized forms: ``{"builtin": name}``, ``{"imperfect_cnot": eps}``,
    ``{"noisy_cnot": eps, "n_noise": j, "seed": s}``,
    ``{"random": {"d_in": .., "d_out": .., "rank": .., "seed": ..}}`` and
    ``{"file": path}`` pointing at a serialized ChoiOperator JSON.
    """
    if "builtin" in spec:
        return builtin_channel(str(spec["builtin"]), dim=int(spec.get("dim", 2)))
    if "imperfect_cnot" in spec:
        return choi_from_kraus(imperfect_cnot(float(spec["imperfect_cnot"])))
    if "noisy_cnot" in spec:
        return choi_from_kraus(
            noisy_cnot(
                float(spec["noisy_cnot"]),
                n_noise=int(spec.get("n_noise", 15)),
                seed=int(spec.get("seed", 0)),
            )
        )
    if "random" in spec:
        r = spec["random"]
        return random_channel(
            d_in=int(r["d_in"]), d_out=int(r["d_out"]), rank=int(r["rank"]), seed=int(r.get("seed", 0))
        )
    if "file" in spec:
        import json

        with open(spec["file"]) as fh:
            return ChoiOperator.from_jsonable(json.load(fh))
    raise ValueError(f"channel_from_spec: unrecognized channel spec {spec!r}")
