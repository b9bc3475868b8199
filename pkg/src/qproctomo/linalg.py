"""Dense Hermitian linear algebra: tensor products, partial traces, spectral calculus.

Conventions used throughout the package:

* all operators are dense complex square matrices (row-major ``np.ndarray``);
* bipartite operators live on H (x) K with H the *slow* index, i.e. the
  entry ``A[(j, a), (k, b)]`` sits at row ``j * dK + a``, column ``k * dK + b``;
* Hermiticity is re-enforced with :func:`hermitianize` after multiplicative
  updates to suppress round-off drift.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

HERMITICITY_TOL = 1e-12


class DimensionError(ValueError):
    """Operator dimensions are inconsistent with the requested operation."""


def hermitianize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (A + A†)/2."""
    return (a + a.conj().T) / 2


def check_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL, name: str = "operator") -> np.ndarray:
    """Validate that ``a`` is square and Hermitian within ``tol`` (max entry deviation)."""
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise ValueError(f"{name} is not Hermitian: max deviation {dev:.3e} > {tol:.0e}")
    return a


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the slow-index-first block convention."""
    return np.kron(a, b)


def partial_trace(a: np.ndarray, dims: tuple[int, int], over: str) -> np.ndarray:
    """Trace out one factor of an operator on H (x) K.

    ``dims = (dH, dK)``; ``over`` is ``"H"`` or ``"K"`` (the factor removed).
    The trace of the result equals the trace of the input.
    """
    d_h, d_k = dims
    a = np.asarray(a)
    if a.shape != (d_h * d_k, d_h * d_k):
        raise DimensionError(
            f"partial_trace: operator has shape {a.shape}, expected "
            f"({d_h * d_k}, {d_h * d_k}) from factor dims ({d_h}, {d_k})"
        )
    a4 = a.reshape(d_h, d_k, d_h, d_k)
    if over.upper() == "H":
        return np.einsum("jajb->ab", a4)
    if over.upper() == "K":
        return np.einsum("jaka->jk", a4)
    raise ValueError(f"partial_trace: unknown subsystem selector {over!r} (use 'H' or 'K')")


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian operator, eigenvalues descending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # column k pairs with eigenvalues[k]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def eig_hermitian(a: np.ndarray) -> Spectrum:
    """Eigendecomposition via ``eigh``, sorted descending."""
    vals, vecs = np.linalg.eigh(hermitianize(np.asarray(a)))
    order = slice(None, None, -1)
    return Spectrum(eigenvalues=vals[order].copy(), eigenvectors=vecs[:, order].copy())


def spectral_map(
    a: np.ndarray,
    f: Callable[[np.ndarray], np.ndarray],
    zero_floor: float | None = None,
) -> np.ndarray:
    """Apply a real function to the spectrum of a Hermitian operator.

    When ``zero_floor`` is given, eigenvalues are clamped from below first;
    this regularizes log/sqrt on rank-deficient positive operators.  ``f``
    must be finite on the (clamped) spectrum.
    """
    spec = eig_hermitian(a)
    vals = spec.eigenvalues
    if zero_floor is not None:
        vals = np.maximum(vals, zero_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        fvals = np.asarray(f(vals), dtype=float)
    if not np.all(np.isfinite(fvals)):
        bad = vals[~np.isfinite(fvals)]
        raise ValueError(f"spectral_map: function not finite at eigenvalues {bad}")
    v = spec.eigenvectors
    return hermitianize((v * fvals) @ v.conj().T)


def trace_norm(a: np.ndarray) -> float:
    """tr|A| = sum of absolute eigenvalues, for Hermitian A."""
    vals = np.linalg.eigvalsh(hermitianize(np.asarray(a)))
    return float(np.sum(np.abs(vals)))


def min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitianize(np.asarray(a)))[0])


def sqrt_psd(a: np.ndarray, zero_floor: float = 0.0) -> np.ndarray:
    """Principal square root of a positive semidefinite operator."""
    return spectral_map(a, np.sqrt, zero_floor=zero_floor)


def inv_sqrt_psd(a: np.ndarray, singular_tol: float = 1e-12) -> np.ndarray:
    """Inverse square root of a positive definite operator.

    Rejects operators whose smallest eigenvalue falls below ``singular_tol``
    (relative to the largest): congruence normalizers must stay invertible.
    """
    spec = eig_hermitian(a)
    vals = spec.eigenvalues
    if vals[0] <= 0 or vals[-1] < singular_tol * vals[0]:
        raise np.linalg.LinAlgError(
            f"inv_sqrt_psd: operator is numerically singular (eigenvalues "
            f"{vals[-1]:.3e} .. {vals[0]:.3e})"
        )
    v = spec.eigenvectors
    return hermitianize((v / np.sqrt(vals)) @ v.conj().T)


def haar_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random isometry V (rows x cols, V†V = 1) from QR of a Gaussian matrix.

    The R-diagonal phase is fixed so the draw is Haar and deterministic
    under a fixed generator state.
    """
    if rows < cols:
        raise DimensionError(f"haar_isometry: need rows >= cols, got {rows} < {cols}")
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return haar_isometry(dim, dim, rng)


def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state as a rank-1 density matrix."""
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def matrix_to_jsonable(a: np.ndarray) -> dict:
    """JSON form of a complex matrix: row-major [re, im] pairs plus a dim header."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix_to_jsonable: expected a square matrix, got {a.shape}")
    flat = a.reshape(-1)
    return {"dim": a.shape[0], "entries": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_jsonable(d: dict) -> np.ndarray:
    dim = int(d["dim"])
    entries = d["entries"]
    if len(entries) != dim * dim:
        raise DimensionError(
            f"matrix_from_jsonable: dim header {dim} implies {dim * dim} entries, got {len(entries)}"
        )
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(dim, dim)
