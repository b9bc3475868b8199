"""Figures of merit: trace-class distance, likelihood-plateau spread, information gain.

The likelihood plateau of informationally incomplete data is probed by
sampling: many pure-likelihood solves from random interior starting points
land at different points of the plateau, and the normalized Hilbert-Schmidt
spread Delta of the sample around its centroid estimates the plateau size.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import ChoiOperator
from .linalg import DimensionError, hermitianize, trace_norm
from .mlme import MlmeConfig, mlme_solve
from .seeding import child_seed
from .tomography import InputEnsemble, Pom, TomographyData


def trace_distance(a: ChoiOperator, b: ChoiOperator) -> float:
    """Trace-class distance tr|A - B| / (2 d_in) between Choi operators."""
    if a.d_in != b.d_in or a.d_out != b.d_out:
        raise DimensionError(
            f"trace_distance: incompatible dimensions ({a.d_in}, {a.d_out}) vs ({b.d_in}, {b.d_out})"
        )
    return trace_norm(a.matrix - b.matrix) / (2.0 * a.d_in)


def state_trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Ordinary state distance tr|rho - sigma| / 2."""
    return trace_norm(np.asarray(rho) - np.asarray(sigma)) / 2.0


@dataclass(frozen=True)
class PlateauReport:
    """Sampled plateau summary: centroid, spread Delta, likelihood level."""

    centroid: ChoiOperator
    delta: float
    n_samples: int
    loglik_max: float

    def __post_init__(self):
        if not -1e-12 <= self.delta <= 1.0 + 1e-12:
            raise ValueError(f"PlateauReport: delta {self.delta} outside [0, 1]")


def random_interior_choi(d_in: int, d_out: int, rng: np.random.Generator) -> ChoiOperator:
    """Full-rank trace-preserving starting point: Wishart draw, TP-normalized."""
    dim = d_in * d_out
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    g = x @ x.conj().T + 1e-6 * np.eye(dim)
    g4 = g.reshape(d_in, d_out, d_in, d_out)
    n2 = np.einsum("jaka->jk", g4)
    vals, vecs = np.linalg.eigh(hermitianize(n2))
    n_inv = (vecs / np.sqrt(vals)) @ vecs.conj().T
    y = np.tensordot(n_inv, g4, axes=(1, 0))
    y = np.tensordot(y, n_inv, axes=([2], [0])).transpose(0, 1, 3, 2)
    return ChoiOperator(matrix=hermitianize(y.reshape(dim, dim)), d_in=d_in, d_out=d_out)


def ml_sample(
    data: TomographyData,
    inputs: InputEnsemble,
    pom: Pom,
    n_samples: int,
    seed,
    cfg: MlmeConfig | None = None,
    retry_cap: int = 3,
) -> list[ChoiOperator]:
    """Draw pure-likelihood (lambda = 0) estimators from independent random starts.

    Non-converged runs are replaced from fresh starts, up to ``retry_cap``
    extra attempts per sample; a persistent failure raises.
    """
    if n_samples < 2:
        raise ValueError("ml_sample: need at least 2 samples")
    cfg0 = replace(cfg or MlmeConfig(), lam=0.0)
    samples: list[ChoiOperator] = []
    for j in range(n_samples):
        for attempt in range(retry_cap + 1):
            rng = np.random.default_rng(child_seed(seed, j, attempt))
            e0 = random_interior_choi(inputs.dim, pom.dim, rng)
            report = mlme_solve(data, inputs, pom, cfg0, e0=e0)
            if report.converged:
                samples.append(report.estimator)
                break
        else:
            raise RuntimeError(f"ml_sample: sample {j} failed to converge after {retry_cap + 1} starts")
    return samples


def plateau_size(samples: list[ChoiOperator]) -> PlateauReport:
    """Centroid and normalized Hilbert-Schmidt spread of sampled ML estimators.

    Delta = sqrt(sum_j tr{(E_j - Ebar)^2} / (2 N0)) / d_in, which lies in [0, 1].
    """
    if len(samples) < 2:
        raise ValueError("plateau_size: need at least 2 samples")
    d_in, d_out = samples[0].d_in, samples[0].d_out
    mats = np.array([s.matrix for s in samples])
    centroid = hermitianize(mats.mean(axis=0))
    devs = mats - centroid
    sq = float(np.sum(np.abs(devs) ** 2))  # sum_j tr{(E_j - Ebar)^2} for Hermitian devs
    delta = np.sqrt(sq / (2.0 * len(samples))) / d_in
    return PlateauReport(
        centroid=ChoiOperator(matrix=centroid, d_in=d_in, d_out=d_out),
        delta=float(delta),
        n_samples=len(samples),
        loglik_max=np.nan,
    )


def loglik_max(
    data: TomographyData,
    inputs: InputEnsemble,
    pom: Pom,
    cfg: MlmeConfig | None = None,
) -> float:
    """Normalized log-likelihood at a pure-ML solution (lambda = 0).

    For noiseless data this is bounded above by sum f log f, with equality
    whenever the true channel's probabilities are attainable.
    """
    report = mlme_solve(data, inputs, pom, replace(cfg or MlmeConfig(), lam=0.0))
    return report.final_information


def data_entropy_bound(data: TomographyData) -> float:
    """sum f log f: the noiseless information-gain ceiling for the data."""
    f = data.frequencies()
    f = f[f > 0]
    return float(np.sum(f * np.log(f)))


def plateau_from_data(
    data: TomographyData,
    inputs: InputEnsemble,
    pom: Pom,
    n_samples: int,
    seed,
    cfg: MlmeConfig | None = None,
) -> PlateauReport:
    """Convenience wrapper: sample, reduce, and attach the likelihood level."""
    samples = ml_sample(data, inputs, pom, n_samples, seed, cfg=cfg)
    report = plateau_size(samples)
    level = loglik_max(data, inputs, pom, cfg=cfg)
    return PlateauReport(
        centroid=report.centroid,
        delta=report.delta,
        n_samples=report.n_samples,
        loglik_max=level,
    )
