"""Steepest-ascent estimation of Choi operators from (incomplete) count data.

The solver maximizes the information functional

    I(lambda; E) = lambda * S(E) + sum_lm f_lm log p_lm,

over positive trace-preserving Choi operators, where S is the channel
entropy, f_lm = n_lm / (L N) are globally normalized frequencies and the
second term is the normalized log-likelihood.  Updates are congruences

    E' = (1 + Z†) E (1 + Z),
    1 + Z = (1 + dA) [sqrt(tr_K{(1 + dA) E (1 + dA)})^-1 (x) 1_K],
    dA = (eps / 2) (W - 1/2 tr_K{W E + E W} (x) 1_K),

with W the gradient operator of I.  The congruence keeps every iterate
positive and exactly trace-preserving; backtracking on eps keeps the
ascent monotone.  Convergence is declared when the extremal-equation
residual || Lam E Lam - W E W || / || W E W || (Lam = sqrt(tr_K{W E W}) (x) 1)
drops below tolerance.

With detector inefficiencies the POM outcomes are eta_m Pi_m and W is
replaced by W - W0; W0 rescales for the copies that escape detection and
the ascent objective gains a -log(sum_l' p'_l') renormalization term whose
gradient W0 is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChoiOperator, maximally_mixed_choi
from .linalg import hermitianize
from .tomography import InputEnsemble, Pom, TomographyData

LOG_CLAMP = 1e-12  # eigenvalue floor under logarithms
ASCENT_SLACK = 1e-12  # tolerated information decrease per accepted step


@dataclass(frozen=True)
class MlmeConfig:
    """Iteration knobs: entropy weight, step size, stopping criteria.

    The step size self-tunes when ``step_growth > 1``: each accepted update
    multiplies eps by ``step_growth`` (capped at ``step_max``), and each
    rejected trial halves it.  The fixed points of the update map do not
    depend on eps, so adaptation only affects the convergence rate.
    """

    lam: float = 1e-3
    step: float = 0.1
    max_iters: int = 20000
    residual_tol: float = 1e-7
    backtrack: bool = True
    backtrack_shrink: float = 0.5
    max_halvings: int = 30
    step_growth: float = 1.3
    step_max: float = 100.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"MlmeConfig: lam must be >= 0, got {self.lam}")
        if self.step <= 0:
            raise ValueError(f"MlmeConfig: step must be > 0, got {self.step}")
        if self.residual_tol <= 0:
            raise ValueError(f"MlmeConfig: residual_tol must be > 0, got {self.residual_tol}")
        if not 0 < self.backtrack_shrink < 1:
            raise ValueError("MlmeConfig: backtrack_shrink must lie in (0, 1)")
        if self.step_growth < 1:
            raise ValueError("MlmeConfig: step_growth must be >= 1")


@dataclass(frozen=True)
class SolverReport:
    """Converged estimator plus iteration diagnostics."""

    estimator: ChoiOperator
    iterations: int
    final_residual: float
    final_information: float
    converged: bool

    def to_jsonable(self) -> dict:
        return {
            "estimator": self.estimator.to_jsonable(),
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "final_information": self.final_information,
            "converged": self.converged,
        }


def _kron_eye(h: np.ndarray, d: int) -> np.ndarray:
    """h (x) 1_d without generic-kron overhead."""
    di = h.shape[0]
    out = np.zeros((di, d, di, d), dtype=complex)
    ar = np.arange(d)
    out[:, ar, :, ar] = h[None, :, :]
    return out.reshape(di * d, di * d)


def _sandwich_left_factor(a: np.ndarray, x: np.ndarray, d_out: int) -> np.ndarray:
    """(a (x) 1) x (a (x) 1) for an operator a on the H factor."""
    di = a.shape[0]
    x4 = x.reshape(di, d_out, di, d_out)
    y = np.tensordot(a, x4, axes=(1, 0))
    z = np.tensordot(y, a, axes=([2], [0]))  # (j, a, b, q)
    return z.transpose(0, 1, 3, 2).reshape(di * d_out, di * d_out)


class _Workspace:
    """Precomputed arrays for one estimation problem (fixed data/inputs/POM)."""

    def __init__(self, data: TomographyData, inputs: InputEnsemble, pom: Pom, lam: float):
        self.d_in = inputs.dim
        self.d_out = pom.dim
        self.dim = self.d_in * self.d_out
        self.lam = float(lam)
        self.n_l = data.n_inputs
        if self.n_l:
            states = np.array([inputs.states[i] for i in data.inputs_used], dtype=complex)
        else:
            states = np.zeros((0, self.d_in, self.d_in), dtype=complex)
        self.states_vec = states.reshape(self.n_l, self.d_in**2)
        self.statesT_vec = states.transpose(0, 2, 1).reshape(self.n_l, self.d_in**2)
        pis = pom.effective_outcomes()
        self.pis_vec = pis.reshape(len(pom), -1)
        self.pisT_vec = pis.transpose(0, 2, 1).reshape(len(pom), -1)
        self.pis = pis
        self.f = data.frequencies() if self.n_l else np.zeros((0, len(pom)))
        self.mask = self.f > 0
        self.perfect = pom.perfect_detection
        # W0 numerator factorizes: (sum_l rho_l^T) (x) G
        sum_rho_t = states.transpose(0, 2, 1).sum(axis=0) if self.n_l else np.zeros((self.d_in, self.d_in))
        self.w0_numerator = np.kron(sum_rho_t, pom.g_operator())

    # -- per-iterate quantities ------------------------------------------------

    def probs(self, e_mat: np.ndarray) -> np.ndarray:
        if self.n_l == 0:
            return np.zeros((0, self.pis_vec.shape[0]))
        e_out_in = (
            e_mat.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
            .transpose(1, 3, 0, 2)
            .reshape(self.d_out**2, self.d_in**2)
        )
        t = self.states_vec @ e_out_in.T
        return np.clip((t @ self.pisT_vec.T).real / self.n_l, 0.0, None)

    def spectrum(self, e_mat: np.ndarray):
        """Ascending eigendecomposition, shared by entropy and gradient terms."""
        if self.lam == 0:
            return None
        return np.linalg.eigh(e_mat)

    def loglik(self, p: np.ndarray) -> float:
        """Normalized log-likelihood sum f log p (0 log 0 = 0, -inf if impossible)."""
        fm = self.f[self.mask]
        pm = p[self.mask]
        if fm.size == 0:
            return 0.0
        if np.any(pm <= 0):
            return -np.inf
        return float(np.sum(fm * np.log(pm)))

    def entropy_from(self, spec) -> float:
        x = np.maximum(spec[0] / self.d_in, LOG_CLAMP)
        return float(-np.sum(x * np.log(x)))

    def entropy(self, e_mat: np.ndarray) -> float:
        return self.entropy_from(np.linalg.eigh(e_mat))

    def information(self, e_mat: np.ndarray, p: np.ndarray, spec=None) -> float:
        val = self.loglik(p)
        if self.lam > 0:
            val += self.lam * self.entropy_from(spec if spec is not None else np.linalg.eigh(e_mat))
        return val

    def objective(self, e_mat: np.ndarray, p: np.ndarray, spec=None) -> float:
        """Ascent objective: equals I except for the inefficiency renormalization."""
        val = self.information(e_mat, p, spec)
        if not self.perfect and np.isfinite(val):
            val -= float(np.log(max(p.sum(), 1e-300)))
        return val

    def _assemble(self, c: np.ndarray) -> np.ndarray:
        """sum_lm c_lm rho_l^T (x) Pi_m as a dim x dim matrix."""
        c_flat = c @ self.pis_vec
        w4 = self.statesT_vec.T @ c_flat
        return (
            w4.reshape(self.d_in, self.d_in, self.d_out, self.d_out)
            .transpose(0, 2, 1, 3)
            .reshape(self.dim, self.dim)
        )

    def w_matrix(self, e_mat: np.ndarray, p: np.ndarray, spec=None) -> np.ndarray:
        """Gradient operator W (data term + entropy term), without W0."""
        if self.n_l and np.any(p[self.mask] <= 0):
            raise ValueError(
                "w_operator: vanishing probability at an observed outcome; "
                "the estimator is incompatible with the data"
            )
        w = np.zeros((self.dim, self.dim), dtype=complex)
        if self.n_l:
            c = np.where(self.mask, self.f / np.where(p > 0, p, 1.0), 0.0)
            w = self._assemble(c) / self.n_l
        if self.lam > 0:
            vals, vecs = spec if spec is not None else np.linalg.eigh(e_mat)
            logx = np.log(np.maximum(vals / self.d_in, LOG_CLAMP))
            log_e = (vecs * logx) @ vecs.conj().T
            w -= (self.lam / self.d_in) * (np.eye(self.dim) + log_e)
        return hermitianize(w)

    def w0_matrix(self, p: np.ndarray) -> np.ndarray:
        """Escape-correction W0 = sum_l rho_l^T (x) G / (L sum_l' p'_l')."""
        return self.w0_numerator / (self.n_l * max(p.sum(), 1e-300))

    def w_effective(self, e_mat: np.ndarray, p: np.ndarray, spec=None) -> np.ndarray:
        w = self.w_matrix(e_mat, p, spec)
        if not self.perfect:
            w = w - self.w0_matrix(p)
        return w

    def _trace_out_k(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("jaka->jk", x.reshape(self.d_in, self.d_out, self.d_in, self.d_out))

    def step_direction(self, e_mat: np.ndarray, w: np.ndarray) -> np.ndarray:
        """dA / (eps/2): the trace-preservation-projected gradient direction."""
        a = self._trace_out_k(w @ e_mat)
        return w - _kron_eye(hermitianize(a), self.d_out)

    def congruence(self, e_mat: np.ndarray, delta_a: np.ndarray) -> np.ndarray:
        m = np.eye(self.dim) + delta_a
        et = hermitianize(m @ e_mat @ m)
        n2 = self._trace_out_k(et)
        vals, vecs = np.linalg.eigh(hermitianize(n2))
        if vals[0] <= 0 or vals[0] < 1e-12 * vals[-1]:
            raise np.linalg.LinAlgError(
                f"congruence: normalizer partial trace is numerically singular "
                f"(eigenvalues {vals[0]:.3e} .. {vals[-1]:.3e}); the iterate is degenerate"
            )
        n_inv = (vecs / np.sqrt(vals)) @ vecs.conj().T
        return hermitianize(_sandwich_left_factor(n_inv, et, self.d_out))

    def residual(self, e_mat: np.ndarray, w: np.ndarray) -> float:
        # Identity shifts of W do not move the optimum (the update projects them
        # out), but the sqrt in the extremal equation needs a positive
        # constraint multiplier.  When the W0 subtraction drives the multiplier
        # h = tr_K{WE} indefinite, shift W up just enough; at perfect detection
        # the shift is zero and this is the plain extremal-equation defect.
        h = hermitianize(self._trace_out_k(w @ e_mat))
        low = float(np.linalg.eigvalsh(h)[0])
        if low < 0:
            w = w - 2.0 * low * np.eye(self.dim)
        wew = hermitianize(w @ e_mat @ w)
        denom = float(np.linalg.norm(wew))
        if denom < 1e-300:
            return 0.0
        lam2 = self._trace_out_k(wew)
        vals, vecs = np.linalg.eigh(hermitianize(lam2))
        lam_sqrt = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
        lel = _sandwich_left_factor(lam_sqrt, e_mat, self.d_out)
        return float(np.linalg.norm(lel - wew)) / denom


def _check_dims(e: ChoiOperator, inputs: InputEnsemble, pom: Pom):
    if e.d_in != inputs.dim or e.d_out != pom.dim:
        raise ValueError(
            f"dimension mismatch: channel ({e.d_in}, {e.d_out}) vs "
            f"inputs dim {inputs.dim}, POM dim {pom.dim}"
        )


def log_likelihood(e: ChoiOperator, data: TomographyData, inputs: InputEnsemble, pom: Pom) -> float:
    """sum_lm n_lm log p_lm; zero-count terms contribute 0, impossible events give -inf.

    For noiseless data the per-copy limit sum_lm nu_lm log p_lm is returned.
    """
    _check_dims(e, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=0.0)
    p = ws.probs(e.matrix)
    counts = data.counts
    mask = counts > 0
    if not mask.any():
        return 0.0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(np.sum(counts[mask] * np.log(p[mask])))


def information(
    e: ChoiOperator, data: TomographyData, inputs: InputEnsemble, pom: Pom, lam: float
) -> float:
    """I(lambda; E) = lambda S(E) + sum f_lm log p_lm."""
    _check_dims(e, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=lam)
    return ws.information(e.matrix, ws.probs(e.matrix))


def w_operator(
    e: ChoiOperator, data: TomographyData, inputs: InputEnsemble, pom: Pom, lam: float
) -> np.ndarray:
    """The gradient operator W of I(lambda; E) at E."""
    _check_dims(e, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=lam)
    return ws.w_matrix(e.matrix, ws.probs(e.matrix))


def w0_correction(e: ChoiOperator, inputs: InputEnsemble, pom: Pom, data: TomographyData) -> np.ndarray:
    """Inefficient-detection correction W0 (the solver iterates with W - W0).

    Depends on the current estimator through the detected-fraction
    normalization sum_l' p'_l'.
    """
    _check_dims(e, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=0.0)
    return ws.w0_matrix(ws.probs(e.matrix))


def extremal_residual(
    e: ChoiOperator, data: TomographyData, inputs: InputEnsemble, pom: Pom, lam: float
) -> float:
    """Normalized extremal-equation defect; zero exactly at the optimum."""
    _check_dims(e, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=lam)
    p = ws.probs(e.matrix)
    return ws.residual(e.matrix, ws.w_effective(e.matrix, p))


def mlme_step(
    e: ChoiOperator, data: TomographyData, inputs: InputEnsemble, pom: Pom, cfg: MlmeConfig
) -> ChoiOperator:
    """One steepest-ascent congruence update (with backtracking if enabled)."""
    _check_dims(e, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=cfg.lam)
    e_new, *_ = _advance(ws, e.matrix, cfg)
    return ChoiOperator(matrix=hermitianize(e_new), d_in=e.d_in, d_out=e.d_out)


def _advance(ws: _Workspace, e_mat: np.ndarray, cfg: MlmeConfig, p=None, spec=None, w=None, eps=None):
    """One accepted update; returns (e', p', spec', objective', accepted, next_eps)."""
    if p is None:
        p = ws.probs(e_mat)
    if spec is None:
        spec = ws.spectrum(e_mat)
    if w is None:
        w = ws.w_effective(e_mat, p, spec)
    direction = ws.step_direction(e_mat, w)
    obj = ws.objective(e_mat, p, spec)
    if eps is None:
        eps = cfg.step
    tries = cfg.max_halvings if cfg.backtrack else 0
    best = None
    for _ in range(tries + 1):
        e_try = ws.congruence(e_mat, (eps / 2.0) * direction)
        p_try = ws.probs(e_try)
        spec_try = ws.spectrum(e_try)
        obj_try = ws.objective(e_try, p_try, spec_try)
        best = (e_try, p_try, spec_try, obj_try)
        if not cfg.backtrack or obj_try >= obj:
            return (*best, True, min(eps * cfg.step_growth, cfg.step_max))
        eps *= cfg.backtrack_shrink
    if best[3] >= obj - ASCENT_SLACK:
        return (*best, True, eps)
    return e_mat, p, spec, obj, False, eps


RESIDUAL_CHECK_EVERY = 8  # iterations between extremal-equation evaluations


def mlme_solve(
    data: TomographyData,
    inputs: InputEnsemble,
    pom: Pom,
    cfg: MlmeConfig | None = None,
    e0: ChoiOperator | None = None,
) -> SolverReport:
    """Iterate to the MLME estimator from e0 (default: maximally mixed Choi)."""
    cfg = cfg or MlmeConfig()
    d_in, d_out = inputs.dim, pom.dim
    if e0 is None:
        e0 = maximally_mixed_choi(d_in, d_out)
    _check_dims(e0, inputs, pom)
    ws = _Workspace(data, inputs, pom, lam=cfg.lam)
    e_mat = e0.matrix
    p = ws.probs(e_mat)
    spec = ws.spectrum(e_mat)
    residual = np.inf
    converged = False
    iterations = 0
    eps = cfg.step
    while iterations < cfg.max_iters:
        w = ws.w_effective(e_mat, p, spec)
        if iterations % RESIDUAL_CHECK_EVERY == 0:
            residual = ws.residual(e_mat, w)
            if residual < cfg.residual_tol:
                converged = True
                break
        e_mat, p, spec, _, accepted, eps = _advance(ws, e_mat, cfg, p=p, spec=spec, w=w, eps=eps)
        if not accepted:
            break
        iterations += 1
    if not converged:
        residual = ws.residual(e_mat, ws.w_effective(e_mat, p, spec))
        converged = residual < cfg.residual_tol
    final_info = ws.information(e_mat, p, spec)
    estimator = ChoiOperator(matrix=hermitianize(e_mat), d_in=d_in, d_out=d_out)
    return SolverReport(
        estimator=estimator,
        iterations=iterations,
        final_residual=float(residual),
        final_information=float(final_info),
        converged=bool(converged),
    )
