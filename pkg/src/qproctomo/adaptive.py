"""Adaptive input-state selection for incomplete process tomography.

Three schemes are provided:

* non-adaptive: measure a fixed candidate set in a fixed order;
* adaptive over a fixed set: after each measurement, synthesize the next
  round's frequencies from a prior channel guess for every unused
  candidate, solve for the projected estimator, and pick the candidate
  whose projected estimator moves farthest from the current one;
* adaptive over the whole state space: jointly optimize the next input
  state and a channel operator by maximizing the projected log-likelihood
  (equivalently, minimizing a cross entropy), from many random starts.

The prior enters selection only; every reported estimator is recomputed
from measured data alone, so rerunning the estimation on a trajectory's
stored data reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channels import ChoiOperator, maximally_mixed_choi
from .linalg import hermitianize, random_pure_state
from .metrics import loglik_max, plateau_from_data, state_trace_distance, trace_distance
from .mlme import MlmeConfig, mlme_solve
from .seeding import child_seed
from .tomography import (
    InputEnsemble,
    Pom,
    TomographyData,
    probabilities_for_states,
    simulate_input,
)


class RepetitionExhausted(RuntimeError):
    """All candidate states from the current selection round repeat used inputs."""


@dataclass(frozen=True)
class StrategyConfig:
    """Scheme selection and its knobs.

    ``hybrid_switch`` is the number of leading inputs chosen by the
    state-space search before falling back to the fixed candidate set;
    ``hybrid_switch="auto"`` switches when at least half of the search
    starts land on already-used states.
    """

    scheme: str = "non_adaptive"
    figure_of_merit: str = "maximize_step_distance"  # or "minimize_prior_distance"
    mpl_starts: int = 20
    repetition_tol: float = 1e-3
    hybrid_switch: int | str = 4
    stop_threshold: float = 0.0  # early stop when successive estimators move less than this
    max_steps: int | None = None

    def __post_init__(self):
        if self.scheme not in ("non_adaptive", "adaptive_fixed", "mpl", "hybrid"):
            raise ValueError(f"StrategyConfig: unknown scheme {self.scheme!r}")
        if self.figure_of_merit not in ("maximize_step_distance", "minimize_prior_distance"):
            raise ValueError(f"StrategyConfig: unknown figure of merit {self.figure_of_merit!r}")
        if self.mpl_starts < 1:
            raise ValueError("StrategyConfig: mpl_starts must be >= 1")
        if self.repetition_tol <= 0:
            raise ValueError("StrategyConfig: repetition_tol must be > 0")
        if isinstance(self.hybrid_switch, str) and self.hybrid_switch != "auto":
            raise ValueError("StrategyConfig: hybrid_switch is an index or 'auto'")


@dataclass(frozen=True)
class MplConfig:
    """Joint channel/state ascent knobs (steps eps1 for E, eps2 for rho)."""

    step_e: float = 0.1
    step_rho: float = 0.1
    max_iters: int = 5000
    residual_tol: float = 1e-5
    max_halvings: int = 30
    step_growth: float = 1.3
    step_max: float = 100.0

    def __post_init__(self):
        if self.step_e <= 0 or self.step_rho <= 0:
            raise ValueError("MplConfig: step sizes must be > 0")
        if self.residual_tol <= 0:
            raise ValueError("MplConfig: residual_tol must be > 0")


@dataclass(frozen=True)
class TrajectoryStep:
    """State of the experiment after measuring the l-th input."""

    step: int  # number of inputs used so far (l)
    input_index: int  # index into the trajectory's ensemble
    input_label: str
    estimator: ChoiOperator
    distance_to_true: float
    loglik_max: float | None = None
    delta: float | None = None


@dataclass
class Trajectory:
    """Full record of one simulated tomography run."""

    scheme: str
    seed: int
    ensemble: InputEnsemble | None
    data: TomographyData
    steps: list[TrajectoryStep] = field(default_factory=list)
    stopped_early: bool = False
    stop_reason: str = ""

    def prefix_data(self, n_steps: int) -> TomographyData:
        """The accumulated data after the first ``n_steps`` inputs."""
        return TomographyData(
            counts=self.data.counts[:n_steps],
            copies_per_input=self.data.copies_per_input,
            inputs_used=self.data.inputs_used[:n_steps],
        )


def projected_log_likelihood(
    e: ChoiOperator,
    rho: np.ndarray,
    data: TomographyData,
    e_prior: ChoiOperator,
    inputs: InputEnsemble,
    pom: Pom,
) -> float:
    """Projected log-likelihood of appending ``rho`` as the (L+1)-th input.

    Measured per-input frequencies nu_lm are combined with prior-synthesized
    frequencies nu~_m for rho; all probabilities carry the 1/(L+1) weight.
    Equals minus the cross entropy between data-plus-prior knowledge and the
    model channel.
    """
    pis = pom.effective_outcomes()
    n_l = data.n_inputs
    nu = data.per_input_frequencies()
    states = np.array([inputs.states[i] for i in data.inputs_used]).reshape(
        n_l, inputs.dim, inputs.dim
    )
    p_lm = probabilities_for_states(e, states, pis) * n_l / (n_l + 1)
    nu_t = probabilities_for_states(e_prior, np.asarray([rho]), pis)[0]
    p_m = probabilities_for_states(e, np.asarray([rho]), pis)[0] / (n_l + 1)
    total = 0.0
    mask = nu > 0
    if mask.any():
        if np.any(p_lm[mask] <= 0):
            return -np.inf
        total += float(np.sum(nu[mask] * np.log(p_lm[mask]))) / (n_l + 1)
    mask_m = nu_t > 0
    if mask_m.any():
        if np.any(p_m[mask_m] <= 0):
            return -np.inf
        total += float(np.sum(nu_t[mask_m] * np.log(p_m[mask_m]))) / (n_l + 1)
    return total


class _MplWorkspace:
    """Joint ascent state for the projected log-likelihood functional."""

    def __init__(
        self,
        data: TomographyData,
        e_prior: ChoiOperator,
        inputs: InputEnsemble,
        pom: Pom,
    ):
        self.d_in = inputs.dim
        self.d_out = pom.dim
        self.dim = self.d_in * self.d_out
        self.n_l = data.n_inputs
        self.pis = pom.effective_outcomes()
        m = len(pom)
        self.pis_vec = self.pis.reshape(m, -1)
        self.pisT_vec = self.pis.transpose(0, 2, 1).reshape(m, -1)
        states = np.array([inputs.states[i] for i in data.inputs_used]).reshape(
            self.n_l, self.d_in, self.d_in
        )
        self.states_vec = states.reshape(self.n_l, -1)
        self.statesT_vec = states.transpose(0, 2, 1).reshape(self.n_l, -1)
        self.nu = data.per_input_frequencies()
        self.nu_mask = self.nu > 0
        self.e_prior = e_prior.matrix
        # prior response maps: tr_K{E_prior (1 (x) Pi_m)}^T per outcome
        ep4 = self.e_prior.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        self.prior_maps_t = np.einsum("jakb,mba->mkj", ep4, self.pis)
        self.eye_dim = np.eye(self.dim)
        self.eye_in = np.eye(self.d_in)

    # -- probabilities and frequencies ---------------------------------------

    def fixed_probs(self, e_mat: np.ndarray) -> np.ndarray:
        """tilde p_lm = tr{E (rho_l^T (x) Pi_m)} / (L+1) over measured inputs."""
        if self.n_l == 0:
            return np.zeros((0, len(self.pis)))
        e_out_in = (
            e_mat.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
            .transpose(1, 3, 0, 2)
            .reshape(self.d_out**2, self.d_in**2)
        )
        t = self.states_vec @ e_out_in.T
        return np.clip((t @ self.pisT_vec.T).real, 0.0, None) / (self.n_l + 1)

    def rho_probs(self, e_mat: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """tilde p_m = tr{E (rho^T (x) Pi_m)} / (L+1)."""
        e_out_in = (
            e_mat.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
            .transpose(1, 3, 0, 2)
            .reshape(self.d_out**2, self.d_in**2)
        )
        t = e_out_in @ rho.reshape(-1)
        return np.clip((self.pisT_vec @ t).real, 0.0, None) / (self.n_l + 1)

    def prior_freqs(self, rho: np.ndarray) -> np.ndarray:
        """nu~_m = tr{E_prior (rho^T (x) Pi_m)} (synthesized for the candidate)."""
        # tr{E_prior (rho^T (x) Pi_m)} = tr{rho tr_K{E_prior (1 (x) Pi_m)}^T}
        vals = np.einsum("mkj,jk->m", self.prior_maps_t, rho)
        return np.clip(vals.real, 0.0, None)

    def objective(self, e_mat, rho, p_lm=None, nu_t=None, p_m=None) -> float:
        if p_lm is None:
            p_lm = self.fixed_probs(e_mat)
        if nu_t is None:
            nu_t = self.prior_freqs(rho)
        if p_m is None:
            p_m = self.rho_probs(e_mat, rho)
        scale = self.n_l + 1
        total = 0.0
        if self.nu_mask.any():
            pm = p_lm[self.nu_mask]
            if np.any(pm <= 0):
                return -np.inf
            total += float(np.sum(self.nu[self.nu_mask] * np.log(pm))) / scale
        mask = nu_t > 0
        if mask.any():
            if np.any(p_m[mask] <= 0):
                return -np.inf
            total += float(np.sum(nu_t[mask] * np.log(p_m[mask]))) / scale
        return total

    # -- gradient operators ----------------------------------------------------

    def x_matrix(self, rho, p_lm, nu_t, p_m) -> np.ndarray:
        """Channel gradient X of the projected log-likelihood."""
        scale = (self.n_l + 1) ** 2
        x = np.zeros((self.dim, self.dim), dtype=complex)
        if self.n_l:
            c = np.where(self.nu_mask, self.nu / np.where(p_lm > 0, p_lm, 1.0), 0.0)
            c_flat = c @ self.pis_vec
            w4 = self.statesT_vec.T @ c_flat
            x = (
                w4.reshape(self.d_in, self.d_in, self.d_out, self.d_out)
                .transpose(0, 2, 1, 3)
                .reshape(self.dim, self.dim)
            )
        cm = np.where(nu_t > 0, nu_t / np.where(p_m > 0, p_m, 1.0), 0.0)
        extra = np.kron(rho.T, (cm @ self.pis_vec).reshape(self.d_out, self.d_out))
        return hermitianize((x + extra) / scale)

    def y_matrix(self, e_mat, nu_t, p_m) -> np.ndarray:
        """State gradient Y of the projected log-likelihood."""
        scale = self.n_l + 1
        logp = np.log(np.maximum(p_m, 1e-300))
        y = np.tensordot(logp / scale, self.prior_maps_t, axes=(0, 0))
        e4 = e_mat.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        e_in_out = e4.transpose(0, 2, 1, 3).reshape(self.d_in**2, self.d_out**2)
        beta = np.where(p_m > 0, nu_t / p_m, 0.0) / scale**2
        q = (e_in_out @ (beta @ self.pisT_vec)).reshape(self.d_in, self.d_in).T
        return hermitianize(y + q)

    # -- updates ----------------------------------------------------------------

    def e_congruence(self, e_mat: np.ndarray, x: np.ndarray, eps: float) -> np.ndarray:
        a = np.einsum(
            "jaka->jk", (x @ e_mat).reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        )
        direction = x - _kron_eye_out(hermitianize(a), self.d_out)
        m = self.eye_dim + (eps / 2.0) * direction
        et = hermitianize(m @ e_mat @ m)
        n2 = np.einsum("jaka->jk", et.reshape(self.d_in, self.d_out, self.d_in, self.d_out))
        vals, vecs = np.linalg.eigh(hermitianize(n2))
        if vals[0] <= 0 or vals[0] < 1e-12 * vals[-1]:
            raise np.linalg.LinAlgError("MPL congruence: singular normalizer")
        n_inv = (vecs / np.sqrt(vals)) @ vecs.conj().T
        y = np.tensordot(n_inv, et.reshape(self.d_in, self.d_out, self.dim), axes=(1, 0))
        y = y.reshape(self.dim, self.d_in, self.d_out)
        z = np.tensordot(y, n_inv, axes=([1], [0]))  # (dim, d_out, d_in)
        return hermitianize(z.transpose(0, 2, 1).reshape(self.dim, self.dim))

    def rho_update(self, rho: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
        xi = y - float(np.trace(y @ rho).real) * self.eye_in
        m = self.eye_in + eps * xi
        new = m @ rho @ m
        tr = float(np.trace(new).real)
        if tr <= 0:
            raise np.linalg.LinAlgError("MPL rho update: non-positive trace")
        return hermitianize(new / tr)

    # -- extremal residuals ------------------------------------------------------

    def e_residual(self, e_mat: np.ndarray, x: np.ndarray) -> float:
        xex = hermitianize(x @ e_mat @ x)
        denom = float(np.linalg.norm(xex))
        if denom < 1e-300:
            return 0.0
        lam2 = np.einsum("jaka->jk", xex.reshape(self.d_in, self.d_out, self.d_in, self.d_out))
        vals, vecs = np.linalg.eigh(hermitianize(lam2))
        lam_sqrt = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
        lam_op = _kron_eye_out(lam_sqrt, self.d_out)
        return float(np.linalg.norm(lam_op @ e_mat @ lam_op - xex)) / denom

    def rho_residual(self, rho: np.ndarray, y: np.ndarray) -> float:
        yr = y @ rho
        denom = float(np.linalg.norm(yr))
        if denom < 1e-300:
            return 0.0
        return float(np.linalg.norm(yr - float(np.trace(yr).real) * rho)) / denom


def _kron_eye_out(h: np.ndarray, d_out: int) -> np.ndarray:
    di = h.shape[0]
    out = np.zeros((di, d_out, di, d_out), dtype=complex)
    ar = np.arange(d_out)
    out[:, ar, :, ar] = h[None, :, :]
    return out.reshape(di * d_out, di * d_out)


@dataclass(frozen=True)
class MplResult:
    rho_hat: np.ndarray
    e_hat: ChoiOperator
    objective: float
    iterations: int
    residual_e: float
    residual_rho: float
    converged: bool


def mpl_solve(
    data: TomographyData,
    e_prior: ChoiOperator,
    inputs: InputEnsemble,
    pom: Pom,
    cfg: MplConfig | None = None,
    seed=0,
    rho0: np.ndarray | None = None,
    e0: ChoiOperator | None = None,
) -> MplResult:
    """Alternating steepest ascent of the projected log-likelihood in (E, rho)."""
    cfg = cfg or MplConfig()
    ws = _MplWorkspace(data, e_prior, inputs, pom)
    rng = np.random.default_rng(seed)
    rho = rho0 if rho0 is not None else random_pure_state(ws.d_in, rng)
    e_mat = (e0 or maximally_mixed_choi(ws.d_in, ws.d_out)).matrix
    eps_e, eps_rho = cfg.step_e, cfg.step_rho
    p_lm = ws.fixed_probs(e_mat)
    nu_t = ws.prior_freqs(rho)
    p_m = ws.rho_probs(e_mat, rho)
    obj = ws.objective(e_mat, rho, p_lm, nu_t, p_m)
    res_e = res_rho = np.inf
    converged = False
    it = 0
    while it < cfg.max_iters:
        x = ws.x_matrix(rho, p_lm, nu_t, p_m)
        y = ws.y_matrix(e_mat, nu_t, p_m)
        if it % 4 == 0:
            res_e = ws.e_residual(e_mat, x)
            res_rho = ws.rho_residual(rho, y)
            if res_e < cfg.residual_tol and res_rho < cfg.residual_tol:
                converged = True
                break
        # channel half-step
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            e_try = ws.e_congruence(e_mat, x, eps_e)
            p_lm_try = ws.fixed_probs(e_try)
            p_m_try = ws.rho_probs(e_try, rho)
            obj_try = ws.objective(e_try, rho, p_lm_try, nu_t, p_m_try)
            if obj_try >= obj - 1e-12:
                e_mat, p_lm, p_m, obj = e_try, p_lm_try, p_m_try, obj_try
                eps_e = min(eps_e * cfg.step_growth, cfg.step_max)
                accepted = True
                break
            eps_e *= 0.5
        if not accepted:
            break
        # state half-step
        accepted = False
        for _ in range(cfg.max_halvings + 1):
            rho_try = ws.rho_update(rho, y, eps_rho)
            nu_t_try = ws.prior_freqs(rho_try)
            p_m_try = ws.rho_probs(e_mat, rho_try)
            obj_try = ws.objective(e_mat, rho_try, p_lm, nu_t_try, p_m_try)
            if obj_try >= obj - 1e-12:
                rho, nu_t, p_m, obj = rho_try, nu_t_try, p_m_try, obj_try
                eps_rho = min(eps_rho * cfg.step_growth, cfg.step_max)
                accepted = True
                break
            eps_rho *= 0.5
        if not accepted:
            break
        it += 1
    if not converged:
        x = ws.x_matrix(rho, p_lm, nu_t, p_m)
        y = ws.y_matrix(e_mat, nu_t, p_m)
        res_e = ws.e_residual(e_mat, x)
        res_rho = ws.rho_residual(rho, y)
        converged = res_e < cfg.residual_tol and res_rho < cfg.residual_tol
    e_hat = ChoiOperator(matrix=hermitianize(e_mat), d_in=ws.d_in, d_out=ws.d_out)
    return MplResult(
        rho_hat=hermitianize(rho),
        e_hat=e_hat,
        objective=float(obj),
        iterations=it,
        residual_e=float(res_e),
        residual_rho=float(res_rho),
        converged=bool(converged),
    )


def mpl_next_input(
    data: TomographyData,
    e_prior: ChoiOperator,
    e_current: ChoiOperator,
    used_states: list[np.ndarray],
    inputs: InputEnsemble,
    pom: Pom,
    cfg: StrategyConfig,
    mpl_cfg: MplConfig,
    seed,
) -> tuple[np.ndarray, MplResult]:
    """Select the next input state from ``cfg.mpl_starts`` random-start searches.

    Solutions repeating an already-used state (within the repetition
    tolerance, in state trace distance) are discarded; among the rest the
    figure of merit decides.  Raises :class:`RepetitionExhausted` when
    every converged solution repeats.
    """
    candidates: list[MplResult] = []
    n_repeats = 0
    for start in range(cfg.mpl_starts):
        result = mpl_solve(
            data, e_prior, inputs, pom, cfg=mpl_cfg,
            seed=child_seed(seed, start),
        )
        if not result.converged:
            continue
        if any(state_trace_distance(result.rho_hat, u) < cfg.repetition_tol for u in used_states):
            n_repeats += 1
            continue
        candidates.append(result)
    if not candidates:
        raise RepetitionExhausted(
            f"all {cfg.mpl_starts} starts repeated a used input or failed "
            f"({n_repeats} repetitions)"
        )
    if cfg.figure_of_merit == "maximize_step_distance":
        best = max(candidates, key=lambda r: trace_distance(r.e_hat, e_current))
    else:
        best = min(candidates, key=lambda r: trace_distance(r.e_hat, e_prior))
    return best.rho_hat, best


def _mpl_candidates(
    data: TomographyData,
    e_prior: ChoiOperator,
    used_states: list[np.ndarray],
    inputs: InputEnsemble,
    pom: Pom,
    cfg: StrategyConfig,
    mpl_cfg: MplConfig,
    seed,
) -> tuple[list[MplResult], float]:
    """Run the multi-start search; returns surviving results and the repetition rate."""
    survivors: list[MplResult] = []
    repeats = 0
    converged = 0
    for start in range(cfg.mpl_starts):
        result = mpl_solve(
            data, e_prior, inputs, pom, cfg=mpl_cfg,
            seed=child_seed(seed, start),
        )
        if not result.converged:
            continue
        converged += 1
        if any(state_trace_distance(result.rho_hat, u) < cfg.repetition_tol for u in used_states):
            repeats += 1
            continue
        survivors.append(result)
    rate = repeats / converged if converged else 1.0
    return survivors, rate


def mpl_next_input(
    data: TomographyData,
    e_prior: ChoiOperator,
    e_current: ChoiOperator,
    used_states: list[np.ndarray],
    inputs: InputEnsemble,
    pom: Pom,
    cfg: StrategyConfig,
    mpl_cfg: MplConfig,
    seed,
) -> tuple[np.ndarray, MplResult]:
    """Select the next input state from ``cfg.mpl_starts`` random-start searches.

    Solutions repeating an already-used state (within the repetition
    tolerance, in state trace distance) are discarded; among the rest the
    figure of merit decides.  Raises :class:`RepetitionExhausted` when
    every converged solution repeats.
    """
    survivors, rate = _mpl_candidates(
        data, e_prior, used_states, inputs, pom, cfg, mpl_cfg, seed
    )
    if not survivors:
        raise RepetitionExhausted(
            f"all {cfg.mpl_starts} search starts repeated a used input or failed "
            f"(repetition rate {rate:.2f})"
        )
    if cfg.figure_of_merit == "maximize_step_distance":
        best = max(survivors, key=lambda r: trace_distance(r.e_hat, e_current))
    else:
        best = min(survivors, key=lambda r: trace_distance(r.e_hat, e_prior))
    return best.rho_hat, best


# ---------------------------------------------------------------------------
# trajectory runners
# ---------------------------------------------------------------------------


def _seed_int(seed) -> int:
    return int(seed) if isinstance(seed, (int, np.integer)) else 0


def _measurement_seed(seed, step: int):
    return child_seed(seed, 1, step)


def _selection_seed(seed, step: int):
    return child_seed(seed, 2, step)


def _default_selection_cfg(mlme_cfg: MlmeConfig) -> MlmeConfig:
    # candidate-ranking solves only need enough accuracy to order merits
    return replace(
        mlme_cfg,
        residual_tol=max(mlme_cfg.residual_tol * 100, 1e-5),
        max_iters=min(mlme_cfg.max_iters, 3000),
    )


def _record_step(
    traj: Trajectory,
    e_true: ChoiOperator,
    inputs: InputEnsemble,
    pom: Pom,
    report,
    input_index: int,
    mlme_cfg: MlmeConfig,
    record_loglik: bool,
    delta_samples: int,
    seed,
):
    step = traj.data.n_inputs
    ll = None
    delta = None
    if delta_samples:
        plateau = plateau_from_data(
            traj.data, inputs, pom, delta_samples,
            child_seed(seed, 3, step), cfg=mlme_cfg,
        )
        delta = plateau.delta
        ll = plateau.loglik_max
    elif record_loglik:
        ll = loglik_max(traj.data, inputs, pom, cfg=mlme_cfg)
    traj.steps.append(
        TrajectoryStep(
            step=step,
            input_index=input_index,
            input_label=inputs.labels[input_index],
            estimator=report.estimator,
            distance_to_true=trace_distance(report.estimator, e_true),
            loglik_max=ll,
            delta=delta,
        )
    )


def run_non_adaptive(
    channel: ChoiOperator,
    ensemble: InputEnsemble,
    pom: Pom,
    n_copies: int | None,
    cfg: StrategyConfig | None = None,
    mlme_cfg: MlmeConfig | None = None,
    order=None,
    seed=0,
    record_loglik: bool = False,
    delta_samples: int = 0,
) -> Trajectory:
    """Measure a fixed input set in a fixed order, re-estimating after each input."""
    cfg = cfg or StrategyConfig(scheme="non_adaptive")
    mlme_cfg = mlme_cfg or MlmeConfig()
    if order is None:
        order = list(range(len(ensemble)))
    if sorted(order) != list(range(len(ensemble))):
        raise ValueError("run_non_adaptive: order must be a permutation of the ensemble")
    max_steps = cfg.max_steps or len(ensemble)
    traj = Trajectory(
        scheme="non_adaptive",
        seed=_seed_int(seed),
        ensemble=ensemble,
        data=TomographyData(
            counts=np.zeros((0, len(pom))), copies_per_input=n_copies, inputs_used=()
        ),
    )
    for step, idx in enumerate(order[:max_steps], start=1):
        row = simulate_input(channel, ensemble.states[idx], pom, n_copies,
                             _measurement_seed(seed, step))
        traj.data = traj.data.with_row(row, idx)
        report = mlme_solve(traj.data, ensemble, pom, mlme_cfg)
        _record_step(traj, channel, ensemble, pom, report, idx, mlme_cfg,
                     record_loglik, delta_samples, seed)
    return traj


def adaptive_next_fixed(
    candidates: InputEnsemble,
    used,
    data: TomographyData,
    e_prior: ChoiOperator,
    e_current: ChoiOperator,
    pom: Pom,
    cfg: StrategyConfig,
    mlme_cfg: MlmeConfig | None = None,
    selection_cfg: MlmeConfig | None = None,
) -> int:
    """Pick the next candidate index by ranking projected estimators.

    For every unused candidate the prior channel synthesizes one round of
    frequencies; the estimator of the so-extended data is compared to the
    current one (or to the prior, under the alternative merit).  Ties break
    toward the lowest candidate index.
    """
    mlme_cfg = mlme_cfg or MlmeConfig()
    selection_cfg = selection_cfg or _default_selection_cfg(mlme_cfg)
    used = set(used)
    unused = [k for k in range(len(candidates)) if k not in used]
    if not unused:
        raise ValueError("adaptive_next_fixed: no unused candidates")
    pis = pom.effective_outcomes()
    best_k = None
    best_merit = None
    maximize = cfg.figure_of_merit == "maximize_step_distance"
    for k in unused:
        nu = probabilities_for_states(e_prior, np.asarray([candidates.states[k]]), pis)[0]
        synth_row = nu if data.copies_per_input is None else nu * data.copies_per_input
        extended = data.with_row(synth_row, k)
        report = mlme_solve(extended, candidates, pom, selection_cfg, e0=e_current)
        if maximize:
            merit = trace_distance(report.estimator, e_current)
            better = best_merit is None or merit > best_merit
        else:
            merit = trace_distance(report.estimator, e_prior)
            better = best_merit is None or merit < best_merit
        if better:
            best_k, best_merit = k, merit
    return best_k


def run_adaptive_fixed(
    channel: ChoiOperator,
    candidates: InputEnsemble,
    pom: Pom,
    n_copies: int | None,
    e_prior: ChoiOperator,
    cfg: StrategyConfig | None = None,
    mlme_cfg: MlmeConfig | None = None,
    selection_cfg: MlmeConfig | None = None,
    seed=0,
    first_input: int | None = None,
    record_loglik: bool = False,
    delta_samples: int = 0,
) -> Trajectory:
    """Adaptive tomography over a fixed candidate set (prior used for selection only)."""
    cfg = cfg or StrategyConfig(scheme="adaptive_fixed")
    mlme_cfg = mlme_cfg or MlmeConfig()
    selection_cfg = selection_cfg or _default_selection_cfg(mlme_cfg)
    rng = np.random.default_rng(child_seed(seed, 0, 0))
    idx = int(rng.integers(len(candidates))) if first_input is None else int(first_input)
    max_steps = cfg.max_steps or len(candidates)
    traj = Trajectory(
        scheme="adaptive_fixed",
        seed=_seed_int(seed),
        ensemble=candidates,
        data=TomographyData(
            counts=np.zeros((0, len(pom))), copies_per_input=n_copies, inputs_used=()
        ),
    )
    prev_estimator = None
    for step in range(1, max_steps + 1):
        row = simulate_input(channel, candidates.states[idx], pom, n_copies,
                             _measurement_seed(seed, step))
        traj.data = traj.data.with_row(row, idx)
        report = mlme_solve(traj.data, candidates, pom, mlme_cfg)
        _record_step(traj, channel, candidates, pom, report, idx, mlme_cfg,
                     record_loglik, delta_samples, seed)
        if prev_estimator is not None and cfg.stop_threshold > 0:
            if trace_distance(report.estimator, prev_estimator) < cfg.stop_threshold:
                traj.stopped_early = True
                traj.stop_reason = "estimator movement below threshold"
                break
        prev_estimator = report.estimator
        used = set(traj.data.inputs_used)
        if len(used) >= len(candidates) or step >= max_steps:
            break
        idx = adaptive_next_fixed(
            candidates, used, traj.data, e_prior, report.estimator, pom,
            cfg, mlme_cfg, selection_cfg,
        )
    return traj


def run_mpl_mlme(
    channel: ChoiOperator,
    pom: Pom,
    n_copies: int | None,
    e_prior: ChoiOperator,
    cfg: StrategyConfig | None = None,
    mlme_cfg: MlmeConfig | None = None,
    mpl_cfg: MplConfig | None = None,
    seed=0,
    first_input: np.ndarray | None = None,
    record_loglik: bool = False,
    delta_samples: int = 0,
) -> Trajectory:
    """Adaptive tomography with input states searched over the whole state space."""
    cfg = cfg or StrategyConfig(scheme="mpl")
    mlme_cfg = mlme_cfg or MlmeConfig()
    mpl_cfg = mpl_cfg or MplConfig()
    d_in = channel.d_in
    rng = np.random.default_rng(child_seed(seed, 0, 0))
    state = random_pure_state(d_in, rng) if first_input is None else np.asarray(first_input)
    max_steps = cfg.max_steps or d_in * d_in
    states: list[np.ndarray] = []
    labels: list[str] = []
    traj = Trajectory(
        scheme="mpl",
        seed=_seed_int(seed),
        ensemble=None,  # filled below as states accumulate
        data=TomographyData(
            counts=np.zeros((0, len(pom))), copies_per_input=n_copies, inputs_used=()
        ),
    )
    for step in range(1, max_steps + 1):
        states.append(state)
        labels.append(f"mpl_{step - 1}")
        ensemble = InputEnsemble(states=tuple(states), labels=tuple(labels))
        traj.ensemble = ensemble
        idx = len(states) - 1
        row = simulate_input(channel, state, pom, n_copies, _measurement_seed(seed, step))
        traj.data = traj.data.with_row(row, idx)
        report = mlme_solve(traj.data, ensemble, pom, mlme_cfg)
        _record_step(traj, channel, ensemble, pom, report, idx, mlme_cfg,
                     record_loglik, delta_samples, seed)
        if step >= max_steps:
            break
        try:
            state, _ = mpl_next_input(
                traj.data, e_prior, report.estimator, states, ensemble, pom,
                cfg, mpl_cfg, _selection_seed(seed, step),
            )
        except RepetitionExhausted as exc:
            traj.stopped_early = True
            traj.stop_reason = str(exc)
            break
    return traj


def run_hybrid(
    channel: ChoiOperator,
    candidates: InputEnsemble,
    pom: Pom,
    n_copies: int | None,
    e_prior: ChoiOperator,
    cfg: StrategyConfig | None = None,
    mlme_cfg: MlmeConfig | None = None,
    mpl_cfg: MplConfig | None = None,
    selection_cfg: MlmeConfig | None = None,
    seed=0,
    first_input: int | np.ndarray | None = None,
    record_loglik: bool = False,
    delta_samples: int = 0,
) -> Trajectory:
    """State-space search for the leading inputs, then the fixed candidate set.

    ``cfg.hybrid_switch`` sets how many inputs the search phase supplies
    (including the first input); ``"auto"`` switches once at least half of
    the converged search starts repeat used states.  Candidates that match
    an already-used state within the repetition tolerance are excluded from
    the second phase.
    """
    cfg = cfg or StrategyConfig(scheme="hybrid")
    mlme_cfg = mlme_cfg or MlmeConfig()
    mpl_cfg = mpl_cfg or MplConfig()
    selection_cfg = selection_cfg or _default_selection_cfg(mlme_cfg)
    d_in = channel.d_in
    rng = np.random.default_rng(child_seed(seed, 0, 0))
    base_states = list(candidates.states)
    base_labels = list(candidates.labels)
    if first_input is None:
        first = int(rng.integers(len(candidates)))
        state = base_states[first]
        first_idx = first
    elif np.ndim(first_input) == 0:
        first_idx = int(first_input)
        state = base_states[first_idx]
    else:
        state = np.asarray(first_input)
        first_idx = None
    states = list(base_states)
    labels = list(base_labels)
    if first_idx is None:
        states.append(state)
        labels.append("hybrid_0")
        first_idx = len(states) - 1
    max_steps = cfg.max_steps or d_in * d_in
    traj = Trajectory(
        scheme="hybrid",
        seed=_seed_int(seed),
        ensemble=InputEnsemble(states=tuple(states), labels=tuple(labels)),
        data=TomographyData(
            counts=np.zeros((0, len(pom))), copies_per_input=n_copies, inputs_used=()
        ),
    )
    idx = first_idx
    switched = isinstance(cfg.hybrid_switch, int) and cfg.hybrid_switch <= 1
    for step in range(1, max_steps + 1):
        ensemble = InputEnsemble(states=tuple(states), labels=tuple(labels))
        traj.ensemble = ensemble
        row = simulate_input(channel, states[idx], pom, n_copies, _measurement_seed(seed, step))
        traj.data = traj.data.with_row(row, idx)
        report = mlme_solve(traj.data, ensemble, pom, mlme_cfg)
        _record_step(traj, channel, ensemble, pom, report, idx, mlme_cfg,
                     record_loglik, delta_samples, seed)
        if step >= max_steps:
            break
        used_states = [states[i] for i in traj.data.inputs_used]
        if not switched and isinstance(cfg.hybrid_switch, int) and step >= cfg.hybrid_switch:
            switched = True
        if not switched:
            try:
                survivors, rate = _mpl_candidates(
                    traj.data, e_prior, used_states, ensemble, pom, cfg, mpl_cfg,
                    _selection_seed(seed, step),
                )
                if cfg.hybrid_switch == "auto" and rate >= 0.5:
                    switched = True
                if not survivors:
                    raise RepetitionExhausted(f"repetition rate {rate:.2f}")
            except RepetitionExhausted:
                switched = True
                survivors = []
            if not switched and survivors:
                if cfg.figure_of_merit == "maximize_step_distance":
                    best = max(survivors, key=lambda r: trace_distance(r.e_hat, report.estimator))
                else:
                    best = min(survivors, key=lambda r: trace_distance(r.e_hat, e_prior))
                states.append(best.rho_hat)
                labels.append(f"hybrid_{step}")
                idx = len(states) - 1
                continue
        # fixed-candidate phase: exclude candidates matching any used state
        used_idx = set(traj.data.inputs_used)
        available = [
            k for k in range(len(base_states))
            if k not in used_idx
            and all(state_trace_distance(base_states[k], u) >= cfg.repetition_tol
                    for u in used_states)
        ]
        if not available:
            traj.stopped_early = True
            traj.stop_reason = "candidate set exhausted"
            break
        blocked = [k for k in range(len(base_states)) if k not in available]
        idx = adaptive_next_fixed(
            ensemble, set(traj.data.inputs_used) | set(blocked) | set(range(len(base_states), len(states))),
            traj.data, e_prior, report.estimator, pom, cfg, mlme_cfg, selection_cfg,
        )
    return traj
