import numpy as np
import pytest

from qproctomo.channels import (
    builtin_channel,
    choi_from_kraus,
    imperfect_cnot,
    maximally_mixed_choi,
    random_channel,
)
from qproctomo.linalg import hermitianize, partial_trace
from qproctomo.metrics import random_interior_choi, trace_distance
from qproctomo.mlme import (
    MlmeConfig,
    extremal_residual,
    information,
    log_likelihood,
    mlme_solve,
    mlme_step,
    w0_correction,
    w_operator,
)
from qproctomo.tomography import (
    InputEnsemble,
    Pom,
    TomographyData,
    probabilities,
    product_sic_pom,
    qubit_tetrahedron,
    sample_counts,
    sic_inputs,
    standard_product_inputs,
)

CFG = MlmeConfig(lam=1e-3, step=1.0, residual_tol=1e-7, max_iters=30000)


@pytest.fixture(scope="module")
def cnot_complete():
    e_true = builtin_channel("cnot")
    ens = sic_inputs(4)
    pom = product_sic_pom(2)
    data = sample_counts(probabilities(e_true, ens, pom), None, seed=0)
    return e_true, ens, pom, data


@pytest.fixture(scope="module")
def noisy_incomplete():
    e_true = choi_from_kraus(imperfect_cnot(0.1))
    ens = standard_product_inputs(2)
    pom = product_sic_pom(2)
    full = sample_counts(probabilities(e_true, ens, pom), 10000, seed=42)
    data = TomographyData(counts=full.counts[:5], copies_per_input=10000, inputs_used=tuple(range(5)))
    return e_true, ens, pom, data


# -- log-likelihood and information ---------------------------------------------


def test_loglik_plugin_identity(cnot_complete):
    e_true, ens, pom, data = cnot_complete
    # noiseless data at the true channel: sum nu log p equals the cross term exactly
    p = probabilities(e_true, ens, pom)
    expected = float(np.sum(data.counts[data.counts > 0] * np.log(p[data.counts > 0])))
    assert np.isclose(log_likelihood(e_true, data, ens, pom), expected)


def test_loglik_zero_counts():
    ens, pom = qubit_tetrahedron()
    data = TomographyData(counts=np.zeros((2, 4)), copies_per_input=100, inputs_used=(0, 1))
    e = maximally_mixed_choi(2, 2)
    assert log_likelihood(e, data, ens, pom) == 0.0


def test_loglik_impossible_event_is_minus_inf():
    zero = np.diag([1.0, 0.0]).astype(complex)
    one = np.diag([0.0, 1.0]).astype(complex)
    ens = InputEnsemble(states=(zero,))
    pom = Pom(outcomes=(zero, one))
    e = builtin_channel("identity", dim=2)  # p(outcome 1 | input 0) = 0
    data = TomographyData(counts=np.array([[0.0, 5.0]]), copies_per_input=5, inputs_used=(0,))
    assert log_likelihood(e, data, ens, pom) == -np.inf


def test_information_lambda_zero_is_normalized_loglik(noisy_incomplete):
    _, ens, pom, data = noisy_incomplete
    e = maximally_mixed_choi(4, 4)
    f = data.frequencies()
    p = probabilities(e, ens.subset(data.inputs_used), pom)
    expected = float(np.sum(f[f > 0] * np.log(p[f > 0])))
    assert np.isclose(information(e, data, ens, pom, 0.0), expected)


def test_information_no_data_is_entropy():
    ens, pom = qubit_tetrahedron()
    data = TomographyData(counts=np.zeros((0, 4)), copies_per_input=None, inputs_used=())
    e = maximally_mixed_choi(2, 2)
    lam = 0.7
    assert np.isclose(information(e, data, ens, pom, lam), lam * np.log(4.0))


def test_information_unitary_true_channel(cnot_complete):
    e_true, ens, pom, data = cnot_complete
    lam = 1e-2
    f = data.frequencies()
    expected = float(np.sum(f[f > 0] * np.log(f[f > 0])))  # p = f at the true channel
    assert np.isclose(information(e_true, data, ens, pom, lam), expected, atol=1e-9)


# -- W operator -------------------------------------------------------------------


@pytest.mark.parametrize("lam", [0.0, 1e-3, 1e-2])
def test_w_gradient_matches_finite_differences(noisy_incomplete, lam):
    _, ens, pom, data = noisy_incomplete
    rng = np.random.default_rng(11)
    e = random_interior_choi(4, 4, rng)
    w = w_operator(e, data, ens, pom, lam)
    t = 1e-6
    rel_errs = []
    for _ in range(3):
        h = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        h = hermitianize(h)
        h /= np.linalg.norm(h)
        e_p = type(e)(matrix=e.matrix + t * h, d_in=4, d_out=4, validate=False)
        e_m = type(e)(matrix=e.matrix - t * h, d_in=4, d_out=4, validate=False)
        num = (information(e_p, data, ens, pom, lam) - information(e_m, data, ens, pom, lam)) / (2 * t)
        ana = float(np.trace(h @ w).real)
        rel_errs.append(abs(num - ana) / max(abs(num), 1e-12))
    assert max(rel_errs) < 1e-4


def test_w_trace_identity_at_truth(cnot_complete):
    e_true, ens, pom, data = cnot_complete
    w = w_operator(e_true, data, ens, pom, lam=0.0)
    # tr{W E} = sum_lm f_lm (p/p) = 1 at the true channel on noiseless data
    assert np.isclose(np.trace(w @ e_true.matrix).real, 1.0, atol=1e-10)


def test_w_zero_for_zero_counts():
    ens, pom = qubit_tetrahedron()
    data = TomographyData(counts=np.zeros((1, 4)), copies_per_input=10, inputs_used=(0,))
    e = maximally_mixed_choi(2, 2)
    np.testing.assert_allclose(w_operator(e, data, ens, pom, 0.0), 0.0, atol=1e-15)


def test_w_rejects_incompatible_estimator():
    zero = np.diag([1.0, 0.0]).astype(complex)
    one = np.diag([0.0, 1.0]).astype(complex)
    ens = InputEnsemble(states=(zero,))
    pom = Pom(outcomes=(zero, one))
    e = builtin_channel("identity", dim=2)
    data = TomographyData(counts=np.array([[0.0, 5.0]]), copies_per_input=5, inputs_used=(0,))
    with pytest.raises(ValueError, match="incompatible"):
        w_operator(e, data, ens, pom, 0.0)


# -- W0 correction ---------------------------------------------------------------


def test_w0_perfect_detection_no_step_effect(noisy_incomplete):
    """At unit efficiency W0 = h (x) 1, which the step projection annihilates."""
    from qproctomo.mlme import _Workspace

    _, ens, pom, data = noisy_incomplete
    ws = _Workspace(data, ens, pom, lam=0.0)
    e = maximally_mixed_choi(4, 4)
    p = ws.probs(e.matrix)
    w = ws.w_matrix(e.matrix, p)
    w0 = w0_correction(e, ens, pom, data)
    d1 = ws.step_direction(e.matrix, w)
    d2 = ws.step_direction(e.matrix, w - w0)
    np.testing.assert_allclose(d1, d2, atol=1e-10)


def test_w0_uniform_efficiency_invariance(noisy_incomplete):
    """The eta in G cancels against the eta in the detected-fraction norm."""
    _, ens, pom, data = noisy_incomplete
    e = maximally_mixed_choi(4, 4)
    half = Pom(outcomes=pom.outcomes, efficiencies=np.full(len(pom), 0.5))
    w0_full = w0_correction(e, ens, pom, data)
    w0_half = w0_correction(e, ens, half, data)
    np.testing.assert_allclose(w0_half, w0_full, atol=1e-12)


def test_uniform_efficiency_estimator_equivalence(noisy_incomplete):
    """Same counts, eta = 0.5 everywhere: the iteration is step-for-step identical.

    The eta scaling cancels between the outcome operators and the detected
    fraction, and W0 differs from the eta = 1 gradient only by an identity-
    block shift the update projects out.
    """
    _, ens, pom, data = noisy_incomplete
    half = Pom(outcomes=pom.outcomes, efficiencies=np.full(len(pom), 0.5))
    # fixed iteration count: compare trajectories, not stopping heuristics
    cfg = MlmeConfig(lam=1e-3, step=1.0, residual_tol=1e-30, max_iters=400)
    rep_full = mlme_solve(data, ens, pom, cfg)
    rep_half = mlme_solve(data, ens, half, cfg)
    assert rep_full.iterations == rep_half.iterations == 400
    assert trace_distance(rep_full.estimator, rep_half.estimator) < 1e-10
    # converged estimators agree up to the stopping-point slack of the two runs
    cfg2 = MlmeConfig(lam=1e-3, step=1.0, residual_tol=1e-7, max_iters=20000)
    d = trace_distance(
        mlme_solve(data, ens, pom, cfg2).estimator,
        mlme_solve(data, ens, half, cfg2).estimator,
    )
    assert d < 1e-5


# -- single step -------------------------------------------------------------------


def test_step_fixed_point_when_gradient_is_uniform():
    # zero counts and lambda > 0 at the maximally mixed operator: W is a multiple
    # of the identity, so the projected direction vanishes and E' = E
    ens, pom = qubit_tetrahedron()
    data = TomographyData(counts=np.zeros((1, 4)), copies_per_input=10, inputs_used=(0,))
    e = maximally_mixed_choi(2, 2)
    cfg = MlmeConfig(lam=1e-2, step=0.5)
    e_next = mlme_step(e, data, ens, pom, cfg)
    np.testing.assert_allclose(e_next.matrix, e.matrix, atol=1e-12)


def test_step_increases_information(noisy_incomplete):
    _, ens, pom, data = noisy_incomplete
    e0 = maximally_mixed_choi(4, 4)
    e1 = mlme_step(e0, data, ens, pom, CFG)
    assert information(e1, data, ens, pom, CFG.lam) >= information(e0, data, ens, pom, CFG.lam)


def test_step_preserves_trace_constraint_many_cases():
    rng = np.random.default_rng(2)
    ens, pom = qubit_tetrahedron()
    e_pool = [random_interior_choi(2, 2, rng) for _ in range(10)]
    cfg = MlmeConfig(lam=1e-3, step=1.0)
    for trial in range(100):
        e = e_pool[trial % len(e_pool)]
        counts = rng.integers(0, 50, size=(2, 4)).astype(float)
        data = TomographyData(counts=counts, copies_per_input=100, inputs_used=(0, 1))
        e_next = mlme_step(e, data, ens, pom, cfg)
        tp_dev = np.max(np.abs(partial_trace(e_next.matrix, (2, 2), "K") - np.eye(2)))
        assert tp_dev < 1e-10
        assert np.linalg.eigvalsh(e_next.matrix)[0] > -1e-10


def test_monotone_ascent_with_backtracking(noisy_incomplete):
    _, ens, pom, data = noisy_incomplete
    e = maximally_mixed_choi(4, 4)
    prev = information(e, data, ens, pom, CFG.lam)
    for _ in range(60):
        e = mlme_step(e, data, ens, pom, CFG)
        cur = information(e, data, ens, pom, CFG.lam)
        assert cur >= prev - 1e-12
        prev = cur


# -- full solve ---------------------------------------------------------------------


def test_solve_complete_data_consistency_pure_ml(cnot_complete):
    e_true, ens, pom, data = cnot_complete
    rep = mlme_solve(data, ens, pom, MlmeConfig(lam=0.0, step=1.0, residual_tol=1e-7))
    assert rep.converged
    assert trace_distance(rep.estimator, e_true) < 1e-3


def test_solve_entropy_bias_scales_with_lambda(cnot_complete):
    """Characterization: the entropy weight trades reconstruction bias for uniqueness."""
    e_true, ens, pom, data = cnot_complete
    d_small = trace_distance(
        mlme_solve(data, ens, pom, MlmeConfig(lam=1e-4, step=1.0)).estimator, e_true
    )
    d_large = trace_distance(
        mlme_solve(data, ens, pom, MlmeConfig(lam=1e-3, step=1.0)).estimator, e_true
    )
    assert d_small < 1e-3
    assert d_small < d_large < 1e-2


def test_solve_no_informative_data_returns_maximally_mixed():
    d = 2
    ens, _ = qubit_tetrahedron()
    pom = Pom(outcomes=(np.eye(d, dtype=complex),))
    data = TomographyData(counts=np.array([[1.0]]), copies_per_input=None, inputs_used=(0,))
    rep = mlme_solve(data, ens, pom, MlmeConfig(lam=1e-3, step=0.5))
    assert rep.converged
    assert trace_distance(rep.estimator, maximally_mixed_choi(d, d)) < 1e-9


def test_solve_pure_ml_unique_from_random_starts(cnot_complete):
    """Complete data pin a single ML point; all starts converge to it.

    The optimum is rank-1 (on the cone boundary), so at residual 1e-8 the
    starts still carry a few-1e-6 spread of boundary-approach directions.
    """
    e_true, ens, pom, data = cnot_complete
    cfg = MlmeConfig(lam=0.0, step=1.0, residual_tol=1e-8, max_iters=60000)
    rng = np.random.default_rng(33)
    estimators = []
    for _ in range(10):
        e0 = random_interior_choi(4, 4, rng)
        rep = mlme_solve(data, ens, pom, cfg, e0=e0)
        assert rep.converged
        estimators.append(rep.estimator)
    for a in estimators[1:]:
        assert trace_distance(estimators[0], a) < 5e-6


def test_solve_report_serializes(noisy_incomplete):
    _, ens, pom, data = noisy_incomplete
    rep = mlme_solve(data, ens, pom, MlmeConfig(lam=1e-3, step=1.0, residual_tol=1e-5))
    blob = rep.to_jsonable()
    assert set(blob) == {"estimator", "iterations", "final_residual", "final_information", "converged"}
    assert blob["estimator"]["matrix"]["dim"] == 16


# -- extremal residual ----------------------------------------------------------------


def test_residual_small_at_converged_large_away(noisy_incomplete):
    _, ens, pom, data = noisy_incomplete
    cfg = MlmeConfig(lam=1e-3, step=1.0, residual_tol=1e-7)
    rep = mlme_solve(data, ens, pom, cfg)
    assert extremal_residual(rep.estimator, data, ens, pom, cfg.lam) < cfg.residual_tol
    e0 = maximally_mixed_choi(4, 4)
    assert extremal_residual(e0, data, ens, pom, cfg.lam) > 100 * cfg.residual_tol


def test_lambda_plateau_insensitivity():
    """Entropy and likelihood levels barely move across lambda on a wide plateau.

    Holds in the strongly incomplete regime (here: two inputs on a
    high-entropy channel); with more data the entropy hill at lambda = 1e-2
    visibly biases S, which is exactly why lambda must stay small.
    """
    from qproctomo.channels import channel_entropy, noisy_cnot

    e_true = choi_from_kraus(noisy_cnot(0.5, 15, seed=1))
    ens = standard_product_inputs(2)
    pom = product_sic_pom(2)
    full = sample_counts(probabilities(e_true, ens, pom), 10000, seed=42)
    data = TomographyData(counts=full.counts[:2], copies_per_input=10000, inputs_used=(0, 1))
    lls, ents = [], []
    for lam in (1e-2, 1e-3, 1e-4):
        rep = mlme_solve(data, ens, pom, MlmeConfig(lam=lam, step=1.0, residual_tol=1e-7))
        est = rep.estimator
        lls.append(information(est, data, ens, pom, 0.0))
        ents.append(channel_entropy(est))
    ll_spread = (max(lls) - min(lls)) / abs(np.mean(lls))
    s_spread = (max(ents) - min(ents)) / abs(np.mean(ents))
    assert ll_spread < 0.01
    assert s_spread < 0.01
