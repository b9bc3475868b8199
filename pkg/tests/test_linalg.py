import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qproctomo.channels import builtin_channel
from qproctomo.linalg import (
    DimensionError,
    eig_hermitian,
    haar_unitary,
    hermitianize,
    matrix_from_jsonable,
    matrix_to_jsonable,
    partial_trace,
    spectral_map,
    tensor,
    trace_norm,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return hermitianize(a)


def random_density(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


# -- tensor -------------------------------------------------------------------


def test_tensor_identities():
    np.testing.assert_allclose(tensor(np.eye(2), np.eye(2)), np.eye(4))
    np.testing.assert_allclose(tensor(SIGMA_Z, SIGMA_Z), np.diag([1, -1, -1, 1]).astype(complex))


def test_tensor_projector_block():
    p0 = np.diag([1.0, 0.0]).astype(complex)
    got = tensor(p0, SIGMA_X)
    expected = np.zeros((4, 4), dtype=complex)
    expected[:2, :2] = SIGMA_X  # entry-wise expansion: only the (0,0) block survives
    np.testing.assert_allclose(got, expected)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_tensor_trace_multiplicative(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 3)
    b = random_hermitian(rng, 2)
    assert np.isclose(np.trace(tensor(a, b)), np.trace(a) * np.trace(b))


# -- partial trace ------------------------------------------------------------


def test_partial_trace_identity():
    np.testing.assert_allclose(partial_trace(np.eye(4), (2, 2), "K"), 2 * np.eye(2))
    np.testing.assert_allclose(partial_trace(np.eye(4), (2, 2), "H"), 2 * np.eye(2))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_partial_trace_product_state(seed):
    rng = np.random.default_rng(seed)
    rho = random_hermitian(rng, 2)
    sigma = random_hermitian(rng, 3)
    got = partial_trace(tensor(rho, sigma), (2, 3), "K")
    np.testing.assert_allclose(got, np.trace(sigma) * rho, atol=1e-12)
    got_h = partial_trace(tensor(rho, sigma), (2, 3), "H")
    np.testing.assert_allclose(got_h, np.trace(rho) * sigma, atol=1e-12)


def test_partial_trace_cnot_choi_marginal():
    e = builtin_channel("cnot")
    np.testing.assert_allclose(partial_trace(e.matrix, (4, 4), "K"), np.eye(4), atol=1e-10)


def test_partial_trace_preserves_trace():
    rng = np.random.default_rng(5)
    a = random_hermitian(rng, 6)
    assert np.isclose(np.trace(partial_trace(a, (2, 3), "K")), np.trace(a))


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError, match="shape"):
        partial_trace(np.eye(4), (2, 3), "K")


# -- eigendecomposition -------------------------------------------------------


def test_eig_descending_and_pauli():
    spec = eig_hermitian(np.diag([1.0, 3.0]).astype(complex))
    np.testing.assert_allclose(spec.eigenvalues, [3.0, 1.0])
    spec_x = eig_hermitian(SIGMA_X)
    np.testing.assert_allclose(spec_x.eigenvalues, [1.0, -1.0])
    plus = spec_x.eigenvectors[:, 0]
    assert np.isclose(abs(plus @ np.array([1, 1]) / np.sqrt(2)), 1.0)


def test_eig_cnot_choi_rank_one():
    e = builtin_channel("cnot")
    spec = eig_hermitian(e.matrix / 4.0)
    np.testing.assert_allclose(spec.eigenvalues[0], 1.0, atol=1e-12)
    np.testing.assert_allclose(spec.eigenvalues[1:], 0.0, atol=1e-12)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_eig_reconstruction_and_unitarity(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 5)
    spec = eig_hermitian(a)
    rel = np.linalg.norm(spec.reconstruct() - a) / np.linalg.norm(a)
    assert rel < 1e-10
    v = spec.eigenvectors
    assert np.max(np.abs(v.conj().T @ v - np.eye(5))) < 1e-10


# -- spectral map -------------------------------------------------------------


def test_spectral_map_log_of_identity():
    np.testing.assert_allclose(spectral_map(np.eye(4), np.log, zero_floor=1e-14), 0, atol=1e-12)


def test_spectral_map_sqrt():
    np.testing.assert_allclose(
        spectral_map(np.diag([4.0, 0.0]), np.sqrt, zero_floor=0.0), np.diag([2.0, 0.0]), atol=1e-12
    )


def test_spectral_map_abs_of_projector_difference():
    # rank-1 projectors with overlap c: both nonzero eigenvalues of |P - Q| are sqrt(1 - |c|^2)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    u /= np.linalg.norm(u)
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    c = abs(np.vdot(u, v))
    diff = np.outer(u, u.conj()) - np.outer(v, v.conj())
    got = spectral_map(diff, np.abs)
    vals = np.sort(np.linalg.eigvalsh(got))[::-1]
    expected = np.sqrt(1 - c**2)
    np.testing.assert_allclose(vals[:2], [expected, expected], atol=1e-10)
    np.testing.assert_allclose(vals[2:], 0, atol=1e-10)


def test_spectral_map_identity_function_on_positive():
    rng = np.random.default_rng(4)
    rho = random_density(rng, 3)
    np.testing.assert_allclose(spectral_map(rho, lambda x: x, zero_floor=0.0), rho, atol=1e-12)


def test_spectral_map_rejects_undefined():
    with pytest.raises(ValueError, match="not finite"):
        spectral_map(np.diag([1.0, 0.0]), np.log, zero_floor=0.0)


# -- trace norm ---------------------------------------------------------------


def test_trace_norm_basics():
    assert trace_norm(np.zeros((3, 3))) == 0.0
    assert np.isclose(trace_norm(SIGMA_Z), 2.0)


def test_trace_norm_unitary_channel_pair():
    # analytic: 2 sqrt(D^2 - |tr(U†V)|^2) for Choi operators of unitaries U, V
    diff = builtin_channel("cnot").matrix - builtin_channel("identity", dim=4).matrix
    np.testing.assert_allclose(trace_norm(diff), 4 * np.sqrt(3), atol=1e-10)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_trace_norm_triangle_and_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    a = random_hermitian(rng, 4)
    b = random_hermitian(rng, 4)
    assert trace_norm(a + b) <= trace_norm(a) + trace_norm(b) + 1e-10
    u = haar_unitary(4, rng)
    assert np.isclose(trace_norm(u @ a @ u.conj().T), trace_norm(a), atol=1e-9)


# -- serialization ------------------------------------------------------------


def test_matrix_json_round_trip():
    rng = np.random.default_rng(8)
    a = random_hermitian(rng, 3)
    d = matrix_to_jsonable(a)
    assert d["dim"] == 3 and len(d["entries"]) == 9
    np.testing.assert_allclose(matrix_from_jsonable(d), a)
