import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from few.qops import (
    PAULI,
    assemble_observable,
    hs_inner,
    hs_norm,
    partial_transpose,
    project_observable,
    su_d_basis,
    tensor_product,
)
from few.states import bell_state

I2, X, Y, Z = PAULI


def test_tensor_product_identity_and_diag():
    assert np.allclose(tensor_product(I2, I2), np.eye(4))
    assert np.allclose(tensor_product(Z, Z), np.diag([1, -1, -1, 1]))


def test_reduction_witness_from_pauli_expansion():
    # |psi00><psi00| = (II + XX - YY + ZZ)/4
    proj = (np.eye(4) + tensor_product(X, X) - tensor_product(Y, Y) + tensor_product(Z, Z)) / 4
    assert np.allclose(proj, bell_state(0, 0).matrix)
    w = np.eye(4) - 2 * proj
    expected = np.array([[0, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0], [-1, 0, 0, 0]])
    assert np.allclose(w, expected)


def test_hs_norms():
    assert hs_norm(tensor_product(Z, Z)) == pytest.approx(2.0)
    assert hs_norm(np.eye(4) / 4 - bell_state(0, 0).matrix) == pytest.approx(np.sqrt(3) / 2)
    assert hs_inner(X, Y) == 0


def test_hs_inner_dimension_mismatch():
    with pytest.raises(ValueError):
        hs_inner(np.eye(2), np.eye(3))


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_basis_invariants(d):
    b = su_d_basis(d)
    assert b.shape == (d * d, d, d)
    assert np.allclose(b[0], np.eye(d))
    gram = np.einsum("aij,bji->ab", b[1:], b[1:])
    assert np.max(np.abs(gram - 2 * np.eye(d * d - 1))) < 1e-14
    assert np.max(np.abs(np.trace(b[1:], axis1=1, axis2=2))) < 1e-14
    assert np.max(np.abs(b - b.conj().transpose(0, 2, 1))) < 1e-14


def test_pauli_and_gell_mann_elements():
    assert np.allclose(su_d_basis(2)[3], np.diag([1, -1]))
    gm = su_d_basis(3)
    assert np.allclose(gm[8], np.diag([1, 1, -2]) / np.sqrt(3))
    lam7 = np.zeros((3, 3), dtype=complex)
    lam7[1, 2], lam7[2, 1] = -1j, 1j
    assert np.allclose(gm[7], lam7)
    assert abs(np.trace(gm[6] @ gm[7])) < 1e-15


def test_basis_rejects_small_d():
    with pytest.raises(ValueError):
        su_d_basis(1)


def test_assemble_examples():
    assert np.allclose(assemble_observable(np.zeros((4, 4)), (2, 2)), 0)
    tau = np.zeros((4, 4))
    tau[3, 3] = 0.5
    z = assemble_observable(tau, (2, 2))
    assert np.allclose(z, tensor_product(Z, Z) / 2)
    assert hs_norm(z) == pytest.approx(1.0)


def test_assemble_errors():
    with pytest.raises(ValueError):
        assemble_observable(np.zeros((4, 9)), (2, 2))
    tau = np.zeros((4, 4))
    tau[0, 0] = 1
    with pytest.raises(ValueError):
        assemble_observable(tau, (2, 2))


def _traceless_tau(dims):
    shape = tuple(d * d for d in dims)
    return arrays(float, shape, elements=st.floats(-1, 1)).map(lambda t: np.where(np.arange(t.size).reshape(shape) == 0, 0.0, t))


@settings(max_examples=40, deadline=None)
@given(_traceless_tau((2, 2)))
def test_two_qubit_projection_round_trip(tau):
    z = assemble_observable(tau, (2, 2))
    proj = np.array([[np.trace(z @ tensor_product(a, b)).real / 4 for b in PAULI] for a in PAULI])
    assert np.max(np.abs(proj - tau)) < 1e-12
    assert abs(np.trace(z)) <= 1e-12
    assert np.max(np.abs(z - z.conj().T)) <= 1e-12
    assert hs_norm(z) ** 2 == pytest.approx(4 * np.sum(tau**2), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(2, 2), (2, 2, 2), (3, 3), (2, 3)]), st.integers(0, 2**32 - 1))
def test_project_then_assemble_is_identity(dims, seed):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    h -= np.trace(h) / n * np.eye(n)
    tau = project_observable(h, dims)
    assert abs(tau.flat[0]) < 1e-12
    tau.flat[0] = 0.0
    assert np.max(np.abs(assemble_observable(tau, dims) - h)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_three_qubit_norm_identity(seed):
    rng = np.random.default_rng(seed)
    tau = rng.normal(size=(4, 4, 4))
    tau[0, 0, 0] = 0
    assert hs_norm(assemble_observable(tau, (2, 2, 2))) ** 2 == pytest.approx(8 * np.sum(tau**2))


def test_partial_transpose_of_bell_has_negative_eigenvalue():
    ev = np.linalg.eigvalsh(partial_transpose(bell_state(0, 0).matrix, (2, 2), 1))
    assert ev.min() == pytest.approx(-0.5)
