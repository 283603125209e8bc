import math

import numpy as np
import pytest

from heraldtomo.fock import (NullStateError, annihilation, basis, check_density_matrix, coherent_fock,
                             fidelity, ket2dm, loss_kraus, norm_deficit, normalize, number_op, pad,
                             quadrature_op, rotate, state_fidelity)
from oracles import coherent


def test_coherent_vacuum():
    v = coherent_fock(0, 2)
    np.testing.assert_allclose(v, [1, 0, 0])
    assert norm_deficit(v) == 0


def test_coherent_small_amplitude_values():
    v = coherent_fock(0.1, 2)
    np.testing.assert_allclose(v.real, [0.99501, 0.09950, 0.00704], atol=5e-6)
    assert norm_deficit(coherent_fock(0.1, 6)) < 1e-6


def test_coherent_against_displacement_oracle():
    for alpha in (0.3, 0.2 - 0.1j, 1.1j):
        np.testing.assert_allclose(coherent_fock(alpha, 8), coherent(alpha, 9), atol=1e-12)


def test_coherent_is_not_renormalized():
    v = coherent_fock(1.0, 2)
    assert norm_deficit(v) == pytest.approx(1 - math.exp(-1) * 2.5, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.3])
def test_norm_deficit_decreases_with_cutoff(alpha):
    d = [norm_deficit(coherent_fock(alpha, n)) for n in range(2, 10)]
    assert all(b <= a for a, b in zip(d, d[1:]))
    assert d[-1] < 1e-10


def test_coherent_needs_two_levels():
    with pytest.raises(ValueError):
        coherent_fock(0.1, 1)


def test_normalize_examples():
    np.testing.assert_allclose(normalize([2, 0, 0]), [1, 0, 0])
    np.testing.assert_allclose(normalize([0, 1, 1]), [0, 2 ** -0.5, 2 ** -0.5])
    with pytest.raises(NullStateError, match="null state"):
        normalize([0, 0, 0])


def test_fidelity_examples():
    assert fidelity(ket2dm(basis(1, 2)), basis(1, 2)) == 1
    assert fidelity(ket2dm(basis(0, 2)), basis(1, 2)) == 0
    rho = np.diag([0.5, 0.5, 0])
    assert fidelity(rho, normalize([1, 1, 0])) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(ValueError):
        fidelity(np.eye(3) / 3, basis(0, 3))


def test_fidelity_is_diagonal_entry_in_any_basis(rng):
    d = 4
    X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    U, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    rho_new = U.conj().T @ rho @ U
    for k in range(d):
        assert fidelity(rho, U[:, k]) == pytest.approx(rho_new[k, k].real, abs=1e-14)


def test_state_fidelity_pure_and_padding():
    psi = normalize([1, 1j, 0.5])
    rho = 0.7 * ket2dm(psi) + 0.3 * np.eye(3) / 3
    assert state_fidelity(rho, ket2dm(psi)) == pytest.approx(fidelity(rho, psi), abs=1e-10)
    assert state_fidelity(ket2dm(basis(1, 1)), ket2dm(basis(1, 4))) == pytest.approx(1.0)


def test_annihilation_entries():
    a = annihilation(4)
    assert a[0, 1] == 1
    assert a[1, 2] == pytest.approx(math.sqrt(2))
    np.testing.assert_array_equal(a @ basis(0, 4), np.zeros(5))


def test_commutator_on_interior_block():
    n_max = 6
    a = annihilation(n_max)
    comm = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(comm[:n_max, :n_max], np.eye(n_max), atol=1e-14)
    np.testing.assert_allclose((a.conj().T @ a), number_op(n_max), atol=1e-14)


def test_quadrature_vacuum_variance():
    Q = quadrature_op(0.3, 8)
    v = basis(0, 8)
    assert np.vdot(v, Q @ Q @ v).real == pytest.approx(0.5)


def test_rotate_matches_quadrature_rotation(rng):
    n_max = 6
    X = rng.normal(size=(n_max + 1,) * 2) + 1j * rng.normal(size=(n_max + 1,) * 2)
    rho = X @ X.conj().T
    rho /= np.trace(rho)
    d, phi = 0.7, 0.4
    lhs = np.trace(rotate(rho, d) @ quadrature_op(phi, n_max))
    rhs = np.trace(rho @ quadrature_op(phi + d, n_max))
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_loss_kraus_complete():
    A = loss_kraus(0.37, 7)
    np.testing.assert_allclose(np.einsum("kji,kjl->il", A, A), np.eye(8), atol=1e-12)


def test_pad_and_checks():
    rho = ket2dm(normalize([1, 1]))
    big = pad(rho, 4)
    check_density_matrix(big)
    with pytest.raises(ValueError):
        pad(big, 2)
    with pytest.raises(ValueError, match="Hermitian"):
        check_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValueError, match="negative"):
        check_density_matrix(np.array([[1.5, 0], [0, -0.5]]))
