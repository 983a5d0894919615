"""Dense complex linear algebra and the su(d) generator bases used to expand Z.

Matrices are plain ``numpy`` complex arrays. A coefficient tensor ``tau`` over
``n`` subsystems has shape ``(d_1**2, ..., d_n**2)``; index 0 on each axis is the
identity, the rest are traceless Hermitian generators with ``Tr(l_j l_k) = 2 delta_jk``.
"""

from __future__ import annotations

from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-12

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; the first factor carries the slowest-varying index."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(tensor_product, factors)


def _check_square_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape != b.shape:
        raise ValueError(f"expected square matrices of equal size, got {a.shape} and {b.shape}")


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product Tr(a^dagger b)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_square_pair(a, b)
    return complex(np.vdot(a, b))


def hs_norm(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=complex)
    return float(np.sqrt(hs_inner(a, a).real))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def _gell_mann(d: int) -> list[np.ndarray]:
    # Ordering for d = 3 reproduces the standard lambda_1..lambda_8.
    elements = []
    for k in range(1, d):
        for j in range(k):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1
            anti = np.zeros((d, d), dtype=complex)
            anti[j, k] = -1j
            anti[k, j] = 1j
            elements += [sym, anti]
        diag = np.zeros((d, d), dtype=complex)
        diag[np.arange(k), np.arange(k)] = 1
        diag[k, k] = -k
        elements.append(np.sqrt(2.0 / (k * (k + 1))) * diag)
    return elements


@lru_cache(maxsize=None)
def _basis_array(d: int) -> np.ndarray:
    if d == 2:
        elements = list(PAULI[1:])
    else:
        elements = _gell_mann(d)
    stack = np.stack([np.eye(d, dtype=complex), *elements])
    stack.setflags(write=False)
    return stack


def su_d_basis(d: int) -> np.ndarray:
    """Identity followed by the ``d**2 - 1`` generators of su(d), shape ``(d**2, d, d)``.

    ``d = 2`` gives the Pauli matrices, ``d = 3`` the Gell-Mann matrices and larger
    ``d`` the generalized Gell-Mann family, all normalized to ``Tr(l_j l_k) = 2 delta_jk``.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"subsystem dimension must be an integer >= 2, got {d}")
    return _basis_array(int(d))


def basis_weights(d: int) -> np.ndarray:
    """Squared HS norms of the basis elements: ``d`` for the identity, 2 otherwise."""
    w = np.full(d * d, 2.0)
    w[0] = d
    return w


@lru_cache(maxsize=None)
def _product_basis(dims: tuple[int, ...]) -> np.ndarray:
    out = su_d_basis(dims[0])
    for d in dims[1:]:
        b = su_d_basis(d)
        out = np.einsum("aij,bkl->abikjl", out, b).reshape(
            out.shape[0] * b.shape[0], out.shape[1] * b.shape[1], out.shape[2] * b.shape[2]
        )
    out.setflags(write=False)
    return out


def product_basis(dims: Sequence[int]) -> np.ndarray:
    """All products ``l_{i1} x ... x l_{in}``, shape ``(prod d_k**2, D, D)`` in C order of tau."""
    return _product_basis(tuple(int(d) for d in dims))


def tau_shape(dims: Sequence[int]) -> tuple[int, ...]:
    return tuple(int(d) ** 2 for d in dims)


def assemble_observable(tau: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Z = sum tau[i1..in] l_{i1} x ... x l_{in}; requires ``tau[0,...,0] == 0``."""
    tau = np.asarray(tau, dtype=float)
    shape = tau_shape(dims)
    if tau.shape != shape:
        raise ValueError(f"tau shape {tau.shape} does not match dims {tuple(dims)} (want {shape})")
    if tau.flat[0] != 0.0:
        raise ValueError("identity coefficient tau[0,...,0] must be zero")
    return np.tensordot(tau.ravel(), product_basis(dims), axes=1)


def project_observable(matrix: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Real expansion coefficients of a Hermitian matrix in the product basis.

    Inverse of :func:`assemble_observable` (the identity coefficient is kept, so
    this also expands witnesses ``Z - mu I``).
    """
    matrix = np.asarray(matrix, dtype=complex)
    basis = product_basis(dims)
    if matrix.shape != basis.shape[1:]:
        raise ValueError(f"matrix shape {matrix.shape} does not match dims {tuple(dims)}")
    weights = reduce(np.multiply.outer, [basis_weights(d) for d in dims]).ravel()
    # Tr(B_k M) for Hermitian B_k; conj-vdot gives Tr(B_k^dagger M).
    coeffs = np.einsum("kij,ij->k", basis.conj(), matrix).real / weights
    return coeffs.reshape(tau_shape(dims))


def partial_transpose(matrix: np.ndarray, dims: Sequence[int], sys: int = 1) -> np.ndarray:
    """Transpose subsystem ``sys`` (0-based) of an operator on ``prod(dims)``."""
    dims = [int(d) for d in dims]
    n = len(dims)
    t = np.asarray(matrix).reshape(dims + dims)
    axes = list(range(2 * n))
    axes[sys], axes[n + sys] = axes[n + sys], axes[sys]
    return t.transpose(axes).reshape(matrix.shape)
