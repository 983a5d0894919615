"""Density matrices for the example families and the pure product-state manifold.

Product states are parameterized per subsystem by angles:

* qubit ``(alpha, beta)``: ``cos(beta)|0> + e^{i alpha} sin(beta)|1>``
* qutrit ``(eta, xi, theta, phi)``:
  ``e^{i eta} sin(theta) sin(phi)|0> + e^{i xi} sin(theta) cos(phi)|1> + cos(theta)|2>``

Phases range over ``[0, 2pi]`` and polar angles over ``[0, pi/2]``. Random
sampling is uniform over these rectangles, which is not Haar-uniform; the
samples only seed local searches.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from few.qops import PAULI, is_hermitian, kron_all, partial_transpose

TRACE_TOL = 1e-12
PSD_TOL = 1e-10

# (lower, upper) per angle, in parameter order.
ANGLE_RANGES = {
    2: ((0.0, 2 * np.pi), (0.0, np.pi / 2)),
    3: ((0.0, 2 * np.pi), (0.0, 2 * np.pi), (0.0, np.pi / 2), (0.0, np.pi / 2)),
}
PHASE_MASK = {2: (True, False), 3: (True, True, False, False)}


class StateValidationError(ValueError):
    """A matrix failed one of the density-matrix invariants."""


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        validate_density(m, self.dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def partial_transpose(self, sys: int = 1) -> np.ndarray:
        return partial_transpose(self.matrix, self.dims, sys)

    def is_ppt(self, sys: int = 1, tol: float = PSD_TOL) -> bool:
        return bool(np.linalg.eigvalsh(self.partial_transpose(sys)).min() >= -tol)

    def mix(self, other: "DensityMatrix", lam: float) -> "DensityMatrix":
        """``lam * self + (1 - lam) * other``."""
        if self.dims != other.dims:
            raise ValueError(f"dims differ: {self.dims} vs {other.dims}")
        return DensityMatrix(lam * self.matrix + (1 - lam) * other.matrix, self.dims)

    def to_json(self) -> dict:
        return matrix_to_json(self.matrix, self.dims)

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        matrix, dims = matrix_from_json(obj)
        if dims is None:
            raise StateValidationError("density matrix JSON requires 'dims'")
        return cls(matrix, dims)

    @classmethod
    def load(cls, path: str | Path) -> "DensityMatrix":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def validate_density(m: np.ndarray, dims: Sequence[int]) -> None:
    total = int(np.prod(dims))
    if m.ndim != 2 or m.shape != (total, total):
        raise StateValidationError(f"dimension: matrix shape {m.shape} does not match dims {tuple(dims)}")
    if not is_hermitian(m, TRACE_TOL):
        raise StateValidationError("hermitian: matrix differs from its conjugate transpose by more than 1e-12")
    tr = np.trace(m)
    if abs(tr - 1) > TRACE_TOL:
        raise StateValidationError(f"unit trace: Tr = {tr.real:.6g}")
    lo = np.linalg.eigvalsh(m).min()
    if lo < -PSD_TOL:
        raise StateValidationError(f"positive semidefinite: minimum eigenvalue {lo:.3g} < -1e-10")


def matrix_to_json(matrix: np.ndarray, dims: Sequence[int] | None = None) -> dict:
    out = {}
    if dims is not None:
        out["dims"] = [int(d) for d in dims]
    out["re"] = np.real(matrix).ravel().tolist()
    out["im"] = np.imag(matrix).ravel().tolist()
    return out


def matrix_from_json(obj: dict) -> tuple[np.ndarray, tuple[int, ...] | None]:
    """Parse ``{"dims", "re", "im"}``; ``re``/``im`` may be flat row-major or nested."""
    try:
        re = np.asarray(obj["re"], dtype=float).ravel()
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float).ravel()
    except (KeyError, TypeError, ValueError) as exc:
        raise StateValidationError(f"malformed matrix JSON: {exc}") from None
    if re.shape != im.shape:
        raise StateValidationError("malformed matrix JSON: 're' and 'im' lengths differ")
    n = int(round(np.sqrt(re.size)))
    if n * n != re.size:
        raise StateValidationError(f"malformed matrix JSON: {re.size} entries is not a square matrix")
    dims = obj.get("dims")
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if int(np.prod(dims)) != n:
            raise StateValidationError(f"dimension: dims {dims} do not match a {n}x{n} matrix")
    return (re + 1j * im).reshape(n, n), dims


def _pure(ket: np.ndarray, dims) -> DensityMatrix:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix(np.outer(ket, ket.conj()), dims)


def basis_ket(dims: Sequence[int], *digits: int) -> np.ndarray:
    ket = np.zeros(int(np.prod(dims)), dtype=complex)
    ket[np.ravel_multi_index(digits, dims)] = 1
    return ket


# --- product-state manifold -------------------------------------------------


def n_angles(dims: Sequence[int]) -> int:
    return sum(len(_ranges(d)) for d in dims)


def _ranges(d: int):
    try:
        return ANGLE_RANGES[d]
    except KeyError:
        raise ValueError(f"product-state parameterization supports subsystem dims 2 and 3, got {d}") from None


@dataclass(frozen=True, eq=False)
class ProductStateParams:
    """Flat angle vector, subsystem by subsystem in the order of ``dims``."""

    angles: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        a = np.array(self.angles, dtype=float).ravel()
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if a.size != n_angles(self.dims):
            raise ValueError(f"{a.size} angles given, dims {self.dims} need {n_angles(self.dims)}")

    def per_subsystem(self) -> list[np.ndarray]:
        out, i = [], 0
        for d in self.dims:
            k = len(ANGLE_RANGES[d])
            out.append(self.angles[i : i + k])
            i += k
        return out

    def ket(self) -> np.ndarray:
        return kron_all([k[0] for k in subsystem_kets(self.angles[None, :], self.dims)])


def subsystem_kets(angles: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    """Batched kets: ``angles`` has shape ``(B, n_angles)``; returns one ``(B, d)`` array per subsystem."""
    angles = np.asarray(angles, dtype=float)
    kets, i = [], 0
    for d in dims:
        if d == 2:
            alpha, beta = angles[:, i], angles[:, i + 1]
            ket = np.stack([np.cos(beta) + 0j, np.exp(1j * alpha) * np.sin(beta)], axis=1)
            i += 2
        elif d == 3:
            eta, xi, theta, phi = (angles[:, i + k] for k in range(4))
            st = np.sin(theta)
            ket = np.stack(
                [np.exp(1j * eta) * st * np.sin(phi), np.exp(1j * xi) * st * np.cos(phi), np.cos(theta) + 0j],
                axis=1,
            )
            i += 4
        else:
            _ranges(d)
        kets.append(ket)
    return kets


def canonical_angles(angles: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Map arbitrary angles to the declared rectangles, preserving the projector.

    Phases are taken mod 2pi and polar angles land in [0, pi/2]; the state is
    re-read from its ket, so global phases drop out exactly.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    out = np.empty_like(angles)
    i = 0
    for d, ket in zip(dims, subsystem_kets(angles, dims)):
        if d == 2:
            out[:, i + 1] = np.arctan2(np.abs(ket[:, 1]), np.abs(ket[:, 0]))
            out[:, i] = np.angle(ket[:, 1]) - np.angle(ket[:, 0])
            i += 2
        else:
            out[:, i + 2] = np.arctan2(np.hypot(np.abs(ket[:, 0]), np.abs(ket[:, 1])), np.abs(ket[:, 2]))
            out[:, i + 3] = np.arctan2(np.abs(ket[:, 0]), np.abs(ket[:, 1]))
            out[:, i] = np.angle(ket[:, 0]) - np.angle(ket[:, 2])
            out[:, i + 1] = np.angle(ket[:, 1]) - np.angle(ket[:, 2])
            i += 4
    mask = np.concatenate([PHASE_MASK[d] for d in dims])
    out[:, mask] = np.mod(out[:, mask], 2 * np.pi)
    return out


def sample_angles(dims: Sequence[int], n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` angle vectors uniform over the rectangles; prefix-stable in ``n`` for a fixed rng state."""
    lo = np.concatenate([[r[0] for r in _ranges(d)] for d in dims])
    hi = np.concatenate([[r[1] for r in _ranges(d)] for d in dims])
    return lo + rng.random((n, lo.size)) * (hi - lo)


def product_pure_state(params: ProductStateParams | Sequence[float], dims: Sequence[int] | None = None) -> DensityMatrix:
    if not isinstance(params, ProductStateParams):
        if dims is None:
            raise ValueError("dims required when params is a plain angle vector")
        params = ProductStateParams(params, dims)
    elif dims is not None and tuple(dims) != params.dims:
        raise ValueError(f"dims {tuple(dims)} do not match params dims {params.dims}")
    return _pure(params.ket(), params.dims)


# --- named families ---------------------------------------------------------


def _bell_ket(i: int, j: int) -> np.ndarray:
    psi00 = (basis_ket((2, 2), 0, 0) + basis_ket((2, 2), 1, 1)) / np.sqrt(2)
    op = np.kron(np.linalg.matrix_power(PAULI[3], i), np.linalg.matrix_power(PAULI[1], j))
    return op @ psi00


def bell_state(i: int, j: int) -> DensityMatrix:
    """|psi_ij> = sigma_z^i (x) sigma_x^j |psi_00>, |psi_00> = (|00> + |11>)/sqrt2."""
    if i not in (0, 1) or j not in (0, 1):
        raise ValueError(f"Bell indices must be bits, got ({i}, {j})")
    return _pure(_bell_ket(i, j), (2, 2))


def _check_range(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not lo <= value <= hi:
        raise ValueError(f"{name} = {value} outside [{lo}, {hi}]")
    return value


def werner(F: float) -> DensityMatrix:
    F = _check_range("F", F, 0.0, 1.0)
    m = F * bell_state(0, 0).matrix
    for ij in ((1, 0), (0, 1), (1, 1)):
        m = m + (1 - F) / 3 * bell_state(*ij).matrix
    return DensityMatrix(m, (2, 2))


def ghz_ket() -> np.ndarray:
    dims = (2, 2, 2)
    return (basis_ket(dims, 0, 0, 0) + basis_ket(dims, 1, 1, 1)) / np.sqrt(2)


def w_ket() -> np.ndarray:
    dims = (2, 2, 2)
    return (basis_ket(dims, 1, 0, 0) + basis_ket(dims, 0, 1, 0) + basis_ket(dims, 0, 0, 1)) / np.sqrt(3)


def ghz_w_mixture(q: float) -> DensityMatrix:
    q = _check_range("q", q, 0.0, 1.0)
    g, w = ghz_ket(), w_ket()
    return DensityMatrix(q * np.outer(g, g.conj()) + (1 - q) * np.outer(w, w.conj()), (2, 2, 2))


def two_qutrit_alpha(alpha: float) -> DensityMatrix:
    """(2/7)|phi+><phi+| + (alpha/7) sigma+ + ((5 - alpha)/7) sigma-, 2 <= alpha <= 5."""
    alpha = _check_range("alpha", alpha, 2.0, 5.0)
    dims = (3, 3)
    phi = sum(basis_ket(dims, k, k) for k in range(3)) / np.sqrt(3)

    def diag_proj(pairs):
        return sum(np.outer(basis_ket(dims, *p), basis_ket(dims, *p)) for p in pairs) / 3

    sigma_plus = diag_proj([(0, 1), (1, 2), (2, 0)])
    sigma_minus = diag_proj([(1, 0), (2, 1), (0, 2)])
    m = 2 / 7 * np.outer(phi, phi.conj()) + alpha / 7 * sigma_plus + (5 - alpha) / 7 * sigma_minus
    return DensityMatrix(m, dims)


def maximally_mixed(dims: Sequence[int]) -> DensityMatrix:
    n = int(np.prod(dims))
    return DensityMatrix(np.eye(n) / n, dims)


def random_separable(dims: Sequence[int], k: int | None = None, rng: np.random.Generator | int | None = None) -> DensityMatrix:
    """Dirichlet(1,...,1)-weighted mixture of ``k`` random pure product states.

    ``k`` defaults to ``(prod dims)**2``.
    """
    dims = tuple(int(d) for d in dims)
    if k is None:
        k = int(np.prod(dims)) ** 2
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(rng)
    weights = rng.dirichlet(np.ones(k))
    kets = subsystem_kets(sample_angles(dims, k, rng), dims)
    full = kets[0]
    for ket in kets[1:]:
        full = np.einsum("bi,bj->bij", full, ket).reshape(k, -1)
    m = np.einsum("b,bi,bj->ij", weights, full, full.conj())
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real, dims)


def random_local_unitaries(dims: Sequence[int], rng: np.random.Generator | int | None = None) -> list[np.ndarray]:
    from scipy.stats import unitary_group

    rng = np.random.default_rng(rng)
    return [unitary_group.rvs(int(d), random_state=rng) for d in dims]


def apply_local_unitary(rho: DensityMatrix, unitaries: Sequence[np.ndarray]) -> DensityMatrix:
    """(U_1 x ... x U_n) rho (U_1 x ... x U_n)^dagger."""
    if len(unitaries) != len(rho.dims):
        raise ValueError(f"{len(unitaries)} unitaries for {len(rho.dims)} subsystems")
    for u, d in zip(unitaries, rho.dims):
        u = np.asarray(u)
        if u.shape != (d, d):
            raise ValueError(f"unitary of shape {u.shape} on a subsystem of dimension {d}")
        if np.max(np.abs(u.conj().T @ u - np.eye(d))) > 1e-10:
            raise ValueError("local factor is not unitary within 1e-10")
    U = kron_all(unitaries)
    m = U @ rho.matrix @ U.conj().T
    return DensityMatrix((m + m.conj().T) / 2, rho.dims)
