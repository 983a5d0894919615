"""Candidate operators Z on the unit HS sphere and witnesses W = Z - mu I."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from few.qops import assemble_observable, basis_weights, hs_norm, is_hermitian, product_basis, tau_shape
from few.states import DensityMatrix, matrix_from_json, matrix_to_json

TOL_NEG = 1e-6
TOL_SEP = 1e-6


class ZeroOperatorError(ValueError):
    pass


def tau_norm_sq(tau: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Squared HS norm of assembled tensors, computed from coefficients (last axes = tau shape)."""
    w = np.ones(())
    for d in dims:
        w = np.multiply.outer(w, basis_weights(d))
    tau = np.asarray(tau)
    axes = tuple(range(tau.ndim - len(dims), tau.ndim))
    return np.sum(tau**2 * w, axis=axes)


@dataclass(frozen=True, eq=False)
class TracelessObservable:
    tau: np.ndarray
    dims: tuple[int, ...]
    normalized: bool = False
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        tau = np.array(self.tau, dtype=float).reshape(tau_shape(self.dims))
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        m = assemble_observable(tau, self.dims)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.normalized and abs(self.norm() - 1) > 1e-10:
            raise ValueError(f"flagged normalized but hs_norm = {self.norm():.12g}")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dims: Sequence[int], tol: float = 1e-10) -> "TracelessObservable":
        from few.qops import project_observable

        matrix = np.asarray(matrix, dtype=complex)
        if not is_hermitian(matrix, tol):
            raise ValueError("operator is not Hermitian")
        if abs(np.trace(matrix)) > tol:
            raise ValueError(f"operator is not traceless (Tr = {np.trace(matrix):.3g})")
        tau = project_observable(matrix, dims)
        tau.flat[0] = 0.0
        return cls(tau, dims, normalized=abs(hs_norm(matrix) - 1) <= 1e-10)

    def norm(self) -> float:
        return float(np.sqrt(tau_norm_sq(self.tau, self.dims)))

    def scaled(self, c: float) -> "TracelessObservable":
        return TracelessObservable(self.tau * c, self.dims)


@dataclass(frozen=True, eq=False)
class Witness:
    matrix: np.ndarray
    mu: float
    source: TracelessObservable | None = None
    dims: tuple[int, ...] | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        dims = self.dims if self.dims is not None else (self.source.dims if self.source is not None else None)
        object.__setattr__(self, "dims", tuple(int(d) for d in dims) if dims is not None else None)
        if not is_hermitian(m, 1e-12):
            raise ValueError("witness matrix is not Hermitian")

    def to_json(self) -> dict:
        out = matrix_to_json(self.matrix, self.dims)
        out["mu"] = float(self.mu)
        out["metadata"] = dict(self.metadata)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "Witness":
        matrix, dims = matrix_from_json(obj)
        return cls(matrix, float(obj.get("mu", 0.0)), dims=dims, metadata=dict(obj.get("metadata", {})))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "Witness":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def normalize(z: TracelessObservable) -> TracelessObservable:
    n = z.norm()
    if n < 1e-12:
        raise ZeroOperatorError("cannot normalize an operator with hs_norm < 1e-12")
    return TracelessObservable(z.tau / n, z.dims, normalized=True)


def expectation(z, rho: DensityMatrix | np.ndarray) -> float:
    """real(Tr(Z rho)) for an observable, witness or raw matrix."""
    a = np.asarray(getattr(z, "matrix", z))
    r = np.asarray(getattr(rho, "matrix", rho))
    if a.shape != r.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {r.shape}")
    val = np.einsum("ij,ji->", a, r)
    if abs(val.imag) > 1e-10:
        raise ValueError(f"expectation has imaginary residue {val.imag:.3g}")
    return float(val.real)


def extract_witness(z: TracelessObservable, mu: float, metadata: dict | None = None) -> Witness:
    """W = Z - mu I."""
    m = z.matrix - mu * np.eye(z.matrix.shape[0])
    return Witness(m, float(mu), source=z, metadata=metadata or {})


@dataclass
class VerificationReport:
    target_value: float
    separable_min: float
    passed: bool
    budget: int
    reason: str
    argmin: np.ndarray | None = None

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: Tr(W rho) = {self.target_value:.6g}; min Tr(W rho_s) over {self.budget} refined product states "
            f"= {self.separable_min:.6g} ({self.reason})"
        )


def verify_witness(
    w: Witness,
    rho: DensityMatrix,
    budget: int,
    rng=None,
    inner=None,
    chunk: int = 20_000,
) -> VerificationReport:
    """Check both witness conditions: negative on ``rho``, no product-state violation found.

    Condition (b) is heuristic: ``budget`` random product states are each refined
    by the inner quasi-Newton descent and the minimum is reported. A pass means
    no violation was found within that budget.
    """
    from few.innermin import InnerMinConfig, ProductObjective, bfgs_batch, observable_coeffs
    from few.states import canonical_angles, sample_angles

    if budget < 1:
        raise ValueError("verification budget must be >= 1")
    dims = w.dims or rho.dims
    if tuple(dims) != tuple(rho.dims):
        raise ValueError(f"witness dims {tuple(dims)} do not match state dims {rho.dims}")
    rng = np.random.default_rng(rng)
    inner = inner or InnerMinConfig(n_probe=1, n_refine=1)
    target = expectation(w, rho)
    coeffs = observable_coeffs(w.matrix, dims)[None, :]

    fun = ProductObjective(coeffs, dims)

    # Draw every start up front so a larger budget extends the same prefix.
    starts = sample_angles(dims, budget, rng)
    best, best_x = np.inf, None
    for i in range(0, budget, chunk):
        x0 = starts[i : i + chunk]
        x, f = bfgs_batch(fun, x0, np.zeros(len(x0), dtype=int), inner)
        f0 = fun(x0, np.zeros(len(x0), dtype=int))
        f = np.minimum(f, f0)
        j = int(np.argmin(f))
        if f[j] < best:
            best, best_x = float(f[j]), x[j]

    if target >= -TOL_NEG:
        passed, reason = False, "nonnegative on target"
    elif best < -TOL_SEP:
        passed, reason = False, "negative on a product state"
    else:
        passed, reason = True, "no violation found within budget"
    argmin = canonical_angles(best_x[None, :], dims)[0] if best_x is not None else None
    return VerificationReport(target, best, passed, int(budget), reason, argmin)


def reduction_witness(i: int = 0, j: int = 0) -> Witness:
    """I - 2|psi_ij><psi_ij| for a two-qubit Bell state."""
    from few.states import bell_state

    return Witness(np.eye(4) - 2 * bell_state(i, j).matrix, 0.0, dims=(2, 2), metadata={"name": f"reduction_bell_{i}{j}"})


def product_basis_size(dims: Sequence[int]) -> int:
    return product_basis(dims).shape[0]
