"""Cutting-plane refinement of a candidate Z.

The fitness F(tau) = min_s tau.b_s - tau.c is a minimum of linear functions of
tau (``b_s`` = product-basis coefficients of a product state, ``c`` those of
rho), so it is concave and positively homogeneous. Against a finite set S of
product states, the best unit-norm tau points from c to the nearest point of
conv{b_s}, and that distance bounds E(rho) from above because conv S lies
inside the separable set. Each round solves the min-norm problem, minimizes
over product states for the new tau, and adds the argmin to S. The lower bound
is the true fitness of the best tau seen, so it is only as good as the inner
minimizer, which verification checks afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
from scipy.optimize import nnls

from few.innermin import InnerMinConfig, bloch_vectors, min_sep_expectation_batch
from few.qops import basis_weights


def coefficient_weights(dims: Sequence[int]) -> np.ndarray:
    """Tr(B_k^2) for the flattened product basis, so that ||Z||^2 = sum w tau^2."""
    return reduce(np.multiply.outer, [basis_weights(d) for d in dims]).ravel()


def product_coeffs(angles: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Tr(B_k rho_s) for pure product states given by angle rows; shape (B, prod d**2)."""
    rs = bloch_vectors(angles, dims)
    return reduce(lambda a, b: (a[:, :, None] * b[:, None, :]).reshape(len(a), -1), rs)


def min_norm_point(v: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Point of conv{rows of v} closest to the origin in the norm sum(x^2 / w).

    Solved as non-negative least squares with a heavily weighted sum-to-one row.
    Any simplex weight vector gives a valid upper bound, so the penalty's
    small residual only loosens the bound slightly.
    """
    a = v.T / np.sqrt(w)[:, None]
    big = 1e3 * max(1.0, float(np.abs(a).max()))
    a2 = np.vstack([a, np.full(a.shape[1], big)])
    b = np.zeros(len(a2))
    b[-1] = big
    p, _ = nnls(a2, b, maxiter=50 * a2.shape[1])
    p = p / p.sum()
    return v.T @ p, p


@dataclass
class RefineResult:
    tau: np.ndarray  # flattened, unit HS norm
    mu: float
    fitness: float
    upper_bound: float
    iterations: int
    history: list[tuple[float, float]] = field(default_factory=list)  # (fitness, upper bound)


def refine_cutting_plane(
    c: np.ndarray,
    dims: Sequence[int],
    tau: np.ndarray,
    mu: float,
    cuts: np.ndarray,
    inner: InnerMinConfig,
    iters: int,
    rng: np.random.Generator,
    tol: float = 1e-7,
) -> RefineResult:
    """Improve (tau, mu) for the state with coefficients ``c``.

    ``cuts`` holds product-state coefficient rows already known (for instance
    the argmins behind ``mu``); ``tau`` must have unit HS norm.
    """
    dims = tuple(dims)
    w = coefficient_weights(dims)
    best_tau, best_mu = np.asarray(tau, dtype=float).ravel().copy(), float(mu)
    best = best_mu - best_tau @ c
    v_rows = [row - c for row in np.atleast_2d(cuts)]
    upper, history, it = np.inf, [], 0
    for it in range(1, iters + 1):
        v, _ = min_norm_point(np.asarray(v_rows), w)
        upper = min(upper, float(np.sqrt(np.sum(v**2 / w))))
        history.append((best, upper))
        if upper - best <= tol or upper <= tol:
            break
        t = v / w
        t[0] = 0.0
        t /= np.sqrt(np.sum(t**2 * w))
        res = min_sep_expectation_batch(t[None, :], dims, inner, [rng])
        f = float(res.mu[0] - t @ c)
        if f > best:
            best, best_tau, best_mu = f, t, float(res.mu[0])
        v_rows.append(product_coeffs(res.argmin, dims)[0] - c)
    return RefineResult(best_tau, best_mu, best, upper, it, history)
