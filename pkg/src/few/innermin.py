"""Minimum of Tr(Z rho_s) over pure product states.

Multi-start quasi-Newton: ``n_probe`` random product states are scored, the
``n_refine`` lowest seed BFGS descents (central-difference gradients, Armijo
backtracking). All descents of a batch run in lockstep on numpy arrays, which
is how the GA evaluates a whole population at once.

Expectations are computed through generalized Bloch vectors: for
``Z = sum tau[i1..in] l_i1 x ... x l_in`` and ``rho_s = rho_1 x ... x rho_n``,
``Tr(Z rho_s) = sum tau[i1..in] r1[i1] ... rn[in]`` with ``rk[i] = Tr(l_i rho_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from few.qops import product_basis, project_observable, su_d_basis, tau_shape
from few.states import ProductStateParams, canonical_angles, n_angles, sample_angles, subsystem_kets

ARMIJO_C = 1e-4
MAX_HALVINGS = 40
# An accepted step that improves f by less than this (relative) ends the run.
STALL_TOL = 1e-14
CHUNK = 200_000

# Per-family defaults (n_probe, n_refine).
FAMILY_DEFAULTS = {(2, 2): (400, 5), (2, 2, 2): (500, 8), (3, 3): (800, 10)}


@dataclass(frozen=True)
class InnerMinConfig:
    n_probe: int = 400
    n_refine: int = 5
    max_iters: int = 200
    grad_step: float = 1e-5
    conv_tol: float = 1e-8

    def __post_init__(self):
        if self.n_probe < 1 or self.n_refine < 1 or self.max_iters < 1:
            raise ValueError("n_probe, n_refine and max_iters must be >= 1")
        if self.n_refine > self.n_probe:
            raise ValueError(f"n_refine ({self.n_refine}) exceeds n_probe ({self.n_probe})")
        if not 0 < self.grad_step <= 1e-2:
            raise ValueError(f"grad_step must lie in (0, 1e-2], got {self.grad_step}")
        if self.conv_tol <= 0:
            raise ValueError("conv_tol must be positive")

    @classmethod
    def for_dims(cls, dims: Sequence[int], **overrides) -> "InnerMinConfig":
        n_probe, n_refine = FAMILY_DEFAULTS.get(tuple(dims), (100 * n_angles(dims), n_angles(dims)))
        return cls(**{"n_probe": n_probe, "n_refine": n_refine, **overrides})


@dataclass
class InnerMinResult:
    mu: float
    argmin: ProductStateParams
    probes_used: int
    refinements: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class BatchInnerMin:
    """Per-row results of :func:`min_sep_expectation_batch`."""

    mu: np.ndarray  # (M,)
    argmin: np.ndarray  # (M, n_angles), canonical ranges
    start_values: np.ndarray  # (M, n_refine)
    final_values: np.ndarray  # (M, n_refine)
    probe_min: np.ndarray  # (M,)


@lru_cache(maxsize=None)
def _bloch_layout(d: int):
    """Column layout of the generalized Gell-Mann ordering used by :func:`few.qops.su_d_basis`."""
    sym_cols, anti_cols, pairs, diag = [], [], [], []
    col = 1
    for k in range(1, d):
        for j in range(k):
            pairs.append((j, k))
            sym_cols.append(col)
            anti_cols.append(col + 1)
            col += 2
        weights = np.zeros(d)
        weights[:k] = 1.0
        weights[k] = -k
        diag.append((col, np.sqrt(2.0 / (k * (k + 1))) * weights))
        col += 1
    j, k = np.array(pairs).T
    return np.array(sym_cols), np.array(anti_cols), j, k, [c for c, _ in diag], np.stack([w for _, w in diag], axis=1)


def _amplitudes(angles: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Real amplitudes and phases of the parameterized subsystem ket."""
    if d == 2:
        alpha, beta = angles[:, 0], angles[:, 1]
        amp = np.stack([np.cos(beta), np.sin(beta)], axis=1)
        phase = np.stack([np.zeros_like(alpha), alpha], axis=1)
    elif d == 3:
        eta, xi, theta, phi = angles.T
        st = np.sin(theta)
        amp = np.stack([st * np.sin(phi), st * np.cos(phi), np.cos(theta)], axis=1)
        phase = np.stack([eta, xi, np.zeros_like(eta)], axis=1)
    else:
        raise ValueError(f"product-state parameterization supports subsystem dims 2 and 3, got {d}")
    return amp, phase


def _bloch_single(angles: np.ndarray, d: int) -> np.ndarray:
    """r[a] = Tr(l_a |psi><psi|) for the subsystem ket, in real arithmetic."""
    amp, phase = _amplitudes(angles, d)
    sym, anti, j, k, diag_cols, diag_w = _bloch_layout(d)
    r = np.empty((len(amp), d * d))
    r[:, 0] = np.sum(amp**2, axis=1)
    prod = 2 * amp[:, j] * amp[:, k]
    dphi = phase[:, j] - phase[:, k]
    r[:, sym] = prod * np.cos(dphi)
    r[:, anti] = -prod * np.sin(dphi)
    r[:, diag_cols] = amp**2 @ diag_w
    return r


def bloch_vectors(angles: np.ndarray, dims: Sequence[int]) -> list[np.ndarray]:
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    out, i = [], 0
    for d in dims:
        m = 2 if d == 2 else 4
        out.append(_bloch_single(angles[:, i : i + m], d))
        i += m
    return out


def product_expectations(coeffs: np.ndarray, angles: np.ndarray, dims: Sequence[int], rows: np.ndarray | None = None) -> np.ndarray:
    """Tr(Z_row rho_s(angles)) for each angle vector.

    ``coeffs`` is ``(M, prod d**2)`` (flattened coefficient tensors, identity
    entry allowed); ``rows`` picks the tensor for each angle row (default: all 0).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    angles = np.atleast_2d(angles)
    if rows is None:
        t = np.broadcast_to(coeffs[0], (len(angles), coeffs.shape[1]))
    else:
        t = coeffs[rows]
    blochs = bloch_vectors(angles, dims)
    for r in blochs:
        t = np.einsum("bar,ba->br", t.reshape(len(angles), r.shape[1], -1), r)
    return t[:, 0]


class ProductObjective:
    """``Tr(Z_row rho_s(x))`` with a central-difference gradient that reuses subsystem structure.

    Perturbing an angle of subsystem ``k`` only changes that subsystem's Bloch
    vector, so each perturbed value is a dot product with the contraction of
    the coefficient tensor against the other, unperturbed subsystems.
    """

    def __init__(self, coeffs: np.ndarray, dims: Sequence[int]):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.dims = tuple(dims)
        self.shape = tuple(d * d for d in self.dims)
        self.slices = []
        i = 0
        for d in self.dims:
            k = 2 if d == 2 else 4
            self.slices.append(slice(i, i + k))
            i += k
        n = len(self.dims)
        letters = "cdefghijkl"[:n]
        self._env_subscripts = [
            f"b{letters}," + ",".join(f"b{letters[j]}" for j in range(n) if j != k) + f"->b{letters[k]}" for k in range(n)
        ]

    def __call__(self, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
        if len(x) <= CHUNK:
            return product_expectations(self.coeffs, x, self.dims, rows)
        return np.concatenate(
            [product_expectations(self.coeffs, x[i : i + CHUNK], self.dims, rows[i : i + CHUNK]) for i in range(0, len(x), CHUNK)]
        )

    def gradient(self, x: np.ndarray, rows: np.ndarray, h: float) -> np.ndarray:
        b, p = x.shape
        t = self.coeffs[rows].reshape((b,) + self.shape)
        blochs = bloch_vectors(x, self.dims)
        g = np.empty((b, p))
        for k, (d, sl) in enumerate(zip(self.dims, self.slices)):
            others = [blochs[j] for j in range(len(self.dims)) if j != k]
            env = np.einsum(self._env_subscripts[k], t, *others) if others else t
            xk = x[:, sl]
            m = xk.shape[1]
            steps = np.concatenate([np.eye(m), -np.eye(m)]) * h
            pts = (xk[:, None, :] + steps[None]).reshape(b * 2 * m, m)
            r = _bloch_single(pts, d).reshape(b, 2 * m, -1)
            v = np.einsum("bsa,ba->bs", r, env)
            g[:, sl] = (v[:, :m] - v[:, m:]) / (2 * h)
        return g


def _objective(coeffs, dims):
    return ProductObjective(coeffs, dims)


def _fd_gradient(fun, x, rows, h):
    if isinstance(fun, ProductObjective):
        return fun.gradient(x, rows, h)
    a, p = x.shape
    steps = np.concatenate([np.eye(p), -np.eye(p)]) * h
    pts = (x[:, None, :] + steps[None]).reshape(a * 2 * p, p)
    v = fun(pts, np.repeat(rows, 2 * p)).reshape(a, 2 * p)
    return (v[:, :p] - v[:, p:]) / (2 * h)


def bfgs_batch(fun, x0: np.ndarray, rows: np.ndarray, cfg: InnerMinConfig, history: list | None = None):
    """Lockstep BFGS over independent problems ``fun(x, rows)``.

    Each run keeps its own inverse Hessian and step length; accepted steps
    satisfy the Armijo condition, so every run's objective is non-increasing.
    Returns ``(x, f)``. If ``history`` is a list, per-iteration objective arrays are appended.
    """
    x = np.array(x0, dtype=float)
    a, p = x.shape
    rows = np.asarray(rows)
    f = fun(x, rows)
    g = _fd_gradient(fun, x, rows, cfg.grad_step)
    eye = np.eye(p)
    H = np.broadcast_to(eye, (a, p, p)).copy()
    fresh = np.ones(a, dtype=bool)
    active = np.linalg.norm(g, axis=1) > cfg.conv_tol
    if history is not None:
        history.append(f.copy())
    for _ in range(cfg.max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        gi = g[idx]
        d = -(H[idx] @ gi[:, :, None])[:, :, 0]
        slope = np.einsum("ai,ai->a", d, gi)
        bad = slope >= 0
        if bad.any():
            d[bad] = -gi[bad]
            H[idx[bad]] = eye
            fresh[idx[bad]] = True
            slope[bad] = -np.einsum("ai,ai->a", gi[bad], gi[bad])

        t = np.ones(idx.size)
        x_new = np.empty((idx.size, p))
        f_new = np.empty(idx.size)
        pending = np.arange(idx.size)
        for _ in range(MAX_HALVINGS):
            cand = x[idx[pending]] + t[pending, None] * d[pending]
            fc = fun(cand, rows[idx[pending]])
            ok = fc <= f[idx[pending]] + ARMIJO_C * t[pending] * slope[pending]
            x_new[pending[ok]] = cand[ok]
            f_new[pending[ok]] = fc[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            t[pending] *= 0.5
        # Line search exhausted: numerically converged, stop that run.
        active[idx[pending]] = False
        acc = np.setdiff1d(np.arange(idx.size), pending, assume_unique=True)
        if acc.size == 0:
            continue
        ia = idx[acc]
        g_new = _fd_gradient(fun, x_new[acc], rows[ia], cfg.grad_step)
        s = x_new[acc] - x[ia]
        y = g_new - g[ia]
        sy = np.einsum("ai,ai->a", s, y)
        upd = sy > 1e-14
        if upd.any():
            iu = ia[upd]
            su, yu, syu = s[upd], y[upd], sy[upd]
            # scale the initial inverse Hessian after the first step
            first = fresh[iu]
            if first.any():
                scale = syu[first] / np.einsum("ai,ai->a", yu[first], yu[first])
                H[iu[first]] = eye * scale[:, None, None]
                fresh[iu[first]] = False
            r = 1.0 / syu
            V = eye - r[:, None, None] * su[:, :, None] * yu[:, None, :]
            H[iu] = V @ H[iu] @ V.transpose(0, 2, 1) + r[:, None, None] * su[:, :, None] * su[:, None, :]
        stalled = f[ia] - f_new[acc] <= STALL_TOL * np.maximum(1.0, np.abs(f[ia]))
        x[ia] = x_new[acc]
        f[ia] = f_new[acc]
        g[ia] = g_new
        active[ia] = (np.linalg.norm(g_new, axis=1) > cfg.conv_tol) & ~stalled
        if history is not None:
            history.append(f.copy())
    return x, f


def min_sep_expectation_batch(
    coeffs: np.ndarray, dims: Sequence[int], cfg: InnerMinConfig, rngs: Sequence[np.random.Generator]
) -> BatchInnerMin:
    """Inner minimization for ``M`` operators at once; row ``m`` draws its probes from ``rngs[m]``."""
    dims = tuple(int(d) for d in dims)
    coeffs = np.asarray(coeffs, dtype=float).reshape(len(rngs), -1)
    m = len(rngs)
    p = n_angles(dims)
    fun = _objective(coeffs, dims)

    probes = np.stack([sample_angles(dims, cfg.n_probe, r) for r in rngs])  # (M, n_probe, p)
    values = fun(probes.reshape(-1, p), np.repeat(np.arange(m), cfg.n_probe)).reshape(m, cfg.n_probe)
    order = np.argsort(values, axis=1, kind="stable")[:, : cfg.n_refine]
    starts = np.take_along_axis(probes, order[:, :, None], axis=1).reshape(-1, p)
    start_values = np.take_along_axis(values, order, axis=1)

    x, f = bfgs_batch(fun, starts, np.repeat(np.arange(m), cfg.n_refine), cfg)
    final = f.reshape(m, cfg.n_refine)
    best = np.argmin(final, axis=1)
    argmin = x.reshape(m, cfg.n_refine, p)[np.arange(m), best]
    return BatchInnerMin(
        mu=final[np.arange(m), best],
        argmin=canonical_angles(argmin, dims),
        start_values=start_values,
        final_values=final,
        probe_min=values.min(axis=1),
    )


def observable_coeffs(z, dims: Sequence[int]) -> np.ndarray:
    """Flattened coefficient tensor for a TracelessObservable, Witness or raw Hermitian matrix."""
    tau = getattr(z, "tau", None)
    if tau is not None and getattr(z, "mu", None) is None:
        return np.asarray(tau, dtype=float).ravel()
    matrix = getattr(z, "matrix", z)
    return project_observable(matrix, dims).ravel()


def min_sep_expectation(z, dims: Sequence[int], cfg: InnerMinConfig | None = None, rng=None) -> InnerMinResult:
    """f1 = min over pure product states of Tr(Z rho_s)."""
    dims = tuple(int(d) for d in dims)
    cfg = cfg or InnerMinConfig.for_dims(dims)
    rng = np.random.default_rng(rng)
    res = min_sep_expectation_batch(observable_coeffs(z, dims)[None, :], dims, cfg, [rng])
    return InnerMinResult(
        mu=float(res.mu[0]),
        argmin=ProductStateParams(res.argmin[0], dims),
        probes_used=cfg.n_probe,
        refinements=[(float(s), float(e)) for s, e in zip(res.start_values[0], res.final_values[0])],
    )


# --- brute-force oracle -----------------------------------------------------


def _grid_kets(d: int, resolution: int) -> np.ndarray:
    from few.states import ANGLE_RANGES

    axes = [np.linspace(lo, hi, resolution) for lo, hi in ANGLE_RANGES[d]]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    return subsystem_kets(mesh, (d,))[0]


def grid_oracle(z, dims: Sequence[int], resolution: int, max_evals: float = 1e8) -> float:
    """Exhaustive minimum of <psi|Z|psi> over a regular angle grid of product kets.

    Works on the raw matrix (not the coefficient expansion), contracting one
    subsystem at a time. Each angle axis has ``resolution`` points including
    both endpoints, so the result is an upper bound on the true minimum.
    """
    dims = tuple(int(d) for d in dims)
    total = float(resolution) ** n_angles(dims)
    if total > max_evals:
        raise ValueError(f"grid of {total:.3g} points exceeds the {max_evals:.3g} evaluation guard")
    matrix = np.asarray(getattr(z, "matrix", z), dtype=complex)
    n = len(dims)
    grids = [_grid_kets(d, resolution) for d in dims]
    tensor = matrix.reshape(dims + dims)
    # Move to (d1, d1', d2, d2', ...) pairing bra and ket index per subsystem.
    tensor = tensor.transpose([ax for k in range(n) for ax in (k, n + k)])

    def contract(t, k):
        # t: (G, d_k, d_k', rest...) -> (G * G_k, rest...)
        kets = grids[k]
        d = dims[k]
        proj = (kets.conj()[:, :, None] * kets[:, None, :]).reshape(len(kets), d * d)
        g = t.shape[0]
        flat = t.reshape(g, d * d, -1)
        out = np.einsum("kx,gxr->gkr", proj, flat)
        return out.reshape((g * len(kets),) + t.shape[3:])

    best = np.inf
    first = grids[0]
    d0 = dims[0]
    proj0 = (first.conj()[:, :, None] * first[:, None, :]).reshape(len(first), d0 * d0)
    rest_size = int(np.prod([len(g) for g in grids[1:]]))
    chunk = max(1, int(2_000_000 // max(rest_size, 1)))
    base = tensor.reshape(d0 * d0, -1)
    for i in range(0, len(first), chunk):
        t = (proj0[i : i + chunk] @ base).reshape((-1,) + tensor.shape[2:])
        for k in range(1, n):
            t = contract(t, k)
        best = min(best, float(np.min(t.real)))
    return best


__all__ = [
    "InnerMinConfig",
    "InnerMinResult",
    "bfgs_batch",
    "grid_oracle",
    "min_sep_expectation",
    "min_sep_expectation_batch",
    "product_expectations",
    "tau_shape",
    "product_basis",
]
