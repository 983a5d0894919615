"""Binary genetic algorithm over coefficient tensors, maximizing F = f1 - f2.

Each non-identity coefficient is a 15-bit unsigned group (MSB first) mapped
linearly onto ``[-tau_bound, tau_bound]``. Decoded tensors are projected onto
the unit HS sphere before scoring, so ``tau_bound`` only sets the lattice.

Fitness of a chromosome is a pure function of its bits and the master seed:
the inner minimizer's probe stream is seeded from both. That makes the
fitness cache transparent and the run independent of evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from few.innermin import InnerMinConfig, min_sep_expectation_batch
from few.qops import product_basis
from few.states import DensityMatrix
from few.witness import tau_norm_sq

BITS = 15
LEVELS = 2**BITS - 1


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 300
    generations: int = 300
    p_crossover: float = 0.7
    p_mutation: float = 0.007
    tournament_size: int = 4
    elite_count: int = 2
    tau_bound: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p_crossover <= 1 or not 0 <= self.p_mutation <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if not 0 <= self.elite_count <= self.pop_size:
            raise ValueError("elite_count must lie in [0, pop_size]")
        if self.tournament_size < 2:
            raise ValueError("tournament_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if self.tau_bound <= 0:
            raise ValueError("tau_bound must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    @classmethod
    def for_dims(cls, dims: Sequence[int], **overrides) -> "GaConfig":
        """Population 20x the coefficient count for two qubits, 10x otherwise."""
        n = n_coefficients(dims)
        factor = 20 if tuple(dims) == (2, 2) else 10
        return cls(**{"pop_size": factor * n, **overrides})


def n_coefficients(dims: Sequence[int]) -> int:
    return int(np.prod([d * d for d in dims])) - 1


def chromosome_length(dims: Sequence[int]) -> int:
    return BITS * n_coefficients(dims)


def _check_length(bits: np.ndarray, dims) -> None:
    if bits.shape[-1] != chromosome_length(dims):
        raise ValueError(f"chromosome length {bits.shape[-1]} != {chromosome_length(dims)} for dims {tuple(dims)}")


_WEIGHTS = 1 << np.arange(BITS - 1, -1, -1)


def decode(bits: np.ndarray, cfg: GaConfig, dims: Sequence[int]) -> np.ndarray:
    """Bits ``(..., L)`` to flattened coefficient tensors ``(..., prod d**2)`` with entry 0 fixed at 0."""
    bits = np.asarray(bits, dtype=np.int64)
    _check_length(bits, dims)
    groups = bits.reshape(bits.shape[:-1] + (-1, BITS)) @ _WEIGHTS
    tau = -cfg.tau_bound + groups / LEVELS * (2 * cfg.tau_bound)
    zero = np.zeros(tau.shape[:-1] + (1,))
    return np.concatenate([zero, tau], axis=-1)


def encode(tau: np.ndarray, cfg: GaConfig, dims: Sequence[int]) -> np.ndarray:
    """Nearest lattice chromosome for flattened tensors (entry 0 ignored)."""
    tau = np.asarray(tau, dtype=float)[..., 1:]
    g = np.rint((tau + cfg.tau_bound) / (2 * cfg.tau_bound) * LEVELS).astype(np.int64)
    g = np.clip(g, 0, LEVELS)
    bits = (g[..., None] >> np.arange(BITS - 1, -1, -1)) & 1
    return bits.reshape(tau.shape[:-1] + (-1,)).astype(np.uint8)


def chromosome_digest(bits: np.ndarray) -> bytes:
    return hashlib.blake2b(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes(), digest_size=8).digest()


def chromosome_rng(bits: np.ndarray, seed: int) -> np.random.Generator:
    words = np.frombuffer(chromosome_digest(bits), dtype=np.uint32)
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, words)]))


def state_coeffs(rho: DensityMatrix) -> np.ndarray:
    """Re Tr(B_k rho) for each product basis element B_k (flattened)."""
    return np.einsum("kij,ji->k", product_basis(rho.dims), rho.matrix).real


@dataclass
class FitnessBatch:
    fitness: np.ndarray
    mu: np.ndarray
    f2: np.ndarray
    tau: np.ndarray  # normalized, flattened


def fitness_batch(bits: np.ndarray, rho: DensityMatrix, cfg: GaConfig, inner: InnerMinConfig) -> FitnessBatch:
    """F = min_s Tr(Z rho_s) - Tr(Z rho) for each chromosome row, Z decoded and normalized.

    Rows whose decoded operator has HS norm below 1e-12 score ``-inf``.
    """
    bits = np.atleast_2d(bits)
    dims = rho.dims
    tau = decode(bits, cfg, dims)
    norms = np.sqrt(tau_norm_sq(tau.reshape((len(tau),) + tuple(d * d for d in dims)), dims))
    ok = norms >= 1e-12
    tau_n = np.where(ok[:, None], tau / np.where(ok, norms, 1.0)[:, None], 0.0)
    f2 = tau_n @ state_coeffs(rho)
    mu = np.full(len(bits), np.nan)
    fit = np.full(len(bits), -np.inf)
    idx = np.flatnonzero(ok)
    if idx.size:
        res = min_sep_expectation_batch(tau_n[idx], dims, inner, [chromosome_rng(bits[i], cfg.seed) for i in idx])
        mu[idx] = res.mu
        fit[idx] = res.mu - f2[idx]
    return FitnessBatch(fit, mu, f2, tau_n)


def fitness(bits: np.ndarray, rho: DensityMatrix, cfg: GaConfig, inner: InnerMinConfig) -> float:
    return float(fitness_batch(np.asarray(bits)[None, :], rho, cfg, inner).fitness[0])


def two_point_crossover(a: np.ndarray, b: np.ndarray, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Swap the segment ``[i, j)`` between two parents."""
    c, d = a.copy(), b.copy()
    c[i:j], d[i:j] = b[i:j], a[i:j]
    return c, d


def tournament(fit: np.ndarray, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` winners, each the fittest of ``size`` uniform draws (first drawn wins ties)."""
    entrants = rng.integers(0, len(fit), size=(k, size))
    return entrants[np.arange(k), np.argmax(fit[entrants], axis=1)]


def mutate(pop: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    return pop ^ (rng.random(pop.shape) < p).astype(pop.dtype)


def evolve(pop: np.ndarray, fit: np.ndarray, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray:
    """Next generation: elites verbatim, then tournament parents, two-point crossover, bit flips."""
    n, length = pop.shape
    if n != cfg.pop_size:
        raise ValueError(f"population has {n} rows, config says {cfg.pop_size}")
    elite = np.argsort(-fit, kind="stable")[: cfg.elite_count]
    children = [pop[elite]]
    need = n - cfg.elite_count
    made = 0
    while made < need:
        pa, pb = tournament(fit, 2, cfg.tournament_size, rng)
        a, b = pop[pa], pop[pb]
        if rng.random() < cfg.p_crossover:
            i, j = np.sort(rng.choice(np.arange(1, length), size=2, replace=False))
            a, b = two_point_crossover(a, b, i, j)
        pair = mutate(np.stack([a, b]), cfg.p_mutation, rng)
        children.append(pair[: need - made])
        made += len(pair[: need - made])
    return np.concatenate(children).astype(pop.dtype)


@dataclass
class GaTrace:
    best_fitness: list[float] = field(default_factory=list)
    mean_fitness: list[float] = field(default_factory=list)
    best_hash: list[str] = field(default_factory=list)

    def record(self, best: float, mean: float, digest: str) -> None:
        self.best_fitness.append(float(best))
        self.mean_fitness.append(float(mean))
        self.best_hash.append(digest)

    def __len__(self) -> int:
        return len(self.best_fitness)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["generation", "best_fitness", "mean_fitness"])
            for g, (b, m) in enumerate(zip(self.best_fitness, self.mean_fitness)):
                w.writerow([g, f"{b:.6g}", f"{m:.6g}"])


@dataclass
class GaResult:
    best_bits: np.ndarray
    best_fitness: float
    trace: GaTrace
    final_population: np.ndarray
    final_fitness: np.ndarray
    evaluations: int


class FitnessCache:
    """Memoizes per-chromosome fitness; values depend only on bits and master seed."""

    def __init__(self, rho: DensityMatrix, cfg: GaConfig, inner: InnerMinConfig, enabled: bool = True):
        self.rho, self.cfg, self.inner, self.enabled = rho, cfg, inner, enabled
        self._store: dict[bytes, float] = {}
        self.evaluations = 0

    def __call__(self, pop: np.ndarray) -> np.ndarray:
        keys = [np.packbits(row).tobytes() for row in pop]
        if not self.enabled:
            self.evaluations += len(pop)
            return fitness_batch(pop, self.rho, self.cfg, self.inner).fitness
        missing = {}
        for i, k in enumerate(keys):
            if k not in self._store and k not in missing:
                missing[k] = i
        if missing:
            rows = list(missing.values())
            vals = fitness_batch(pop[rows], self.rho, self.cfg, self.inner).fitness
            self.evaluations += len(rows)
            self._store.update(zip(missing.keys(), vals.tolist()))
        return np.array([self._store[k] for k in keys])


def run_ga(rho: DensityMatrix, cfg: GaConfig, inner: InnerMinConfig, cache: bool = True, progress=None) -> GaResult:
    """Fixed-budget generation loop from a uniform random population; returns the best-ever individual."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x6A]))
    length = chromosome_length(rho.dims)
    pop = rng.integers(0, 2, size=(cfg.pop_size, length), dtype=np.uint8)
    score = FitnessCache(rho, cfg, inner, enabled=cache)
    trace = GaTrace()
    best_bits, best_fit = None, -np.inf
    fit = None
    for gen in range(cfg.generations):
        fit = score(pop)
        i = int(np.argmax(fit))
        if fit[i] > best_fit:
            best_fit, best_bits = float(fit[i]), pop[i].copy()
        trace.record(best_fit, float(np.mean(fit[np.isfinite(fit)])) if np.isfinite(fit).any() else -np.inf,
                     chromosome_digest(best_bits).hex())
        if progress is not None:
            progress(gen, trace)
        if gen + 1 < cfg.generations:
            pop = evolve(pop, fit, cfg, rng)
    return GaResult(best_bits, best_fit, trace, pop, fit, score.evaluations)
