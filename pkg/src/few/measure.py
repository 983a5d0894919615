"""E(rho) = max{0, max_Z [min_s Tr(Z rho_s) - Tr(Z rho)]} and property checks.

The GA's best candidates are re-scored with a larger inner-minimization
budget, because a chromosome whose inner search happened to miss the true
minimum carries an inflated fitness. The winner is then improved by
cutting-plane refinement (:mod:`few.refine`), which also yields an upper bound
on E. Any certified result is checked by :func:`few.witness.verify_witness`;
a product-state violation found there lowers mu and the fitness is recomputed.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from few.ga import GaConfig, GaResult, GaTrace, chromosome_digest, decode, run_ga, state_coeffs
from few.innermin import InnerMinConfig, min_sep_expectation_batch
from few.refine import product_coeffs, refine_cutting_plane
from few.states import DensityMatrix, apply_local_unitary
from few.witness import TracelessObservable, VerificationReport, Witness, extract_witness, tau_norm_sq, verify_witness


class Verdict(str, enum.Enum):
    CERTIFIED = "EntanglementCertified"
    UNDETECTED = "Undetected"


@dataclass(frozen=True)
class MeasureOptions:
    n_candidates: int = 5
    polish_factor: int = 4
    verify_budget: int = 2000
    max_corrections: int = 3
    refine_iters: int = 100

    def __post_init__(self):
        if self.n_candidates < 1 or self.polish_factor < 1 or self.verify_budget < 1:
            raise ValueError("n_candidates, polish_factor and verify_budget must be >= 1")
        if self.max_corrections < 0 or self.refine_iters < 0:
            raise ValueError("max_corrections and refine_iters must be >= 0")


@dataclass
class MeasureResult:
    e_value: float
    best_z: TracelessObservable
    mu: float
    witness: Witness
    verdict: Verdict
    trace: GaTrace
    best_fitness: float
    ga_fitness: float
    verification: VerificationReport | None
    ga_config: GaConfig
    inner_config: InnerMinConfig
    evaluations: int = 0
    upper_bound: float | None = None
    refine_iterations: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.ga_config.seed

    def to_json(self) -> dict:
        v = self.verification
        return {
            "e_value": self.e_value,
            "verdict": self.verdict.value,
            "mu": self.mu,
            "best_fitness": self.best_fitness,
            "ga_fitness": self.ga_fitness,
            "seed": self.seed,
            "dims": list(self.best_z.dims),
            "tau": self.best_z.tau.ravel().tolist(),
            "witness": self.witness.to_json(),
            "verification": None
            if v is None
            else {
                "target_value": v.target_value,
                "separable_min": v.separable_min,
                "passed": v.passed,
                "budget": v.budget,
                "reason": v.reason,
            },
            "ga_config": asdict(self.ga_config),
            "inner_config": asdict(self.inner_config),
            "evaluations": self.evaluations,
            "upper_bound": self.upper_bound,
            "refine_iterations": self.refine_iterations,
            "trace": {
                "best_fitness": self.trace.best_fitness,
                "mean_fitness": self.trace.mean_fitness,
            },
            "notes": self.notes,
        }


def _candidates(ga: GaResult, k: int) -> np.ndarray:
    rows, seen = [ga.best_bits], {chromosome_digest(ga.best_bits)}
    for i in np.argsort(-ga.final_fitness, kind="stable"):
        if len(rows) >= k:
            break
        d = chromosome_digest(ga.final_population[i])
        if d not in seen:
            seen.add(d)
            rows.append(ga.final_population[i])
    return np.stack(rows)


def compute_few_measure(
    rho: DensityMatrix,
    ga_cfg: GaConfig,
    inner_cfg: InnerMinConfig,
    options: MeasureOptions | None = None,
    progress=None,
) -> MeasureResult:
    """Run the GA on ``rho`` and turn its best operator into (E, witness, verdict)."""
    opts = options or MeasureOptions()
    dims = rho.dims
    ga = run_ga(rho, ga_cfg, inner_cfg, progress=progress)

    cand = _candidates(ga, opts.n_candidates)
    tau = decode(cand, ga_cfg, dims)
    tau = tau / np.sqrt(tau_norm_sq(tau.reshape((len(tau),) + tuple(d * d for d in dims)), dims))[:, None]
    f2 = tau @ state_coeffs(rho)
    polish = replace(
        inner_cfg,
        n_probe=inner_cfg.n_probe * opts.polish_factor,
        n_refine=inner_cfg.n_refine * opts.polish_factor,
    )
    rngs = [np.random.default_rng(np.random.SeedSequence([ga_cfg.seed, 0x70, i])) for i in range(len(cand))]
    inner_res = min_sep_expectation_batch(tau, dims, polish, rngs)
    mu = inner_res.mu
    fit = mu - f2
    j = int(np.argmax(fit))
    best_tau, best_mu, best_fit = tau[j], float(mu[j]), float(fit[j])

    notes = []
    upper, n_refine = None, 0
    if opts.refine_iters:
        c = state_coeffs(rho)
        ref = refine_cutting_plane(
            c,
            dims,
            best_tau,
            best_mu,
            product_coeffs(inner_res.argmin, dims),
            polish,
            opts.refine_iters,
            np.random.default_rng(np.random.SeedSequence([ga_cfg.seed, 0x72])),
        )
        upper, n_refine = ref.upper_bound, ref.iterations
        if ref.fitness > best_fit:
            notes.append(f"refinement raised fitness from {best_fit:.6g} to {ref.fitness:.6g}")
        best_tau, best_mu, best_fit = ref.tau, ref.mu, ref.fitness
    f2j = float(best_tau @ state_coeffs(rho))
    z = TracelessObservable(best_tau.reshape(tuple(d * d for d in dims)), dims, normalized=True)

    report = None
    verify_rng = np.random.default_rng(np.random.SeedSequence([ga_cfg.seed, 0x76]))
    for _ in range(opts.max_corrections + 1):
        if best_fit <= 0:
            break
        w = extract_witness(z, best_mu)
        report = verify_witness(w, rho, opts.verify_budget, verify_rng, inner=inner_cfg)
        if report.passed or report.reason != "negative on a product state":
            break
        # A product state below mu was found: it is a better inner minimum.
        notes.append(f"mu lowered by {-report.separable_min:.3g} during verification")
        best_mu += report.separable_min
        best_fit = best_mu - f2j

    e_value = max(0.0, best_fit)
    certified = best_fit > 0 and report is not None and report.passed
    meta = {"seed": ga_cfg.seed, "generations": ga_cfg.generations, "fitness": best_fit}
    return MeasureResult(
        e_value=e_value,
        best_z=z,
        mu=best_mu,
        witness=extract_witness(z, best_mu, metadata=meta),
        verdict=Verdict.CERTIFIED if certified else Verdict.UNDETECTED,
        trace=ga.trace,
        best_fitness=best_fit,
        ga_fitness=ga.best_fitness,
        verification=report if best_fit > 0 else None,
        ga_config=ga_cfg,
        inner_config=inner_cfg,
        evaluations=ga.evaluations,
        upper_bound=upper,
        refine_iterations=n_refine,
        notes=notes,
    )


def few_measure(rho: DensityMatrix, ga_cfg: GaConfig, inner_cfg: InnerMinConfig, options=None) -> float:
    return compute_few_measure(rho, ga_cfg, inner_cfg, options).e_value


def derived_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


def check_lu_invariance(
    rho: DensityMatrix,
    unitaries: Sequence[np.ndarray],
    ga_cfg: GaConfig,
    inner_cfg: InnerMinConfig,
    rotated_seed: int | None = None,
    options=None,
) -> tuple[float, float, float]:
    """E(rho) and E(U rho U^dagger) for local U, with an independent seed unless ``rotated_seed`` is given."""
    rotated = apply_local_unitary(rho, unitaries)
    seed = derived_seed(ga_cfg.seed, 0x4C55) if rotated_seed is None else rotated_seed
    e0 = few_measure(rho, ga_cfg, inner_cfg, options)
    e1 = few_measure(rotated, replace(ga_cfg, seed=seed), inner_cfg, options)
    return e0, e1, abs(e1 - e0)


def check_convexity(
    rho: DensityMatrix,
    sigma: DensityMatrix,
    lam: float,
    ga_cfg: GaConfig,
    inner_cfg: InnerMinConfig,
    slack: float = 0.03,
    options=None,
) -> tuple[float, float, bool]:
    """(E(lam rho + (1-lam) sigma), lam E(rho) + (1-lam) E(sigma), lhs <= rhs + slack)."""
    if not 0 <= lam <= 1:
        raise ValueError(f"lambda = {lam} outside [0, 1]")
    lhs = few_measure(rho.mix(sigma, lam), ga_cfg, inner_cfg, options)
    rhs = lam * few_measure(rho, ga_cfg, inner_cfg, options) + (1 - lam) * few_measure(sigma, ga_cfg, inner_cfg, options)
    return lhs, rhs, bool(lhs <= rhs + slack)
